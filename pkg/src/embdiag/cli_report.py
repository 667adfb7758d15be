"""Config ingestion, pipeline orchestration, and report emission.

One JSON config describes the domain, the weight (with its declared
zero/infinity sets), which checks to run, tolerances, and output paths.
The pipeline runs admissibility first (a failure means the weighted
space itself may be ill-defined), then the necessary checks, the
sufficient presets (auto-selected by weight family, overridable), the
equivalence transfer, and the spectral probe; everything lands in one
DiagnosticVerdict whose evidence trail names the mathematical result
behind each check.  Exit codes carry operational status only.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import measure_engine as me
from . import necessary_checks as nc
from . import spectral_oracle as so
from . import sufficient_checks as sc
from .domain_weight import (
    DomainSpec,
    PointSet,
    WeightSpec,
    admissibility_check,
)
from .errors import (
    ConfigError,
    DomainError,
    EmbDiagError,
    PresetInapplicableError,
)
from .expressions import EvalFailure, compile_profile_expression
from . import verdicts as vd
from .verdicts import (
    CheckOutcome,
    DiagnosticVerdict,
    COMPACT_CERTIFIED,
    COMPACT_SUPPORTED,
    INCONCLUSIVE,
    NONCOMPACT_CERTIFIED,
    NONCOMPACT_SUPPORTED,
)

SCHEMA_VERSION = 1
TOOL_NAME = "embdiag"
TOOL_VERSION = "0.1.0"

ALL_STAGES = ("admissibility", "necessary", "sufficient", "spectral")
PRESET_NAMES = ("auto", "none", "boundary_profile", "radial",
                "singular_boundary", "singular_point", "log_example")

DEFAULTS = {
    "p": 2.0,
    "tolerances": {"measure": 1e-9, "tail": 1e-12, "surface": 1e-10},
    "checks": {
        "run": list(ALL_STAGES),
        "preset": "auto",
        "fat_scan": {"edge": None, "lambda": None,
                     "window_radii": [4.0, 8.0, 16.0]},
        "tail": {"eps": 1.0, "delta": 0.1,
                 "r_grid": [2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
                 "k_list": [0.5, 1.0, 2.0, 4.0],
                 "exp_r_grid": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]},
        "surface": {"eps": 1.0, "r_grid": [4.0, 8.0, 16.0, 32.0, 64.0]},
        "spectral": {"resolutions": [400, 800, 1600],
                     "truncations": [6.0, 8.0, 12.0],
                     "lambda_list": [0.5, 1.5, 2.5, 4.5, 8.5]},
    },
    "output": {"dir": "embdiag_out", "formats": ["text", "structured", "csv"]},
}


@dataclass
class PipelinePlan:
    p: float
    run: tuple
    preset: str
    fat_scan: dict
    tail: dict
    surface: dict
    spectral: dict
    tolerances: dict
    output: dict
    config_echo: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

def _reject_unknown(obj, allowed, where):
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}",
                              field=f"{where}.{key}")


def _merged(defaults, given, where):
    out = {}
    for key, val in defaults.items():
        if isinstance(val, dict):
            out[key] = _merged(val, given.get(key, {}), f"{where}.{key}")
        else:
            out[key] = given.get(key, val)
    _reject_unknown(given, set(defaults), where)
    return out


def parse_config(path):
    """Read and validate a config file; returns (domain, weight, plan)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist", field="path")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}",
                          field="json") from exc
    return parse_config_dict(raw)


def parse_config_dict(raw):
    _reject_unknown(raw, {"schema_version", "p", "domain", "weight", "checks",
                          "tolerances", "output"}, "config")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got "
                          f"{version!r}", field="schema_version")
    if "domain" not in raw or "weight" not in raw:
        raise ConfigError("config needs both 'domain' and 'weight' sections",
                          field="domain")
    domain = _parse_domain(raw["domain"])
    weight = _parse_weight(raw["weight"], domain)
    p = float(raw.get("p", DEFAULTS["p"]))
    if p < 1:
        raise ConfigError("p must be >= 1", field="p")
    checks = _merged(DEFAULTS["checks"], raw.get("checks", {}), "checks")
    tolerances = _merged(DEFAULTS["tolerances"], raw.get("tolerances", {}),
                         "tolerances")
    output = _merged(DEFAULTS["output"], raw.get("output", {}), "output")
    run = tuple(checks["run"])
    for stage in run:
        if stage not in ALL_STAGES:
            raise ConfigError(f"unknown stage {stage!r} in checks.run",
                              field="checks.run")
    preset = checks["preset"]
    if preset not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {preset!r}", field="checks.preset")
    _validate_preset_domain(preset, domain, weight)
    echo = {"schema_version": SCHEMA_VERSION, "p": p,
            "domain": domain.describe(), "weight": weight.describe(),
            "checks": checks, "tolerances": tolerances, "output": output}
    plan = PipelinePlan(p=p, run=run, preset=preset,
                        fat_scan=checks["fat_scan"], tail=checks["tail"],
                        surface=checks["surface"], spectral=checks["spectral"],
                        tolerances=tolerances, output=output,
                        config_echo=echo)
    return domain, weight, plan


def _validate_preset_domain(preset, domain, weight):
    if preset == "radial" and domain.kind != "full_space":
        raise ConfigError("preset 'radial' requires a full_space domain",
                          field="checks.preset")
    if preset in ("boundary_profile", "singular_boundary") \
            and not domain.is_bounded:
        raise ConfigError(f"preset {preset!r} requires a bounded domain",
                          field="checks.preset")
    if preset == "log_example" and weight.family != "log_root_example":
        raise ConfigError("preset 'log_example' requires the "
                          "log_root_example weight family",
                          field="checks.preset")


def _parse_domain(obj):
    _reject_unknown(obj, {"shape", "a", "b", "lo", "hi", "center", "radius",
                          "dimension", "truncation_radius"}, "domain")
    shape = obj.get("shape")
    try:
        if shape == "interval":
            a = float(obj.get("a", math.nan))
            b = float(obj.get("b", math.nan))
            if math.isnan(a) or math.isnan(b):
                raise ConfigError("interval needs finite-or-inf 'a' and 'b'",
                                  field="domain.a")
            return DomainSpec.interval(
                a, b, truncation_radius=float(obj.get("truncation_radius",
                                                      32.0)))
        if shape == "box":
            return DomainSpec.box(obj["lo"], obj["hi"])
        if shape == "ball":
            return DomainSpec.ball(obj["center"], float(obj["radius"]))
        if shape == "full_space":
            return DomainSpec.full_space(
                int(obj.get("dimension", 1)),
                truncation_radius=float(obj.get("truncation_radius", 32.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid domain parameters: {exc}",
                          field="domain") from exc
    except DomainError as exc:
        raise ConfigError(str(exc), field="domain") from exc
    raise ConfigError(f"unknown domain shape {shape!r} (bounded_smooth "
                      "domains are API-only: they need a callable distance)",
                      field="domain.shape")


_WEIGHT_KEYS = {"family", "value", "expr", "profile", "grid", "values",
                "parts", "actual", "reference", "alpha", "beta", "zero_set",
                "infinity_set", "bounded_above", "doubling"}


def _parse_weight(obj, domain):
    _reject_unknown(obj, _WEIGHT_KEYS, "weight")
    family = obj.get("family")
    dim = domain.dimension
    common = {}
    if obj.get("zero_set"):
        common["zero_set"] = PointSet.of(*obj["zero_set"], dimension=dim)
    if obj.get("infinity_set"):
        common["infinity_set"] = PointSet.of(*obj["infinity_set"],
                                             dimension=dim)
    if "bounded_above" in obj:
        common["bounded_above"] = obj["bounded_above"]
    if "doubling" in obj:
        common["doubling"] = bool(obj["doubling"])
    try:
        if family == "constant":
            return WeightSpec.constant(float(obj["value"]), dim, **common)
        if family == "expression":
            return WeightSpec.expression(str(obj["expr"]), dim, domain=domain,
                                         **common)
        if family == "boundary_profile":
            return WeightSpec.boundary_profile(str(obj["profile"]), domain,
                                               **common)
        if family == "radial":
            return WeightSpec.radial(str(obj["profile"]), dim, **common)
        if family == "point_singular":
            return WeightSpec.point_singular(str(obj["profile"]), dim,
                                             **common)
        if family == "tabulated":
            return WeightSpec.tabulated([obj["grid"]] if dim == 1
                                        else obj["grid"], obj["values"],
                                        **common)
        if family == "product":
            parts = [_parse_weight(p, domain) for p in obj["parts"]]
            return WeightSpec.product(parts, **common)
        if family == "equivalent_to":
            actual = _parse_weight(obj["actual"], domain)
            reference = _parse_weight(obj["reference"], domain)
            alpha = float(obj["alpha"])
            beta = float(obj["beta"])
            if alpha > beta:
                raise ConfigError("equivalent_to needs alpha <= beta",
                                  field="weight.alpha")
            return WeightSpec.equivalent_to(actual, reference, alpha, beta,
                                            **common)
        if family == "log_root_example":
            return WeightSpec.log_root_example()
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid weight parameters: {exc}",
                          field="weight") from exc
    except (DomainError, EmbDiagError) as exc:
        raise ConfigError(str(exc), field="weight") from exc
    raise ConfigError(f"unknown weight family {family!r}",
                      field="weight.family")


# ---------------------------------------------------------------------------
# Weight-shape analysis for preset auto-selection
# ---------------------------------------------------------------------------

@dataclass
class FaceTrace:
    """Behaviour of the weight along the inward normal of one boundary face."""

    location: float
    direction: float            # +1 from the left endpoint, -1 from the right
    kind: str                   # vanishing | singular | positive
    profile: object             # callable f(s) = w(endpoint + direction*s)


def interval_face_traces(w, omega):
    if omega.kind != "interval" or not omega.is_bounded:
        raise DomainError("face traces need a bounded interval")
    width = omega.b - omega.a
    traces = []
    for endpoint, direction in ((omega.a, 1.0), (omega.b, -1.0)):
        def prof(s, e=endpoint, d=direction):
            return w.raw_value(np.array([e + d * s]), omega)

        vals = []
        for k in range(3, 41):
            s = width * 2.0 ** (-k)
            try:
                vals.append(prof(s))
            except EvalFailure:
                vals.append(math.inf)
        finite = [v for v in vals if math.isfinite(v)]
        if not finite:
            kind = "singular"
        elif vals[-1] <= 1e-5 * max(max(finite), 1e-300):
            kind = "vanishing"
        elif (not math.isfinite(vals[-1])) or \
                vals[-1] >= 1e5 * max(min(finite), 1e-300) or vals[-1] >= 1e9:
            kind = "singular"
        else:
            kind = "positive"
        traces.append(FaceTrace(endpoint, direction, kind, prof))
    return traces


def _log_profile_from_source(source):
    """log of an exp(...) profile, recovered from its expression source."""
    if not source:
        return None
    text = source.strip()
    if text.startswith("exp(") and text.endswith(")"):
        inner = text[4:-1]
        depth = 0
        for ch in inner:   # the trailing ')' must close the exp call
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
                if depth < 0:
                    return None
        if depth == 0:
            try:
                return compile_profile_expression(inner)
            except EmbDiagError:
                return None
    return None


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

def run_pipeline(omega, weight, plan, _transfer_depth=0):
    """Run the configured checks and combine their verdicts."""
    evidence = []
    artifacts = {}

    adm = _run_admissibility(omega, weight, plan, evidence)
    if adm is not None and not adm.holds:
        verdict = DiagnosticVerdict(INCONCLUSIVE, evidence)
        verdict.evidence[-1].summary += (
            "; the weighted space may be ill-defined, remaining checks "
            "skipped")
        return verdict, artifacts

    if "necessary" in plan.run:
        _run_necessary(omega, weight, plan, evidence, artifacts)
    if "sufficient" in plan.run:
        _run_sufficient(omega, weight, plan, evidence, artifacts,
                        _transfer_depth)
    if "spectral" in plan.run:
        _run_spectral(omega, weight, plan, evidence, artifacts)

    return vd.combine(evidence), artifacts


def _run_admissibility(omega, weight, plan, evidence):
    if "admissibility" not in plan.run:
        return None
    try:
        report = admissibility_check(weight, omega, plan.p)
    except EmbDiagError as exc:
        evidence.append(CheckOutcome("admissibility", error=str(exc),
                                     summary="admissibility check failed to "
                                             "run"))
        return None
    evidence.append(CheckOutcome(
        "admissibility", None,
        f"{report.condition_checked} condition "
        f"{'holds' if report.holds else 'FAILS'} for p={plan.p:g}",
        {"holds": report.holds, "witness": report.witness}))
    return report


def _run_necessary(omega, weight, plan, evidence, artifacts):
    tol = plan.tolerances["measure"]
    try:
        fv = nc.finite_volume_check(weight, omega, tol)
        evidence.append(CheckOutcome(
            "finite_volume", fv.verdict,
            fv.note, {"bounded": fv.bounded, "total": _san(fv.total),
                      "refused": fv.refused,
                      "sampled_sup": _san(fv.sampled_sup)}))
    except EmbDiagError as exc:
        evidence.append(CheckOutcome("finite_volume", error=str(exc)))

    edge = plan.fat_scan["edge"]
    if edge is None:
        lo, hi = omega.bounding_box()
        edge = 1.0 if not omega.is_bounded else float(np.min(hi - lo)) / 8.0
    lam = plan.fat_scan["lambda"]
    try:
        scan = nc.fat_cube_scan(weight, omega, edge, lam,
                                plan.fat_scan["window_radii"], tol)
        evidence.append(CheckOutcome(
            "fat_cube_scan", scan.verdict, scan.summary,
            {"edge": scan.edge, "lambda": scan.lam,
             "counts": _san(list(scan.counts)), "basis": scan.basis}))
        artifacts["scan.csv"] = scan.csv_rows()
    except EmbDiagError as exc:
        evidence.append(CheckOutcome("fat_cube_scan", error=str(exc)))

    if omega.is_bounded:
        return
    tail_tol = plan.tolerances["tail"]
    t = plan.tail
    try:
        td = nc.tail_decay_check(weight, omega, t["eps"], t["delta"],
                                 t["r_grid"], tail_tol)
        evidence.append(CheckOutcome(
            "tail_decay", td.verdict, td.note,
            {"eps": t["eps"], "delta": t["delta"],
             "rows": _san([list(r) for r in td.rows])}))
    except EmbDiagError as exc:
        evidence.append(CheckOutcome("tail_decay", error=str(exc)))
    s = plan.surface
    try:
        sr = nc.surface_ratio_limit(weight, omega, s["eps"], s["r_grid"],
                                    plan.tolerances["surface"])
        note = sr.note if sr.applicable else f"inapplicable: {sr.note}"
        evidence.append(CheckOutcome(
            "surface_ratio", sr.verdict, note,
            {"eps": s["eps"], "limit_estimate": _san(sr.limit_estimate),
             "applicable": sr.applicable,
             "rows": _san([list(r) for r in sr.rows])}))
    except EmbDiagError as exc:
        evidence.append(CheckOutcome("surface_ratio", error=str(exc)))
    try:
        ed = nc.exponential_decay_check(weight, omega, t["k_list"],
                                        t["exp_r_grid"], tail_tol)
        note = ed.note if ed.applicable else f"inapplicable: {ed.note}"
        evidence.append(CheckOutcome(
            "exponential_decay", ed.verdict, note,
            {"violating_k": _san(list(ed.violating_k)),
             "applicable": ed.applicable}))
    except EmbDiagError as exc:
        evidence.append(CheckOutcome("exponential_decay", error=str(exc)))


def _run_sufficient(omega, weight, plan, evidence, artifacts, depth):
    if weight.family == "equivalent_to":
        _run_equivalence(omega, weight, plan, evidence, artifacts, depth)
        return
    name, builder = _select_preset(omega, weight, plan)
    if name is None:
        evidence.append(CheckOutcome(
            "flow_certificate", None,
            "no flow preset applies to this weight family/domain", {}))
        return
    try:
        built = builder()
    except PresetInapplicableError as exc:
        evidence.append(CheckOutcome(
            "flow_certificate", None,
            f"preset {name} inapplicable: {exc}",
            {"preset": name, "failed_hypothesis": exc.failed_hypothesis}))
        return
    except EmbDiagError as exc:
        evidence.append(CheckOutcome("flow_certificate", error=str(exc),
                                     details={"preset": name}))
        return
    if isinstance(built, sc.RadialRoute):
        _radial_route_evidence(omega, weight, plan, built, evidence)
        return
    certs = built if isinstance(built, list) else [built]
    results = [sc.adams_verify(cert) for cert in certs]
    worst = min(results, key=lambda r: {COMPACT_CERTIFIED: 2,
                                        COMPACT_SUPPORTED: 1}.get(r.overall, 0))
    verdict = worst.overall if worst.passed() else None
    detail = {
        "preset": name,
        "certificates": [
            {"label": r.label,
             "overall": r.overall,
             "conditions": {k: {"passed": v.passed, "detail": v.detail}
                            for k, v in r.conditions.items()},
             "dN_at_c": _san([list(x) for x in r.dn_at_c]),
             "dN_integral": _san([list(x) for x in r.dn_integral]),
             "closed_form_max_gap": _san(r.closed_form_max_gap)}
            for r in results],
    }
    summary = (f"preset {name}: " +
               "; ".join(f"{r.label} -> {r.overall}" for r in results))
    evidence.append(CheckOutcome("flow_certificate", verdict, summary, detail))
    rows = [("N", "t", "dN", "det", "dPhi_dt_norm")]
    for r in results:
        rows.extend(r.dn_table)
    artifacts["dN.csv"] = rows
    if omega.dimension == 1 and omega.is_bounded and verdict:
        _subgraph_evidence(omega, weight, plan, evidence)


def _subgraph_evidence(omega, weight, plan, evidence):
    try:
        S = sc.build_subgraph(weight, omega)
        evidence.append(CheckOutcome(
            "subgraph_lift", None,
            f"subgraph volume identity holds (defect "
            f"{_fmt(S.volume_defect)})",
            {"mu_w": _san(S.mu_w), "volume_estimate": _san(S.volume_estimate),
             "volume_defect": _san(S.volume_defect)}))
    except EmbDiagError as exc:
        evidence.append(CheckOutcome("subgraph_lift", error=str(exc)))


def _radial_route_evidence(omega, weight, plan, route, evidence):
    s = plan.surface
    try:
        sr = nc.surface_ratio_limit(weight, omega, s["eps"], s["r_grid"],
                                    plan.tolerances["surface"])
    except EmbDiagError:
        sr = None
    if sr is not None and sr.applicable and sr.verdict:
        evidence.append(CheckOutcome(
            "flow_certificate", sr.verdict,
            "radial decay condition fails; surface-ratio limit "
            f"{_fmt(sr.limit_estimate)} certifies non-compactness "
            "(the radial case is an equivalence)",
            {"route": "surface_ratio", "ratio_rows": _san(route.ratio_rows),
             "limit_estimate": _san(sr.limit_estimate)}))
        return
    evidence.append(CheckOutcome(
        "flow_certificate", NONCOMPACT_CERTIFIED,
        "radial decay condition fails with a positive limit; for "
        "nonincreasing radial weights this is equivalent to "
        "non-compactness", {"route": "radial_iff",
                            "ratio_rows": _san(route.ratio_rows)}))


def _run_equivalence(omega, weight, plan, evidence, artifacts, depth):
    if depth >= 1:
        evidence.append(CheckOutcome(
            "equivalence", None,
            "nested equivalence transfers are not followed", {}))
        return
    record = sc.equivalence_reduce(weight, weight.reference, weight.alpha,
                                   weight.beta, omega)
    if not record.passed:
        evidence.append(CheckOutcome(
            "equivalence", None,
            f"two-sided bound violated at {record.witness}; transfer refused",
            {"alpha": weight.alpha, "beta": weight.beta,
             "witness": _san(record.witness)}))
        return
    sub_verdict, _ = run_pipeline(omega, weight.reference, plan,
                                  _transfer_depth=depth + 1)
    transferred = sub_verdict.overall if sub_verdict.overall != INCONCLUSIVE \
        else None
    evidence.append(CheckOutcome(
        "equivalence", transferred,
        f"bound alpha={weight.alpha:g}, beta={weight.beta:g} holds at "
        f"{record.samples_checked} samples; reference verdict "
        f"{sub_verdict.overall} transfers",
        {"alpha": weight.alpha, "beta": weight.beta,
         "samples_checked": record.samples_checked,
         "reference_verdict": sub_verdict.overall,
         "reference_evidence": [e.check for e in sub_verdict.evidence]}))


def _select_preset(omega, weight, plan):
    """(name, builder) for the flow preset matching weight family/domain."""
    choice = plan.preset
    if choice == "none":
        return None, None
    if choice == "log_example" or (choice == "auto"
                                   and weight.family == "log_root_example"):
        return "log_example", sc.preset_log_example
    if choice == "radial" or (choice == "auto" and omega.kind == "full_space"
                              and weight.is_radial
                              and weight.family != "constant"):
        g = weight.radial_profile()
        log_g = _log_profile_from_source(weight.profile_source)
        return "radial", lambda: sc.preset_radial(
            g, omega.dimension, omega, log_g=log_g)
    if choice == "singular_point" or (choice == "auto"
                                      and weight.family == "point_singular"
                                      and omega.is_bounded):
        f = weight.radial_profile()
        return "singular_point", lambda: sc.preset_singular_point(f, omega)
    if omega.kind == "interval" and omega.is_bounded:
        try:
            traces = interval_face_traces(weight, omega)
        except EmbDiagError:
            return None, None
        singular = [t for t in traces if t.kind == "singular"]
        vanishing = [t for t in traces if t.kind == "vanishing"]
        a = 0.25 * (omega.b - omega.a)
        if choice == "singular_boundary" or (choice == "auto" and singular):
            faces = singular or traces
            return "singular_boundary", lambda: [
                _build_singular_face(t, omega, a) for t in faces]
        if choice == "boundary_profile" or (choice == "auto" and vanishing):
            faces = vanishing or traces
            return "boundary_profile", lambda: [
                sc.preset_boundary_profile(t.profile, a, omega)
                for t in faces]
    return None, None


def _build_singular_face(trace, omega, a):
    return sc.preset_singular_boundary(trace.profile, omega, delta=a)


def _run_spectral(omega, weight, plan, evidence, artifacts):
    if plan.p != 2:
        evidence.append(CheckOutcome(
            "spectral_probe", None,
            f"spectral oracle needs p = 2 (configured p = {plan.p:g})", {}))
        return
    cfg = plan.spectral
    try:
        verdict = so.compactness_probe(
            weight, omega, cfg["resolutions"],
            cfg["truncations"] if not omega.is_bounded else None,
            cfg["lambda_list"])
    except EmbDiagError as exc:
        evidence.append(CheckOutcome("spectral_probe", error=str(exc)))
        return
    mapped = {"DiscreteConsistent": COMPACT_SUPPORTED,
              "EssentialSpectrumEvidence": NONCOMPACT_SUPPORTED}.get(
                  verdict.classification)
    evidence.append(CheckOutcome(
        "spectral_probe", mapped,
        f"{verdict.classification}: {verdict.note}",
        {"classification": verdict.classification,
         "counting_table": _san({str(k): v
                                 for k, v in verdict.counting_table.items()})}))
    artifacts["spectrum.csv"] = so.spectrum_csv_rows(verdict.counting_table)


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

def _san(value):
    """Make a value JSON-safe and deterministic."""
    if isinstance(value, dict):
        return {str(k): _san(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_san(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, (str, int, bool)) or value is None:
        return value
    if isinstance(value, np.ndarray):
        return [_san(v) for v in value.tolist()]
    return str(value)


def _fmt(x):
    try:
        return f"{float(x):.6g}"
    except (TypeError, ValueError):
        return str(x)


def emit_report(verdict, plan, out_dir=None, formats=None, artifacts=None,
                timestamp=None):
    """Write the text/structured reports and CSV side files.

    The structured report is byte-identical across runs of the same config
    and version; the timestamp lives in a single header field (pass a
    fixed one to pin it).
    """
    out_dir = Path(out_dir if out_dir is not None else plan.output["dir"])
    formats = list(formats if formats is not None else plan.output["formats"])
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = artifacts or {}
    written = []
    stamp = timestamp if timestamp is not None else \
        datetime.datetime.now(datetime.timezone.utc).isoformat()

    structured = {
        "header": {"tool": TOOL_NAME, "version": TOOL_VERSION,
                   "generated_at": stamp,
                   "config_echo": _san(plan.config_echo)},
        "verdict": {"overall": verdict.overall,
                    "alarm": verdict.alarm,
                    "conflicts": _san(verdict.conflicts)},
        "evidence": [
            {"check": e.check, "anchor": e.anchor,
             "verdict": e.verdict, "summary": e.summary,
             "error": e.error, "details": _san(e.details)}
            for e in verdict.evidence],
    }
    if "structured" in formats:
        path = out_dir / "report.json"
        path.write_text(json.dumps(structured, indent=2, sort_keys=True)
                        + "\n")
        written.append(path)
    if "text" in formats:
        path = out_dir / "report.txt"
        path.write_text(_text_report(verdict, plan, stamp))
        written.append(path)
    if "csv" in formats:
        for name, rows in artifacts.items():
            path = out_dir / name
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                for row in rows:
                    writer.writerow(row)
            written.append(path)
    return written


def _text_report(verdict, plan, stamp):
    lines = []
    lines.append(f"{TOOL_NAME} {TOOL_VERSION} diagnostic report")
    lines.append(f"generated_at: {stamp}")
    lines.append("")
    lines.append(f"overall verdict: {verdict.overall}")
    if verdict.alarm:
        lines.append("SOUNDNESS ALARM: contradictory certified verdicts: "
                     f"{verdict.conflicts}")
    lines.append("")
    lines.append("evidence trail:")
    for e in verdict.evidence:
        status = e.verdict if e.verdict else ("ERROR" if e.error else "info")
        lines.append(f"  [{status}] {e.check} -- {e.anchor}")
        if e.summary:
            lines.append(f"      {e.summary}")
        if e.error:
            lines.append(f"      error: {e.error}")
    lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _add_common(sub):
    sub.add_argument("--config", required=True, help="path to the JSON config")
    sub.add_argument("--out", default=None, help="output directory")
    sub.add_argument("--format", default=None,
                     choices=["text", "structured", "both"],
                     help="report format (both = text + structured + csv)")
    sub.add_argument("--tol", type=float, default=None,
                     help="override the measure tolerance")
    sub.add_argument("--only", default=None,
                     help="comma-separated stages to run "
                          "(admissibility,necessary,sufficient,spectral)")
    sub.add_argument("--seed", type=int, default=None,
                     help="accepted and ignored: the pipeline is "
                          "deterministic")


def build_parser():
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description="numerical compactness diagnostics for weighted Sobolev "
                    "embeddings")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("check", "run the full configured pipeline"),
            ("necessary", "run only the necessary-condition checks"),
            ("sufficient", "run only the sufficient-condition presets"),
            ("spectral", "run only the spectral probe"),
            ("npc", "compute nonlinear principal components"),
            ("measure", "weighted measure of the domain plus admissibility")):
        sub = subs.add_parser(name, help=help_text)
        _add_common(sub)
        if name == "npc":
            sub.add_argument("--count", type=int, default=3,
                             help="number of components")
    return parser


def _apply_overrides(plan, args, force_only=None):
    if args.tol is not None:
        plan.tolerances["measure"] = args.tol
    only = force_only
    if args.only:
        only = tuple(s.strip() for s in args.only.split(",") if s.strip())
    if only:
        for stage in only:
            if stage not in ALL_STAGES:
                raise ConfigError(f"unknown stage {stage!r} in --only",
                                  field="--only")
        plan.run = tuple(s for s in ALL_STAGES if s in set(only))
    if args.out is not None:
        plan.output["dir"] = args.out
    if args.format is not None:
        plan.output["formats"] = (["text", "structured", "csv"]
                                  if args.format == "both"
                                  else [args.format])
    return plan


_FORCED = {"necessary": ("admissibility", "necessary"),
           "sufficient": ("admissibility", "sufficient"),
           "spectral": ("admissibility", "spectral")}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        omega, weight, plan = parse_config(args.config)
        plan = _apply_overrides(plan, args, _FORCED.get(args.command))
    except ConfigError as exc:
        print(f"config error ({exc.field}): {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "npc":
            return _run_npc_command(omega, weight, plan, args)
        if args.command == "measure":
            return _run_measure_command(omega, weight, plan)
        verdict, artifacts = run_pipeline(omega, weight, plan)
        written = emit_report(verdict, plan, artifacts=artifacts)
        print(f"overall verdict: {verdict.overall}")
        if verdict.alarm:
            print("soundness alarm: contradictory certified verdicts "
                  f"{verdict.conflicts}")
        for path in written:
            print(f"wrote {path}")
        return 0
    except EmbDiagError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


def _run_npc_command(omega, weight, plan, args):
    cfg = plan.spectral
    resolution = max(cfg["resolutions"])
    trunc = max(cfg["truncations"]) if not omega.is_bounded else None
    npcs, sol = so.compute_npcs(weight, omega, args.count, resolution, trunc)
    out_dir = Path(plan.output["dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "npc.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["order", "value", "eigenvalue"])
        for comp in npcs:
            writer.writerow([comp.order, comp.value, comp.eigenvalue])
        writer.writerow([])
        writer.writerow(["node"] + [f"phi_{c.order}" for c in npcs])
        for i, x in enumerate(sol.grid.nodes):
            writer.writerow([x] + [c.vector[i] for c in npcs])
    for comp in npcs:
        print(f"NPC {comp.order}: value={comp.value:.8g} "
              f"(eigenvalue {comp.eigenvalue:.8g})")
    print(f"wrote {path}")
    return 0


def _run_measure_command(omega, weight, plan):
    tol = plan.tolerances["measure"]
    result = me.weighted_measure(weight, me.WholeDomain(), omega, tol)
    adm = admissibility_check(weight, omega, plan.p)
    value = "divergent (certified)" if result.is_divergent \
        else f"{result.value:.12g} +- {result.error_bound:.2g}"
    print(f"weighted measure of the domain: {value}")
    print(f"admissibility ({adm.condition_checked}, p={plan.p:g}): "
          f"{'holds' if adm.holds else 'FAILS'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
