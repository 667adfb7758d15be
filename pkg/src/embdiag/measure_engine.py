"""Deterministic adaptive quadrature for weighted measures.

Everything downstream (cube scans, tail tests, flow certificates, the
spectral oracle's cross-checks) consumes this engine, so it is built for
reproducibility: no randomness, fixed summation order, and an explicit
divergence-certification rule instead of silent overflow.

Cells are bisected dyadically with a midpoint/trapezoid pair combined
into a Simpson value; cells touching a singular face (domain boundary,
declared zero/infinity points, truncation of an unbounded domain) are
graded geometrically toward the face with ratio 1/2 up to depth 48.
An integral is certified divergent when the estimate keeps growing by
at least a factor 2 across three consecutive dyadic refinement
generations while the graded-panel masses fail to decay.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .domain_weight import INFINITY, DomainSpec, WeightSpec, is_infinite_marker
from .errors import (
    BudgetExceededError,
    DomainError,
    UnsupportedRegionError,
)
from .expressions import EvalFailure

GRADING_DEPTH_CAP = 48
GENERATIONS = (1, 2, 4, 8, 16, 32, GRADING_DEPTH_CAP)
DIVERGENCE_FACTOR = 2.0
DIVERGENCE_SPAN = 3            # generations the factor is measured across
RHO_EXTRAPOLATE = 0.99         # geometric panel-tail extrapolation threshold
RHO_DIVERGENT = 0.999          # panel ratio at/above which the tail cannot sum
DEFAULT_CELL_BUDGET = 500_000
DEFAULT_TRUNCATION_DOUBLINGS = 7
ACCEPT_REL = 1e-11             # relative escape hatch when absolute shares
                               # are machine-unreachable (huge cell values)
LOCAL_REL = 1e-10              # per-cell relative refinement target

UNIT_SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


class _SingularHit(Exception):
    """An integrand evaluation failed inside a supposedly smooth cell."""

    def __init__(self, x, reason):
        super().__init__(f"singular integrand at {x}: {reason}")
        self.x = x


class _BudgetUp(Exception):
    pass


class _Budget:
    __slots__ = ("limit", "used", "accumulated")

    def __init__(self, limit=DEFAULT_CELL_BUDGET):
        self.limit = limit
        self.used = 0
        self.accumulated = 0.0

    def spend(self):
        self.used += 1
        if self.used > self.limit:
            raise _BudgetUp()


class CellRecorder:
    """Collects accepted quadrature cells for CSV inspection."""

    def __init__(self):
        self.rows = []

    def add(self, lo, hi, estimate, error):
        self.rows.append((lo, hi, estimate, error))


def dump_cells_csv(recorder, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_lo", "cell_hi", "estimate", "error"])
        for row in recorder.rows:
            writer.writerow(row)


@dataclass(frozen=True)
class MeasureResult:
    """Weighted measure of a region.

    ``value`` is a nonnegative float, or the infinity marker when
    divergence was certified (in which case ``converged`` refers to the
    certification rule, not to a numeric value, and ``error_bound`` is
    +inf).  ``converged`` means the error bound met tol * max(1, |value|):
    the tolerance is absolute for O(1) values and relative above that.
    """

    value: object
    error_bound: float
    cells_used: int
    converged: bool

    @property
    def is_divergent(self):
        return is_infinite_marker(self.value)

    def expect_value(self):
        if self.is_divergent:
            raise DomainError("measure is certified divergent")
        return self.value


@dataclass(frozen=True)
class SurfaceArea:
    """Weighted surface area of the sphere {|x| = r} inside the domain."""

    radius: float
    value: float
    method: str                  # radial_closed_form | boundary_sum_1d | lattice_shell_nd | sphere_quadrature
    flags: tuple = ()


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    @classmethod
    def interval(cls, a, b):
        return cls((float(a),), (float(b),))

    @classmethod
    def of(cls, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        return cls(tuple(lo), tuple(hi))

    @property
    def dimension(self):
        return len(self.lo)


@dataclass(frozen=True)
class BallRegion:
    center: tuple
    radius: float

    @classmethod
    def of(cls, center, radius):
        c = np.atleast_1d(np.asarray(center, dtype=float))
        return cls(tuple(c), float(radius))


@dataclass(frozen=True)
class Shell:
    """Origin-centered annulus {r_lo <= |x| <= r_hi}."""

    r_lo: float
    r_hi: float


@dataclass(frozen=True)
class Tail:
    """{x : |x| > r}."""

    r: float


class WholeDomain:
    def __repr__(self):
        return "WholeDomain()"


# ---------------------------------------------------------------------------
# 1-d core: closed adaptive cells, graded open faces
# ---------------------------------------------------------------------------

def _eval_point(f, x):
    try:
        v = f(x)
    except EvalFailure as exc:
        raise _SingularHit(x, str(exc)) from exc
    if not math.isfinite(v):
        raise _SingularHit(x, f"non-finite value {v}")
    return v


def _simpson(h, fa, fm, fb):
    trap = 0.5 * h * (fa + fb)
    midp = h * fm
    return (2.0 * midp + trap) / 3.0


EPS = float(np.finfo(float).eps)


def _adaptive_closed(f, a, b, tol, budget, recorder=None, max_depth=52,
                     accept_rel=ACCEPT_REL):
    """Adaptive bisection on [a, b]; f must be evaluable on the closure."""
    if b <= a:
        return 0.0, 0.0
    fa = _eval_point(f, a)
    fb = _eval_point(f, b)
    m = 0.5 * (a + b)
    fm = _eval_point(f, m)
    H = b - a
    total = 0.0
    err_total = 0.0
    stack = [(a, b, fa, fm, fb, _simpson(H, fa, fm, fb), 0)]
    while stack:
        budget.spend()
        x0, x1, f0, f1, f2, S, depth = stack.pop()
        h = x1 - x0
        xm = 0.5 * (x0 + x1)
        lm = 0.5 * (x0 + xm)
        rm = 0.5 * (xm + x1)
        flm = _eval_point(f, lm)
        frm = _eval_point(f, rm)
        Sl = _simpson(0.5 * h, f0, flm, f1)
        Sr = _simpson(0.5 * h, f1, frm, f2)
        S2 = Sl + Sr
        err = abs(S2 - S)
        abs_ok = err <= max(tol * h / H, accept_rel * abs(S2))
        rel_ok = err <= max(LOCAL_REL * abs(S2), accept_rel * abs(S2), 1e-300)
        too_narrow = h <= 64.0 * EPS * max(abs(x0), abs(x1))
        if (abs_ok and rel_ok) or depth >= max_depth or too_narrow:
            total += S2
            err_total += err
            budget.accumulated += S2
            if recorder is not None:
                recorder.add(x0, x1, S2, err)
        else:
            stack.append((x0, xm, f0, flm, f1, Sl, depth + 1))
            stack.append((xm, x1, f1, frm, f2, Sr, depth + 1))
    return total, err_total


@dataclass
class _PieceOutcome:
    value: float
    error: float
    divergent: bool = False
    unresolved: bool = False     # tolerance not reached and not certified


def _integrate_piece(f, a, b, tol, open_lo, open_hi, budget, recorder=None,
                     rescue=3, accept_rel=ACCEPT_REL):
    """Integrate f over (a, b) with optionally singular (open) endpoints."""
    if b <= a:
        return _PieceOutcome(0.0, 0.0)
    if not open_lo and not open_hi:
        try:
            v, e = _adaptive_closed(f, a, b, tol, budget, recorder,
                                    accept_rel=accept_rel)
            return _PieceOutcome(v, e)
        except _SingularHit as hit:
            if rescue <= 0:
                raise BudgetExceededError(
                    f"repeated singular hits near {hit.x}") from hit
            x = min(max(hit.x, a), b)
            left = _integrate_piece(f, a, x, 0.5 * tol, open_lo, True, budget,
                                    recorder, rescue - 1)
            right = _integrate_piece(f, x, b, 0.5 * tol, True, open_hi, budget,
                                     recorder, rescue - 1)
            return _combine(left, right)
    if open_lo and open_hi:
        m = 0.5 * (a + b)
        left = _integrate_piece(f, a, m, 0.5 * tol, True, False, budget,
                                recorder, rescue)
        right = _integrate_piece(f, m, b, 0.5 * tol, False, True, budget,
                                 recorder, rescue)
        return _combine(left, right)
    return _graded_face(f, a, b, tol, open_lo, budget, recorder, rescue)


def _combine(left, right):
    if left.divergent or right.divergent:
        return _PieceOutcome(math.inf, math.inf, divergent=True)
    return _PieceOutcome(left.value + right.value, left.error + right.error,
                         unresolved=left.unresolved or right.unresolved)


def _graded_face(f, a, b, tol, toward_lo, budget, recorder, rescue):
    """Geometric grading (ratio 1/2, depth <= 48) toward one singular face.

    Panels are laid down toward the face, each integrated with the closed
    adaptive rule; the remaining sliver is extrapolated geometrically when
    the panel masses decay, estimated by an open midpoint rule otherwise.
    The estimate sequence over dyadic grading generations feeds the
    divergence certificate.
    """
    L = b - a
    face = a if toward_lo else b
    sign = 1.0 if toward_lo else -1.0

    def from_s(s):
        return face + sign * s

    # Evaluating f at face + s suffers cancellation noise ~ eps*|face|/s,
    # so panels deeper than where that noise reaches ~1e-6 carry no signal;
    # cap the grading depth there (faces at 0 keep the full depth).
    depth_cap = GRADING_DEPTH_CAP
    if face != 0.0:
        clean = L * 1e-6 / (32.0 * EPS * abs(face))
        if clean > 2.0:
            depth_cap = min(depth_cap, max(8, int(math.log2(clean)) - 1))
        else:
            depth_cap = 8
    generations = tuple(g for g in GENERATIONS if g < depth_cap) + (depth_cap,)

    panel_vals = []
    panel_errs = []
    e_hist = []
    unresolved = False
    depth_done = 0
    for gen in generations:
        for k in range(depth_done, gen):
            s_hi = L * 2.0 ** (-k)
            s_lo = L * 2.0 ** (-(k + 1))
            lo_x, hi_x = sorted((from_s(s_lo), from_s(s_hi)))
            share = tol * 0.3 / ((k + 1) * (k + 2))
            noise_rel = 32.0 * EPS * (abs(face) / s_lo + 1.0)
            out = _integrate_piece(f, lo_x, hi_x, share, False, False, budget,
                                   recorder, rescue - 1,
                                   accept_rel=max(ACCEPT_REL, 4.0 * noise_rel))
            if out.divergent:
                return out
            panel_vals.append(out.value)
            panel_errs.append(out.error)
        depth_done = gen
        partial = math.fsum(panel_vals)
        tail, tail_err, rho = _panel_tail(f, from_s, panel_vals, L, gen)
        estimate = partial + tail
        e_hist.append(estimate)
        err_bound = math.fsum(panel_errs) + tail_err
        if len(e_hist) >= 2:
            delta = abs(e_hist[-1] - e_hist[-2])
            if err_bound <= 0.7 * tol and delta <= 0.3 * tol:
                return _PieceOutcome(estimate, err_bound + delta)
    if _divergence_certified(e_hist, panel_vals):
        return _PieceOutcome(math.inf, math.inf, divergent=True)
    # Not converged, not certifiably divergent: report with honest error.
    delta = abs(e_hist[-1] - e_hist[-2]) if len(e_hist) >= 2 else math.inf
    return _PieceOutcome(e_hist[-1], math.fsum(panel_errs) + tail_err + delta,
                         unresolved=True)


def _panel_tail(f, from_s, panel_vals, L, gen):
    """Estimate the mass left between the face and the deepest panel."""
    if len(panel_vals) >= 6:
        recent = panel_vals[-5:]
        if all(v > 0 for v in recent):
            ratios = [recent[i + 1] / recent[i] for i in range(len(recent) - 1)]
            rho = sorted(ratios)[len(ratios) // 2]
            spread = max(ratios) - min(ratios)
            if rho <= RHO_EXTRAPOLATE and spread <= max(0.02, 0.1 * (1.0 - rho)):
                tail = panel_vals[-1] * rho / (1.0 - rho)
                tail_err = tail * (2.0 * spread / (1.0 - rho) + 1e-9)
                return tail, abs(tail_err), rho
    s = L * 2.0 ** (-gen)
    try:
        mid = _eval_point(f, from_s(0.5 * s)) * s
    except _SingularHit:
        return 0.0, math.inf, None
    return mid, 2.0 * abs(mid) + 1e-300, None


def _divergence_certified(e_hist, panel_vals):
    if len(e_hist) < DIVERGENCE_SPAN + 1:
        return False
    tiny = 1e-12 * (1.0 + abs(e_hist[-1]))
    monotone = all(e_hist[i + 1] >= e_hist[i] - tiny for i in range(len(e_hist) - 1))
    if not monotone or e_hist[-1] <= 0:
        return False
    base = e_hist[-1 - DIVERGENCE_SPAN]
    if base <= 0 or e_hist[-1] < DIVERGENCE_FACTOR * base:
        return False
    recent = [v for v in panel_vals[-6:] if v > 0]
    if len(recent) < 3:
        return False
    ratios = [recent[i + 1] / recent[i] for i in range(len(recent) - 1)]
    rho = sorted(ratios)[len(ratios) // 2]
    return rho >= RHO_DIVERGENT


# ---------------------------------------------------------------------------
# Unbounded pieces: truncation doubling with remainder extrapolation
# ---------------------------------------------------------------------------

def _truncated_limit(segment_fn, levels, tol):
    """Sum segment integrals over doubling truncation levels.

    ``segment_fn(lo, hi)`` integrates one ring/segment and returns a
    _PieceOutcome.  Returns a _PieceOutcome for the full improper integral,
    with Richardson-style geometric extrapolation of the remainder trend
    and the shared divergence certificate.
    """
    values = []
    errors = []
    e_hist = []
    prev_hi = None
    for lo, hi in levels:
        if prev_hi is not None and abs(lo - prev_hi) > 1e-9 * (1 + abs(hi)):
            raise UnsupportedRegionError("truncation levels must be contiguous")
        out = segment_fn(lo, hi)
        if out.divergent:
            return out
        prev_hi = hi
        values.append(out.value)
        errors.append(out.error)
        partial = math.fsum(values)
        tail, tail_err = _segment_tail(values)
        e_hist.append(partial + tail)
        if len(e_hist) >= 2:
            delta = abs(e_hist[-1] - e_hist[-2])
            err_bound = math.fsum(errors) + tail_err
            if delta <= 0.3 * tol and err_bound <= 0.7 * tol:
                return _PieceOutcome(e_hist[-1], err_bound + delta)
    if _divergence_certified(e_hist, values):
        return _PieceOutcome(math.inf, math.inf, divergent=True)
    delta = abs(e_hist[-1] - e_hist[-2]) if len(e_hist) >= 2 else math.inf
    return _PieceOutcome(e_hist[-1], math.fsum(errors) + delta, unresolved=True)


def _segment_tail(values):
    if len(values) >= 3 and all(v > 0 for v in values[-3:]):
        r1 = values[-2] / values[-3]
        r2 = values[-1] / values[-2]
        rho = max(r1, r2)
        if rho <= 0.9:
            tail = values[-1] * rho / (1.0 - rho)
            return tail, abs(tail) * (abs(r2 - r1) / (1.0 - rho) + 0.5)
    return 0.0, 0.0


def _doubling_levels(start, first_width, doublings=DEFAULT_TRUNCATION_DOUBLINGS):
    levels = []
    lo = start
    width = first_width
    for _ in range(doublings + 1):
        levels.append((lo, lo + width))
        lo += width
        width *= 2.0
    return levels


# ---------------------------------------------------------------------------
# Integrand plumbing
# ---------------------------------------------------------------------------

def weight_integrand(w, omega):
    """Pointwise evaluator of the weight for quadrature (n-d array input)."""

    def fn(pt):
        v = w.raw_value(pt, omega)
        if v < 0.0:
            raise EvalFailure(f"negative weight {v}")
        return v

    return fn


def _axis_fn(fn, dimension, axis, fixed):
    """Freeze all coordinates except ``axis``."""
    if dimension == 1:
        return lambda t: fn(np.array([t]))

    def g(t):
        pt = np.array(fixed, dtype=float)
        pt[axis] = t
        return fn(pt)

    return g


def _singular_coords(w, a, b, omega):
    coords = list(w.declared_singular_coords(a, b)) if w is not None else []
    return coords


def _open_flags_for_interval(a, b, omega):
    """An endpoint is open (graded) when it lies on the domain boundary."""
    if omega is None or omega.kind != "interval":
        return False, False
    eps = 1e-12 * (1.0 + abs(a) + abs(b))
    open_lo = math.isfinite(omega.a) and abs(a - omega.a) <= eps
    open_hi = math.isfinite(omega.b) and abs(b - omega.b) <= eps
    return open_lo, open_hi


def _integrate_interval(fn, a, b, tol, budget, recorder, w=None, omega=None,
                        force_open=(False, False)):
    """1-d integral over (a, b) with grading at singular points/faces."""
    coords = _singular_coords(w, a, b, omega)
    open_lo, open_hi = _open_flags_for_interval(a, b, omega)
    open_lo = open_lo or force_open[0]
    open_hi = open_hi or force_open[1]
    cuts = [a] + coords + [b]
    outcome = _PieceOutcome(0.0, 0.0)
    n_pieces = len(cuts) - 1
    for i in range(n_pieces):
        lo, hi = cuts[i], cuts[i + 1]
        piece_open_lo = open_lo if i == 0 else True
        piece_open_hi = open_hi if i == n_pieces - 1 else True
        out = _integrate_piece(fn, lo, hi, tol / n_pieces, piece_open_lo,
                               piece_open_hi, budget, recorder)
        outcome = _combine(outcome, out)
        if outcome.divergent:
            return outcome
    return outcome


def _integrate_box(fn, lo, hi, tol, budget, recorder, w=None, omega=None):
    """Iterated integral over an n-d box (n <= 3), outermost axis first."""
    n = len(lo)
    if n == 1:
        return _integrate_interval(fn, lo[0], hi[0], tol, budget, recorder,
                                   w=w, omega=omega)
    if n > 3:
        raise UnsupportedRegionError("boxes beyond dimension 3 are out of scope")
    if w is not None:
        for q in list(w.zero_set.points) + list(w.infinity_set.points):
            qa = np.asarray(q)
            if qa.size == n and np.all(qa > np.asarray(lo)) and np.all(
                    qa < np.asarray(hi)):
                raise UnsupportedRegionError(
                    "declared singular point inside an n-d box is not supported")
    inner_tol = tol * 0.05 / max(1.0, hi[0] - lo[0])
    state = {"err": 0.0, "divergent": False}

    def slice_value(t):
        fixed = np.zeros(n)
        fixed[0] = t

        def inner_fn(sub_pt):
            pt = np.empty(n)
            pt[0] = t
            pt[1:] = sub_pt
            return fn(pt)

        out = _integrate_box(inner_fn, lo[1:], hi[1:], inner_tol, budget,
                             recorder=None)
        if out.divergent:
            state["divergent"] = True
            raise EvalFailure("divergent slice")
        state["err"] = max(state["err"], out.error)
        return out.value

    try:
        outer = _integrate_piece(slice_value, lo[0], hi[0], tol, False, False,
                                 budget, recorder)
    except BudgetExceededError:
        if state["divergent"]:
            return _PieceOutcome(math.inf, math.inf, divergent=True)
        raise
    if state["divergent"]:
        return _PieceOutcome(math.inf, math.inf, divergent=True)
    extra = state["err"] * max(1.0, hi[0] - lo[0])
    return _PieceOutcome(outer.value, outer.error + extra,
                         unresolved=outer.unresolved)


def _radial_segment_fn(gfn, n, budget, recorder, open_at_zero):
    c_n = UNIT_SPHERE_AREA[n]

    def rho_fn(rho):
        return c_n * gfn(rho) * rho ** (n - 1)

    def segment(lo, hi, tol):
        force = (open_at_zero and lo <= 0.0, False)
        return _integrate_piece(rho_fn, lo, hi, tol, force[0], force[1],
                                budget, recorder)

    return segment


def _polar_segment_fn(fn, center, n, budget, recorder, open_at_zero):
    """Angular x radial iterated integration around ``center``."""
    if n == 1:
        raise UnsupportedRegionError("use interval pieces in dimension 1")
    if n not in (2, 3):
        raise UnsupportedRegionError("polar integration supports n in {2, 3}")
    cx = np.asarray(center, dtype=float)

    def segment(lo, hi, tol):
        inner_tol = tol * 0.05 / (2.0 * math.pi)

        def radial_at(direction):
            def rho_fn(rho):
                return fn(cx + rho * direction) * rho ** (n - 1)

            out = _integrate_piece(rho_fn, lo, hi, inner_tol,
                                   open_at_zero and lo <= 0.0, False,
                                   budget, None)
            if out.divergent:
                raise EvalFailure("divergent radial fiber")
            return out.value

        if n == 2:
            def theta_fn(theta):
                return radial_at(np.array([math.cos(theta), math.sin(theta)]))

            try:
                outer = _integrate_piece(theta_fn, 0.0, 2.0 * math.pi, tol,
                                         False, False, budget, recorder)
            except BudgetExceededError:
                raise
            return outer

        def theta_fn(theta):
            def phi_fn(phi):
                direction = np.array([
                    math.sin(phi) * math.cos(theta),
                    math.sin(phi) * math.sin(theta),
                    math.cos(phi),
                ])
                return radial_at(direction) * math.sin(phi)

            mid = _integrate_piece(phi_fn, 0.0, math.pi, tol * 0.05 / math.pi,
                                   False, False, budget, None)
            if mid.divergent:
                raise EvalFailure("divergent slice")
            return mid.value

        return _integrate_piece(theta_fn, 0.0, 2.0 * math.pi, tol, False,
                                False, budget, recorder)

    return segment


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def _result(outcome, budget, tol):
    if outcome.divergent:
        return MeasureResult(INFINITY, math.inf, budget.used, True)
    scale = max(1.0, abs(outcome.value))
    converged = (not outcome.unresolved) and outcome.error <= tol * scale
    return MeasureResult(outcome.value, outcome.error, budget.used, converged)


def weighted_measure(w, region, omega, tol=1e-9, budget=None, recorder=None):
    """mu_w(U ∩ Omega) for U an interval/box/ball/shell/tail or the whole
    domain; certified-divergent results carry the infinity marker."""
    budget = budget or _Budget()
    fn = weight_integrand(w, omega)
    try:
        outcome = _dispatch_region(fn, w, region, omega, tol, budget, recorder)
    except _BudgetUp:
        best = MeasureResult(budget.accumulated, math.inf, budget.used, False)
        raise BudgetExceededError(
            f"cell budget {budget.limit} exhausted", best=best) from None
    return _result(outcome, budget, tol)


def integrate_function(fn, region, omega, tol=1e-9, weight_hint=None,
                       budget=None, recorder=None):
    """Integrate an arbitrary pointwise integrand over region ∩ domain.

    ``weight_hint`` supplies declared singular points for grading (pass the
    weight whose singularities the integrand inherits).
    """
    budget = budget or _Budget()
    try:
        outcome = _dispatch_region(fn, weight_hint, region, omega, tol,
                                   budget, recorder)
    except _BudgetUp:
        best = MeasureResult(budget.accumulated, math.inf, budget.used, False)
        raise BudgetExceededError(
            f"cell budget {budget.limit} exhausted", best=best) from None
    return _result(outcome, budget, tol)


def _normalize_domain(omega):
    # a 1-d ball is just an interval; reuse the interval machinery
    if omega.kind == "ball" and omega.dimension == 1:
        c = float(omega.center[0])
        return DomainSpec.interval(c - omega.radius, c + omega.radius)
    return omega


def _dispatch_region(fn, w, region, omega, tol, budget, recorder):
    omega = _normalize_domain(omega)
    n = omega.dimension
    if isinstance(region, WholeDomain):
        region = _whole_domain_region(omega)
    if isinstance(region, Box):
        return _measure_box_region(fn, w, region, omega, tol, budget, recorder)
    if isinstance(region, BallRegion):
        return _measure_ball_region(fn, w, region, omega, tol, budget, recorder)
    if isinstance(region, (Shell, Tail)):
        return _measure_radial_band(fn, w, region, omega, tol, budget, recorder)
    raise UnsupportedRegionError(f"no strategy for region {region!r}")


def _whole_domain_region(omega):
    if omega.kind == "interval":
        return Box.interval(omega.a, omega.b)
    if omega.kind == "box":
        return Box.of(omega.lo, omega.hi)
    if omega.kind == "ball":
        return BallRegion.of(omega.center, omega.radius)
    if omega.kind == "full_space":
        return Tail(0.0)
    raise UnsupportedRegionError(
        "whole-domain measures on bounded_smooth domains are not supported; "
        "integrate over explicit boxes instead")


def _measure_box_region(fn, w, region, omega, tol, budget, recorder):
    n = omega.dimension
    if region.dimension != n:
        raise DomainError("region dimension does not match the domain")
    lo = np.asarray(region.lo, dtype=float)
    hi = np.asarray(region.hi, dtype=float)
    if omega.kind == "interval":
        a = max(lo[0], omega.a)
        b = min(hi[0], omega.b)
        if not (b > a):
            return _PieceOutcome(0.0, 0.0)
        if math.isinf(a) or math.isinf(b):
            return _tail_pieces_interval(fn, w, omega, max(a, -math.inf), tol,
                                         budget, recorder, lo=a, hi=b)
        return _integrate_interval(fn, a, b, tol, budget, recorder, w=w,
                                   omega=omega)
    if omega.kind == "box":
        clo = np.maximum(lo, omega.lo)
        chi = np.minimum(hi, omega.hi)
        if np.any(clo >= chi):
            return _PieceOutcomes_zero()
        return _integrate_box(fn, tuple(clo), tuple(chi), tol, budget,
                              recorder, w=w, omega=omega)
    if omega.kind == "full_space":
        if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)):
            raise UnsupportedRegionError("infinite boxes: use Tail regions")
        return _integrate_box(fn, tuple(lo), tuple(hi), tol, budget, recorder,
                              w=w, omega=omega)
    raise UnsupportedRegionError(
        f"box regions on {omega.kind} domains are not supported")


def _PieceOutcomes_zero():
    return _PieceOutcome(0.0, 0.0)


def _measure_ball_region(fn, w, region, omega, tol, budget, recorder):
    n = omega.dimension
    center = np.asarray(region.center, dtype=float)
    if n == 1:
        box = Box.interval(center[0] - region.radius, center[0] + region.radius)
        return _measure_box_region(fn, w, box, omega, tol, budget, recorder)
    if omega.kind == "full_space" or (
            omega.kind == "ball" and np.allclose(center, omega.center)
            and region.radius <= omega.radius + 1e-12):
        radius = region.radius
        if omega.kind == "ball":
            radius = min(radius, omega.radius)
        at_origin = np.allclose(center, 0.0)
        if w is not None and w.is_radial and at_origin:
            g = w.radial_profile()
            seg = _radial_segment_fn(lambda s: _guard(g, s), n, budget,
                                     recorder, open_at_zero=bool(w.infinity_set))
            return seg(0.0, radius, tol)
        open_zero = bool(w is not None and w.infinity_set and at_origin)
        seg = _polar_segment_fn(fn, center, n, budget, recorder, open_zero)
        return seg(0.0, radius, tol)
    raise UnsupportedRegionError(
        "balls intersected with this domain kind are not supported")


def _guard(g, s):
    try:
        v = float(g(s))
    except (ZeroDivisionError, OverflowError, ValueError) as exc:
        raise EvalFailure(str(exc)) from exc
    if v < 0.0:
        raise EvalFailure(f"negative weight {v}")
    return v


def _measure_radial_band(fn, w, region, omega, tol, budget, recorder):
    n = omega.dimension
    if isinstance(region, Shell):
        r_lo, r_hi = region.r_lo, region.r_hi
        if r_lo < 0 or r_hi <= r_lo:
            raise DomainError("shell needs 0 <= r_lo < r_hi")
    else:
        r_lo, r_hi = region.r, math.inf
    if n == 1 and omega.kind in ("interval", "full_space"):
        return _tail_pieces_interval(fn, w, omega, r_lo, tol, budget, recorder,
                                     band_hi=r_hi)
    if omega.kind == "ball" and np.allclose(omega.center, 0.0):
        r_hi = min(r_hi, omega.radius)
        if r_hi <= r_lo:
            return _PieceOutcome(0.0, 0.0)
        return _radial_band_full(fn, w, n, r_lo, r_hi, tol, budget, recorder)
    if omega.kind != "full_space":
        raise UnsupportedRegionError(
            f"radial bands on {omega.kind} domains in dimension {n} "
            "are not supported")
    return _radial_band_full(fn, w, n, r_lo, r_hi, tol, budget, recorder)


def _radial_band_full(fn, w, n, r_lo, r_hi, tol, budget, recorder):
    radial = w is not None and w.is_radial
    open_zero = bool(w is not None and w.infinity_set and r_lo <= 0.0)
    if radial:
        g = w.radial_profile()
        seg = _radial_segment_fn(lambda s: _guard(g, s), n, budget, recorder,
                                 open_at_zero=open_zero)
    else:
        seg = _polar_segment_fn(fn, np.zeros(n), n, budget, recorder, open_zero)
    if math.isfinite(r_hi):
        return seg(r_lo, r_hi, tol)
    start = max(r_lo, 0.0)
    first = max(32.0, 2.0 * start) - start
    if first <= 0:
        first = 32.0
    levels = _doubling_levels(start, first)
    return _truncated_limit(lambda lo, hi: seg(lo, hi, tol * 0.2), levels, tol)


def _tail_pieces_interval(fn, w, omega, r_lo, tol, budget, recorder,
                          band_hi=math.inf, lo=None, hi=None):
    """{x in interval-or-line : r_lo < |x| <= band_hi} as 1-d pieces."""
    if omega.kind == "full_space":
        a, b = -math.inf, math.inf
    else:
        a, b = omega.a, omega.b
    if lo is not None:
        a = max(a, lo)
    if hi is not None:
        b = min(b, hi)
    pieces = []
    # positive side: (max(a, r_lo), min(b, band_hi))
    p_lo, p_hi = max(a, r_lo), min(b, band_hi)
    if p_hi > p_lo:
        pieces.append((p_lo, p_hi))
    # negative side: (max(a, -band_hi), min(b, -r_lo))
    m_lo, m_hi = max(a, -band_hi), min(b, -r_lo)
    if m_hi > m_lo:
        pieces.append((m_lo, m_hi))
    total = _PieceOutcome(0.0, 0.0)
    n_pieces = max(1, len(pieces))
    for plo, phi in pieces:
        if math.isinf(plo) or math.isinf(phi):
            out = _improper_interval(fn, w, omega, plo, phi, tol / n_pieces,
                                     budget, recorder)
        else:
            out = _integrate_interval(fn, plo, phi, tol / n_pieces, budget,
                                      recorder, w=w, omega=omega)
        total = _combine(total, out)
        if total.divergent:
            return total
    return total


def _improper_interval(fn, w, omega, a, b, tol, budget, recorder):
    if math.isinf(a) and math.isinf(b):
        left = _improper_interval(fn, w, omega, a, 0.0, tol / 2, budget, recorder)
        if left.divergent:
            return left
        right = _improper_interval(fn, w, omega, 0.0, b, tol / 2, budget, recorder)
        return _combine(left, right)
    if math.isinf(b):
        start = a

        def seg(lo, hi):
            return _integrate_interval(fn, lo, hi, tol * 0.2, budget, recorder,
                                       w=w, omega=omega)
        first = max(32.0, 2.0 * abs(start) + 1.0)
        levels = _doubling_levels(start, first)
        return _truncated_limit(seg, levels, tol)
    # a = -inf: mirror
    def seg(lo, hi):
        return _integrate_interval(fn, -hi, -lo, tol * 0.2, budget, recorder,
                                   w=None, omega=None)

    def fn_m(x):
        return fn(np.array([-x]) if np.isscalar(x) else -x)
    # integrate fn(-t) for t in (−b, inf) — reuse the positive-side machinery
    start = -b
    first = max(32.0, 2.0 * abs(start) + 1.0)
    levels = _doubling_levels(start, first)

    def seg_m(lo, hi):
        return _integrate_interval(lambda t: fn(np.array([-t])), lo, hi,
                                   tol * 0.2, budget, recorder)

    return _truncated_limit(seg_m, levels, tol)


def tail_measure(w, omega, r, tol=1e-9, budget=None, recorder=None):
    """mu_w({x in Omega : |x| > r}) with certified divergence."""
    return weighted_measure(w, Tail(float(r)), omega, tol, budget, recorder)


def shell_measure(w, omega, r, eps, tol=1e-9, budget=None, recorder=None):
    """mu_w({x in Omega : r - eps <= |x| <= r})."""
    if eps <= 0 or r <= 0:
        raise DomainError("shell needs r > 0 and eps > 0")
    return weighted_measure(w, Shell(max(r - eps, 0.0), float(r)), omega, tol,
                            budget, recorder)


def weighted_surface_area(w, omega, r, tol=1e-9, method=None):
    """Weighted area of the sphere {|x| = r} within the domain."""
    if r <= 0:
        raise DomainError("surface radius must be positive")
    n = omega.dimension
    if method == "lattice_shell_nd":
        return _lattice_shell_area(w, omega, r, tol)
    if n == 1:
        total = 0.0
        flags = []
        for s in (r, -r):
            pt = np.array([s])
            if omega.contains(pt):
                total += w.raw_value(pt, omega)
            else:
                flags.append(f"point {s} outside domain")
        if len(flags) == 2:
            flags.append("sphere_outside")
        return SurfaceArea(r, total, "boundary_sum_1d", tuple(flags))
    if w.is_radial and _sphere_inside(omega, r):
        g = w.radial_profile()
        value = UNIT_SPHERE_AREA[n] * r ** (n - 1) * _guard(g, r)
        return SurfaceArea(r, value, "radial_closed_form")
    return _sphere_quadrature_area(w, omega, r, tol)


def _sphere_inside(omega, r):
    if omega.kind == "full_space":
        return True
    if omega.kind == "ball" and np.allclose(omega.center, 0.0):
        return r < omega.radius
    return False


def _sphere_quadrature_area(w, omega, r, tol):
    n = omega.dimension
    if n not in (2, 3):
        raise UnsupportedRegionError("sphere quadrature supports n in {2, 3}")
    budget = _Budget()
    probe = [omega.contains(r * _unit_vec(n, k, 16)) for k in range(16)]
    if not any(probe):
        return SurfaceArea(r, 0.0, "sphere_quadrature", ("sphere_outside",))
    flags = () if all(probe) else ("partial_sphere",)

    def masked(pt):
        if not omega.contains(pt):
            return 0.0
        return w.raw_value(pt, omega)

    if n == 2:
        def theta_fn(theta):
            return masked(np.array([r * math.cos(theta), r * math.sin(theta)])) * r

        out = _integrate_piece(theta_fn, 0.0, 2.0 * math.pi, tol, False, False,
                               budget, None)
        return SurfaceArea(r, out.value, "sphere_quadrature", flags)

    def theta_fn(theta):
        def phi_fn(phi):
            pt = r * np.array([
                math.sin(phi) * math.cos(theta),
                math.sin(phi) * math.sin(theta),
                math.cos(phi),
            ])
            return masked(pt) * (r ** 2) * math.sin(phi)

        mid = _integrate_piece(phi_fn, 0.0, math.pi, tol * 0.05, False, False,
                               budget, None)
        return mid.value

    out = _integrate_piece(theta_fn, 0.0, 2.0 * math.pi, tol, False, False,
                           budget, None)
    return SurfaceArea(r, out.value, "sphere_quadrature", flags)


def _unit_vec(n, k, total):
    angle = 2.0 * math.pi * k / total
    if n == 2:
        return np.array([math.cos(angle), math.sin(angle)])
    phi = math.pi * ((k % 4) + 0.5) / 4.0
    return np.array([math.sin(phi) * math.cos(angle),
                     math.sin(phi) * math.sin(angle),
                     math.cos(phi)])


def _lattice_shell_area(w, omega, r, tol, eps=None):
    """Shell-measure Richardson estimate of the surface area."""
    eps = eps or min(0.1, r / 8.0)
    a1 = shell_measure(w, omega, r, eps, tol).expect_value() / eps
    a2 = shell_measure(w, omega, r, eps / 2.0, tol).expect_value() / (eps / 2.0)
    return SurfaceArea(r, 2.0 * a2 - a1, "lattice_shell_nd")


def adaptive_interval(fn, a, b, tol=1e-10, budget=None, open_lo=False,
                      open_hi=False):
    """Public 1-d adaptive integral of a plain callable over (a, b).

    Returns (value, error_bound); raises BudgetExceededError when the cell
    budget runs out and DomainError on certified divergence.
    """
    budget = budget or _Budget()
    try:
        out = _integrate_piece(fn, float(a), float(b), tol, open_lo, open_hi,
                               budget)
    except _BudgetUp:
        raise BudgetExceededError(
            f"cell budget {budget.limit} exhausted") from None
    if out.divergent:
        raise DomainError("integral certified divergent")
    return out.value, out.error


# ---------------------------------------------------------------------------
# Sobolev norms
# ---------------------------------------------------------------------------

@dataclass
class SampledFunction:
    """A test function with optional analytic gradient (FD fallback)."""

    fn: object
    grad: object = None
    label: str = "u"

    def value(self, x):
        return float(self.fn(np.atleast_1d(np.asarray(x, dtype=float))))

    def gradient(self, x):
        pt = np.atleast_1d(np.asarray(x, dtype=float))
        if self.grad is not None:
            return np.atleast_1d(np.asarray(self.grad(pt), dtype=float))
        out = np.zeros_like(pt)
        for i in range(pt.size):
            h = 1e-6 * (1.0 + abs(pt[i]))
            up = pt.copy()
            dn = pt.copy()
            up[i] += h
            dn[i] -= h
            out[i] = (float(self.fn(up)) - float(self.fn(dn))) / (2.0 * h)
        return out


def sobolev_norms(u, w, omega, p, tol=1e-9, budget=None):
    """(||u||_{L^p(Omega,w)}, ||grad u||_{L^p(Omega,w)})."""
    if p < 1:
        raise DomainError("p must be >= 1")
    if not isinstance(u, SampledFunction):
        u = SampledFunction(u)
    wfn = weight_integrand(w, omega)

    def f_val(pt):
        return abs(u.value(pt)) ** p * wfn(pt)

    def f_grad(pt):
        return float(np.linalg.norm(u.gradient(pt))) ** p * wfn(pt)

    lp = integrate_function(f_val, WholeDomain(), omega, tol,
                            weight_hint=w, budget=budget)
    semi = integrate_function(f_grad, WholeDomain(), omega, tol,
                              weight_hint=w, budget=budget)
    lp_norm = INFINITY if lp.is_divergent else lp.value ** (1.0 / p)
    semi_norm = INFINITY if semi.is_divergent else semi.value ** (1.0 / p)
    return lp_norm, semi_norm


# ---------------------------------------------------------------------------
# Admissibility support (called from domain_weight)
# ---------------------------------------------------------------------------

def local_dual_integral(w, omega, center, radius, p, tol=1e-6):
    """Estimate of the integral of w^(-1/(p-1)) over a ball, with the
    shared divergence certificate; ok=False reports certified divergence."""
    expo = -1.0 / (p - 1.0)

    def fn(pt):
        v = w.raw_value(pt, omega)
        if v == 0.0:
            raise EvalFailure("weight vanishes")
        if v < 0.0:
            raise EvalFailure(f"negative weight {v}")
        return v ** expo

    center = np.atleast_1d(np.asarray(center, dtype=float))
    region = BallRegion.of(center, radius)
    budget = _Budget()
    try:
        out = _dispatch_region(fn, w, region, omega, tol, budget, None)
    except _BudgetUp:
        return {"ok": False, "center": center.tolist(), "radius": radius,
                "estimate": math.inf, "kind": "dual_integral",
                "detail": "budget exhausted before convergence"}
    if out.divergent:
        return {"ok": False, "center": center.tolist(), "radius": radius,
                "estimate": math.inf, "kind": "dual_integral",
                "detail": "certified divergent"}
    return {"ok": True, "center": center.tolist(), "radius": radius,
            "estimate": out.value, "kind": "dual_integral"}
