"""Necessary conditions for compactness: anything that fails here is
evidence against the embedding being compact.

The checks are the fat-cube tesselation scan (with the thin-chain
constructor from its proof), the finite-volume test for bounded weights,
the tail/shell decay test, the surface-area ratio limit, and the
exponential-decay corollary.  Numeric trends alone never certify:
NonCompactCertified is emitted only through the bounded-weight
finite-volume path, the closed-form surface-ratio path, or the
translation/doubling argument for declared-doubling weights.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import measure_engine as me
from .domain_weight import DomainSpec, WeightSpec
from .errors import BudgetExceededError, DomainError
from .expressions import EvalFailure
from .verdicts import NONCOMPACT_CERTIFIED, NONCOMPACT_SUPPORTED

FAT = "fat"
THIN = "thin"
UNKNOWN = "unknown"


def canonical_lambda(dimension):
    """The fatness threshold used by the thin-chain construction."""
    return 1.0 / (2.0 * (3 ** dimension - 1))


# ---------------------------------------------------------------------------
# Tesselation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Tesselation:
    """Axis-aligned tiling of R^n by cubes of a fixed edge."""

    edge: float
    origin: tuple
    dimension: int

    @classmethod
    def unit(cls, dimension, edge=1.0, origin=None):
        if edge <= 0:
            raise DomainError("tesselation edge must be positive")
        if origin is None:
            origin = (0.0,) * dimension
        return cls(float(edge), tuple(float(o) for o in origin), dimension)

    def cube_bounds(self, index):
        idx = np.asarray(index, dtype=float)
        lo = np.asarray(self.origin) + idx * self.edge
        return lo, lo + self.edge

    def concentric_bounds(self, index):
        """The cube of side 3h concentric with the indexed cube."""
        lo, hi = self.cube_bounds(index)
        return lo - self.edge, hi + self.edge

    def fringe_indices(self, index):
        """The 3^n - 1 neighbours forming the fringe."""
        idx = tuple(index)
        offsets = itertools.product((-1, 0, 1), repeat=self.dimension)
        return [tuple(i + o for i, o in zip(idx, off))
                for off in offsets if any(off)]

    def indices_within(self, radius):
        """Cubes entirely inside the window [-radius, radius]^n."""
        ranges = []
        for o in self.origin:
            k_lo = math.ceil((-radius - o) / self.edge - 1e-12)
            k_hi = math.floor((radius - o) / self.edge + 1e-12) - 1
            ranges.append(range(k_lo, k_hi + 1))
        return [tuple(idx) for idx in itertools.product(*ranges)]


@dataclass
class CubeRecord:
    index: tuple
    mu_H: float
    mu_F: float
    classification: str
    lam: float


class CubeMeasureCache:
    """Converged per-cube measures, shared across windows and chains."""

    def __init__(self, tess, w, omega, tol=1e-9):
        self.tess = tess
        self.w = w
        self.omega = omega
        self.tol = tol
        self._store = {}
        self.cells_used = 0

    def measure(self, index):
        key = tuple(index)
        if key not in self._store:
            lo, hi = self.tess.cube_bounds(key)
            try:
                res = me.weighted_measure(self.w, me.Box.of(lo, hi),
                                          self.omega, self.tol)
                self.cells_used += res.cells_used
                value = math.inf if res.is_divergent else res.value
                self._store[key] = (value, res.converged or res.is_divergent)
            except BudgetExceededError:
                self._store[key] = (math.nan, False)
        return self._store[key]


def classify_cube(index, w, omega, lam=None, tess=None, tol=1e-9, cache=None):
    """Fat/thin classification of one cube: fat iff mu_H > lam * mu_F.

    A cube whose measures did not converge within budget classifies as
    'unknown', which is a value that propagates through scans, not an
    error.
    """
    if tess is None:
        tess = Tesselation.unit(omega.dimension)
    if lam is None:
        lam = canonical_lambda(omega.dimension)
    if lam <= 0:
        raise DomainError("fatness parameter must be positive")
    if cache is None:
        cache = CubeMeasureCache(tess, w, omega, tol)
    mu_H, ok_H = cache.measure(index)
    mu_F = 0.0
    ok_F = True
    for nb in tess.fringe_indices(index):
        v, ok = cache.measure(nb)
        mu_F += v
        ok_F = ok_F and ok
    if not (ok_H and ok_F) or math.isnan(mu_H) or math.isnan(mu_F):
        return CubeRecord(tuple(index), mu_H, mu_F, UNKNOWN, lam)
    if math.isinf(mu_H):
        cls = FAT  # infinite own mass beats any fringe multiple
    elif math.isinf(mu_F):
        cls = THIN
    else:
        cls = FAT if mu_H > lam * mu_F else THIN
    return CubeRecord(tuple(index), mu_H, mu_F, cls, lam)


@dataclass
class FatCubeScan:
    edge: float
    lam: float
    window_radii: tuple
    counts: tuple                 # per window: int, or (known, known+unknown)
    records: list
    verdict: object = None
    basis: str = ""
    summary: str = ""

    def csv_rows(self):
        rows = [("index", "mu_H", "mu_F", "classification")]
        for rec in self.records:
            rows.append((";".join(str(i) for i in rec.index), rec.mu_H,
                         rec.mu_F, rec.classification))
        return rows


def fat_cube_scan(w, omega, h, lam=None, window_radii=(4.0, 8.0, 16.0),
                  tol=1e-9, origin=None):
    """Count fat cubes over growing windows.

    Growing counts without saturation support non-compactness; the
    certified verdict is reserved for weight families carrying the
    analytic translation/doubling argument (constant or declared
    doubling) on the full space.
    """
    radii = tuple(sorted(float(r) for r in window_radii))
    if len(radii) < 2 or any(radii[i] >= radii[i + 1] for i in range(len(radii) - 1)):
        raise DomainError("window_radii must be strictly increasing")
    tess = Tesselation.unit(omega.dimension, h, origin)
    if lam is None:
        lam = canonical_lambda(omega.dimension)
    cache = CubeMeasureCache(tess, w, omega, tol)
    all_indices = tess.indices_within(radii[-1])
    records = {}
    for idx in all_indices:
        records[idx] = classify_cube(idx, w, omega, lam, tess, tol, cache)
    counts = []
    any_unknown = False
    for radius in radii:
        fat = 0
        unknown = 0
        for idx in tess.indices_within(radius):
            cls = records[idx].classification
            if cls == FAT:
                fat += 1
            elif cls == UNKNOWN:
                unknown += 1
        if unknown:
            any_unknown = True
            counts.append((fat, fat + unknown))
        else:
            counts.append(fat)
    verdict, basis, summary = _scan_verdict(w, omega, counts, radii)
    return FatCubeScan(h, lam, radii, tuple(counts),
                       [records[i] for i in all_indices], verdict, basis,
                       summary)


def _scan_verdict(w, omega, counts, radii):
    lows = [c[0] if isinstance(c, tuple) else c for c in counts]
    growing = all(lows[i + 1] > lows[i] for i in range(len(lows) - 1))
    unsaturated = growing and lows[-1] >= 2 * max(1, lows[0])
    doubling_family = w.doubling or w.family == "constant"
    if doubling_family and omega.kind == "full_space":
        basis = ("translation/doubling argument: a doubling weight on the "
                 "full space keeps infinitely many cubes fat")
        return (NONCOMPACT_CERTIFIED, basis,
                f"fat counts {counts} over windows {radii}; doubling family")
    if unsaturated:
        return (NONCOMPACT_SUPPORTED, "fat-cube counts grow without saturation",
                f"fat counts {counts} over windows {radii}")
    return (None, "", f"fat counts {counts} saturate; no verdict from the scan")


@dataclass
class ThinChain:
    """Greedy chain of thin cubes with (at least) doubling masses."""

    cubes: list
    masses: list
    terminated_at: int
    reason: str                   # fat_cube | cap | no_candidate | zero_mass

    def halving_ok(self, slack):
        for j in range(len(self.masses) - 1):
            if self.masses[j] > 0.5 * self.masses[j + 1] + slack:
                return False
        return True


def thin_chain(start_index, w, omega, h=1.0, cap=64, tol=1e-9, origin=None,
               cache=None):
    """Follow fringe cubes of (at least) doubled mass until a fat cube.

    Uses the canonical fatness parameter 1/(2(3^n - 1)); the greedy step
    picks the fringe cube of maximal mass among those satisfying the
    halving inequality (up to quadrature slack).
    """
    tess = Tesselation.unit(omega.dimension, h, origin)
    lam = canonical_lambda(omega.dimension)
    if cache is None:
        cache = CubeMeasureCache(tess, w, omega, tol)
    slack = 2.0 * tol
    idx = tuple(start_index)
    mu0, _ = cache.measure(idx)
    if not mu0 > 0:
        return ThinChain([idx], [mu0], 0, "zero_mass")
    cubes = [idx]
    masses = [mu0]
    for step in range(cap):
        rec = classify_cube(idx, w, omega, lam, tess, tol, cache)
        if rec.classification == FAT:
            return ThinChain(cubes, masses, step, "fat_cube")
        current = masses[-1]
        best = None
        best_mass = -math.inf
        for nb in tess.fringe_indices(idx):
            v, ok = cache.measure(nb)
            if not ok or math.isnan(v):
                continue
            if current <= 0.5 * v + slack and v > best_mass:
                best = nb
                best_mass = v
        if best is None:
            return ThinChain(cubes, masses, step, "no_candidate")
        idx = best
        cubes.append(idx)
        masses.append(best_mass)
    return ThinChain(cubes, masses, cap, "cap")


# ---------------------------------------------------------------------------
# Volume and tail checks
# ---------------------------------------------------------------------------

@dataclass
class FiniteVolumeReport:
    bounded: object               # True | False | None (not certifiable)
    total: object                 # float | inf | None
    verdict: object = None
    refused: bool = False
    note: str = ""
    sampled_sup: float = math.nan


def certify_bounded_above(w, omega, ceiling=1e9, n_samples=257):
    """(certified_bounded, sampled_sup).

    True only when the declared family supports it (constant, tabulated,
    declared bounded_above) and sampling confirms; False when the weight is
    declared or sampled unbounded; None when no certification is possible.
    """
    if w.infinity_set:
        return False, math.inf
    sup = _sampled_sup(w, omega, n_samples)
    if w.bounded_above is False:
        return False, sup
    if sup >= ceiling:
        return False, sup
    if w.family in ("constant", "tabulated") or w.bounded_above is True:
        return True, sup
    return None, sup


def _sampled_sup(w, omega, n_samples):
    lo, hi = omega.bounding_box()
    n = omega.dimension
    sup = 0.0
    per_axis = max(3, int(round(n_samples ** (1.0 / n))))
    axes = [np.linspace(lo[i], hi[i], per_axis + 2)[1:-1] for i in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    extra = []
    if omega.kind == "interval":
        # approach the boundary geometrically: blow-ups live there
        width = hi[0] - lo[0]
        for k in range(4, 40, 4):
            gap = width * 2.0 ** (-k)
            if math.isfinite(omega.a):
                extra.append(np.array([omega.a + gap]))
            if math.isfinite(omega.b):
                extra.append(np.array([omega.b - gap]))
    for pt in list(pts) + extra:
        if not omega.contains(pt) or w.infinity_set.contains(pt) \
                or w.zero_set.contains(pt):
            continue
        try:
            v = w.raw_value(pt, omega)
        except EvalFailure:
            return math.inf
        if not math.isfinite(v):
            return math.inf
        sup = max(sup, v)
    return sup


def finite_volume_check(w, omega, tol=1e-9):
    """Bounded weight with infinite total weighted volume => not compact.

    Refuses any verdict for weights that cannot be certified bounded:
    unbounded weights can have infinite volume and a compact embedding at
    the same time, so the implication simply does not apply to them.
    """
    bounded, sup = certify_bounded_above(w, omega)
    if bounded is not True:
        note = ("weight is not certified bounded above; the finite-volume "
                "necessary condition does not apply (unbounded boundary "
                "blow-ups can keep the embedding compact despite infinite "
                "volume)")
        return FiniteVolumeReport(bounded, None, None, True, note, sup)
    total = me.weighted_measure(w, me.WholeDomain(), omega, tol)
    if total.is_divergent:
        return FiniteVolumeReport(True, math.inf, NONCOMPACT_CERTIFIED, False,
                                  "bounded weight with certified-infinite "
                                  "weighted volume", sup)
    return FiniteVolumeReport(True, total.value, None, False,
                              f"finite weighted volume {total.value:.6g}; "
                              "condition satisfied, no verdict", sup)


@dataclass
class TailDecayReport:
    eps: float
    delta: float
    rows: list                    # (r, tail, shell, ratio)
    verdict: object = None
    note: str = ""


def tail_decay_check(w, omega, eps, delta, r_grid, tol=1e-12, margin=0.05):
    """Ratio mu_w(tail r) / mu_w(shell [r-eps, r]) along a growing grid.

    A compact embedding forces the ratio below every positive delta for
    large r; a ratio pinned above delta (or an infinite tail over a finite
    shell) supports non-compactness.
    """
    if omega.is_bounded:
        raise DomainError("tail decay applies to unbounded domains only")
    rows = []
    for r in sorted(float(x) for x in r_grid):
        tail = me.tail_measure(w, omega, r, tol)
        shell = me.shell_measure(w, omega, r, eps, tol)
        if tail.is_divergent and not shell.is_divergent:
            ratio = math.inf
        elif shell.is_divergent:
            ratio = 0.0 if not tail.is_divergent else math.nan
        else:
            ratio = tail.value / shell.value if shell.value > 0 else math.inf
        rows.append((r, _num(tail), _num(shell), ratio))
    ratios = [row[3] for row in rows]
    if any(math.isinf(x) for x in ratios):
        return TailDecayReport(eps, delta, rows, NONCOMPACT_SUPPORTED,
                               "infinite tail over a finite shell violates "
                               "the decay condition")
    finite = [x for x in ratios if not math.isnan(x)]
    slack = 1e-6 * (1.0 + max(finite, default=0.0))
    nondecreasing = all(finite[i + 1] >= finite[i] - slack
                        for i in range(len(finite) - 1))
    if finite and min(finite) >= delta * (1.0 + margin) and nondecreasing:
        return TailDecayReport(eps, delta, rows, NONCOMPACT_SUPPORTED,
                               f"ratio stays >= delta(1+{margin}) and does "
                               "not decrease across the grid")
    if finite and finite[-1] < delta and finite[-1] <= finite[0]:
        return TailDecayReport(eps, delta, rows, None,
                               "ratio falls below delta and trends down; "
                               "consistent with compactness")
    return TailDecayReport(eps, delta, rows, None,
                           "ratio trend is mixed; no verdict")


def _num(res):
    return math.inf if res.is_divergent else res.value


@dataclass
class SurfaceRatioReport:
    eps: float
    rows: list                    # (r, A_r, A_{r+eps}, ratio)
    applicable: bool
    limit_estimate: float = math.nan
    verdict: object = None
    note: str = ""


def surface_ratio_limit(w, omega, eps, r_grid, tol=1e-10, floor=1e-3,
                        stability_tol=1e-3):
    """Estimate lim A_{r+eps}/A_r; a limit bounded away from 0 contradicts
    compactness.  Inapplicable when A_r is not positive and ultimately
    decreasing along the grid."""
    if omega.is_bounded:
        raise DomainError("surface ratio applies to unbounded domains only")
    grid = sorted(float(x) for x in r_grid)
    if len(grid) < 4:
        raise DomainError("r_grid needs at least 4 points")
    areas = {}
    closed_form = w.is_radial and omega.kind == "full_space"
    for r in grid + [r + eps for r in grid]:
        if r not in areas:
            areas[r] = me.weighted_surface_area(w, omega, r, tol).value
    rows = [(r, areas[r], areas[r + eps], areas[r + eps] / areas[r]
             if areas[r] > 0 else math.inf) for r in grid]
    tail_start = len(grid) // 3
    tail_areas = [areas[r] for r in grid[tail_start:]]
    positive = all(a > 0 for a in tail_areas)
    decreasing = all(tail_areas[i + 1] < tail_areas[i] * (1 + 1e-9)
                     for i in range(len(tail_areas) - 1))
    if not (positive and decreasing):
        return SurfaceRatioReport(eps, rows, False,
                                  note="A_r is not positive and ultimately "
                                       "decreasing; test inapplicable")
    limit_full = _extrapolate_limit(grid, [row[3] for row in rows])
    limit_shorter = _extrapolate_limit(grid[:-1], [row[3] for row in rows[:-1]])
    stable = abs(limit_full - limit_shorter) <= stability_tol * (1 + abs(limit_full))
    if limit_full >= floor and stable:
        verdict = NONCOMPACT_CERTIFIED if closed_form else NONCOMPACT_SUPPORTED
        basis = ("closed-form radial surface areas" if closed_form
                 else "sampled surface areas")
        return SurfaceRatioReport(eps, rows, True, limit_full, verdict,
                                  f"limit estimate {limit_full:.6g} bounded "
                                  f"away from zero ({basis})")
    if limit_full < floor:
        return SurfaceRatioReport(eps, rows, True, limit_full, None,
                                  "ratio tends to zero; consistent with "
                                  "compactness")
    return SurfaceRatioReport(eps, rows, True, limit_full, None,
                              "limit estimate unstable across grid extension")


def _extrapolate_limit(grid, ratios):
    """Fit ratio(r) = L + c/r + d/r^2 on the last three grid points."""
    pts = list(zip(grid, ratios))[-3:]
    if len(pts) < 3:
        return ratios[-1]
    A = np.array([[1.0, 1.0 / r, 1.0 / r ** 2] for r, _ in pts])
    y = np.array([v for _, v in pts])
    try:
        coef = np.linalg.solve(A, y)
    except np.linalg.LinAlgError:
        return ratios[-1]
    return float(coef[0])


@dataclass
class ExponentialDecayReport:
    rows: dict                    # k -> list of (r, product)
    violating_k: list
    verdict: object = None
    note: str = ""
    applicable: bool = True


def exponential_decay_check(w, omega, k_list, r_grid, tol=1e-12):
    """e^{k r} mu_w(tail r) must vanish for every k when the embedding is
    compact (bounded continuous weights); any k with a non-decaying
    product supports non-compactness."""
    if omega.is_bounded:
        raise DomainError("exponential decay applies to unbounded domains only")
    bounded, sup = certify_bounded_above(w, omega)
    if bounded is False:
        return ExponentialDecayReport({}, [], None,
                                      "weight not bounded above; corollary "
                                      "hypothesis fails", applicable=False)
    grid = sorted(float(x) for x in r_grid)
    tails = {r: me.tail_measure(w, omega, r, tol) for r in grid}
    rows = {}
    violating = []
    for k in k_list:
        entries = []
        divergent_tail = False
        for r in grid:
            tail = tails[r]
            if tail.is_divergent:
                entries.append((r, math.inf))
                divergent_tail = True
                continue
            resolvable = tail.value > 10.0 * tail.error_bound
            prod = math.exp(k * r) * tail.value if resolvable else math.nan
            entries.append((r, prod))
        rows[k] = entries
        if divergent_tail:
            violating.append(k)
            continue
        vals = [p for _, p in entries if not math.isnan(p)]
        if len(vals) < 3:
            continue
        cut = max(3, len(vals) // 3)
        tail_vals = vals[-cut:]
        if tail_vals[-1] >= 0.9 * tail_vals[0]:
            violating.append(k)
    if violating:
        return ExponentialDecayReport(rows, violating, NONCOMPACT_SUPPORTED,
                                      f"product e^(kr) mu(tail) fails to decay "
                                      f"for k in {violating}")
    return ExponentialDecayReport(rows, [], None,
                                  "products decay for every tested k; "
                                  "consistent with compactness")
