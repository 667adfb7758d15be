"""Domains, weights, and the standing assumptions every check relies on.

A DomainSpec models the open set the embedding lives on; a WeightSpec
models the weight together with its *declared* zero set and infinity set
(declared, then validated by sampling -- never discovered automatically).
The module also provides the admissibility check that decides whether the
weighted Sobolev space is well defined for a given exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolation, DomainError, ExpressionError
from .expressions import (
    EvalFailure,
    compile_profile_expression,
    compile_weight_expression,
)


class InfinityMarker:
    """Distinguished sentinel for points of the declared infinity set.

    Deliberately not a float: an IEEE overflow must never be mistaken for
    declared-singular behaviour.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITY"

    def __bool__(self):
        return True


INFINITY = InfinityMarker()


def is_infinite_marker(value):
    return isinstance(value, InfinityMarker)


def _as_point(x, dimension):
    if np.isscalar(x):
        pt = np.array([float(x)], dtype=float)
    else:
        pt = np.asarray(x, dtype=float).reshape(-1)
    if pt.size != dimension:
        raise DomainError(f"point {x!r} has dimension {pt.size}, expected {dimension}")
    return pt


@dataclass(frozen=True)
class PointSet:
    """Finite closed set of declared points (zero or infinity set)."""

    points: tuple = ()
    match_tol: float = 1e-12

    @classmethod
    def empty(cls):
        return cls(())

    @classmethod
    def of(cls, *points, dimension=1):
        pts = tuple(tuple(_as_point(p, dimension)) for p in points)
        return cls(pts)

    def contains(self, x):
        if not self.points:
            return False
        pt = np.asarray(x, dtype=float).reshape(-1)
        for q in self.points:
            qa = np.asarray(q, dtype=float)
            if qa.size == pt.size and np.max(np.abs(qa - pt)) <= self.match_tol:
                return True
        return False

    def coords_in_interval(self, a, b):
        """1-d coordinates of declared points strictly inside (a, b)."""
        out = []
        for q in self.points:
            if len(q) == 1 and a < q[0] < b:
                out.append(q[0])
        return sorted(out)

    def __bool__(self):
        return bool(self.points)


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------

class DomainSpec:
    """Open domain in R^n: interval, box, ball, full space, or a bounded
    smooth domain described by its boundary-distance function.

    Immutable after construction; all predicates are pure.
    """

    def __init__(self, kind, dimension, *, a=None, b=None, lo=None, hi=None,
                 center=None, radius=None, truncation_radius=32.0,
                 boundary_distance_fn=None, tubular_depth=None,
                 bounding_box=None):
        self.kind = kind
        self.dimension = int(dimension)
        self.a = a
        self.b = b
        self.lo = None if lo is None else np.asarray(lo, dtype=float)
        self.hi = None if hi is None else np.asarray(hi, dtype=float)
        self.center = None if center is None else np.asarray(center, dtype=float)
        self.radius = radius
        self.truncation_radius = float(truncation_radius)
        self.boundary_distance_fn = boundary_distance_fn
        self.tubular_depth = tubular_depth
        self._bbox = bounding_box
        self._validate()

    # -- constructors ------------------------------------------------------

    @classmethod
    def interval(cls, a, b, truncation_radius=32.0):
        """Open interval (a, b); a may be -inf and b may be +inf."""
        return cls("interval", 1, a=float(a), b=float(b),
                   truncation_radius=truncation_radius)

    @classmethod
    def box(cls, lo, hi):
        lo = np.asarray(lo, dtype=float)
        return cls("box", lo.size, lo=lo, hi=hi)

    @classmethod
    def ball(cls, center, radius):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        return cls("ball", center.size, center=center, radius=float(radius))

    @classmethod
    def full_space(cls, dimension, truncation_radius=32.0):
        return cls("full_space", dimension, truncation_radius=truncation_radius)

    @classmethod
    def bounded_smooth(cls, dimension, boundary_distance_fn, tubular_depth,
                       bounding_box):
        return cls("bounded_smooth", dimension,
                   boundary_distance_fn=boundary_distance_fn,
                   tubular_depth=float(tubular_depth),
                   bounding_box=(np.asarray(bounding_box[0], dtype=float),
                                 np.asarray(bounding_box[1], dtype=float)))

    def _validate(self):
        if self.kind == "interval":
            if not self.a < self.b:
                raise DomainError(f"interval needs a < b, got ({self.a}, {self.b})")
        elif self.kind == "box":
            if self.hi is None or self.lo is None or np.any(self.lo >= self.hi):
                raise DomainError("box needs lo < hi componentwise")
            self.hi = np.asarray(self.hi, dtype=float)
        elif self.kind == "ball":
            if not self.radius > 0:
                raise DomainError("ball needs radius > 0")
        elif self.kind == "full_space":
            if not self.truncation_radius > 0:
                raise DomainError("full_space needs truncation_radius > 0")
        elif self.kind == "bounded_smooth":
            if self.boundary_distance_fn is None or not self.tubular_depth > 0:
                raise DomainError("bounded_smooth needs a distance fn and depth > 0")
            self._check_distance_consistency()
        else:
            raise DomainError(f"unknown domain kind {self.kind!r}")

    def _check_distance_consistency(self):
        # The declared distance must behave like one on samples: positive on
        # interior points and 1-Lipschitz between sample pairs.
        lo, hi = self._bbox
        grids = [np.linspace(lo[i], hi[i], 7) for i in range(self.dimension)]
        mesh = np.meshgrid(*grids, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        vals = np.array([float(self.boundary_distance_fn(p)) for p in pts])
        tol = 1e-9 * (1.0 + float(np.max(np.abs(hi - lo))))
        for i in range(len(pts) - 1):
            gap = float(np.linalg.norm(pts[i + 1] - pts[i]))
            if abs(vals[i + 1] - vals[i]) > gap + tol:
                raise DomainError(
                    "boundary distance is not 1-Lipschitz between samples "
                    f"{pts[i]} and {pts[i + 1]}")

    # -- predicates ---------------------------------------------------------

    def contains(self, x):
        pt = _as_point(x, self.dimension)
        if self.kind == "interval":
            return self.a < pt[0] < self.b
        if self.kind == "box":
            return bool(np.all(pt > self.lo) and np.all(pt < self.hi))
        if self.kind == "ball":
            return float(np.linalg.norm(pt - self.center)) < self.radius
        if self.kind == "full_space":
            return True
        return float(self.boundary_distance_fn(pt)) > 0.0

    def boundary_distance(self, x):
        """r(x) = dist(x, boundary); +inf on the full space."""
        pt = _as_point(x, self.dimension)
        if self.kind == "interval":
            lo_gap = pt[0] - self.a if math.isfinite(self.a) else math.inf
            hi_gap = self.b - pt[0] if math.isfinite(self.b) else math.inf
            return min(lo_gap, hi_gap)
        if self.kind == "box":
            return float(min(np.min(pt - self.lo), np.min(self.hi - pt)))
        if self.kind == "ball":
            return self.radius - float(np.linalg.norm(pt - self.center))
        if self.kind == "full_space":
            return math.inf
        return float(self.boundary_distance_fn(pt))

    def in_tail(self, x, r):
        """Membership in {x in domain : |x| > r}."""
        pt = _as_point(x, self.dimension)
        return self.contains(pt) and float(np.linalg.norm(pt)) > r

    def on_sphere(self, x, r, tol=1e-9):
        pt = _as_point(x, self.dimension)
        return self.contains(pt) and abs(float(np.linalg.norm(pt)) - r) <= tol

    @property
    def is_bounded(self):
        if self.kind == "interval":
            return math.isfinite(self.a) and math.isfinite(self.b)
        return self.kind in ("box", "ball", "bounded_smooth")

    def bounding_box(self, truncation=None):
        """Axis-aligned hull; unbounded domains are truncated."""
        R = float(truncation if truncation is not None else self.truncation_radius)
        if self.kind == "interval":
            a = self.a if math.isfinite(self.a) else -R
            b = self.b if math.isfinite(self.b) else R
            return np.array([a]), np.array([b])
        if self.kind == "box":
            return self.lo.copy(), self.hi.copy()
        if self.kind == "ball":
            return self.center - self.radius, self.center + self.radius
        if self.kind == "full_space":
            return (-R * np.ones(self.dimension), R * np.ones(self.dimension))
        return self._bbox[0].copy(), self._bbox[1].copy()

    def describe(self):
        if self.kind == "interval":
            return {"shape": "interval", "a": self.a, "b": self.b}
        if self.kind == "box":
            return {"shape": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}
        if self.kind == "ball":
            return {"shape": "ball", "center": self.center.tolist(),
                    "radius": self.radius}
        if self.kind == "full_space":
            return {"shape": "full_space", "dimension": self.dimension,
                    "truncation_radius": self.truncation_radius}
        return {"shape": "bounded_smooth", "dimension": self.dimension,
                "tubular_depth": self.tubular_depth}

    def __repr__(self):
        return f"DomainSpec({self.describe()})"


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------

def _call_scalar(fn, s):
    try:
        return float(fn(float(s)))
    except EvalFailure:
        raise
    except (ZeroDivisionError,OverflowError, ValueError) as exc:
        raise EvalFailure(str(exc)) from exc


class WeightSpec:
    """A weight family with declared zero set and infinity set.

    Families: constant, boundary_profile (profile of the boundary
    distance), radial (profile of |x|), point_singular (profile of |x|
    blowing up at the origin), expression (arithmetic grammar), tabulated
    (grid samples, multilinear interpolation), product, equivalent_to
    (an actual weight declared two-sided comparable to a reference), and
    the builtin piecewise log_root_example on (-1/2, 1/2).

    Instances are immutable after construction and safe to share.
    """

    def __init__(self, family, dimension, *, value=None, profile=None,
                 profile_source=None, expr_source=None, parts=None,
                 actual=None, reference=None, alpha=None, beta=None,
                 grid=None, table=None, domain=None, zero_set=None,
                 infinity_set=None, bounded_above=None, doubling=False,
                 label=None):
        self.family = family
        self.dimension = int(dimension)
        self.value = value
        self.profile = profile
        self.profile_source = profile_source
        self.expr_source = expr_source
        self.parts = tuple(parts) if parts else None
        self.actual = actual
        self.reference = reference
        self.alpha = alpha
        self.beta = beta
        self.domain = domain
        self.zero_set = zero_set or PointSet.empty()
        self.infinity_set = infinity_set or PointSet.empty()
        self.bounded_above = bounded_above
        self.doubling = bool(doubling)
        self.label = label or family
        self._expr_fn = None
        if family == "expression":
            self._expr_fn = compile_weight_expression(expr_source, dimension)
        if family == "tabulated":
            self._grid = tuple(np.asarray(g, dtype=float) for g in grid)
            self._table = np.asarray(table, dtype=float)
            if self._table.shape != tuple(len(g) for g in self._grid):
                raise DomainError("tabulated weight: table shape does not match grid")
        if family == "equivalent_to":
            if not (alpha > 0 and beta > 0 and alpha <= beta):
                raise DomainError("equivalent_to needs 0 < alpha <= beta")

    # -- constructors --------------------------------------------------------

    @classmethod
    def constant(cls, c, dimension=1, **kw):
        if not c > 0:
            raise DomainError("constant weight must be positive")
        kw.setdefault("bounded_above", True)
        kw.setdefault("doubling", True)
        return cls("constant", dimension, value=float(c), label=f"constant({c})", **kw)

    @classmethod
    def boundary_profile(cls, profile, domain, **kw):
        """w(x) = f(r(x)) with r the distance to the boundary of ``domain``."""
        fn, src = cls._coerce_profile(profile)
        return cls("boundary_profile", domain.dimension, profile=fn,
                   profile_source=src, domain=domain, **kw)

    @classmethod
    def radial(cls, profile, dimension, **kw):
        fn, src = cls._coerce_profile(profile)
        return cls("radial", dimension, profile=fn, profile_source=src, **kw)

    @classmethod
    def point_singular(cls, profile, dimension, **kw):
        """w(x) = f(|x|) with f blowing up at 0; origin goes to the infinity set."""
        fn, src = cls._coerce_profile(profile)
        kw.setdefault("infinity_set", PointSet.of(np.zeros(dimension),
                                                  dimension=dimension))
        kw.setdefault("bounded_above", False)
        return cls("point_singular", dimension, profile=fn, profile_source=src, **kw)

    @classmethod
    def expression(cls, source, dimension=1, domain=None, **kw):
        return cls("expression", dimension, expr_source=source, domain=domain,
                   label=f"expr({source})", **kw)

    @classmethod
    def tabulated(cls, grid, table, **kw):
        grid = [np.asarray(g, dtype=float) for g in grid]
        kw.setdefault("bounded_above", True)
        return cls("tabulated", len(grid), grid=grid, table=table, **kw)

    @classmethod
    def product(cls, parts, **kw):
        parts = list(parts)
        dim = parts[0].dimension
        if any(p.dimension != dim for p in parts):
            raise DomainError("product parts must share a dimension")
        zero_pts = [q for p in parts for q in p.zero_set.points]
        inf_pts = [q for p in parts for q in p.infinity_set.points]
        kw.setdefault("zero_set", PointSet(tuple(zero_pts)))
        kw.setdefault("infinity_set", PointSet(tuple(inf_pts)))
        return cls("product", dim, parts=parts, **kw)

    @classmethod
    def equivalent_to(cls, actual, reference, alpha, beta, **kw):
        kw.setdefault("zero_set", actual.zero_set)
        kw.setdefault("infinity_set", actual.infinity_set)
        kw.setdefault("bounded_above", actual.bounded_above)
        return cls("equivalent_to", actual.dimension, actual=actual,
                    reference=reference, alpha=float(alpha), beta=float(beta),
                    domain=actual.domain, **kw)

    @classmethod
    def log_root_example(cls):
        """Piecewise weight on (-1/2, 1/2): 1 for x <= 0, sqrt(log(1/x)) for x > 0.

        The one-sided blow-up at the interior point 0 is declared as its
        infinity set so quadrature grades toward it.
        """
        return cls("log_root_example", 1,
                   infinity_set=PointSet.of(0.0),
                   bounded_above=False,
                   label="log_root_example")

    @staticmethod
    def _coerce_profile(profile):
        if callable(profile):
            return profile, getattr(profile, "source", None)
        fn = compile_profile_expression(str(profile))
        return fn, str(profile)

    # -- evaluation ----------------------------------------------------------

    def raw_value(self, x, omega=None):
        """Evaluate the defining formula at x, ignoring declared sets.

        Raises EvalFailure on math-domain problems; may legitimately return
        0.0 or huge values near singular faces.
        """
        pt = _as_point(x, self.dimension)
        if self.family == "constant":
            return self.value
        if self.family == "boundary_profile":
            dom = omega or self.domain
            if dom is None:
                raise DomainError("boundary_profile weight needs a domain")
            return _call_scalar(self.profile, dom.boundary_distance(pt))
        if self.family in ("radial", "point_singular"):
            return _call_scalar(self.profile, float(np.linalg.norm(pt)))
        if self.family == "expression":
            dom = omega or self.domain
            r = None
            if dom is not None:
                r = dom.boundary_distance(pt)
                if not math.isfinite(r):
                    r = None
            return self._expr_fn(pt, r)
        if self.family == "tabulated":
            return self._interpolate(pt)
        if self.family == "product":
            out = 1.0
            for p in self.parts:
                out *= p.raw_value(pt, omega)
            return out
        if self.family == "equivalent_to":
            return self.actual.raw_value(pt, omega)
        if self.family == "log_root_example":
            xv = pt[0]
            if xv <= 0.0:
                return 1.0
            return _call_scalar(lambda s: math.sqrt(math.log(1.0 / s)), xv)
        raise DomainError(f"unknown weight family {self.family!r}")

    def _interpolate(self, pt):
        if self.dimension == 1:
            g = self._grid[0]
            xv = min(max(pt[0], g[0]), g[-1])
            return float(np.interp(xv, g, self._table))
        from scipy.interpolate import RegularGridInterpolator

        interp = RegularGridInterpolator(self._grid, self._table,
                                         bounds_error=False, fill_value=None)
        clipped = np.array([min(max(pt[i], self._grid[i][0]), self._grid[i][-1])
                            for i in range(self.dimension)])
        return float(interp(clipped))

    def declared_singular_coords(self, a, b):
        """1-d coordinates in (a, b) where quadrature must grade."""
        pts = set(self.zero_set.coords_in_interval(a, b))
        pts.update(self.infinity_set.coords_in_interval(a, b))
        return sorted(pts)

    @property
    def is_radial(self):
        """True when w(x) depends on |x| alone (used for closed-form areas)."""
        if self.family in ("radial", "point_singular", "constant"):
            return True
        if self.family == "product":
            return all(p.is_radial for p in self.parts)
        if self.family == "equivalent_to":
            return self.actual.is_radial
        return False

    def radial_profile(self):
        """Scalar profile g with w(x) = g(|x|); only for radial families."""
        if self.family in ("radial", "point_singular"):
            return self.profile
        if self.family == "constant":
            c = self.value
            return lambda s: c
        if self.family == "equivalent_to":
            return self.actual.radial_profile()
        if self.family == "product" and self.is_radial:
            profs = [p.radial_profile() for p in self.parts]

            def g(s):
                out = 1.0
                for p in profs:
                    out *= _call_scalar(p, s)
                return out

            return g
        raise DomainError(f"{self.family} weight has no radial profile")

    def describe(self):
        d = {"family": self.family, "label": self.label}
        if self.family == "constant":
            d["value"] = self.value
        if self.profile_source:
            d["profile"] = self.profile_source
        if self.expr_source:
            d["expr"] = self.expr_source
        if self.family == "equivalent_to":
            d["alpha"] = self.alpha
            d["beta"] = self.beta
            d["reference"] = self.reference.describe()
        if self.zero_set:
            d["zero_set"] = [list(p) for p in self.zero_set.points]
        if self.infinity_set:
            d["infinity_set"] = [list(p) for p in self.infinity_set.points]
        return d

    def __repr__(self):
        return f"WeightSpec({self.label})"


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def evaluate_weight(w, x, omega=None):
    """Evaluate w at a point of the domain.

    Returns the infinity marker exactly on the declared infinity set, 0.0
    exactly on the declared zero set, and otherwise a positive finite float.
    A nonpositive or non-finite value off the declared sets means the sets
    were mis-declared and raises AssumptionViolation.
    """
    dom = omega or w.domain
    pt = _as_point(x, w.dimension)
    if dom is not None and not dom.contains(pt):
        raise DomainError(f"point {pt} lies outside the domain")
    if w.infinity_set.contains(pt):
        return INFINITY
    if w.zero_set.contains(pt):
        return 0.0
    try:
        v = w.raw_value(pt, dom)
    except EvalFailure as exc:
        raise AssumptionViolation(
            f"weight evaluation failed at {pt}: {exc}", point=pt) from exc
    if not math.isfinite(v):
        raise AssumptionViolation(
            f"weight is non-finite at {pt} outside the declared infinity set",
            point=pt, value=v)
    if v <= 0.0:
        raise AssumptionViolation(
            f"weight is {v} at {pt} outside the declared zero set",
            point=pt, value=v)
    return v


def assert_compact_bounds(w, box_lo, box_hi=None, omega=None, samples_per_axis=None):
    """Sampled (min, max) of w over a compact box K.

    K must avoid the declared zero/infinity sets; a degenerate sampled
    bound (<= 0, non-finite, or a declared-set hit) raises
    AssumptionViolation carrying the offending point, which signals a
    mis-declared zero or infinity set.
    """
    if box_hi is None:
        box_lo, box_hi = box_lo  # allow a single (lo, hi) tuple
    lo = np.atleast_1d(np.asarray(box_lo, dtype=float))
    hi = np.atleast_1d(np.asarray(box_hi, dtype=float))
    n = lo.size
    if samples_per_axis is None:
        samples_per_axis = {1: 65, 2: 17, 3: 9}.get(n, 9)
    axes = [np.linspace(lo[i], hi[i], samples_per_axis) for i in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    m_K = math.inf
    M_K = -math.inf
    for pt in pts:
        if w.infinity_set.contains(pt) or w.zero_set.contains(pt):
            raise AssumptionViolation(
                f"compact box touches a declared singular point at {pt}",
                point=pt)
        try:
            v = w.raw_value(pt, omega)
        except EvalFailure as exc:
            raise AssumptionViolation(
                f"weight evaluation failed on K at {pt}: {exc}", point=pt) from exc
        if not math.isfinite(v) or v <= 0.0:
            raise AssumptionViolation(
                f"weight degenerates to {v} at {pt} inside a compact box",
                point=pt, value=v)
        m_K = min(m_K, v)
        M_K = max(M_K, v)
    return m_K, M_K


@dataclass(frozen=True)
class AdmissibilityReport:
    """Outcome of the dual-exponent local-integrability check."""

    exponent: float
    condition_checked: str          # "L1loc" (p > 1) or "ess_sup" (p = 1)
    holds: bool
    witness: dict = field(default_factory=dict)
    ball_reports: tuple = ()

    def __bool__(self):
        return self.holds


def admissibility_check(w, omega, p, tol=1e-6, centers=None, n_centers=9):
    """Check that the weighted space embeds into L^1_loc for exponent p.

    For p > 1, estimates the integral of w^(-1/(p-1)) over a family of
    balls with closure inside the domain (minus the declared infinity set)
    and requires every estimate to converge under refinement; a certified
    divergence on any ball yields holds=False with that ball as witness.
    For p = 1, requires sampled 1/w to stay bounded on each ball.
    """
    from . import measure_engine  # runtime import; measure depends on this module

    if p < 1:
        raise DomainError("exponent p must be >= 1")
    condition = "L1loc" if p > 1 else "ess_sup"
    balls = _admissibility_balls(w, omega, centers, n_centers)
    reports = []
    worst = None
    holds = True
    for center, radius in balls:
        if p > 1:
            entry = measure_engine.local_dual_integral(w, omega, center, radius,
                                                       p, tol)
        else:
            entry = _sampled_sup_inverse(w, omega, center, radius)
        reports.append(entry)
        if not entry["ok"]:
            holds = False
            if worst is None or entry.get("estimate", math.inf) >= worst.get(
                    "estimate", -math.inf):
                worst = entry
        elif holds:
            if worst is None or entry.get("estimate", 0.0) > worst.get(
                    "estimate", 0.0):
                worst = entry
    return AdmissibilityReport(exponent=float(p), condition_checked=condition,
                               holds=holds, witness=worst or {},
                               ball_reports=tuple(reports))


def _admissibility_balls(w, omega, centers, n_centers):
    """Interior balls with closure in the domain, covering a coarse grid
    plus every declared zero-set point (the candidates for divergence)."""
    lo, hi = omega.bounding_box()
    n = omega.dimension
    cand = []
    if centers is not None:
        cand.extend(np.asarray(c, dtype=float).reshape(-1) for c in centers)
    else:
        axes = [np.linspace(lo[i], hi[i], n_centers + 2)[1:-1] for i in range(n)]
        if n == 1:
            cand.extend(np.array([t]) for t in axes[0])
        else:
            mesh = np.meshgrid(*axes, indexing="ij")
            cand.extend(np.stack([m.ravel() for m in mesh], axis=1))
        for q in w.zero_set.points:
            cand.append(np.asarray(q, dtype=float))
    balls = []
    for c in cand:
        if not omega.contains(c):
            continue
        margin = omega.boundary_distance(c)
        if not math.isfinite(margin):
            margin = 1.0
        radius = 0.45 * margin
        if radius <= 0:
            continue
        # keep the closure clear of the declared infinity set
        for q in w.infinity_set.points:
            gap = float(np.linalg.norm(np.asarray(q) - c))
            if gap <= radius:
                radius = max(0.45 * gap, 0.0)
        if radius > 1e-12:
            balls.append((c, radius))
    return balls


def _sampled_sup_inverse(w, omega, center, radius, n_samples=129,
                         ceiling=1e12):
    xs = np.linspace(-radius, radius, n_samples)
    sup = 0.0
    arg = None
    for t in xs:
        pt = center + t * _unit_like(center)
        if not omega.contains(pt):
            continue
        if w.zero_set.contains(pt):
            sup = math.inf
            arg = pt
            break
        try:
            v = w.raw_value(pt, omega)
        except EvalFailure:
            sup = math.inf
            arg = pt
            break
        if v <= 0:
            sup = math.inf
            arg = pt
            break
        if 1.0 / v > sup:
            sup = 1.0 / v
            arg = pt
    ok = sup < ceiling
    return {"ok": ok, "center": np.asarray(center).tolist(), "radius": radius,
            "estimate": sup, "kind": "ess_sup_1_over_w",
            "worst_point": None if arg is None else np.asarray(arg).tolist()}


def _unit_like(center):
    e = np.zeros_like(np.asarray(center, dtype=float))
    e[0] = 1.0
    return e
