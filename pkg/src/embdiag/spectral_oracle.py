"""Spectral corroboration: the weighted Neumann eigenproblem.

Discretizing the Rayleigh quotient of the weighted space (p = 2) gives a
generalized symmetric eigenproblem whose low spectrum mirrors the
embedding: discrete spectra go with compact embeddings, essential
spectrum creeping down with non-compact ones.  The oracle only ever
corroborates -- its classification is evidence, never a certificate.

Stencil: cell-centered nodes, stiffness with the weight at midpoints
between nodes, diagonally lumped mass with the weight at nodes (clamped
away from zero so the mass stays definite; clamps are counted and
reported).  The clamp floor is a pure anti-underflow guard (1e-250 of
the peak): any higher floor manufactures spurious low modes in regions
where the weight decays fast, polluting the spectrum near truncation
boundaries.  Natural zero-flux boundaries leave constants in the null
space; the zero-expectation constraint removes them by deflation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .domain_weight import DomainSpec, WeightSpec
from .errors import DomainError, SolverError
from .expressions import EvalFailure

WEIGHT_FLOOR_REL = 1e-250
DENSE_2D_LIMIT = 200 * 200


@dataclass
class Discretization:
    """Grid, clamped node weights, and midpoint edge weights."""

    nodes: np.ndarray            # (m,) in 1-d, (m, 2) in 2-d
    spacing: tuple
    node_weights: np.ndarray
    clamp_count: int
    kind: str                    # "line" | "plane"
    shape: tuple = ()            # 2-d logical grid shape before masking
    mask_index: np.ndarray = None  # 2-d: flat indices of kept nodes
    interval: tuple = ()


@dataclass
class TridiagonalForm:
    diag: np.ndarray
    off: np.ndarray

    def quadratic(self, u):
        return float(u @ (self.apply(u)))

    def apply(self, u):
        out = self.diag * u
        out[:-1] += self.off * u[1:]
        out[1:] += self.off * u[:-1]
        return out


@dataclass
class DiagonalForm:
    diag: np.ndarray

    def quadratic(self, u):
        return float(u @ (self.diag * u))


@dataclass
class EigenSolution:
    eigenvalues: np.ndarray      # ascending, first one ~ 0 (Neumann mode)
    eigenvectors: np.ndarray     # columns, B-orthonormal
    rayleigh_residuals: np.ndarray
    grid: Discretization

    def gram_defect(self, B):
        G = self.eigenvectors.T @ (B.diag[:, None] * self.eigenvectors)
        return float(np.max(np.abs(G - np.eye(G.shape[0]))))


@dataclass
class NonlinearPrincipalComponent:
    order: int
    value: float                 # 1 / eigenvalue
    eigenvalue: float
    vector: np.ndarray
    weighted_mean: float


@dataclass
class SpectralVerdict:
    counting_table: dict         # (resolution, truncation) -> {lambda: count}
    classification: str          # DiscreteConsistent | EssentialSpectrumEvidence | Unresolved
    note: str = ""
    details: dict = field(default_factory=dict)


def _truncated_interval(omega, truncation):
    if omega.kind == "interval":
        a, b = omega.a, omega.b
        if truncation is not None:
            if not math.isfinite(a):
                a = -float(truncation)
            if not math.isfinite(b):
                b = float(truncation)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise DomainError("unbounded interval needs a truncation")
        return a, b
    if omega.kind == "full_space" and omega.dimension == 1:
        R = float(truncation if truncation is not None
                  else omega.truncation_radius)
        return -R, R
    if omega.kind == "ball" and omega.dimension == 1:
        c = float(omega.center[0])
        return c - omega.radius, c + omega.radius
    raise DomainError(f"no 1-d discretization for domain kind {omega.kind}")


def _node_weight(w, omega, pt):
    arr = np.atleast_1d(pt)
    if w.zero_set.contains(arr):
        return 0.0
    if w.infinity_set.contains(arr):
        return math.nan   # patched from neighbours afterwards
    try:
        v = w.raw_value(arr, omega)
    except EvalFailure:
        return math.nan
    return v if math.isfinite(v) and v >= 0 else math.nan


def build_discretization(w, omega, resolution, truncation=None):
    """Cell-centered grid covering the (possibly truncated) domain."""
    if resolution < 8:
        raise DomainError("resolution must be at least 8 nodes")
    if omega.dimension == 1:
        a, b = _truncated_interval(omega, truncation)
        h = (b - a) / resolution
        nodes = a + (np.arange(resolution) + 0.5) * h
        vals = np.array([_node_weight(w, omega, x) for x in nodes])
        vals = _patch_nan(vals)
        floor = WEIGHT_FLOOR_REL * float(np.nanmax(vals))
        clamped = np.maximum(vals, floor)
        return Discretization(nodes, (h,), clamped,
                              int(np.sum(vals < floor)), "line",
                              interval=(a, b))
    if omega.dimension == 2:
        lo, hi = omega.bounding_box(truncation)
        hx = (hi[0] - lo[0]) / resolution
        hy = (hi[1] - lo[1]) / resolution
        if resolution * resolution > DENSE_2D_LIMIT:
            raise DomainError("2-d grids are capped at 200x200 nodes")
        xs = lo[0] + (np.arange(resolution) + 0.5) * hx
        ys = lo[1] + (np.arange(resolution) + 0.5) * hy
        pts = []
        keep = []
        vals = []
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                pt = np.array([x, y])
                if omega.contains(pt):
                    keep.append(i * resolution + j)
                    pts.append(pt)
                    vals.append(_node_weight(w, omega, pt))
        vals = _patch_nan(np.array(vals))
        floor = WEIGHT_FLOOR_REL * float(np.nanmax(vals))
        clamped = np.maximum(vals, floor)
        return Discretization(np.array(pts), (hx, hy), clamped,
                              int(np.sum(vals < floor)), "plane",
                              shape=(resolution, resolution),
                              mask_index=np.array(keep, dtype=int))
    raise DomainError("spectral oracle supports dimensions 1 and 2")


def _patch_nan(vals):
    if not np.any(np.isnan(vals)):
        return vals
    out = vals.copy()
    n = len(out)
    for i in np.where(np.isnan(out))[0]:
        left = out[i - 1] if i > 0 and not np.isnan(out[i - 1]) else None
        right = out[i + 1] if i + 1 < n and not np.isnan(out[i + 1]) else None
        cands = [v for v in (left, right) if v is not None]
        out[i] = max(cands) if cands else 0.0
    return out


def assemble(w, omega, grid):
    """(stiffness form A, mass form B) for the weighted Neumann problem.

    A encodes the weighted Dirichlet energy with midpoint coefficients;
    B is the diagonally lumped weighted mass.  A annihilates constants
    (zero-flux boundaries); B is positive definite after clamping.
    """
    if grid.kind == "line":
        h = grid.spacing[0]
        mids = 0.5 * (grid.nodes[:-1] + grid.nodes[1:])
        edge = np.array([_node_weight(w, omega, x) for x in mids])
        edge = _patch_nan(edge)
        floor = WEIGHT_FLOOR_REL * float(np.max(grid.node_weights))
        edge = np.maximum(edge, floor)
        off = -edge / h
        diag = np.zeros(len(grid.nodes))
        diag[:-1] -= off
        diag[1:] -= off
        B = grid.node_weights * h
        if not np.all(B > 0):
            raise DomainError("degenerate mass: all node weights at the floor")
        return TridiagonalForm(diag, off), DiagonalForm(B)
    return _assemble_2d(w, omega, grid)


def _assemble_2d(w, omega, grid):
    from scipy.sparse import coo_matrix

    hx, hy = grid.spacing
    res = grid.shape[0]
    index_of = {flat: k for k, flat in enumerate(grid.mask_index)}
    rows, cols, data = [], [], []
    m = len(grid.nodes)
    diag = np.zeros(m)
    for k, flat in enumerate(grid.mask_index):
        i, j = divmod(flat, res)
        for di, dj, factor in ((1, 0, hy / hx), (0, 1, hx / hy)):
            ni, nj = i + di, j + dj
            if ni >= res or nj >= res:
                continue
            nb = ni * res + nj
            if nb not in index_of:
                continue
            k2 = index_of[nb]
            mid = 0.5 * (grid.nodes[k] + grid.nodes[k2])
            wv = _node_weight(w, omega, mid)
            if math.isnan(wv):
                wv = 0.5 * (grid.node_weights[k] + grid.node_weights[k2])
            c = wv * factor
            rows.extend((k, k2))
            cols.extend((k2, k))
            data.extend((-c, -c))
            diag[k] += c
            diag[k2] += c
    rows.extend(range(m))
    cols.extend(range(m))
    data.extend(diag)
    A = coo_matrix((data, (rows, cols)), shape=(m, m)).tocsr()
    B = DiagonalForm(grid.node_weights * hx * hy)
    return A, B


def solve_k(A, B, k, grid=None):
    """k smallest eigenpairs of A u = lambda B u, B-orthonormal vectors.

    The diagonal mass reduces the problem to standard symmetric form, so
    orthonormality is exact up to rounding and the solve is deterministic.
    """
    scale = 1.0 / np.sqrt(B.diag)
    if isinstance(A, TridiagonalForm):
        m = len(A.diag)
        k = min(k, m)
        d = A.diag * scale * scale
        e = A.off * scale[:-1] * scale[1:]
        try:
            vals, vecs = eigh_tridiagonal(d, e, select="i",
                                          select_range=(0, k - 1))
        except Exception as exc:  # pragma: no cover - LAPACK failure surface
            raise SolverError(f"tridiagonal eigensolver failed: {exc}") from exc
        U = vecs * scale[:, None]
    else:
        from scipy.sparse import diags
        from scipy.sparse.linalg import eigsh

        m = A.shape[0]
        k = min(k, m - 2)
        S = diags(scale)
        A_std = (S @ A @ S).tocsc()
        v0 = np.ones(m) / math.sqrt(m)
        try:
            vals, vecs = eigsh(A_std, k=k, sigma=-1.0, which="LM", v0=v0)
        except Exception as exc:
            raise SolverError(f"sparse eigensolver failed: {exc}",
                              residuals=None) from exc
        order = np.argsort(vals)
        vals = vals[order]
        vecs = vecs[:, order]
        U = vecs * scale[:, None]
    residuals = []
    for i in range(len(vals)):
        u = U[:, i]
        num = A.quadratic(u) if isinstance(A, TridiagonalForm) \
            else float(u @ (A @ u))
        den = B.quadratic(u)
        residuals.append(abs(num / den - vals[i]))
    residuals = np.array(residuals)
    tol = 1e-8 * (1.0 + np.abs(vals))
    if np.any(residuals > tol):
        raise SolverError("Rayleigh residuals exceed tolerance",
                          residuals=residuals)
    vals = np.asarray(vals, dtype=float)
    # the Neumann zero mode lands at a rounding-level negative; clip it
    near_zero = (vals < 0) & (vals > -1e-8 * (1.0 + np.max(np.abs(vals))))
    vals = np.where(near_zero, 0.0, vals)
    return EigenSolution(vals, U, residuals,
                         grid if grid is not None else None)


def solve_weighted(w, omega, k, resolution, truncation=None):
    grid = build_discretization(w, omega, resolution, truncation)
    A, B = assemble(w, omega, grid)
    sol = solve_k(A, B, k, grid)
    return sol, B


def compute_npcs(w, omega, count, resolution=1000, truncation=None):
    """First ``count`` nonlinear principal components.

    The weighted-constant direction (the Neumann zero mode) is removed by
    deflation, which realizes the zero-expectation constraint exactly in
    the discrete inner product; component values are 1/lambda.
    """
    total = me_total = _finite_total_weight(w, omega)
    if not math.isfinite(total):
        raise DomainError("principal components need a finite total weight")
    sol, B = solve_weighted(w, omega, count + 1, resolution, truncation)
    out = []
    mass = B.diag
    for i in range(1, min(count + 1, len(sol.eigenvalues))):
        lam = float(sol.eigenvalues[i])
        vec = sol.eigenvectors[:, i].copy()
        # enforce zero weighted mean exactly (deflate the constant mode)
        mean = float(mass @ vec) / float(np.sum(mass))
        vec -= mean
        norm = math.sqrt(float(vec @ (mass * vec)))
        vec /= norm
        if vec[np.argmax(np.abs(vec))] < 0:
            vec = -vec
        wmean = float(mass @ vec)
        out.append(NonlinearPrincipalComponent(
            order=i, value=1.0 / lam if lam > 0 else math.inf,
            eigenvalue=lam, vector=vec, weighted_mean=wmean))
    return out, sol


def _finite_total_weight(w, omega):
    from . import measure_engine as me

    res = me.weighted_measure(w, me.WholeDomain(), omega, tol=1e-6)
    return math.inf if res.is_divergent else res.value


def compactness_probe(w, omega, resolutions=(400, 800, 1600),
                      truncations=None, lambda_list=(0.5, 1.5, 2.5, 4.5, 8.5),
                      max_eigs=64):
    """Eigenvalue counting across resolutions and truncations.

    Counts use the deflated spectrum (zero mode dropped).  Stability of
    every count across the two finest resolutions (and two largest
    truncations on unbounded domains) is consistent with a discrete
    spectrum; counts that keep growing with the truncation betray
    essential spectrum filling in from below.
    """
    resolutions = tuple(sorted(int(r) for r in resolutions))
    if len(resolutions) < 2:
        raise DomainError("probe needs at least 2 resolutions")
    unbounded = not omega.is_bounded
    if unbounded:
        truncations = tuple(sorted(float(t) for t in (truncations or (8, 16, 32))))
        if len(truncations) < 2:
            raise DomainError("unbounded domains need at least 2 truncations")
    else:
        truncations = (None,)
    lambda_list = tuple(sorted(float(v) for v in lambda_list))
    table = {}
    failures = []
    for res in resolutions:
        for trunc in truncations:
            try:
                sol, _ = solve_weighted(w, omega, max_eigs, res, trunc)
            except SolverError as exc:
                failures.append(((res, trunc), str(exc)))
                continue
            spectrum = sol.eigenvalues[1:]   # deflated
            counts = {lam: int(np.sum(spectrum <= lam)) for lam in lambda_list}
            counts["_max_computed"] = float(sol.eigenvalues[-1])
            table[(res, trunc)] = counts
    if failures:
        return SpectralVerdict(table, "Unresolved",
                               f"solver failures: {failures}")
    finest = resolutions[-1]
    prev = resolutions[-2]
    res_stable = all(
        abs(table[(finest, tr)][lam] - table[(prev, tr)][lam]) <= 1
        for tr in truncations for lam in lambda_list)
    if not unbounded:
        if res_stable:
            return SpectralVerdict(table, "DiscreteConsistent",
                                   "counts stable across the finest "
                                   "resolutions")
        return SpectralVerdict(table, "Unresolved",
                               "counts not resolution-stable")
    top, mid = truncations[-1], truncations[-2]
    trunc_stable = all(
        abs(table[(finest, top)][lam] - table[(finest, mid)][lam]) <= 1
        for lam in lambda_list)
    growing = any(
        all(table[(finest, truncations[i + 1])][lam]
            >= table[(finest, truncations[i])][lam] + 2
            for i in range(len(truncations) - 1))
        for lam in lambda_list)
    if growing:
        return SpectralVerdict(
            table, "EssentialSpectrumEvidence",
            "eigenvalue counts below fixed thresholds grow with the "
            "truncation radius")
    if res_stable and trunc_stable:
        return SpectralVerdict(table, "DiscreteConsistent",
                               "counts stable across resolutions and "
                               "truncations")
    return SpectralVerdict(table, "Unresolved",
                           "counts neither stable nor monotonically growing")


def spectrum_csv_rows(table):
    rows = [("resolution", "truncation", "k", "lambda")]
    for (res, trunc), counts in sorted(table.items(),
                                       key=lambda kv: (kv[0][0],
                                                       kv[0][1] or 0.0)):
        for lam, count in sorted((k, v) for k, v in counts.items()
                                 if not isinstance(k, str)):
            rows.append((res, trunc if trunc is not None else "", count, lam))
    return rows
