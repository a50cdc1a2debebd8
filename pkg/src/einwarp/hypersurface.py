"""Structure-condition checks for hypersurface data.

A hypersurface of the warped ambient I x_f Q^n(c) is described here
intrinsically by a StructureData record: the induced metric g, the shape
operator field A, the tangential part T of the ambient interval direction,
the angle function theta, and the height function pi into I (so T is the
g-gradient of pi), together with the ambient pair (f, c).  The six
structure conditions tie these together:

  (A)  A is self-adjoint with respect to g;
  (B)  |T|^2 + theta^2 = 1;
  (C)  nab_X T = (f'/f)(X - <X,T> T) + theta A X;
  (D)  X(theta) = -<A T, X> - (f'/f) theta <X, T>;
  (E)  (nab_X A)Y - (nab_Y A)X = theta b (<T,X> Y - <T,Y> X)   (Codazzi);
  (F)  R(X,Y,Z,W) equals the ambient Gauss combination built from a, b, A, T,

with the ambient invariants

  a = ((f')^2 - c)/f^2,     b = f''/f - (f')^2/f^2 + c/f^2.

Field derivatives are taken by second-order central differences of the
coordinate component functions plus Christoffel corrections; condition (F)
compares against the finite-difference curvature oracle.  All residuals
are sup-norms over a sample grid, reported with pass/fail flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
import scipy.integrate
import scipy.linalg

from .curvature import (
    DEFAULT_STEP,
    CoordinateMetric,
    CurvatureGrid,
    MWPSpec,
    curvature_grid,
    metric_grid,
)
from .errors import ConstraintError, DomainError, WrongShapeError
from .report import ResidualReport
from .scalarfun import SmoothFn

__all__ = [
    "AmbientInvariants",
    "StructureData",
    "PrincipalSpectrum",
    "ambient_invariants",
    "structure_residuals",
    "ricci_via_corollary",
    "einstein_residual",
    "principal_decomposition",
    "check_T_principal",
    "check_quadratics",
    "check_multiplicity_laws",
    "check_theta_gradient",
    "check_log_derivative_link",
    "check_id_system",
    "involutivity_residual",
    "frame_involutivity_residual",
]

STRUCTURE_TOL = 1e-6
ALGEBRAIC_TOL = 1e-9
FIELD_STEP = 1e-5  # step for derivatives of the supplied fields (first order only)


# ---------------------------------------------------------------------------
# data containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AmbientInvariants:
    """a = ((f')^2 - c)/f^2 and b = f''/f - (f')^2/f^2 + c/f^2 at one height."""

    a: float
    b: float


def ambient_invariants(f: SmoothFn, c: int, t) -> AmbientInvariants:
    """Ambient invariants of I x_f Q^n(c) at height t (t may be an array)."""
    t = np.asarray(t, dtype=float)
    val = np.asarray(f(t))
    if np.any(val <= 0):
        raise DomainError("warping function must be positive at the requested height")
    d1 = np.asarray(f.derivative()(t))
    d2 = np.asarray(f.derivative().derivative()(t))
    a = (d1**2 - c) / val**2
    b = d2 / val - d1**2 / val**2 + c / val**2
    if t.ndim == 0:
        return AmbientInvariants(float(a), float(b))
    return AmbientInvariants(a, b)


@dataclass(frozen=True)
class StructureData:
    """Intrinsic hypersurface datum (g, A, T, theta, pi, f, c).

    All field callables must be numpy-vectorized over points of shape
    (..., dim): shape_operator returns endomorphism components (..., d, d),
    tangent_part returns (..., d), angle and height return (...,).
    """

    metric: CoordinateMetric
    shape_operator: Callable[[np.ndarray], np.ndarray]
    tangent_part: Callable[[np.ndarray], np.ndarray]
    angle: Callable[[np.ndarray], np.ndarray]
    height: Callable[[np.ndarray], np.ndarray]
    warping: SmoothFn
    ambient_curvature: int
    orientation: str = "as-given"

    @property
    def dim(self) -> int:
        return self.metric.dim

    def flipped(self) -> "StructureData":
        """Simultaneous sign flip (A, theta) -> (-A, -theta); preserves (A)-(F)."""
        shape, angle = self.shape_operator, self.angle
        return replace(
            self,
            shape_operator=lambda pts: -shape(pts),
            angle=lambda pts: -angle(pts),
            orientation="flipped" if self.orientation == "as-given" else "as-given",
        )

    def invariants_at(self, pts) -> AmbientInvariants:
        return ambient_invariants(self.warping, self.ambient_curvature, self.height(pts))


@dataclass(frozen=True)
class PrincipalSpectrum:
    """Clustered eigenvalues of the shape operator at a point.

    Clusters are sorted by eigenvalue; `t_cluster` is the index of the
    cluster whose eigenspace carries the T direction (None when T = 0).
    """

    values: tuple[float, ...]
    multiplicities: tuple[int, ...]
    bases: tuple[np.ndarray, ...]  # (d, mult) g-orthonormal columns per cluster
    cluster_tol: float
    t_cluster: int | None
    well_separated: bool
    three_curvature_violation: bool

    @property
    def n(self) -> int:
        return sum(self.multiplicities)

    @property
    def n_clusters(self) -> int:
        return len(self.values)

    def mean_curvature_times_n(self) -> float:
        return float(sum(v * m for v, m in zip(self.values, self.multiplicities)))

    def non_t_clusters(self) -> list[int]:
        return [i for i in range(self.n_clusters) if i != self.t_cluster]


# ---------------------------------------------------------------------------
# field derivative helpers
# ---------------------------------------------------------------------------

def _field_d1(field, pts: np.ndarray, h: float) -> np.ndarray:
    """Central difference d_m of an arbitrary-shaped field: (..., m, comps)."""
    d = pts.shape[-1]
    shifts = h * np.eye(d)
    plus = np.asarray(field(pts[..., None, :] + shifts))
    minus = np.asarray(field(pts[..., None, :] - shifts))
    return (plus - minus) / (2.0 * h)


def _gnorm(g: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(np.einsum("...ij,...i,...j->...", g, v, v), 0.0))


def _warping_jet(data: StructureData, pts: np.ndarray):
    t = np.asarray(data.height(pts))
    f = np.asarray(data.warping(t))
    if np.any(f <= 0):
        raise DomainError("ambient warping f is not positive over the sample grid")
    fp = np.asarray(data.warping.derivative()(t))
    fpp = np.asarray(data.warping.derivative().derivative()(t))
    return t, f, fp, fpp


# ---------------------------------------------------------------------------
# the six structure conditions
# ---------------------------------------------------------------------------

def structure_residuals(
    data: StructureData,
    grid: np.ndarray | None = None,
    *,
    n_random: int = 10,
    rng: np.random.Generator | None = None,
    tol: float | dict = STRUCTURE_TOL,
    step: float | None = None,
    richardson: bool | None = None,
    field_step: float = FIELD_STEP,
    curv: CurvatureGrid | None = None,
) -> ResidualReport:
    """Sup-norm residuals of conditions (A)-(F) over a sample grid.

    Directions for (C)-(E) are the coordinate frame plus `n_random`
    random constant-coefficient combinations (seeded through `rng`).
    A precomputed CurvatureGrid over the same grid may be passed as
    `curv` to share the oracle with an Einstein check.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    if grid is None:
        grid = metric_grid(data.metric, 5)
    pts = np.atleast_2d(np.asarray(grid, dtype=float))
    n_pts, d = pts.shape

    if curv is None:
        curv = curvature_grid(data.metric, pts, step, richardson=richardson)
    g, ginv, gamma = curv.metric, curv.inverse, curv.christoffel

    A = np.asarray(data.shape_operator(pts))      # A^k_j -> (N, k, j)
    T = np.asarray(data.tangent_part(pts))        # (N, d)
    theta = np.asarray(data.angle(pts))           # (N,)
    _, f, fp, _ = _warping_jet(data, pts)
    inv = data.invariants_at(pts)
    lam = fp / f

    tau = np.einsum("...ij,...j->...i", g, T)     # T flat
    a_flat = np.einsum("...ik,...kj->...ij", g, A)
    tnorm2 = np.einsum("...i,...i->...", T, tau)

    def tol_for(name: str) -> float:
        if isinstance(tol, dict):
            return float(tol.get(name, STRUCTURE_TOL))
        return float(tol)

    report = ResidualReport()
    grid_desc = f"{n_pts} pts, field step {field_step:g}, oracle step {curv.step:g}"
    report.meta["orientation"] = data.orientation
    report.meta["grid"] = grid_desc

    # (A) self-adjointness: sup |<AX,Y> - <X,AY>| over frame pairs
    res_a = np.abs(a_flat - np.swapaxes(a_flat, -1, -2)).max()
    report.add("A", res_a, tol_for("A"), grid_desc)

    # (B) |T|^2 + theta^2 = 1
    report.add("B", np.abs(tnorm2 + theta**2 - 1.0).max(), tol_for("B"), grid_desc)

    # (C) nab_X T - (f'/f)(X - <X,T>T) - theta A X, as a matrix in X = e_i
    dT = _field_d1(data.tangent_part, pts, field_step)          # (N, m, k)
    nabla_T = np.swapaxes(dT, -1, -2) + np.einsum("...kij,...j->...ki", gamma, T)
    expected = (
        lam[..., None, None] * (np.eye(d) - np.einsum("...k,...i->...ki", T, tau))
        + theta[..., None, None] * A
    )
    res_c_mat = nabla_T - expected                               # (N, k, i) column per X
    cols = np.moveaxis(res_c_mat, -1, -2)                        # (N, i, k)
    res_c = _gnorm(g[:, None], cols).max()
    coeffs = rng.standard_normal((n_random, d))
    coeffs /= np.linalg.norm(coeffs, axis=-1, keepdims=True)
    rand_cols = np.einsum("...ki,ri->...rk", res_c_mat, coeffs)
    res_c = max(res_c, _gnorm(g[:, None], rand_cols).max())
    report.add("C", res_c, tol_for("C"), grid_desc)

    # (D) X(theta) + <AT,X> + (f'/f) theta <X,T>
    dtheta = _field_d1(data.angle, pts, field_step)              # (N, m)
    at_flat = np.einsum("...ij,...j->...i", a_flat, T)           # <A e_i, T> = (gA)_{ij}T^j
    res_d_vec = dtheta + at_flat + (lam * theta)[..., None] * tau
    res_d = np.abs(res_d_vec).max()
    res_d = max(res_d, np.abs(np.einsum("...i,ri->...r", res_d_vec, coeffs)).max())
    report.add("D", res_d, tol_for("D"), grid_desc)

    # (E) Codazzi: (nab_i A)e_j - (nab_j A)e_i - theta b (tau_i e_j - tau_j e_i)
    dA = _field_d1(data.shape_operator, pts, field_step)         # (N, m, k, j)
    nabla_A = (
        dA
        + np.einsum("...kim,...mj->...ikj", gamma, A)
        - np.einsum("...km,...mij->...ikj", A, gamma)
    )                                                            # (N, i, k, j) = (nab_i A)^k_j
    # antisymmetrized in (i, j): C[i,j,k] = ((nab_i A) e_j - (nab_j A) e_i)^k
    nab = np.moveaxis(nabla_A, -2, -1)                           # (N, i, j, k)
    anti = nab - np.swapaxes(nab, -3, -2)
    tb = (theta * inv.b)[..., None, None, None]
    eye = np.eye(d)
    rhs = tb * (
        np.einsum("...i,jk->...ijk", tau, eye) - np.einsum("...j,ik->...ijk", tau, eye)
    )
    res_e_field = anti - rhs                                     # (N, i, j, k)
    res_e = _gnorm(g[:, None, None], res_e_field).max()
    pair_coeffs = rng.standard_normal((n_random, 2, d))
    pair_coeffs /= np.linalg.norm(pair_coeffs, axis=-1, keepdims=True)
    rand_pairs = np.einsum("...ijk,ri,rj->...rk", res_e_field, pair_coeffs[:, 0], pair_coeffs[:, 1])
    res_e = max(res_e, _gnorm(g[:, None], rand_pairs).max())
    report.add("E", res_e, tol_for("E"), grid_desc)

    # (F) Gauss: oracle Riemann vs ambient formula, sup over frame 4-tuples
    res_f = np.abs(curv.riemann - gauss_rhs(g, tau, a_flat, inv.a, inv.b)).max()
    report.add("F", res_f, tol_for("F"), grid_desc)

    # datum invariant T = grad(pi): compare against the metric gradient of pi
    dpi = _field_d1(data.height, pts, field_step)
    grad_pi = np.einsum("...ij,...j->...i", ginv, dpi)
    res_grad = _gnorm(g, T - grad_pi).max()
    report.add("T-is-grad-pi", res_grad, tol_for("T-is-grad-pi"), grid_desc)
    return report


def gauss_rhs(g: np.ndarray, tau: np.ndarray, a_flat: np.ndarray, a, b) -> np.ndarray:
    """Right-hand side of the Gauss condition (F) in coordinate components."""
    a = np.asarray(a)[..., None, None, None, None]
    b = np.asarray(b)[..., None, None, None, None]
    gg = np.einsum("...ik,...jl->...ijkl", g, g)
    out = a * (gg - np.swapaxes(gg, -4, -3))
    tt = np.einsum("...ik,...j,...l->...ijkl", g, tau, tau)  # <X,Z><Y,T><W,T>
    out += b * (
        tt
        - np.swapaxes(tt, -4, -3)                            # -<Y,Z><X,T><W,T>
        - np.swapaxes(tt, -2, -1)                            # -<X,W><Y,T><Z,T>
        + np.swapaxes(np.swapaxes(tt, -4, -3), -2, -1)       # +<Y,W><X,T><Z,T>
    )
    aa = np.einsum("...jk,...il->...ijkl", a_flat, a_flat)
    out += aa - np.swapaxes(aa, -2, -1)
    return out


# ---------------------------------------------------------------------------
# Ricci
# ---------------------------------------------------------------------------

def ricci_via_corollary(data: StructureData, x, X, Y) -> float:
    """Ric(X,Y) from the traced Gauss condition.

    -((n-1)a + |T|^2 b) <X,Y> - (n-2) b <X,T><Y,T> + nH <AX,Y> - <AX,AY>.
    """
    x = np.asarray(x, dtype=float)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    g = data.metric.matrix(x)
    A = np.asarray(data.shape_operator(x))
    T = np.asarray(data.tangent_part(x))
    inv = data.invariants_at(x)
    n = data.dim
    tnorm2 = T @ g @ T
    nH = float(np.trace(A))
    ax, ay = A @ X, A @ Y
    return float(
        -((n - 1) * inv.a + tnorm2 * inv.b) * (X @ g @ Y)
        - (n - 2) * inv.b * (X @ g @ T) * (Y @ g @ T)
        + nH * (ax @ g @ Y)
        - ax @ g @ ay
    )


def einstein_residual(
    metric: CoordinateMetric,
    rho: float,
    grid: np.ndarray | None = None,
    *,
    tol: float = STRUCTURE_TOL,
    step: float | None = None,
    richardson: bool | None = None,
    curv: CurvatureGrid | None = None,
) -> ResidualReport:
    """sup |Ric - rho g| over the grid, via the curvature oracle."""
    if grid is None:
        grid = metric_grid(metric, 5)
    pts = np.atleast_2d(np.asarray(grid, dtype=float))
    if curv is None:
        curv = curvature_grid(metric, pts, step, richardson=richardson)
    res = np.abs(curv.ricci - rho * curv.metric).max()
    report = ResidualReport()
    report.add("einstein", res, tol, f"{pts.shape[0]} pts, oracle step {curv.step:g}")
    report.meta["rho"] = rho
    return report


# ---------------------------------------------------------------------------
# principal curvatures
# ---------------------------------------------------------------------------

def principal_decomposition(
    data: StructureData,
    x,
    cluster_tol: float | None = None,
) -> PrincipalSpectrum:
    """Eigenvalues of the shape operator clustered into principal curvatures.

    Solves the generalized symmetric problem (gA) v = lambda g v, so the
    returned per-cluster bases are g-orthonormal.  More than 3 clusters is
    flagged (not fatal): it falsifies the at-most-three classification.
    """
    x = np.asarray(x, dtype=float)
    g = data.metric.matrix(x)
    A = np.asarray(data.shape_operator(x))
    m = g @ A
    asym = np.abs(m - m.T).max()
    scale = max(np.abs(m).max(), 1.0)
    if asym > 1e-8 * scale:
        raise ConstraintError(f"shape operator is not self-adjoint at x (defect {asym:.2e})")
    evals, evecs = scipy.linalg.eigh((m + m.T) / 2.0, g)
    if cluster_tol is None:
        cluster_tol = 1e-6 * (1.0 + np.abs(evals).max())

    clusters: list[list[int]] = [[0]]
    for i in range(1, len(evals)):
        if evals[i] - evals[clusters[-1][-1]] <= cluster_tol:
            clusters[-1].append(i)
        else:
            clusters.append([i])

    values = tuple(float(np.mean(evals[idx])) for idx in clusters)
    mults = tuple(len(idx) for idx in clusters)
    bases = tuple(evecs[:, idx] for idx in clusters)

    T = np.asarray(data.tangent_part(x))
    tnorm2 = float(T @ g @ T)
    t_cluster = None
    if tnorm2 > 1e-24:
        weights = [float(np.sum((T @ g @ basis) ** 2)) for basis in bases]
        t_cluster = int(np.argmax(weights))

    gaps = np.diff(values)
    separated = bool(np.all(gaps > 10.0 * cluster_tol)) if len(values) > 1 else True
    return PrincipalSpectrum(
        values, mults, bases, cluster_tol, t_cluster, separated, len(values) > 3
    )


def check_T_principal(data: StructureData, x) -> float:
    """|A T - (<AT,T>/|T|^2) T|_g / |T|_g; zero iff T is a principal direction."""
    x = np.asarray(x, dtype=float)
    g = data.metric.matrix(x)
    A = np.asarray(data.shape_operator(x))
    T = np.asarray(data.tangent_part(x))
    tnorm2 = T @ g @ T
    if tnorm2 <= 1e-24:
        raise ConstraintError("T vanishes at x: principal direction undefined")
    at = A @ T
    resid = at - ((at @ g @ T) / tnorm2) * T
    return float(math.sqrt(max(resid @ g @ resid, 0.0) / tnorm2))


# ---------------------------------------------------------------------------
# algebraic laws for the eigenvalues
# ---------------------------------------------------------------------------

def _require_t_cluster(spectrum: PrincipalSpectrum) -> int:
    if spectrum.t_cluster is None:
        raise ConstraintError("spectrum has no T-cluster (T = 0?)")
    return spectrum.t_cluster


def check_quadratics(
    spectrum: PrincipalSpectrum,
    rho: float,
    a: float,
    b: float,
    tnorm2: float,
    tol: float = ALGEBRAIC_TOL,
) -> ResidualReport:
    """Quadratic constraints on the principal curvatures of an Einstein datum.

    lambda_i^2 - nH lambda_i + rho + (n-1)a + |T|^2 b = 0   (non-T clusters)
    lambda_n^2 - nH lambda_n + rho + (n-1)(a + |T|^2 b) = 0 (T cluster)
    """
    if spectrum.n_clusters > 3:
        raise ConstraintError("more than 3 principal curvature clusters")
    tc = _require_t_cluster(spectrum)
    n = spectrum.n
    nH = spectrum.mean_curvature_times_n()
    report = ResidualReport()
    for rank, ci in enumerate(spectrum.non_t_clusters(), start=1):
        v = spectrum.values[ci]
        res = v**2 - nH * v + rho + (n - 1) * a + tnorm2 * b
        report.add(f"quadratic[{rank}]", abs(res), tol)
    vn = spectrum.values[tc]
    res_n = vn**2 - nH * vn + rho + (n - 1) * (a + tnorm2 * b)
    report.add("quadratic[T]", abs(res_n), tol)
    return report


def check_multiplicity_laws(
    spectrum: PrincipalSpectrum,
    b: float,
    tnorm2: float,
    n: int,
    tol: float = ALGEBRAIC_TOL,
) -> ResidualReport:
    """Multiplicity/product laws of the lambda_n = 0 branch.

    For b > 0 (two non-T clusters, p_1, p_2 >= 2):
        lambda_1 lambda_2 = -(n-2)|T|^2 b,
        (p_1 - 1) lambda_1 + (p_2 - 1) lambda_2 = 0,
        lambda_i^2 = ((p_j - 1)(n-2)/(p_i - 1)) |T|^2 b.
    For b < 0: single non-T cluster of multiplicity n-1 and
        lambda_1^2 = -|T|^2 b.
    A sign/multiplicity mismatch is flagged, not raised.
    """
    tc = _require_t_cluster(spectrum)
    lam_n = spectrum.values[tc]
    if abs(lam_n) > 1e3 * max(tol, spectrum.cluster_tol):
        raise ConstraintError(f"T-eigenvalue {lam_n:.3e} is not ~0; laws need lambda_n = 0")
    report = ResidualReport()
    others = spectrum.non_t_clusters()
    mults = [spectrum.multiplicities[i] for i in others]
    vals = [spectrum.values[i] for i in others]

    if b > 0:
        if len(others) != 2 or any(p < 2 for p in mults):
            report.meta["branch_mismatch"] = (
                f"b > 0 requires two clusters with p_i >= 2, got mult {mults}"
            )
            report.add("branch", math.inf, tol)
            return report
        (l1, l2), (p1, p2) = vals, mults
        report.add("product-law", abs(l1 * l2 + (n - 2) * tnorm2 * b), tol)
        report.add("sum-law", abs((p1 - 1) * l1 + (p2 - 1) * l2), tol)
        sq = max(
            abs(l1**2 - (p2 - 1) * (n - 2) / (p1 - 1) * tnorm2 * b),
            abs(l2**2 - (p1 - 1) * (n - 2) / (p2 - 1) * tnorm2 * b),
        )
        report.add("square-law", sq, tol)
        return report

    if len(others) != 1 or mults[0] != n - 1:
        report.meta["branch_mismatch"] = (
            f"b < 0 requires one cluster of multiplicity {n - 1}, got {mults}"
        )
        report.add("branch", math.inf, tol)
        return report
    report.add("square-law", abs(vals[0] ** 2 + tnorm2 * b), tol)
    return report


# ---------------------------------------------------------------------------
# gradient of theta and geodesics of T/|T|
# ---------------------------------------------------------------------------

def check_theta_gradient(
    data: StructureData,
    grid: np.ndarray | None = None,
    *,
    tol: float = STRUCTURE_TOL,
    field_step: float = FIELD_STEP,
    step: float | None = None,
    n_curves: int = 3,
    curve_length: float = 0.25,
    rng: np.random.Generator | None = None,
) -> ResidualReport:
    """Residuals of grad(theta) = -(lambda_n + (f'/f) theta) T and of the
    geodesic equation for integral curves of T/|T|.

    Points with T = 0 are skipped (coverage recorded); rejects the grid
    entirely if T vanishes everywhere on it.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    h = DEFAULT_STEP if step is None else float(step)
    if grid is None:
        grid = metric_grid(data.metric, 3)
    pts = np.atleast_2d(np.asarray(grid, dtype=float))

    g = data.metric(pts)
    ginv = np.linalg.inv(g)
    T = np.asarray(data.tangent_part(pts))
    tau = np.einsum("...ij,...j->...i", g, T)
    tnorm2 = np.einsum("...i,...i->...", T, tau)
    mask = tnorm2 > 1e-12
    report = ResidualReport()
    report.meta["coverage"] = f"{int(mask.sum())}/{len(mask)} grid points with |T| > 0"
    if not np.any(mask):
        raise ConstraintError("T vanishes on the whole grid; theta-gradient check undefined")

    theta = np.asarray(data.angle(pts))
    _, f, fp, _ = _warping_jet(data, pts)
    dtheta = _field_d1(data.angle, pts, field_step)
    grad_theta = np.einsum("...ij,...j->...i", ginv, dtheta)
    A = np.asarray(data.shape_operator(pts))
    at = np.einsum("...kj,...j->...k", A, T)
    lam_n = np.einsum("...ij,...i,...j->...", g, at, T) / np.where(mask, tnorm2, 1.0)
    resid_vec = grad_theta + (lam_n + fp / f * theta)[..., None] * T
    res1 = _gnorm(g, resid_vec)[mask].max()
    report.add("theta-gradient", res1, tol, f"{int(mask.sum())} pts")

    # geodesic residual along integrated curves of u = T/|T|
    def unit_t(x):
        x = np.asarray(x, dtype=float)
        tv = np.asarray(data.tangent_part(x))
        gm = data.metric(x)
        nrm = np.sqrt(np.maximum(np.einsum("...ij,...i,...j->...", gm, tv, tv), 1e-300))
        return tv / nrm[..., None]

    margin = 4.0 * h
    lo = np.array([b[0] for b in data.metric.box]) + margin
    hi = np.array([b[1] for b in data.metric.box]) - margin
    starts = pts[mask][rng.choice(int(mask.sum()), size=min(n_curves, int(mask.sum())),
                                  replace=False)]
    worst = 0.0
    truncated = 0
    for x0 in starts:
        def rhs(t, y):
            return unit_t(y)

        def exit_event(t, y):
            return float(np.min(np.minimum(y - lo, hi - y)))

        exit_event.terminal = True
        sol = scipy.integrate.solve_ivp(
            rhs, (0.0, curve_length), x0, rtol=1e-10, atol=1e-12,
            t_eval=np.linspace(0.0, curve_length, 9), events=exit_event,
        )
        if sol.status == 1:
            truncated += 1
        curve = sol.y.T
        inside = np.all((curve > lo) & (curve < hi), axis=-1)
        curve = curve[inside]
        if len(curve) == 0:
            continue
        du = _field_d1(unit_t, curve, field_step)            # (M, m, k)
        u = unit_t(curve)
        gamma = _christoffel_at(data.metric, curve, h)
        acc = np.einsum("...mk,...m->...k", du, u) + np.einsum(
            "...kij,...i,...j->...k", gamma, u, u
        )
        worst = max(worst, _gnorm(data.metric(curve), acc).max())
    if truncated:
        report.meta["truncated_curves"] = truncated
    report.add("geodesic", worst, tol, f"{len(starts)} curves, length {curve_length:g}")
    return report


def _christoffel_at(metric: CoordinateMetric, pts: np.ndarray, h: float) -> np.ndarray:
    from .curvature import _christoffel, _metric_d1

    g = metric(pts)
    _, gamma = _christoffel(g, _metric_d1(metric.evaluator, pts, h))
    return gamma


# ---------------------------------------------------------------------------
# warped-decomposition identities
# ---------------------------------------------------------------------------

def check_log_derivative_link(
    data: StructureData,
    spectrum_at: Callable[[np.ndarray], PrincipalSpectrum],
    phis: Sequence[SmoothFn],
    grid: np.ndarray,
    tol: float = ALGEBRAIC_TOL,
) -> ResidualReport:
    """Residual of phi_i'/phi_i = f'/(|T| f) + theta lambda_i/|T| per fiber.

    Uses df/ds = |T| f' to express the height derivative along the base
    coordinate.  lambda_1 <= lambda_2 are the non-T principal curvatures.
    """
    pts = np.atleast_2d(np.asarray(grid, dtype=float))
    g = data.metric(pts)
    T = np.asarray(data.tangent_part(pts))
    tnorm = np.sqrt(np.einsum("...ij,...i,...j->...", g, T, T))
    mask = tnorm > 1e-12
    if not np.any(mask):
        raise ConstraintError("T vanishes on the grid")
    theta = np.asarray(data.angle(pts))
    _, f, fp, _ = _warping_jet(data, pts)

    report = ResidualReport()
    report.meta["coverage"] = f"{int(mask.sum())}/{len(mask)} grid points with |T| > 0"
    worst = [0.0] * len(phis)
    for idx in np.flatnonzero(mask):
        x = pts[idx]
        spec = spectrum_at(x)
        lams = sorted(spec.values[i] for i in spec.non_t_clusters())
        if len(lams) < len(phis):
            lams = list(lams) + [lams[-1]] * (len(phis) - len(lams))
        s = x[0]
        for i, phi in enumerate(phis):
            lhs = float(phi.derivative()(s)) / float(phi(s))
            rhs = fp[idx] / (tnorm[idx] * f[idx]) + theta[idx] * lams[i] / tnorm[idx]
            worst[i] = max(worst[i], abs(lhs - rhs))
    for i, w in enumerate(worst, start=1):
        report.add(f"log-link[{i}]", w, tol, f"{int(mask.sum())} pts")
    return report


def check_id_system(
    mwp: MWPSpec,
    s_values: np.ndarray,
    spectrum_at: Callable[[float], PrincipalSpectrum],
    ambient_at: Callable[[float], AmbientInvariants],
    tnorm2_at: Callable[[float], float],
    tol: float = ALGEBRAIC_TOL,
) -> ResidualReport:
    """Residuals of the warped-decomposition identities along the base:

    warp-accel[i]   phi_i'' = (a + b|T|^2 - lambda_i lambda_n) phi_i
    warp-energy[i]  (phi_i')^2 + (lambda_i^2 - a) phi_i^2 = k_i   (p_i > 1 only)
    warp-cross      phi_1' phi_2' = (a - lambda_1 lambda_2) phi_1 phi_2
    """
    if len(mwp.fibers) != 2:
        raise WrongShapeError("identity system needs two fibers")
    s_values = np.atleast_1d(np.asarray(s_values, dtype=float))
    report = ResidualReport()
    worst1 = [0.0, 0.0]
    worst2 = [0.0, 0.0]
    worst3 = 0.0
    skipped = []
    for s in s_values:
        spec = spectrum_at(float(s))
        inv = ambient_at(float(s))
        tn2 = tnorm2_at(float(s))
        tc = _require_t_cluster(spec)
        lam_n = spec.values[tc]
        lams = sorted(spec.values[i] for i in spec.non_t_clusters())
        phis = [fib.warping for fib in mwp.fibers]
        vals = [float(p(s)) for p in phis]
        d1 = [float(p.derivative()(s)) for p in phis]
        d2 = [float(p.derivative().derivative()(s)) for p in phis]
        for i in range(2):
            worst1[i] = max(
                worst1[i], abs(d2[i] - (inv.a + inv.b * tn2 - lams[i] * lam_n) * vals[i])
            )
            if mwp.fibers[i].dim > 1:
                res = d1[i] ** 2 + (lams[i] ** 2 - inv.a) * vals[i] ** 2 - mwp.fibers[i].curvature
                worst2[i] = max(worst2[i], abs(res))
            elif i not in skipped:
                skipped.append(i)
        worst3 = max(worst3, abs(d1[0] * d1[1] - (inv.a - lams[0] * lams[1]) * vals[0] * vals[1]))
    desc = f"{len(s_values)} s-points"
    for i in range(2):
        report.add(f"warp-accel[{i + 1}]", worst1[i], tol, desc)
        if mwp.fibers[i].dim > 1:
            report.add(f"warp-energy[{i + 1}]", worst2[i], tol, desc)
    if skipped:
        report.meta["warp_energy_skipped"] = f"fibers {[i + 1 for i in skipped]} are 1-dimensional"
    report.add("warp-cross", worst3, tol, desc)
    return report


# ---------------------------------------------------------------------------
# involutivity of the principal distributions
# ---------------------------------------------------------------------------

def frame_involutivity_residual(
    fields: Sequence[Callable[[np.ndarray], np.ndarray]],
    metric: CoordinateMetric,
    x,
    *,
    step: float = 1e-5,
    complement_basis: np.ndarray | None = None,
) -> float:
    """Max g-norm of the Lie bracket of the frame projected off its own span.

    Brackets are computed by central differences of the field components.
    If `complement_basis` is None the span of the frame at x is used to
    build the g-orthogonal projector.  Residual is normalized by the
    product of the field norms.
    """
    from .curvature import orthonormal_frame

    x = np.asarray(x, dtype=float)
    g = metric.matrix(x)
    vecs = np.stack([np.asarray(f(x), dtype=float) for f in fields], axis=-1)
    span = orthonormal_frame(g, vecs if complement_basis is None else complement_basis)
    proj = span @ span.T @ g  # g-orthogonal projector onto the span
    worst = 0.0
    for ia in range(len(fields)):
        for ib in range(ia + 1, len(fields)):
            fa, fb = fields[ia], fields[ib]
            da = _field_d1(fa, x[None, :], step)[0]   # (m, k)
            db = _field_d1(fb, x[None, :], step)[0]
            va, vb = np.asarray(fa(x)), np.asarray(fb(x))
            bracket = va @ db - vb @ da
            off = bracket - proj @ bracket
            scale = math.sqrt(max(va @ g @ va, 0.0)) * math.sqrt(max(vb @ g @ vb, 0.0))
            if scale < 1e-14:
                raise ConstraintError("frame fields are numerically zero at x")
            worst = max(worst, math.sqrt(max(off @ g @ off, 0.0)) / scale)
    return worst


def involutivity_residual(
    data: StructureData,
    cluster: int,
    x,
    *,
    step: float = 1e-5,
    cluster_tol: float | None = None,
) -> float:
    """Bracket residual of two eigenvector fields of a principal cluster.

    `cluster` is 1-based among the non-T clusters sorted by eigenvalue
    (so 1 picks the most negative principal curvature).  The fields are
    built with the annihilating-projector construction
    F = (A - lambda_other I)(A - lambda_T I) E for constant seeds E, which
    stays inside the chosen eigendistribution wherever the spectrum keeps
    three separated clusters.
    """
    x = np.asarray(x, dtype=float)
    spec0 = principal_decomposition(data, x, cluster_tol)
    tc = _require_t_cluster(spec0)
    others = spec0.non_t_clusters()
    if not 1 <= cluster <= len(others):
        raise ConstraintError(f"cluster index {cluster} out of range (1..{len(others)})")
    ci = others[cluster - 1]
    if spec0.multiplicities[ci] < 2:
        raise ConstraintError("involutivity check needs a cluster of multiplicity >= 2")
    if not spec0.well_separated:
        raise ConstraintError("cluster separation below tolerance: projector ill-conditioned")
    other = [c for c in others if c != ci]
    targets = [spec0.values[c] for c in other] + [spec0.values[tc]]

    def lam_match(y: np.ndarray) -> list[float]:
        sp = principal_decomposition(data, y, cluster_tol)
        return [min(sp.values, key=lambda v: abs(v - t)) for t in targets]

    seeds = [spec0.bases[ci][:, 0], spec0.bases[ci][:, 1]]

    def make_field(seed: np.ndarray):
        def field(pts: np.ndarray) -> np.ndarray:
            pts_arr = np.atleast_2d(np.asarray(pts, dtype=float))
            flat = pts_arr.reshape(-1, pts_arr.shape[-1])
            out = np.empty_like(flat)
            for row, y in enumerate(flat):
                lams = lam_match(y)
                mat = np.eye(data.dim)
                av = np.asarray(data.shape_operator(y))
                for lam in lams:
                    mat = (av - lam * np.eye(data.dim)) @ mat
                out[row] = mat @ seed
            return out.reshape(np.asarray(pts).shape)

        return field

    fields = [make_field(s) for s in seeds]
    return frame_involutivity_residual(
        fields, data.metric, x, step=step, complement_basis=spec0.bases[ci]
    )
