"""Constructors and verifiers for the classified three-curvature example.

Builds the Einstein hypersurface datum

    I x_phi1 S^p1(1/sqrt(k1)) x_phi2 S^p2(1/sqrt(k2)),

    phi_i = B_i f,   B_i = sqrt((p_i - 1) k_i / (n - 3)),
    lambda_i = (-1)^i sqrt((p_j - 1)/(p_i - 1)) / f,   lambda_n = 0,
    theta = 0, |T| = 1, ambient curvature c = 1,

with f the closed-form solution of (f')^2 + rho/(n-1) f^2 = (n-3)/(n-2),
and certifies it numerically: Einstein residual, structure conditions
(A)-(F), the eigenvalue quadratics and multiplicity laws, the warped
identity system, and the derived-constant relations.  Also provides the
non-constant-curvature spread probe, the conformal-flatness check for
single-fiber warped products, and the algebraic forcing chain that rules
out three-curvature Einstein hypersurfaces of cylinders.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .curvature import (
    CoordinateMetric,
    Fiber,
    MWPSpec,
    build_mwp_metric,
    curvature_grid,
    mwp_sectional_closed_form,
    orthonormal_frame,
    sectional_curvature,
    tensor_grid,
    weyl_norm,
)
from .errors import ConstraintError, WrongShapeError
from .hypersurface import (
    ALGEBRAIC_TOL,
    STRUCTURE_TOL,
    StructureData,
    ambient_invariants,
    check_id_system,
    check_log_derivative_link,
    check_multiplicity_laws,
    check_quadratics,
    einstein_residual,
    principal_decomposition,
    structure_residuals,
)
from .report import ResidualReport
from .scalarfun import Constant, IntervalDomain, SmoothFn, solve_f_ode
from .spaceform import SpaceFormChart

__all__ = [
    "ThreeCurvatureSpec",
    "BuiltExample",
    "build_three_curvature_example",
    "certify_example",
    "algebraic_laws_report",
    "constant_curvature_spread",
    "SpreadResult",
    "two_curvature_lcf_check",
    "cylinder_identities",
    "CylinderReport",
    "sweep_specs",
    "run_parameter_sweep",
    "write_sweep_csv",
]

DEFAULT_WINDOW = (0.25, 2.25)  # truncation of unbounded base domains (rho <= 0)
FIBER_RADIUS_SCALE = 0.35      # desk-scale fiber chart radius before curvature scaling


@dataclass(frozen=True)
class ThreeCurvatureSpec:
    """Parameters of the classified example with three principal curvatures.

    Requires n >= 5, p_1, p_2 >= 2 with p_1 + p_2 = n - 1 and k_i > 0.
    The derived constants satisfy A_1 A_2 = B_1 B_2 (forcing ambient
    curvature c = 1) and k_i = (n-3) A_i^2/(p_j - 1) identically.
    """

    n: int
    p1: int
    p2: int
    k1: float
    k2: float
    rho: float

    def __post_init__(self):
        if self.n < 5:
            raise ConstraintError(f"n = {self.n} < 5: the construction needs p_i >= 2")
        if self.p1 < 2 or self.p2 < 2:
            raise ConstraintError(f"fiber multiplicities must be >= 2, got ({self.p1}, {self.p2})")
        if self.p1 + self.p2 != self.n - 1:
            raise ConstraintError(
                f"p_1 + p_2 = {self.p1 + self.p2} must equal n - 1 = {self.n - 1}"
            )
        if self.k1 <= 0 or self.k2 <= 0:
            raise ConstraintError("fiber curvatures k_i must be positive")

    @property
    def ps(self) -> tuple[int, int]:
        return (self.p1, self.p2)

    @property
    def ks(self) -> tuple[float, float]:
        return (self.k1, self.k2)

    def B(self, i: int) -> float:
        p, k = self.ps[i - 1], self.ks[i - 1]
        return math.sqrt((p - 1) * k / (self.n - 3))

    def A(self, i: int) -> float:
        j = 3 - i
        return math.sqrt((self.ps[j - 1] - 1) / (self.ps[i - 1] - 1)) * self.B(i)

    def lambda_coefficient(self, i: int) -> float:
        """lambda_i = coefficient / f with the sign convention lambda_1 < 0 < lambda_2."""
        j = 3 - i
        return (-1) ** i * math.sqrt((self.ps[j - 1] - 1) / (self.ps[i - 1] - 1))

    def to_json(self) -> dict:
        return {"n": self.n, "p1": self.p1, "p2": self.p2,
                "k1": self.k1, "k2": self.k2, "rho": self.rho}

    @staticmethod
    def from_json(obj: dict) -> "ThreeCurvatureSpec":
        return ThreeCurvatureSpec(
            int(obj["n"]), int(obj["p1"]), int(obj["p2"]),
            float(obj["k1"]), float(obj["k2"]), float(obj["rho"]),
        )


@dataclass(frozen=True)
class BuiltExample:
    spec: ThreeCurvatureSpec
    mwp: MWPSpec
    metric: CoordinateMetric
    data: StructureData
    rho: float
    f: SmoothFn
    phis: tuple[SmoothFn, SmoothFn]
    lambdas: tuple[SmoothFn, SmoothFn]


def build_three_curvature_example(
    spec: ThreeCurvatureSpec,
    *,
    branch: str = "increasing",
    window: tuple[float, float] = DEFAULT_WINDOW,
) -> BuiltExample:
    """Assemble metric and structure datum of the classified example.

    For rho <= 0 the unbounded base domain of f is truncated to `window`.
    The shape operator is block-diagonal 0 (+) lambda_1 Id (+) lambda_2 Id
    in the product coordinates, T = d/ds with |T| = 1, theta = 0, and the
    height function is the base coordinate itself (s = t since theta = 0).
    """
    f = solve_f_ode(spec.n, spec.rho, branch=branch)
    if not math.isfinite(f.domain.t_max - f.domain.t_min):
        lo, hi = window
        if not f.domain.contains(lo) or not f.domain.contains(hi):
            raise ConstraintError(f"window {window} not inside the f-domain")
        f = f.with_domain(IntervalDomain(lo, hi))
    base = f.domain

    phis = tuple(Constant(spec.B(i)) * f for i in (1, 2))
    lambdas = tuple(Constant(spec.lambda_coefficient(i)) / f for i in (1, 2))
    fibers = []
    for i in (1, 2):
        k = spec.ks[i - 1]
        radius = FIBER_RADIUS_SCALE / math.sqrt(max(k, 1.0))
        fibers.append(Fiber(SpaceFormChart(spec.ps[i - 1], k, radius), phis[i - 1]))
    mwp = MWPSpec(base, tuple(fibers))
    metric = build_mwp_metric(mwp)
    d = metric.dim

    lam1, lam2 = lambdas
    p1 = spec.p1

    def shape_operator(pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        s = pts[..., 0]
        out = np.zeros(pts.shape[:-1] + (d, d))
        v1 = np.asarray(lam1(s))
        v2 = np.asarray(lam2(s))
        for i in range(1, 1 + p1):
            out[..., i, i] = v1
        for i in range(1 + p1, d):
            out[..., i, i] = v2
        return out

    def tangent_part(pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[:-1] + (d,))
        out[..., 0] = 1.0
        return out

    def angle(pts: np.ndarray) -> np.ndarray:
        return np.zeros(np.asarray(pts, dtype=float).shape[:-1])

    def height(pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts, dtype=float)[..., 0]

    data = StructureData(
        metric=metric,
        shape_operator=shape_operator,
        tangent_part=tangent_part,
        angle=angle,
        height=height,
        warping=f,
        ambient_curvature=1,
    )
    return BuiltExample(spec, mwp, metric, data, spec.rho, f, phis, lambdas)


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

def algebraic_laws_report(
    built: BuiltExample,
    n_s: int = 50,
    tol: float = ALGEBRAIC_TOL,
) -> ResidualReport:
    """Closed-form laws along an s-grid, all at the algebraic tolerance.

    Covers the eigenvalue quadratics, the Einstein-constant relation
    a + |T|^2 b = -rho/(n-1), the sum/product laws, the warped identity
    system, the log-derivative link phi_i'/phi_i = f'/f, and the derived
    constant relations (p_1-1)A_1/B_1 = (p_2-1)A_2/B_2, k_i = (n-3)A_i^2/(p_j-1),
    A_1 A_2 = B_1 B_2.  The spectrum is recomputed numerically at each s.
    """
    spec = built.spec
    s_values = built.f.domain.interior_samples(n_s, shrink=0.1)
    report = ResidualReport()
    report.meta["s_grid"] = f"{n_s} points in ({built.f.domain.t_min:g}, {built.f.domain.t_max:g})"

    def point_at(s: float) -> np.ndarray:
        x = np.zeros(built.metric.dim)
        x[0] = s
        return x

    def spectrum_at_x(x: np.ndarray):
        return principal_decomposition(built.data, x)

    worst_q: dict[str, float] = {}
    worst_m: dict[str, float] = {}
    worst_three = 0.0
    for s in s_values:
        x = point_at(float(s))
        sp = spectrum_at_x(x)
        inv = ambient_invariants(built.f, 1, float(s))
        q = check_quadratics(sp, built.rho, inv.a, inv.b, 1.0, tol)
        for name, res in q.checks.items():
            worst_q[name] = max(worst_q.get(name, 0.0), res.residual)
        m = check_multiplicity_laws(sp, inv.b, 1.0, spec.n, tol)
        for name, res in m.checks.items():
            worst_m[name] = max(worst_m.get(name, 0.0), res.residual)
        worst_three = max(worst_three, abs(inv.a + inv.b + built.rho / (spec.n - 1)))
    for name, w in worst_q.items():
        report.add(name, w, tol, f"{n_s} s-points")
    for name, w in worst_m.items():
        report.add(name, w, tol, f"{n_s} s-points")
    report.add("einstein-constant", worst_three, tol, f"{n_s} s-points")

    ids = check_id_system(
        built.mwp,
        s_values,
        lambda s: spectrum_at_x(point_at(s)),
        lambda s: ambient_invariants(built.f, 1, s),
        lambda s: 1.0,
        tol,
    )
    report.merge(ids)

    pts = np.stack([point_at(float(s)) for s in s_values])
    link = check_log_derivative_link(built.data, spectrum_at_x, built.phis, pts, tol)
    report.merge(link)

    a1, a2, b1, b2 = spec.A(1), spec.A(2), spec.B(1), spec.B(2)
    report.add("constants-ratio", abs((spec.p1 - 1) * a1 / b1 - (spec.p2 - 1) * a2 / b2), tol)
    report.add(
        "constants-curvature",
        max(
            abs(spec.k1 - (spec.n - 3) * a1**2 / (spec.p2 - 1)),
            abs(spec.k2 - (spec.n - 3) * a2**2 / (spec.p1 - 1)),
        ),
        tol,
    )
    report.add("constants-product", abs(a1 * a2 - b1 * b2), tol)
    # phi_2/phi_1 constant, equal to (p_2-1)A_2/((p_1-1)A_1)
    ratio = built.phis[1](s_values) / built.phis[0](s_values)
    target = (spec.p2 - 1) * a2 / ((spec.p1 - 1) * a1)
    report.add("phi-ratio", np.abs(ratio - target).max(), max(tol, 1e-12), f"{n_s} s-points")
    return report


def nonconstancy_probes(built: BuiltExample, tol: float = 1e-3) -> ResidualReport:
    """Closed-form sectional values of the three plane classes at the waist.

    At the waist (f' = 0, present whenever rho > 0) the classes evaluate to
    rho/(n-1) (base-fiber), (n-2)rho/((n-1)(p_i-1)) (within fiber i) and 0
    (mixed); those values are asserted directly.  For any base point,
    within_i - mixed = (n-3)/((p_i-1) f^2) > 0 bounds the spread below,
    which is the executable form of non-constant sectional curvature.
    """
    spec, n = built.spec, built.spec.n
    s_star = _waist(built)
    fval = float(built.f(s_star))
    report = ResidualReport()
    report.meta["probe_point"] = s_star
    classes = [mwp_sectional_closed_form(built.mwp, s_star, "base-fiber", i) for i in (0, 1)]
    classes += [mwp_sectional_closed_form(built.mwp, s_star, "within-fiber", i) for i in (0, 1)]
    classes.append(mwp_sectional_closed_form(built.mwp, s_star, "mixed"))
    at_waist = built.rho > 0 and abs(float(built.f.derivative()(s_star))) < 1e-12
    if at_waist:
        base_expect = spec.rho / (n - 1)
        report.add("spread.base-fiber", max(abs(c - base_expect) for c in classes[:2]), tol)
        for i in (0, 1):
            expect = (n - 2) * spec.rho / ((n - 1) * (spec.ps[i] - 1))
            report.add(f"spread.within[{i + 1}]", abs(classes[2 + i] - expect), tol)
        report.add("spread.mixed", abs(classes[4]), tol)
    bound = (n - 3) / ((max(spec.ps) - 1) * fval**2)
    observed = max(classes) - min(classes)
    report.meta["spread_lower_bound"] = bound
    report.add("spread.lower-bound", max(0.0, bound - observed), tol)
    return report


def certify_example(
    built: BuiltExample,
    *,
    per_axis: int | Sequence[int] = 5,
    inset: float | Sequence[float] = 0.12,
    n_s: int = 50,
    structure_tol: float = STRUCTURE_TOL,
    algebraic_tol: float = ALGEBRAIC_TOL,
    step: float | None = None,
    richardson: bool | None = None,
    rng: np.random.Generator | None = None,
) -> ResidualReport:
    """Full certification suite; the oracle grid is shared between the
    Einstein check and the Gauss condition (F)."""
    grid = tensor_grid(built.metric.box, per_axis, inset)
    curv = curvature_grid(built.metric, grid, step, richardson=richardson)
    report = ResidualReport()
    report.meta["spec"] = built.spec.to_json()
    report.merge(
        structure_residuals(built.data, grid, tol=structure_tol, curv=curv, rng=rng),
        prefix="structure.",
    )
    report.merge(einstein_residual(built.metric, built.rho, grid, tol=structure_tol, curv=curv))
    report.merge(algebraic_laws_report(built, n_s, algebraic_tol))
    report.merge(nonconstancy_probes(built))
    return report


# ---------------------------------------------------------------------------
# curvature spread and conformal flatness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpreadResult:
    minimum: float
    maximum: float

    @property
    def spread(self) -> float:
        return self.maximum - self.minimum

    def to_json(self) -> dict:
        return {"min": self.minimum, "max": self.maximum, "spread": self.spread}


def constant_curvature_spread(
    metric: CoordinateMetric,
    grid: np.ndarray | None = None,
    planes_per_point: int = 8,
    *,
    rng: np.random.Generator | None = None,
    step: float | None = None,
    richardson: bool | None = None,
) -> SpreadResult:
    """Min/max sectional curvature over coordinate-pair and random planes."""
    rng = np.random.default_rng(0) if rng is None else rng
    if grid is None:
        grid = tensor_grid(metric.box, 3, 0.15)
    pts = np.atleast_2d(np.asarray(grid, dtype=float))
    curv = curvature_grid(metric, pts, step, richardson=richardson)
    d = metric.dim
    lo, hi = math.inf, -math.inf
    for idx in range(len(curv)):
        bundle = curv.bundle(idx)
        frame = orthonormal_frame(bundle.metric)
        planes = [(frame[:, i], frame[:, j]) for i in range(d) for j in range(i + 1, d)]
        for _ in range(planes_per_point):
            v = rng.standard_normal((2, d))
            planes.append((v[0], v[1]))
        for X, Y in planes:
            val = sectional_curvature(bundle, X, Y)
            lo, hi = min(lo, val), max(hi, val)
    return SpreadResult(lo, hi)


def two_curvature_lcf_check(
    spec: MWPSpec,
    grid: np.ndarray | None = None,
    *,
    tol: float = STRUCTURE_TOL,
    step: float | None = None,
    richardson: bool | None = None,
) -> ResidualReport:
    """Conformal flatness of a single-fiber warped product over a space form:
    sup of the pointwise Weyl norm over the grid."""
    if len(spec.fibers) != 1:
        raise WrongShapeError(f"expected exactly one fiber, got {len(spec.fibers)}")
    if spec.total_dim < 4:
        raise WrongShapeError(f"total dimension {spec.total_dim} < 4: Weyl is trivially zero")
    metric = build_mwp_metric(spec)
    if grid is None:
        grid = tensor_grid(metric.box, 4, 0.12)
    pts = np.atleast_2d(np.asarray(grid, dtype=float))
    curv = curvature_grid(metric, pts, step, richardson=richardson)
    sup = max(weyl_norm(curv.bundle(i)) for i in range(len(curv)))
    report = ResidualReport()
    report.add("weyl", sup, tol, f"{pts.shape[0]} pts")
    return report


# ---------------------------------------------------------------------------
# cylinder nonexistence chain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CylinderReport:
    """Forcing chain for a three-curvature Einstein hypersurface of a cylinder.

    With f = 1 the identities force 2c|T|^2 = (n-1)c - rho; a solution with
    T != 0 makes theta constant, contradicting lambda_n != 0, so `consistent`
    is False whenever the chain closes.  `no_solution` marks |T|^2 outside
    [0, 1].  Both expressions for lambda_1 lambda_2 are reported.
    """

    n: int
    c: int
    rho: float
    tnorm2: float | None
    theta: float | None
    consistent: bool
    no_solution: bool
    reason: str
    lambda_product_warped: float | None
    lambda_product_einstein: float | None
    product_residual: float | None

    def to_json(self) -> dict:
        return {
            "n": self.n, "c": self.c, "rho": self.rho,
            "Tnorm2": self.tnorm2, "theta": self.theta,
            "consistent": self.consistent, "no_solution": self.no_solution,
            "reason": self.reason,
            "lambda_product_warped": self.lambda_product_warped,
            "lambda_product_einstein": self.lambda_product_einstein,
            "product_residual": self.product_residual,
        }


def cylinder_identities(n: int, c: int, rho: float) -> CylinderReport:
    """Solve the cylinder forcing chain 2c|T|^2 = (n-1)c - rho and report."""
    if c not in (-1, 1):
        raise ConstraintError("cylinder chain needs c in {-1, +1} (c = 0 is flat ambient)")
    if n < 4:
        raise ConstraintError("n >= 4 required")
    tnorm2 = ((n - 1) * c - rho) / (2.0 * c)
    if tnorm2 < 0.0 or tnorm2 > 1.0:
        return CylinderReport(n, c, rho, None, None, False, True,
                              f"|T|^2 = {tnorm2:g} outside [0, 1]: no admissible datum",
                              None, None, None)
    theta = math.sqrt(max(1.0 - tnorm2, 0.0))
    prod_warped = -c * tnorm2
    prod_einstein = rho - (n - 1) * c + c * tnorm2
    residual = abs(prod_warped - prod_einstein)
    if tnorm2 == 0.0:
        reason = "|T|^2 = 0 contradicts the hypothesis T != 0"
    else:
        reason = ("chain forces |T|^2 (hence theta) constant, contradicting "
                  "lambda_n != 0 which requires theta nonconstant")
    return CylinderReport(n, c, rho, tnorm2, theta, False, False, reason,
                          prod_warped, prod_einstein, residual)


# ---------------------------------------------------------------------------
# parameter sweep
# ---------------------------------------------------------------------------

def sweep_specs(
    n_values: Sequence[int] = (5, 6, 7),
    k_values: Sequence[float] = (0.5, 1.0, 2.0),
    rho_factors: Sequence[float] = (1.0, 2.0),
) -> list[ThreeCurvatureSpec]:
    """All valid specs over n x (p-partitions) x fiber curvatures x rho = factor*(n-1)."""
    specs = []
    for n in n_values:
        for p1 in range(2, n - 2):
            p2 = n - 1 - p1
            if p2 < 2:
                continue
            for k1 in k_values:
                for k2 in k_values:
                    for fac in rho_factors:
                        specs.append(ThreeCurvatureSpec(n, p1, p2, k1, k2, fac * (n - 1)))
    return specs


def _certify_one(spec: ThreeCurvatureSpec, per_axis, inset, n_s, seed) -> ResidualReport:
    built = build_three_curvature_example(spec)
    counts = [per_axis] * built.metric.dim if np.isscalar(per_axis) else per_axis
    return certify_example(
        built, per_axis=counts, inset=inset, n_s=n_s, rng=np.random.default_rng(seed)
    )


def _waist(built: BuiltExample) -> float:
    """Base point with f' = 0 if inside the domain, else the midpoint."""
    dom = built.f.domain
    if built.rho > 0:
        w = math.sqrt(built.rho / (built.spec.n - 1))
        s = math.pi / (2.0 * w)
        if dom.contains(s):
            return s
    return 0.5 * (dom.t_min + dom.t_max)


def run_parameter_sweep(
    specs: Sequence[ThreeCurvatureSpec] | None = None,
    *,
    per_axis_base: int = 5,
    per_axis_fiber: int = 3,
    inset: float = 0.12,
    n_s: int = 50,
    seed: int = 0,
    n_jobs: int = 1,
) -> list[tuple[ThreeCurvatureSpec, ResidualReport]]:
    """Certify every spec; fiber axes get `per_axis_fiber` grid points
    (full 5-per-axis grids at n = 7 cost ~2 min per spec, far beyond the
    sweep budget; the base axis keeps `per_axis_base`)."""
    if specs is None:
        specs = sweep_specs()

    def axes_for(spec: ThreeCurvatureSpec) -> list[int]:
        return [per_axis_base] + [per_axis_fiber] * (spec.n - 1)

    if n_jobs != 1:
        from joblib import Parallel, delayed

        reports = Parallel(n_jobs=n_jobs)(
            delayed(_certify_one)(spec, axes_for(spec), inset, n_s, seed) for spec in specs
        )
    else:
        reports = [_certify_one(spec, axes_for(spec), inset, n_s, seed) for spec in specs]
    return list(zip(specs, reports))


def write_sweep_csv(results, path) -> None:
    """Flat CSV: spec columns + one residual column per check name."""
    names: list[str] = []
    for _, report in results:
        for name in report.checks:
            if name not in names:
                names.append(name)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "p1", "p2", "k1", "k2", "rho", "all_pass"] + names)
        for spec, report in results:
            row = [spec.n, spec.p1, spec.p2, spec.k1, spec.k2, spec.rho,
                   int(report.all_pass())]
            for name in names:
                res = report.checks.get(name)
                row.append(f"{res.residual:.3e}" if res is not None else "")
            writer.writerow(row)
