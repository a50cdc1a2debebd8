"""Acceptance criteria, one test per criterion, at the stated tolerances.

Each test prints a single pass/fail line (visible with pytest -s); the
test name itself carries the criterion number for the -v output.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from einwarp import (
    CoordinateMetric,
    SpaceFormChart,
    build_mwp_metric,
    constant_curvature_spread,
    curvature_grid,
    cylinder_identities,
    einstein_residual,
    frame_involutivity_residual,
    involutivity_residual,
    mwp_sectional_closed_form,
    principal_decomposition,
    run_parameter_sweep,
    sectional_curvature,
    structure_residuals,
    sweep_specs,
    tensor_grid,
    two_curvature_lcf_check,
    weyl_norm,
)
from einwarp import Fiber, IntervalDomain, MWPSpec, ambient_invariants, const, sin, variable
from einwarp.spaceform import chart_evaluator

from conftest import random_mwp_spec

T = variable()
WAIST = np.array([math.pi / 2, 0.05, -0.04, 0.06, 0.02])


def report_line(ok: bool, text: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {text}")
    assert ok, text


def chart_metric(chart, shrink=0.55):
    half = shrink * chart.radius / math.sqrt(chart.dim)
    return CoordinateMetric(
        chart.dim, tuple((-half, half) for _ in range(chart.dim)), chart_evaluator(chart)
    )


def test_criterion_01_space_form_oracle():
    """c in {-1,0,1}, dim 4, 100 random (point, plane) pairs: |sec - c| < 1e-6."""
    t0 = time.time()
    rng = np.random.default_rng(101)
    worst = 0.0
    for c in (-1.0, 0.0, 1.0):
        metric = chart_metric(SpaceFormChart(4, c))
        half = metric.box[0][1]
        pts = rng.uniform(-0.9 * half, 0.9 * half, size=(100, 4))
        curv = curvature_grid(metric, pts)
        for i in range(100):
            X, Y = rng.standard_normal((2, 4))
            worst = max(worst, abs(sectional_curvature(curv.bundle(i), X, Y) - c))
    elapsed = time.time() - t0
    report_line(
        worst < 1e-6 and elapsed < 10.0,
        f"criterion 1 space-form oracle: max |sec - c| = {worst:.2e} "
        f"(tol 1e-6), {elapsed:.1f}s (< 10s)",
    )


def test_criterion_02_closed_form_vs_oracle():
    """20 random two-fiber products, all three plane classes: agreement < 1e-5."""
    t0 = time.time()
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(20):
        spec = random_mwp_spec(rng)
        metric = build_mwp_metric(spec)
        sl1, sl2 = spec.fiber_slices()
        for s in rng.uniform(0.4, 1.2, size=2):
            x = np.zeros(metric.dim)
            x[0] = s
            x[sl1] = rng.uniform(-0.04, 0.04, spec.fibers[0].dim)
            x[sl2] = rng.uniform(-0.04, 0.04, spec.fibers[1].dim)
            bundle = None
            eye = np.eye(metric.dim)
            cases = [
                ("base-fiber", 0, eye[0], eye[sl1.start]),
                ("within-fiber", 0, eye[sl1.start], eye[sl1.start + 1]),
                ("mixed", 0, eye[sl1.start], eye[sl2.start]),
            ]
            from einwarp import curvature_oracle

            bundle = curvature_oracle(metric, x)
            for plane_class, fiber, X, Y in cases:
                closed = mwp_sectional_closed_form(spec, float(s), plane_class, fiber)
                worst = max(worst, abs(sectional_curvature(bundle, X, Y) - closed))
    elapsed = time.time() - t0
    report_line(
        worst < 1e-5 and elapsed < 60.0,
        f"criterion 2 closed form vs oracle: max disagreement = {worst:.2e} "
        f"(tol 1e-5), {elapsed:.1f}s (< 60s)",
    )


def test_criterion_03_reference_einstein(reference_certification):
    """sup |Ric - 4g| < 1e-6 on the 5-points-per-axis grid away from s in {0, pi}."""
    res = reference_certification.checks["einstein"]
    report_line(
        res.passed and res.tolerance == 1e-6,
        f"criterion 3 reference Einstein: sup |Ric - 4g| = {res.residual:.2e} (tol 1e-6)",
    )


def test_criterion_04_structure_suite(reference, reference_certification):
    """All six structure residuals (A)-(F) < 1e-6; theta = 0, lambda_n = 0,
    a = -1 - 1/(3 f^2), b = 1/(3 f^2) hold for the reference datum."""
    worst = max(
        reference_certification.checks[f"structure.{name}"].residual for name in "ABCDEF"
    )
    grid = tensor_grid(reference.metric.box, 3, 0.15)
    theta_max = np.abs(reference.data.angle(grid)).max()
    lam_n = principal_decomposition(reference.data, WAIST).values[1]
    ts = np.linspace(0.4, math.pi - 0.4, 20)
    inv = ambient_invariants(reference.f, 1, ts)
    fsq = np.asarray(reference.f(ts)) ** 2
    ab_defect = max(
        np.abs(inv.a + 1.0 + 1.0 / (3.0 * fsq)).max(),
        np.abs(inv.b - 1.0 / (3.0 * fsq)).max(),
    )
    ok = worst < 1e-6 and theta_max == 0.0 and abs(lam_n) < 1e-12 and ab_defect < 1e-12
    report_line(
        ok,
        f"criterion 4 structure suite: max residual (A)-(F) = {worst:.2e} (tol 1e-6), "
        f"theta = 0, lambda_n = {lam_n:.1e}, a/b closed-form defect = {ab_defect:.1e}",
    )


def test_criterion_05_nonconstant_curvature(reference):
    """Plane classes at s = pi/2 give {0, 1, 3} within 1e-3; spread >= 2.9."""
    s = math.pi / 2
    vals = {
        "base-fiber": mwp_sectional_closed_form(reference.mwp, s, "base-fiber", 0),
        "within-fiber": mwp_sectional_closed_form(reference.mwp, s, "within-fiber", 0),
        "mixed": mwp_sectional_closed_form(reference.mwp, s, "mixed"),
    }
    class_defect = max(
        abs(vals["base-fiber"] - 1.0), abs(vals["within-fiber"] - 3.0), abs(vals["mixed"])
    )
    x = np.zeros((1, 5))
    x[0, 0] = s
    spread = constant_curvature_spread(reference.metric, x, planes_per_point=8).spread
    report_line(
        class_defect < 1e-3 and spread >= 2.9,
        f"criterion 5 non-constant curvature: classes {{{vals['mixed']:.4f}, "
        f"{vals['base-fiber']:.4f}, {vals['within-fiber']:.4f}}} (expect {{0, 1, 3}}), "
        f"spread = {spread:.3f} (>= 2.9)",
    )


ALGEBRAIC_CHECKS = [
    "quadratic[1]", "quadratic[2]", "quadratic[T]", "einstein-constant",
    "sum-law", "product-law", "square-law",
    "warp-accel[1]", "warp-accel[2]", "warp-energy[1]", "warp-energy[2]", "warp-cross",
    "log-link[1]", "log-link[2]",
    "constants-ratio", "constants-curvature", "constants-product",
]


def test_criterion_06_algebraic_laws(reference_certification):
    """The quadratic/multiplicity/identity/constant laws < 1e-9 on a 50-point s-grid."""
    worst_name, worst = "", 0.0
    for name in ALGEBRAIC_CHECKS:
        res = reference_certification.checks[name]
        if res.residual > worst:
            worst_name, worst = name, res.residual
        assert res.tolerance <= 1e-9
    report_line(
        worst < 1e-9,
        f"criterion 6 algebraic laws on 50-point s-grid: worst residual "
        f"{worst:.2e} ({worst_name}, tol 1e-9)",
    )


@pytest.mark.slow
def test_criterion_07_parameter_sweep():
    """Certification passes for every spec in n x partitions x k_i x rho; < 10 min."""
    t0 = time.time()
    specs = sweep_specs(n_values=(5, 6, 7), k_values=(0.5, 1.0, 2.0), rho_factors=(1.0, 2.0))
    assert len(specs) == 108
    results = run_parameter_sweep(specs, n_jobs=2)
    elapsed = time.time() - t0
    failures = [
        (spec.to_json(), report.failing()) for spec, report in results if not report.all_pass()
    ]
    report_line(
        not failures and elapsed < 600.0,
        f"criterion 7 parameter sweep: {len(specs)} specs certified, "
        f"{elapsed:.0f}s (< 600s), failures: {failures}",
    )


def test_criterion_08_conformal_flatness():
    """Two single-fiber warped products over space forms, dim >= 4: sup Weyl < 1e-6."""
    spec_a = MWPSpec(IntervalDomain(0.2, 2.9), (Fiber(SpaceFormChart(3, 1.0), sin(T)),))
    spec_b = MWPSpec(
        IntervalDomain(0.0, 2.0),
        (Fiber(SpaceFormChart(4, 0.0), const(1.0) + const(0.25) * T**2),),
    )
    sups = [
        two_curvature_lcf_check(spec).checks["weyl"].residual for spec in (spec_a, spec_b)
    ]
    report_line(
        max(sups) < 1e-6,
        f"criterion 8 conformal flatness: sup Weyl = {sups[0]:.2e} (sin/S^3), "
        f"{sups[1]:.2e} (poly/R^4), tol 1e-6",
    )


def test_criterion_09_involutivity(reference):
    """Bracket residuals of the principal distributions < 1e-5; a deliberately
    non-integrable control exceeds 1e-2."""
    res = max(involutivity_residual(reference.data, c, WAIST) for c in (1, 2))

    flat = CoordinateMetric(
        3, ((-1, 1),) * 3,
        lambda p: np.broadcast_to(np.eye(3), np.asarray(p).shape[:-1] + (3, 3)).copy(),
    )

    def contact_a(pts):
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape)
        out[..., 0] = 1.0
        out[..., 2] = pts[..., 1]
        return out

    def contact_b(pts):
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape)
        out[..., 1] = 1.0
        return out

    control = frame_involutivity_residual([contact_a, contact_b], flat, np.r_[0.1, 0.3, -0.2])
    report_line(
        res < 1e-5 and control > 1e-2,
        f"criterion 9 involutivity: principal-cluster residual {res:.2e} (< 1e-5), "
        f"contact control {control:.2e} (> 1e-2)",
    )


def test_criterion_10_cylinder_chain():
    """(n=5, c=1, rho=2): |T|^2 = 1, theta = 0, inconsistent; rho = 6: no solution."""
    r2 = cylinder_identities(5, 1, 2.0)
    r6 = cylinder_identities(5, 1, 6.0)
    ok = (
        r2.tnorm2 == pytest.approx(1.0)
        and r2.theta == pytest.approx(0.0)
        and r2.consistent is False
        and r2.no_solution is False
        and r6.no_solution is True
    )
    report_line(
        ok,
        f"criterion 10 cylinder chain: rho=2 -> |T|^2={r2.tnorm2}, theta={r2.theta}, "
        f"consistent={r2.consistent}; rho=6 -> no_solution={r6.no_solution}",
    )


def test_criterion_11_failure_detection(reference):
    """A + 0.1 Id flips the Gauss flag; rho + 1 flips the Einstein flag."""
    grid = tensor_grid(reference.metric.box, 3, 0.15)
    shape0 = reference.data.shape_operator
    bad = replace(reference.data, shape_operator=lambda p: shape0(p) + 0.1 * np.eye(5))
    f_check = structure_residuals(bad, grid).checks["F"]
    e_check = einstein_residual(reference.metric, 5.0, grid).checks["einstein"]
    report_line(
        (not f_check.passed) and f_check.residual > 1e-2 and not e_check.passed,
        f"criterion 11 failure detection: perturbed A -> (F) residual "
        f"{f_check.residual:.2e} (flag flipped), rho+1 -> Einstein residual "
        f"{e_check.residual:.2e} (flag flipped)",
    )
