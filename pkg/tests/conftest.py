"""Shared fixtures and generators for the test suite."""

import numpy as np
import pytest

from einwarp import (
    ThreeCurvatureSpec,
    Fiber,
    IntervalDomain,
    MWPSpec,
    SpaceFormChart,
    build_three_curvature_example,
    certify_example,
    const,
    cos,
    sin,
    variable,
)

REFERENCE_SPEC = ThreeCurvatureSpec(n=5, p1=2, p2=2, k1=1.0, k2=1.0, rho=4.0)


def random_mwp_spec(rng: np.random.Generator) -> MWPSpec:
    """Random two-fiber multiply warped product with positive warpings.

    Warpings alternate between low-degree polynomials and sinusoidal
    profiles c0 + c1 sin(w s) + c2 cos(w s) with c0 > |c1| + |c2|.
    """
    t = variable()
    base = IntervalDomain(0.2, 1.4)

    def poly():
        c0 = rng.uniform(0.6, 1.5)
        c1, c2 = rng.uniform(0.0, 0.4, 2)
        return const(c0) + const(c1) * t + const(c2) * t**2

    def sinusoid():
        w = rng.uniform(0.5, 2.0)
        c1, c2 = rng.uniform(-0.3, 0.3, 2)
        c0 = abs(c1) + abs(c2) + rng.uniform(0.4, 1.0)
        return const(c0) + const(c1) * sin(const(w) * t) + const(c2) * cos(const(w) * t)

    fibers = []
    for make in rng.permutation([poly, sinusoid]):
        dim = int(rng.integers(2, 4))
        k = float(rng.choice([-1.0, -0.5, 0.5, 1.0, 2.0]))
        fibers.append(Fiber(SpaceFormChart(dim, k), make()))
    return MWPSpec(base, tuple(fibers))


@pytest.fixture(scope="session")
def reference():
    """The certified n=5 example: f = sqrt(2/3) sin t, phi_i = sin(s)/sqrt(3)."""
    return build_three_curvature_example(REFERENCE_SPEC)


@pytest.fixture(scope="session")
def reference_certification(reference):
    """Full certification report on the default 5-points-per-axis grid."""
    return certify_example(reference, rng=np.random.default_rng(0))
