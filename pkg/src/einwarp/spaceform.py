"""Conformal coordinate charts for constant-curvature spaces.

A space of constant sectional curvature k is presented on a coordinate
ball by the conformally flat metric

    g_ij(x) = 4 / (1 + k |x|^2)^2 * delta_ij       (k != 0)
    g_ij(x) = delta_ij                             (k = 0)

(stereographic chart for k > 0, Poincare ball for k < 0).  One chart per
space is enough here: all statements being verified are local.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintError, DomainError

__all__ = [
    "SpaceFormChart",
    "space_form_metric",
    "chart_evaluator",
    "conformal_factor",
    "default_chart_radius",
]


def default_chart_radius(curvature: float) -> float:
    """Desk-scale chart radius; stays well inside the Poincare ball for k < 0."""
    if curvature < 0:
        return 0.6 / math.sqrt(-curvature)
    if curvature > 0:
        return 0.9 / math.sqrt(curvature)
    return 0.9


@dataclass(frozen=True)
class SpaceFormChart:
    """Coordinate ball of radius `radius` carrying curvature-k conformal metric."""

    dim: int
    curvature: float
    radius: float = field(default=0.0)

    def __post_init__(self):
        if self.dim < 1:
            raise ConstraintError(f"chart dimension must be >= 1, got {self.dim}")
        if self.radius == 0.0:
            object.__setattr__(self, "radius", default_chart_radius(self.curvature))
        if self.curvature < 0 and self.radius >= 1.0 / math.sqrt(-self.curvature):
            raise ConstraintError(
                f"radius {self.radius} reaches the Poincare boundary "
                f"1/sqrt(-k) = {1.0 / math.sqrt(-self.curvature):.4f}"
            )
        if self.radius <= 0:
            raise ConstraintError("chart radius must be positive")

    def contains(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.sum(x * x, axis=-1) < self.radius**2

    def to_json(self) -> dict:
        return {"dim": self.dim, "curvature": self.curvature, "radius": self.radius}

    @staticmethod
    def from_json(obj: dict) -> "SpaceFormChart":
        return SpaceFormChart(
            int(obj["dim"]), float(obj["curvature"]), float(obj.get("radius", 0.0))
        )


def conformal_factor(curvature: float, x: np.ndarray) -> np.ndarray:
    """4/(1 + k|x|^2)^2 for k != 0, 1 for k = 0.  x has shape (..., dim)."""
    if curvature == 0.0:
        return np.ones(x.shape[:-1])
    r2 = np.sum(x * x, axis=-1)
    denom = 1.0 + curvature * r2
    if np.any(denom <= 0):
        raise DomainError("point outside chart: 1 + k|x|^2 <= 0")
    return 4.0 / denom**2


def space_form_metric(chart: SpaceFormChart, x) -> np.ndarray:
    """Metric matrix (or batch of matrices) of the chart at coordinate point(s) x."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[-1] != chart.dim:
        raise ConstraintError(f"point has {pts.shape[-1]} coordinates, chart has dim {chart.dim}")
    if not np.all(chart.contains(pts)):
        raise DomainError(f"point outside chart ball of radius {chart.radius}")
    lam = conformal_factor(chart.curvature, pts)
    out = lam[..., None, None] * np.eye(chart.dim)
    return out[0] if squeeze else out.reshape(x.shape[:-1] + (chart.dim, chart.dim))


def chart_evaluator(chart: SpaceFormChart):
    """Batched metric evaluator for use inside CoordinateMetric (no ball check)."""

    def evaluate(pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        lam = conformal_factor(chart.curvature, pts)
        return lam[..., None, None] * np.eye(chart.dim)

    return evaluate
