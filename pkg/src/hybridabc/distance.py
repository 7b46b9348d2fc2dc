"""Distances between observed and simulated data.

Two alternatives share one interface: the auxiliary distance compares
summary-statistic vectors (optionally standardized component-wise), and the
naive distance compares mean observable trajectories directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lgdbn import SummaryStatistics
from .model import Dataset

AUXILIARY = "auxiliary-summary"
NAIVE = "naive-trajectory"

#: Supported naive-distance variants. Only mean-curve matching is implemented;
#: the registry exists so alternatives stay a config value away.
NAIVE_VARIANTS = ("mean-curve",)


@dataclass(frozen=True, eq=False)
class DistanceSpec:
    """Which distance to use and, for the auxiliary one, component scales."""

    kind: str
    scales: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (AUXILIARY, NAIVE):
            raise ValueError(f"unknown distance kind {self.kind!r}")
        if self.scales is not None:
            scales = np.asarray(self.scales, dtype=float)
            if scales.ndim != 1 or (scales <= 0).any():
                raise ValueError("scales must be a 1-D strictly positive vector")
            object.__setattr__(self, "scales", scales)


def standardization_scales(summary: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """Component scales from an observed summary: absolute values, floored.

    The floor keeps near-zero components from dominating the standardized
    distance.
    """
    return np.maximum(np.abs(np.asarray(summary, dtype=float)), floor)


def auxiliary_distance(
    observed: SummaryStatistics,
    simulated: SummaryStatistics,
    spec: DistanceSpec | None = None,
) -> float:
    """Euclidean distance between summary vectors, scaled if requested."""
    if observed.layout != simulated.layout:
        raise ValueError(
            f"summary layouts differ: {observed.layout} vs {simulated.layout}"
        )
    diff = observed.values - simulated.values
    if spec is not None and spec.scales is not None:
        if spec.scales.shape != diff.shape:
            raise ValueError("scale vector length does not match the summary")
        diff = diff / spec.scales
    return float(np.sqrt(np.dot(diff, diff)))


def mean_curve(data: Dataset) -> np.ndarray:
    """Average observable trajectory, shape (H + 1, d_x)."""
    return data.states.mean(axis=0)


def naive_distance(
    observed: Dataset, simulated: Dataset, variant: str = "mean-curve"
) -> float:
    """Trajectory-level distance; ``mean-curve`` compares averaged curves."""
    if variant not in NAIVE_VARIANTS:
        raise ValueError(
            f"unknown naive variant {variant!r}; have {list(NAIVE_VARIANTS)}"
        )
    if (
        observed.horizon != simulated.horizon
        or observed.state_dim != simulated.state_dim
    ):
        raise ValueError("datasets must share horizon and state dimension")
    diff = (mean_curve(observed) - mean_curve(simulated)).ravel()
    return float(np.sqrt(np.dot(diff, diff)))
