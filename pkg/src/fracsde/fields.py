"""Drift/diffusion coefficient fields and the two benchmark systems."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["CoefficientField", "benchmark_1d", "benchmark_2d", "constant_field"]


@dataclass(frozen=True)
class CoefficientField:
    """Time-dependent drift and diagonal diffusion on R^d.

    Both maps take (t, x) with scalar t and x of shape (d,) or (batch, d)
    and return an array of the same shape as x.  Diffusion returns the
    diagonal entries, which are expected to be positive on the evaluation
    domain (checked by tests on the benchmarks, not enforceable pointwise).
    """

    dimension: int
    drift: Callable[[float, np.ndarray], np.ndarray]
    diffusion: Callable[[float, np.ndarray], np.ndarray]

    def __post_init__(self):
        if self.dimension < 1 or self.dimension != int(self.dimension):
            raise ValueError(f"dimension must be a positive integer, got {self.dimension}")


def benchmark_1d() -> CoefficientField:
    """Mean-reverting scalar system with bounded nonlinearities.

    b(t, x) = -x + 0.25 tanh(x); sigma(t, x) = 0.5 + 0.2 tanh(x), so the
    diffusion stays inside [0.3, 0.7].
    """

    def drift(t, x):
        x = np.asarray(x, dtype=float)
        return -x + 0.25 * np.tanh(x)

    def diffusion(t, x):
        x = np.asarray(x, dtype=float)
        return 0.5 + 0.2 * np.tanh(x)

    return CoefficientField(dimension=1, drift=drift, diffusion=diffusion)


def benchmark_2d() -> CoefficientField:
    """Linear mean reversion with a periodic forcing and coupled diffusion.

    b(t, x) = diag(-0.8, -0.4) x + (0.25 sin(2 pi t), 0.2 cos(2 pi t));
    sigma_i(t, x) = 0.6 + 0.15 tanh(x_i), inside [0.45, 0.75].
    """
    rates = np.array([-0.8, -0.4])

    def drift(t, x):
        x = np.asarray(x, dtype=float)
        force = np.array([0.25 * np.sin(2.0 * np.pi * t), 0.2 * np.cos(2.0 * np.pi * t)])
        return rates * x + force

    def diffusion(t, x):
        x = np.asarray(x, dtype=float)
        return 0.6 + 0.15 * np.tanh(x)

    return CoefficientField(dimension=2, drift=drift, diffusion=diffusion)


def constant_field(dimension: int, drift_value: float, diffusion_value: float) -> CoefficientField:
    """Constant coefficients, handy for closed-form rollout checks."""

    def drift(t, x):
        return np.full_like(np.asarray(x, dtype=float), drift_value)

    def diffusion(t, x):
        return np.full_like(np.asarray(x, dtype=float), diffusion_value)

    return CoefficientField(dimension=dimension, drift=drift, diffusion=diffusion)
