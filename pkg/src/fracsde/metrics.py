"""Path-space loss, its subgradient, and coefficient-recovery metrics.

The training loss of one trajectory is a discrete fractional Sobolev norm of
the difference path f between simulated and observed states:

    max_m [ ||f(t_m)|| + sum_{k<m} ||f(t_m) - f(t_k)|| / ((m-k) step)^{alpha+1} * step ]

It is a max of convex terms; the subgradient used for training picks the
smallest maximizing m and treats ||.|| at zero as having gradient zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import CoefficientField
from .noise import FbmPath
from .seeding import derive_rng

__all__ = [
    "PathDiff",
    "RecoveryReport",
    "default_alpha",
    "frac_path_norm",
    "frac_norm_subgradient",
    "batch_loss",
    "uniform_eval_points",
    "recovery_metrics",
    "holder_diff_seminorm",
]

_BLOCK_ROWS = 256


def default_alpha(hurst: float) -> float:
    """Midpoint of the admissible exponent interval (1 - H, 1/2)."""
    if not 0.5 < hurst < 1.0:
        raise ValueError(f"hurst must lie in (1/2, 1), got {hurst}")
    return 0.5 * ((1.0 - hurst) + 0.5)


@dataclass(frozen=True)
class PathDiff:
    """Difference path on a uniform grid with the norm exponent alpha.

    When the diff comes from a model run, alpha must lie in (1 - hurst, 1/2);
    pass ``hurst`` to have that checked.
    """

    values: np.ndarray
    step: float
    alpha: float
    hurst: float | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1:
            raise ValueError("values must have shape (M+1, d)")
        if not np.all(np.isfinite(values)):
            raise ValueError("values contain non-finite entries")
        if not self.step > 0.0:
            raise ValueError(f"step must be positive, got {self.step}")
        if not 0.0 < self.alpha < 0.5:
            raise ValueError(f"alpha must lie in (0, 1/2), got {self.alpha}")
        if self.hurst is not None and not self.alpha > 1.0 - self.hurst:
            raise ValueError(
                f"alpha={self.alpha} must exceed 1 - hurst = {1.0 - self.hurst}"
            )
        object.__setattr__(self, "values", values)


def _lag_weights(n_points: int, step: float, alpha: float) -> np.ndarray:
    w = np.zeros(n_points)
    lags = np.arange(1, n_points, dtype=float)
    w[1:] = step / (lags * step) ** (alpha + 1.0)
    return w


def _norm_profile(diff: PathDiff) -> np.ndarray:
    """g[m] = ||f_m|| + sum_{k<m} ||f_m - f_k|| w_{m-k}; the norm is max g."""
    f = diff.values
    n_points = f.shape[0]
    w = _lag_weights(n_points, diff.step, diff.alpha)
    g = np.sqrt((f**2).sum(axis=1))
    cols = np.arange(n_points)
    for r0 in range(1, n_points, _BLOCK_ROWS):
        r1 = min(r0 + _BLOCK_ROWS, n_points)
        rows = np.arange(r0, r1)
        if f.shape[1] == 1:
            dist = np.abs(f[rows, 0][:, None] - f[None, :, 0])
        else:
            dist = np.sqrt(((f[rows, None, :] - f[None, :, :]) ** 2).sum(axis=2))
        lag = rows[:, None] - cols[None, :]
        wmat = np.where(lag > 0, w[np.clip(lag, 0, n_points - 1)], 0.0)
        g[rows] += (dist * wmat).sum(axis=1)
    return g


def frac_path_norm(diff: PathDiff) -> float:
    """Discrete fractional Sobolev norm of the difference path."""
    return float(_norm_profile(diff).max())


def frac_norm_subgradient(diff: PathDiff) -> np.ndarray:
    """Subgradient of frac_path_norm w.r.t. the path values, shape (M+1, d).

    The smallest maximizing index is selected on ties; unit vectors of
    zero-norm differences are taken as zero.
    """
    f = diff.values
    n_points = f.shape[0]
    g = _norm_profile(diff)
    m_star = int(np.argmax(g))
    grad = np.zeros_like(f)
    fm = f[m_star]
    norm_fm = np.sqrt((fm**2).sum())
    if norm_fm > 0.0:
        grad[m_star] += fm / norm_fm
    if m_star > 0:
        w = _lag_weights(n_points, diff.step, diff.alpha)
        delta = fm[None, :] - f[:m_star]
        dist = np.sqrt((delta**2).sum(axis=1))
        unit = np.zeros_like(delta)
        nz = dist > 0.0
        unit[nz] = delta[nz] / dist[nz, None]
        weights = w[m_star - np.arange(m_star)]
        contrib = unit * weights[:, None]
        grad[m_star] += contrib.sum(axis=0)
        grad[:m_star] -= contrib
    return grad


def batch_loss(diffs) -> float:
    """Mean fractional norm over a batch of difference paths."""
    diffs = list(diffs)
    if not diffs:
        raise ValueError("batch_loss needs at least one difference path")
    return float(np.mean([frac_path_norm(d) for d in diffs]))


def uniform_eval_points(
    horizon: float, box: float, dimension: int, n_points: int = 4096, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded uniform sample of (t, x) on [0, horizon] x [-box, box]^d."""
    if not horizon > 0.0 or not box > 0.0:
        raise ValueError("horizon and box must be positive")
    rng = derive_rng(seed, "eval-points")
    times = rng.uniform(0.0, horizon, size=n_points)
    states = rng.uniform(-box, box, size=(n_points, dimension))
    return times, states


@dataclass(frozen=True)
class RecoveryReport:
    """Root-mean-square coefficient errors over a set of evaluation points."""

    l2_drift: float
    l2_diffusion: float
    rel_drift: float
    rel_diffusion: float
    n_points: int
    n_excluded_drift: int
    n_excluded_diffusion: int

    def to_dict(self) -> dict:
        return {
            "l2_drift": self.l2_drift,
            "l2_diffusion": self.l2_diffusion,
            "rel_drift": self.rel_drift,
            "rel_diffusion": self.rel_diffusion,
            "n_points": self.n_points,
            "n_excluded_drift": self.n_excluded_drift,
            "n_excluded_diffusion": self.n_excluded_diffusion,
        }


def _eval_field(field: CoefficientField, times: np.ndarray, states: np.ndarray):
    drift = np.empty_like(states)
    diffusion = np.empty_like(states)
    for i in range(states.shape[0]):
        drift[i] = field.drift(float(times[i]), states[i])
        diffusion[i] = field.diffusion(float(times[i]), states[i])
    return drift, diffusion


def _rms_pair(est: np.ndarray, true: np.ndarray) -> tuple[float, float, int]:
    err = np.sqrt(((est - true) ** 2).sum(axis=1))
    scale = np.sqrt((true**2).sum(axis=1))
    l2 = float(np.sqrt(np.mean(err**2)))
    keep = scale > 0.0
    n_excluded = int((~keep).sum())
    if keep.sum() == 0:
        raise ValueError("all evaluation points have zero true norm")
    rel = float(np.sqrt(np.mean((err[keep] / scale[keep]) ** 2)))
    return l2, rel, n_excluded


def recovery_metrics(
    estimated: CoefficientField,
    true: CoefficientField,
    times: np.ndarray,
    states: np.ndarray,
) -> RecoveryReport:
    """RMS and relative-RMS errors of drift and diffusion at given points.

    Points where the true drift (resp. diffusion) has zero norm are excluded
    from the relative metric and counted in the report.
    """
    if estimated.dimension != true.dimension:
        raise ValueError("fields must share the dimension")
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or states.shape[1] != true.dimension:
        raise ValueError(f"states must have shape (n, {true.dimension})")
    if times.shape != (states.shape[0],):
        raise ValueError("times must have one entry per state")
    b_est, s_est = _eval_field(estimated, times, states)
    b_true, s_true = _eval_field(true, times, states)
    l2_b, rel_b, exc_b = _rms_pair(b_est, b_true)
    l2_s, rel_s, exc_s = _rms_pair(s_est, s_true)
    return RecoveryReport(
        l2_drift=l2_b,
        l2_diffusion=l2_s,
        rel_drift=rel_b,
        rel_diffusion=rel_s,
        n_points=states.shape[0],
        n_excluded_drift=exc_b,
        n_excluded_diffusion=exc_s,
    )


def holder_diff_seminorm(path_a: FbmPath, path_b: FbmPath, alpha: float) -> float:
    """Discrete two-parameter Hoelder-type seminorm of g = path_a - path_b.

    sup over grid pairs s < t of |g(t)-g(s)| / (t-s)^{1-alpha}
    + sum_{s<r<t} |g(t)-g(r)| / (t-r)^{2-alpha} * dt.
    """
    if path_a.dt != path_b.dt or path_a.values.size != path_b.values.size:
        raise ValueError("paths must share the same grid")
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2), got {alpha}")
    g = path_a.values - path_b.values
    dt = path_a.dt
    n_points = g.size
    best = 0.0
    lags = np.arange(1, n_points, dtype=float)
    pow1 = (lags * dt) ** (alpha - 1.0)
    pow2 = (lags * dt) ** (alpha - 2.0) * dt
    for t_idx in range(1, n_points):
        jump = np.abs(g[t_idx] - g[:t_idx])
        lag = t_idx - np.arange(t_idx)
        first = jump * pow1[lag - 1]
        inner_terms = jump * pow2[lag - 1]
        cum = np.concatenate([[0.0], np.cumsum(inner_terms)])
        # sum over r in (s, t): total over r < t minus total over r <= s
        inner = cum[t_idx] - cum[np.arange(t_idx) + 1]
        best = max(best, float((first + inner).max()))
    return best
