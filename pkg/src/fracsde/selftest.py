"""Built-in verification suites: covariance oracles and gradient checks.

Each suite compares an implementation against an independent reference
(closed-form covariances, Cholesky sampling, central finite differences,
a hand-derived estimator value) at a scale that finishes in seconds.  The
CLI selftest subcommand runs all of them; the test suite reuses the same
helpers at larger scales.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .hurst import estimate_hurst
from .metrics import PathDiff, frac_norm_subgradient, frac_path_norm
from .net import NetParams, init_params
from .noise import (
    MvnCoupledSampler,
    cholesky_paths,
    covariance_zscores,
    cross_increment_variance,
    davies_harte_increments,
)
from .sde import _net_rollout_batch, _rollout_vjp_batch
from .seeding import derive_rng, derive_seed

__all__ = ["SuiteResult", "endtoend_gradient_gap", "run_selftest"]

_PARAM_FIELDS = ("w1", "b1", "w2", "b2")


@dataclass(frozen=True)
class SuiteResult:
    name: str
    ok: bool
    detail: str


def _perturbed(params: NetParams, field: str, index: int, eps: float) -> NetParams:
    arr = getattr(params, field).copy()
    arr.flat[index] += eps
    return replace(params, **{field: arr})


def endtoend_gradient_gap(
    seed: int,
    width: int = 8,
    dim: int = 1,
    n_steps: int = 12,
    stride: int = 4,
    alpha: float = 0.3,
) -> float:
    """Worst relative gap between analytic and finite-difference gradients.

    One random configuration: random networks, initial state, driving
    increments, and a random coarse target path.  The scalar loss is the
    fractional norm of (rollout downsampled by ``stride``) minus the target.
    Analytic gradients chain the norm subgradient through the unrolled
    recursion into both networks; the reference is a central difference per
    parameter with the gap measured relative to max(|analytic|, |fd|, 1e-6).
    """
    rng = derive_rng(seed, "gradcheck")
    drift = init_params(width, dim + 1, dim, derive_seed(seed, "gradcheck-drift"))
    diffusion = init_params(width, dim + 1, dim, derive_seed(seed, "gradcheck-diffusion"))
    x0 = rng.standard_normal(dim)
    dt = 1.0 / n_steps
    increments = rng.standard_normal((n_steps, dim)) * dt**0.7
    target = rng.standard_normal((n_steps // stride + 1, dim))
    step = dt * stride

    def loss_of(params_b: NetParams, params_s: NetParams) -> float:
        states = _net_rollout_batch(params_b, params_s, x0[None], increments[None], dt)
        diff = PathDiff(values=states[0, ::stride] - target, step=step, alpha=alpha)
        return frac_path_norm(diff)

    states = _net_rollout_batch(drift, diffusion, x0[None], increments[None], dt)
    diff = PathDiff(values=states[0, ::stride] - target, step=step, alpha=alpha)
    upstream = np.zeros_like(states)
    upstream[0, ::stride] = frac_norm_subgradient(diff)
    grads_b, grads_s = _rollout_vjp_batch(
        drift, diffusion, states, increments[None], dt, upstream
    )

    worst = 0.0
    for which, grads in (("drift", grads_b), ("diffusion", grads_s)):
        for field, grad_arr in zip(_PARAM_FIELDS, grads.arrays()):
            params = drift if which == "drift" else diffusion
            for idx in range(grad_arr.size):
                val = getattr(params, field).flat[idx]
                eps = 1e-5 * max(1.0, abs(val))
                plus = _perturbed(params, field, idx, eps)
                minus = _perturbed(params, field, idx, -eps)
                if which == "drift":
                    fd = (loss_of(plus, diffusion) - loss_of(minus, diffusion)) / (2 * eps)
                else:
                    fd = (loss_of(drift, plus) - loss_of(drift, minus)) / (2 * eps)
                ana = grad_arr.flat[idx]
                gap = abs(ana - fd) / max(abs(ana), abs(fd), 1e-6)
                worst = max(worst, gap)
    return worst


def _suite_covariance_davies_harte(seed: int) -> SuiteResult:
    hurst, m, dt, n = 0.7, 16, 1.0 / 16.0, 20000
    inc = davies_harte_increments(hurst, m, dt, derive_seed(seed, "selftest-dh"), n_paths=n)
    values = np.concatenate([np.zeros((n, 1)), np.cumsum(inc, axis=1)], axis=1)
    z = float(np.abs(covariance_zscores(values, hurst, dt)).max())
    return SuiteResult(
        name="covariance-davies-harte",
        ok=z < 5.0,
        detail=f"max |z| = {z:.2f} over {m}x{m} entries, {n} replicas (limit 5)",
    )


def _suite_covariance_cholesky(seed: int) -> SuiteResult:
    hurst, m, dt, n = 0.7, 16, 1.0 / 16.0, 20000
    values = cholesky_paths(hurst, m, dt, derive_seed(seed, "selftest-chol"), n_paths=n)
    z = float(np.abs(covariance_zscores(values, hurst, dt)).max())
    return SuiteResult(
        name="covariance-cholesky",
        ok=z < 5.0,
        detail=f"max |z| = {z:.2f} over {m}x{m} entries, {n} replicas (limit 5)",
    )


def _suite_coupling_variance(seed: int) -> SuiteResult:
    ha, hb, m, dt, n = 0.7, 0.75, 16, 1.0 / 32.0, 2000
    sampler = MvnCoupledSampler(ha, hb, m, dt)
    va, vb = sampler.sample_batch(derive_seed(seed, "selftest-civ"), n_paths=n)
    gap = va[:, -1] - vb[:, -1]
    emp = float(np.var(gap))
    exact = cross_increment_variance(ha, hb, m * dt)
    rel = abs(emp - exact) / exact
    return SuiteResult(
        name="coupling-variance",
        ok=rel < 0.15,
        detail=f"empirical {emp:.3e} vs exact {exact:.3e}, rel err {rel:.3f} (limit 0.15)",
    )


def _suite_gradient(seed: int) -> SuiteResult:
    gaps = [endtoend_gradient_gap(derive_seed(seed, "selftest-grad", i)) for i in range(3)]
    worst = max(gaps)
    return SuiteResult(
        name="gradient-finite-difference",
        ok=worst < 1e-4,
        detail=f"worst relative gap {worst:.2e} over 3 configurations (limit 1e-4)",
    )


def _suite_hurst_quadratic(seed: int) -> SuiteResult:
    t = np.linspace(0.0, 1.0, 33)
    est = estimate_hurst(t**2)
    ok = est.value == 0.99 and est.clipped
    return SuiteResult(
        name="hurst-quadratic-series",
        ok=ok,
        detail=f"estimate {est.value} (raw {est.raw:.3f}), clipped={est.clipped}",
    )


_SUITES = (
    _suite_covariance_davies_harte,
    _suite_covariance_cholesky,
    _suite_coupling_variance,
    _suite_gradient,
    _suite_hurst_quadratic,
)


def run_selftest(seed: int = 0) -> list[SuiteResult]:
    """Run every verification suite; deterministic given the seed."""
    return [suite(seed) for suite in _SUITES]
