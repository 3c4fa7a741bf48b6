"""Fractional noise generators against closed forms and each other."""

import numpy as np
import pytest

from fracsde import (
    MvnCoupledSampler,
    cholesky_paths,
    circulant_eigenvalues,
    covariance_zscores,
    cross_factor,
    cross_increment_variance,
    davies_harte_increments,
    fbm_cholesky,
    fbm_covariance,
    fbm_davies_harte,
    fgn_autocovariance,
    mvn_constant,
    mvn_coupled_pair,
)
from fracsde.noise import CHOLESKY_MAX_STEPS


def test_covariance_closed_form_values():
    # H = 1/2 reduces to min(t, s); H = 0.7 checked against the formula
    # 0.5 (t^1.4 + s^1.4 - |t-s|^1.4) evaluated by hand.
    assert fbm_covariance(0.5, 2.0, 3.0) == pytest.approx(2.0)
    expected = 0.5 * (2.0**1.4 + 3.0**1.4 - 1.0)
    assert fbm_covariance(0.7, 2.0, 3.0) == pytest.approx(expected, rel=1e-15)


def test_covariance_diagonal_is_power_law():
    t = np.array([0.25, 1.0, 2.0])
    assert np.allclose(fbm_covariance(0.7, t, t), t**1.4)


def test_covariance_rejects_negative_times():
    with pytest.raises(ValueError):
        fbm_covariance(0.7, -1.0, 1.0)


def test_autocovariance_sums_to_path_variance():
    # gamma(0) + 2 sum_{k=1}^{m-1} (m-k)/m gamma(k) = Var(B_m dt)/m.
    hurst, m, dt = 0.7, 16, 0.125
    gamma = fgn_autocovariance(hurst, m, dt)
    k = np.arange(1, m)
    total = m * gamma[0] + 2.0 * np.sum((m - k) * gamma[k])
    assert total == pytest.approx((m * dt) ** (2 * hurst), rel=1e-12)


def test_circulant_eigenvalues_nonnegative():
    eig = circulant_eigenvalues(fgn_autocovariance(0.9, 64, 1.0))
    assert eig.shape == (128,)
    assert eig.min() >= 0.0


def test_davies_harte_matches_covariance():
    values = np.cumsum(davies_harte_increments(0.7, 16, 1.0 / 16, seed=21, n_paths=20000), axis=1)
    values = np.concatenate([np.zeros((values.shape[0], 1)), values], axis=1)
    z = covariance_zscores(values, 0.7, 1.0 / 16)
    assert np.abs(z).max() < 5.0


def test_cholesky_matches_covariance():
    values = cholesky_paths(0.7, 16, 1.0 / 16, seed=22, n_paths=20000)
    z = covariance_zscores(values, 0.7, 1.0 / 16)
    assert np.abs(z).max() < 5.0


def test_generators_are_deterministic():
    a = davies_harte_increments(0.6, 32, 0.03125, seed=5, n_paths=3)
    b = davies_harte_increments(0.6, 32, 0.03125, seed=5, n_paths=3)
    assert np.array_equal(a, b)
    c = cholesky_paths(0.6, 32, 0.03125, seed=5, n_paths=3)
    d = cholesky_paths(0.6, 32, 0.03125, seed=5, n_paths=3)
    assert np.array_equal(c, d)


def test_path_wrappers_start_at_zero():
    p = fbm_davies_harte(0.8, 16, 0.0625, seed=3)
    q = fbm_cholesky(0.8, 16, 0.0625, seed=3)
    assert p.values[0] == 0.0 and q.values[0] == 0.0
    assert p.n_steps == 16 and q.n_steps == 16
    assert np.allclose(p.times, 0.0625 * np.arange(17))
    assert np.allclose(p.increments, np.diff(p.values))


def test_cholesky_step_guard():
    with pytest.raises(ValueError):
        cholesky_paths(0.7, CHOLESKY_MAX_STEPS + 1, 1e-4, seed=0)


def test_hurst_domain_validation():
    with pytest.raises(ValueError):
        davies_harte_increments(1.0, 8, 0.125, seed=0)
    with pytest.raises(ValueError):
        davies_harte_increments(0.0, 8, 0.125, seed=0)
    with pytest.raises(ValueError):
        MvnCoupledSampler(0.5, 0.7, 8, 0.125)


def test_mvn_constant_frozen_values():
    # C_{1/2} = 1 exactly; C_{0.7} frozen from an independent high-precision
    # evaluation of sqrt(sin(pi H) Gamma(1+2H)) / Gamma(H+1/2).
    assert mvn_constant(0.5) == pytest.approx(1.0, rel=1e-14)
    assert mvn_constant(0.7) == pytest.approx(1.091809130883913, rel=1e-13)


def test_cross_factor_frozen_values():
    # Frozen from an independent quadrature of the kernel overlap integral.
    assert cross_factor(0.7, 0.8) == pytest.approx(0.965580071211, rel=1e-9)
    assert cross_factor(0.7, 0.75) == pytest.approx(0.992219479635, rel=1e-9)
    assert cross_factor(0.8, 0.7) == cross_factor(0.7, 0.8)
    assert cross_factor(0.7, 0.7) == 1.0


def test_cross_increment_variance_frozen_value():
    got = cross_increment_variance(0.7, 0.75, 0.5)
    assert got == pytest.approx(6.135358534736457e-3, rel=1e-9)
    assert cross_increment_variance(0.7, 0.7, 0.5) == pytest.approx(0.0, abs=1e-14)


def test_coupled_same_hurst_is_identical():
    sampler = MvnCoupledSampler(0.7, 0.7, 8, 0.125)
    a, b = sampler.sample_batch(0, 4)
    assert np.array_equal(a, b)


def test_coupled_first_path_ignores_second_hurst():
    a1, _ = MvnCoupledSampler(0.7, 0.75, 8, 0.125).sample_batch(0, 4)
    a2, _ = MvnCoupledSampler(0.7, 0.9, 8, 0.125).sample_batch(0, 4)
    assert np.array_equal(a1, a2)


def test_coupled_rows_do_not_depend_on_chunking():
    sampler = MvnCoupledSampler(0.7, 0.75, 8, 0.125)
    a, b = sampler.sample_batch(0, 5)
    a1, b1 = sampler.sample_batch(0, 5, chunk=2)
    a2, b2 = sampler.sample_batch(0, 2)
    assert np.allclose(a, a1, rtol=0.0, atol=1e-12)
    assert np.allclose(b, b1, rtol=0.0, atol=1e-12)
    assert np.allclose(a[:2], a2, rtol=0.0, atol=1e-12)
    assert np.allclose(b[:2], b2, rtol=0.0, atol=1e-12)


def test_coupled_pair_wrapper_consistency():
    pair = mvn_coupled_pair(0.7, 0.75, 8, 0.125, seed=3)
    sampler = MvnCoupledSampler(0.7, 0.75, 8, 0.125)
    a, b = sampler.sample_batch(3, 1)
    assert np.array_equal(pair.path_a.values, a[0])
    assert np.array_equal(pair.path_b.values, b[0])
    assert pair.path_a.hurst == 0.7 and pair.path_b.hurst == 0.75


def test_coupled_marginal_variance():
    # Terminal variance of each marginal path should match t^{2H} within
    # Monte Carlo error; 3000 replicas give a ~4% standard error on the
    # variance, so 15% is a safe band.
    sampler = MvnCoupledSampler(0.7, 0.75, 16, 1.0 / 32)
    a, b = sampler.sample_batch(9, 3000)
    t_end = 0.5
    assert np.var(a[:, -1]) == pytest.approx(t_end**1.4, rel=0.15)
    assert np.var(b[:, -1]) == pytest.approx(t_end**1.5, rel=0.15)


def test_coupled_difference_variance():
    # The coupling is the whole point: the variance of the path difference
    # must match the closed form, which is ~100x smaller than either
    # marginal variance at these Hurst values.
    sampler = MvnCoupledSampler(0.7, 0.75, 16, 1.0 / 32)
    a, b = sampler.sample_batch(9, 3000)
    diff_var = np.var(a[:, -1] - b[:, -1])
    assert diff_var == pytest.approx(cross_increment_variance(0.7, 0.75, 0.5), rel=0.2)


def test_covariance_zscores_validation():
    with pytest.raises(ValueError):
        covariance_zscores(np.zeros((1, 5)), 0.7, 0.1)
    with pytest.raises(ValueError):
        covariance_zscores(np.zeros(5), 0.7, 0.1)


def test_grid_validation():
    with pytest.raises(ValueError):
        davies_harte_increments(0.7, 0, 0.1, seed=0)
    with pytest.raises(ValueError):
        davies_harte_increments(0.7, 8, -0.1, seed=0)
    with pytest.raises(ValueError):
        MvnCoupledSampler(0.7, 0.75, 8, 0.125, far_factor=10.0)
    with pytest.raises(ValueError):
        MvnCoupledSampler(0.7, 0.75, 8, 0.125, far_ratio=1.0)
