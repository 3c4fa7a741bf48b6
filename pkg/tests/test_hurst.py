"""Second-difference ratio estimator of the roughness exponent."""

import numpy as np
import pytest

from fracsde import DegenerateSeriesError, cholesky_paths, estimate_hurst
from fracsde.hurst import CLIP_HI, CLIP_LO, MIN_LENGTH


def test_recovers_smooth_exponent_on_exact_paths():
    # 200 exact paths at H = 0.7 with 512 steps; the mean estimate must land
    # near the truth and the spread must be modest.
    paths = cholesky_paths(0.7, 512, 1.0 / 512, seed=1000, n_paths=200)
    values = np.asarray([estimate_hurst(p).value for p in paths])
    assert abs(values.mean() - 0.7) < 0.02
    assert values.std() < 0.1


def test_estimate_is_scale_invariant():
    path = cholesky_paths(0.8, 256, 1.0 / 256, seed=3)[0]
    a = estimate_hurst(path)
    b = estimate_hurst(1000.0 * path)
    assert a.value == pytest.approx(b.value, rel=1e-12)


def test_quadratic_series_clips_high():
    # A smooth trend has second differences that shrink superlinearly, so the
    # raw exponent exceeds the admissible range and is clipped at the top.
    t = np.linspace(0.0, 1.0, 33)
    est = estimate_hurst((t**2).reshape(-1, 1))
    assert est.clipped
    assert est.value == CLIP_HI
    assert est.raw > CLIP_HI


def test_white_noise_clips_low():
    rng = np.random.default_rng(7)
    est = estimate_hurst(rng.standard_normal(257))
    assert est.clipped
    assert est.value == CLIP_LO


def test_component_selection_matches_column():
    rng = np.random.default_rng(11)
    rough = np.cumsum(rng.standard_normal(129))
    smooth = np.linspace(0.0, 1.0, 129) ** 2
    series = np.stack([rough, smooth], axis=1)
    joint = estimate_hurst(series)
    second = estimate_hurst(series, component=1)
    assert second.raw == pytest.approx(estimate_hurst(smooth).raw)
    assert joint.raw == pytest.approx(
        0.5 * (estimate_hurst(rough).raw + estimate_hurst(smooth).raw)
    )


def test_short_series_rejected():
    with pytest.raises(ValueError):
        estimate_hurst(np.zeros(MIN_LENGTH - 1))


def test_constant_series_degenerate():
    with pytest.raises(DegenerateSeriesError):
        estimate_hurst(np.ones(64))


def test_reports_sample_count():
    path = cholesky_paths(0.7, 64, 1.0 / 64, seed=5)[0]
    est = estimate_hurst(path)
    assert est.n == 65
    assert not est.clipped
