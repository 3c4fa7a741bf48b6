"""Euler rollout, dataset generation, persistence, and rollout gradients."""

import numpy as np
import pytest

from fracsde import (
    benchmark_1d,
    benchmark_2d,
    constant_field,
    downsample,
    euler_rollout,
    generate_dataset,
    init_params,
    load_dataset,
    rollout_vjp,
    save_dataset,
)


def test_rollout_constant_field_closed_form():
    # With b = c and sigma = s the recursion telescopes:
    # X_n = x0 + c n dt + s sum(dB).
    field = constant_field(1, drift_value=2.0, diffusion_value=0.5)
    rng = np.random.default_rng(0)
    incs = rng.standard_normal((10, 1)) * 0.1
    traj = euler_rollout(field, np.array([1.0]), incs, dt=0.05)
    n = np.arange(11)
    expected = 1.0 + 2.0 * n * 0.05 + 0.5 * np.concatenate([[0.0], np.cumsum(incs[:, 0])])
    assert np.allclose(traj.states[:, 0], expected)
    assert np.allclose(traj.times, 0.05 * n)


def test_rollout_zero_noise_is_deterministic_euler():
    field = benchmark_1d()
    incs = np.zeros((20, 1))
    traj = euler_rollout(field, np.array([1.5]), incs, dt=0.05)
    x = 1.5
    for i in range(20):
        x = x + float(field.drift(0.05 * i, np.array([x]))[0]) * 0.05
    assert traj.states[-1, 0] == pytest.approx(x)


def test_rollout_shape_validation():
    field = benchmark_2d()
    with pytest.raises(ValueError):
        euler_rollout(field, np.zeros(1), np.zeros((5, 2)), dt=0.1)
    with pytest.raises(ValueError):
        euler_rollout(field, np.zeros(2), np.zeros((5, 1)), dt=0.1)
    with pytest.raises(ValueError):
        euler_rollout(field, np.zeros(2), np.zeros((5, 2)), dt=0.0)


def test_rollout_detects_blowup():
    explosive = constant_field(1, drift_value=0.0, diffusion_value=1.0)
    bad = np.full((3, 1), np.inf)
    with pytest.raises((RuntimeError, ValueError)):
        euler_rollout(explosive, np.zeros(1), bad, dt=0.1)


def test_downsample_keeps_every_kth_state():
    field = benchmark_1d()
    incs = np.random.default_rng(1).standard_normal((12, 1)) * 0.1
    traj = euler_rollout(field, np.zeros(1), incs, dt=0.025)
    obs = downsample(traj, 3)
    assert obs.step == pytest.approx(0.075)
    assert np.array_equal(obs.values, traj.states[::3])
    with pytest.raises(ValueError):
        downsample(traj, 5)


def test_generate_dataset_split_sizes_and_grids(small_dataset):
    assert len(small_dataset.train) == 6
    assert len(small_dataset.val) == 3
    assert len(small_dataset.test) == 3
    sample = small_dataset.train[0]
    assert sample.trajectory.states.shape == (17, 1)
    assert sample.observations.values.shape == (9, 1)
    assert sample.observations.step == pytest.approx(0.05 * 2 / 2)
    assert np.array_equal(sample.observations.values, sample.trajectory.states[::2])
    assert small_dataset.dimension == 1
    assert 0.0 < small_dataset.eval_box < 4.0


def test_generate_dataset_is_deterministic():
    a = generate_dataset(benchmark_1d(), hurst=0.7, n_coarse=4, k=2, counts=(2, 1, 1), seed=3)
    b = generate_dataset(benchmark_1d(), hurst=0.7, n_coarse=4, k=2, counts=(2, 1, 1), seed=3)
    for sa, sb in zip(a.all_samples(), b.all_samples()):
        assert np.array_equal(sa.trajectory.states, sb.trajectory.states)
    c = generate_dataset(benchmark_1d(), hurst=0.7, n_coarse=4, k=2, counts=(2, 1, 1), seed=4)
    assert not np.array_equal(
        a.train[0].trajectory.states, c.train[0].trajectory.states
    )


def test_generate_dataset_initial_states_clipped():
    ds = generate_dataset(
        benchmark_1d(), hurst=0.7, n_coarse=2, k=1, counts=(30, 0, 0), box=0.5, seed=9
    )
    starts = np.array([s.trajectory.states[0, 0] for s in ds.train])
    assert np.abs(starts).max() <= 0.5


def test_generate_dataset_mvn_noise_mode():
    ds = generate_dataset(
        benchmark_1d(), hurst=0.7, n_coarse=4, k=2, counts=(2, 1, 1), seed=3, noise="mvn"
    )
    assert ds.config["noise"] == "mvn"
    assert all(np.isfinite(s.trajectory.states).all() for s in ds.all_samples())
    with pytest.raises(ValueError):
        generate_dataset(benchmark_1d(), hurst=0.7, counts=(2, 1, 1), noise="brownian")


def test_dataset_roundtrip_through_disk(tmp_path, small_dataset):
    outdir = tmp_path / "data"
    save_dataset(small_dataset, outdir)
    loaded = load_dataset(outdir)
    assert loaded.config == small_dataset.config
    assert loaded.eval_box == pytest.approx(small_dataset.eval_box)
    for sa, sb in zip(small_dataset.all_samples(), loaded.all_samples()):
        assert np.allclose(sa.trajectory.states, sb.trajectory.states, atol=1e-12)
        assert np.allclose(sa.trajectory.increments, sb.trajectory.increments, atol=1e-12)
        assert np.allclose(sa.observations.values, sb.observations.values, atol=1e-12)
        assert sa.observations.step == pytest.approx(sb.observations.step)


def test_save_dataset_extra_merges_into_manifest(tmp_path, small_dataset):
    outdir = tmp_path / "data"
    save_dataset(small_dataset, outdir, extra={"note": "run-7"})
    loaded = load_dataset(outdir)
    assert loaded.config == small_dataset.config
    import json

    manifest = json.loads((outdir / "manifest.json").read_text())
    assert manifest["note"] == "run-7"
    with pytest.raises(ValueError):
        save_dataset(small_dataset, tmp_path / "clash", extra={"eval_box": 1.0})


def test_rollout_vjp_matches_finite_differences(small_dataset):
    from fracsde import neural_field

    drift = init_params(6, 2, 1, seed=21)
    diffusion = init_params(6, 2, 1, seed=22)
    base = small_dataset.train[0].trajectory
    # rollout_vjp linearizes around the recorded states, so the trajectory
    # has to be the rollout of these two networks themselves
    traj = euler_rollout(
        neural_field(drift, diffusion), base.states[0], base.increments, base.dt
    )
    rng = np.random.default_rng(5)
    upstream = rng.standard_normal(traj.states.shape)

    def objective(d, s):
        from fracsde.sde import _net_rollout_batch

        states = _net_rollout_batch(
            d, s, traj.states[:1], traj.increments[None, :, :], traj.dt
        )[0]
        return float((states * upstream).sum())

    g_drift, g_diff = rollout_vjp(drift, diffusion, traj, upstream)
    base_args = {"d": drift, "s": diffusion}
    eps = 1e-6
    for target, grads in (("d", g_drift), ("s", g_diff)):
        params = base_args[target]
        for name in ("w1", "b2"):
            arr = getattr(params, name)
            g = getattr(grads, name)
            idx = (0,) if arr.ndim == 1 else (0, 0)
            bump = arr.copy()
            bump[idx] += eps
            kwargs = dict(base_args)
            kwargs[target] = _replace_param(params, name, bump)
            up = objective(**kwargs)
            bump[idx] -= 2 * eps
            kwargs[target] = _replace_param(params, name, bump)
            down = objective(**kwargs)
            fd = (up - down) / (2 * eps)
            assert g[idx] == pytest.approx(fd, rel=1e-4, abs=1e-8)


def _replace_param(params, name, value):
    from fracsde import NetParams

    data = {
        "w1": params.w1,
        "b1": params.b1,
        "w2": params.w2,
        "b2": params.b2,
        "clip_bound": params.clip_bound,
    }
    data[name] = value
    return NetParams(**data)
