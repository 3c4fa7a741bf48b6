"""Networks, hand-written gradients, optimizer, and checkpoints."""

import numpy as np
import pytest

from fracsde import (
    NetParams,
    adam_step,
    clip_params,
    config_hash,
    init_adam,
    init_params,
    load_checkpoint,
    net_forward,
    net_vjp,
    neural_field,
    positive_diffusion,
    save_checkpoint,
)
from fracsde.net import DIFFUSION_FLOOR, positive_diffusion_grad


def test_init_is_deterministic_and_bounded():
    a = init_params(16, 2, 1, seed=3)
    b = init_params(16, 2, 1, seed=3)
    for x, y in zip(a.arrays(), b.arrays()):
        assert np.array_equal(x, y)
    c = init_params(16, 2, 1, seed=4)
    assert not np.array_equal(a.w1, c.w1)
    assert np.abs(a.w1).max() <= 1.0 / np.sqrt(2.0)
    assert np.abs(a.w2).max() <= 1.0 / np.sqrt(16.0)


def test_forward_is_affine_in_output_layer():
    params = init_params(8, 3, 2, seed=0)
    t = 0.3
    x = np.array([0.1, -0.4])
    hidden = np.tanh(params.w1 @ np.concatenate([[t], x]) + params.b1)
    expected = params.w2 @ hidden + params.b2
    assert net_forward(params, t, x) == pytest.approx(expected)


def test_forward_batched_matches_loop():
    params = init_params(8, 2, 1, seed=1)
    xs = np.random.default_rng(0).standard_normal((5, 1))
    batched = net_forward(params, 0.2, xs)
    looped = np.stack([net_forward(params, 0.2, x) for x in xs])
    assert np.allclose(batched, looped)


def test_vjp_matches_finite_differences():
    params = init_params(6, 2, 1, seed=2)
    x = np.array([0.37])
    t = 0.58
    upstream = np.array([1.3])
    grads, x_grad = net_vjp(params, t, x, upstream)
    eps = 1e-6

    def value(p):
        return float(upstream @ net_forward(p, t, x))

    for name in ("w1", "b1", "w2", "b2"):
        arr = getattr(params, name)
        g = getattr(grads, name)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            bump = arr.copy()
            bump[idx] += eps
            up = value(NetParams(**{**_as_dict(params), name: bump}))
            bump[idx] -= 2 * eps
            down = value(NetParams(**{**_as_dict(params), name: bump}))
            assert g[idx] == pytest.approx((up - down) / (2 * eps), abs=1e-6)
    # input gradient columns are ordered (t, x_1, ..., x_d)
    up = float(upstream @ net_forward(params, t + eps, x))
    down = float(upstream @ net_forward(params, t - eps, x))
    assert x_grad[0] == pytest.approx((up - down) / (2 * eps), abs=1e-6)
    up = float(upstream @ net_forward(params, t, x + eps))
    down = float(upstream @ net_forward(params, t, x - eps))
    assert x_grad[1] == pytest.approx((up - down) / (2 * eps), abs=1e-6)


def _as_dict(params):
    return {
        "w1": params.w1,
        "b1": params.b1,
        "w2": params.w2,
        "b2": params.b2,
        "clip_bound": params.clip_bound,
    }


def test_positive_diffusion_floor_and_grad():
    raw = np.array([-50.0, -1.0, 0.0, 2.0])
    out = positive_diffusion(raw)
    assert np.all(out >= DIFFUSION_FLOOR)
    assert out[-1] == pytest.approx(np.logaddexp(0.0, 2.0) + DIFFUSION_FLOOR)
    eps = 1e-6
    fd = (positive_diffusion(raw + eps) - positive_diffusion(raw - eps)) / (2 * eps)
    assert positive_diffusion_grad(raw) == pytest.approx(fd, abs=1e-8)


def test_adam_step_matches_reference_formulas():
    # One decoupled-weight-decay step with unit gradients, written out
    # longhand: m = 0.1, v = 0.001, both bias-corrected to 1 at step 1.
    from fracsde.net import NetGrads

    params = init_params(4, 2, 1, seed=5)
    state = init_adam(params, learning_rate=0.01, weight_decay=0.1)
    grads = NetGrads(*[np.ones_like(a) for a in params.arrays()])
    new_params, new_state = adam_step(state, params, grads)
    m_hat = 0.1 / (1.0 - 0.9)
    v_hat = 0.001 / (1.0 - 0.999)
    for old, new in zip(params.arrays(), new_params.arrays()):
        expected = old - 0.01 * (m_hat / (np.sqrt(v_hat) + 1e-8) + 0.1 * old)
        assert new == pytest.approx(expected, rel=1e-12)
    assert new_state.step == 1


def test_clip_params_bounds_everything():
    params = NetParams(
        w1=np.array([[10.0, -10.0]]),
        b1=np.array([0.5]),
        w2=np.array([[7.0]]),
        b2=np.array([-9.0]),
        clip_bound=2.0,
    )
    clipped = clip_params(params)
    for arr in clipped.arrays():
        assert np.abs(arr).max() <= 2.0
    assert clipped.b1[0] == 0.5


def test_neural_field_applies_positive_link():
    drift = init_params(8, 2, 1, seed=6)
    diffusion = init_params(8, 2, 1, seed=7)
    field = neural_field(drift, diffusion)
    x = np.array([0.3])
    assert field.dimension == 1
    assert field.drift(0.1, x) == pytest.approx(net_forward(drift, 0.1, x))
    assert field.diffusion(0.1, x) == pytest.approx(
        positive_diffusion(net_forward(diffusion, 0.1, x))
    )
    assert np.all(field.diffusion(0.1, x) > 0.0)


def test_checkpoint_roundtrip(tmp_path):
    drift = init_params(8, 2, 1, seed=8)
    diffusion = init_params(8, 2, 1, seed=9)
    adam_d = init_adam(drift, learning_rate=0.002)
    adam_s = init_adam(diffusion)
    path = tmp_path / "model.json"
    save_checkpoint(
        path,
        drift,
        diffusion,
        adam_drift=adam_d,
        adam_diffusion=adam_s,
        config={"width": 8, "alpha": 0.4},
        extra={"best_epoch": 3},
    )
    loaded = load_checkpoint(path)
    for a, b in zip(loaded.drift.arrays(), drift.arrays()):
        assert np.array_equal(a, b)
    for a, b in zip(loaded.diffusion.arrays(), diffusion.arrays()):
        assert np.array_equal(a, b)
    assert loaded.adam_drift.learning_rate == 0.002
    assert loaded.config["width"] == 8
    assert loaded.extra["best_epoch"] == 3
    assert loaded.config_hash == config_hash({"width": 8, "alpha": 0.4})


def test_config_hash_is_order_insensitive():
    a = config_hash({"x": 1, "y": [1, 2]})
    b = config_hash({"y": [1, 2], "x": 1})
    assert a == b
    assert a != config_hash({"x": 2, "y": [1, 2]})


def test_shape_validation():
    with pytest.raises(ValueError):
        NetParams(
            w1=np.zeros((4, 2)),
            b1=np.zeros(3),
            w2=np.zeros((1, 4)),
            b2=np.zeros(1),
        )
    with pytest.raises(ValueError):
        init_params(0, 2, 1, seed=0)
