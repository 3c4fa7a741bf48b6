"""Single-hidden-layer tanh networks with hand-written reverse mode.

Two independent networks of identical width parametrize drift and diffusion.
The forward map is W2 tanh(W1 u + b1) + b2 with u = (t, x); the diffusion
network output additionally passes through ``positive_diffusion``.  Gradients
are computed by explicit vector-Jacobian products so the whole training stack
stays inside numpy and stays exactly reproducible.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .serialize import dumps_json, load_json

__all__ = [
    "NetParams",
    "NetGrads",
    "AdamState",
    "init_params",
    "net_forward",
    "net_vjp",
    "positive_diffusion",
    "positive_diffusion_grad",
    "clip_params",
    "init_adam",
    "adam_step",
    "neural_field",
    "save_checkpoint",
    "load_checkpoint",
]

DIFFUSION_FLOOR = 1e-3

_ARRAY_FIELDS = ("w1", "b1", "w2", "b2")


@dataclass(frozen=True)
class NetParams:
    """Parameters of one network; w1: (width, d_in), w2: (d_out, width)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    clip_bound: float = 5.0

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=float)
        b1 = np.asarray(self.b1, dtype=float)
        w2 = np.asarray(self.w2, dtype=float)
        b2 = np.asarray(self.b2, dtype=float)
        if w1.ndim != 2 or w2.ndim != 2 or b1.ndim != 1 or b2.ndim != 1:
            raise ValueError("w1, w2 must be matrices and b1, b2 vectors")
        width = w1.shape[0]
        if b1.shape != (width,) or w2.shape[1] != width or b2.shape != (w2.shape[0],):
            raise ValueError(
                f"inconsistent shapes: w1 {w1.shape}, b1 {b1.shape}, "
                f"w2 {w2.shape}, b2 {b2.shape}"
            )
        if not self.clip_bound > 0.0:
            raise ValueError(f"clip_bound must be positive, got {self.clip_bound}")
        for name, arr in (("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"parameter array {name} has non-finite entries")
            object.__setattr__(self, name, arr)

    @property
    def width(self) -> int:
        return self.w1.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.w1.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.w2.shape[0]

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2)


@dataclass
class NetGrads:
    """Gradient (or moment) arrays matching NetParams shapes."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2)

    def add_(self, other: "NetGrads") -> "NetGrads":
        for mine, theirs in zip(self.arrays(), other.arrays()):
            mine += theirs
        return self

    def scale_(self, factor: float) -> "NetGrads":
        for arr in self.arrays():
            arr *= factor
        return self


def zeros_like_grads(params: NetParams) -> NetGrads:
    return NetGrads(*(np.zeros_like(a) for a in params.arrays()))


def init_params(
    width: int, n_inputs: int, n_outputs: int, seed: int, clip_bound: float = 5.0
) -> NetParams:
    """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer."""
    if width < 1 or n_inputs < 1 or n_outputs < 1:
        raise ValueError("width, n_inputs, n_outputs must all be >= 1")
    rng = np.random.default_rng(seed)
    lim1 = 1.0 / np.sqrt(n_inputs)
    lim2 = 1.0 / np.sqrt(width)
    return NetParams(
        w1=rng.uniform(-lim1, lim1, size=(width, n_inputs)),
        b1=rng.uniform(-lim1, lim1, size=width),
        w2=rng.uniform(-lim2, lim2, size=(n_outputs, width)),
        b2=rng.uniform(-lim2, lim2, size=n_outputs),
        clip_bound=clip_bound,
    )


def _stack_inputs(params: NetParams, t, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != params.n_inputs - 1:
        raise ValueError(
            f"x must have {params.n_inputs - 1} components, got shape {x.shape}"
        )
    tcol = np.broadcast_to(np.asarray(t, dtype=float).reshape(-1, 1) if np.ndim(t) else float(t), (xb.shape[0], 1))
    return np.concatenate([np.asarray(tcol, dtype=float), xb], axis=1), single


def _forward_from_inputs(params: NetParams, inputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    act = np.tanh(inputs @ params.w1.T + params.b1)
    return act @ params.w2.T + params.b2, act


def net_forward(params: NetParams, t, x) -> np.ndarray:
    """Network output at scalar time t and state x of shape (d,) or (B, d)."""
    inputs, single = _stack_inputs(params, t, x)
    out, _ = _forward_from_inputs(params, inputs)
    return out[0] if single else out


def _vjp_from_inputs(
    params: NetParams, inputs: np.ndarray, act: np.ndarray, upstream: np.ndarray
) -> tuple[NetGrads, np.ndarray]:
    grad_w2 = upstream.T @ act
    grad_b2 = upstream.sum(axis=0)
    dz = (upstream @ params.w2) * (1.0 - act**2)
    grad_w1 = dz.T @ inputs
    grad_b1 = dz.sum(axis=0)
    grad_inputs = dz @ params.w1
    return NetGrads(grad_w1, grad_b1, grad_w2, grad_b2), grad_inputs


def net_vjp(params: NetParams, t, x, upstream) -> tuple[NetGrads, np.ndarray]:
    """Pull back ``upstream`` (same shape as the output) through the network.

    Returns parameter gradients summed over the batch and the gradient with
    respect to the stacked input (t, x), shape (B, d+1) or (d+1,).
    """
    inputs, single = _stack_inputs(params, t, x)
    upstream = np.asarray(upstream, dtype=float)
    ub = upstream[None, :] if single else upstream
    if ub.shape != (inputs.shape[0], params.n_outputs):
        raise ValueError(
            f"upstream must have shape (batch, {params.n_outputs}), got {upstream.shape}"
        )
    _, act = _forward_from_inputs(params, inputs)
    grads, grad_inputs = _vjp_from_inputs(params, inputs, act, ub)
    return grads, (grad_inputs[0] if single else grad_inputs)


def positive_diffusion(raw) -> np.ndarray:
    """softplus(raw) + 1e-3, computed overflow-safe; always > 0."""
    return np.logaddexp(0.0, np.asarray(raw, dtype=float)) + DIFFUSION_FLOOR


def positive_diffusion_grad(raw) -> np.ndarray:
    """Derivative of positive_diffusion, the logistic sigmoid."""
    return expit(np.asarray(raw, dtype=float))


def clip_params(params: NetParams, bound: float | None = None) -> NetParams:
    """Clamp every parameter entry to [-c, c]; idempotent."""
    c = params.clip_bound if bound is None else float(bound)
    if not c > 0.0:
        raise ValueError(f"clip bound must be positive, got {c}")
    return NetParams(
        w1=np.clip(params.w1, -c, c),
        b1=np.clip(params.b1, -c, c),
        w2=np.clip(params.w2, -c, c),
        b2=np.clip(params.b2, -c, c),
        clip_bound=params.clip_bound,
    )


@dataclass
class AdamState:
    """Adam moments plus hyperparameters; weight decay is decoupled."""

    m: NetGrads
    v: NetGrads
    step: int
    learning_rate: float
    weight_decay: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(
    params: NetParams,
    learning_rate: float = 1e-3,
    weight_decay: float = 1e-4,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    if not learning_rate > 0.0:
        raise ValueError(f"learning_rate must be positive, got {learning_rate}")
    if weight_decay < 0.0:
        raise ValueError(f"weight_decay must be nonnegative, got {weight_decay}")
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ValueError("beta1, beta2 must lie in [0, 1)")
    return AdamState(
        m=zeros_like_grads(params),
        v=zeros_like_grads(params),
        step=0,
        learning_rate=learning_rate,
        weight_decay=weight_decay,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(state: AdamState, params: NetParams, grads: NetGrads) -> tuple[NetParams, AdamState]:
    """One Adam update with decoupled weight decay; returns fresh objects.

    p <- p - lr * (mhat / (sqrt(vhat) + eps) + weight_decay * p).
    """
    for name, g in zip(_ARRAY_FIELDS, grads.arrays()):
        if not np.all(np.isfinite(g)):
            raise ValueError(f"gradient array {name} has non-finite entries")
    t = state.step + 1
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + state.eps) + state.weight_decay * p
        new_m.append(m)
        new_v.append(v)
        new_p.append(p - state.learning_rate * update)
    new_params = NetParams(*new_p, clip_bound=params.clip_bound)
    new_state = AdamState(
        m=NetGrads(*new_m),
        v=NetGrads(*new_v),
        step=t,
        learning_rate=state.learning_rate,
        weight_decay=state.weight_decay,
        beta1=state.beta1,
        beta2=state.beta2,
        eps=state.eps,
    )
    return new_params, new_state


def neural_field(drift_params: NetParams, diffusion_params: NetParams):
    """Wrap two networks as a CoefficientField (diffusion made positive)."""
    from .fields import CoefficientField

    if drift_params.n_inputs != diffusion_params.n_inputs:
        raise ValueError("drift and diffusion networks must share the input size")
    d = drift_params.n_inputs - 1
    if drift_params.n_outputs != d or diffusion_params.n_outputs != d:
        raise ValueError("networks must map (t, x) in R^{d+1} to R^d")

    def drift(t, x):
        return net_forward(drift_params, t, x)

    def diffusion(t, x):
        return positive_diffusion(net_forward(diffusion_params, t, x))

    return CoefficientField(dimension=d, drift=drift, diffusion=diffusion)


def _params_to_dict(params: NetParams) -> dict:
    return {
        "shapes": {name: list(arr.shape) for name, arr in zip(_ARRAY_FIELDS, params.arrays())},
        "arrays": {name: arr.ravel().tolist() for name, arr in zip(_ARRAY_FIELDS, params.arrays())},
        "clip_bound": params.clip_bound,
    }


def _params_from_dict(data: dict) -> NetParams:
    arrays = {
        name: np.asarray(data["arrays"][name], dtype=float).reshape(data["shapes"][name])
        for name in _ARRAY_FIELDS
    }
    return NetParams(**arrays, clip_bound=float(data["clip_bound"]))


def _adam_to_dict(state: AdamState) -> dict:
    return {
        "m": {name: arr.ravel().tolist() for name, arr in zip(_ARRAY_FIELDS, state.m.arrays())},
        "v": {name: arr.ravel().tolist() for name, arr in zip(_ARRAY_FIELDS, state.v.arrays())},
        "step": state.step,
        "learning_rate": state.learning_rate,
        "weight_decay": state.weight_decay,
        "beta1": state.beta1,
        "beta2": state.beta2,
        "eps": state.eps,
    }


def _adam_from_dict(data: dict, params: NetParams) -> AdamState:
    shapes = [arr.shape for arr in params.arrays()]
    m = NetGrads(*(np.asarray(data["m"][n], dtype=float).reshape(s) for n, s in zip(_ARRAY_FIELDS, shapes)))
    v = NetGrads(*(np.asarray(data["v"][n], dtype=float).reshape(s) for n, s in zip(_ARRAY_FIELDS, shapes)))
    return AdamState(
        m=m,
        v=v,
        step=int(data["step"]),
        learning_rate=float(data["learning_rate"]),
        weight_decay=float(data["weight_decay"]),
        beta1=float(data["beta1"]),
        beta2=float(data["beta2"]),
        eps=float(data["eps"]),
    )


def config_hash(config: dict) -> str:
    return hashlib.sha256(dumps_json(config).encode("utf-8")).hexdigest()


def save_checkpoint(
    path,
    drift: NetParams,
    diffusion: NetParams,
    adam_drift: AdamState | None = None,
    adam_diffusion: AdamState | None = None,
    config: dict | None = None,
    extra: dict | None = None,
) -> None:
    """Write both networks, optimizer state, step counter, and config hash."""
    config = config or {}
    step = max(
        adam_drift.step if adam_drift is not None else 0,
        adam_diffusion.step if adam_diffusion is not None else 0,
    )
    payload = {
        "config": config,
        "config_hash": config_hash(config),
        "step": step,
        "drift": _params_to_dict(drift),
        "diffusion": _params_to_dict(diffusion),
        "adam_drift": _adam_to_dict(adam_drift) if adam_drift is not None else None,
        "adam_diffusion": _adam_to_dict(adam_diffusion) if adam_diffusion is not None else None,
        "extra": extra or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_json(payload))


@dataclass
class Checkpoint:
    drift: NetParams
    diffusion: NetParams
    adam_drift: AdamState | None
    adam_diffusion: AdamState | None
    step: int
    config: dict
    config_hash: str
    extra: dict


def load_checkpoint(path) -> Checkpoint:
    data = load_json(path)
    drift = _params_from_dict(data["drift"])
    diffusion = _params_from_dict(data["diffusion"])
    stored = config_hash(data["config"])
    if stored != data["config_hash"]:
        raise ValueError(
            f"checkpoint config hash mismatch: stored {data['config_hash']}, "
            f"recomputed {stored}"
        )
    return Checkpoint(
        drift=drift,
        diffusion=diffusion,
        adam_drift=_adam_from_dict(data["adam_drift"], drift) if data["adam_drift"] else None,
        adam_diffusion=_adam_from_dict(data["adam_diffusion"], diffusion)
        if data["adam_diffusion"]
        else None,
        step=int(data["step"]),
        config=data["config"],
        config_hash=data["config_hash"],
        extra=data.get("extra", {}),
    )
