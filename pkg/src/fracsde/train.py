"""Training loop: fit the two networks by descending the path-space loss.

Each step simulates the model over the fine grid of a group of trajectories,
reusing their recorded driving increments ("oracle" mode) or increments
rebuilt at the estimated Hurst exponent from the same white noise ("coupled"
mode), measures the fractional Sobolev norm of the difference to the
observations on the coarse grid, and backpropagates its subgradient through
the Euler recursion.  Updates use Adam with decoupled weight decay, averaged
over accumulation groups, with parameter clipping after every update and
early stopping on the validation loss.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .fields import CoefficientField
from .hurst import CLIP_HI, CLIP_LO, estimate_hurst
from .metrics import (
    PathDiff,
    RecoveryReport,
    default_alpha,
    frac_norm_subgradient,
    frac_path_norm,
    recovery_metrics,
    uniform_eval_points,
)
from .net import (
    AdamState,
    NetParams,
    adam_step,
    clip_params,
    init_adam,
    init_params,
)
from .noise import MvnCoupledSampler
from .sde import Dataset, _net_rollout_batch, _rollout_vjp_batch, euler_rollout
from .seeding import derive_seed

__all__ = ["TrainConfig", "TrainHistory", "TrainResult", "EvalReport", "train", "evaluate"]

NOISE_MODES = ("oracle", "coupled")


@dataclass(frozen=True)
class TrainConfig:
    width: int = 128
    alpha: float | None = None
    learning_rate: float = 2e-3
    weight_decay: float = 1e-4
    clip_bound: float = 5.0
    max_epochs: int = 800
    patience: int = 100
    group_size: int = 20
    noise_mode: str = "oracle"
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.width < 1:
            raise ValueError(f"width must be >= 1, got {self.width}")
        if self.alpha is not None and not 0.0 < self.alpha < 0.5:
            raise ValueError(f"alpha must lie in (0, 1/2), got {self.alpha}")
        if not self.learning_rate > 0.0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.weight_decay < 0.0:
            raise ValueError(f"weight_decay must be nonnegative, got {self.weight_decay}")
        if not self.clip_bound > 0.0:
            raise ValueError(f"clip_bound must be positive, got {self.clip_bound}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.group_size < 1:
            raise ValueError(f"group_size must be >= 1, got {self.group_size}")
        if self.noise_mode not in NOISE_MODES:
            raise ValueError(
                f"noise_mode must be one of {NOISE_MODES}, got {self.noise_mode!r}"
            )

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "alpha": self.alpha,
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "clip_bound": self.clip_bound,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "group_size": self.group_size,
            "noise_mode": self.noise_mode,
            "seed": self.seed,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
        }


@dataclass
class TrainHistory:
    train_loss: list = dc_field(default_factory=list)
    val_loss: list = dc_field(default_factory=list)
    best_epoch: int = -1
    hurst_estimate: float = float("nan")
    hurst_raw: float = float("nan")
    alpha: float = float("nan")
    wall_seconds: float = 0.0

    @property
    def n_epochs(self) -> int:
        return len(self.train_loss)


@dataclass
class TrainResult:
    drift: NetParams
    diffusion: NetParams
    adam_drift: AdamState
    adam_diffusion: AdamState
    history: TrainHistory

    def field(self) -> CoefficientField:
        from .net import neural_field

        return neural_field(self.drift, self.diffusion)


def _clipped_mean_hurst(samples) -> tuple[float, float]:
    raws = [estimate_hurst(s.observations.values).raw for s in samples]
    raw = float(np.mean(raws))
    return min(max(raw, CLIP_LO), CLIP_HI), raw


def _coarse_stride(sample) -> int:
    stride = sample.observations.step / sample.trajectory.dt
    k = int(round(stride))
    if abs(stride - k) > 1e-6 * stride or (sample.trajectory.n_steps % k) != 0:
        raise ValueError("observation step is not an integer multiple of the fine dt")
    return k


def _driving_increments(dataset: Dataset, samples, noise_mode: str, hurst_hat: float):
    """Per-sample (n, d) model-driving increments for the given noise mode."""
    if noise_mode == "oracle":
        return [s.trajectory.increments for s in samples]
    config = dataset.config
    if config.get("noise") != "mvn":
        raise ValueError(
            "coupled noise mode requires a dataset generated with noise='mvn' "
            "so the underlying white noise can be rebuilt at a new exponent"
        )
    sampler = None
    out = []
    for sample in samples:
        traj = sample.trajectory
        if not sample.noise_seeds:
            raise ValueError("sample lacks noise seeds; regenerate the dataset")
        if sampler is None:
            sampler = MvnCoupledSampler(
                traj.hurst,
                hurst_hat,
                traj.n_steps,
                traj.dt,
                truncation_factor=config["truncation_factor"],
                refinement=config["refinement"],
                far_factor=config["far_factor"],
                far_ratio=config["far_ratio"],
            )
        cols = []
        for sub in sample.noise_seeds:
            _, values_b = sampler.sample_batch(int(sub), n_paths=1)
            cols.append(np.diff(values_b[0]))
        out.append(np.stack(cols, axis=1))
    return out


def _batch_losses_and_grads(coarse_model, coarse_obs, step, alpha):
    """Per-trajectory norms and subgradients of the coarse difference paths."""
    losses = []
    grads = []
    for j in range(coarse_model.shape[0]):
        diff = PathDiff(values=coarse_model[j] - coarse_obs[j], step=step, alpha=alpha)
        losses.append(frac_path_norm(diff))
        grads.append(frac_norm_subgradient(diff))
    return np.asarray(losses), np.stack(grads, axis=0)


def train(dataset: Dataset, config: TrainConfig) -> TrainResult:
    """Fit drift and diffusion networks on the dataset's training split.

    All randomness is derived from config.seed, so reruns with the same
    dataset and config give bit-identical histories and parameters.
    """
    if not dataset.train or not dataset.val:
        raise ValueError("dataset needs nonempty train and validation splits")
    t_start = time.perf_counter()
    d = dataset.dimension
    hurst_hat, hurst_raw = _clipped_mean_hurst(dataset.train)
    alpha = config.alpha if config.alpha is not None else default_alpha(hurst_hat)

    drift = init_params(config.width, d + 1, d, derive_seed(config.seed, "init-drift"),
                        clip_bound=config.clip_bound)
    diffusion = init_params(config.width, d + 1, d, derive_seed(config.seed, "init-diffusion"),
                            clip_bound=config.clip_bound)
    adam_kwargs = dict(
        learning_rate=config.learning_rate,
        weight_decay=config.weight_decay,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.eps,
    )
    adam_b = init_adam(drift, **adam_kwargs)
    adam_s = init_adam(diffusion, **adam_kwargs)

    def pack(samples):
        stride = _coarse_stride(samples[0])
        incs = _driving_increments(dataset, samples, config.noise_mode, hurst_hat)
        return {
            "x0": np.stack([s.trajectory.states[0] for s in samples]),
            "increments": np.stack(incs),
            "obs": np.stack([s.observations.values for s in samples]),
            "dt": samples[0].trajectory.dt,
            "step": samples[0].observations.step,
            "stride": stride,
        }

    groups = [
        pack(dataset.train[i : i + config.group_size])
        for i in range(0, len(dataset.train), config.group_size)
    ]
    val_pack = pack(dataset.val)

    def val_loss_of(params_b, params_s):
        states = _net_rollout_batch(
            params_b, params_s, val_pack["x0"], val_pack["increments"], val_pack["dt"]
        )
        coarse = states[:, :: val_pack["stride"], :]
        losses, _ = _batch_losses_and_grads(
            coarse, val_pack["obs"], val_pack["step"], alpha
        )
        return float(losses.mean())

    history = TrainHistory(hurst_estimate=hurst_hat, hurst_raw=hurst_raw, alpha=alpha)
    best_val = np.inf
    best_params = (drift, diffusion)
    best_states = (adam_b, adam_s)
    wait = 0
    n_train = len(dataset.train)

    for epoch in range(config.max_epochs):
        epoch_loss_sum = 0.0
        for group in groups:
            states = _net_rollout_batch(
                drift, diffusion, group["x0"], group["increments"], group["dt"]
            )
            coarse = states[:, :: group["stride"], :]
            losses, subgrads = _batch_losses_and_grads(
                coarse, group["obs"], group["step"], alpha
            )
            epoch_loss_sum += float(losses.sum())
            batch = losses.size
            upstream = np.zeros_like(states)
            upstream[:, :: group["stride"], :] = subgrads / batch
            grads_b, grads_s = _rollout_vjp_batch(
                drift, diffusion, states, group["increments"], group["dt"], upstream
            )
            drift, adam_b = adam_step(adam_b, drift, grads_b)
            diffusion, adam_s = adam_step(adam_s, diffusion, grads_s)
            drift = clip_params(drift)
            diffusion = clip_params(diffusion)
        history.train_loss.append(epoch_loss_sum / n_train)
        vloss = val_loss_of(drift, diffusion)
        history.val_loss.append(vloss)
        if vloss < best_val:
            best_val = vloss
            best_params = (drift, diffusion)
            best_states = (adam_b, adam_s)
            history.best_epoch = epoch
            wait = 0
        else:
            wait += 1
            if wait >= config.patience:
                break
    history.wall_seconds = time.perf_counter() - t_start
    return TrainResult(
        drift=best_params[0],
        diffusion=best_params[1],
        adam_drift=best_states[0],
        adam_diffusion=best_states[1],
        history=history,
    )


@dataclass
class EvalReport:
    loss_mean: float
    loss_std: float
    n_paths: int
    alpha: float
    recovery: RecoveryReport | None

    def to_dict(self) -> dict:
        out = {
            "loss_mean": self.loss_mean,
            "loss_std": self.loss_std,
            "n_paths": self.n_paths,
            "alpha": self.alpha,
        }
        if self.recovery is not None:
            out["recovery"] = self.recovery.to_dict()
        return out


def evaluate(
    model: CoefficientField,
    dataset: Dataset,
    split: str = "test",
    alpha: float | None = None,
    field_true: CoefficientField | None = None,
    noise_mode: str = "oracle",
    n_eval: int = 4096,
    eval_seed: int = 0,
) -> EvalReport:
    """Path-loss statistics of a model field on a dataset split.

    The model is rolled out with each sample's driving increments and compared
    to the observations in the fractional norm.  If ``field_true`` is given,
    coefficient recovery metrics are computed on a seeded uniform sample of
    [0, T] x [-eval_box, eval_box]^d.
    """
    samples = getattr(dataset, split, None)
    if samples is None or not isinstance(samples, list):
        raise ValueError(f"unknown split {split!r}; expected train, val, or test")
    if not samples:
        raise ValueError(f"split {split!r} is empty")
    hurst_hat = None
    if alpha is None or noise_mode == "coupled":
        source = dataset.train if dataset.train else samples
        hurst_hat, _ = _clipped_mean_hurst(source)
    if alpha is None:
        alpha = default_alpha(hurst_hat)
    incs = _driving_increments(dataset, samples, noise_mode, hurst_hat)
    losses = []
    for sample, inc in zip(samples, incs):
        traj = euler_rollout(
            model, sample.trajectory.states[0], inc, sample.trajectory.dt
        )
        stride = _coarse_stride(sample)
        diff = PathDiff(
            values=traj.states[::stride] - sample.observations.values,
            step=sample.observations.step,
            alpha=alpha,
        )
        losses.append(frac_path_norm(diff))
    losses = np.asarray(losses)
    recovery = None
    if field_true is not None:
        horizon = float(samples[0].trajectory.times[-1])
        times, states = uniform_eval_points(
            horizon, dataset.eval_box, dataset.dimension, n_eval, eval_seed
        )
        recovery = recovery_metrics(model, field_true, times, states)
    return EvalReport(
        loss_mean=float(losses.mean()),
        loss_std=float(losses.std(ddof=1)) if losses.size > 1 else 0.0,
        n_paths=losses.size,
        alpha=float(alpha),
        recovery=recovery,
    )
