"""Euler scheme, trajectory containers, dataset generation and rollout VJP.

A trajectory stores the fine-grid states together with the driving noise
increments that produced them, because training reuses those increments when
simulating the model ("oracle noise").  Observations are the same path seen
on a coarser grid with spacing step = k * dt_fine.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .fields import CoefficientField
from .net import (
    NetGrads,
    NetParams,
    _forward_from_inputs,
    _vjp_from_inputs,
    positive_diffusion,
    positive_diffusion_grad,
    zeros_like_grads,
)
from .noise import MvnCoupledSampler, davies_harte_increments
from .seeding import derive_rng, derive_seed
from .serialize import dump_json, load_json, write_csv

__all__ = [
    "Trajectory",
    "Observations",
    "Sample",
    "Dataset",
    "euler_rollout",
    "downsample",
    "generate_dataset",
    "rollout_vjp",
    "save_dataset",
    "load_dataset",
    "DEFAULT_COUNTS",
]

DEFAULT_COUNTS = (100, 28, 32)
NOISE_KINDS = ("davies-harte", "mvn")


@dataclass(frozen=True)
class Trajectory:
    """Fine-grid path with its driving increments; hurst records the driver."""

    times: np.ndarray
    states: np.ndarray
    increments: np.ndarray
    hurst: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        increments = np.asarray(self.increments, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("times must be a 1-d array with at least 2 entries")
        if states.ndim != 2 or states.shape[0] != times.size:
            raise ValueError(
                f"states must have shape (len(times), d), got {states.shape}"
            )
        if increments.shape != (times.size - 1, states.shape[1]):
            raise ValueError(
                f"increments must have shape {(times.size - 1, states.shape[1])}, "
                f"got {increments.shape}"
            )
        steps = np.diff(times)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("times must form a uniform grid")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "increments", increments)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    @property
    def n_steps(self) -> int:
        return self.times.size - 1


@dataclass(frozen=True)
class Observations:
    """Coarse-grid view of a path: values at spacing ``step``."""

    step: float
    values: np.ndarray

    def __post_init__(self):
        if not self.step > 0.0:
            raise ValueError(f"step must be positive, got {self.step}")
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 2:
            raise ValueError("values must have shape (M+1, d) with M >= 1")
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(self.values.shape[0])

    @property
    def n_obs(self) -> int:
        return self.values.shape[0] - 1


@dataclass(frozen=True)
class Sample:
    """One trajectory with its coarse view and the seeds of its noise streams.

    ``noise_seeds`` holds one sub-seed per state dimension; together with the
    dataset config they let the driving noise be regenerated exactly, which
    the coupled training mode uses to rebuild paths at a different Hurst
    exponent from the same white noise.
    """

    observations: Observations
    trajectory: Trajectory
    noise_seeds: tuple = ()


@dataclass
class Dataset:
    train: list
    val: list
    test: list
    config: dict
    eval_box: float

    @property
    def dimension(self) -> int:
        return self.train[0].trajectory.dimension if self.train else int(self.config["dimension"])

    def all_samples(self) -> list:
        return list(self.train) + list(self.val) + list(self.test)


def euler_rollout(
    field: CoefficientField,
    x0: np.ndarray,
    increments: np.ndarray,
    dt: float,
    t0: float = 0.0,
    hurst: float = float("nan"),
) -> Trajectory:
    """Explicit recursion X_{i+1} = X_i + b(t_i, X_i) dt + sigma(t_i, X_i) * dB_i."""
    x0 = np.asarray(x0, dtype=float)
    increments = np.asarray(increments, dtype=float)
    if x0.ndim != 1 or x0.size != field.dimension:
        raise ValueError(f"x0 must have shape ({field.dimension},), got {x0.shape}")
    if increments.ndim != 2 or increments.shape[1] != field.dimension:
        raise ValueError(
            f"increments must have shape (n, {field.dimension}), got {increments.shape}"
        )
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    n = increments.shape[0]
    states = np.empty((n + 1, field.dimension))
    states[0] = x0
    times = t0 + dt * np.arange(n + 1)
    for i in range(n):
        xi = states[i]
        step = field.drift(times[i], xi) * dt + field.diffusion(times[i], xi) * increments[i]
        nxt = xi + step
        if not np.all(np.isfinite(nxt)):
            raise RuntimeError(f"rollout produced non-finite state at step {i + 1}")
        states[i + 1] = nxt
    return Trajectory(times=times, states=states, increments=increments, hurst=hurst)


def downsample(trajectory: Trajectory, k: int) -> Observations:
    """Keep every k-th state; the fine step count must be divisible by k."""
    if k != int(k) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    k = int(k)
    if trajectory.n_steps % k != 0:
        raise ValueError(
            f"fine step count {trajectory.n_steps} is not divisible by k={k}"
        )
    return Observations(step=k * trajectory.dt, values=trajectory.states[::k].copy())


def _sample_increments(
    noise: str,
    hurst: float,
    n_steps: int,
    dt: float,
    dim_seeds,
    mvn_sampler: MvnCoupledSampler | None,
) -> np.ndarray:
    cols = []
    for sub in dim_seeds:
        if noise == "davies-harte":
            cols.append(davies_harte_increments(hurst, n_steps, dt, sub, n_paths=1)[0])
        else:
            values, _ = mvn_sampler.sample_batch(sub, n_paths=1)
            cols.append(np.diff(values[0]))
    return np.stack(cols, axis=1)


def generate_dataset(
    field: CoefficientField,
    hurst: float,
    delta_hat: float = 0.05,
    k: int = 4,
    n_coarse: int = 20,
    counts: tuple[int, int, int] = DEFAULT_COUNTS,
    box: float = 4.0,
    seed: int = 0,
    noise: str = "davies-harte",
    truncation_factor: float = 50.0,
    refinement: int = 8,
    far_factor: float = 1e5,
    far_ratio: float = 1.05,
) -> Dataset:
    """Simulate train/val/test trajectories of the given field.

    Initial states are standard normal clipped to [-box, box]^d.  Each fine
    path has n_coarse * k Euler steps of size delta_hat / k; observations keep
    every k-th state.  A trajectory that blows up is regenerated with a fresh
    sub-seed; more than 1% regenerations aborts.  The stored eval_box is the
    99.9% quantile of |state coordinate| over all fine states.
    """
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"hurst must lie in (0, 1), got {hurst}")
    if not delta_hat > 0.0:
        raise ValueError(f"delta_hat must be positive, got {delta_hat}")
    if k < 1 or k != int(k):
        raise ValueError(f"k must be a positive integer, got {k}")
    if n_coarse < 1:
        raise ValueError(f"n_coarse must be >= 1, got {n_coarse}")
    if len(counts) != 3 or any(c < 0 for c in counts) or sum(counts) < 1:
        raise ValueError(f"counts must be three nonnegative integers, got {counts}")
    if noise not in NOISE_KINDS:
        raise ValueError(f"noise must be one of {NOISE_KINDS}, got {noise!r}")
    dt_fine = delta_hat / k
    n_fine = n_coarse * k
    total = int(sum(counts))
    mvn_sampler = None
    if noise == "mvn":
        mvn_sampler = MvnCoupledSampler(
            hurst,
            hurst,
            n_fine,
            dt_fine,
            truncation_factor=truncation_factor,
            refinement=refinement,
            far_factor=far_factor,
            far_ratio=far_ratio,
        )
    samples = []
    regenerated = 0
    max_regen = max(1, int(math.ceil(0.01 * total)))
    for idx in range(total):
        attempt = 0
        while True:
            tag = idx if attempt == 0 else total * (attempt + 1) + idx
            x0 = derive_rng(seed, f"x0-a{attempt}", idx).standard_normal(field.dimension)
            x0 = np.clip(x0, -box, box)
            dim_seeds = tuple(
                derive_seed(seed, "noise", tag * field.dimension + c)
                for c in range(field.dimension)
            )
            increments = _sample_increments(
                noise, hurst, n_fine, dt_fine, dim_seeds, mvn_sampler
            )
            try:
                traj = euler_rollout(field, x0, increments, dt_fine, hurst=hurst)
                break
            except RuntimeError:
                regenerated += 1
                attempt += 1
                if regenerated > max_regen:
                    raise RuntimeError(
                        f"regenerated {regenerated} trajectories (> 1% of {total}); "
                        "the field appears unstable at this resolution"
                    )
        samples.append(
            Sample(
                observations=downsample(traj, k),
                trajectory=traj,
                noise_seeds=dim_seeds,
            )
        )
    all_states = np.concatenate([s.trajectory.states for s in samples], axis=0)
    eval_box = float(np.quantile(np.abs(all_states), 0.999))
    n_train, n_val, n_test = (int(c) for c in counts)
    config = {
        "dimension": field.dimension,
        "hurst": hurst,
        "delta_hat": delta_hat,
        "k": k,
        "n_coarse": n_coarse,
        "counts": [n_train, n_val, n_test],
        "box": box,
        "seed": int(seed),
        "noise": noise,
        "truncation_factor": truncation_factor,
        "refinement": refinement,
        "far_factor": far_factor,
        "far_ratio": far_ratio,
        "regenerated": regenerated,
    }
    return Dataset(
        train=samples[:n_train],
        val=samples[n_train : n_train + n_val],
        test=samples[n_train + n_val :],
        config=config,
        eval_box=eval_box,
    )


def _net_rollout_batch(
    drift: NetParams,
    diffusion: NetParams,
    x0s: np.ndarray,
    increments: np.ndarray,
    dt: float,
    t0: float = 0.0,
) -> np.ndarray:
    """(B, n+1, d) states of the two-network Euler recursion."""
    n_paths, n_steps, d = increments.shape
    states = np.empty((n_paths, n_steps + 1, d))
    states[:, 0, :] = x0s
    tcol = np.empty((n_paths, 1))
    for i in range(n_steps):
        tcol[:] = t0 + i * dt
        inputs = np.concatenate([tcol, states[:, i, :]], axis=1)
        b_val, _ = _forward_from_inputs(drift, inputs)
        raw, _ = _forward_from_inputs(diffusion, inputs)
        states[:, i + 1, :] = (
            states[:, i, :] + b_val * dt + positive_diffusion(raw) * increments[:, i, :]
        )
    if not np.all(np.isfinite(states)):
        raise RuntimeError("network rollout produced non-finite states")
    return states


def _rollout_vjp_batch(
    drift: NetParams,
    diffusion: NetParams,
    states: np.ndarray,
    increments: np.ndarray,
    dt: float,
    upstream: np.ndarray,
    t0: float = 0.0,
) -> tuple[NetGrads, NetGrads]:
    """Backward pass through the recursion, summed over the batch.

    ``states`` are the recorded forward states; activations are recomputed at
    those states, so the result is the exact gradient whenever the states came
    from the matching forward rollout.
    """
    n_paths, n_steps, d = increments.shape
    grads_b = zeros_like_grads(drift)
    grads_s = zeros_like_grads(diffusion)
    lam = upstream[:, n_steps, :].copy()
    tcol = np.empty((n_paths, 1))
    for i in range(n_steps - 1, -1, -1):
        tcol[:] = t0 + i * dt
        inputs = np.concatenate([tcol, states[:, i, :]], axis=1)
        raw, act_s = _forward_from_inputs(diffusion, inputs)
        _, act_b = _forward_from_inputs(drift, inputs)
        up_b = lam * dt
        up_s = lam * increments[:, i, :] * positive_diffusion_grad(raw)
        gb, gub = _vjp_from_inputs(drift, inputs, act_b, up_b)
        gs, gus = _vjp_from_inputs(diffusion, inputs, act_s, up_s)
        grads_b.add_(gb)
        grads_s.add_(gs)
        lam = lam + upstream[:, i, :] + gub[:, 1:] + gus[:, 1:]
    return grads_b, grads_s


def rollout_vjp(
    drift: NetParams,
    diffusion: NetParams,
    trajectory: Trajectory,
    upstream: np.ndarray,
) -> tuple[NetGrads, NetGrads]:
    """Parameter gradients of sum_i <upstream[i], X_i> along the recursion.

    The trajectory must be the Euler rollout of these two networks (diffusion
    through positive_diffusion) with its recorded increments.
    """
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != trajectory.states.shape:
        raise ValueError(
            f"upstream must match states shape {trajectory.states.shape}, "
            f"got {upstream.shape}"
        )
    return _rollout_vjp_batch(
        drift,
        diffusion,
        trajectory.states[None, :, :],
        trajectory.increments[None, :, :],
        trajectory.dt,
        upstream[None, :, :],
        t0=float(trajectory.times[0]),
    )


def save_dataset(dataset: Dataset, outdir, extra: dict | None = None) -> None:
    """Write manifest.json plus per-trajectory fine and coarse CSV files.

    Fine rows are t, x_1..x_d, dB_1..dB_d where the dB columns of row i hold
    the increment that produced the state at row i (row 0 holds zeros).
    ``extra`` entries are merged into the manifest top level; they must not
    collide with the dataset keys.
    """
    os.makedirs(outdir, exist_ok=True)
    samples = dataset.all_samples()
    d = dataset.dimension
    header_fine = ["t"] + [f"x_{c+1}" for c in range(d)] + [f"dB_{c+1}" for c in range(d)]
    header_coarse = ["t"] + [f"x_{c+1}" for c in range(d)]
    for idx, sample in enumerate(samples):
        traj, obs = sample.trajectory, sample.observations
        inc = np.concatenate([np.zeros((1, d)), traj.increments], axis=0)
        rows = np.concatenate([traj.times[:, None], traj.states, inc], axis=1)
        write_csv(os.path.join(outdir, f"fine_{idx:04d}.csv"), header_fine, rows)
        rows = np.concatenate([obs.times[:, None], obs.values], axis=1)
        write_csv(os.path.join(outdir, f"coarse_{idx:04d}.csv"), header_coarse, rows)
    n_train, n_val, n_test = (len(dataset.train), len(dataset.val), len(dataset.test))
    manifest = {
        "config": dataset.config,
        "eval_box": dataset.eval_box,
        "splits": {
            "train": list(range(n_train)),
            "val": list(range(n_train, n_train + n_val)),
            "test": list(range(n_train + n_val, n_train + n_val + n_test)),
        },
        "n_trajectories": len(samples),
        "noise_seeds": [list(s.noise_seeds) for s in samples],
    }
    if extra:
        clash = set(extra) & set(manifest)
        if clash:
            raise ValueError(f"extra manifest keys collide with dataset keys: {sorted(clash)}")
        manifest.update(extra)
    dump_json(manifest, os.path.join(outdir, "manifest.json"))


def _read_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def load_dataset(indir) -> Dataset:
    manifest = load_json(os.path.join(indir, "manifest.json"))
    config = manifest["config"]
    d = int(config["dimension"])
    hurst = float(config["hurst"])
    seed_lists = manifest.get("noise_seeds", [])
    samples = []
    for idx in range(int(manifest["n_trajectories"])):
        fine = _read_csv(os.path.join(indir, f"fine_{idx:04d}.csv"))
        coarse = _read_csv(os.path.join(indir, f"coarse_{idx:04d}.csv"))
        times = fine[:, 0]
        states = fine[:, 1 : 1 + d]
        increments = fine[1:, 1 + d : 1 + 2 * d]
        traj = Trajectory(times=times, states=states, increments=increments, hurst=hurst)
        step = coarse[1, 0] - coarse[0, 0]
        obs = Observations(step=float(step), values=coarse[:, 1 : 1 + d])
        seeds = tuple(seed_lists[idx]) if idx < len(seed_lists) else ()
        samples.append(Sample(observations=obs, trajectory=traj, noise_seeds=seeds))
    splits = manifest["splits"]
    return Dataset(
        train=[samples[i] for i in splits["train"]],
        val=[samples[i] for i in splits["val"]],
        test=[samples[i] for i in splits["test"]],
        config=config,
        eval_box=float(manifest["eval_box"]),
    )
