"""Error-decomposition sweeps: network width, Hurst fitting, time step.

Each sweep varies one control while holding the rest of the pipeline fixed,
records mean and std of the measured error per control value, fits a log-log
slope, and can persist results as CSV plus a JSON manifest.
"""

from __future__ import annotations

import os
import subprocess
from dataclasses import dataclass, field as dc_field

import numpy as np

from .fields import CoefficientField, benchmark_1d
from .hurst import DegenerateSeriesError, estimate_hurst
from .metrics import PathDiff, default_alpha, frac_path_norm
from .noise import MvnCoupledSampler, davies_harte_increments
from .sde import euler_rollout, generate_dataset
from .seeding import derive_rng, derive_seed
from .serialize import dump_json, write_csv
from .train import TrainConfig, train

__all__ = [
    "SweepTable",
    "loglog_slope",
    "width_sweep",
    "fitting_sweep",
    "time_sweep",
    "write_sweep",
]


@dataclass
class SweepTable:
    """Per-control error statistics with a fitted log-log slope.

    Slope fits are meaningful with three or more replicas per point; fewer
    are allowed for reduced smoke-scale runs.
    """

    name: str
    control: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    n: np.ndarray
    slope: float
    slope_reference: float
    overlay: np.ndarray | None = None
    config: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.control = np.asarray(self.control, dtype=float)
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        self.n = np.asarray(self.n, dtype=int)
        if not (self.control.shape == self.mean.shape == self.std.shape == self.n.shape):
            raise ValueError("control, mean, std, n must have matching shapes")
        if np.any(np.diff(self.control) <= 0.0):
            raise ValueError("control values must be strictly increasing")
        if self.overlay is not None:
            self.overlay = np.asarray(self.overlay, dtype=float)
            if self.overlay.shape != self.control.shape:
                raise ValueError("overlay must match control shape")

    def rows(self):
        for i in range(self.control.size):
            overlay = "" if self.overlay is None else self.overlay[i]
            yield (
                self.control[i],
                self.mean[i],
                self.std[i],
                int(self.n[i]),
                self.slope_reference,
                overlay,
            )


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ln y against ln x."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 2:
        raise ValueError("xs and ys must be 1-d arrays of equal length >= 2")
    if np.any(xs <= 0.0) or np.any(ys <= 0.0):
        raise ValueError("log-log slope needs strictly positive entries")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True,
            text=True,
            timeout=10,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return "unknown"


def write_sweep(table: SweepTable, outdir) -> tuple[str, str]:
    """Persist sweep_<name>.csv and sweep_<name>.json; returns the two paths."""
    os.makedirs(outdir, exist_ok=True)
    csv_path = os.path.join(outdir, f"sweep_{table.name}.csv")
    json_path = os.path.join(outdir, f"sweep_{table.name}.json")
    write_csv(csv_path, ["control", "mean", "std", "n", "slope_ref", "overlay"], table.rows())
    manifest = {
        "name": table.name,
        "config": table.config,
        "slope": table.slope,
        "slope_reference": table.slope_reference,
        "git_describe": _git_describe(),
    }
    dump_json(manifest, json_path)
    return csv_path, json_path


def width_sweep(
    widths,
    replicas: int = 3,
    seed: int = 0,
    hurst: float = 0.7,
    max_epochs: int = 120,
    patience: int = 120,
    outdir=None,
    dataset=None,
) -> SweepTable:
    """Validation loss of trained models as a function of hidden width.

    One shared 1D benchmark dataset (H = 0.7, step 0.05, k = 4); per width,
    ``replicas`` trainings with fresh init seeds.  The recorded error is the
    best validation loss.  A training abort persists partial results to
    ``outdir`` (if given) before re-raising.

    Every width trains under the same fixed modest budget (learning rate
    1e-3, group size 10, and by default 120 epochs with no early stop).
    With the driving increments known exactly the loss has no floor, so a
    long-enough run fits every width to near-zero error and the capacity
    comparison degenerates; a shared fixed budget keeps the per-epoch
    descent rate, which grows with width, as the quantity being measured.
    """
    widths = sorted(int(w) for w in widths)
    if not widths or widths[0] < 4 or widths[-1] > 1024:
        raise ValueError("widths must be within {4..1024}")
    if replicas < 1:
        raise ValueError(f"replicas must be >= 1, got {replicas}")
    field = benchmark_1d()
    if dataset is None:
        dataset = generate_dataset(field, hurst=hurst, seed=derive_seed(seed, "width-data"))
    alpha = default_alpha(hurst)
    config_info = {
        "widths": widths,
        "replicas": replicas,
        "seed": int(seed),
        "hurst": hurst,
        "alpha": alpha,
        "learning_rate": 1e-3,
        "group_size": 10,
        "max_epochs": max_epochs,
        "patience": patience,
        "dataset": dataset.config,
    }
    means, stds, ns, done = [], [], [], []
    try:
        for width in widths:
            losses = []
            for r in range(replicas):
                cfg = TrainConfig(
                    width=width,
                    alpha=alpha,
                    learning_rate=1e-3,
                    group_size=10,
                    max_epochs=max_epochs,
                    patience=patience,
                    seed=derive_seed(seed, f"width-{width}", r),
                )
                result = train(dataset, cfg)
                losses.append(min(result.history.val_loss))
            means.append(float(np.mean(losses)))
            stds.append(float(np.std(losses, ddof=1)) if len(losses) > 1 else 0.0)
            ns.append(len(losses))
            done.append(width)
    except Exception as exc:
        if outdir is not None and done:
            partial = SweepTable(
                name="width",
                control=done,
                mean=means,
                std=stds,
                n=ns,
                slope=float("nan") if len(done) < 2 else loglog_slope(done, means),
                slope_reference=-0.5,
                config={**config_info, "aborted": str(exc)},
            )
            write_sweep(partial, outdir)
        raise
    table = SweepTable(
        name="width",
        control=widths,
        mean=means,
        std=stds,
        n=ns,
        slope=loglog_slope(widths, means),
        slope_reference=-0.5,
        config=config_info,
    )
    if outdir is not None:
        write_sweep(table, outdir)
    return table


def _fitting_error_once(
    field: CoefficientField,
    hurst: float,
    n_obs: int,
    horizon: float,
    seed: int,
    alpha: float,
    mvn_options: dict,
    force_hurst: float | None = None,
    sampler: MvnCoupledSampler | None = None,
) -> float:
    """One replica of the Hurst-fitting error at resolution M = n_obs.

    Generates an observation path driven by B^H on the step T/M grid,
    estimates H from it (unless force_hurst is given), rebuilds the driving
    path at the estimated exponent from the same white noise, re-simulates
    with the true coefficients, and returns the fractional norm of the
    difference path.  A prebuilt sampler for (hurst, hurst, n_obs, step) may
    be passed to amortize kernel setup across replicas.
    """
    step = horizon / n_obs
    if sampler is None:
        sampler = MvnCoupledSampler(hurst, hurst, n_obs, step, **mvn_options)
    spectrum = sampler._noise_spectrum(seed)
    values_h = sampler._apply_kernel(spectrum)[0]
    x0 = np.clip(derive_rng(seed, "fit-x0").standard_normal(field.dimension), -4.0, 4.0)
    inc_h = np.diff(values_h)[:, None]
    data = euler_rollout(field, x0, inc_h, step, hurst=hurst)
    if force_hurst is None:
        hurst_hat = estimate_hurst(data.states[:, 0]).value
    else:
        hurst_hat = force_hurst
    kernel_hat = sampler._kernel_for(hurst_hat)
    values_hat = sampler._apply_kernel(spectrum, kernel_hat)[0]
    inc_hat = np.diff(values_hat)[:, None]
    resim = euler_rollout(field, x0, inc_hat, step, hurst=hurst_hat)
    diff = PathDiff(values=resim.states - data.states, step=step, alpha=alpha)
    return frac_path_norm(diff)


def fitting_sweep(
    ms,
    replicas: int = 200,
    seed: int = 0,
    hurst: float = 0.7,
    gamma: float = 0.51,
    truncation_factor: float = 50.0,
    refinement: int = 8,
    far_factor: float = 1e5,
    far_ratio: float = 1.05,
    outdir=None,
) -> SweepTable:
    """Hurst-fitting error against observation count M (infill, T = 1).

    Coefficients are the true 1D benchmark throughout; the only error source
    is replacing H by its estimate in the driving path while keeping the
    white noise fixed.  Degenerate Hurst estimates drop the replica and are
    counted in the per-point n column.  The overlay is C (log M / M)^{gamma/4}
    matched at the smallest M.
    """
    ms = sorted(int(m) for m in ms)
    if len(ms) < 1 or ms[0] < 9:
        raise ValueError("ms must contain values >= 9 (the estimator minimum)")
    if replicas < 1:
        raise ValueError(f"replicas must be >= 1, got {replicas}")
    field = benchmark_1d()
    alpha = default_alpha(hurst)
    mvn_options = dict(
        truncation_factor=truncation_factor,
        refinement=refinement,
        far_factor=far_factor,
        far_ratio=far_ratio,
    )
    means, stds, ns, dropped = [], [], [], []
    for m in ms:
        sampler = MvnCoupledSampler(hurst, hurst, m, 1.0 / m, **mvn_options)
        errors = []
        n_dropped = 0
        for r in range(replicas):
            sub = derive_seed(seed, f"fitting-m{m}", r)
            try:
                errors.append(
                    _fitting_error_once(
                        field, hurst, m, 1.0, sub, alpha, mvn_options, sampler=sampler
                    )
                )
            except DegenerateSeriesError:
                n_dropped += 1
        if not errors:
            raise RuntimeError(f"all replicas at M={m} were dropped")
        means.append(float(np.mean(errors)))
        stds.append(float(np.std(errors, ddof=1)) if len(errors) > 1 else 0.0)
        ns.append(len(errors))
        dropped.append(n_dropped)
    ms_arr = np.asarray(ms, dtype=float)
    bound = (np.log(ms_arr) / ms_arr) ** (gamma / 4.0)
    overlay = bound * (means[0] / bound[0])
    table = SweepTable(
        name="fitting",
        control=ms,
        mean=means,
        std=stds,
        n=ns,
        slope=loglog_slope(ms, means),
        slope_reference=-gamma / 4.0,
        overlay=overlay,
        config={
            "ms": ms,
            "replicas": replicas,
            "seed": int(seed),
            "hurst": hurst,
            "alpha": alpha,
            "gamma": gamma,
            "dropped": dropped,
            **mvn_options,
        },
    )
    if outdir is not None:
        write_sweep(table, outdir)
    return table


def _check_dyadic(dts) -> list[float]:
    dts = sorted(float(dt) for dt in dts)
    if len(dts) < 2:
        raise ValueError("time sweep needs at least 2 step sizes")
    base = dts[0]
    for dt in dts:
        ratio = dt / base
        k = round(np.log2(ratio))
        if abs(ratio - 2.0**k) > 1e-9 * ratio:
            raise ValueError(f"step sizes are not dyadically nested: {dt} vs base {base}")
    return dts


def time_sweep(
    dts,
    replicas: int = 100,
    seed: int = 0,
    hurst: float = 0.7,
    horizon: float = 1.0,
    zero_diffusion: bool = False,
    outdir=None,
) -> SweepTable:
    """Euler time-discretization error against a dt/8 reference solution.

    All resolutions consume the same underlying noise: coarse increments are
    sums of the nested reference increments.  The error per dt is the
    fractional norm of (coarse solution - reference) on the coarsest grid.
    With ``zero_diffusion`` the drift is linear and the noise is off, which
    reproduces the deterministic Euler order 1.
    """
    dts = _check_dyadic(dts)
    if replicas < 1:
        raise ValueError(f"replicas must be >= 1, got {replicas}")
    dt_ref = dts[0] / 8.0
    for dt in dts + [horizon]:
        steps = dt / dt_ref if dt != horizon else horizon / dt_ref
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError(f"horizon and steps must be multiples of dt_ref={dt_ref}")
    n_ref = int(round(horizon / dt_ref))
    if zero_diffusion:
        field = CoefficientField(
            dimension=1,
            drift=lambda t, x: -np.asarray(x, dtype=float),
            diffusion=lambda t, x: np.zeros_like(np.asarray(x, dtype=float)),
        )
    else:
        field = benchmark_1d()
    alpha = default_alpha(hurst)
    dt_max = dts[-1]
    stride_max = int(round(dt_max / dt_ref))
    errors = {dt: [] for dt in dts}
    for r in range(replicas):
        x0 = np.clip(derive_rng(seed, "time-x0", r).standard_normal(1), -4.0, 4.0)
        if zero_diffusion:
            inc_ref = np.zeros((n_ref, 1))
        else:
            sub = derive_seed(seed, "time-noise", r)
            inc_ref = davies_harte_increments(hurst, n_ref, dt_ref, sub, n_paths=1).T
        ref = euler_rollout(field, x0, inc_ref, dt_ref, hurst=hurst)
        ref_coarse = ref.states[::stride_max]
        for dt in dts:
            factor = int(round(dt / dt_ref))
            inc = inc_ref.reshape(-1, factor, 1).sum(axis=1)
            sol = euler_rollout(field, x0, inc, dt, hurst=hurst)
            stride = int(round(dt_max / dt))
            diff = PathDiff(
                values=sol.states[::stride] - ref_coarse, step=dt_max, alpha=alpha
            )
            errors[dt].append(frac_path_norm(diff))
    means = [float(np.mean(errors[dt])) for dt in dts]
    stds = [
        float(np.std(errors[dt], ddof=1)) if replicas > 1 else 0.0 for dt in dts
    ]
    reference = 1.0 if zero_diffusion else 2.0 * hurst - 1.0
    table = SweepTable(
        name="time",
        control=dts,
        mean=means,
        std=stds,
        n=[replicas] * len(dts),
        slope=loglog_slope(dts, means),
        slope_reference=reference,
        config={
            "dts": dts,
            "replicas": replicas,
            "seed": int(seed),
            "hurst": hurst,
            "alpha": alpha,
            "horizon": horizon,
            "zero_diffusion": zero_diffusion,
            "dt_reference": dt_ref,
        },
    )
    if outdir is not None:
        write_sweep(table, outdir)
    return table
