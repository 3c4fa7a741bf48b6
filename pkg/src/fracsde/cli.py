"""Command-line entry point: simulation, estimation, training, and sweeps.

Usage:

    fracsde SUBCOMMAND [--config FILE] [key=value ...]

Configuration is a flat key=value namespace per subcommand.  An optional
config file supplies baseline values (one ``key=value`` per line, ``#``
comments allowed); command-line pairs override it, later entries win.
Unknown keys and malformed values exit with code 2 and a message naming the
offending key; runtime failures exit with code 1.  Every run that writes
files records a ``manifest.json`` with the resolved configuration, master
seed, and package version, so a run can be reproduced byte for byte.
"""

from __future__ import annotations

import os
import sys

import numpy as np

from . import __version__
from .experiments import fitting_sweep, time_sweep, width_sweep
from .fields import benchmark_1d, benchmark_2d
from .hurst import estimate_hurst
from .net import load_checkpoint, neural_field, save_checkpoint
from .sde import generate_dataset, load_dataset, save_dataset
from .selftest import run_selftest
from .serialize import dump_json, dumps_json, write_csv
from .train import TrainConfig, evaluate, train

__all__ = ["main", "ConfigError"]


class ConfigError(ValueError):
    """Raised for unknown keys, bad values, or missing required keys."""


_REQUIRED = object()


def _int(text: str) -> int:
    try:
        return int(text, 10)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None
    if not np.isfinite(value):
        raise ValueError(f"expected a finite number, got {text!r}")
    return value


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _str(text: str) -> str:
    return text


def _opt_float(text: str) -> float | None:
    if text.strip().lower() in ("auto", "none"):
        return None
    return _float(text)


def _opt_int(text: str) -> int | None:
    if text.strip().lower() in ("auto", "none"):
        return None
    return _int(text)


def _int_list(text: str) -> list[int]:
    items = [part for part in text.split(",") if part.strip()]
    if not items:
        raise ValueError("expected a comma-separated list of integers")
    return [_int(part.strip()) for part in items]


def _float_list(text: str) -> list[float]:
    items = [part for part in text.split(",") if part.strip()]
    if not items:
        raise ValueError("expected a comma-separated list of numbers")
    return [_float(part.strip()) for part in items]


def _choice(*allowed: str):
    def convert(text: str) -> str:
        if text not in allowed:
            raise ValueError(f"expected one of {', '.join(allowed)}; got {text!r}")
        return text

    return convert


_MVN_KEYS = {
    "truncation_factor": (50.0, _float),
    "refinement": (8, _int),
    "far_factor": (1e5, _float),
    "far_ratio": (1.05, _float),
}

_SPECS: dict[str, dict[str, tuple]] = {
    "simulate": {
        "out": (_REQUIRED, _str),
        "seed": (0, _int),
        "field": ("benchmark-1d", _choice("benchmark-1d", "benchmark-2d")),
        "hurst": (0.7, _float),
        "delta_hat": (0.05, _float),
        "k": (4, _int),
        "n_coarse": (20, _int),
        "n_train": (100, _int),
        "n_val": (28, _int),
        "n_test": (32, _int),
        "box": (4.0, _float),
        "noise": ("davies-harte", _choice("davies-harte", "mvn")),
        **_MVN_KEYS,
    },
    "estimate-hurst": {
        "input": (_REQUIRED, _str),
        "component": (None, _opt_int),
        "out": (None, _str),
        "seed": (0, _int),
    },
    "train": {
        "data": (_REQUIRED, _str),
        "out": (_REQUIRED, _str),
        "seed": (0, _int),
        "width": (128, _int),
        "alpha": (None, _opt_float),
        "learning_rate": (2e-3, _float),
        "weight_decay": (1e-4, _float),
        "clip_bound": (5.0, _float),
        "max_epochs": (800, _int),
        "patience": (100, _int),
        "group_size": (20, _int),
        "noise_mode": ("oracle", _choice("oracle", "coupled")),
    },
    "evaluate": {
        "data": (_REQUIRED, _str),
        "checkpoint": (_REQUIRED, _str),
        "out": (_REQUIRED, _str),
        "seed": (0, _int),
        "split": ("test", _choice("train", "val", "test")),
        "alpha": (None, _opt_float),
        "noise_mode": ("oracle", _choice("oracle", "coupled")),
        "field": ("auto", _choice("auto", "benchmark-1d", "benchmark-2d", "none")),
        "n_eval": (4096, _int),
    },
    "sweep-width": {
        "out": (_REQUIRED, _str),
        "seed": (0, _int),
        "widths": ([8, 16, 32, 64, 128], _int_list),
        "replicas": (3, _int),
        "hurst": (0.7, _float),
        "max_epochs": (120, _int),
        "patience": (120, _int),
    },
    "sweep-fitting": {
        "out": (_REQUIRED, _str),
        "seed": (0, _int),
        "ms": ([250, 500, 1000, 2000, 4000], _int_list),
        "replicas": (200, _int),
        "hurst": (0.7, _float),
        "gamma": (0.51, _float),
        **_MVN_KEYS,
    },
    "sweep-time": {
        "out": (_REQUIRED, _str),
        "seed": (0, _int),
        "dts": ([1.0 / 8192.0, 1.0 / 4096.0, 1.0 / 2048.0, 1.0 / 1024.0], _float_list),
        "replicas": (100, _int),
        "hurst": (0.7, _float),
        "horizon": (1.0, _float),
        "zero_diffusion": (False, _bool),
    },
    "selftest": {
        "seed": (0, _int),
        "out": (None, _str),
    },
}

_FIELDS = {"benchmark-1d": benchmark_1d, "benchmark-2d": benchmark_2d}


def _parse_pair(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise ConfigError(f"expected key=value, got {text!r}")
    key, _, value = text.partition("=")
    key = key.strip()
    if not key:
        raise ConfigError(f"empty key in {text!r}")
    return key, value.strip()


def _read_config_file(path: str) -> list[tuple[str, str]]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    pairs = []
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if line:
            pairs.append(_parse_pair(line))
    return pairs


def _resolve(subcommand: str, pairs: list[tuple[str, str]]) -> dict:
    spec = _SPECS[subcommand]
    config = {key: default for key, (default, _) in spec.items()}
    for key, text in pairs:
        if key not in spec:
            raise ConfigError(f"unknown key {key!r} for subcommand {subcommand}")
        _, convert = spec[key]
        try:
            config[key] = convert(text)
        except ValueError as exc:
            raise ConfigError(f"bad value for key {key!r}: {exc}") from None
    for key, value in config.items():
        if value is _REQUIRED:
            raise ConfigError(f"missing required key {key!r} for subcommand {subcommand}")
    return config


def _manifest_config(config: dict) -> dict:
    return {key: value for key, value in config.items() if key != "out"}


def _write_manifest(outdir: str, subcommand: str, config: dict, outputs: list[str]) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": _manifest_config(config),
        "seed": config.get("seed", 0),
        "version": __version__,
        "outputs": sorted(outputs),
    }
    dump_json(manifest, os.path.join(outdir, "manifest.json"))


def _ensure_outdir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _cmd_simulate(config: dict) -> int:
    out = _ensure_outdir(config["out"])
    dataset = generate_dataset(
        _FIELDS[config["field"]](),
        hurst=config["hurst"],
        delta_hat=config["delta_hat"],
        k=config["k"],
        n_coarse=config["n_coarse"],
        counts=(config["n_train"], config["n_val"], config["n_test"]),
        box=config["box"],
        seed=config["seed"],
        noise=config["noise"],
        truncation_factor=config["truncation_factor"],
        refinement=config["refinement"],
        far_factor=config["far_factor"],
        far_ratio=config["far_ratio"],
    )
    dataset.config["field"] = config["field"]
    total = len(dataset.all_samples())
    outputs = [f"fine_{i:04d}.csv" for i in range(total)]
    outputs += [f"coarse_{i:04d}.csv" for i in range(total)]
    save_dataset(
        dataset,
        out,
        extra={
            "subcommand": "simulate",
            "seed": config["seed"],
            "version": __version__,
            "outputs": sorted(outputs),
        },
    )
    print(f"wrote {total} trajectories to {out}")
    return 0


def _cmd_estimate_hurst(config: dict) -> int:
    path = config["input"]
    if os.path.isdir(path):
        raise ConfigError(
            f"key 'input' must name a trajectory CSV file, got directory {path}"
        )
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(header) or data.shape[1] < 2:
        raise ValueError(f"{path} needs a time column plus at least one value column")
    # state columns only: skip time and any increment (dB_*) columns
    keep = [
        i
        for i, name in enumerate(header)
        if i > 0 and not name.strip().startswith("dB")
    ]
    series = data[:, keep]
    if series.shape[1] == 1:
        series = series[:, 0]
    est = estimate_hurst(series, component=config["component"])
    record = {"hurst": est.value, "raw": est.raw, "n": est.n, "clipped": est.clipped}
    print(dumps_json(record))
    if config["out"] is not None:
        out = _ensure_outdir(config["out"])
        dump_json(record, os.path.join(out, "hurst.json"))
        _write_manifest(out, "estimate-hurst", config, ["hurst.json"])
    return 0


def _train_config(config: dict) -> TrainConfig:
    return TrainConfig(
        width=config["width"],
        alpha=config["alpha"],
        learning_rate=config["learning_rate"],
        weight_decay=config["weight_decay"],
        clip_bound=config["clip_bound"],
        max_epochs=config["max_epochs"],
        patience=config["patience"],
        group_size=config["group_size"],
        noise_mode=config["noise_mode"],
        seed=config["seed"],
    )


def _true_field(dataset, name: str):
    if name == "none":
        return None
    if name == "auto":
        name = dataset.config.get("field", "none")
        if name == "none":
            return None
    return _FIELDS[name]()


def _cmd_train(config: dict) -> int:
    dataset = load_dataset(config["data"])
    out = _ensure_outdir(config["out"])
    result = train(dataset, _train_config(config))
    history = result.history
    save_checkpoint(
        os.path.join(out, "checkpoint.json"),
        result.drift,
        result.diffusion,
        result.adam_drift,
        result.adam_diffusion,
        config=_manifest_config(config),
        extra={
            "best_epoch": history.best_epoch,
            "hurst_estimate": history.hurst_estimate,
            "alpha": history.alpha,
        },
    )
    write_csv(
        os.path.join(out, "history.csv"),
        ["epoch", "train_loss", "val_loss"],
        (
            (epoch, tr, vl)
            for epoch, (tr, vl) in enumerate(zip(history.train_loss, history.val_loss))
        ),
    )
    field_true = _true_field(dataset, "auto")
    report = evaluate(
        result.field(),
        dataset,
        split="test",
        alpha=history.alpha,
        field_true=field_true,
        noise_mode=config["noise_mode"],
    )
    record = {
        "test": report.to_dict(),
        "hurst_estimate": history.hurst_estimate,
        "hurst_raw": history.hurst_raw,
        "alpha": history.alpha,
        "best_epoch": history.best_epoch,
        "n_epochs": history.n_epochs,
        "best_val_loss": min(history.val_loss),
        "wall_seconds": history.wall_seconds,
    }
    dump_json(record, os.path.join(out, "report.json"))
    _write_manifest(out, "train", config, ["checkpoint.json", "history.csv", "report.json"])
    print(
        f"trained {history.n_epochs} epochs (best {history.best_epoch}); "
        f"test loss {report.loss_mean:.6f}"
    )
    return 0


def _cmd_evaluate(config: dict) -> int:
    dataset = load_dataset(config["data"])
    checkpoint = load_checkpoint(config["checkpoint"])
    out = _ensure_outdir(config["out"])
    model = neural_field(checkpoint.drift, checkpoint.diffusion)
    report = evaluate(
        model,
        dataset,
        split=config["split"],
        alpha=config["alpha"],
        field_true=_true_field(dataset, config["field"]),
        noise_mode=config["noise_mode"],
        n_eval=config["n_eval"],
        eval_seed=config["seed"],
    )
    record = {"split": config["split"], **report.to_dict()}
    dump_json(record, os.path.join(out, "report.json"))
    _write_manifest(out, "evaluate", config, ["report.json"])
    print(dumps_json(record))
    return 0


def _cmd_sweep_width(config: dict) -> int:
    out = _ensure_outdir(config["out"])
    table = width_sweep(
        config["widths"],
        replicas=config["replicas"],
        seed=config["seed"],
        hurst=config["hurst"],
        max_epochs=config["max_epochs"],
        patience=config["patience"],
        outdir=out,
    )
    _write_manifest(out, "sweep-width", config, ["sweep_width.csv", "sweep_width.json"])
    print(f"width sweep slope {table.slope:.3f} (reference {table.slope_reference})")
    return 0


def _cmd_sweep_fitting(config: dict) -> int:
    out = _ensure_outdir(config["out"])
    table = fitting_sweep(
        config["ms"],
        replicas=config["replicas"],
        seed=config["seed"],
        hurst=config["hurst"],
        gamma=config["gamma"],
        truncation_factor=config["truncation_factor"],
        refinement=config["refinement"],
        far_factor=config["far_factor"],
        far_ratio=config["far_ratio"],
        outdir=out,
    )
    _write_manifest(out, "sweep-fitting", config, ["sweep_fitting.csv", "sweep_fitting.json"])
    print(f"fitting sweep slope {table.slope:.3f} (reference {table.slope_reference})")
    return 0


def _cmd_sweep_time(config: dict) -> int:
    out = _ensure_outdir(config["out"])
    table = time_sweep(
        config["dts"],
        replicas=config["replicas"],
        seed=config["seed"],
        hurst=config["hurst"],
        horizon=config["horizon"],
        zero_diffusion=config["zero_diffusion"],
        outdir=out,
    )
    _write_manifest(out, "sweep-time", config, ["sweep_time.csv", "sweep_time.json"])
    print(f"time sweep slope {table.slope:.3f} (reference {table.slope_reference})")
    return 0


def _cmd_selftest(config: dict) -> int:
    results = run_selftest(config["seed"])
    for result in results:
        status = "ok" if result.ok else "FAIL"
        print(f"{status:4s} {result.name}: {result.detail}")
    n_failed = sum(not r.ok for r in results)
    if config["out"] is not None:
        out = _ensure_outdir(config["out"])
        dump_json(
            [{"name": r.name, "ok": r.ok, "detail": r.detail} for r in results],
            os.path.join(out, "selftest.json"),
        )
        _write_manifest(out, "selftest", config, ["selftest.json"])
    if n_failed:
        print(f"{n_failed} of {len(results)} suites failed")
        return 1
    print(f"all {len(results)} suites passed")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate-hurst": _cmd_estimate_hurst,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "sweep-width": _cmd_sweep_width,
    "sweep-fitting": _cmd_sweep_fitting,
    "sweep-time": _cmd_sweep_time,
    "selftest": _cmd_selftest,
}

_USAGE = (
    "usage: fracsde SUBCOMMAND [--config FILE] [key=value ...]\n"
    "subcommands: " + " | ".join(_COMMANDS)
)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print(_USAGE)
        return 0 if argv else 2
    subcommand = argv[0]
    try:
        if subcommand not in _COMMANDS:
            raise ConfigError(f"unknown subcommand {subcommand!r}\n{_USAGE}")
        pairs: list[tuple[str, str]] = []
        rest = argv[1:]
        i = 0
        while i < len(rest):
            arg = rest[i]
            if arg == "--config":
                if i + 1 >= len(rest):
                    raise ConfigError("--config requires a file path")
                pairs.extend(_read_config_file(rest[i + 1]))
                i += 2
            elif arg.startswith("--config="):
                pairs.extend(_read_config_file(arg.split("=", 1)[1]))
                i += 1
            else:
                pairs.append(_parse_pair(arg))
                i += 1
        config = _resolve(subcommand, pairs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[subcommand](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
