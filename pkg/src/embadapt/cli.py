"""Command-line entry point.

Subcommands: synth, train, eval, weights, bound, nn, ablate. A single
JSON config file carries every knob; flags override file values, and the
fully resolved snapshot is written next to the artifacts so any run can
be reproduced from its output directory alone. Reports are line-oriented
``metric=value`` text for diffable CI.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import nn as nn_mod
from . import pipeline, synth
from .losses import LossConfig
from .pipeline import TrainConfig


class ConfigError(Exception):
    pass


def _default_config() -> dict:
    """Stock configuration: the synthetic benchmark world and its recipe.

    The schedule and temperature differ from the full-scale embedding
    defaults on purpose; see the README's "configuration" section.
    """
    return {
        "seed": 0,
        "weighting": "inverse",
        "world": {
            "dim": 32,
            "num_classes": 5,
            "num_sources": 3,
            "samples_per_class": 100,
            "domain_shift": 0.2,
            "class_separation": 1.0,
            "noise_scale": 0.35,
            "class_mix": 8.0,
        },
        "train": {
            "epochs_stage1": 20,
            "epochs_stage2": 30,
            "lr_stage1": 1e-2,
            "lr_stage2": 1e-2,
            "milestones_stage1": [12, 17],
            "gamma_stage1": 0.5,
            "milestones_stage2": [10, 20],
            "gamma_stage2": 0.5,
            "batch_size": 100,
            "hidden": 64,
            "enable_class_alignment": True,
            "enable_distribution_consistency": True,
        },
        "loss": {
            "alpha": 1.0,
            "beta": 1.0,
            "gamma": 0.05,
            "lam": 1.0,
            "sigma": 1.0,
            "zeta": 10.0,
            "tau": 0.5,
            "eps_mix": 0.1,
            "ot_max_iter": 150,
            "ot_tol": 1e-6,
        },
        "bound": {"delta": 0.05, "sigma_prime": 1.0, "oracle_epochs": 5},
        "nn": {"domain": None, "count": 10},
    }


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config field '{where}'")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def _load_config(path: str | None) -> dict:
    cfg = _default_config()
    if path is None:
        return cfg
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return _merge(cfg, data)


def _train_config(cfg: dict) -> TrainConfig:
    try:
        loss = LossConfig(**cfg["loss"])
        t = cfg["train"]
        return TrainConfig(
            epochs_stage1=t["epochs_stage1"],
            epochs_stage2=t["epochs_stage2"],
            lr_stage1=t["lr_stage1"],
            lr_stage2=t["lr_stage2"],
            milestones_stage1=tuple(t["milestones_stage1"]),
            gamma_stage1=t["gamma_stage1"],
            milestones_stage2=tuple(t["milestones_stage2"]),
            gamma_stage2=t["gamma_stage2"],
            batch_size=t["batch_size"],
            hidden=t["hidden"],
            seed=cfg["seed"],
            loss=loss,
            enable_class_alignment=t["enable_class_alignment"],
            enable_distribution_consistency=t["enable_distribution_consistency"],
            weighting=cfg["weighting"],
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _world_spec(cfg: dict) -> synth.WorldSpec:
    try:
        return synth.WorldSpec(seed=cfg["seed"], **cfg["world"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"world: {exc}") from exc


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _emit_report(lines: dict, out_dir: Path | None, name: str) -> None:
    text = "".join(f"{key}={_format_value(value)}\n" for key, value in lines.items())
    sys.stdout.write(text)
    if out_dir is not None:
        (out_dir / name).write_text(text)


def _write_manifest(out_dir: Path, command: str, args, cfg: dict, timings: dict) -> None:
    manifest = {
        "command": command,
        "config_file": args.config,
        "seed": cfg["seed"],
        "out": str(out_dir),
        "config": cfg,
        "timings": timings,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    (out_dir / "config.resolved.json").write_text(
        json.dumps(cfg, indent=2, sort_keys=True) + "\n"
    )


def _require(args, field: str):
    value = getattr(args, field, None)
    if value is None:
        raise ConfigError(f"--{field} is required for this command")
    return value


def _load_world_checked(path: str):
    try:
        return synth.load_world(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"data directory is not a world layout: {exc}") from exc


def _eval_lines(sources, target, model) -> dict:
    lines = {}
    id_accs = []
    for ds in sources:
        res = pipeline.evaluate(ds, model, use_aggregation=False)
        lines[f"id_{ds.domain_name}_accuracy"] = res.accuracy
        id_accs.append(res.accuracy)
    if target is not None:
        od = pipeline.evaluate(target, model, use_aggregation=True).accuracy
        lines["od_accuracy"] = od
        lines["ext_accuracy"] = 0.5 * float(np.mean(id_accs)) + 0.5 * od
    return lines


def cmd_synth(args, cfg: dict) -> dict:
    out = Path(_require(args, "out"))
    out.mkdir(parents=True, exist_ok=True)
    sources, target, bank = synth.generate_world(_world_spec(cfg))
    synth.write_world(out, sources, target, bank)
    return {
        "sources": len(sources),
        "num_classes": bank.num_classes,
        "dim": bank.dim,
        "samples_per_domain": len(sources[0].labels),
    }


def cmd_train(args, cfg: dict) -> dict:
    out = Path(_require(args, "out"))
    out.mkdir(parents=True, exist_ok=True)
    sources, _, bank = _load_world_checked(_require(args, "data"))
    tcfg = _train_config(cfg)
    model, history = pipeline.train_full(sources, bank, tcfg)
    pipeline.save_model(out / "model", model)
    lines: dict = {}
    for name in model.source_names:
        first = history[name][0]["total"]
        last = history[name][-1]["total"]
        lines[f"stage1_{name}_loss_first_epoch"] = first
        lines[f"stage1_{name}_loss_last_epoch"] = last
    for name in model.source_names:
        lines[f"weight_{name}"] = model.weights[name]
    return lines


def cmd_eval(args, cfg: dict) -> dict:
    sources, target, _ = _load_world_checked(_require(args, "data"))
    model = pipeline.load_model(_require(args, "model"))
    return _eval_lines(sources, target, model)


def cmd_weights(args, cfg: dict) -> dict:
    _, _, bank = _load_world_checked(_require(args, "data"))
    loss = LossConfig(**cfg["loss"])
    lines = {}
    for mode in ("as-written", "inverse"):
        for name, w in pipeline.aggregation_weights(bank, loss, mode).items():
            lines[f"weight_{mode}_{name}"] = w
    return lines


def cmd_bound(args, cfg: dict) -> dict:
    sources, target, bank = _load_world_checked(_require(args, "data"))
    if target is None:
        raise ConfigError("bound diagnostic needs a world with held-out target samples")
    model = pipeline.load_model(_require(args, "model"))
    b = cfg["bound"]
    report = pipeline.generalization_bound(
        sources,
        target,
        model,
        bank,
        delta=b["delta"],
        sigma_prime=b["sigma_prime"],
        cfg=model.config,
        oracle_epochs=b["oracle_epochs"],
    )
    lines = {
        "source_error": report.source_error,
        "kernel_mean_norm": report.kernel_mean_norm,
        "pairwise_wasserstein": report.pairwise_wasserstein,
        "theta": report.theta,
        "rhs": report.rhs,
        "target_error": report.target_error,
        "slack": report.rhs - report.target_error,
    }
    for name, dev in report.deviation_terms.items():
        lines[f"deviation_{name}"] = dev
    return lines


def cmd_nn(args, cfg: dict) -> dict:
    sources, target, _ = _load_world_checked(_require(args, "data"))
    model = pipeline.load_model(_require(args, "model"))
    domain = cfg["nn"]["domain"] or sources[0].domain_name
    by_name = {ds.domain_name: ds for ds in sources}
    if domain not in by_name:
        raise ConfigError(f"nn.domain {domain!r} is not a source domain")
    if target is None:
        raise ConfigError("nearest-neighbor dump needs target samples")
    count = min(cfg["nn"]["count"], len(target.labels))
    lines: dict = {"domain": domain, "count": count}
    aug = model.augmenters[domain]
    for i in range(count):
        query = target.embeddings.f64()[i]
        raw_idx, raw_dist = pipeline.nearest_neighbor(query, by_name[domain])
        aug_idx, aug_dist = pipeline.nearest_neighbor(query, by_name[domain], aug)
        lines[f"query{i}_raw_index"] = raw_idx
        lines[f"query{i}_raw_distance"] = raw_dist
        lines[f"query{i}_augmented_index"] = aug_idx
        lines[f"query{i}_augmented_distance"] = aug_dist
    return lines


def cmd_ablate(args, cfg: dict) -> dict:
    sources, target, bank = _load_world_checked(_require(args, "data"))
    if target is None:
        raise ConfigError("ablation needs a world with held-out target samples")
    tcfg = _train_config(cfg)
    variants = (
        [args.ablation] if getattr(args, "ablation", None) else list(pipeline.ABLATION_VARIANTS)
    )
    lines: dict = {}
    for variant in variants:
        metrics = pipeline.run_ablation(sources, target, bank, tcfg, variant)
        for key, value in metrics.items():
            lines[f"ablation_{variant}_{key}"] = value
    return lines


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "weights": cmd_weights,
    "bound": cmd_bound,
    "nn": cmd_nn,
    "ablate": cmd_ablate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embadapt",
        description="Language-guided multi-source domain adaptation in embedding space.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("synth", "generate a synthetic embedding world"),
        ("train", "train augmenters and the linear head (stages 1+2)"),
        ("eval", "report in-domain / out-of-domain / combined accuracy"),
        ("weights", "print aggregation weights in both modes"),
        ("bound", "assemble the target-error bound report"),
        ("nn", "nearest-neighbor dump for target queries"),
        ("ablate", "run the A-D ablation configurations"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="seed overriding the config value")
        p.add_argument("--out", help="output directory for artifacts and reports")
        p.add_argument("--data", help="world/data directory")
        p.add_argument("--model", help="model checkpoint directory")
        p.add_argument("--weighting", choices=["as-written", "inverse"])
        p.add_argument("--zeta", type=float, help="override loss.zeta")
        p.add_argument("--tau", type=float, help="override loss.tau")
        if name == "ablate":
            p.add_argument("--ablation", choices=list(pipeline.ABLATION_VARIANTS))
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.weighting is not None:
            cfg["weighting"] = args.weighting
        if args.zeta is not None:
            cfg["loss"]["zeta"] = args.zeta
        if args.tau is not None:
            cfg["loss"]["tau"] = args.tau
        started = time.perf_counter()
        lines = COMMANDS[args.command](args, cfg)
        elapsed = time.perf_counter() - started
        out_dir = Path(args.out) if args.out else None
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
        _emit_report(lines, out_dir, f"{args.command}_report.txt")
        if out_dir is not None:
            _write_manifest(out_dir, args.command, args, cfg, {args.command: elapsed})
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
