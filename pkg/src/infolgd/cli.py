"""Command-line entry point.

Subcommands ``generate``, ``rank-features``, ``fit``, ``predict`` and
``compare`` share one declarative YAML config plus flag overrides (flags win).
Exit codes: 0 success, 1 validation error, 2 IO error, 3 invariant violation.

Example config::

    seed: 7
    output_dir: runs/seed7
    cv_k: 10
    mixture:               # overrides on top of the default mixture
      pi_proxy: 0.9
      proxy_component: {leverage_link: 0.5}
    models: [info, industry, size, linear, {family: forest, hyperparameters: {n_trees: 100}}]
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .baselines import FAMILY_ORDER, Family, ModelSpec, fit, model_from_dict
from .dataset import Dataset, apply_filters, load_dataset, write_dataset
from .evaluate import FULL_FIT_FOLD, InvariantViolation, config_digest, data_digest, model_seed, rank_features, run_comparison
from .report import emit_report
from .synthgen import MixtureConfig, default_paper_config, generate

COMMANDS = ("generate", "rank-features", "fit", "predict", "compare")
EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_INVARIANT = 0, 1, 2, 3
CONFIG_KEYS = {"command", "input_path", "output_dir", "seed", "mixture", "models", "cv_k", "model_path"}


class ConfigError(ValueError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class RunConfig:
    command: str
    output_dir: Path
    seed: int = 0
    input_path: Optional[Path] = None
    mixture: Optional[MixtureConfig] = None
    models: list = field(default_factory=list)
    cv_k: int = 10
    model_path: Optional[Path] = None

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "input_path": str(self.input_path) if self.input_path else None,
            "output_dir": str(self.output_dir),
            "seed": self.seed,
            "mixture": self.mixture.to_dict() if self.mixture else None,
            "models": [m.to_dict() for m in self.models],
            "cv_k": self.cv_k,
            "model_path": str(self.model_path) if self.model_path else None,
        }


# -- config resolution -----------------------------------------------------


def _merge(base: dict, over: dict, path: str) -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if key not in out:
            raise ConfigError(f"{path}.{key}", "unknown field")
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}.{key}", "expected a mapping")
            out[key] = _merge(out[key], value, f"{path}.{key}")
        else:
            out[key] = value
    return out


def _mixture(raw, seed: int) -> MixtureConfig:
    base = default_paper_config(seed).to_dict()
    if raw in (None, "default", True):
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("mixture", "expected a mapping or 'default'")
    merged = _merge(base, raw, "mixture")
    merged["seed"] = seed
    try:
        return MixtureConfig.from_dict(merged)
    except (TypeError, ValueError) as exc:
        raise ConfigError("mixture", str(exc)) from exc


def _models(raw) -> list:
    if raw is None:
        return [ModelSpec(f) for f in FAMILY_ORDER]
    if isinstance(raw, (str, dict)):
        raw = [raw]
    if not isinstance(raw, list):
        raise ConfigError("models", "expected a list")
    specs = []
    for i, item in enumerate(raw):
        try:
            if isinstance(item, str):
                specs.append(ModelSpec(Family(item)))
            elif isinstance(item, dict):
                specs.append(ModelSpec.from_dict(item))
            else:
                raise ValueError(f"unrecognised model entry {item!r}")
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"models[{i}]", str(exc)) from exc
    return specs


def _seed(value) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 2**64:
        raise ConfigError("seed", f"expected an unsigned 64-bit integer, got {value!r}")
    return value


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config", f"{path}: top level must be a mapping")
    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    return raw


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Combine the config file (if any) with flags; flags win."""
    raw = load_config_file(args.config) if args.config else {}
    command = args.command
    if raw.get("command") not in (None, command):
        raise ConfigError("command", f"config is for {raw['command']!r}, invoked as {command!r}")

    seed = _seed(args.seed if args.seed is not None else raw.get("seed", 0))
    out = args.out if args.out is not None else raw.get("output_dir")
    if out is None:
        raise ConfigError("output_dir", "required (use --out)")
    input_path = args.input if args.input is not None else raw.get("input_path")
    cv_k = args.folds if args.folds is not None else raw.get("cv_k", 10)
    if isinstance(cv_k, bool) or not isinstance(cv_k, int) or cv_k < 2:
        raise ConfigError("cv_k", f"expected an integer >= 2, got {cv_k!r}")

    model_path = raw.get("model_path")
    models_raw = raw.get("models")
    if args.model is not None:
        if command == "predict":
            model_path = args.model
        else:
            models_raw = args.model
    if command == "fit" and models_raw is None:
        models_raw = [Family.INFO.value]
    models = _models(models_raw)

    mixture = None
    if "mixture" in raw or (command in ("generate", "rank-features", "fit", "compare") and input_path is None):
        mixture = _mixture(raw.get("mixture"), seed)

    cfg = RunConfig(
        command=command,
        output_dir=Path(out),
        seed=seed,
        input_path=Path(input_path) if input_path is not None else None,
        mixture=mixture,
        models=models,
        cv_k=cv_k,
        model_path=Path(model_path) if model_path is not None else None,
    )
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.command not in COMMANDS:
        raise ConfigError("command", f"unknown command {cfg.command!r}")
    if cfg.command == "generate" and cfg.mixture is None:
        raise ConfigError("mixture", "generate requires a mixture")
    if cfg.command in ("fit", "compare", "rank-features") and cfg.input_path is None and cfg.mixture is None:
        raise ConfigError("input_path", f"{cfg.command} requires input_path or mixture")
    if cfg.command == "predict":
        if cfg.input_path is None:
            raise ConfigError("input_path", "predict requires input_path")
        if cfg.model_path is None:
            raise ConfigError("model_path", "predict requires a fitted model file (--model)")
    if cfg.command == "fit" and len(cfg.models) != 1:
        raise ConfigError("models", "fit takes exactly one model")
    if cfg.command == "compare":
        if not cfg.models:
            raise ConfigError("models", "compare needs at least one model")
        families = [m.family for m in cfg.models]
        if len(set(families)) != len(families):
            raise ConfigError("models", "each family may appear once")


# -- commands --------------------------------------------------------------


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _data(cfg: RunConfig) -> Dataset:
    if cfg.input_path is not None:
        data, _ = apply_filters(load_dataset(cfg.input_path))
        return data
    return generate(cfg.mixture)


def cmd_generate(cfg: RunConfig) -> list:
    data = generate(cfg.mixture)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    csv_path = cfg.output_dir / "dataset.csv"
    side_path = cfg.output_dir / "dataset.json"
    write_dataset(data.records, csv_path)
    side_path.write_text(
        _dump({"config_digest": config_digest(data, [], 0, cfg.seed), "mixture": cfg.mixture.to_dict(),
               "seed": cfg.seed, "n": len(data), "data_digest": data_digest(data)}),
        encoding="utf-8",
    )
    return [csv_path, side_path]


def cmd_rank_features(cfg: RunConfig) -> list:
    data = _data(cfg)
    digest = config_digest(data, [], 0, cfg.seed)
    rows = rank_features(data)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / "feature_ranking.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["config_digest", "rank", "feature", "mi_bits", "mi_bits_plugin", "r2_ceiling"])
        for i, r in enumerate(rows, start=1):
            w.writerow([digest, i, r["feature"], repr(r["mi_bits"]), repr(r["mi_bits_plugin"]), repr(r["r2_ceiling"])])
    for i, r in enumerate(rows, start=1):
        print(f"{i:2d}. {r['feature']:<18} {r['mi_bits']:.3f} bits")
    return [path]


def cmd_fit(cfg: RunConfig) -> list:
    data = _data(cfg)
    spec = cfg.models[0]
    model = fit(spec, data, seed=model_seed(cfg.seed, spec.family, FULL_FIT_FOLD))
    payload = model.to_dict()
    payload["config_digest"] = config_digest(data, [spec], 0, cfg.seed)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / f"model_{spec.family.value}.json"
    path.write_text(_dump(payload), encoding="utf-8")
    return [path]


def cmd_predict(cfg: RunConfig) -> list:
    try:
        model_text = cfg.model_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read model {cfg.model_path}: {exc.strerror or exc}") from exc
    try:
        model = model_from_dict(json.loads(model_text))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError("model_path", f"{cfg.model_path}: not a fitted model file ({exc})") from exc
    data, _ = apply_filters(load_dataset(cfg.input_path))
    pred = model.predict(data)
    h = hashlib.sha256()
    h.update(data_digest(data).encode())
    h.update(hashlib.sha256(model_text.encode()).hexdigest().encode())
    digest = h.hexdigest()
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / "predictions.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["config_digest", "firm_id", "prediction"])
        for fid, p in zip(data.firm_ids(), pred):
            w.writerow([digest, fid, repr(float(p))])
    return [path]


def cmd_compare(cfg: RunConfig) -> list:
    data = _data(cfg)
    report = run_comparison(data, cfg.models, k=cfg.cv_k, seed=cfg.seed)
    paths = emit_report(report, cfg.output_dir)
    for fam in report.ranking("rmse"):
        r = report.results[fam].mean
        print(f"{fam:<9} rmse {r.rmse:.4f}  r2 {r.r2:+.4f}  mae {r.mae:.4f}")
    return paths


HANDLERS = {
    "generate": cmd_generate,
    "rank-features": cmd_rank_features,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "compare": cmd_compare,
}


def run(cfg: RunConfig) -> list:
    validate(cfg)
    return HANDLERS[cfg.command](cfg)


# -- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infolgd", description="LGD modelling under proxy-contaminated labels")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="input dataset CSV")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--config", help="YAML run config")
    common.add_argument(
        "--model",
        help="model family (fit, compare: comma-separated) or fitted model JSON (predict)",
    )
    common.add_argument("--folds", type=int, help="number of CV folds")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.model is not None and args.command != "predict":
        args.model = [m.strip() for m in args.model.split(",") if m.strip()]
    try:
        cfg = resolve_config(args)
        print(_dump({"resolved_config": cfg.to_dict()}), end="", file=sys.stderr)
        paths = run(cfg)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
