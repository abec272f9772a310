"""Command line front end: config parsing, orchestration, CSV output.

Configuration files are YAML with a flat top level: a `params` block
holding the model constants with units annotated per key, the
experiment name, a master seed, and one optional settings block per
experiment.  Unknown keys anywhere are rejected.  Example:

    params:
      gamma: "2.0e3 1/s"
      sigma0: "5.0e-8 m"
      m0: "1.0e-25 kg"
    experiment: force-scan
    seed: 42
    force-scan:
      r_points: 120

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import yaml

from .errors import CCGError, ConfigError, NumericalError
from .experiments import EXPERIMENTS, catalog, run_experiment
from .params import CCGParams, G_SI, HBAR_SI

_UNIT_ALIASES = {
    "gamma": {"1/s", "s^-1", "hz"},
    "sigma0": {"m"},
    "m0": {"kg"},
    "G": {"m^3/(kg s^2)", "m^3 kg^-1 s^-2", "m3 kg-1 s-2"},
    "hbar": {"j s", "j*s"},
}
_PARAM_DEFAULTS = {"G": G_SI, "hbar": HBAR_SI}


def _parse_quantity(key: str, raw) -> float:
    """Parse 'VALUE UNIT' with the unit checked against the key's role."""
    if not isinstance(raw, str):
        raise ConfigError(
            f"params.{key}: annotate the unit, e.g. \"1.0e3 {next(iter(_UNIT_ALIASES[key]))}\"")
    parts = raw.strip().split(None, 1)
    if len(parts) != 2:
        raise ConfigError(f"params.{key}: expected 'VALUE UNIT', got {raw!r}")
    try:
        value = float(parts[0])
    except ValueError as exc:
        raise ConfigError(f"params.{key}: bad number {parts[0]!r}") from exc
    unit = parts[1].strip().lower()
    allowed = {u.lower() for u in _UNIT_ALIASES[key]}
    if unit not in allowed:
        raise ConfigError(
            f"params.{key}: unit {parts[1]!r} does not match the expected role "
            f"({sorted(_UNIT_ALIASES[key])})")
    return value


def parse_params(block) -> CCGParams:
    if not isinstance(block, dict):
        raise ConfigError("params block must be a mapping")
    block = dict(block)
    values = {}
    for key in ("gamma", "sigma0", "m0"):
        if key not in block:
            raise ConfigError(f"params.{key} is required (the model has no default)")
        values[key] = _parse_quantity(key, block.pop(key))
    for key, default in _PARAM_DEFAULTS.items():
        values[key] = _parse_quantity(key, block.pop(key)) if key in block else default
    if block:
        raise ConfigError(f"params: unknown keys {sorted(block)}")
    try:
        return CCGParams(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _apply_override(config: dict, assignment: str) -> None:
    key, sep, raw = assignment.partition("=")
    if not sep:
        raise ConfigError(f"--set needs key=value, got {assignment!r}")
    value = yaml.safe_load(raw)
    target = config
    parts = key.strip().split(".")
    for part in parts[:-1]:
        target = target.setdefault(part, {})
        if not isinstance(target, dict):
            raise ConfigError(f"--set {key}: {part} is not a section")
    target[parts[-1]] = value


def load_config(path, overrides) -> dict:
    if path is None:
        config = {}
    else:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                config = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config root must be a mapping")
    for assignment in overrides or []:
        _apply_override(config, assignment)
    return config


def _validate_top_level(config: dict) -> None:
    allowed = {"params", "experiment", "seed", "output"} | set(EXPERIMENTS)
    unknown = set(config) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level config keys {sorted(unknown)}")


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccgsim",
        description="Measurement-feedback classical gravity channel simulations")
    parser.add_argument("--config", metavar="PATH", help="YAML configuration file")
    parser.add_argument("--experiment", metavar="NAME",
                        help="experiment to run (overrides the config)")
    parser.add_argument("--out", metavar="DIR", default=None,
                        help="output directory (default: config 'output' or 'out')")
    parser.add_argument("--seed", type=int, default=None, metavar="U64",
                        help="master seed (overrides the config)")
    parser.add_argument("--set", dest="overrides", action="append", metavar="KEY=VALUE",
                        help="override a config entry (repeatable, dotted keys)")
    parser.add_argument("--threads", type=int, default=1, metavar="N",
                        help="worker threads for chunked estimates")
    parser.add_argument("--list", action="store_true",
                        help="print the experiment catalog and exit")
    parser.add_argument("--format", choices=("text", "json"), default="text",
                        help="catalog format for --list")
    return parser


def _print_catalog(fmt: str) -> None:
    entries = catalog()
    if fmt == "json":
        print(json.dumps(entries, indent=2, sort_keys=True))
        return
    for e in entries:
        print(f"{e['name']}")
        print(f"    {e['description']}")
        print(f"    exercises: {e['exercises']}")
        if e["settings"]:
            keys = ", ".join(f"{k}={v['default']}" for k, v in sorted(e["settings"].items()))
            print(f"    settings: {keys}")
        print()


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    if args.list:
        _print_catalog(args.format)
        return 0
    try:
        config = load_config(args.config, args.overrides)
        _validate_top_level(config)
        name = args.experiment or config.get("experiment")
        if not name:
            raise ConfigError("no experiment given (use --experiment or the config)")
        if name not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {name!r}; try one of {sorted(EXPERIMENTS)}")
        if "params" not in config:
            raise ConfigError("config must provide a params block "
                              "(gamma, sigma0, m0 with units)")
        params = parse_params(config["params"])
        seed = args.seed if args.seed is not None else int(config.get("seed", 0))
        outdir = args.out or config.get("output") or "out"
        written = run_experiment(name, config.get(name, {}), params,
                                 seed=seed, threads=args.threads, outdir=outdir)
        for path in written:
            print(path)
        if name == "verify":
            from .csvio import read_csv
            table = read_csv(written[0])
            if not bool(table.column("passed").all()):
                return 1
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except CCGError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
