"""Command-line entry point.

    sdctl <experiment-id> [--config PATH] [--key value ...]

Configuration comes from built-in defaults, then the optional key=value
config file, then any command-line flags (flags win).  Exit code 0 means
the run finished with every checked property holding, 2 flags a property
violation, and 1 an error.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import (EXPERIMENT_IDS, default_config, load_config_file,
                          parse_config_value, run_experiment)

_CONFIG_KEYS = ("outdir", "d", "n", "m", "T", "eta", "nu", "delta", "seed",
                "seeds", "n_list", "d_list", "ell", "ell_max", "degree", "biased")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdctl",
        description="Run a reproducible experiment and emit CSV data, an SVG "
                    "figure, a manifest, and bound reports.")
    parser.add_argument("experiment", choices=EXPERIMENT_IDS)
    parser.add_argument("--config", help="key=value configuration file")
    for key in _CONFIG_KEYS:
        parser.add_argument(f"--{key}", dest=key, default=None, metavar="VALUE")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = default_config(args.experiment)
        overrides = {}
        if args.config:
            overrides.update(load_config_file(args.config))
        for key in _CONFIG_KEYS:
            raw = getattr(args, key)
            if raw is not None:
                overrides[key] = parse_config_value(key, raw)
        if overrides:
            from dataclasses import replace
            config = replace(config, **overrides)
        result = run_experiment(config)
    except Exception as exc:  # noqa: BLE001  (CLI boundary)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for key, value in result.summary.items():
        print(f"{key}: {value}")
    if not result.passed:
        for violation in result.violations:
            print(f"VIOLATION: {violation}", file=sys.stderr)
        return 2
    print(f"ok: outputs in {result.outdir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
