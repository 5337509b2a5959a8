"""Batch command line: ``ris-mimo run --config cfg.yaml --out results/``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, ScenarioConfig, config_from_dict, config_to_dict, load_config
from .power import PowerControlError
from .simulation import COMBINERS, emit_results, run_experiment

log = logging.getLogger("ris_mimo")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ris-mimo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a Monte Carlo experiment and write CSV results")
    run.add_argument("--config", required=True, help="YAML configuration file")
    run.add_argument("--seed", type=int, help="root seed (overrides the config)")
    run.add_argument("--out", default="results", help="output directory (default: results)")
    run.add_argument("--workers", type=int, default=1, help="worker processes (default: 1)")
    run.add_argument("--variant", action="append", dest="variants",
                     help="fading variant to run; repeat for several (default: config value)")
    run.add_argument("--combiner", choices=COMBINERS, action="append", dest="combiners",
                     help="combiner to evaluate; repeat for both (default: mr and rzf)")
    run.add_argument("--paper-scale", action="store_true",
                     help="use the full-size deployment (M=100, N=256, K=10, R=16)")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a config entry, e.g. --set trials.drops=10")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def _resolve_config(args) -> ScenarioConfig:
    config = load_config(args.config, args.set)
    if args.paper_scale:
        data = config_to_dict(config)
        data.update(M=100, N=256, K=10, R=16, tau_c=10_000, ris_shape=None)
        config = config_from_dict(data)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    return config


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        config = _resolve_config(args)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        result = run_experiment(config, args.variants, tuple(args.combiners or COMBINERS),
                                args.workers)
        paths = emit_results(result, args.out)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except PowerControlError as exc:
        print(f"error: power control failed: {exc}", file=sys.stderr)
        return 4
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    print(f"{len(result.rows)} SE samples written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
