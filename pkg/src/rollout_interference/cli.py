"""Command-line entry point.

Subcommands ``select``, ``identify``, ``variance``, and ``sparsity`` run the
corresponding study from a JSON config (or built-in desk-scale defaults) and
write records.csv, summary.json, sweep.csv for grid studies, and figures into
the output directory.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, default_config, load_config
from .studies import run_study, write_outputs

_SUBCOMMAND_STUDY = {
    "select": "selection",
    "identify": "identification",
    "variance": "variance",
    "sparsity": "sparsity",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rollout-interference",
        description="Simulation studies for treatment-effect estimation under "
                    "network interference with staggered roll-outs.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, study in _SUBCOMMAND_STUDY.items():
        p = sub.add_parser(name, help=f"run the {study} study")
        p.add_argument("--config", type=Path, default=None,
                       help="JSON config file (defaults used if omitted)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the base seed")
        p.add_argument("--out", type=Path, default=Path(f"out_{study}"),
                       help="output directory")
        p.add_argument("--paper-scale", action="store_true",
                       help="use the full-scale population and replication counts")
        p.add_argument("--jobs", type=int, default=None,
                       help="worker processes for replications")
        p.add_argument("--no-figures", action="store_true",
                       help="skip figure rendering")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    study = _SUBCOMMAND_STUDY[args.command]
    try:
        cfg = load_config(args.config) if args.config else default_config(study)
        if cfg.study != study:
            raise ConfigError(
                f"config declares study {cfg.study!r} but subcommand expects {study!r}")
        if args.seed is not None:
            cfg.base_seed = args.seed
        if args.jobs is not None:
            cfg.jobs = args.jobs
        if args.paper_scale:
            cfg.apply_paper_scale()
        if args.no_figures:
            cfg.render_figures = False
        cfg.validate()
        result = run_study(cfg)
        written = write_outputs(result, args.out, render_figures=cfg.render_figures)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
