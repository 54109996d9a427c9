"""Command-line front end over the experiment harness.

Four subcommands: ``convergence``, ``phase``, and ``compare`` run a JSON
config of the matching kind; ``gen-config`` materializes a named preset.
Progress goes to standard error through logging; data goes only to files
(or standard output for ``gen-config``). Exit codes: 0 on success, 2 on a
configuration problem, 3 when a run collapsed an atom, 1 on I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .harness import (
    ExperimentConfig,
    config_to_dict,
    load_config,
    preset,
    preset_names,
    run_convergence,
    run_phase_transition,
)
from .runner import TerminationReason

__all__ = ["main"]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noodl",
        description="Online dictionary learning experiments: convergence traces, "
                    "algorithm comparisons, and phase-transition sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("convergence", "trace one or more algorithms on a fixed problem"),
        ("compare", "run the debiased and biased decoders side by side"),
        ("phase", "Monte Carlo success grid over dictionary size and p/m"),
    ):
        cmd = sub.add_parser(name, help=help_)
        cmd.add_argument("--config", required=True, help="experiment config JSON")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument("--out", default=None, help="override the output directory")
        cmd.add_argument("--threads", type=int, default=1,
                         help="worker bound for phase trials (default 1)")
        cmd.add_argument("--quiet", action="store_true", help="log warnings only")
    gen = sub.add_parser("gen-config", help="emit a fully materialized preset config")
    gen.add_argument("--preset", required=True, choices=preset_names())
    gen.add_argument("--seed", type=int, default=None, help="override the preset seed")
    gen.add_argument("--out", default=None, help="write here instead of standard output")
    return parser


def _apply_overrides(cfg: ExperimentConfig, seed, out_dir) -> ExperimentConfig:
    if seed is not None:
        cfg = dataclasses.replace(
            cfg, seed=int(seed), solver=dataclasses.replace(cfg.solver, seed=int(seed)))
    if out_dir is not None:
        cfg = dataclasses.replace(cfg, output_dir=str(out_dir))
    return cfg


def _gen_config(args) -> int:
    cfg = _apply_overrides(preset(args.preset), args.seed, None)
    text = json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
        logger.info("wrote %s", args.out)
    return EXIT_OK


def _run(args) -> int:
    cfg = load_config(args.config)
    if cfg.kind != args.command:
        raise ValueError(
            f"{args.config}: config kind {cfg.kind!r} does not match subcommand {args.command!r}")
    cfg = _apply_overrides(cfg, args.seed, args.out)
    cfg.validate()
    if args.threads is not None and args.threads < 1:
        raise ValueError(f"need --threads >= 1, got {args.threads}")
    if cfg.kind == "phase":
        run_phase_transition(cfg, threads=args.threads)
        logger.info("phase sweep done: %s", cfg.output_dir)
        return EXIT_OK
    results = run_convergence(cfg)
    degenerate = [alg for alg, res in results.items()
                  if res.termination is TerminationReason.DEGENERATE]
    if degenerate:
        logger.error("atom collapse in: %s", ", ".join(degenerate))
        return EXIT_RUNTIME
    logger.info("run done: %s", cfg.output_dir)
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    try:
        if args.command == "gen-config":
            return _gen_config(args)
        return _run(args)
    except ValueError as err:
        logger.error("%s", err)
        return EXIT_CONFIG
    except OSError as err:
        logger.error("%s", err)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
