"""Experiment harness: configs, presets, convergence runs, phase sweeps.

An experiment is described by a single JSON document with every parameter
explicit — presets materialize the full parameter set rather than relying
on loader defaults, so an output directory always carries its exact
provenance. Three kinds are supported: ``convergence`` (trace one or more
algorithms on a fixed problem), ``compare`` (same, conventionally with both
algorithms), and ``phase`` (a Monte Carlo success-rate grid over dictionary
size and samples-per-atom ratio).
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import run_biased_baseline
from .coeffs import CoeffSolverConfig
from .runner import RunResult, SolverConfig, TerminationReason, run_noodl
from .storage import write_trace_csv, write_trace_json
from .synth import GenerativeConfig, generate_ground_truth

__all__ = [
    "ALGORITHMS",
    "CONFIG_SCHEMA",
    "ExperimentConfig",
    "KINDS",
    "PhaseCell",
    "SweepGrid",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "phase_trial_seed",
    "preset",
    "preset_names",
    "run_convergence",
    "run_experiment",
    "run_phase_transition",
    "save_config",
]

logger = logging.getLogger(__name__)

CONFIG_SCHEMA = "noodl-experiment-v1"
SUMMARY_SCHEMA = "noodl-summary-v1"
PHASE_SCHEMA = "noodl-phase-grid-v1"
PHASE_GRID_FIELDS = ("m", "ratio", "succ_A", "succ_X")

KINDS = ("convergence", "phase", "compare")
ALGORITHMS = ("noodl", "biased_ht")

# Entropy tags for the harness-level seed substreams.
_TRUTH_STREAM = 0xA57A
_PHASE_STREAM = 0xFA5E


@dataclass(frozen=True)
class SweepGrid:
    """Phase-transition grid: dictionary sizes crossed with p/m ratios.

    Each (m, ratio) cell runs ``trials`` independent instances with
    ``p = ceil(ratio * m)`` samples per iteration and counts the fraction
    whose final relative Frobenius error falls below ``success_threshold``
    within ``iteration_cap`` iterations — separately for the dictionary and
    the coefficients. The dictionary step per cell is
    ``eta_a_scale * m / k``.
    """

    m_values: tuple[int, ...] = (50, 100, 200, 400)
    ratios: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0)
    trials: int = 10
    success_threshold: float = 5e-7
    iteration_cap: int = 50
    eta_a_scale: float = 0.5

    def validate(self) -> None:
        if not self.m_values:
            raise ValueError("sweep needs at least one dictionary size")
        if not self.ratios:
            raise ValueError("sweep needs at least one p/m ratio")
        if any(m < 1 for m in self.m_values):
            raise ValueError(f"dictionary sizes must be >= 1, got {self.m_values}")
        if any(r <= 0 for r in self.ratios):
            raise ValueError(f"p/m ratios must be positive (every cell needs p >= 1), got {self.ratios}")
        if self.trials < 1:
            raise ValueError(f"need trials >= 1, got {self.trials}")
        if self.success_threshold <= 0:
            raise ValueError(f"need success_threshold > 0, got {self.success_threshold}")
        if self.iteration_cap < 1:
            raise ValueError(f"need iteration_cap >= 1, got {self.iteration_cap}")
        if self.eta_a_scale <= 0:
            raise ValueError(f"need eta_a_scale > 0, got {self.eta_a_scale}")


@dataclass(frozen=True)
class PhaseCell:
    """Success rates of one (m, ratio) cell of a phase sweep."""

    m: int
    ratio: float
    success_rate_a: float
    success_rate_x: float

    def __post_init__(self) -> None:
        for name in ("success_rate_a", "success_rate_x"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {rate}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a generative model, solver settings, and a kind."""

    kind: str
    model: GenerativeConfig
    solver: SolverConfig
    algorithms: tuple[str, ...] = ("noodl",)
    sweep: SweepGrid | None = None
    output_dir: str = "out"
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}, expected one of {KINDS}")
        if not self.algorithms:
            raise ValueError("need at least one algorithm")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ValueError(f"unknown algorithms {unknown}, expected a subset of {ALGORITHMS}")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ValueError(f"duplicate algorithm in {self.algorithms}")
        self.model.validate()
        self.solver.validate()
        if self.solver.seed != self.seed:
            raise ValueError(
                f"experiment seed {self.seed} and solver seed {self.solver.seed} disagree; "
                "the experiment seed owns all randomness"
            )
        if self.kind == "phase":
            if self.sweep is None:
                raise ValueError("phase experiments need a sweep grid")
            self.sweep.validate()
            if len(self.algorithms) != 1:
                raise ValueError("phase experiments sweep exactly one algorithm")


# --- JSON round trip -------------------------------------------------------

def _take(d: dict, keys: tuple[str, ...], where: str) -> list:
    missing = [k for k in keys if k not in d]
    extra = [k for k in d if k not in keys]
    if missing or extra:
        raise ValueError(f"{where}: missing fields {missing}, unexpected fields {extra}")
    return [d[k] for k in keys]


_MODEL_KEYS = ("n", "m", "k", "c", "value_dist", "mag_low", "mag_high", "epsilon0")
_COEFF_KEYS = ("eta_x", "tau", "r_steps", "delta_r", "c", "stall_tol")
_SOLVER_KEYS = ("coeff", "eta_a", "iters", "p", "dict_stop", "eps_target", "delta_target")
_SWEEP_KEYS = ("m_values", "ratios", "trials", "success_threshold", "iteration_cap", "eta_a_scale")
_CONFIG_KEYS = ("schema", "kind", "algorithms", "output_dir", "seed", "model", "solver", "sweep")


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Serialize with every field explicit (``r_steps``/``delta_r`` keep their null)."""
    model = {k: getattr(cfg.model, k) for k in _MODEL_KEYS}
    coeff = {k: getattr(cfg.solver.coeff, k) for k in _COEFF_KEYS}
    solver = {k: getattr(cfg.solver, k) for k in _SOLVER_KEYS[1:]}
    solver["coeff"] = coeff
    sweep = None
    if cfg.sweep is not None:
        sweep = {k: getattr(cfg.sweep, k) for k in _SWEEP_KEYS}
        sweep["m_values"] = list(cfg.sweep.m_values)
        sweep["ratios"] = list(cfg.sweep.ratios)
    return {
        "schema": CONFIG_SCHEMA,
        "kind": cfg.kind,
        "algorithms": list(cfg.algorithms),
        "output_dir": cfg.output_dir,
        "seed": cfg.seed,
        "model": model,
        "solver": solver,
        "sweep": sweep,
    }


def config_from_dict(d: dict) -> ExperimentConfig:
    """Parse a config document; unknown or missing fields are errors."""
    schema, kind, algorithms, output_dir, seed, model_d, solver_d, sweep_d = \
        _take(d, _CONFIG_KEYS, "config")
    if schema != CONFIG_SCHEMA:
        raise ValueError(f"unsupported config schema {schema!r}, expected {CONFIG_SCHEMA!r}")
    model = GenerativeConfig(*_take(model_d, _MODEL_KEYS, "config.model"))
    coeff_d, *solver_rest = _take(solver_d, _SOLVER_KEYS, "config.solver")
    coeff = CoeffSolverConfig(*_take(coeff_d, _COEFF_KEYS, "config.solver.coeff"))
    solver = SolverConfig(coeff, *solver_rest[:3], int(seed), *solver_rest[3:])
    sweep = None
    if sweep_d is not None:
        m_values, ratios, *rest = _take(sweep_d, _SWEEP_KEYS, "config.sweep")
        sweep = SweepGrid(tuple(int(m) for m in m_values), tuple(float(r) for r in ratios), *rest)
    cfg = ExperimentConfig(
        kind=kind, model=model, solver=solver, algorithms=tuple(algorithms),
        sweep=sweep, output_dir=output_dir, seed=int(seed),
    )
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ValueError(f"{path}: cannot read config: {err}") from err
    try:
        return config_from_dict(doc)
    except ValueError as err:
        raise ValueError(f"{path}: {err}") from err


def save_config(path, cfg: ExperimentConfig) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


# --- Presets ---------------------------------------------------------------

def _reference_coeff() -> CoeffSolverConfig:
    return CoeffSolverConfig(eta_x=0.2, tau=0.1, delta_r=1e-14)


def _fig2_convergence(k: int, eta_a: float) -> ExperimentConfig:
    model = GenerativeConfig(n=1000, m=1500, k=k, epsilon0=2 / math.log(1000))
    solver = SolverConfig(coeff=_reference_coeff(), eta_a=eta_a, iters=150, p=5000)
    return ExperimentConfig(kind="convergence", model=model, solver=solver,
                            output_dir=f"out/fig2-k{k}")


def _fig2_phase() -> ExperimentConfig:
    sweep = SweepGrid()
    m0 = sweep.m_values[0]
    model = GenerativeConfig(n=100, m=m0, k=3, epsilon0=2 / math.log(100))
    solver = SolverConfig(
        coeff=_reference_coeff(),
        eta_a=sweep.eta_a_scale * m0 / model.k,
        iters=sweep.iteration_cap,
        p=math.ceil(sweep.ratios[0] * m0),
    )
    return ExperimentConfig(kind="phase", model=model, solver=solver, sweep=sweep,
                            output_dir="out/fig2-phase")


def _bias_compare() -> ExperimentConfig:
    cfg = _fig2_convergence(k=10, eta_a=30.0)
    return dataclasses.replace(
        cfg, kind="compare", algorithms=("noodl", "biased_ht"),
        solver=dataclasses.replace(cfg.solver, iters=50),
        output_dir="out/bias-compare",
    )


def _scaled_small() -> ExperimentConfig:
    model = GenerativeConfig(n=100, m=150, k=3, epsilon0=2 / math.log(100))
    solver = SolverConfig(coeff=_reference_coeff(), eta_a=0.2 * 150 / 3, iters=120, p=600)
    return ExperimentConfig(kind="convergence", model=model, solver=solver,
                            output_dir="out/scaled-small")


_PRESETS = {
    "fig2-k10": lambda: _fig2_convergence(10, 30.0),
    "fig2-k20": lambda: _fig2_convergence(20, 30.0),
    "fig2-k50": lambda: _fig2_convergence(50, 15.0),
    "fig2-k100": lambda: _fig2_convergence(100, 15.0),
    "fig2-phase": _fig2_phase,
    "bias-compare": _bias_compare,
    "scaled-small": _scaled_small,
}


def preset_names() -> tuple[str, ...]:
    return tuple(sorted(_PRESETS))


def preset(name: str) -> ExperimentConfig:
    """A fully materialized named configuration."""
    try:
        build = _PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}, expected one of {preset_names()}") from None
    cfg = build()
    cfg.validate()
    return cfg


# --- Runners ---------------------------------------------------------------

_RUNNERS = {"noodl": run_noodl, "biased_ht": run_biased_baseline}


def _json_value(v: float):
    v = float(v)
    return None if math.isnan(v) else v


def ground_truth_for(cfg: ExperimentConfig) -> np.ndarray:
    """The ground-truth dictionary a convergence/compare run learns."""
    return generate_ground_truth(cfg.model.n, cfg.model.m, (cfg.seed, _TRUTH_STREAM))


def run_convergence(cfg: ExperimentConfig, out_dir=None) -> dict[str, RunResult]:
    """Trace every configured algorithm on one shared problem instance.

    Writes, under the output directory: the resolved config, one trace
    CSV + JSON per algorithm (named ``trace_<algorithm>_k<k>.<ext>``), and
    ``summary.json`` with per-algorithm final errors. Returns the in-memory
    results keyed by algorithm name.
    """
    cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    _ensure_dir(out)
    save_config(out / "config.json", cfg)
    a_star = ground_truth_for(cfg)
    results: dict[str, RunResult] = {}
    summary = {"schema": SUMMARY_SCHEMA, "config": config_to_dict(cfg), "results": {}}
    for alg in cfg.algorithms:
        logger.info("running %s on n=%d m=%d k=%d p=%d",
                    alg, cfg.model.n, cfg.model.m, cfg.model.k, cfg.solver.p)
        res = _RUNNERS[alg](a_star, cfg.model, cfg.solver)
        _write_with_context(write_trace_csv, out / f"trace_{alg}_k{cfg.model.k}.csv", res.trace)
        _write_with_context(write_trace_json, out / f"trace_{alg}_k{cfg.model.k}.json", res.trace)
        fin = res.final()
        summary["results"][alg] = {
            "iterations": res.iterations,
            "termination": res.termination.value,
            "final": {"t": fin.t, "max_col_err": _json_value(fin.max_col_err),
                      "rel_frob_A": _json_value(fin.rel_frob_a),
                      "rel_frob_X": _json_value(fin.rel_frob_x),
                      "fit": _json_value(fin.fit),
                      "support_acc": _json_value(fin.support_acc)},
            "total_wall_ms": sum(row.wall_ms for row in res.trace),
            "warnings": list(res.warnings),
        }
        results[alg] = res
    _write_json_with_context(out / "summary.json", summary)
    return results


def phase_trial_seed(master: int, m: int, ratio: float, trial: int) -> int:
    """Integer seed of one phase trial; disjoint across cells and trials."""
    ratio_ppm = int(round(ratio * 1e6))
    ss = np.random.SeedSequence((int(master), _PHASE_STREAM, int(m), ratio_ppm, int(trial)))
    return int(ss.generate_state(1)[0])


def _cell_problem(cfg: ExperimentConfig, m: int, ratio: float):
    model = dataclasses.replace(cfg.model, m=m)
    solver = dataclasses.replace(
        cfg.solver,
        p=math.ceil(ratio * m),
        eta_a=cfg.sweep.eta_a_scale * m / cfg.model.k,
        iters=cfg.sweep.iteration_cap,
    )
    return model, solver


def _phase_trial(run, model: GenerativeConfig, solver: SolverConfig,
                 seed: int, threshold: float) -> tuple[bool, bool]:
    solver = dataclasses.replace(solver, seed=seed)
    a_star = generate_ground_truth(model.n, model.m, (seed, _TRUTH_STREAM))
    res = run(a_star, model, solver)
    if res.termination is TerminationReason.DEGENERATE:
        return False, False
    fin = res.final()
    return bool(fin.rel_frob_a < threshold), bool(fin.rel_frob_x < threshold)


def run_phase_transition(cfg: ExperimentConfig, out_dir=None, threads: int = 1) -> list[PhaseCell]:
    """Monte Carlo success-rate grid over (m, p/m) cells.

    Each trial runs an independent instance under its own derived seed; a
    degenerate run counts as a failed trial rather than aborting the sweep.
    Writes ``phase_grid.csv`` (header ``m,ratio,succ_A,succ_X``) and
    ``phase_summary.json``; cells come back sorted by (m, ratio). With
    ``threads > 1`` trials run on a thread pool, each pinned to one BLAS
    thread; results do not depend on the schedule.
    """
    cfg.validate()
    if cfg.kind != "phase":
        raise ValueError(f"run_phase_transition needs a phase config, got kind={cfg.kind!r}")
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    _ensure_dir(out)
    save_config(out / "config.json", cfg)
    run = _RUNNERS[cfg.algorithms[0]]
    sweep = cfg.sweep
    jobs = []
    for m in sweep.m_values:
        for ratio in sweep.ratios:
            model, solver = _cell_problem(cfg, m, ratio)
            for trial in range(sweep.trials):
                seed = phase_trial_seed(cfg.seed, m, ratio, trial)
                jobs.append((run, model, solver, seed, sweep.success_threshold))
    logger.info("phase sweep: %d cells x %d trials = %d runs",
                len(sweep.m_values) * len(sweep.ratios), sweep.trials, len(jobs))
    if threads > 1:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=1):
            with ThreadPoolExecutor(max_workers=threads) as pool:
                outcomes = list(pool.map(lambda job: _phase_trial(*job), jobs))
    else:
        outcomes = [_phase_trial(*job) for job in jobs]
    cells = []
    idx = 0
    for m in sweep.m_values:
        for ratio in sweep.ratios:
            chunk = outcomes[idx:idx + sweep.trials]
            idx += sweep.trials
            cells.append(PhaseCell(
                m=m, ratio=ratio,
                success_rate_a=sum(a for a, _ in chunk) / sweep.trials,
                success_rate_x=sum(x for _, x in chunk) / sweep.trials,
            ))
            logger.info("cell m=%d ratio=%.3g: succ_A=%.2f succ_X=%.2f",
                        m, ratio, cells[-1].success_rate_a, cells[-1].success_rate_x)
    _write_phase_grid(out / "phase_grid.csv", cells)
    _write_json_with_context(out / "phase_summary.json", {
        "schema": PHASE_SCHEMA,
        "config": config_to_dict(cfg),
        "cells": [{"m": c.m, "ratio": c.ratio, "succ_A": c.success_rate_a,
                   "succ_X": c.success_rate_x} for c in cells],
    })
    return cells


def run_experiment(cfg: ExperimentConfig, out_dir=None, threads: int = 1):
    """Dispatch on the config kind; see the kind-specific runners."""
    if cfg.kind == "phase":
        return run_phase_transition(cfg, out_dir=out_dir, threads=threads)
    return run_convergence(cfg, out_dir=out_dir)


# --- File helpers ----------------------------------------------------------

def _ensure_dir(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise OSError(f"cannot create output directory {path}: {err}") from err


def _write_with_context(writer, path, payload) -> None:
    try:
        writer(path, payload)
    except OSError as err:
        raise OSError(f"cannot write {path}: {err}") from err


def _write_json_with_context(path, doc: dict) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as err:
        raise OSError(f"cannot write {path}: {err}") from err


def _write_phase_grid(path, cells: list[PhaseCell]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {PHASE_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(PHASE_GRID_FIELDS)
        for c in cells:
            writer.writerow([c.m, repr(float(c.ratio)),
                             repr(float(c.success_rate_a)), repr(float(c.success_rate_x))])
