"""Shared test helpers: small random problem pieces, file comparisons."""

import csv

import numpy as np

from noodl.coeffs import CoeffSolverConfig
from noodl.harness import ExperimentConfig, SweepGrid
from noodl.runner import SolverConfig
from noodl.synth import GenerativeConfig


def tiny_convergence(seed=11, iters=4, algorithms=("noodl",)) -> ExperimentConfig:
    """Cheap convergence config: decode is truncated, mechanics are real."""
    model = GenerativeConfig(n=128, m=160, k=3, epsilon0=0.4)
    coeff = CoeffSolverConfig(eta_x=0.2, tau=0.1, r_steps=25)
    solver = SolverConfig(coeff=coeff, eta_a=0.5 * 160 / 3, iters=iters, p=160,
                          seed=seed, dict_stop=1e-8)
    return ExperimentConfig(kind="convergence", model=model, solver=solver,
                            algorithms=algorithms, output_dir="unused", seed=seed)


def micro_phase(seed=7) -> ExperimentConfig:
    """Two-cell, two-trial sweep over a toy problem; runs in well under a second."""
    sweep = SweepGrid(m_values=(24,), ratios=(0.5, 2.0), trials=2,
                      success_threshold=1e-3, iteration_cap=6, eta_a_scale=0.5)
    model = GenerativeConfig(n=32, m=24, k=2, epsilon0=0.4)
    solver = SolverConfig(coeff=CoeffSolverConfig(r_steps=20), eta_a=0.5 * 24 / 2,
                          iters=6, p=12, seed=seed)
    return ExperimentConfig(kind="phase", model=model, solver=solver, sweep=sweep,
                            output_dir="unused", seed=seed)


def unit_columns(n: int, m: int, seed: int = 0) -> np.ndarray:
    """A random (n, m) matrix with unit-norm columns."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, m))
    return a / np.linalg.norm(a, axis=0)


def random_sparse_columns(m: int, p: int, k: int, seed: int = 0) -> np.ndarray:
    """A dense (m, p) matrix with exactly k random ±1-ish entries per column."""
    rng = np.random.default_rng(seed)
    x = np.zeros((m, p))
    for j in range(p):
        idx = rng.choice(m, size=k, replace=False)
        x[idx, j] = rng.choice([-1.0, 1.0], size=k) * rng.uniform(1.0, 2.0, size=k)
    return x


def read_rows_without_timing(path) -> list[tuple]:
    """Trace CSV rows as raw strings with the wall-time column dropped."""
    with open(path, newline="") as fh:
        fh.readline()  # schema comment
        reader = csv.reader(fh)
        header = next(reader)
        keep = [i for i, name in enumerate(header) if name != "wall_ms"]
        return [tuple(row[i] for i in keep) for row in reader]
