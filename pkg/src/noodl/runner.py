"""Outer alternating loop: decode a fresh batch, update the dictionary.

Every outer iteration draws (or is handed) a batch, estimates its sparse
coefficients against the current dictionary, takes one sign-weighted
empirical gradient step, and renormalizes the atoms. With ground truth
available the loop records matched recovery metrics and stops once the worst
matched column error drops below ``dict_stop``; without truth it tracks only
the reconstruction fit and stops when the fit stalls.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .coeffs import CoeffSolverConfig, estimate_coefficients
from .dictupdate import (
    DegenerateAtomError,
    _gradient_from_residual,
    default_eta_a,
    forward_residual,
    gradient_step,
    normalize_columns,
)
from .metrics import column_errors, rel_frobenius, support_accuracy
from .model import SparseCoefficientBatch, check_unit_columns, incoherence, match_atoms, spectral_norm
from .synth import GenerativeConfig, generate_batch, perturb_dictionary

__all__ = [
    "SolverConfig",
    "IterationTrace",
    "RunResult",
    "TerminationReason",
    "TRACE_FIELDS",
    "batch_stream",
    "check_assumptions",
    "initial_dictionary",
    "run_noodl",
    "run_noodl_with_data",
]

logger = logging.getLogger(__name__)

# Entropy tags separating the seed substreams of one run.
_INIT_STREAM = 0xD1C7
_BATCH_STREAM = 0xBA7C

# Fit is considered stalled (truth-free runs) below this change.
FIT_STALL_TOL = 1e-12

TRACE_FIELDS = ("t", "max_col_err", "rel_frob_A", "rel_frob_X", "fit", "support_acc", "wall_ms")


class TerminationReason(Enum):
    MAX_ITERS = "MaxIters"
    DICT_TOL = "DictTol"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class SolverConfig:
    """Settings of the outer loop.

    Args:
        coeff: coefficient solver settings.
        eta_a: dictionary step size, of order m/k.
        iters: maximum number of outer iterations.
        p: samples per batch.
        seed: master seed; batch t uses the substream (seed, tag, t).
        dict_stop: early-stop threshold on the max matched column error.
        eps_target: dictionary tolerance the run aims for (recorded, advisory).
        delta_target: failure-probability budget (recorded, advisory).
    """

    coeff: CoeffSolverConfig
    eta_a: float
    iters: int
    p: int
    seed: int = 0
    dict_stop: float = 1e-10
    eps_target: float = 1e-10
    delta_target: float = 1e-10

    def validate(self) -> None:
        self.coeff.validate()
        if self.eta_a <= 0:
            raise ValueError(f"need eta_a > 0, got {self.eta_a}")
        if self.iters < 1:
            raise ValueError(f"need iters >= 1, got {self.iters}")
        if self.p < 1:
            raise ValueError(f"need p >= 1, got {self.p}")
        for name in ("dict_stop", "eps_target", "delta_target"):
            if getattr(self, name) <= 0:
                raise ValueError(f"need {name} > 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class IterationTrace:
    """Metrics of one outer iteration.

    Dictionary metrics refer to the just-updated dictionary; coefficient and
    fit metrics to the batch decoded during the iteration (with the
    dictionary that decoded it). Truth-dependent fields are NaN when no
    ground truth is available.
    """

    t: int
    max_col_err: float
    rel_frob_a: float
    rel_frob_x: float
    fit: float
    support_acc: float
    wall_ms: float

    def as_row(self) -> tuple:
        return (self.t, self.max_col_err, self.rel_frob_a, self.rel_frob_x,
                self.fit, self.support_acc, self.wall_ms)


@dataclass
class RunResult:
    """Final state of a run: dictionary, last coefficient batch, trace."""

    dictionary: np.ndarray
    coefficients: SparseCoefficientBatch | None
    trace: list[IterationTrace]
    termination: TerminationReason
    algorithm: str = "noodl"
    warnings: list[str] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.trace)

    def final(self) -> IterationTrace:
        if not self.trace:
            raise ValueError("run produced no iterations")
        return self.trace[-1]


def check_assumptions(a_star: np.ndarray, gen: GenerativeConfig, cfg: SolverConfig) -> list[str]:
    """Advisory checks of the analysis regime; violations only warn.

    The working regime asks for incoherent atoms, a mildly overcomplete
    dictionary, sparsity up to about sqrt(n), a close initialization, a
    dictionary step of order m/k, and a contractive coefficient step. The
    constants here are explicit desk choices, not sharp bounds; runs outside
    them are legitimate (higher sparsity is exercised on purpose) and merely
    get flagged.
    """
    n, m = a_star.shape
    out = []
    mu = incoherence(a_star)
    if mu > 2.0 * math.log(n):
        out.append(f"incoherence {mu:.2f} exceeds 2*log(n) = {2 * math.log(n):.2f}")
    if m > 4 * n:
        out.append(f"overcompleteness m = {m} exceeds 4n = {4 * n}")
    norm = spectral_norm(a_star)
    if norm > 3.0 * math.sqrt(m / n):
        out.append(f"spectral norm {norm:.2f} exceeds 3*sqrt(m/n) = {3 * math.sqrt(m / n):.2f}")
    if gen.k > math.sqrt(n):
        out.append(f"sparsity k = {gen.k} exceeds sqrt(n) = {math.sqrt(n):.1f}")
    if gen.epsilon0 > 2.0 / math.log(n) * (1 + 1e-9):
        out.append(f"epsilon0 = {gen.epsilon0:.4f} exceeds 2/log(n) = {2 / math.log(n):.4f}")
    ratio = cfg.eta_a * gen.k / m
    if not 0.05 <= ratio <= 2.0:
        out.append(f"eta_a = {cfg.eta_a:.3g} is outside [0.05, 2]*m/k ({ratio:.3g}*m/k)")
    if cfg.coeff.tau >= 0.5 * cfg.coeff.c:
        out.append(f"tau = {cfg.coeff.tau} is at or above c/2 = {0.5 * cfg.coeff.c}, thresholding true entries")
    for msg in out:
        logger.warning("assumption check: %s", msg)
    return out


def batch_stream(seed: int, t: int) -> tuple[int, ...]:
    """Seed entropy of the fresh batch drawn at outer iteration ``t``.

    Distinct iterations get disjoint substreams, so no sample is ever
    reused across iterations; the mapping is public so a run's data can be
    regenerated batch by batch.
    """
    return (int(seed), _BATCH_STREAM, int(t))


def initial_dictionary(a_star: np.ndarray, gen: GenerativeConfig, cfg: SolverConfig) -> np.ndarray:
    """The exact initial estimate ``run_noodl`` starts from."""
    return perturb_dictionary(a_star, gen.epsilon0, (cfg.seed, _INIT_STREAM))


def _fresh_batches(a_star, gen: GenerativeConfig, cfg: SolverConfig):
    for t in range(cfg.iters):
        yield generate_batch(a_star, cfg.p, gen, batch_stream(cfg.seed, t))


def _nan_if_none(v) -> float:
    return float("nan") if v is None else float(v)


def _run_loop(a0: np.ndarray, batches, cfg: SolverConfig,
              a_star: np.ndarray | None, warnings_: list[str]) -> RunResult:
    a = np.array(a0, dtype=np.float64, copy=True)
    trace: list[IterationTrace] = []
    termination = TerminationReason.MAX_ITERS
    x_hat: SparseCoefficientBatch | None = None
    prev_fit = None
    ran_any = False
    for t, (y, x_star) in enumerate(batches):
        ran_any = True
        start = time.perf_counter()
        x_hat = estimate_coefficients(a, y, cfg.coeff)
        residual = forward_residual(a, x_hat, y)
        grad = _gradient_from_residual(residual, x_hat)
        y_norm = np.linalg.norm(y)
        fit = float(np.linalg.norm(residual) / y_norm) if y_norm > 0 else float("nan")
        stepped = gradient_step(a, grad, cfg.eta_a)
        try:
            a_new = normalize_columns(stepped)
        except DegenerateAtomError as err:
            warnings_.append(f"iteration {t}: {err}")
            logger.warning("iteration %d: %s", t, err)
            termination = TerminationReason.DEGENERATE
            break
        max_col = rel_a = rel_x = supp = None
        if a_star is not None:
            matching = match_atoms(a_new, a_star)
            errs = column_errors(a_new, a_star, matching)
            max_col = errs.max
            rel_a = rel_frobenius(a_new, a_star, matching, align="columns")
            if x_star is not None:
                rel_x = rel_frobenius(x_hat, x_star, matching, align="rows")
                supp = support_accuracy(x_hat, x_star, matching)
        wall_ms = (time.perf_counter() - start) * 1e3
        trace.append(IterationTrace(
            t=t, max_col_err=_nan_if_none(max_col), rel_frob_a=_nan_if_none(rel_a),
            rel_frob_x=_nan_if_none(rel_x), fit=fit, support_acc=_nan_if_none(supp),
            wall_ms=wall_ms,
        ))
        logger.info("iter %d: max_col_err=%.3e fit=%.3e (%.0f ms)",
                    t, trace[-1].max_col_err, fit, wall_ms)
        a = a_new
        if a_star is not None:
            if max_col is not None and max_col < cfg.dict_stop:
                termination = TerminationReason.DICT_TOL
                break
        else:
            if prev_fit is not None and abs(prev_fit - fit) < FIT_STALL_TOL:
                termination = TerminationReason.DICT_TOL
                break
            prev_fit = fit
    if not ran_any:
        raise ValueError("no batches to process")
    return RunResult(dictionary=a, coefficients=x_hat, trace=trace,
                     termination=termination, warnings=warnings_)


def run_noodl(a_star: np.ndarray, gen: GenerativeConfig, cfg: SolverConfig) -> RunResult:
    """Learn ``a_star`` from scratch-generated data.

    The initial estimate perturbs every true atom to distance
    ``gen.epsilon0``; each outer iteration decodes a freshly drawn batch
    (substream ``(seed, t)``, never reused) and updates the dictionary.
    Stops early once the max matched column error falls below
    ``cfg.dict_stop``, or an atom collapses.

    Deterministic: a fixed ``(a_star, gen, cfg)`` reproduces the run bit for
    bit.
    """
    cfg.validate()
    gen.validate()
    check_unit_columns(a_star)
    warnings_ = check_assumptions(a_star, gen, cfg)
    a0 = initial_dictionary(a_star, gen, cfg)
    return _run_loop(a0, _fresh_batches(a_star, gen, cfg), cfg, a_star, warnings_)


def run_noodl_with_data(a0: np.ndarray, batches, cfg: SolverConfig,
                        a_star: np.ndarray | None = None) -> RunResult:
    """Run the loop on replayed or external batches.

    Args:
        a0: (n, m) initial dictionary, unit-norm columns.
        batches: sequence of ``(y, x_star_or_None)`` pairs, one per outer
            iteration; the run stops when they are exhausted (reason
            MaxIters) or ``cfg.iters`` is reached. Must be non-empty.
        cfg: solver settings.
        a_star: optional ground-truth dictionary. Without it only the fit is
            traced and the stop rule is a stalled fit; coefficient metrics
            additionally need the per-batch ``x_star``.
    """
    cfg.validate()
    check_unit_columns(a0)
    batches = list(batches)
    if not batches:
        raise ValueError("no batches to process")
    if a_star is not None:
        check_unit_columns(a_star)
    return _run_loop(a0, iter(batches[: cfg.iters]), cfg, a_star, [])
