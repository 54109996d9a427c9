"""Dictionary update: empirical sign-weighted gradient and normalized step.

The learning stage averages ``(A x_hat - y) sign(x_hat)^T`` over the batch,
takes one descent step, and renormalizes the atoms. The sign weighting keeps
the estimate aligned with the expected descent direction even though the
coefficient estimates carry (vanishing) value errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SparseCoefficientBatch, check_unit_columns

__all__ = [
    "DegenerateAtomError",
    "GradientEstimate",
    "forward_residual",
    "empirical_gradient",
    "gradient_step",
    "normalize_columns",
    "default_eta_a",
]

# Atoms whose post-step norm falls below this are treated as collapsed.
DEGENERATE_NORM_TOL = 1e-14


class DegenerateAtomError(ValueError):
    """A dictionary column collapsed to (numerically) zero norm."""


@dataclass(frozen=True)
class GradientEstimate:
    """Empirical gradient over one batch.

    ``matrix`` is the (n, m) estimate; ``p_used`` counts the samples that
    contributed a nonzero term (columns with empty estimated support add
    nothing). The normalization is always by the full batch size.
    """

    matrix: np.ndarray
    p_used: int


def forward_residual(a: np.ndarray, x_hat: SparseCoefficientBatch, y: np.ndarray) -> np.ndarray:
    """Reconstruction residual ``a @ x_hat - y`` as an (n, p) array.

    Exploits the column sparsity of the coefficient batch; each residual
    column depends only on its own sample.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (a.shape[0], x_hat.p):
        raise ValueError(f"batch shape {y.shape} does not match (n={a.shape[0]}, p={x_hat.p})")
    if x_hat.m != a.shape[1]:
        raise ValueError(f"coefficient rows {x_hat.m} do not match atom count {a.shape[1]}")
    forward_t = x_hat.csc.T @ np.ascontiguousarray(a.T)  # (p, n), row per sample
    return forward_t.T - y


def empirical_gradient(a: np.ndarray, y: np.ndarray, x_hat: SparseCoefficientBatch) -> GradientEstimate:
    """Average the sign-weighted residual outer products over a batch.

    Computes ``(1/p) sum_j (a @ x_hat_j - y_j) sign(x_hat_j)^T``. Samples are
    accumulated in a fixed sequential order, so the result is reproducible
    bit for bit regardless of scheduling.

    Raises ValueError on an empty batch.
    """
    p = x_hat.p
    if p == 0:
        raise ValueError("cannot estimate a gradient from an empty batch")
    residual = forward_residual(a, x_hat, y)
    return _gradient_from_residual(residual, x_hat)


def _gradient_from_residual(residual: np.ndarray, x_hat: SparseCoefficientBatch) -> GradientEstimate:
    p = x_hat.p
    sgn = x_hat.sign_csc()
    # (m, p) sparse @ (p, n) dense accumulates samples per atom sequentially
    grad_t = sgn @ np.ascontiguousarray(residual.T)
    grad_t /= p
    p_used = int(np.count_nonzero(x_hat.nnz_per_column()))
    return GradientEstimate(matrix=grad_t.T, p_used=p_used)


def gradient_step(a: np.ndarray, g: GradientEstimate, eta_a: float) -> np.ndarray:
    """Descend: ``a - eta_a * g.matrix``. No renormalization here."""
    if g.matrix.shape != a.shape:
        raise ValueError(f"gradient shape {g.matrix.shape} does not match dictionary {a.shape}")
    if eta_a < 0:
        raise ValueError(f"need eta_a >= 0, got {eta_a}")
    return a - eta_a * g.matrix


def normalize_columns(a: np.ndarray) -> np.ndarray:
    """Rescale every column to unit Euclidean norm.

    Raises DegenerateAtomError when a column norm falls below 1e-14 or is
    not finite; neither a collapsed atom nor an exploded one (entries large
    enough that the squared norm overflows) can be meaningfully rescaled.
    """
    a = np.asarray(a, dtype=np.float64)
    norms = np.linalg.norm(a, axis=0)
    bad = np.flatnonzero((norms < DEGENERATE_NORM_TOL) | ~np.isfinite(norms))
    if bad.size:
        raise DegenerateAtomError(f"degenerate atom: column {int(bad[0])} has norm {norms[bad[0]]:.3e}")
    out = a / norms
    check_unit_columns(out)
    return out


def default_eta_a(m: int, k: int, scale: float = 0.2) -> float:
    """Dictionary step size proportional to m/k.

    The learning rate that keeps the expected per-iteration contraction of
    the column errors constant scales as m/k. ``scale`` is the constant;
    0.2 reproduces the reference convergence step (30 at m=1500, k=10).
    """
    if m < 1 or k < 1:
        raise ValueError(f"need m >= 1 and k >= 1, got m={m}, k={k}")
    if scale <= 0:
        raise ValueError(f"need scale > 0, got {scale}")
    return scale * m / k
