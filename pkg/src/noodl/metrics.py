"""Recovery metrics, all evaluated through atom matching.

A learned dictionary is only identified up to a column permutation and sign
flips, so every comparison against ground truth first aligns the estimate
with the greedy max-correlation matching and applies the dual row alignment
to coefficient estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    ClosenessReport,
    SparseCoefficientBatch,
    align_coefficient_rows,
    align_dictionary,
    match_atoms,
)

__all__ = [
    "ColumnErrors",
    "column_errors",
    "rel_frobenius",
    "fit_error",
    "support_accuracy",
]


@dataclass(frozen=True)
class ColumnErrors:
    """Per-atom distances after alignment, with their max and mean."""

    max: float
    mean: float
    per_atom: np.ndarray
    matching: ClosenessReport


def column_errors(a_hat: np.ndarray, a_star: np.ndarray,
                  matching: ClosenessReport | None = None) -> ColumnErrors:
    """Column-wise distances between matched atoms.

    Args:
        a_hat: (n, m) estimated dictionary.
        a_star: (n, m) reference dictionary.
        matching: a precomputed matching to reuse; computed here when None.
    """
    if matching is None:
        matching = match_atoms(a_hat, a_star)
    aligned = align_dictionary(a_hat, matching)
    per_atom = np.linalg.norm(aligned - a_star, axis=0)
    return ColumnErrors(max=float(per_atom.max()), mean=float(per_atom.mean()),
                        per_atom=per_atom, matching=matching)


def _as_dense(x) -> np.ndarray:
    if isinstance(x, SparseCoefficientBatch):
        return x.to_dense()
    return np.asarray(x, dtype=np.float64)


def rel_frobenius(m_hat, m_star, matching: ClosenessReport | None = None,
                  align: str = "columns") -> float:
    """Relative Frobenius error ``||m_hat - m_star||_F / ||m_star||_F``.

    With a matching, the estimate is aligned first: ``align="columns"``
    permutes and sign-flips columns (dictionaries), ``align="rows"`` applies
    the dual row alignment (coefficient batches). Raises when the reference
    has zero norm.
    """
    if align not in ("columns", "rows"):
        raise ValueError(f"align must be 'columns' or 'rows', got {align!r}")
    m_hat = _as_dense(m_hat)
    m_star = _as_dense(m_star)
    if m_hat.shape != m_star.shape:
        raise ValueError(f"shape mismatch: {m_hat.shape} vs {m_star.shape}")
    ref_norm = np.linalg.norm(m_star)
    if ref_norm == 0.0:
        raise ValueError("reference matrix has zero Frobenius norm")
    if matching is not None:
        if align == "columns":
            m_hat = align_dictionary(m_hat, matching)
        else:
            m_hat = align_coefficient_rows(m_hat, matching)
    return float(np.linalg.norm(m_hat - m_star) / ref_norm)


def fit_error(y: np.ndarray, a: np.ndarray, x_hat) -> float:
    """Relative reconstruction error ``||y - a @ x_hat||_F / ||y||_F``.

    Needs no ground truth. Raises when ``y`` has zero norm.
    """
    y = np.asarray(y, dtype=np.float64)
    y_norm = np.linalg.norm(y)
    if y_norm == 0.0:
        raise ValueError("observation matrix has zero Frobenius norm")
    if isinstance(x_hat, SparseCoefficientBatch):
        forward = (x_hat.csc.T @ np.ascontiguousarray(a.T)).T
    else:
        forward = a @ np.asarray(x_hat, dtype=np.float64)
    return float(np.linalg.norm(forward - y) / y_norm)


def _sign_matrix(x, m: int, p: int) -> np.ndarray:
    out = np.zeros((m, p), dtype=np.int8)
    if isinstance(x, SparseCoefficientBatch):
        coo = x.csc.tocoo()
        out[coo.row, coo.col] = np.sign(coo.data).astype(np.int8)
    else:
        out[...] = np.sign(np.asarray(x)).astype(np.int8)
    return out


def support_accuracy(x_hat, x_star, matching: ClosenessReport | None = None) -> float:
    """Fraction of columns whose signed support exactly matches the truth.

    ``matching``, when given, realigns the estimated rows first (the dual of
    the dictionary alignment). A column counts only if the supports agree
    exactly, sign included.
    """
    if matching is not None:
        x_hat = align_coefficient_rows(x_hat, matching)
    m, p = (x_hat.shape if isinstance(x_hat, SparseCoefficientBatch) else np.asarray(x_hat).shape)
    s_hat = _sign_matrix(x_hat, m, p)
    s_star = _sign_matrix(x_star, m, p)
    if s_hat.shape != s_star.shape:
        raise ValueError(f"shape mismatch: {s_hat.shape} vs {s_star.shape}")
    if p == 0:
        return 1.0
    return float(np.mean((s_hat == s_star).all(axis=0)))
