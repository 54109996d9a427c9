"""Core data containers and dictionary analysis utilities.

A dictionary is a plain ``(n, m)`` float64 array whose columns are unit-norm
atoms. Sparse coefficient vectors and batches get thin wrappers so that the
per-column (index, value) structure is explicit and cheap to inspect.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "UNIT_NORM_TOL",
    "SparseVector",
    "SparseCoefficientBatch",
    "ClosenessReport",
    "check_unit_columns",
    "incoherence",
    "spectral_norm",
    "match_atoms",
    "check_closeness",
    "align_dictionary",
    "align_coefficient_rows",
]

# Column norms are enforced to this absolute tolerance after every
# normalization step.
UNIT_NORM_TOL = 1e-12


def check_unit_columns(a: np.ndarray, tol: float = UNIT_NORM_TOL) -> None:
    """Raise ValueError unless every column of ``a`` has unit Euclidean norm.

    Args:
        a: (n, m) array of atoms.
        tol: maximum allowed absolute deviation of each column norm from 1.
    """
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d atom matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("atom matrix contains non-finite entries")
    norms = np.linalg.norm(a, axis=0)
    off = np.abs(norms - 1.0)
    if off.size and off.max() > tol:
        j = int(off.argmax())
        raise ValueError(
            f"column {j} has norm {norms[j]:.6g}, deviating from 1 by {off[j]:.3e} (tol {tol:.1e})")


@dataclass(frozen=True)
class SparseVector:
    """One sparse coefficient vector of a fixed ambient length.

    ``indices`` are strictly increasing positions of the nonzero entries and
    ``values`` the matching coefficients; explicit zeros are never stored.
    """

    length: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValueError("indices and values must be 1-d arrays of equal length")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.length:
                raise ValueError("index out of range")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
            if np.any(val == 0.0):
                raise ValueError("explicit zeros are not stored")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_dense(cls, x: np.ndarray) -> "SparseVector":
        x = np.asarray(x, dtype=np.float64).ravel()
        idx = np.flatnonzero(x != 0.0)
        return cls(length=x.size, indices=idx, values=x[idx])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.length)
        out[self.indices] = self.values
        return out

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def allclose(self, other: "SparseVector", atol: float = 0.0) -> bool:
        if self.length != other.length:
            return False
        return bool(np.allclose(self.to_dense(), other.to_dense(), rtol=0.0, atol=atol))


class SparseCoefficientBatch:
    """An ``(m, p)`` coefficient matrix stored column-compressed.

    Each of the ``p`` columns holds the (index, value) list for one sample.
    Backed by a canonical scipy CSC array (sorted indices, no explicit zeros).
    """

    def __init__(self, csc: sp.csc_array):
        if not sp.issparse(csc):
            raise TypeError("expected a scipy sparse array")
        csc = sp.csc_array(csc, dtype=np.float64)
        csc.sort_indices()
        csc.eliminate_zeros()
        self.csc = csc

    @property
    def m(self) -> int:
        return self.csc.shape[0]

    @property
    def p(self) -> int:
        return self.csc.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.csc.shape

    @classmethod
    def from_dense(cls, x: np.ndarray) -> "SparseCoefficientBatch":
        return cls(sp.csc_array(np.asarray(x, dtype=np.float64)))

    @classmethod
    def from_columns(cls, columns: list[SparseVector]) -> "SparseCoefficientBatch":
        if not columns:
            raise ValueError("need at least one column")
        m = columns[0].length
        if any(c.length != m for c in columns):
            raise ValueError("all columns must share the same length")
        indptr = np.zeros(len(columns) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([c.nnz for c in columns])
        indices = np.concatenate([c.indices for c in columns]) if indptr[-1] else np.zeros(0, np.int64)
        data = np.concatenate([c.values for c in columns]) if indptr[-1] else np.zeros(0)
        return cls(sp.csc_array((data, indices, indptr), shape=(m, len(columns))))

    def column(self, j: int) -> SparseVector:
        lo, hi = self.csc.indptr[j], self.csc.indptr[j + 1]
        return SparseVector(self.m, self.csc.indices[lo:hi].astype(np.int64), self.csc.data[lo:hi])

    def to_dense(self) -> np.ndarray:
        return self.csc.toarray()

    def sign_csc(self) -> sp.csc_array:
        """Entrywise sign pattern as a CSC array with values in {-1, +1}."""
        out = self.csc.copy()
        out.data = np.sign(out.data)
        return out

    def nnz_per_column(self) -> np.ndarray:
        return np.diff(self.csc.indptr)

    def max_nnz(self) -> int:
        counts = self.nnz_per_column()
        return int(counts.max()) if counts.size else 0


@dataclass(frozen=True)
class ClosenessReport:
    """Result of matching an estimated dictionary against a reference.

    ``permutation[i]`` is the estimate column assigned to reference atom ``i``
    and ``signs[i]`` the sign flip that aligns it. ``epsilon`` is the largest
    matched column distance; ``eps_ok`` / ``kappa_ok`` say whether the
    requested column-wise and spectral bounds hold.
    """

    epsilon: float
    eps_ok: bool
    kappa_ok: bool
    permutation: np.ndarray
    signs: np.ndarray
    per_atom_error: np.ndarray
    note: str = ""

    @property
    def is_close(self) -> bool:
        return self.eps_ok and self.kappa_ok and not self.note


def incoherence(a: np.ndarray) -> float:
    """Mutual incoherence of unit-norm atoms, scaled by sqrt(n).

    Returns ``sqrt(n) * max_{i != j} |<a_i, a_j>|``; 0 when fewer than two
    atoms are present.
    """
    n, m = a.shape
    if m < 2:
        return 0.0
    g = a.T @ a
    np.fill_diagonal(g, 0.0)
    return float(np.sqrt(n) * np.max(np.abs(g)))


def spectral_norm(mat: np.ndarray, iters: int = 100, rtol: float = 1e-10) -> float:
    """Largest singular value by power iteration on ``mat.T @ mat``.

    Runs at most ``iters`` rounds, stopping early once the estimate changes
    by less than ``rtol`` relatively. The start vector is fixed so the
    result is deterministic.
    """
    mat = np.asarray(mat, dtype=np.float64)
    if mat.size == 0:
        return 0.0
    v = np.random.default_rng(0x5EED).standard_normal(mat.shape[1])
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(iters):
        w = mat.T @ (mat @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        est = np.sqrt(norm)
        if prev > 0.0 and abs(est - prev) <= rtol * prev:
            return float(est)
        prev = est
    return float(prev)


def match_atoms(a_hat: np.ndarray, a_star: np.ndarray, kappa: float | None = None,
                epsilon: float | None = None) -> ClosenessReport:
    """Greedily match estimate atoms to reference atoms by max correlation.

    Candidate pairs are taken in decreasing order of ``|<a_hat_j, a_star_i>|``
    with already-matched rows and columns excluded, which yields a bijection.
    The report carries the permutation, per-atom sign flips and distances.

    Args:
        a_hat: (n, m) estimated dictionary.
        a_star: (n, m) reference dictionary.
        kappa: optional spectral bound; checks ``||a_hat - a_star|| <= kappa
            * ||a_star||`` under the matched alignment. Skipped when None.
        epsilon: optional column-wise bound checked against the matched
            distances. When None, ``eps_ok`` reports against ``epsilon=inf``.
    """
    if a_hat.shape != a_star.shape:
        raise ValueError(f"shape mismatch: {a_hat.shape} vs {a_star.shape}")
    n, m = a_star.shape
    corr = a_hat.T @ a_star  # corr[j, i] = <a_hat_j, a_star_i>
    if not np.isfinite(corr).all():
        return ClosenessReport(
            epsilon=float("inf"), eps_ok=False, kappa_ok=False,
            permutation=np.arange(m), signs=np.ones(m, dtype=np.int64),
            per_atom_error=np.full(m, np.inf),
            note="non-finite correlations, matching aborted",
        )
    flat = np.argsort(np.abs(corr), axis=None)[::-1]
    perm = np.full(m, -1, dtype=np.int64)
    used_hat = np.zeros(m, dtype=bool)
    matched = 0
    for f in flat:
        j, i = divmod(int(f), m)
        if used_hat[j] or perm[i] >= 0:
            continue
        perm[i] = j
        used_hat[j] = True
        matched += 1
        if matched == m:
            break
    note = ""
    if matched < m:  # cannot happen with finite correlations, kept as a guard
        note = f"greedy matching placed only {matched} of {m} atoms"
        perm[perm < 0] = np.flatnonzero(~used_hat)[: m - matched]
    signs = np.sign(corr[perm, np.arange(m)])
    signs[signs == 0] = 1.0
    aligned = a_hat[:, perm] * signs
    per_atom = np.linalg.norm(aligned - a_star, axis=0)
    eps_hat = float(per_atom.max()) if m else 0.0
    kappa_ok = True
    if kappa is not None:
        kappa_ok = spectral_norm(aligned - a_star) <= kappa * spectral_norm(a_star) * (1.0 + 1e-8)
    eps_ok = eps_hat <= (np.inf if epsilon is None else epsilon)
    return ClosenessReport(
        epsilon=eps_hat, eps_ok=bool(eps_ok), kappa_ok=bool(kappa_ok),
        permutation=perm, signs=signs.astype(np.int64),
        per_atom_error=per_atom, note=note,
    )


def check_closeness(a_hat: np.ndarray, a_star: np.ndarray, epsilon: float,
                    kappa: float) -> ClosenessReport:
    """Check column-wise and spectral closeness up to permutation and sign.

    Args:
        a_hat: (n, m) estimated dictionary.
        a_star: (n, m) reference dictionary.
        epsilon: per-column distance bound after alignment.
        kappa: spectral-norm bound relative to ``||a_star||``.
    """
    return match_atoms(a_hat, a_star, kappa=kappa, epsilon=epsilon)


def align_dictionary(a_hat: np.ndarray, report: ClosenessReport) -> np.ndarray:
    """Reorder and sign-flip estimate columns onto the reference order."""
    return a_hat[:, report.permutation] * report.signs


def align_coefficient_rows(x_hat, report: ClosenessReport):
    """Apply the dual row permutation and signs to coefficient estimates.

    Row ``i`` of the result is ``signs[i] * x_hat[permutation[i]]``, the exact
    dual of the dictionary alignment, so the product ``A @ X`` is unchanged.
    Accepts a dense array or a SparseCoefficientBatch and returns the same
    kind.
    """
    if isinstance(x_hat, SparseCoefficientBatch):
        m = x_hat.m
        d = sp.dia_array((report.signs[np.newaxis, :].astype(np.float64), [0]), shape=(m, m))
        rows = sp.csc_array(x_hat.csc[report.permutation, :])
        return SparseCoefficientBatch(sp.csc_array(d @ rows))
    x_hat = np.asarray(x_hat)
    return x_hat[report.permutation, :] * report.signs[:, np.newaxis]
