"""Synthetic generative model: ground-truth dictionaries, sparse codes, data.

Ground-truth atoms are normalized Gaussian vectors. Coefficient vectors have
uniformly drawn size-k supports with zero-mean values bounded away from zero,
and observations are exact products ``y = A* x*`` (no additive noise).

Every sampling routine is seeded explicitly. Batch columns use per-column
substreams derived from ``(seed, column)`` so any single column can be
regenerated in isolation and results never depend on evaluation order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .model import SparseCoefficientBatch, SparseVector, check_unit_columns

__all__ = [
    "GenerativeConfig",
    "seed_sequence",
    "generate_ground_truth",
    "perturb_dictionary",
    "sample_coefficient_vector",
    "generate_batch",
]

logger = logging.getLogger(__name__)

SeedLike = "int | tuple[int, ...] | np.random.SeedSequence | np.random.Generator"

VALUE_DISTS = ("rademacher", "uniform_magnitude")


@dataclass(frozen=True)
class GenerativeConfig:
    """Parameters of the synthetic model.

    Args:
        n: data dimension.
        m: number of atoms.
        k: nonzeros per coefficient vector.
        c: lower bound on nonzero magnitudes, at most 1.
        value_dist: "rademacher" for values in {-c, +c}, or
            "uniform_magnitude" for random-sign magnitudes uniform on
            [mag_low, mag_high].
        mag_low / mag_high: magnitude range for "uniform_magnitude".
        epsilon0: column-wise distance of the initial estimate from truth.
    """

    n: int
    m: int
    k: int
    c: float = 1.0
    value_dist: str = "rademacher"
    mag_low: float = 1.0
    mag_high: float = 1.0
    epsilon0: float = 0.0

    def validate(self) -> None:
        if self.n < 1 or self.m < 1:
            raise ValueError(f"need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if not 0 <= self.k <= min(self.n, self.m):
            raise ValueError(f"need 0 <= k <= min(n, m), got k={self.k}")
        if not 0.0 < self.c <= 1.0:
            raise ValueError(f"need 0 < c <= 1, got c={self.c}")
        if self.value_dist not in VALUE_DISTS:
            raise ValueError(f"unknown value_dist {self.value_dist!r}, expected one of {VALUE_DISTS}")
        if self.value_dist == "uniform_magnitude":
            if not self.c <= self.mag_low <= self.mag_high:
                raise ValueError("need c <= mag_low <= mag_high for uniform_magnitude values")
        if not 0.0 <= self.epsilon0 < 2.0:
            raise ValueError(f"need 0 <= epsilon0 < 2 (distance between unit vectors), got {self.epsilon0}")


def seed_sequence(seed) -> np.random.SeedSequence:
    """Build a SeedSequence from an int, tuple of ints, or SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (int, np.integer)):
        return np.random.SeedSequence(int(seed))
    if isinstance(seed, tuple):
        return np.random.SeedSequence(tuple(int(s) for s in seed))
    raise TypeError(f"unsupported seed type {type(seed).__name__}")


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed_sequence(seed))


def _child_seed(seed, index: int) -> np.random.SeedSequence:
    """Derive the substream for one column: entropy = parent tuple + (index,)."""
    if isinstance(seed, np.random.SeedSequence):
        ent = seed.entropy
        base = tuple(ent) if isinstance(ent, (tuple, list)) else (int(ent),)
    elif isinstance(seed, tuple):
        base = tuple(int(s) for s in seed)
    else:
        base = (int(seed),)
    return np.random.SeedSequence(base + (int(index),))


def generate_ground_truth(n: int, m: int, seed) -> np.ndarray:
    """Draw an (n, m) dictionary with i.i.d. normal entries, columns normalized.

    Deterministic for a fixed seed. Raises if a drawn column has zero norm,
    which for continuous draws does not occur.
    """
    if n < 1 or m < 1:
        raise ValueError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    a = _rng(seed).standard_normal((n, m))
    norms = np.linalg.norm(a, axis=0)
    if np.any(norms == 0.0):
        raise ValueError("degenerate zero-norm column drawn")
    a /= norms
    check_unit_columns(a)
    return a


def perturb_dictionary(a_star: np.ndarray, epsilon0: float, seed) -> np.ndarray:
    """Move every atom to an exact distance ``epsilon0`` on the unit sphere.

    Column i becomes ``cos(theta) a_i + sin(theta) w_i`` where ``w_i`` is a
    normalized Gaussian direction orthogonal to ``a_i`` and ``cos(theta) =
    1 - epsilon0**2 / 2``, i.e. the normalized sum of the atom and a rescaled
    Gaussian perturbation. The result is unit-norm with
    ``||out_i - a_i|| = epsilon0`` exactly (up to float rounding).

    ``epsilon0 = 0`` returns an exact copy; ``epsilon0 >= 2`` is rejected
    because two unit vectors are at most 2 apart.
    """
    check_unit_columns(a_star)
    if epsilon0 < 0 or epsilon0 >= 2.0:
        raise ValueError(f"need 0 <= epsilon0 < 2, got {epsilon0}")
    if epsilon0 == 0.0:
        return a_star.copy()
    n, m = a_star.shape
    if n == 1:
        raise ValueError("cannot perturb at fixed distance in dimension 1")
    z = _rng(seed).standard_normal((n, m))
    z -= a_star * np.sum(z * a_star, axis=0)  # project out the atom direction
    norms = np.linalg.norm(z, axis=0)
    if np.any(norms == 0.0):
        raise ValueError("degenerate perturbation direction drawn")
    z /= norms
    cos_t = 1.0 - 0.5 * epsilon0**2
    sin_t = np.sqrt(max(0.0, 1.0 - cos_t**2))
    out = cos_t * a_star + sin_t * z
    # renormalize to absorb rounding, keeping the distance within 1e-9
    out /= np.linalg.norm(out, axis=0)
    check_unit_columns(out)
    return out


def _draw_values(cfg: GenerativeConfig, rng: np.random.Generator, size: int) -> np.ndarray:
    signs = rng.integers(0, 2, size=size) * 2.0 - 1.0
    if cfg.value_dist == "rademacher":
        return cfg.c * signs
    return signs * rng.uniform(cfg.mag_low, cfg.mag_high, size=size)


def sample_coefficient_vector(cfg: GenerativeConfig, seed) -> SparseVector:
    """Draw one sparse coefficient vector.

    The support is a uniformly random size-k subset of [m] (so each index is
    included with probability exactly k/m) and values are drawn from the
    configured distribution: support first, then values, in a fixed order.
    """
    cfg.validate()
    rng = _rng(seed)
    if cfg.k == 0:
        return SparseVector(cfg.m, np.zeros(0, np.int64), np.zeros(0))
    support = np.sort(rng.choice(cfg.m, size=cfg.k, replace=False))
    values = _draw_values(cfg, rng, cfg.k)
    return SparseVector(cfg.m, support.astype(np.int64), values)


def generate_batch(a_star: np.ndarray, p: int, cfg: GenerativeConfig,
                   seed) -> tuple[np.ndarray, SparseCoefficientBatch]:
    """Generate ``p`` observation columns ``y_j = A* x*_j``.

    Column j is drawn from the substream ``(seed, j)``, so the batch is
    reproducible column by column and independent of evaluation order. Each
    observation is the exact sum of the supporting atoms weighted by the
    coefficient values.

    Returns:
        (y, x_star): the (n, p) observation matrix and the (m, p) sparse
        coefficient batch that produced it.
    """
    cfg.validate()
    check_unit_columns(a_star)
    n, m = a_star.shape
    if m != cfg.m or n != cfg.n:
        raise ValueError(f"dictionary shape {a_star.shape} does not match config (n={cfg.n}, m={cfg.m})")
    if p < 1:
        raise ValueError(f"need p >= 1, got {p}")
    if not isinstance(seed, np.random.Generator):
        logger.debug("generate_batch: p=%d seed entropy=%r", p, seed_sequence(seed).entropy)
    indptr = np.zeros(p + 1, dtype=np.int64)
    indices = np.empty(p * cfg.k, dtype=np.int64)
    data = np.empty(p * cfg.k, dtype=np.float64)
    y = np.zeros((n, p))
    pos = 0
    for j in range(p):
        x_j = sample_coefficient_vector(cfg, _child_seed(seed, j))
        nnz = x_j.nnz
        indices[pos:pos + nnz] = x_j.indices
        data[pos:pos + nnz] = x_j.values
        pos += nnz
        indptr[j + 1] = pos
        if nnz:
            y[:, j] = a_star[:, x_j.indices] @ x_j.values
    x = SparseCoefficientBatch(sp.csc_array((data[:pos], indices[:pos], indptr), shape=(m, p)))
    return y, x
