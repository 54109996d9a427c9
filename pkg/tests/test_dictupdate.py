"""Dictionary update tests: gradient estimate, step, renormalization."""

import numpy as np
import pytest

from conftest import random_sparse_columns, unit_columns
from noodl.dictupdate import (
    DegenerateAtomError,
    default_eta_a,
    empirical_gradient,
    forward_residual,
    gradient_step,
    normalize_columns,
)
from noodl.model import SparseCoefficientBatch


def instance(n=20, m=30, p=15, k=4, seed=0):
    rng = np.random.default_rng(seed)
    a = unit_columns(n, m, seed=seed)
    x = random_sparse_columns(m, p, k, seed=seed + 1)
    y = rng.standard_normal((n, p))
    return a, SparseCoefficientBatch.from_dense(x), y


def naive_gradient(a, x_dense, y):
    """Reference implementation: explicit per-sample outer products."""
    n, _ = a.shape
    m, p = x_dense.shape
    total = np.zeros((n, m))
    for j in range(p):
        residual = a @ x_dense[:, j] - y[:, j]
        total += np.outer(residual, np.sign(x_dense[:, j]))
    return total / p


class TestForwardResidual:
    def test_matches_dense(self):
        a, x, y = instance(seed=1)
        np.testing.assert_allclose(
            forward_residual(a, x, y), a @ x.to_dense() - y, atol=1e-13)


class TestEmpiricalGradient:
    def test_matches_naive_loop(self):
        for seed in range(5):
            a, x, y = instance(seed=seed)
            est = empirical_gradient(a, y, x)
            np.testing.assert_allclose(est.matrix, naive_gradient(a, x.to_dense(), y), atol=1e-13)

    def test_zero_at_exact_fit(self):
        """Residual-free data yields an exactly zero gradient."""
        a, x, _ = instance(seed=6)
        y = forward_residual(a, x, np.zeros((a.shape[0], x.p)))  # y = A x, same operator
        est = empirical_gradient(a, y, x)
        np.testing.assert_array_equal(est.matrix, np.zeros_like(a))

    def test_near_zero_at_exact_fit_dense_data(self):
        """Data built by a dense product leaves only rounding in the gradient."""
        a, x, _ = instance(seed=6)
        est = empirical_gradient(a, a @ x.to_dense(), x)
        np.testing.assert_allclose(est.matrix, 0.0, atol=1e-15)

    def test_p_used_counts_supported_samples(self):
        a, _, y = instance(m=10, p=4, seed=7)
        x = np.zeros((10, 4))
        x[2, 0] = 1.0
        x[5, 2] = -2.0
        est = empirical_gradient(a, y, SparseCoefficientBatch.from_dense(x))
        assert est.p_used == 2

    def test_normalization_is_full_batch(self):
        """The 1/p average runs over all samples, supported or not."""
        a, _, y = instance(m=10, p=4, seed=8)
        x = np.zeros((10, 4))
        x[3, 1] = 2.0
        est = empirical_gradient(a, y, SparseCoefficientBatch.from_dense(x))
        residual = a @ x[:, 1] - y[:, 1]
        np.testing.assert_allclose(est.matrix[:, 3], residual / 4, atol=1e-14)

    def test_empty_batch_rejected(self):
        a = unit_columns(8, 12, seed=9)
        empty = SparseCoefficientBatch.from_dense(np.zeros((12, 0)))
        with pytest.raises(ValueError):
            empirical_gradient(a, np.zeros((8, 0)), empty)

    def test_deterministic(self):
        a, x, y = instance(n=40, m=60, p=200, k=6, seed=10)
        g1 = empirical_gradient(a, y, x).matrix
        g2 = empirical_gradient(a, y, x).matrix
        np.testing.assert_array_equal(g1, g2)


class TestGradientStep:
    def test_formula(self):
        a, x, y = instance(seed=11)
        est = empirical_gradient(a, y, x)
        np.testing.assert_array_equal(gradient_step(a, est, 0.5), a - 0.5 * est.matrix)

    def test_zero_rate_is_identity(self):
        a, x, y = instance(seed=12)
        est = empirical_gradient(a, y, x)
        np.testing.assert_array_equal(gradient_step(a, est, 0.0), a)

    def test_negative_rate_rejected(self):
        a, x, y = instance(seed=13)
        est = empirical_gradient(a, y, x)
        with pytest.raises(ValueError):
            gradient_step(a, est, -0.1)


class TestNormalizeColumns:
    def test_unit_output(self):
        rng = np.random.default_rng(14)
        out = normalize_columns(rng.standard_normal((20, 30)) * 5)
        np.testing.assert_allclose(np.linalg.norm(out, axis=0), 1.0, atol=1e-14)

    def test_idempotent(self):
        rng = np.random.default_rng(15)
        once = normalize_columns(rng.standard_normal((20, 30)))
        twice = normalize_columns(once)
        np.testing.assert_allclose(twice, once, atol=1e-15)

    def test_degenerate_column_named(self):
        a = unit_columns(10, 5, seed=16)
        a[:, 3] = 0.0
        with pytest.raises(DegenerateAtomError, match="3"):
            normalize_columns(a)

    @pytest.mark.filterwarnings("ignore:overflow encountered")
    def test_overflowing_column_is_degenerate(self):
        # entries finite, but their squares overflow: the norm comes out
        # inf and the column cannot be rescaled
        a = unit_columns(10, 5, seed=17)
        a[:, 2] = 1e200
        with pytest.raises(DegenerateAtomError, match="2"):
            normalize_columns(a)

    def test_nan_column_is_degenerate(self):
        a = unit_columns(10, 5, seed=18)
        a[0, 4] = np.nan
        with pytest.raises(DegenerateAtomError, match="4"):
            normalize_columns(a)


class TestDefaultEtaA:
    def test_values(self):
        assert default_eta_a(1500, 10) == pytest.approx(30.0)
        assert default_eta_a(1500, 100, scale=1.0) == pytest.approx(15.0)
        assert default_eta_a(150, 3, scale=0.2) == pytest.approx(10.0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            default_eta_a(10, 0)
