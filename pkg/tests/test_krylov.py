"""Tests for the Krylov exponential-times-vector routines."""

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.sparse.linalg import aslinearoperator

from app.core.errors import KrylovError
from app.core.krylov import (
    estimate_norm,
    exp_times_vector,
    expv,
    krylov_exponential,
    trace_estimate,
)


@pytest.fixture
def generator():
    """A symmetric negative definite 40 x 40 matrix."""
    rng = np.random.default_rng(3)
    a = rng.standard_normal((40, 40))
    return -(a @ a.T) / 40.0 - np.eye(40)


@pytest.fixture
def start():
    return np.random.default_rng(4).standard_normal(40)


class TestExpv:
    """Tests for the adaptive Arnoldi route."""

    def test_matches_dense_exponential(self, generator, start):
        """Should agree with the dense matrix exponential at every output time."""
        times = [0.1, 0.5, 1.0]
        results = expv(aslinearoperator(generator), start, times, tol=1e-10)
        for t, result in zip(times, results):
            expected = expm(t * generator) @ start
            np.testing.assert_allclose(result, expected, rtol=1e-7, atol=1e-9)

    def test_zero_generator_returns_copies(self, start):
        """Should return the start vector unchanged when the generator vanishes."""
        results = expv(aslinearoperator(np.zeros((40, 40))), start, [0.5, 1.0])
        for result in results:
            np.testing.assert_array_equal(result, start)
            assert result is not start

    def test_zero_vector(self, generator):
        """Should map the zero vector to zero."""
        (result,) = expv(aslinearoperator(generator), np.zeros(40), [1.0])
        assert np.all(result == 0.0)

    @pytest.mark.parametrize("times", [[], [0.0], [-1.0], [1.0, 0.5]])
    def test_rejects_bad_times(self, generator, start, times):
        """Should raise KrylovError for empty, non-positive or unsorted times."""
        with pytest.raises(KrylovError):
            expv(aslinearoperator(generator), start, times)


class TestDispatch:
    """Tests for method selection and the helper estimates."""

    def test_expm_multiply_route(self, generator, start):
        """Should reproduce the dense result through scipy's expm_multiply."""
        (result,) = exp_times_vector(aslinearoperator(generator), start, [0.3], "expm_multiply")
        np.testing.assert_allclose(result, expm(0.3 * generator) @ start, rtol=1e-7, atol=1e-9)

    def test_unknown_method(self, generator, start):
        """Should raise KrylovError for an unknown method name."""
        with pytest.raises(KrylovError):
            exp_times_vector(aslinearoperator(generator), start, [0.3], "pade")

    def test_norm_estimate_bounds_spectrum(self, generator):
        """Should not underestimate the spectral radius."""
        radius = np.max(np.abs(np.linalg.eigvalsh(generator)))
        assert estimate_norm(aslinearoperator(generator), iterations=200) >= radius

    def test_trace_estimate_of_diagonal(self):
        """Should be exact for diagonal matrices with Rademacher vectors."""
        diagonal = np.diag(np.arange(1.0, 11.0))
        assert trace_estimate(aslinearoperator(diagonal)) == pytest.approx(55.0)


class TestAdaptiveSubspace:
    """Tests for the growth of the Krylov dimension."""

    def test_problem_smaller_than_subspace(self):
        """Should cap the dimension at the problem size and stay exact."""
        rng = np.random.default_rng(7)
        a = rng.standard_normal((10, 10))
        generator = -(a @ a.T) / 10.0
        start = rng.standard_normal(10)
        result = krylov_exponential(aslinearoperator(generator), start, [0.5, 2.0], tol=1e-10)
        assert result.subspace <= 10
        for t, vector in zip([0.5, 2.0], result.vectors):
            np.testing.assert_allclose(vector, expm(t * generator) @ start, rtol=1e-8, atol=1e-10)

    def test_stiff_generator_grows_subspace(self):
        """Should enlarge a small starting subspace for a stiff generator and stay accurate."""
        eigenvalues = np.linspace(0.0, 2000.0, 300)
        generator = -np.diag(eigenvalues)
        start = np.ones(300) / np.sqrt(300.0)
        result = krylov_exponential(
            aslinearoperator(generator), start, [1.0], tol=1e-8, subspace=4, max_subspace=60
        )
        assert result.subspace > 4
        np.testing.assert_allclose(result.vectors[0], np.exp(-eigenvalues) * start, atol=1e-6)

    def test_rejects_empty_subspace(self, generator, start):
        """Should raise KrylovError for a non-positive Krylov dimension."""
        with pytest.raises(KrylovError):
            krylov_exponential(aslinearoperator(generator), start, [1.0], subspace=0)
