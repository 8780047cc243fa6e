"""Forward-operator contracts, analytic posterior, and sampling oracles."""

import numpy as np
import pytest

from aspire.errors import FactorizationError, ShapeError
from aspire.operators import (
    GaussianDensity,
    LinearGaussianProblem,
    analytic_ml_estimate,
    analytic_posterior,
    apply_forward,
    make_stylized_problem,
    sample_gaussian,
    simulate_observation,
)


def identity_problem(n=3, sigma=1.0):
    return LinearGaussianProblem(A=np.eye(n), prior_mean=np.zeros(n),
                                 prior_cov=np.eye(n), noise_std=sigma)


class TestApplyForward:
    def test_identity_operator(self):
        p = identity_problem(3)
        np.testing.assert_array_equal(apply_forward(p, np.array([1.0, 2.0, 3.0])),
                                      [1.0, 2.0, 3.0])

    def test_zero_matrix(self):
        p = LinearGaussianProblem(A=np.zeros((4, 3)), prior_mean=np.zeros(3),
                                  prior_cov=np.eye(3), noise_std=1.0)
        np.testing.assert_array_equal(apply_forward(p, np.array([5.0, -2.0, 7.0])),
                                      np.zeros(4))

    def test_matches_elementwise_summation_oracle(self):
        rng = np.random.default_rng(7)
        A = rng.standard_normal((4, 2))
        p = LinearGaussianProblem(A=A, prior_mean=np.zeros(2), prior_cov=np.eye(2),
                                  noise_std=1.0)
        x = rng.standard_normal(2)
        # brute-force dot products, one output component at a time
        expected = np.array([sum(A[i, j] * x[j] for j in range(2)) for i in range(4)])
        np.testing.assert_allclose(apply_forward(p, x), expected, rtol=1e-12)

    def test_shape_error(self):
        p = identity_problem(3)
        with pytest.raises(ShapeError):
            apply_forward(p, np.zeros(4))


class TestSimulateObservation:
    def test_zero_noise_limit(self):
        p = identity_problem(3, sigma=1e-30)
        x = np.array([1.0, -2.0, 0.5])
        obs = simulate_observation(p, x, np.random.default_rng(0))
        np.testing.assert_allclose(obs.data, x, atol=1e-12)

    def test_noise_std_law_of_large_numbers(self):
        n = 2
        m = 1000
        p = LinearGaussianProblem(A=np.zeros((m, n)), prior_mean=np.zeros(n),
                                  prior_cov=np.eye(n), noise_std=1.0)
        rng = np.random.default_rng(123)
        draws = []
        for _ in range(100):
            obs = simulate_observation(p, np.zeros(n), rng)
            draws.append(obs.data)  # F(x) = 0 so data is pure noise
        noise = np.concatenate(draws)
        assert noise.size == 100_000
        assert abs(noise.std() - 1.0) < 0.02

    def test_distinct_seeds_differ(self):
        p = identity_problem(3)
        x = np.ones(3)
        a = simulate_observation(p, x, np.random.default_rng(1))
        b = simulate_observation(p, x, np.random.default_rng(2))
        assert not np.array_equal(a.data, b.data)

    def test_same_seed_replays(self):
        p = identity_problem(3)
        x = np.ones(3)
        a = simulate_observation(p, x, np.random.default_rng(9))
        b = simulate_observation(p, x, np.random.default_rng(9))
        np.testing.assert_array_equal(a.data, b.data)
        assert a.rng_seed == b.rng_seed


class TestAdjointJacobian:
    def test_identity(self):
        p = identity_problem(2)
        np.testing.assert_array_equal(
            p.adjoint_jacobian_apply(np.zeros(2), np.array([5.0, -5.0])), [5.0, -5.0])

    def test_zero_residual(self):
        p = make_stylized_problem(0, n=4, m=6)
        np.testing.assert_array_equal(
            p.adjoint_jacobian_apply(np.zeros(4), np.zeros(6)), np.zeros(4))

    def test_dot_test(self):
        p = make_stylized_problem(3, n=5, m=7)
        rng = np.random.default_rng(17)
        for _ in range(100):
            x = rng.standard_normal(5)
            r = rng.standard_normal(7)
            lhs = np.dot(p.jacobian_apply(None, x), r)
            rhs = np.dot(x, p.adjoint_jacobian_apply(None, r))
            assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs), 1e-30)


class TestAnalyticPosterior:
    def test_symmetric_conjugate_case(self):
        p = identity_problem(3, sigma=1.0)
        y = np.array([0.4, -1.2, 2.0])
        post = analytic_posterior(p, y)
        np.testing.assert_allclose(post.mean, y / 2, rtol=1e-12)
        np.testing.assert_allclose(post.cov, np.eye(3) / 2, rtol=1e-12)

    def test_uninformative_likelihood_recovers_prior(self):
        p = make_stylized_problem(5, n=4, m=6, noise_std=1e15)
        post = analytic_posterior(p, np.zeros(6))
        np.testing.assert_allclose(post.mean, p.prior_mean, rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(post.cov, p.prior_cov, rtol=1e-10)

    def test_matches_importance_sampling_oracle(self):
        p = make_stylized_problem(11, n=3, m=5, noise_std=0.8)
        rng = np.random.default_rng(42)
        x_true = sample_gaussian(p.prior, 1, rng)[0]
        y = p.A @ x_true + p.noise_std * rng.standard_normal(5)
        post = analytic_posterior(p, y)

        # self-normalized importance sampling with the prior as proposal
        draws = sample_gaussian(p.prior, 1_000_000, np.random.default_rng(1))
        resid = draws @ p.A.T - y[None, :]
        logw = -0.5 * np.sum(resid**2, axis=1) / p.noise_std**2
        w = np.exp(logw - logw.max())
        w /= w.sum()
        mean_is = w @ draws
        np.testing.assert_allclose(post.mean, mean_is, rtol=5e-3, atol=5e-3)
        centered = draws - mean_is
        cov_is = (centered * w[:, None]).T @ centered
        np.testing.assert_allclose(post.cov, cov_is, rtol=0.05, atol=0.01)

    def test_posterior_contraction(self):
        p = make_stylized_problem(2, n=6, m=12)
        post = analytic_posterior(p, np.zeros(12))
        eigs = np.linalg.eigvalsh(p.prior_cov - post.cov)
        assert eigs.min() >= -1e-10

    def test_small_noise_inverts_square_system(self):
        rng = np.random.default_rng(8)
        A = rng.standard_normal((4, 4)) + 4 * np.eye(4)
        p = LinearGaussianProblem(A=A, prior_mean=np.zeros(4), prior_cov=np.eye(4),
                                  noise_std=1e-8)
        y = rng.standard_normal(4)
        post = analytic_posterior(p, y)
        np.testing.assert_allclose(post.mean, np.linalg.solve(A, y), rtol=1e-8)


class TestAnalyticMLEstimate:
    def test_identity(self):
        p = identity_problem(2)
        np.testing.assert_allclose(analytic_ml_estimate(p, np.array([3.0, -1.0])),
                                   [3.0, -1.0], rtol=1e-14)

    def test_zero_data(self):
        p = make_stylized_problem(4, n=3, m=6)
        np.testing.assert_array_equal(analytic_ml_estimate(p, np.zeros(6)), np.zeros(3))

    def test_matches_gaussian_elimination_on_normal_equations(self):
        rng = np.random.default_rng(21)
        A = rng.standard_normal((6, 2))
        p = LinearGaussianProblem(A=A, prior_mean=np.zeros(2), prior_cov=np.eye(2),
                                  noise_std=1.0)
        y = rng.standard_normal(6)

        # independent Gaussian elimination on A^T A x = A^T y
        M = A.T @ A
        b = A.T @ y
        aug = np.concatenate([M, b[:, None]], axis=1).astype(float)
        for col in range(2):
            pivot = col + np.argmax(np.abs(aug[col:, col]))
            aug[[col, pivot]] = aug[[pivot, col]]
            aug[col] = aug[col] / aug[col, col]
            for row in range(2):
                if row != col:
                    aug[row] -= aug[row, col] * aug[col]
        expected = aug[:, -1]
        np.testing.assert_allclose(analytic_ml_estimate(p, y), expected, rtol=1e-10)


class TestSampleGaussian:
    def test_zero_covariance_returns_mean(self):
        g = GaussianDensity(mean=np.array([1.0, 2.0]), cov=np.zeros((2, 2)))
        samples = sample_gaussian(g, 5, np.random.default_rng(0))
        np.testing.assert_array_equal(samples, np.tile([1.0, 2.0], (5, 1)))

    def test_identity_covariance_empirical(self):
        g = GaussianDensity(mean=np.zeros(4), cov=np.eye(4))
        samples = sample_gaussian(g, 100_000, np.random.default_rng(3))
        emp = np.cov(samples.T, bias=True)
        assert np.linalg.norm(emp - np.eye(4), ord="fro") < 0.05

    def test_seed_replay(self):
        g = GaussianDensity(mean=np.zeros(3), cov=np.eye(3))
        a = sample_gaussian(g, 10, np.random.default_rng(7))
        b = sample_gaussian(g, 10, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)

    def test_non_psd_rejected(self):
        with pytest.raises(FactorizationError):
            GaussianDensity(mean=np.zeros(2), cov=np.array([[1.0, 0.0], [0.0, -1.0]]))


class TestProblemValidation:
    def test_asymmetric_prior_rejected(self):
        cov = np.array([[1.0, 0.5], [0.1, 1.0]])
        with pytest.raises(ShapeError):
            LinearGaussianProblem(A=np.eye(2), prior_mean=np.zeros(2),
                                  prior_cov=cov, noise_std=1.0)

    def test_posterior_mean_interpolates_to_prior(self):
        p = make_stylized_problem(6, n=4, m=8, noise_std=1e15)
        post = analytic_posterior(p, 100 * np.ones(8))
        assert np.linalg.norm(post.mean - p.prior_mean) <= 1e-8 * np.linalg.norm(p.prior_mean)

    def test_counter_tracks_forward_equivalents(self):
        p = make_stylized_problem(1, n=3, m=4)
        start = p.counter.snapshot()
        p.apply_forward(np.zeros(3))
        p.adjoint_jacobian_apply(np.zeros(3), np.zeros(4))
        assert p.counter.snapshot() - start == 2.0
