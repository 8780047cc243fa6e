"""Forward-problem interface and the linear-Gaussian instance with analytic oracles.

A forward problem bundles the deterministic operator F, its Jacobian action
and adjoint, and an additive Gaussian noise model.  The linear-Gaussian
problem (F = A, Gaussian prior) additionally admits a closed-form posterior
and maximum-likelihood estimate, which the rest of the package uses as
ground truth when validating the learned samplers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import FactorizationError, ShapeError


class SolveCounter:
    """Running count of forward-equivalent operator evaluations.

    One forward simulation costs 1; one adjoint application costs 1, so a
    misfit gradient costs 2.  Partial-geometry solves may add fractions.
    This is bookkeeping only; it does not affect any computation.
    """

    def __init__(self):
        self.forward_equivalents = 0.0

    def add(self, amount: float = 1.0):
        if amount < 0:
            raise ValueError("counter increments must be non-negative")
        self.forward_equivalents += amount

    def snapshot(self) -> float:
        return self.forward_equivalents


@dataclass(frozen=True)
class Observation:
    """Observed data vector tagged with its originating problem and seed."""

    data: np.ndarray
    problem_id: str
    rng_seed: int


@dataclass(frozen=True)
class GaussianDensity:
    """Mean vector plus symmetric positive-semidefinite covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if cov.shape != (mean.size, mean.size):
            raise ShapeError(f"cov shape {cov.shape} does not match mean size {mean.size}")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-10 * max(1.0, np.abs(cov).max())):
            raise ShapeError("covariance must be symmetric")
        eigs = np.linalg.eigvalsh(0.5 * (cov + cov.T))
        if eigs.min() < -1e-10 * max(np.trace(cov), 1e-300):
            raise FactorizationError(f"covariance has negative eigenvalue {eigs.min():g}")

    @property
    def dim(self) -> int:
        return self.mean.size


def cholesky_with_jitter(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, retrying once with trace-scaled jitter.

    Exactly-zero covariances factor to the zero matrix so that degenerate
    densities remain usable (every sample equals the mean).
    """
    cov = np.asarray(cov, dtype=float)
    if not np.any(cov):
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        jitter = 1e-10 * np.trace(cov) / cov.shape[0]
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise FactorizationError("covariance is not positive semidefinite") from exc


class ForwardProblem:
    """Abstract forward operator with adjoint-Jacobian action and noise model.

    Subclasses implement `apply_forward`, `jacobian_apply` and
    `adjoint_jacobian_apply`; this base supplies observation simulation
    with additive Gaussian noise and the score-summary helper shared by
    all problems.  Instances are immutable after construction except for
    the solve counter, which is advisory bookkeeping.
    """

    name: str
    dim_x: int
    dim_y: int
    noise_std: float

    def __init__(self, name: str, dim_x: int, dim_y: int, noise_std: float):
        if dim_x < 1 or dim_y < 1:
            raise ShapeError("dim_x and dim_y must be positive")
        if noise_std <= 0:
            raise ValueError("noise_std must be positive")
        self.name = name
        self.dim_x = int(dim_x)
        self.dim_y = int(dim_y)
        self.noise_std = float(noise_std)
        self.counter = SolveCounter()

    # -- required operator actions -------------------------------------------------

    def apply_forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian_apply(self, x0: np.ndarray, dx: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint_jacobian_apply(self, x0: np.ndarray, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- shared behaviour ----------------------------------------------------------

    def _check_x(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim_x,):
            raise ShapeError(f"parameter vector has shape {x.shape}, expected ({self.dim_x},)")
        return x

    def _check_y(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.dim_y,):
            raise ShapeError(f"data vector has shape {y.shape}, expected ({self.dim_y},)")
        return y

    def simulate_observation(self, x: np.ndarray, rng: np.random.Generator) -> Observation:
        """F(x) plus i.i.d. Normal(0, noise_std**2) noise."""
        seed = int(rng.integers(0, 2**63 - 1))
        noise_rng = np.random.default_rng(seed)
        clean = self.apply_forward(x)
        data = clean + self.noise_std * noise_rng.standard_normal(self.dim_y)
        return Observation(data=data, problem_id=self.name, rng_seed=seed)

    def score(self, x0: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Gradient-of-log-likelihood summary at x0, up to the noise scale.

        Returns the adjoint Jacobian applied to the residual F(x0) - y.
        Costs one forward plus one adjoint application.
        """
        residual = self.apply_forward(x0) - self._check_y(y)
        return self.adjoint_jacobian_apply(x0, residual)

    def summary_mask(self, summary: np.ndarray) -> np.ndarray:
        """Hook for masking summaries; identity unless overridden."""
        return summary


class LinearGaussianProblem(ForwardProblem):
    """F(x) = A x with Gaussian prior and Gaussian noise."""

    def __init__(self, A: np.ndarray, prior_mean: np.ndarray, prior_cov: np.ndarray,
                 noise_std: float, name: str = "linear-gaussian"):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2:
            raise ShapeError("A must be a matrix")
        m, n = A.shape
        super().__init__(name=name, dim_x=n, dim_y=m, noise_std=noise_std)
        prior_mean = np.asarray(prior_mean, dtype=float)
        prior_cov = np.asarray(prior_cov, dtype=float)
        if prior_mean.shape != (n,):
            raise ShapeError("prior_mean length must equal dim_x")
        if prior_cov.shape != (n, n):
            raise ShapeError("prior_cov must be dim_x by dim_x")
        scale = max(np.abs(prior_cov).max(), 1e-300)
        if np.abs(prior_cov - prior_cov.T).max() > 1e-12 * scale:
            raise ShapeError("prior_cov must be symmetric to 1e-12 relative")
        self.A = A
        self.prior_mean = prior_mean
        self.prior_cov = 0.5 * (prior_cov + prior_cov.T)
        # fail fast on non-SPD priors
        self._prior_chol = cholesky_with_jitter(self.prior_cov)

    def apply_forward(self, x: np.ndarray) -> np.ndarray:
        x = self._check_x(x)
        self.counter.add(1.0)
        return self.A @ x

    def jacobian_apply(self, x0: np.ndarray, dx: np.ndarray) -> np.ndarray:
        dx = self._check_x(dx)
        self.counter.add(1.0)
        return self.A @ dx

    def adjoint_jacobian_apply(self, x0: np.ndarray, r: np.ndarray) -> np.ndarray:
        r = self._check_y(r)
        self.counter.add(1.0)
        return self.A.T @ r

    @property
    def prior(self) -> GaussianDensity:
        return GaussianDensity(mean=self.prior_mean, cov=self.prior_cov)

    def sample_prior(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return sample_gaussian(self.prior, count, rng)


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------


def apply_forward(problem: ForwardProblem, x: np.ndarray) -> np.ndarray:
    """Noiseless forward map F(x)."""
    return problem.apply_forward(x)


def simulate_observation(problem: ForwardProblem, x: np.ndarray,
                         rng: np.random.Generator) -> Observation:
    """Noisy observation of F(x); identical seeds replay identically."""
    return problem.simulate_observation(x, rng)


def adjoint_jacobian_apply(problem: ForwardProblem, x0: np.ndarray,
                           r: np.ndarray) -> np.ndarray:
    """Adjoint Jacobian at linearization point x0 applied to data vector r."""
    return problem.adjoint_jacobian_apply(x0, r)


def analytic_posterior(problem: LinearGaussianProblem, y) -> GaussianDensity:
    """Conjugate Gaussian posterior for a linear-Gaussian problem.

    cov = (A^T A / sigma^2 + prior_cov^-1)^-1
    mean = cov (A^T y / sigma^2 + prior_cov^-1 prior_mean)
    """
    data = y.data if isinstance(y, Observation) else np.asarray(y, dtype=float)
    if data.shape != (problem.dim_y,):
        raise ShapeError("observation shape does not match problem dim_y")
    A, s2 = problem.A, problem.noise_std**2
    prior_chol = scipy.linalg.cho_factor(
        problem.prior_cov + 0.0, lower=True, check_finite=False)
    prior_prec = scipy.linalg.cho_solve(prior_chol, np.eye(problem.dim_x),
                                        check_finite=False)
    precision = A.T @ A / s2 + prior_prec
    post_chol = scipy.linalg.cho_factor(precision, lower=True, check_finite=False)
    cov = scipy.linalg.cho_solve(post_chol, np.eye(problem.dim_x), check_finite=False)
    cov = 0.5 * (cov + cov.T)
    mean = cov @ (A.T @ data / s2 + prior_prec @ problem.prior_mean)
    return GaussianDensity(mean=mean, cov=cov)


def analytic_ml_estimate(problem: LinearGaussianProblem, y) -> np.ndarray:
    """Minimum-norm least-squares solution of A x = y (SVD pseudo-inverse)."""
    data = y.data if isinstance(y, Observation) else np.asarray(y, dtype=float)
    if data.shape != (problem.dim_y,):
        raise ShapeError("observation shape does not match problem dim_y")
    solution, *_ = np.linalg.lstsq(problem.A, data, rcond=None)
    return solution


def sample_gaussian(g: GaussianDensity, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `count` samples from g; rows are samples."""
    if count < 1:
        raise ValueError("count must be at least 1")
    chol = cholesky_with_jitter(g.cov)
    z = rng.standard_normal((count, g.dim))
    return g.mean[None, :] + z @ chol.T


def make_stylized_problem(seed: int, n: int = 16, m: int = 80,
                          noise_std: float = 0.2) -> LinearGaussianProblem:
    """Seeded random linear-Gaussian instance used throughout the tests.

    A has i.i.d. Normal(0, 1)/sqrt(m) entries; the prior covariance is
    Q diag(lambda) Q^T with Q a random orthogonal matrix and lambda
    log-uniform in [0.1, 1]; the prior mean has standard-normal entries.
    """
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n)) / np.sqrt(m)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.exp(rng.uniform(np.log(0.1), np.log(1.0), size=n))
    cov = q @ np.diag(lam) @ q.T
    cov = 0.5 * (cov + cov.T)
    mean = rng.standard_normal(n)
    return LinearGaussianProblem(A=A, prior_mean=mean, prior_cov=cov,
                                 noise_std=noise_std,
                                 name=f"stylized-n{n}-m{m}-s{seed}")
