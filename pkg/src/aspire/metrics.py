"""Posterior statistics, image-quality metrics, and uncertainty calibration.

All functions are pure: identical inputs give bit-identical outputs.
Sample sets are arrays whose first axis indexes samples; grids and vectors
are both accepted since everything reduces along axis 0 or is flattened.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import DegenerateInputError, ShapeError
from .operators import GaussianDensity


@dataclass(frozen=True)
class SampleSet:
    """Posterior samples (first axis) tagged with the conditioning id."""

    samples: np.ndarray
    condition_id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim < 2 or samples.shape[0] < 1:
            raise ShapeError("samples must be a non-empty stack of vectors or grids")
        object.__setattr__(self, "samples", samples)


def _as_samples(s) -> np.ndarray:
    arr = s.samples if isinstance(s, SampleSet) else np.asarray(s, dtype=float)
    if arr.ndim < 2 or arr.shape[0] < 1:
        raise ShapeError("expected a non-empty stack of samples")
    return arr


def posterior_mean(s) -> np.ndarray:
    """Arithmetic mean over samples."""
    return _as_samples(s).mean(axis=0)


def posterior_std(s) -> np.ndarray:
    """Pointwise root-mean-square deviation from the mean (divisor S)."""
    arr = _as_samples(s)
    if arr.shape[0] < 2:
        raise DegenerateInputError("standard deviation needs at least 2 samples")
    return arr.std(axis=0)


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def psnr(a: np.ndarray, b: np.ndarray, max_val: float) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical inputs."""
    err = rmse(a, b)
    if err == 0.0:
        return math.inf
    return float(20.0 * np.log10(max_val / err))


def ssim(a: np.ndarray, b: np.ndarray, max_val: float | None = None,
         window: int = 8) -> float:
    """Structural similarity with a uniform window and standard stabilizers."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ShapeError("ssim expects 2D images")
    if max_val is None:
        max_val = max(a.max() - a.min(), b.max() - b.min(), 1e-12)
    c1 = (0.01 * max_val) ** 2
    c2 = (0.03 * max_val) ** 2

    mu_a = uniform_filter(a, size=window)
    mu_b = uniform_filter(b, size=window)
    var_a = uniform_filter(a * a, size=window) - mu_a**2
    var_b = uniform_filter(b * b, size=window) - mu_b**2
    cov_ab = uniform_filter(a * b, size=window) - mu_a * mu_b

    num = (2 * mu_a * mu_b + c1) * (2 * cov_ab + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    ssim_map = num / den

    # crop to windows fully inside the image
    half = window // 2
    core = ssim_map[half:-half or None, half:-half or None]
    return float(core.mean())


@dataclass(frozen=True)
class CalibrationReport:
    """Binned predicted-uncertainty versus realized-error pairs."""

    bin_edges: np.ndarray
    uq_per_bin: np.ndarray
    err_per_bin: np.ndarray
    counts: np.ndarray
    uce: float
    empty_bins: tuple
    squared_error: bool = False

    @property
    def n_bins(self) -> int:
        return self.counts.size


def calibration_curve(std_img: np.ndarray, mean_img: np.ndarray,
                      ground_truth: np.ndarray, n_bins: int = 10,
                      squared_error: bool = False) -> CalibrationReport:
    """Bin pixels by predicted std and compare against realized error.

    Bins are of equal width spanning [0, max(std)].  Per bin, UQ is the
    mean predicted std and Error is the root of the mean squared error
    (so both axes share units); pass squared_error=True for the raw
    mean-square variant.  Empty bins are excluded from the UCE and
    recorded in the report.
    """
    std = np.asarray(std_img, dtype=float).ravel()
    mean = np.asarray(mean_img, dtype=float).ravel()
    truth = np.asarray(ground_truth, dtype=float).ravel()
    if not (std.size == mean.size == truth.size):
        raise ShapeError("std, mean and ground truth must have matching sizes")
    if n_bins < 2:
        raise ValueError("need at least 2 bins")
    top = std.max()
    if top <= 0.0:
        raise DegenerateInputError("predicted std is identically zero")

    edges = np.linspace(0.0, top, n_bins + 1)
    # right-closed last bin so the max std lands in bin n_bins - 1
    idx = np.minimum(np.digitize(std, edges[1:-1], right=False), n_bins - 1)
    sq_err = (truth - mean) ** 2

    counts = np.zeros(n_bins, dtype=int)
    uq = np.zeros(n_bins)
    err = np.zeros(n_bins)
    for k in range(n_bins):
        members = idx == k
        counts[k] = int(members.sum())
        if counts[k] > 0:
            uq[k] = std[members].mean()
            mse = sq_err[members].mean()
            err[k] = mse if squared_error else np.sqrt(mse)
    populated = counts > 0
    empty = tuple(int(k) for k in np.flatnonzero(~populated))
    uce_val = float(np.abs(uq[populated] - err[populated]).mean())
    return CalibrationReport(bin_edges=edges, uq_per_bin=uq, err_per_bin=err,
                             counts=counts, uce=uce_val, empty_bins=empty,
                             squared_error=squared_error)


def uce(report: CalibrationReport) -> float:
    """Mean absolute gap between UQ and Error over populated bins."""
    populated = report.counts > 0
    if not populated.any():
        raise DegenerateInputError("no populated bins")
    return float(np.abs(report.uq_per_bin[populated]
                        - report.err_per_bin[populated]).mean())


def covariance_frobenius_error(samples, oracle: GaussianDensity) -> float:
    """Relative Frobenius distance of the empirical covariance to the oracle.

    Returns the sentinel 1.0 when the oracle covariance is exactly zero.
    """
    arr = _as_samples(samples)
    if arr.shape[0] < 2:
        raise DegenerateInputError("need at least 2 samples")
    flat = arr.reshape(arr.shape[0], -1)
    emp = np.cov(flat.T, bias=True)
    emp = np.atleast_2d(emp)
    ref_norm = np.linalg.norm(oracle.cov, ord="fro")
    if ref_norm == 0.0:
        return 1.0
    return float(np.linalg.norm(emp - oracle.cov, ord="fro") / ref_norm)


def covariance_noise_floor(oracle: GaussianDensity, sample_count: int,
                           repeats: int = 100, quantile: float = 95.0,
                           seed: int = 0) -> float:
    """Self-noise floor of the empirical covariance estimator.

    Resamples the oracle `repeats` times and returns the requested
    percentile of the relative Frobenius errors.
    """
    from .operators import sample_gaussian

    rng = np.random.default_rng(seed)
    errors = [covariance_frobenius_error(sample_gaussian(oracle, sample_count, rng),
                                         oracle)
              for _ in range(repeats)]
    return float(np.percentile(errors, quantile))


def sample_count_convergence(model, y_obs, counts, metric, ground_truth,
                             rng: np.random.Generator):
    """Metric of the posterior mean versus ground truth at nested sample counts.

    The largest count is drawn once; smaller counts reuse its prefix, so
    sample sets are nested.  Returns a list of (count, metric value) rows.
    """
    counts = [int(c) for c in counts]
    if counts != sorted(counts):
        raise ValueError("counts must be ascending")
    samples = model.final_samples(y_obs, counts[-1], rng)
    truth = np.asarray(ground_truth, dtype=float)
    rows = []
    for c in counts:
        est = samples[:c].mean(axis=0)
        rows.append((c, float(metric(est, truth))))
    return rows
