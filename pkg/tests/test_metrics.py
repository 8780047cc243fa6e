"""Posterior statistics, image metrics, and calibration binning."""

import math

import numpy as np
import pytest

from aspire.errors import DegenerateInputError, ShapeError
from aspire.metrics import (
    CalibrationReport,
    calibration_curve,
    covariance_frobenius_error,
    covariance_noise_floor,
    posterior_mean,
    posterior_std,
    psnr,
    rmse,
    ssim,
    uce,
)
from aspire.operators import GaussianDensity


class TestPosteriorStats:
    def test_single_sample_mean_is_itself(self):
        v = np.array([[1.0, -2.0, 3.0]])
        np.testing.assert_array_equal(posterior_mean(v), v[0])

    def test_symmetric_pair_mean_is_zero(self):
        v = np.array([1.0, 2.0, -3.0])
        np.testing.assert_array_equal(posterior_mean(np.stack([v, -v])), np.zeros(3))

    def test_mean_clt_bound(self):
        rng = np.random.default_rng(5)
        mu = np.array([2.0, -1.0, 0.5])
        draws = mu + rng.standard_normal((10_000, 3))
        est = posterior_mean(draws)
        assert np.all(np.abs(est - mu) < 3.0 / np.sqrt(10_000))

    def test_identical_samples_zero_std(self):
        draws = np.tile([4.0, 5.0], (7, 1))
        np.testing.assert_array_equal(posterior_std(draws), np.zeros(2))

    def test_plus_minus_one_std(self):
        draws = np.array([[1.0], [-1.0]])
        np.testing.assert_allclose(posterior_std(draws), [1.0])

    def test_std_converges(self):
        rng = np.random.default_rng(6)
        draws = 2.0 * rng.standard_normal((10_000, 1))
        assert abs(posterior_std(draws)[0] - 2.0) / 2.0 < 0.05

    def test_single_sample_std_rejected(self):
        with pytest.raises(DegenerateInputError):
            posterior_std(np.ones((1, 3)))

    def test_permutation_invariance(self):
        # summation order changes round-off, so invariance holds to 1e-12
        rng = np.random.default_rng(7)
        draws = rng.standard_normal((50, 4))
        perm = rng.permutation(50)
        np.testing.assert_allclose(posterior_mean(draws), posterior_mean(draws[perm]),
                                   rtol=0, atol=1e-12)
        np.testing.assert_allclose(posterior_std(draws), posterior_std(draws[perm]),
                                   rtol=0, atol=1e-12)


class TestImageMetrics:
    def test_identical_inputs(self):
        a = np.random.default_rng(0).standard_normal((16, 16))
        assert rmse(a, a) == 0.0
        assert psnr(a, a, 1.0) == math.inf
        assert ssim(a, a, max_val=1.0) == pytest.approx(1.0, abs=1e-9)

    def test_constant_offset_rmse(self):
        a = np.zeros((4, 4))
        assert rmse(a, a + 0.37) == pytest.approx(0.37, rel=1e-12)

    def test_psnr_consistency(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((8, 8))
        b = rng.standard_normal((8, 8))
        r = rmse(a, b)
        assert psnr(a, b, 2.5) == pytest.approx(20 * np.log10(2.5 / r), abs=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            rmse(np.zeros(3), np.zeros(4))

    def test_ssim_degrades_with_noise(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((32, 32))
        noisy = a + 0.5 * rng.standard_normal((32, 32))
        assert ssim(a, noisy, max_val=a.max() - a.min()) < 0.95


class TestCalibration:
    def test_identity_calibration_near_zero_uce(self):
        rng = np.random.default_rng(3)
        truth = rng.standard_normal(4096)
        mean = truth + rng.standard_normal(4096)
        std = np.abs(truth - mean)  # predicted std equals realized error
        report = calibration_curve(std, mean, truth, n_bins=10)
        bin_width = report.bin_edges[1] - report.bin_edges[0]
        assert report.uce <= bin_width / 2

    def test_constant_std_single_populated_bin(self):
        std = np.full(100, 0.5)
        mean = np.zeros(100)
        truth = np.zeros(100)
        report = calibration_curve(std, mean, truth, n_bins=2)
        assert (report.counts > 0).sum() == 1
        assert len(report.empty_bins) == 1

    def test_matches_histogram_oracle(self):
        rng = np.random.default_rng(4)
        std = np.abs(rng.standard_normal(2000)) + 0.01
        truth = rng.standard_normal(2000)
        mean = truth + std * rng.standard_normal(2000)
        k = 7
        report = calibration_curve(std, mean, truth, n_bins=k)

        # brute-force per-pixel binning oracle
        edges = np.linspace(0.0, std.max(), k + 1)
        for b in range(k):
            lo, hi = edges[b], edges[b + 1]
            if b == k - 1:
                members = (std >= lo) & (std <= hi)
            else:
                members = (std >= lo) & (std < hi)
            assert report.counts[b] == members.sum()
            if members.sum():
                assert report.uq_per_bin[b] == pytest.approx(std[members].mean(), abs=1e-12)
                expected_err = np.sqrt(((truth[members] - mean[members]) ** 2).mean())
                assert report.err_per_bin[b] == pytest.approx(expected_err, abs=1e-12)

    def test_counts_total_pixels(self):
        rng = np.random.default_rng(8)
        std = np.abs(rng.standard_normal(777)) + 1e-3
        report = calibration_curve(std, np.zeros(777), np.ones(777), n_bins=10)
        assert report.counts.sum() == 777

    def test_all_zero_std_rejected(self):
        with pytest.raises(DegenerateInputError):
            calibration_curve(np.zeros(10), np.zeros(10), np.ones(10), n_bins=4)


class TestUCE:
    def test_perfect_calibration(self):
        report = CalibrationReport(bin_edges=np.linspace(0, 1, 4),
                                   uq_per_bin=np.array([0.1, 0.5, 0.9]),
                                   err_per_bin=np.array([0.1, 0.5, 0.9]),
                                   counts=np.array([5, 5, 5]), uce=0.0,
                                   empty_bins=())
        assert uce(report) == 0.0

    def test_constant_offset(self):
        report = CalibrationReport(bin_edges=np.linspace(0, 1, 4),
                                   uq_per_bin=np.array([0.1, 0.5, 0.9]),
                                   err_per_bin=np.array([0.1, 0.5, 0.9]) + 0.2,
                                   counts=np.array([5, 5, 5]), uce=0.2,
                                   empty_bins=())
        assert uce(report) == pytest.approx(0.2, abs=1e-15)

    def test_hand_computed_three_bins(self):
        # |0.2-0.1| = 0.1, |0.4-0.7| = 0.3, |0.8-0.8| = 0.0 -> mean 0.4/3
        report = CalibrationReport(bin_edges=np.linspace(0, 1, 4),
                                   uq_per_bin=np.array([0.2, 0.4, 0.8]),
                                   err_per_bin=np.array([0.1, 0.7, 0.8]),
                                   counts=np.array([1, 2, 3]), uce=0.4 / 3,
                                   empty_bins=())
        assert uce(report) == pytest.approx(0.4 / 3, abs=1e-15)

    def test_empty_bins_excluded(self):
        report = CalibrationReport(bin_edges=np.linspace(0, 1, 4),
                                   uq_per_bin=np.array([0.2, 0.0, 0.8]),
                                   err_per_bin=np.array([0.2, 0.0, 0.9]),
                                   counts=np.array([2, 0, 2]), uce=0.05,
                                   empty_bins=(1,))
        assert uce(report) == pytest.approx(0.05, abs=1e-15)


class TestCovarianceError:
    def test_oracle_resampling_below_noise_floor(self):
        rng = np.random.default_rng(9)
        q, _ = np.linalg.qr(rng.standard_normal((16, 16)))
        cov = q @ np.diag(np.linspace(0.2, 1.0, 16)) @ q.T
        oracle = GaussianDensity(mean=np.zeros(16), cov=0.5 * (cov + cov.T))
        floor = covariance_noise_floor(oracle, sample_count=512, repeats=100, seed=1)
        from aspire.operators import sample_gaussian
        draws = sample_gaussian(oracle, 512, np.random.default_rng(123))
        # a single fresh resampling should usually sit at or below the 95th pct
        assert covariance_frobenius_error(draws, oracle) <= 1.5 * floor

    def test_zero_covariance_sentinel(self):
        oracle = GaussianDensity(mean=np.zeros(3), cov=np.zeros((3, 3)))
        draws = np.random.default_rng(0).standard_normal((10, 3))
        assert covariance_frobenius_error(draws, oracle) == 1.0

    def test_empirical_covariance_symmetry(self):
        rng = np.random.default_rng(11)
        draws = rng.standard_normal((64, 5))
        emp = np.cov(draws.T, bias=True)
        np.testing.assert_array_equal(emp, emp.T)
