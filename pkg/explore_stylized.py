"""Scratch run: stylized-problem ASPIRE quality per iteration (not shipped)."""
import time

import numpy as np

from aspire.flow import ArchConfig, TrainConfig
from aspire.metrics import covariance_frobenius_error, covariance_noise_floor, rmse
from aspire.operators import analytic_posterior, make_stylized_problem, simulate_observation
from aspire.refinement import AspireConfig, infer, lemma1_check, train_aspire

t0 = time.time()
problem = make_stylized_problem(1234, n=16, m=80, noise_std=0.2)
rng = np.random.default_rng(77)
xs = problem.sample_prior(1000, rng)

arch = ArchConfig(n_couplings=6, hidden=64, embed_width=128, embed_hidden=128, split_seed=0)
tcfg = TrainConfig(learning_rate=8e-4, batch_size=8, max_epochs=120, patience=10, seed=0)
acfg = AspireConfig(iterations=3, fiducial_samples=64, arch=arch)

model, ledger = train_aspire(problem, xs, tcfg, acfg,
                             np.random.default_rng(99),
                             progress=lambda j, h: print(
                                 f"iter {j}: epochs={h.epochs_run} best={h.best_epoch} "
                                 f"val={min(h.val_objective):.3f} t={time.time()-t0:.0f}s",
                                 flush=True))
print("ledger:", ledger.offline_solves, "expected", 1000 + 2 * 1000 * 3)

# per-iteration covariance error over 20 test observations
test_rng = np.random.default_rng(555)
cov_errs = {j: [] for j in range(3)}
mean_rmse = {j: [] for j in range(3)}
for t in range(20):
    x_true = problem.sample_prior(1, test_rng)[0]
    y = simulate_observation(problem, x_true, test_rng)
    post = analytic_posterior(problem, y)
    result, _ = infer(model, y, 512, np.random.default_rng(1000 + t))
    for j in range(3):
        draws = result.samples_per_iteration[j]
        cov_errs[j].append(covariance_frobenius_error(draws, post))
        mean_rmse[j].append(rmse(draws.mean(axis=0), post.mean))

floor = covariance_noise_floor(analytic_posterior(problem, simulate_observation(
    problem, problem.sample_prior(1, np.random.default_rng(7))[0],
    np.random.default_rng(8))), 512, seed=3)
print("noise floor (512 draws):", round(floor, 4))
for j in range(3):
    print(f"iter {j}: median cov err {np.median(cov_errs[j]):.4f}  "
          f"median mean-rmse {np.median(mean_rmse[j]):.4f}")

ys = [simulate_observation(problem, problem.sample_prior(1, test_rng)[0], test_rng)
      for _ in range(50)]
rows, frac = lemma1_check(problem, model, ys, rng=np.random.default_rng(3))
print("lemma1 improvement fraction:", frac)
print("total time:", round(time.time() - t0), "s")
