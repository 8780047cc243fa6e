"""Scratch: full 3-iteration stylized runs over arch/lr/noise/sigma grid."""
import sys
import time

import numpy as np

from aspire.flow import ArchConfig, TrainConfig
from aspire.metrics import covariance_frobenius_error, covariance_noise_floor, rmse
from aspire.operators import analytic_posterior, make_stylized_problem, simulate_observation
from aspire.refinement import AspireConfig, infer, train_aspire

sigma = float(sys.argv[1])
lr = float(sys.argv[2])
noise = float(sys.argv[3])
hidden = int(sys.argv[4])
couplings = int(sys.argv[5])
embed = int(sys.argv[6])
s_train = int(sys.argv[7]) if len(sys.argv) > 7 else 64

t0 = time.time()
problem = make_stylized_problem(1234, n=16, m=80, noise_std=sigma)
rng = np.random.default_rng(77)
xs = problem.sample_prior(1000, rng)

arch = ArchConfig(n_couplings=couplings, hidden=hidden, embed_width=embed,
                  embed_hidden=embed, split_seed=0)
tcfg = TrainConfig(learning_rate=lr, batch_size=8, max_epochs=100, patience=12,
                   target_noise_std=noise, seed=0)
acfg = AspireConfig(iterations=3, fiducial_samples=s_train, arch=arch)
model, ledger = train_aspire(problem, xs, tcfg, acfg, np.random.default_rng(99))

test_rng = np.random.default_rng(555)
cov = np.zeros((3, 12))
mr = np.zeros((3, 12))
for t in range(12):
    x_true = problem.sample_prior(1, test_rng)[0]
    y = simulate_observation(problem, x_true, test_rng)
    post = analytic_posterior(problem, y)
    result, _ = infer(model, y, 512, np.random.default_rng(1000 + t))
    for j in range(3):
        draws = result.samples_per_iteration[j]
        cov[j, t] = covariance_frobenius_error(draws, post)
        mr[j, t] = rmse(draws.mean(axis=0), post.mean)

floor = covariance_noise_floor(
    analytic_posterior(problem, simulate_observation(
        problem, problem.sample_prior(1, np.random.default_rng(7))[0],
        np.random.default_rng(8))), 512, seed=3)
med_cov = np.median(cov, axis=1)
med_mr = np.median(mr, axis=1)
epochs = [h.epochs_run for h in model.histories]
best = [round(min(h.val_objective), 2) for h in model.histories]
print(f"s={sigma} lr={lr} n={noise} h={hidden} c={couplings} e={embed} S={s_train}: "
      f"cov={np.round(med_cov, 3).tolist()} rmse={np.round(med_mr, 3).tolist()} "
      f"floor={floor:.3f} epochs={epochs} best={best} t={time.time()-t0:.0f}s",
      flush=True)
