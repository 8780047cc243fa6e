"""Scratch: long-training full-iteration stylized run."""
import sys, time
import numpy as np
from aspire.flow import ArchConfig, TrainConfig
from aspire.metrics import covariance_frobenius_error, covariance_noise_floor, rmse
from aspire.operators import analytic_posterior, make_stylized_problem, simulate_observation
from aspire.refinement import AspireConfig, infer, train_aspire

sigma, lr, noise, h, c, e, S, bs, epochs, patience = (
    float(sys.argv[1]), float(sys.argv[2]), float(sys.argv[3]), int(sys.argv[4]),
    int(sys.argv[5]), int(sys.argv[6]), int(sys.argv[7]), int(sys.argv[8]),
    int(sys.argv[9]), int(sys.argv[10]))
t0 = time.time()
problem = make_stylized_problem(1234, n=16, m=80, noise_std=sigma)
rng = np.random.default_rng(77)
xs = problem.sample_prior(1000, rng)
arch = ArchConfig(n_couplings=c, hidden=h, embed_width=e, embed_hidden=e, split_seed=0)
tcfg = TrainConfig(learning_rate=lr, batch_size=bs, max_epochs=epochs, patience=patience,
                   target_noise_std=noise, seed=0)
acfg = AspireConfig(iterations=3, fiducial_samples=S, arch=arch)
model, ledger = train_aspire(problem, xs, tcfg, acfg, np.random.default_rng(99))
test_rng = np.random.default_rng(555)
cov = np.zeros((3, 20)); mr = np.zeros((3, 20))
for t in range(20):
    x_true = problem.sample_prior(1, test_rng)[0]
    y = simulate_observation(problem, x_true, test_rng)
    post = analytic_posterior(problem, y)
    result, _ = infer(model, y, 512, np.random.default_rng(1000 + t))
    for j in range(3):
        draws = result.samples_per_iteration[j]
        cov[j, t] = covariance_frobenius_error(draws, post)
        mr[j, t] = rmse(draws.mean(axis=0), post.mean)
floor = covariance_noise_floor(analytic_posterior(problem, simulate_observation(
    problem, problem.sample_prior(1, np.random.default_rng(7))[0],
    np.random.default_rng(8))), 512, seed=3)
print(f"args={sys.argv[1:]}: cov={np.round(np.median(cov,1),3).tolist()} "
      f"rmse={np.round(np.median(mr,1),3).tolist()} floor={floor:.3f} "
      f"epochs={[hh.epochs_run for hh in model.histories]} "
      f"best={[round(min(hh.val_objective),2) for hh in model.histories]} t={time.time()-t0:.0f}s",
      flush=True)
