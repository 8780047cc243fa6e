"""Scratch: final stylized config checks (seed 101, cold start, lemma, floor)."""
import sys, time
import numpy as np
from aspire.flow import ArchConfig, TrainConfig
from aspire.metrics import covariance_frobenius_error, covariance_noise_floor, rmse
from aspire.operators import analytic_posterior, make_stylized_problem, simulate_observation
from aspire.refinement import AspireConfig, infer, lemma1_check, train_aspire

mode, master = sys.argv[1], int(sys.argv[2])
warm = mode == "warm"
t0 = time.time()
problem = make_stylized_problem(1234, n=16, m=80, noise_std=1.0)
xs = problem.sample_prior(1000, np.random.default_rng(77))
arch = ArchConfig(n_couplings=8, hidden=64, embed_width=64, embed_hidden=64, split_seed=0)
tcfg = TrainConfig(learning_rate=5e-4, batch_size=32, max_epochs=400, patience=40,
                   target_noise_std=0.1, seed=0)
acfg = AspireConfig(iterations=3, fiducial_samples=1024, arch=arch, warm_start=warm)
model, ledger = train_aspire(problem, xs, tcfg, acfg, np.random.default_rng(master))

test_rng = np.random.default_rng(555)
cov = np.zeros((3, 20))
mr = np.zeros((3, 20))
for t in range(20):
    x_true = problem.sample_prior(1, test_rng)[0]
    y = simulate_observation(problem, x_true, test_rng)
    post = analytic_posterior(problem, y)
    result, _ = infer(model, y, 512, np.random.default_rng(1000 + t))
    for j in range(3):
        cov[j, t] = covariance_frobenius_error(result.samples_per_iteration[j], post)
        mr[j, t] = rmse(result.samples_per_iteration[j].mean(axis=0), post.mean)
floor = covariance_noise_floor(analytic_posterior(problem, simulate_observation(
    problem, problem.sample_prior(1, np.random.default_rng(7))[0],
    np.random.default_rng(8))), 512, seed=3)
lem_rng = np.random.default_rng(2024)
ys = [simulate_observation(problem, problem.sample_prior(1, lem_rng)[0], lem_rng)
      for _ in range(50)]
rows, frac = lemma1_check(problem, model, ys, rng=np.random.default_rng(3))
med = np.median(cov, 1)
print(f"{mode} m={master}: cov={np.round(med,3).tolist()} mono={bool(np.all(np.diff(med)<=0))} "
      f"j3_vs_3floor={med[-1]:.3f}/{3*floor:.3f} lemma={frac:.2f} "
      f"rmse={np.round(np.median(mr,1),3).tolist()} t={time.time()-t0:.0f}s", flush=True)
