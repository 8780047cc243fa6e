"""Scratch: warm start + strong noise regularization, seed robustness."""
import sys, time
import numpy as np
from aspire.flow import ArchConfig, TrainConfig
from aspire.metrics import covariance_frobenius_error, rmse
from aspire.operators import analytic_posterior, make_stylized_problem, simulate_observation
from aspire.refinement import AspireConfig, infer, train_aspire

def run(tag, master, sigma, lr, noise, h, c, e, S, bs, epochs, patience, warm, J=3):
    t0 = time.time()
    problem = make_stylized_problem(1234, n=16, m=80, noise_std=sigma)
    xs = problem.sample_prior(1000, np.random.default_rng(77))
    arch = ArchConfig(n_couplings=c, hidden=h, embed_width=e, embed_hidden=e, split_seed=0)
    tcfg = TrainConfig(learning_rate=lr, batch_size=bs, max_epochs=epochs,
                       patience=patience, target_noise_std=noise, seed=0)
    acfg = AspireConfig(iterations=J, fiducial_samples=S, arch=arch, warm_start=warm)
    model, _ = train_aspire(problem, xs, tcfg, acfg, np.random.default_rng(master))
    test_rng = np.random.default_rng(555)
    cov = np.zeros((J, 20)); mr = np.zeros((J, 20))
    for t in range(20):
        x_true = problem.sample_prior(1, test_rng)[0]
        y = simulate_observation(problem, x_true, test_rng)
        post = analytic_posterior(problem, y)
        result, _ = infer(model, y, 512, np.random.default_rng(1000 + t))
        for j in range(J):
            draws = result.samples_per_iteration[j]
            cov[j, t] = covariance_frobenius_error(draws, post)
            mr[j, t] = rmse(draws.mean(axis=0), post.mean)
    mono = bool(np.all(np.diff(np.median(cov, 1)) <= 0))
    print(f"{tag} m={master}: cov={np.round(np.median(cov,1),3).tolist()} mono={mono} "
          f"rmse={np.round(np.median(mr,1),3).tolist()} "
          f"epochs={[hh.epochs_run for hh in model.histories]} t={time.time()-t0:.0f}s",
          flush=True)

mode = sys.argv[1]
master = int(sys.argv[2])
if mode == "n2":
    run("noise.2", master, 0.7, 5e-4, 0.2, 64, 8, 64, 1024, 32, 400, 40, True)
elif mode == "n3":
    run("noise.3", master, 0.7, 5e-4, 0.3, 64, 8, 64, 1024, 32, 400, 40, True)

if mode == "s10":
    run("sig1.0", master, 1.0, 5e-4, 0.1, 64, 8, 64, 1024, 32, 400, 40, True)
elif mode == "s15":
    run("sig1.5", master, 1.5, 5e-4, 0.1, 64, 8, 64, 1024, 32, 400, 40, True)
