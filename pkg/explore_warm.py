"""Scratch: warm-start and capacity grid on the stylized 3-iteration run."""
import sys, time
import numpy as np
from aspire.flow import ArchConfig, TrainConfig
from aspire.metrics import covariance_frobenius_error, covariance_noise_floor, rmse
from aspire.operators import analytic_posterior, make_stylized_problem, simulate_observation
from aspire.refinement import AspireConfig, infer, train_aspire

def run(tag, sigma, lr, noise, h, c, e, S, bs, epochs, patience, warm, J=3):
    t0 = time.time()
    problem = make_stylized_problem(1234, n=16, m=80, noise_std=sigma)
    xs = problem.sample_prior(1000, np.random.default_rng(77))
    arch = ArchConfig(n_couplings=c, hidden=h, embed_width=e, embed_hidden=e, split_seed=0)
    tcfg = TrainConfig(learning_rate=lr, batch_size=bs, max_epochs=epochs,
                       patience=patience, target_noise_std=noise, seed=0)
    acfg = AspireConfig(iterations=J, fiducial_samples=S, arch=arch, warm_start=warm)
    model, _ = train_aspire(problem, xs, tcfg, acfg, np.random.default_rng(99))
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
    print(f"{tag}: cov={np.round(np.median(cov,1),3).tolist()} "
          f"rmse={np.round(np.median(mr,1),3).tolist()} "
          f"epochs={[hh.epochs_run for hh in model.histories]} "
          f"best={[round(min(hh.val_objective),2) for hh in model.histories]} "
          f"t={time.time()-t0:.0f}s", flush=True)

which = sys.argv[1]
if which == "a":
    run("warm h48", 0.7, 3e-4, 0.1, 48, 8, 32, 512, 32, 400, 40, True)
elif which == "b":
    run("warm h64e64", 0.7, 3e-4, 0.1, 64, 8, 64, 512, 32, 400, 40, True)
elif which == "c":
    run("cold J4", 0.7, 3e-4, 0.1, 48, 8, 32, 512, 32, 400, 40, False, J=4)
elif which == "d":
    run("warm lowlr", 0.7, 1.5e-4, 0.1, 48, 8, 32, 512, 32, 400, 40, True)

if which == "e":
    run("warm e20", 0.7, 3e-4, 0.1, 64, 8, 64, 512, 32, 20, 20, True)
elif which == "f":
    run("warm e30", 0.7, 3e-4, 0.1, 64, 8, 64, 512, 32, 30, 30, True)
elif which == "g":
    run("warm e40 J4", 0.7, 3e-4, 0.1, 64, 8, 64, 512, 32, 40, 40, True, J=4)
elif which == "h":
    run("warm e25 lr5", 0.7, 5e-4, 0.1, 64, 8, 64, 512, 32, 25, 25, True)
