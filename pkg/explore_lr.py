"""Scratch: learning-rate / noise / capacity sweep on the stylized flow 0."""
import numpy as np

from aspire.flow import ArchConfig, TrainConfig, init_flow, train, nll_objective
from aspire.metrics import covariance_frobenius_error
from aspire.operators import analytic_posterior, make_stylized_problem, simulate_observation
from aspire.summary import SummaryStats, build_dataset, standardize
from aspire.refinement import FiducialInit, infer

for sigma in (0.2, 1.0):
    problem = make_stylized_problem(1234, n=16, m=80, noise_std=sigma)
    rng = np.random.default_rng(77)
    xs = problem.sample_prior(1000, rng)
    ys = [problem.simulate_observation(x, rng) for x in xs]
    fid = np.tile(problem.prior_mean, (1000, 1))
    ds = build_dataset(problem, xs, ys, fid, 0)
    ds_std, stats = standardize(ds)
    pstats = SummaryStats.fit(xs)
    x_std = pstats.apply(xs)

    for lr, noise, hidden, couplings in [(8e-4, 0.01, 64, 6), (3e-4, 0.01, 64, 6),
                                         (8e-4, 0.05, 64, 6), (8e-4, 0.01, 32, 4),
                                         (2e-4, 0.02, 48, 5)]:
        arch = ArchConfig(n_couplings=couplings, hidden=hidden, embed_width=128,
                          embed_hidden=128, split_seed=0)
        flow = init_flow(16, 16, arch, np.random.default_rng(0))
        cfg = TrainConfig(learning_rate=lr, batch_size=8, max_epochs=60,
                          patience=60, target_noise_std=noise, seed=0)
        trained, hist = train(flow, (x_std[:900], ds_std.conds[:900]),
                              (x_std[900:], ds_std.conds[900:]), cfg)
        v = hist.val_objective
        # covariance error of flow 0 on one test observation
        t_rng = np.random.default_rng(5)
        xt = problem.sample_prior(1, t_rng)[0]
        yt = simulate_observation(problem, xt, t_rng)
        post = analytic_posterior(problem, yt)
        cond = stats.apply(problem.score(problem.prior_mean, yt.data))
        draws = pstats.invert(trained.sample(cond, 512, np.random.default_rng(9)))
        cov_err = covariance_frobenius_error(draws, post)
        print(f"sigma={sigma} lr={lr} noise={noise} h={hidden} c={couplings}: "
              f"best={min(v):.3f}@{int(np.argmin(v))} last={v[-1]:.3f} "
              f"v[0,5,15,30,59]={[round(v[i],2) for i in (0,5,15,30,-1)]} "
              f"cov_err={cov_err:.3f}", flush=True)
