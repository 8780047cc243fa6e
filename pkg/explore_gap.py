"""Scratch: measure flow-0 overfit gap between train and val fiducials."""
import numpy as np
from aspire.flow import ArchConfig, TrainConfig, init_flow, train
from aspire.operators import analytic_posterior, make_stylized_problem
from aspire.summary import SummaryStats, build_dataset, standardize

problem = make_stylized_problem(1234, n=16, m=80, noise_std=0.7)
rng = np.random.default_rng(77)
xs = problem.sample_prior(1000, rng)
ys = [problem.simulate_observation(x, rng) for x in xs]
fid = np.tile(problem.prior_mean, (1000, 1))
ds = build_dataset(problem, xs, ys, fid, 0)
ds_std, stats = standardize(ds)
pstats = SummaryStats.fit(xs)
x_std = pstats.apply(xs)

posts = np.stack([analytic_posterior(problem, y).mean for y in ys])

for lr, noise, h, c, e, bs in [(3e-4, 0.02, 32, 5, 32, 8),
                               (2e-4, 0.10, 24, 4, 24, 32),
                               (3e-4, 0.10, 32, 5, 32, 32),
                               (5e-4, 0.20, 32, 5, 32, 32)]:
    arch = ArchConfig(n_couplings=c, hidden=h, embed_width=e, embed_hidden=e, split_seed=0)
    flow = init_flow(16, 16, arch, np.random.default_rng(0))
    cfg = TrainConfig(learning_rate=lr, batch_size=bs, max_epochs=150, patience=25,
                      target_noise_std=noise, seed=0)
    trained, hist = train(flow, (x_std[:900], ds_std.conds[:900]),
                          (x_std[900:], ds_std.conds[900:]), cfg)
    # fiducial means for train vs val entries
    def mean_err(idx):
        errs = []
        for n in idx:
            draws = pstats.invert(trained.sample(ds_std.conds[n], 64,
                                                 np.random.default_rng(n)))
            errs.append(np.linalg.norm(draws.mean(axis=0) - posts[n]))
        return np.median(errs)
    tr = mean_err(range(0, 200))
    va = mean_err(range(900, 1000))
    print(f"lr={lr} noise={noise} h={h} c={c} bs={bs}: best_val={min(hist.val_objective):.2f} "
          f"epochs={hist.epochs_run} fidmean-err train={tr:.3f} val={va:.3f} gap={va/tr:.2f}",
          flush=True)
