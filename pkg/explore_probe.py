"""Scratch: linear-probe informativeness of summaries at iterations 0 and 1."""
import numpy as np
from aspire.flow import ArchConfig, TrainConfig, init_flow, train
from aspire.operators import analytic_posterior, make_stylized_problem
from aspire.summary import SummaryStats, build_dataset, standardize

problem = make_stylized_problem(1234, n=16, m=80, noise_std=0.7)
rng = np.random.default_rng(77)
xs = problem.sample_prior(1000, rng)
ys = [problem.simulate_observation(x, rng) for x in xs]
posts = np.stack([analytic_posterior(problem, y).mean for y in ys])
post_resid = np.sqrt(np.mean((xs - posts) ** 2))  # irreducible posterior spread
pstats = SummaryStats.fit(xs)
x_std = pstats.apply(xs)

def ridge_probe(conds, tag):
    A = np.concatenate([conds, np.ones((1000, 1))], axis=1)
    tr, va = slice(0, 900), slice(900, 1000)
    lam = 1e-3
    M = A[tr].T @ A[tr] + lam * np.eye(A.shape[1])
    W = np.linalg.solve(M, A[tr].T @ xs[tr])
    pred = A[va] @ W
    err = np.sqrt(np.mean((pred - xs[va]) ** 2))
    err_to_post = np.sqrt(np.mean((pred - posts[va]) ** 2))
    print(f"{tag}: ridge rmse-to-truth={err:.3f} rmse-to-postmean={err_to_post:.3f} "
          f"(posterior spread {post_resid:.3f})", flush=True)

fid0 = np.tile(problem.prior_mean, (1000, 1))
ds0 = build_dataset(problem, xs, ys, fid0, 0)
ds0_std, stats0 = standardize(ds0)
ridge_probe(ds0_std.conds, "iter0")

# train flow 0 (reasonable config), update fiducials, rebuild summaries
arch = ArchConfig(n_couplings=5, hidden=32, embed_width=32, embed_hidden=32, split_seed=0)
flow = init_flow(16, 16, arch, np.random.default_rng(0))
cfg = TrainConfig(learning_rate=3e-4, batch_size=32, max_epochs=150, patience=25,
                  target_noise_std=0.1, seed=0)
trained, hist = train(flow, (x_std[:900], ds0_std.conds[:900]),
                      (x_std[900:], ds0_std.conds[900:]), cfg)
x1 = np.empty_like(xs)
for n in range(1000):
    draws = pstats.invert(trained.sample(ds0_std.conds[n], 64, np.random.default_rng(n)))
    x1[n] = draws.mean(axis=0)
print("fid err:", np.sqrt(np.mean((x1 - posts) ** 2)))
ds1 = build_dataset(problem, xs, ys, x1, 1)
ds1_std, stats1 = standardize(ds1)
ridge_probe(ds1_std.conds, "iter1")
# probe with fiducial appended as extra conditioning info
ridge_probe(np.concatenate([ds1_std.conds, pstats.apply(x1)], axis=1), "iter1+fid")
