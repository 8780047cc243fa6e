"""Iterative amortized posterior inference with refined score summaries.

Offline, J conditional flows are trained in sequence: each flow is trained
on pairs of prior draws and score summaries evaluated at the current
fiducial points, then sampled to move every fiducial to its posterior mean
before the next round.  Online, a new observation is pushed through the
same J-step chain at the cost of two operator evaluations per step.

Parameter vectors are standardized per component (statistics fitted once on
the training set and frozen in the model) so flow training sees unit-scale
targets regardless of the physical units of x.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, ShapeError
from .flow import ArchConfig, ConditionalFlow, TrainConfig, init_flow, train

from .operators import ForwardProblem, Observation, analytic_ml_estimate
from .summary import PairedDataset, SummaryStats, build_dataset, compute_summary, standardize


@dataclass(frozen=True)
class FiducialInit:
    """Rule for the starting fiducial: zeros, prior mean, or a constant."""

    kind: str = "prior-mean"
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("zeros", "prior-mean", "constant"):
            raise ConfigError(f"unknown fiducial rule {self.kind!r}")
        if self.kind == "constant" and self.value is None:
            raise ConfigError("constant fiducial rule needs a value")

    def resolve(self, problem: ForwardProblem) -> np.ndarray:
        if self.kind == "zeros":
            return np.zeros(problem.dim_x)
        if self.kind == "constant":
            return np.full(problem.dim_x, float(self.value))
        mean = getattr(problem, "prior_mean", None)
        if mean is None:
            raise ConfigError(f"problem {problem.name} has no prior mean; "
                              "use a constant fiducial rule")
        return np.asarray(mean, dtype=float).copy()


@dataclass
class CostLedger:
    """Forward-equivalent solve counts for the offline and online phases."""

    offline_solves: float = 0.0
    online_solves: float = 0.0
    N: int = 0
    J: int = 0
    L: int = 0

    def add_online(self, amount: float):
        if amount < 0:
            raise ValueError("solve counts are monotone")
        self.online_solves += amount


@dataclass(frozen=True)
class AspireConfig:
    """Offline-training knobs: refinement count and fiducial-update samples."""

    iterations: int = 3
    fiducial_samples: int = 64
    arch: ArchConfig = field(default_factory=ArchConfig)
    fiducial_init: FiducialInit = field(default_factory=FiducialInit)
    val_fraction: float = 0.1
    warm_start: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("need at least one refinement iteration")
        if self.fiducial_samples < 1:
            raise ConfigError("fiducial_samples must be positive")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("val_fraction must lie in (0, 1)")


@dataclass
class InferenceResult:
    """Per-iteration posterior samples and fiducials for one observation."""

    samples_per_iteration: list
    fiducials: np.ndarray
    mean: np.ndarray
    std: np.ndarray


class AspireModel:
    """Ordered sequence of trained flows plus the frozen preprocessing state."""

    def __init__(self, problem: ForwardProblem, flows, summary_stats,
                 param_stats: SummaryStats, fiducial_init: FiducialInit,
                 histories=None, master_seed: int = 0):
        if len(flows) != len(summary_stats) or not flows:
            raise ShapeError("need one stats object per flow and at least one flow")
        for f in flows:
            if f.dim_x != problem.dim_x:
                raise ShapeError("flow dims do not match the problem")
        self.problem = problem
        self.problem_id = problem.name
        self.flows = list(flows)
        self.summary_stats = list(summary_stats)
        self.param_stats = param_stats
        self.fiducial_init = fiducial_init
        self.histories = list(histories) if histories is not None else []
        self.master_seed = int(master_seed)

    @property
    def iterations(self) -> int:
        return len(self.flows)

    def summarize(self, fiducial: np.ndarray, y_obs, j: int) -> np.ndarray:
        """Standardized score summary for conditioning flow j (cost 2)."""
        raw = compute_summary(self.problem, fiducial, y_obs)
        return self.summary_stats[j].apply(raw)

    def sample_iteration(self, j: int, cond_std: np.ndarray, count: int,
                         rng: np.random.Generator) -> np.ndarray:
        """Draw `count` posterior samples from flow j in physical units."""
        draws = self.flows[j].sample(cond_std, count, rng)
        return self.param_stats.invert(draws)

    def final_samples(self, y_obs, count: int, rng: np.random.Generator) -> np.ndarray:
        """Samples from the last flow with a nested-prefix latent stream.

        The refinement chain runs with a fixed internal sample budget, so
        calls differing only in `count` share the chain and the first rows
        of a larger draw equal a smaller draw exactly.
        """
        chain_seed = int(rng.integers(0, 2**63 - 1))
        final_seed = int(rng.integers(0, 2**63 - 1))
        chain_rng = np.random.default_rng(chain_seed)
        x = self.fiducial_init.resolve(self.problem)
        for j in range(self.iterations - 1):
            cond = self.summarize(x, y_obs, j)
            x = self.sample_iteration(j, cond, 512, chain_rng).mean(axis=0)
        cond = self.summarize(x, y_obs, self.iterations - 1)
        z = np.random.default_rng(final_seed).standard_normal((count, self.problem.dim_x))
        draws = self.flows[-1].inverse(z, np.broadcast_to(cond, (count, cond.size)))
        return self.param_stats.invert(draws)


def _derived_rng(master: int, tag: int, j: int = 0) -> np.random.Generator:
    return np.random.default_rng([master, tag, j])


def _derived_seed(master: int, tag: int, j: int = 0) -> int:
    return int(_derived_rng(master, tag, j).integers(0, 2**31 - 1))


def _batched_posterior_means(flow: ConditionalFlow, conds: np.ndarray,
                             param_stats: SummaryStats, count: int,
                             rng: np.random.Generator) -> np.ndarray:
    """Mean of `count` posterior samples for every conditioning row."""
    n, dim = conds.shape[0], flow.dim_x
    chunk = max(1, 8192 // max(count, 1))
    means = np.empty((n, dim))
    for start in range(0, n, chunk):
        rows = conds[start:start + chunk]
        reps = np.repeat(rows, count, axis=0)
        z = rng.standard_normal((reps.shape[0], dim))
        draws = flow.inverse(z, reps)
        draws = param_stats.invert(draws)
        means[start:start + rows.shape[0]] = (
            draws.reshape(rows.shape[0], count, dim).mean(axis=1))
    return means


def train_aspire(problem: ForwardProblem, prior_samples: np.ndarray,
                 train_cfg: TrainConfig, aspire_cfg: AspireConfig,
                 rng: np.random.Generator, observations=None,
                 progress=None):
    """Offline phase: train J flows with iteratively refined fiducials.

    `prior_samples` is an (N, dim_x) array of prior draws; observations are
    simulated once (cost N) unless supplied.  Returns the trained model and
    a ledger whose offline count is measured from the problem's solve
    counter (equal to N + 2 N J).
    """
    prior_samples = np.asarray(prior_samples, dtype=float)
    if prior_samples.ndim != 2 or prior_samples.shape[0] < 2:
        raise ShapeError("need at least two prior samples")
    if prior_samples.shape[1] != problem.dim_x:
        raise ShapeError("prior samples do not match problem dim_x")
    n = prior_samples.shape[0]
    j_total = aspire_cfg.iterations
    master = int(rng.integers(0, 2**63 - 1))
    base_count = problem.counter.snapshot()

    if observations is None:
        obs_rng = _derived_rng(master, 0)
        observations = [problem.simulate_observation(prior_samples[i], obs_rng)
                        for i in range(n)]
    elif len(observations) != n:
        raise ShapeError("observations must align with prior samples")

    param_stats = SummaryStats.fit(prior_samples)
    x_std = param_stats.apply(prior_samples)

    val_count = max(1, int(round(aspire_cfg.val_fraction * n)))
    if val_count >= n:
        raise ConfigError("validation split leaves no training data")
    perm = _derived_rng(master, 1).permutation(n)
    val_idx, train_idx = perm[:val_count], perm[val_count:]

    fiducials = np.tile(aspire_cfg.fiducial_init.resolve(problem), (n, 1))
    flows, stats_list, histories = [], [], []
    for j in range(j_total):
        dataset = build_dataset(problem, prior_samples, observations, fiducials, j)
        dataset_std, stats_j = standardize(dataset)

        if aspire_cfg.warm_start and flows:
            flow = flows[-1].copy()
        else:
            flow = init_flow(problem.dim_x, dataset_std.conds.shape[1],
                             aspire_cfg.arch, _derived_rng(master, 2, j))
        cfg_j = replace(train_cfg, seed=_derived_seed(master, 3, j))
        try:
            flow, history = train(
                flow,
                (x_std[train_idx], dataset_std.conds[train_idx]),
                (x_std[val_idx], dataset_std.conds[val_idx]),
                cfg_j)
        except Exception as exc:
            raise type(exc)(f"iteration {j}: {exc}") from exc

        fiducials = _batched_posterior_means(
            flow, dataset_std.conds, param_stats, aspire_cfg.fiducial_samples,
            _derived_rng(master, 4, j))
        flows.append(flow)
        stats_list.append(stats_j)
        histories.append(history)
        if progress is not None:
            progress(j, history)

    model = AspireModel(problem=problem, flows=flows, summary_stats=stats_list,
                        param_stats=param_stats,
                        fiducial_init=aspire_cfg.fiducial_init,
                        histories=histories, master_seed=master)
    ledger = CostLedger(offline_solves=problem.counter.snapshot() - base_count,
                        N=n, J=j_total)
    return model, ledger


def infer(model: AspireModel, y_obs, sample_count: int, rng: np.random.Generator):
    """Online phase: J refinement steps for one observation (cost 2 J).

    The model is never mutated, so inferences on different observations are
    independent and may be interleaved freely.
    """
    if sample_count < 1:
        raise ConfigError("sample_count must be positive")
    problem = model.problem
    data = y_obs.data if isinstance(y_obs, Observation) else np.asarray(y_obs, dtype=float)
    if data.shape != (problem.dim_y,):
        raise ShapeError("observation does not match problem dim_y")
    base = problem.counter.snapshot()

    x = model.fiducial_init.resolve(problem)
    fiducials = [x]
    samples_per_iteration = []
    for j in range(model.iterations):
        cond = model.summarize(x, data, j)
        draws = model.sample_iteration(j, cond, sample_count, rng)
        samples_per_iteration.append(draws)
        x = draws.mean(axis=0)
        fiducials.append(x)

    final = samples_per_iteration[-1]
    result = InferenceResult(samples_per_iteration=samples_per_iteration,
                             fiducials=np.stack(fiducials),
                             mean=final.mean(axis=0),
                             std=final.std(axis=0))
    delta = CostLedger(online_solves=problem.counter.snapshot() - base,
                       N=0, J=model.iterations)
    return result, delta


@dataclass
class Lemma1Row:
    initial_distance: float
    refined_distance: float

    @property
    def improved(self) -> bool:
        return self.refined_distance < self.initial_distance


def lemma1_check(problem, model: AspireModel, test_observations,
                 sample_count: int = 512, rng=None):
    """Distances to the maximum-likelihood point before and after one step.

    For every observation, compares ||x1 - x_ML|| against ||x0 - x_ML||
    where x1 is the first-flow posterior mean.  Returns the rows and the
    fraction of observations where the refined fiducial is closer.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    rows = []
    for y in test_observations:
        data = y.data if isinstance(y, Observation) else np.asarray(y, dtype=float)
        x_ml = analytic_ml_estimate(problem, data)
        x0 = model.fiducial_init.resolve(problem)
        cond = model.summarize(x0, data, 0)
        x1 = model.sample_iteration(0, cond, sample_count, rng).mean(axis=0)
        rows.append(Lemma1Row(
            initial_distance=float(np.linalg.norm(x0 - x_ml)),
            refined_distance=float(np.linalg.norm(x1 - x_ml))))
    fraction = float(np.mean([r.improved for r in rows])) if rows else 0.0
    return rows, fraction


def cost_formula(method: str, n: int = 0, j: int = 0, l: int = 0):
    """Offline and online forward-equivalent counts per method."""
    for label, value in (("N", n), ("J", j), ("L", l)):
        if value < 0:
            raise ConfigError(f"{label} must be non-negative")
    if method == "aspire":
        return (n + 2 * n * j, 2 * j)
    if method == "nonamortized":
        return (n + 2 * n * j, 2 * j + 2 * l)
    if method == "meanfield":
        return (0, 2 * l)
    raise ConfigError(f"unknown method {method!r}")


def break_even_ratio(n: int, j: int, other_method: str, other_n: int = 0,
                     other_j: int = 0, other_l: int = 0) -> float:
    """Total one-case cost of the amortized pipeline over the alternative's."""
    ours = sum(cost_formula("aspire", n=n, j=j))
    theirs = sum(cost_formula(other_method, n=other_n, j=other_j, l=other_l))
    if theirs == 0:
        raise ConfigError("alternative method has zero cost")
    return ours / theirs
