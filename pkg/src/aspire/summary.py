"""Score-based summary statistics and dataset standardization.

The summary of an observation y at a fiducial point x0 is the adjoint
Jacobian applied to the residual F(x0) - y, which is the gradient of the
negative log-likelihood up to the noise scale.  Summaries are standardized
per component before conditioning a flow, and the standardization statistics
are frozen with the trained model so inference reuses the training scales.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ShapeError
from .operators import ForwardProblem, Observation

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class SummaryStats:
    """Per-component mean and std used to standardize summary vectors."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        std = np.maximum(np.asarray(self.std, dtype=float), STD_FLOOR)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @classmethod
    def fit(cls, vectors: np.ndarray) -> "SummaryStats":
        vectors = np.asarray(vectors, dtype=float)
        if vectors.ndim != 2 or vectors.shape[0] < 2:
            raise ShapeError("need at least 2 vectors to fit standardization stats")
        return cls(mean=vectors.mean(axis=0), std=vectors.std(axis=0))

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        return (np.asarray(vectors, dtype=float) - self.mean) / self.std

    def invert(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors, dtype=float) * self.std + self.mean


@dataclass(frozen=True)
class PairedDataset:
    """Aligned (parameter, conditioning vector) pairs for one refinement pass.

    `conds` holds raw observations before summarization and score summaries
    after; `fiducials` records the linearization points the summaries used.
    """

    xs: np.ndarray
    conds: np.ndarray
    fiducials: np.ndarray
    iteration_tag: int

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        conds = np.asarray(self.conds, dtype=float)
        fid = np.asarray(self.fiducials, dtype=float)
        if not (xs.shape[0] == conds.shape[0] == fid.shape[0]):
            raise ShapeError("xs, conds and fiducials must have equal length")
        if self.iteration_tag < 0:
            raise ShapeError("iteration_tag must be non-negative")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "conds", conds)
        object.__setattr__(self, "fiducials", fid)

    def __len__(self):
        return self.xs.shape[0]


def compute_summary(problem: ForwardProblem, x0: np.ndarray, y) -> np.ndarray:
    """Adjoint Jacobian at x0 applied to F(x0) - y; masked if the problem masks.

    Costs one forward plus one adjoint solve (2 forward-equivalents).
    """
    data = y.data if isinstance(y, Observation) else np.asarray(y, dtype=float)
    summary = problem.score(np.asarray(x0, dtype=float), data)
    return problem.summary_mask(summary)


def build_dataset(problem: ForwardProblem, xs, ys, fiducials,
                  iteration_tag: int) -> PairedDataset:
    """Pair each parameter vector with the summary of its observation."""
    xs = np.asarray(xs, dtype=float)
    fiducials = np.asarray(fiducials, dtype=float)
    if not (xs.shape[0] == len(ys) == fiducials.shape[0]):
        raise ShapeError("xs, ys and fiducials must have equal length")
    summaries = np.stack([compute_summary(problem, fiducials[n], ys[n])
                          for n in range(xs.shape[0])])
    return PairedDataset(xs=xs, conds=summaries, fiducials=fiducials,
                         iteration_tag=iteration_tag)


def standardize(dataset: PairedDataset):
    """Shift and scale the summaries to zero mean, unit std per component.

    Returns the standardized dataset and the stats for reuse at inference.
    """
    stats = SummaryStats.fit(dataset.conds)
    return replace(dataset, conds=stats.apply(dataset.conds)), stats


def destandardize(dataset: PairedDataset, stats: SummaryStats) -> PairedDataset:
    """Inverse of `standardize` given the stats it returned."""
    return replace(dataset, conds=stats.invert(dataset.conds))
