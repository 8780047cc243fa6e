"""Training/inference loop mechanics, ledger exactness, and cost formulas."""

import numpy as np
import pytest

from aspire.errors import ConfigError
from aspire.flow import ArchConfig, TrainConfig
from aspire.operators import make_stylized_problem, simulate_observation
from aspire.refinement import (
    AspireConfig,
    FiducialInit,
    break_even_ratio,
    cost_formula,
    infer,
    lemma1_check,
    train_aspire,
)

FAST_ARCH = ArchConfig(n_couplings=3, hidden=16, embed_width=16, embed_hidden=16,
                       split_seed=5)
FAST_TRAIN = TrainConfig(learning_rate=2e-3, batch_size=8, max_epochs=15,
                         patience=15, seed=0)


def quick_model(seed=0, n=40, j=2, problem=None, max_epochs=15):
    problem = problem or make_stylized_problem(seed, n=6, m=12)
    rng = np.random.default_rng(seed)
    xs = problem.sample_prior(n, rng)
    cfg = AspireConfig(iterations=j, fiducial_samples=8, arch=FAST_ARCH)
    tcfg = TrainConfig(learning_rate=2e-3, batch_size=8, max_epochs=max_epochs,
                       patience=max_epochs, seed=0)
    model, ledger = train_aspire(problem, xs, tcfg, cfg, np.random.default_rng(seed))
    return problem, model, ledger


class TestLedger:
    def test_offline_equals_formula(self):
        for n, j in [(10, 1), (24, 3)]:
            problem, model, ledger = quick_model(seed=n + j, n=n, j=j, max_epochs=3)
            assert ledger.offline_solves == n + 2 * n * j
            assert ledger.N == n and ledger.J == j

    def test_online_equals_two_j(self):
        problem, model, _ = quick_model(seed=3, n=16, j=2, max_epochs=3)
        rng = np.random.default_rng(1)
        y = simulate_observation(problem, problem.sample_prior(1, rng)[0], rng)
        _, delta = infer(model, y, sample_count=16, rng=np.random.default_rng(2))
        assert delta.online_solves == 2 * model.iterations

    def test_cost_formula_paper_rows(self):
        assert cost_formula("aspire", n=1000, j=4) == (9000, 8)
        assert cost_formula("aspire", n=1000, j=1) == (3000, 2)
        assert cost_formula("nonamortized", n=1000, j=1, l=400) == (3000, 802)
        assert cost_formula("meanfield", l=300) == (0, 600)

    def test_cost_formula_unknown_method(self):
        with pytest.raises(ConfigError):
            cost_formula("mcmc", n=1, j=1)

    def test_break_even_ratios(self):
        vs_meanfield = break_even_ratio(1000, 4, "meanfield", other_l=300)
        assert round(vs_meanfield) == 15
        vs_nonamortized = break_even_ratio(1000, 4, "nonamortized",
                                           other_n=1000, other_j=1, other_l=400)
        assert vs_nonamortized == pytest.approx(9008 / 3802)
        assert int(np.ceil(vs_nonamortized)) == 3


class TestInfer:
    def test_single_sample_fiducial_update(self):
        problem, model, _ = quick_model(seed=5, n=16, j=2, max_epochs=3)
        rng = np.random.default_rng(3)
        y = simulate_observation(problem, problem.sample_prior(1, rng)[0], rng)
        result, _ = infer(model, y, sample_count=1, rng=np.random.default_rng(4))
        np.testing.assert_array_equal(result.fiducials[1],
                                      result.samples_per_iteration[0][0])

    def test_model_not_mutated_and_interleaving_safe(self):
        problem, model, _ = quick_model(seed=7, n=16, j=2, max_epochs=3)
        rng = np.random.default_rng(5)
        xs = problem.sample_prior(2, rng)
        ya = simulate_observation(problem, xs[0], rng)
        yb = simulate_observation(problem, xs[1], rng)

        solo_a, _ = infer(model, ya, 8, np.random.default_rng(10))
        solo_b, _ = infer(model, yb, 8, np.random.default_rng(11))
        inter_a, _ = infer(model, ya, 8, np.random.default_rng(10))
        inter_b, _ = infer(model, yb, 8, np.random.default_rng(11))
        np.testing.assert_array_equal(solo_a.mean, inter_a.mean)
        np.testing.assert_array_equal(solo_b.std, inter_b.std)

    def test_sample_counts_per_iteration(self):
        problem, model, _ = quick_model(seed=9, n=16, j=2, max_epochs=3)
        rng = np.random.default_rng(6)
        y = simulate_observation(problem, problem.sample_prior(1, rng)[0], rng)
        result, _ = infer(model, y, sample_count=13, rng=np.random.default_rng(7))
        assert len(result.samples_per_iteration) == model.iterations
        for draws in result.samples_per_iteration:
            assert draws.shape == (13, problem.dim_x)

    def test_seed_determinism(self):
        problem, model, _ = quick_model(seed=11, n=16, j=1, max_epochs=3)
        rng = np.random.default_rng(8)
        y = simulate_observation(problem, problem.sample_prior(1, rng)[0], rng)
        a, _ = infer(model, y, 8, np.random.default_rng(42))
        b, _ = infer(model, y, 8, np.random.default_rng(42))
        np.testing.assert_array_equal(a.samples_per_iteration[-1],
                                      b.samples_per_iteration[-1])


class TestTrainAspire:
    def test_training_determinism(self):
        problem_a = make_stylized_problem(21, n=6, m=12)
        problem_b = make_stylized_problem(21, n=6, m=12)
        xs = problem_a.sample_prior(20, np.random.default_rng(0))
        cfg = AspireConfig(iterations=1, fiducial_samples=4, arch=FAST_ARCH)
        tcfg = TrainConfig(learning_rate=1e-3, batch_size=4, max_epochs=4,
                           patience=4, seed=0)
        m1, _ = train_aspire(problem_a, xs, tcfg, cfg, np.random.default_rng(9))
        m2, _ = train_aspire(problem_b, xs, tcfg, cfg, np.random.default_rng(9))
        for p, q in zip(m1.flows[0].params(), m2.flows[0].params()):
            np.testing.assert_array_equal(p, q)

    def test_fiducial_init_rules(self):
        problem = make_stylized_problem(23, n=4, m=6)
        np.testing.assert_array_equal(FiducialInit("zeros").resolve(problem),
                                      np.zeros(4))
        np.testing.assert_array_equal(FiducialInit("prior-mean").resolve(problem),
                                      problem.prior_mean)
        np.testing.assert_array_equal(FiducialInit("constant", 2.5).resolve(problem),
                                      np.full(4, 2.5))
        with pytest.raises(ConfigError):
            FiducialInit("constant")
        with pytest.raises(ConfigError):
            FiducialInit("median")

    def test_rejects_invalid_config(self):
        with pytest.raises(ConfigError):
            AspireConfig(iterations=0)
        with pytest.raises(ConfigError):
            AspireConfig(val_fraction=1.5)

    def test_fiducial_variance_scales_with_sample_count(self):
        # Monte-Carlo sanity: fiducial-mean variance ~ 1/S within a factor of 2
        problem, model, _ = quick_model(seed=13, n=30, j=1, max_epochs=8)
        rng = np.random.default_rng(14)
        y = simulate_observation(problem, problem.sample_prior(1, rng)[0], rng)
        cond = model.summarize(model.fiducial_init.resolve(problem), y, 0)

        def fiducial_var(s, reps=64):
            means = [model.sample_iteration(0, cond, s, np.random.default_rng(100 + r)).mean(axis=0)
                     for r in range(reps)]
            return np.mean(np.var(np.stack(means), axis=0))

        v8 = fiducial_var(8)
        v32 = fiducial_var(32)
        ratio = v8 / v32  # ideal: 4
        assert 2.0 <= ratio <= 8.0


class TestLemma1Mechanics:
    def test_untrained_flow_is_a_coin_flip(self):
        problem = make_stylized_problem(31, n=6, m=12)
        xs = problem.sample_prior(20, np.random.default_rng(0))
        cfg = AspireConfig(iterations=1, fiducial_samples=4, arch=FAST_ARCH)
        tcfg = TrainConfig(learning_rate=0.0, batch_size=8, max_epochs=1,
                           patience=1, seed=0)
        model, _ = train_aspire(problem, xs, tcfg, cfg, np.random.default_rng(1))
        rng = np.random.default_rng(2)
        ys = [simulate_observation(problem, problem.sample_prior(1, rng)[0], rng)
              for _ in range(40)]
        rows, fraction = lemma1_check(problem, model, ys, sample_count=64,
                                      rng=np.random.default_rng(3))
        # untrained flow leaves the fiducial near x0: no systematic win
        assert 0.1 <= fraction <= 0.9
        assert len(rows) == 40
