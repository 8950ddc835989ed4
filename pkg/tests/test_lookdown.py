"""Ordered model: parent selection, coupling, ancestry, conditioning."""
import math

import numpy as np
import pytest

from seedbank.lookdown import (ACTIVE, DORMANT, HEART, SPADE, ConditionedMode,
                               LookdownRun, LookdownState, ReproductionEvent,
                               conditioned_model, couple_permutation,
                               exchangeable_lookdown_init,
                               lookdown_frequencies, lookdown_replicates,
                               replay_state, simulate_lookdown,
                               trace_ancestry, unordered_view)
from seedbank.measures import MeasureKind, MeasureSpec
from seedbank.params import EnvConvention, SimParams
from seedbank.rng import stream
from seedbank.stats import chi_square_uniformity, ks_two_sample


def params_of(a0=0.0, atoms=(), b0=0.0, matoms=(), alpha=0.0, sigma=0.0,
              conv=EnvConvention.ACTIVITY_MATCHED):
    return SimParams(
        MeasureSpec(a0, tuple(atoms), MeasureKind.REPRODUCTION),
        MeasureSpec(b0, tuple(matoms), MeasureKind.MUTATION),
        alpha=alpha, sigma=sigma, env_convention=conv)


def state_of(alleles, acts, env=0):
    return LookdownState(np.array(alleles), np.array(acts), env=env)


class TestParentSelection:
    def test_pair_event_copies_downward(self):
        # only levels 2 and 5 active; the first pair event must copy the
        # level-2 allele onto level 5
        init = state_of([SPADE, HEART, SPADE, SPADE, SPADE],
                        [DORMANT, ACTIVE, DORMANT, DORMANT, ACTIVE])
        run = simulate_lookdown(init, params_of(a0=5.0), horizon=50.0,
                                record=[], rng=stream(50, 0))
        assert run.events, "expected at least one pair event"
        e = run.events[0]
        assert e.kind == "pair"
        assert e.levels == (2, 5)
        assert e.parent == 2
        final = replay_state(run, run.events[0].t)
        assert final.alleles[4] == HEART
        assert final.alleles[1] == HEART

    def test_large_event_lowest_level_is_parent(self):
        # all three active levels participate with probability one
        init = state_of([HEART, SPADE, SPADE],
                        [ACTIVE, ACTIVE, ACTIVE])
        run = simulate_lookdown(init, params_of(atoms=((1.0, 1.0),)),
                                horizon=5.0, record=[], rng=stream(51, 0))
        e = run.events[0]
        assert e.kind == "large"
        assert e.levels == (1, 2, 3)
        final = replay_state(run, e.t)
        assert list(final.alleles) == [HEART, HEART, HEART]

    def test_single_participant_is_noop(self):
        # one active level: large events fire but never change anything
        init = state_of([HEART, SPADE, SPADE],
                        [ACTIVE, DORMANT, DORMANT])
        run = simulate_lookdown(init, params_of(atoms=((1.0, 2.0),)),
                                horizon=10.0, record=[10.0],
                                rng=stream(52, 0))
        assert run.events == []
        assert run.record.z1[0] == pytest.approx(1 / 3)

    def test_level_one_never_overwritten(self):
        params = params_of(a0=1.0, atoms=((0.5, 0.5),), alpha=1.0, sigma=1.0)
        gen = stream(53, 0)
        for _ in range(20):
            init = exchangeable_lookdown_init(3, 2, 2, 3, gen)
            first = init.alleles[0]
            run = simulate_lookdown(init, params, horizon=3.0, record=[],
                                    rng=gen)
            final = replay_state(run, 3.0)
            assert final.alleles[0] == first


class TestCoupling:
    def test_no_events_keeps_theta(self):
        init = state_of([HEART, SPADE], [DORMANT, DORMANT])
        run = simulate_lookdown(init, params_of(a0=1.0), horizon=1.0,
                                record=[], rng=stream(54, 0))
        theta0 = np.array([2, 1])
        coupling = couple_permutation(run, theta0, stream(54, 1))
        assert np.array_equal(coupling.theta_at(0.9), theta0)

    def test_two_levels_uniform_after_event(self):
        params = params_of(a0=1.0)
        counts = np.zeros(2, dtype=int)
        gen = stream(55, 0)
        for r in range(2000):
            init = state_of([HEART, SPADE], [ACTIVE, ACTIVE])
            run = simulate_lookdown(init, params, horizon=2.0, record=[],
                                    rng=gen)
            theta0 = 1 + gen.permutation(2)
            coupling = couple_permutation(run, theta0, gen)
            theta = coupling.theta_at(2.0)
            counts[theta[0] - 1] += 1
        _, p = chi_square_uniformity(counts)
        assert p > 1e-3

    def test_coupled_frequencies_identical(self):
        # a permutation leaves the empirical measure invariant, so the
        # unordered view must reproduce the ordered frequencies exactly
        params = params_of(a0=1.0, atoms=((0.5, 0.5),))
        gen = stream(56, 0)
        init = exchangeable_lookdown_init(3, 0, 3, 0, gen)
        run = simulate_lookdown(init, params, horizon=2.0, record=[],
                                rng=gen)
        theta0 = 1 + gen.permutation(6)
        coupling = couple_permutation(run, theta0, gen)
        for t in (0.5, 1.0, 2.0):
            alleles, acts = unordered_view(run, coupling, t,
                                           lambda tt: replay_state(run, tt))
            ordered = replay_state(run, t)
            assert sorted(alleles) == sorted(ordered.alleles)

    def test_bad_theta_rejected(self):
        init = state_of([HEART, SPADE], [ACTIVE, ACTIVE])
        run = simulate_lookdown(init, params_of(a0=1.0), horizon=1.0,
                                record=[], rng=stream(57, 0))
        with pytest.raises(ValueError):
            couple_permutation(run, np.array([1, 1]), stream(57, 1))

    def test_inconsistent_log_rejected(self):
        init = state_of([HEART, SPADE], [ACTIVE, ACTIVE])
        run = simulate_lookdown(init, params_of(a0=1.0), horizon=1.0,
                                record=[], rng=stream(58, 0))
        run.events.append(ReproductionEvent(0.5, "pair", (1, 7)))
        with pytest.raises(ValueError):
            couple_permutation(run, np.array([1, 2]), stream(58, 1))


class TestAncestry:
    def synthetic_run(self, events, n=5, horizon=10.0):
        init = state_of([HEART] * n, [ACTIVE] * n)
        return LookdownRun(record=None, events=events, init=init,
                           horizon=horizon)

    def test_level_one_instant(self):
        run = self.synthetic_run([])
        line = trace_ancestry(run, (1, 5.0))
        assert line.tau == 0.0
        assert line.trace == [(0.0, 1)]

    def test_censored_without_events(self):
        run = self.synthetic_run([])
        line = trace_ancestry(run, (3, 5.0))
        assert math.isinf(line.tau)

    def test_single_pair_event_replay(self):
        run = self.synthetic_run([ReproductionEvent(2.0, "pair", (1, 3))])
        line = trace_ancestry(run, (3, 5.0))
        assert line.tau == pytest.approx(3.0)
        assert line.level_at(2.9) == 3
        assert line.level_at(3.1) == 1

    def test_chain_of_events(self):
        events = [ReproductionEvent(1.0, "large", (1, 2, 4)),
                  ReproductionEvent(2.0, "pair", (2, 5))]
        run = self.synthetic_run(events)
        line = trace_ancestry(run, (5, 3.0))
        # walking backward from t=3: the pair event (backward time 1) maps
        # 5 -> 2, then the large event (backward time 2) maps 2 -> 1
        assert line.level_at(0.5) == 5
        assert line.level_at(1.5) == 2
        assert line.tau == pytest.approx(2.0)

    def test_trace_levels_non_increasing(self):
        params = params_of(a0=1.0, atoms=((0.5, 0.5),))
        gen = stream(59, 0)
        init = exchangeable_lookdown_init(4, 0, 4, 0, gen)
        run = simulate_lookdown(init, params, horizon=4.0, record=[], rng=gen)
        line = trace_ancestry(run, (8, 4.0))
        levels = [lv for _, lv in line.trace]
        assert all(b <= a for a, b in zip(levels, levels[1:]))

    def test_out_of_range_rejected(self):
        run = self.synthetic_run([])
        with pytest.raises(ValueError):
            trace_ancestry(run, (9, 5.0))
        with pytest.raises(ValueError):
            trace_ancestry(run, (1, 50.0))


class TestExchangeability:
    def test_level_marginals_homogeneous(self):
        from seedbank.stats import chi_square_homogeneity
        params = params_of(a0=1.0, atoms=((0.5, 0.5),), alpha=1.0, sigma=1.0)
        n = 4
        _, _, _, levels = lookdown_replicates(
            params, (1, 1, 1, 1), 0, [0.5], 4000, master_seed=60)
        table = np.zeros((n, 4), dtype=int)
        for r in range(levels.shape[0]):
            for pos in range(n):
                cell = 2 * levels[r, 0, pos] + levels[r, 1, pos]
                table[pos, cell] += 1
        _, p = chi_square_homogeneity(table)
        assert p > 1e-3


class TestConditionedModel:
    def test_rejects_mutation(self):
        params = params_of(a0=1.0, b0=0.5, alpha=1.0, sigma=1.0)
        with pytest.raises(ValueError):
            conditioned_model(params, 4, (1, 1, 1, 1), 1.0, [1.0],
                              stream(61, 0))

    def test_alpha_zero_env_stays_on(self):
        # level 1 starts active and can never deactivate
        params = params_of(a0=1.0, sigma=1.0)
        rec = conditioned_model(params, 6, (3, 0, 3, 0), 2.0,
                                [0.5, 1.0, 2.0], stream(62, 0),
                                mode=ConditionedMode.DIRECT)
        assert (rec.env == 1).all()

    def test_direct_decomposition_identity(self):
        # full-model frequency = (env, 1-env, env)/N + (N-1)/N * upper
        params = params_of(a0=1.0, alpha=1.0, sigma=1.0)
        gen = stream(63, 0)
        init = exchangeable_lookdown_init(3, 2, 2, 3, gen,
                                          force_level1_heart=True)
        run = simulate_lookdown(init, params, 1.0, [0.25, 0.5, 1.0], gen,
                                record_levels=True)
        n = init.size
        for g, (alleles, acts) in enumerate(run.level_snapshots):
            env = int(acts[0] == ACTIVE)
            upper_z1 = ((alleles[1:] == HEART) & (acts[1:] == ACTIVE)).sum() / (n - 1)
            full_z1 = run.record.z1[g]
            assert full_z1 == pytest.approx(env / n + (n - 1) / n * upper_z1)

    def test_direct_and_reduced_agree_kingman(self):
        params = params_of(a0=1.0, alpha=1.0, sigma=1.0)
        gen = stream(64, 0)
        n, reps = 10, 3000
        direct = np.empty(reps)
        reduced = np.empty(reps)
        for r in range(reps):
            d = conditioned_model(params, n, (5, 0, 5, 0), 0.5, [0.5], gen,
                                  mode=ConditionedMode.DIRECT)
            direct[r] = d.z1[0]
            rr = conditioned_model(params, n, (5, 0, 5, 0), 0.5, [0.5], gen,
                                   mode=ConditionedMode.REDUCED)
            reduced[r] = rr.z1[0]
        _, p = ks_two_sample(direct, reduced)
        assert p > 0.01


class TestKernelAgreesWithReference:
    def test_frequency_law_matches_python_simulator(self):
        params = params_of(a0=1.0, atoms=((0.5, 0.5),), b0=0.3,
                           matoms=((0.5, 0.6),), alpha=1.0, sigma=1.0)
        reps = 1500
        samples, _, _, _ = lookdown_replicates(
            params, (3, 2, 2, 3), 1, [1.0], reps, master_seed=65)
        gen = stream(66, 0)
        ref = np.empty(reps)
        for r in range(reps):
            init = exchangeable_lookdown_init(3, 2, 2, 3, gen, env=1)
            run = simulate_lookdown(init, params, 1.0, [1.0], gen)
            ref[r] = run.record.z1[0]
        _, p = ks_two_sample(samples[:, 0, 0], ref)
        assert p > 0.01

    def test_fixation_equivalence_small(self):
        params = params_of(a0=1.0, alpha=1.0, sigma=1.0)
        _, fix, lvl1, _ = lookdown_replicates(
            params, (3, 2, 2, 3), 0, [], 2000, master_seed=67,
            until_monomorphic=True)
        heart_fixed = fix[:, 0] == 1
        assert (heart_fixed == (lvl1 == 1)).all()

    def test_event_log_serialization(self):
        init = state_of([HEART, SPADE], [ACTIVE, ACTIVE])
        run = simulate_lookdown(init, params_of(a0=1.0), horizon=1.0,
                                record=[], rng=stream(68, 0))
        text = run.events_to_json_lines()
        if run.events:
            import json
            first = json.loads(text.splitlines()[0])
            assert set(first) == {"t", "class", "levels", "atom"}
