"""Individual-level Moran model: contract examples and invariants."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seedbank.measures import MeasureKind, MeasureSpec
from seedbank.moran import (UNTIL_MONOMORPHIC, Activity, Allele, EventTag,
                            Individual, PopulationState, event_rates,
                            exchangeable_init, frequencies, simulate, step)
from seedbank.params import SimParams
from seedbank.rng import stream


def kingman(a0=1.0, alpha=1.0, sigma=1.0, b0=0.0):
    return SimParams(
        MeasureSpec(a0, (), MeasureKind.REPRODUCTION),
        MeasureSpec(b0, (), MeasureKind.MUTATION),
        alpha=alpha, sigma=sigma)


def pop(pairs, env=0):
    return PopulationState([
        Individual(Allele.HEART if a == "h" else Allele.SPADE,
                   Activity.ACTIVE if s == "a" else Activity.DORMANT)
        for a, s in pairs], env=env)


class TestFrequencies:
    def test_all_heart_active(self):
        fs = frequencies(pop([("h", "a")] * 5, env=1))
        assert (fs.z1, fs.z2, fs.z3, fs.s) == (1.0, 0.0, 1.0, 1)

    def test_all_spade_dormant(self):
        fs = frequencies(pop([("s", "d")] * 3))
        assert (fs.z1, fs.z2, fs.z3) == (0.0, 0.0, 0.0)

    def test_mixed_four(self):
        fs = frequencies(pop([("h", "a"), ("h", "d"), ("s", "a"), ("s", "d")]))
        assert (fs.z1, fs.z2, fs.z3) == (0.25, 0.25, 0.5)

    @given(st.lists(st.tuples(st.sampled_from("hs"), st.sampled_from("ad")),
                    min_size=1, max_size=12))
    @settings(max_examples=100)
    def test_lattice_membership(self, pairs):
        n = len(pairs)
        fs = frequencies(pop(pairs))
        for z in (fs.z1, fs.z2, fs.z3):
            assert abs(z * n - round(z * n)) < 1e-12
        assert fs.z1 <= fs.z3 + 1e-12
        assert fs.z2 <= 1 - fs.z3 + 1e-12


class TestStep:
    def test_single_pair_rate(self):
        # two active individuals, only the pair clock runs, total rate a0
        state = pop([("h", "a"), ("s", "a")])
        params = kingman(a0=2.0, alpha=0.0, sigma=0.0)
        rates = event_rates(state, params)
        assert sum(rates.values()) == pytest.approx(2.0)
        new, tag = step(state, params, stream(1, 0))
        assert tag is EventTag.PAIR_REPRODUCTION
        alleles = {ind.allele for ind in new.individuals}
        assert len(alleles) == 1
        assert alleles <= {Allele.HEART, Allele.SPADE}

    def test_mutation_needs_active_individuals(self):
        state = pop([("s", "d")] * 4, env=1)
        params = kingman(a0=0.0, alpha=0.0, sigma=0.0, b0=3.0)
        rates = event_rates(state, params)
        assert rates[EventTag.SINGLE_MUTATION] == 0.0

    def test_coordinated_event_without_actives_is_noop(self):
        mut = MeasureSpec(0.0, ((0.5, 1.0),), MeasureKind.MUTATION)
        params = SimParams(MeasureSpec(0.0, ()), mut, alpha=0.0, sigma=0.0)
        state = pop([("s", "d")] * 4, env=1)
        new, tag = step(state, params, stream(2, 0))
        assert tag is EventTag.COORDINATED_MUTATION
        assert [i.allele for i in new.individuals] == \
            [i.allele for i in state.individuals]

    def test_full_participation_atom_fixes_population(self):
        lam = MeasureSpec(0.0, ((1.0, 1.0),), MeasureKind.REPRODUCTION)
        params = SimParams(lam, alpha=0.0, sigma=0.0)
        state = pop([("h", "a"), ("s", "a"), ("s", "a")])
        new, tag = step(state, params, stream(3, 0))
        assert tag is EventTag.LARGE_REPRODUCTION
        assert len({i.allele for i in new.individuals}) == 1

    def test_env_gating(self):
        state = pop([("h", "a"), ("s", "a")], env=0)
        params = kingman(a0=0.0, alpha=0.0, sigma=0.0, b0=1.0)
        assert event_rates(state, params)[EventTag.SINGLE_MUTATION] == 0.0
        state.env = 1
        assert event_rates(state, params)[EventTag.SINGLE_MUTATION] == 2.0


class TestSimulate:
    def test_already_monomorphic_heart(self):
        state = pop([("h", "a"), ("h", "d")])
        rec = simulate(state, kingman(), UNTIL_MONOMORPHIC, [], stream(4, 0))
        assert rec.fixation == "heart"
        assert rec.fixation_time == 0.0

    def test_all_spade_fixes_spade(self):
        # hearts cannot appear without mutation
        state = pop([("s", "a")] * 4)
        rec = simulate(state, kingman(), UNTIL_MONOMORPHIC, [], stream(5, 0))
        assert rec.fixation == "spade"

    def test_until_monomorphic_rejects_mutation(self):
        params = kingman(b0=1.0)
        with pytest.raises(ValueError):
            simulate(pop([("h", "a"), ("s", "a")]), params,
                     UNTIL_MONOMORPHIC, [], stream(6, 0))

    def test_fixation_probability_symmetric(self):
        # exchangeable half-heart start: fixation of heart has probability
        # 1/2 by allele symmetry; modest replication at 4 standard errors
        params = kingman(a0=1.0, alpha=1.0, sigma=1.0)
        gen = stream(7, 0)
        reps = 400
        hearts = 0
        for r in range(reps):
            init = exchangeable_init(3, 2, 2, 3, gen)
            rec = simulate(init, params, UNTIL_MONOMORPHIC, [], gen)
            hearts += rec.fixation == "heart"
        se = 0.5 / np.sqrt(reps)
        assert abs(hearts / reps - 0.5) <= 4 * se

    def test_heart_mass_martingale(self):
        lam = MeasureSpec(1.0, ((0.5, 0.5),), MeasureKind.REPRODUCTION)
        params = SimParams(lam, alpha=1.0, sigma=1.0)
        gen = stream(8, 0)
        vals = []
        for r in range(300):
            init = exchangeable_init(3, 2, 2, 3, gen)
            rec = simulate(init, params, 1.0, [1.0], gen)
            vals.append(rec.z1[0] + rec.z2[0])
        vals = np.asarray(vals)
        se = vals.std(ddof=1) / np.sqrt(len(vals))
        assert abs(vals.mean() - 0.5) <= 4 * se

    def test_records_on_grid(self):
        rec = simulate(pop([("h", "a"), ("s", "a")]), kingman(), 2.0,
                       [0.5, 1.0, 2.0], stream(9, 0))
        assert list(rec.times) == [0.5, 1.0, 2.0]

    def test_snapshots_when_requested(self):
        rec = simulate(pop([("h", "a"), ("s", "d")]), kingman(), 0.5, [0.5],
                       stream(10, 0), record_individuals=True)
        assert rec.snapshots is not None
        assert len(rec.snapshots) == 1
        assert len(rec.snapshots[0]["individuals"]) == 2


class TestExchangeability:
    def test_marginals_homogeneous_across_positions(self):
        # chi-square homogeneity of the (allele x activity) cell across
        # positions at a fixed time, exchangeable start
        from seedbank.stats import chi_square_homogeneity
        lam = MeasureSpec(1.0, ((0.5, 0.5),), MeasureKind.REPRODUCTION)
        params = SimParams(lam, alpha=1.0, sigma=1.0)
        gen = stream(11, 0)
        n = 6
        table = np.zeros((n, 4), dtype=int)
        for r in range(3000):
            init = exchangeable_init(2, 1, 1, 2, gen)
            rec = simulate(init, params, 0.5, [0.5], gen,
                           record_individuals=True)
            for pos, (al, ac) in enumerate(rec.snapshots[0]["individuals"]):
                cell = 2 * (al == "HEART") + (ac == "ACTIVE")
                table[pos, cell] += 1
        _, p = chi_square_homogeneity(table)
        assert p > 1e-3


class TestEventRateAudit:
    def test_counts_match_integrated_rates(self):
        lam = MeasureSpec(1.0, ((0.5, 0.5),), MeasureKind.REPRODUCTION)
        mut = MeasureSpec(0.5, ((0.5, 0.4),), MeasureKind.MUTATION)
        params = SimParams(lam, mut, alpha=1.0, sigma=1.0)
        gen = stream(12, 0)
        state = exchangeable_init(3, 2, 2, 3, gen, env=1)
        counts = {tag: 0 for tag in EventTag}
        integrals = {tag: 0.0 for tag in EventTag}
        horizon = 400.0
        while state.time < horizon:
            rates = event_rates(state, params)
            new, tag = step(state, params, gen)
            dt = new.time - state.time
            for k, v in rates.items():
                integrals[k] += v * dt
            counts[tag] += 1
            state = new
        for tag in EventTag:
            if counts[tag] < 100:
                continue
            ratio = counts[tag] / integrals[tag]
            assert abs(ratio - 1.0) <= 4.0 / np.sqrt(counts[tag]), tag
