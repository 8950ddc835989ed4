"""Jump-diffusion integrator: closed forms, invariant states, moment
oracles, audits, and boundary handling."""
import math

import numpy as np
import pytest

from oracles import sde_moments
from seedbank.diffusion import (PROJECT, REJECT, DiffusionState,
                                IntegratorConfig, integrate_sdbk,
                                integrate_sdbkm, z3_exact)
from seedbank.measures import MeasureKind, MeasureSpec
from seedbank.params import SimParams
from seedbank.stats import ks_two_sample


def params_of(a0=1.0, atoms=(), b0=0.0, matoms=(), alpha=1.0, sigma=1.0):
    return SimParams(
        MeasureSpec(a0, tuple(atoms), MeasureKind.REPRODUCTION),
        MeasureSpec(b0, tuple(matoms), MeasureKind.MUTATION),
        alpha=alpha, sigma=sigma)


class TestZ3Exact:
    def test_equilibrium_is_constant(self):
        eq = 1.0 / (1.0 + 2.0)
        for t in (0.0, 0.5, 3.0):
            assert z3_exact(eq, 2.0, 1.0, t) == pytest.approx(eq)

    def test_long_time_limit(self):
        assert z3_exact(0.9, 2.0, 1.0, 200.0) == pytest.approx(1 / 3)

    def test_half_life_value(self):
        # alpha = sigma = 1, start at 1: 0.5 * 2^-2 + 0.5 at t = ln 2
        assert z3_exact(1.0, 1.0, 1.0, math.log(2.0)) == pytest.approx(0.625)

    def test_zero_rates_frozen(self):
        assert z3_exact(0.37, 0.0, 0.0, 5.0) == 0.37


class TestInvariantStates:
    def test_all_spade_state_absorbing(self):
        params = params_of(atoms=((0.4, 0.5),))
        init = DiffusionState(0.0, 0.0, 0.5)
        cfg = IntegratorConfig(dt=1e-3, grid=(0.5, 1.0))
        res = integrate_sdbk(init, params, cfg, paths=200, master_seed=70)
        assert np.all(res.samples[:, :, 0] == 0.0)
        assert np.all(res.samples[:, :, 1] == 0.0)

    def test_all_heart_state_invariant_at_equilibrium(self):
        # z1 = z3 = sigma/(alpha+sigma), z2 = 1 - z3: every coefficient
        # vanishes identically, so the state is preserved exactly
        params = params_of(atoms=((0.4, 0.5),))
        init = DiffusionState(0.5, 0.5, 0.5)
        cfg = IntegratorConfig(dt=1e-3, grid=(1.0, 2.0))
        res = integrate_sdbk(init, params, cfg, paths=100, master_seed=71)
        assert np.all(res.samples[:, :, 0] == 0.5)
        assert np.all(res.samples[:, :, 1] == 0.5)

    def test_all_spade_frozen_activity_exact(self):
        # alpha = sigma = 0 freezes z3; on the all-heart manifold every
        # Euler increment is identically zero
        params = params_of(atoms=((0.4, 0.5),), alpha=0.0, sigma=0.0)
        init = DiffusionState(0.7, 0.3, 0.7)
        cfg = IntegratorConfig(dt=1e-3, grid=(1.0, 2.0))
        res = integrate_sdbk(init, params, cfg, paths=100, master_seed=71)
        assert np.all(res.samples[:, :, 0] == 0.7)

    def test_all_heart_state_tracks_relaxation(self):
        # away from the activity equilibrium the manifold moves and the
        # square-root diffusion lets Euler paths leak off it; the typical
        # path still tracks to O(dt) and the leakage shrinks with the mesh
        params = params_of(atoms=((0.4, 0.5),))
        init = DiffusionState(0.7, 0.3, 0.7)
        medians = []
        for dt in (2e-3, 5e-4):
            cfg = IntegratorConfig(dt=dt, grid=(2.0,))
            res = integrate_sdbk(init, params, cfg, paths=1500,
                                 master_seed=71)
            gap = np.abs(res.samples[:, 0, 0] - res.samples[:, 0, 2])
            medians.append(np.median(gap))
            assert np.median(gap) <= dt
            assert (gap > 0.05).mean() <= 0.15
        assert medians[1] < medians[0]


class TestMomentOracle:
    def test_mean_variance_and_martingale(self):
        params = params_of(atoms=((0.4, 0.5),))
        z0 = (0.3, 0.2, 0.5)
        cfg = IntegratorConfig(dt=1e-3, grid=(0.5, 1.0))
        res = integrate_sdbk(DiffusionState(*z0), params, cfg, paths=20_000,
                             master_seed=72)
        oracle = sde_moments(params, z0, [0.5, 1.0])
        for g, t in enumerate((0.5, 1.0)):
            z1 = res.samples[:, g, 0]
            z2 = res.samples[:, g, 1]
            m1, _, v1 = oracle[t]
            se = z1.std(ddof=1) / np.sqrt(len(z1))
            assert abs(z1.mean() - m1) <= 4 * se
            centered = z1 - z1.mean()
            v_hat = z1.var(ddof=1)
            se_v = np.sqrt((np.mean(centered**4) - v_hat**2) / len(z1))
            assert abs(v_hat - v1) <= 4 * se_v
            tot = z1 + z2
            se_t = tot.std(ddof=1) / np.sqrt(len(tot))
            assert abs(tot.mean() - 0.5) <= 4 * se_t


class TestJumps:
    def test_jump_rate_audit(self):
        params = params_of(atoms=((0.4, 0.5), (0.8, 0.2)))
        cfg = IntegratorConfig(dt=1e-2, grid=(2.0,))
        paths = 20_000
        res = integrate_sdbk(DiffusionState(0.3, 0.2, 0.5), params, cfg,
                             paths=paths, master_seed=73)
        for j, (y, w) in enumerate(params.reproduction.atoms):
            expected = w / y**2 * 2.0 * paths
            z = (res.jump_counts[j] - expected) / math.sqrt(expected)
            assert abs(z) <= 4.0

    def test_mutation_jump_pushes_up(self):
        params = params_of(a0=0.0, b0=0.0, matoms=((0.5, 0.5),),
                           alpha=0.0, sigma=0.0)
        cfg = IntegratorConfig(dt=1e-3, grid=(2.0,), env_override=1)
        res = integrate_sdbkm(DiffusionState(0.2, 0.0, 0.6), params, cfg,
                              paths=4000, master_seed=74)
        z1 = res.samples[:, 0, 0]
        # pure coordinated mutation: z1 -> z3, strictly upward
        assert z1.mean() > 0.3
        assert z1.max() <= 0.6 + 1e-12


class TestEnvironment:
    def test_env_override_reduces_to_plain_system(self):
        matoms = ((0.5, 0.5),)
        with_m = params_of(b0=0.7, matoms=matoms)
        plain = params_of()
        cfg_off = IntegratorConfig(dt=1e-3, grid=(1.0,), env_override=0)
        cfg = IntegratorConfig(dt=1e-3, grid=(1.0,))
        a = integrate_sdbkm(DiffusionState(0.3, 0.2, 0.5), with_m, cfg_off,
                            paths=5000, master_seed=75)
        b = integrate_sdbk(DiffusionState(0.3, 0.2, 0.5), plain, cfg,
                           paths=5000, master_seed=76)
        _, p = ks_two_sample(a.samples[:, 0, 0], b.samples[:, 0, 0])
        assert p > 0.01

    def test_env_chain_occupancy(self):
        params = params_of(alpha=2.0, sigma=0.5)
        cfg = IntegratorConfig(dt=1e-2, grid=(8.0,))
        res = integrate_sdbkm(DiffusionState(0.3, 0.2, 0.5), params, cfg,
                              paths=4000, master_seed=77)
        # activity-matched: long-run on-fraction = sigma / (alpha + sigma)
        frac_on = res.samples[:, 0, 3].mean()
        assert abs(frac_on - 0.2) < 0.03


class TestBoundaries:
    def test_clamp_vanishes_with_dt(self):
        # the clamped mass must vanish as the mesh refines; the square-root
        # coefficient caps the measured interior rate near dt^0.6 per
        # halving (boundary local time dominates), so the assertion tracks
        # the measured decay rather than a full halving
        params = params_of(atoms=((0.4, 0.5),))
        init = DiffusionState(0.3, 0.2, 0.5)
        means = []
        for dt in (4e-3, 1e-3, 2.5e-4):
            cfg = IntegratorConfig(dt=dt, grid=(1.0,))
            res = integrate_sdbk(init, params, cfg, paths=6000,
                                 master_seed=78)
            means.append(res.clamp_accumulated.mean())
        assert means[0] > means[1] > means[2] > 0.0
        assert means[1] <= 0.6 * means[0]   # per 4x mesh refinement
        assert means[2] <= 0.6 * means[1]

    def test_reject_mode_flags_paths(self):
        params = params_of(atoms=((0.4, 0.5),))
        init = DiffusionState(0.02, 0.01, 0.5)
        cfg = IntegratorConfig(dt=1e-2, clamp_mode=REJECT, grid=(1.0,))
        res = integrate_sdbk(init, params, cfg, paths=500, master_seed=79)
        assert res.rejected.sum() > 0

    def test_initial_state_outside_region_rejected(self):
        with pytest.raises(ValueError):
            integrate_sdbk(DiffusionState(0.6, 0.2, 0.5), params_of(),
                           IntegratorConfig(), paths=1, master_seed=1)

    def test_mutation_rejected_by_plain_system(self):
        with pytest.raises(ValueError):
            integrate_sdbk(DiffusionState(0.2, 0.2, 0.5),
                           params_of(b0=1.0), IntegratorConfig(), paths=1,
                           master_seed=1)


class TestNumerics:
    def test_z3_equals_closed_form_on_grid(self):
        params = params_of(atoms=((0.4, 0.5),))
        cfg = IntegratorConfig(dt=1e-3, grid=(0.25, 0.5, 1.0))
        res = integrate_sdbk(DiffusionState(0.3, 0.2, 0.5), params, cfg,
                             paths=100, master_seed=80)
        for g, t in enumerate(res.grid):
            ref = z3_exact(0.5, 1.0, 1.0, float(t))
            assert np.abs(res.samples[:, g, 2] - ref).max() <= 1e-10

    def test_same_seed_bitwise_reproducible(self):
        params = params_of(atoms=((0.4, 0.5),))
        cfg = IntegratorConfig(dt=1e-3, grid=(1.0,))
        a = integrate_sdbk(DiffusionState(0.3, 0.2, 0.5), params, cfg,
                           paths=200, master_seed=81)
        b = integrate_sdbk(DiffusionState(0.3, 0.2, 0.5), params, cfg,
                           paths=200, master_seed=81)
        assert np.array_equal(a.samples, b.samples)

    def test_weak_error_consistent_across_meshes(self):
        params = params_of(atoms=((0.4, 0.5),))
        z0 = DiffusionState(0.3, 0.2, 0.5)
        out = {}
        for dt in (1e-2, 1e-3):
            cfg = IntegratorConfig(dt=dt, grid=(1.0,))
            res = integrate_sdbk(z0, params, cfg, paths=100_000,
                                 master_seed=82)
            out[dt] = res.samples[:, 0, 0]
        m_hi, m_lo = out[1e-2].mean(), out[1e-3].mean()
        se = math.hypot(out[1e-2].std(ddof=1), out[1e-3].std(ddof=1)) \
            / math.sqrt(100_000)
        assert abs(m_hi - m_lo) <= 4 * se
        v_hi, v_lo = out[1e-2].var(ddof=1), out[1e-3].var(ddof=1)
        se_v = math.hypot(
            np.sqrt(np.mean((out[1e-2] - m_hi)**4) - v_hi**2),
            np.sqrt(np.mean((out[1e-3] - m_lo)**4) - v_lo**2)) \
            / math.sqrt(100_000)
        assert abs(v_hi - v_lo) <= 4 * se_v
