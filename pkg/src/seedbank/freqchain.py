"""Fast simulation of the Moran frequency chain.

The frequency vector (active hearts, dormant hearts, active total) together
with the environment bit is itself a Markov jump chain; simulating it
directly skips the no-op events of the individual-level model (same-type
pairs, single-participant large events) while remaining equal in law.  The
law equality is covered by tests against the individual-level simulator and
against exact matrix-exponential expectations.

State here is integer counts (n1, n2, d1, d2, s): active hearts, active
spades, dormant hearts, dormant spades, environment.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .params import EnvConvention, SimParams
from .rng import (philox_make_state, philox_next_binomial, philox_next_double,
                  philox_next_exponential)

# fixation codes returned by the kernels
CENSORED, FIXED_HEART, FIXED_SPADE = 0, 1, 2

# event-class indices for the audit arrays
PAIR, FLIP, ENV, LARGE, MUT1, MUTC = range(6)


def pack_params(params: SimParams) -> tuple:
    """Flatten a SimParams into arrays digestible by the numba kernels."""
    lam_y = np.array([y for y, _ in params.reproduction.atoms], dtype=np.float64)
    lam_rate = np.array([w / y**2 for y, w in params.reproduction.atoms], dtype=np.float64)
    mut_y = np.array([y for y, _ in params.mutation.atoms], dtype=np.float64)
    mut_rate = np.array([w / y for y, w in params.mutation.atoms], dtype=np.float64)
    env_am = params.env_convention is EnvConvention.ACTIVITY_MATCHED
    return (params.a0, params.b0, params.alpha, params.sigma,
            lam_y, lam_rate, mut_y, mut_rate, env_am)


@njit(cache=True)
def _env_flip_rate(s, alpha, sigma, env_am):
    if env_am:
        return alpha if s == 1 else sigma
    return sigma if s == 1 else alpha


@njit(cache=True)
def sim_freq_path(n1, n2, d1, d2, s,
                  a0, b0, alpha, sigma, lam_y, lam_rate, mut_y, mut_rate,
                  env_am, grid, need_mono, st,
                  out_z, out_fix, event_counts, rate_integrals):
    """One replicate of the frequency chain.

    Records (n1, d1, n_active, env) at the grid times into out_z.  With
    need_mono the run continues past the last grid time until the population
    is monomorphic; out_fix receives the fixation code and time.  Event
    counts and time-integrated class rates accumulate into the last two
    arguments for rate audits.
    """
    t = 0.0
    gi = 0
    n_grid = grid.shape[0]
    n_lam = lam_y.shape[0]
    n_mut = mut_y.shape[0]
    fix_code = CENSORED
    fix_time = -1.0

    while True:
        if fix_code == CENSORED:
            if n1 + d1 == 0:
                fix_code = FIXED_SPADE
                fix_time = t
            elif n2 + d2 == 0:
                fix_code = FIXED_HEART
                fix_time = t
        if gi >= n_grid and (not need_mono or fix_code != CENSORED):
            break

        r_pair = a0 * n1 * n2
        r_flip = alpha * (n1 + n2) + sigma * (d1 + d2)
        r_env = _env_flip_rate(s, alpha, sigma, env_am)
        r_lam = 0.0
        for j in range(n_lam):
            r_lam += lam_rate[j]
        r_mut1 = b0 * n2 * s
        r_mutc = 0.0
        if s == 1:
            for j in range(n_mut):
                r_mutc += mut_rate[j]
        total = r_pair + r_flip + r_env + r_lam + r_mut1 + r_mutc
        if total <= 0.0:
            while gi < n_grid:
                out_z[gi, 0] = n1
                out_z[gi, 1] = d1
                out_z[gi, 2] = n1 + n2
                out_z[gi, 3] = s
                gi += 1
            break

        dt = philox_next_exponential(st) / total
        t_next = t + dt
        while gi < n_grid and grid[gi] <= t_next:
            out_z[gi, 0] = n1
            out_z[gi, 1] = d1
            out_z[gi, 2] = n1 + n2
            out_z[gi, 3] = s
            gi += 1
        rate_integrals[PAIR] += r_pair * dt
        rate_integrals[FLIP] += r_flip * dt
        rate_integrals[ENV] += r_env * dt
        rate_integrals[LARGE] += r_lam * dt
        rate_integrals[MUT1] += r_mut1 * dt
        rate_integrals[MUTC] += r_mutc * dt
        t = t_next

        u = philox_next_double(st) * total
        if u < r_pair:
            event_counts[PAIR] += 1
            # mixed active pair; parent side is a fair coin
            if philox_next_double(st) < 0.5:
                n1 += 1
                n2 -= 1
            else:
                n1 -= 1
                n2 += 1
        elif u < r_pair + r_flip:
            event_counts[FLIP] += 1
            v = philox_next_double(st) * r_flip
            if v < alpha * n1:
                n1 -= 1
                d1 += 1
            elif v < alpha * (n1 + n2):
                n2 -= 1
                d2 += 1
            elif v < alpha * (n1 + n2) + sigma * d1:
                d1 -= 1
                n1 += 1
            else:
                d2 -= 1
                n2 += 1
        elif u < r_pair + r_flip + r_env:
            event_counts[ENV] += 1
            s = 1 - s
        elif u < r_pair + r_flip + r_env + r_lam:
            event_counts[LARGE] += 1
            v = philox_next_double(st) * r_lam
            acc = 0.0
            j_at = n_lam - 1
            for j in range(n_lam):
                acc += lam_rate[j]
                if v < acc:
                    j_at = j
                    break
            y = lam_y[j_at]
            k1 = philox_next_binomial(st, n1, y)
            k2 = philox_next_binomial(st, n2, y)
            if k1 + k2 >= 2:
                # parent uniform among participants
                if philox_next_double(st) * (k1 + k2) < k1:
                    n1 += k2
                    n2 -= k2
                else:
                    n1 -= k1
                    n2 += k1
        elif u < r_pair + r_flip + r_env + r_lam + r_mut1:
            event_counts[MUT1] += 1
            n1 += 1
            n2 -= 1
        else:
            event_counts[MUTC] += 1
            v = philox_next_double(st) * r_mutc
            acc = 0.0
            j_at = n_mut - 1
            for j in range(n_mut):
                acc += mut_rate[j]
                if v < acc:
                    j_at = j
                    break
            k = philox_next_binomial(st, n2, mut_y[j_at])
            n1 += k
            n2 -= k

    out_fix[0] = fix_code
    out_fix[1] = fix_time
    return t


@njit(cache=True)
def sim_freq_many(reps, rep_offset, master_seed, role, n1, n2, d1, d2, s,
                  a0, b0, alpha, sigma, lam_y, lam_rate, mut_y, mut_rate,
                  env_am, grid, need_mono, env_stationary_p):
    """Replicate loop.  Replicate r uses the (master_seed, rep_offset + r,
    role) stream, so a worker pool splitting the replicate range draws
    exactly the same numbers as a single worker.

    With env_stationary_p >= 0 the initial environment of each replicate is
    Bernoulli(env_stationary_p) from the replicate's own stream instead of
    the fixed s.
    """
    n_grid = grid.shape[0]
    out = np.empty((reps, n_grid, 4), dtype=np.float64)
    fix = np.empty((reps, 2), dtype=np.float64)
    counts = np.zeros(6, dtype=np.float64)
    integrals = np.zeros(6, dtype=np.float64)
    for r in range(reps):
        st = philox_make_state(master_seed, np.uint64(rep_offset + r), role)
        s_r = s
        if env_stationary_p >= 0.0:
            s_r = 1 if philox_next_double(st) < env_stationary_p else 0
        sim_freq_path(n1, n2, d1, d2, s_r,
                      a0, b0, alpha, sigma, lam_y, lam_rate, mut_y, mut_rate,
                      env_am, grid, need_mono, st, out[r], fix[r],
                      counts, integrals)
    return out, fix, counts, integrals


def simulate_frequency_paths(
    params: SimParams,
    init_counts: tuple[int, int, int, int],
    env0: int,
    grid,
    reps: int,
    master_seed: int,
    role: int = 0,
    rep_offset: int = 0,
    need_mono: bool = False,
    env_stationary: bool = False,
):
    """Python-facing wrapper around the replicate kernel.

    init_counts = (active hearts, active spades, dormant hearts, dormant
    spades).  Returns (samples, fixation, event_counts, rate_integrals) with
    samples[r, g] = (n1, d1, n_active, env) as counts at grid time g.
    """
    n1, n2, d1, d2 = (int(c) for c in init_counts)
    if min(n1, n2, d1, d2) < 0:
        raise ValueError("negative initial count")
    if need_mono and params.mutation.total_mass() > 0:
        raise ValueError("monomorphic stopping requires a zero mutation measure")
    a0, b0, alpha, sigma, lam_y, lam_rate, mut_y, mut_rate, env_am = pack_params(params)
    p_env = params.env_stationary_on() if env_stationary else -1.0
    grid = np.asarray(grid, dtype=np.float64)
    return sim_freq_many(reps, rep_offset, np.uint64(master_seed), np.uint64(role),
                         n1, n2, d1, d2, int(env0),
                         a0, b0, alpha, sigma, lam_y, lam_rate, mut_y, mut_rate,
                         env_am, grid, need_mono, p_env)
