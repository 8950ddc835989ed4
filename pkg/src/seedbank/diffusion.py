"""Euler integration of the limiting frequency SDE systems with exact jumps.

The three-component state (z1, z2, z3) evolves as

* z3: deterministic relaxation, solved in closed form at every mesh point;
* z2: linear drift alpha*z1 - sigma*z2, Euler on the mesh;
* z1: drift sigma*z2 - alpha*z1 (plus b*env*(z3 - z1) when mutation is on),
  diffusion sqrt(a * z1 * (z3 - z1)) dB, and uncompensated jumps:
  each reproduction atom (y, w) fires at rate w/y^2 and moves z1 up by
  y*(z3 - z1) with probability z1/z3, down by y*z1 otherwise; each mutation
  atom fires at rate w/y and moves z1 up by y*env*(z3 - z1).

No compensator drift is added for the reproduction jumps: the up and down
compensators cancel identically.  Mutation jumps are intentionally
uncompensated (they are the push toward heart).  Jump times are exact
exponential clocks and the Euler mesh is refined to hit them, so no step
straddles a jump.  The environment flips with exact exponential holding
times.

Boundary handling: Euler can overshoot the admissible region; PROJECT
clamps z1 into [0, z3] and z2 into [0, 1 - z3] after every step and
accumulates the clamped mass (it must vanish as dt -> 0), REJECT aborts the
path for diagnostics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .params import EnvConvention, SimParams
from .rng import (philox_make_state, philox_next_double,
                  philox_next_exponential)

PROJECT, REJECT = 0, 1


@dataclass(frozen=True)
class DiffusionState:
    z1: float
    z2: float
    z3: float
    env: int = 0
    time: float = 0.0

    def in_region(self) -> bool:
        return (0.0 <= self.z1 <= self.z3 <= 1.0
                and 0.0 <= self.z2 <= 1.0 - self.z3)


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    clamp_mode: int = PROJECT
    grid: tuple[float, ...] = (1.0,)
    env_override: int = -1   # -1: simulate the chain; 0/1: freeze

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.clamp_mode not in (PROJECT, REJECT):
            raise ValueError("clamp_mode must be PROJECT or REJECT")


def z3_exact(z3_0: float, alpha: float, sigma: float, t: float) -> float:
    """Closed-form active-fraction: exponential relaxation to its
    equilibrium sigma/(sigma+alpha); constant when both rates vanish."""
    if alpha + sigma == 0.0:
        return z3_0
    eq = sigma / (sigma + alpha)
    return (z3_0 - eq) * math.exp(-(alpha + sigma) * t) + eq


@njit(cache=True)
def _z3_closed(z3_0, alpha, sigma, t):
    if alpha + sigma == 0.0:
        return z3_0
    eq = sigma / (sigma + alpha)
    return (z3_0 - eq) * math.exp(-(alpha + sigma) * t) + eq


@njit(cache=True)
def _sde_path(z1, z2, z3_0, env, a, b, alpha, sigma,
              lam_y, lam_rate, mut_y, mut_rate, env_am, env_override,
              dt, clamp_reject, grid, st, out, jump_counts):
    """One path.  Returns (clamp_accumulated, rejected_flag)."""
    t = 0.0
    gi = 0
    n_grid = grid.shape[0]
    t_end = grid[n_grid - 1] if n_grid > 0 else 0.0
    n_lam = lam_y.shape[0]
    n_mut = mut_y.shape[0]
    clamp_acc = 0.0

    lam_total = 0.0
    for j in range(n_lam):
        lam_total += lam_rate[j]
    mut_total = 0.0
    for j in range(n_mut):
        mut_total += mut_rate[j]

    if env_override >= 0:
        env = env_override

    next_lam = t + (philox_next_exponential(st) / lam_total) if lam_total > 0 else math.inf
    next_mut = t + (philox_next_exponential(st) / mut_total) if mut_total > 0 else math.inf
    if env_override >= 0:
        next_env = math.inf
    else:
        fr = (alpha if env == 1 else sigma) if env_am else (sigma if env == 1 else alpha)
        next_env = t + (philox_next_exponential(st) / fr) if fr > 0 else math.inf

    have_spare = False
    spare = 0.0

    while t < t_end - 1e-15 or gi < n_grid:
        # record any grid point reached
        while gi < n_grid and grid[gi] <= t + 1e-15:
            out[gi, 0] = z1
            out[gi, 1] = z2
            out[gi, 2] = _z3_closed(z3_0, alpha, sigma, grid[gi])
            out[gi, 3] = env
            gi += 1
        if gi >= n_grid:
            break
        t_grid = grid[gi]
        t_stop = t + dt
        if t_grid < t_stop:
            t_stop = t_grid
        if next_lam < t_stop:
            t_stop = next_lam
        if next_mut < t_stop:
            t_stop = next_mut
        if next_env < t_stop:
            t_stop = next_env
        h = t_stop - t
        if h > 0.0:
            z3 = _z3_closed(z3_0, alpha, sigma, t)
            if have_spare:
                g = spare
                have_spare = False
            else:
                u1 = philox_next_double(st)
                u2 = philox_next_double(st)
                r = math.sqrt(-2.0 * math.log1p(-u1))
                g = r * math.cos(2.0 * math.pi * u2)
                spare = r * math.sin(2.0 * math.pi * u2)
                have_spare = True
            var = a * z1 * (z3 - z1)
            if var < 0.0:
                var = 0.0
            dz1 = (sigma * z2 - alpha * z1 + b * env * (z3 - z1)) * h \
                + math.sqrt(var * h) * g
            dz2 = (alpha * z1 - sigma * z2) * h
            z1 += dz1
            z2 += dz2
            t = t_stop
            z3 = _z3_closed(z3_0, alpha, sigma, t)
            # clamp into the admissible region
            lo1, hi1 = 0.0, z3
            lo2, hi2 = 0.0, 1.0 - z3
            excess = 0.0
            if z1 < lo1:
                excess += lo1 - z1
                z1 = lo1
            elif z1 > hi1:
                excess += z1 - hi1
                z1 = hi1
            if z2 < lo2:
                excess += lo2 - z2
                z2 = lo2
            elif z2 > hi2:
                excess += z2 - hi2
                z2 = hi2
            if excess > 0.0:
                clamp_acc += excess
                if clamp_reject:
                    return clamp_acc, 1
        else:
            t = t_stop

        if t == next_lam:
            z3 = _z3_closed(z3_0, alpha, sigma, t)
            v = philox_next_double(st) * lam_total
            acc = 0.0
            j_at = n_lam - 1
            for j in range(n_lam):
                acc += lam_rate[j]
                if v < acc:
                    j_at = j
                    break
            jump_counts[j_at] += 1
            y = lam_y[j_at]
            if z3 > 0.0:
                if philox_next_double(st) * z3 < z1:
                    z1 += y * (z3 - z1)
                else:
                    z1 -= y * z1
            next_lam = t + philox_next_exponential(st) / lam_total
        elif t == next_mut:
            z3 = _z3_closed(z3_0, alpha, sigma, t)
            v = philox_next_double(st) * mut_total
            acc = 0.0
            j_at = n_mut - 1
            for j in range(n_mut):
                acc += mut_rate[j]
                if v < acc:
                    j_at = j
                    break
            jump_counts[n_lam + j_at] += 1
            z1 += mut_y[j_at] * env * (z3 - z1)
            next_mut = t + philox_next_exponential(st) / mut_total
        elif t == next_env:
            env = 1 - env
            fr = (alpha if env == 1 else sigma) if env_am else (sigma if env == 1 else alpha)
            next_env = t + (philox_next_exponential(st) / fr) if fr > 0 else math.inf

    return clamp_acc, 0


@njit(cache=True)
def sde_many(paths, rep_offset, master_seed, role, z1, z2, z3_0, env,
             a, b, alpha, sigma, lam_y, lam_rate, mut_y, mut_rate,
             env_am, env_override, dt, clamp_reject, grid, env_stationary_p):
    n_grid = grid.shape[0]
    out = np.empty((paths, n_grid, 4), dtype=np.float64)
    clamp = np.empty(paths, dtype=np.float64)
    rejected = np.zeros(paths, dtype=np.int64)
    jump_counts = np.zeros(lam_y.shape[0] + mut_y.shape[0], dtype=np.int64)
    for r in range(paths):
        st = philox_make_state(master_seed, np.uint64(rep_offset + r), role)
        e_r = env
        if env_stationary_p >= 0.0:
            e_r = 1 if philox_next_double(st) < env_stationary_p else 0
        c, rej = _sde_path(z1, z2, z3_0, e_r, a, b, alpha, sigma,
                           lam_y, lam_rate, mut_y, mut_rate, env_am,
                           env_override, dt, clamp_reject, grid, st,
                           out[r], jump_counts)
        clamp[r] = c
        rejected[r] = rej
    return out, clamp, rejected, jump_counts


@dataclass
class SdeResult:
    grid: np.ndarray
    samples: np.ndarray          # (paths, grid, 4): z1 z2 z3 env
    clamp_accumulated: np.ndarray
    rejected: np.ndarray
    jump_counts: np.ndarray      # per atom, reproduction atoms first
    elapsed_paths: int = 0


def _integrate(init: DiffusionState, params: SimParams, config: IntegratorConfig,
               paths: int, master_seed: int, role: int, rep_offset: int,
               env_stationary: bool, allow_mutation: bool) -> SdeResult:
    if not init.in_region():
        raise ValueError("initial state outside the admissible region")
    if not allow_mutation and params.mutation.total_mass() > 0:
        raise ValueError("this system takes a zero mutation measure")
    lam_y = np.array([y for y, _ in params.reproduction.atoms], dtype=np.float64)
    lam_rate = np.array([w / y**2 for y, w in params.reproduction.atoms], dtype=np.float64)
    mut_y = np.array([y for y, _ in params.mutation.atoms], dtype=np.float64)
    mut_rate = np.array([w / y for y, w in params.mutation.atoms], dtype=np.float64)
    env_am = params.env_convention is EnvConvention.ACTIVITY_MATCHED
    grid = np.asarray(sorted(config.grid), dtype=np.float64)
    p_env = params.env_stationary_on() if env_stationary else -1.0
    out, clamp, rejected, jumps = sde_many(
        paths, rep_offset, np.uint64(master_seed), np.uint64(role),
        init.z1, init.z2, init.z3, init.env,
        params.a0, params.b0, params.alpha, params.sigma,
        lam_y, lam_rate, mut_y, mut_rate, env_am, config.env_override,
        config.dt, 1 if config.clamp_mode == REJECT else 0, grid, p_env)
    return SdeResult(grid, out, clamp, rejected, jumps, paths)


def integrate_sdbk(init: DiffusionState, params: SimParams,
                   config: IntegratorConfig, paths: int, master_seed: int,
                   role: int = 0, rep_offset: int = 0) -> SdeResult:
    """Reproduction-only system (requires a zero mutation measure)."""
    return _integrate(init, params, config, paths, master_seed, role,
                      rep_offset, env_stationary=False, allow_mutation=False)


def integrate_sdbkm(init: DiffusionState, params: SimParams,
                    config: IntegratorConfig, paths: int, master_seed: int,
                    role: int = 0, rep_offset: int = 0,
                    env_stationary: bool = False) -> SdeResult:
    """Full system with environment-gated mutation drift and jumps."""
    return _integrate(init, params, config, paths, master_seed, role,
                      rep_offset, env_stationary=env_stationary,
                      allow_mutation=True)
