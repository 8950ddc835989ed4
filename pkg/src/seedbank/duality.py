"""Sampling-duality function and Monte Carlo duality-gap estimation.

The duality function gives the probability that n active and m dormant
individuals sampled uniformly without replacement are all hearts, given the
frequency vector.  The forward expectation of it (over frequency paths)
equals the backward expectation (over block-counting paths started from
(n, m)) when both sides share the environment law; the gap between Monte
Carlo estimates of the two sides is the implementation's primary
correctness oracle.

Environment matching matters: the backward chain sees the forward
environment time-reversed, so the identity needs an initial environment law
that is invariant under reversal.  ``env_mode="stationary"`` draws the
initial environment from its stationary law on both sides (the regime the
checks run in); deterministic matching is kept as an option and is
demonstrably biased once mutation is switched on (see tests).  The same
reversal argument requires the initial activity composition z3 to sit at
its stationary point sigma/(alpha+sigma) when activity rates matter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import lil_matrix, csr_matrix
from scipy.sparse.linalg import expm_multiply

from .coalescent import BlockCountState, simulate_block_counting_many, transition_rates
from .freqchain import simulate_frequency_paths
from .params import FrequencyState, SimParams
from .stats import SampleSummary

comb = math.comb

# exact integer binomials below this population size, log-space above
_EXACT_COMB_LIMIT = 30


def _comb_ratio(top: int, bottom: int, k: int) -> float:
    """C(top, k) / C(bottom, k) with 0 <= top <= bottom."""
    if k > top:
        return 0.0
    if bottom <= _EXACT_COMB_LIMIT:
        return comb(top, k) / comb(bottom, k)
    return math.exp(
        math.lgamma(top + 1) - math.lgamma(top - k + 1)
        - math.lgamma(bottom + 1) + math.lgamma(bottom - k + 1))


def _factor(hearts: int, pool: int, k: int) -> float:
    """All-hearts probability for a k-sample from the pool; 1 if the pool is
    too small to sample (the convention the piecewise definition takes at
    the all-active and all-dormant states)."""
    if k > pool:
        return 1.0
    return _comb_ratio(hearts, pool, k)


def h_sampling(z: FrequencyState, n: int, m: int, n_pop: int) -> float:
    """Probability that n active and m dormant uniform samples are all heart.

    Piecewise: the product of the two hypergeometric factors when
    0 < z3 < 1; only the active factor survives at z3 = 1 and only the
    dormant one at z3 = 0.
    """
    if n < 0 or m < 0:
        raise ValueError("sample sizes must be >= 0")
    a, b, k = z.counts(n_pop)  # rejects non-integer N*z
    return _factor(a, k, n) * _factor(b, n_pop - k, m)


@dataclass(frozen=True)
class DualityInstance:
    """One duality check: forward from z, backward from (n, m), horizon t."""

    params: SimParams
    n_pop: int
    z: FrequencyState
    nm: tuple[int, int]
    t: float
    replicates: int
    env_mode: str = "deterministic"   # "deterministic" | "stationary"

    def __post_init__(self):
        if not self.z.in_simplex():
            raise ValueError("initial frequencies outside the state space")
        self.z.counts(self.n_pop)
        n, m = self.nm
        if not (0 <= n <= self.n_pop and 0 <= m <= self.n_pop):
            raise ValueError("sample sizes must lie in [0, N]")
        if self.env_mode not in ("deterministic", "stationary"):
            raise ValueError("env_mode must be 'deterministic' or 'stationary'")


def h_state_table(n_pop: int, n: int, m: int) -> np.ndarray:
    """H over the whole count lattice, indexed [hearts_active,
    hearts_dormant, actives]; invalid lattice points hold NaN."""
    table = np.full((n_pop + 1, n_pop + 1, n_pop + 1), np.nan)
    for k in range(n_pop + 1):
        for a in range(k + 1):
            fa = _factor(a, k, n)
            for b in range(n_pop - k + 1):
                table[a, b, k] = fa * _factor(b, n_pop - k, m)
    return table


def forward_h_values(instance: DualityInstance, master_seed: int,
                     rep_offset: int, count: int, role: int) -> np.ndarray:
    """H(Z(t), n, m) for `count` forward replicates, in replicate order."""
    p = instance.params
    n, m = instance.nm
    a, b, k = instance.z.counts(instance.n_pop)
    samples, _, _, _ = simulate_frequency_paths(
        p, (a, k - a, b, instance.n_pop - k - b), instance.z.s,
        [instance.t], count, master_seed, role=role, rep_offset=rep_offset,
        env_stationary=instance.env_mode == "stationary")
    table = h_state_table(instance.n_pop, n, m)
    idx = samples[:, 0, :3].astype(np.int64)
    return table[idx[:, 0], idx[:, 1], idx[:, 2]]


def backward_h_values(instance: DualityInstance, master_seed: int,
                      rep_offset: int, count: int, role: int) -> np.ndarray:
    """H(z, N_t, M_t) for `count` backward replicates, in replicate order."""
    n, m = instance.nm
    finals, _ = simulate_block_counting_many(
        BlockCountState(n, m, instance.z.s), instance.params, instance.t,
        count, master_seed, role=role, rep_offset=rep_offset,
        env_stationary=instance.env_mode == "stationary",
        stop_at_single=False)
    out = np.empty(len(finals))
    cache: dict[tuple[int, int], float] = {}
    for i, (nt, mt, _s) in enumerate(finals):
        key = (int(nt), int(mt))
        if key not in cache:
            cache[key] = h_sampling(instance.z, key[0], key[1], instance.n_pop)
        out[i] = cache[key]
    return out


def gap_from_values(lhs_vals: np.ndarray, rhs_vals: np.ndarray):
    """(lhs_mean, rhs_mean, gap, pooled standard error) from assembled
    per-replicate values.  Computing from the full arrays keeps the result
    independent of how replicates were partitioned across workers."""
    lhs = SampleSummary.from_sample(lhs_vals)
    rhs = SampleSummary.from_sample(rhs_vals)
    gap = lhs.mean - rhs.mean
    se = math.hypot(lhs.standard_error(), rhs.standard_error())
    return lhs.mean, rhs.mean, gap, se


def duality_gap(instance: DualityInstance, master_seed: int,
                rep_offset: int = 0, roles: tuple[int, int] = (1, 2)):
    """Monte Carlo estimate of both sides of the sampling identity.

    Returns (lhs_mean, rhs_mean, gap, combined_se).  Forward replicates use
    stream role roles[0], backward replicates roles[1].
    """
    lhs_vals = forward_h_values(instance, master_seed, rep_offset,
                                instance.replicates, roles[0])
    rhs_vals = backward_h_values(instance, master_seed, rep_offset,
                                 instance.replicates, roles[1])
    return gap_from_values(lhs_vals, rhs_vals)


# ---------------------------------------------------------------------------
# Exact small-N oracles (matrix exponentials of the finite chains)
# ---------------------------------------------------------------------------


def frequency_chain_states(n_pop: int):
    """Enumerate (active hearts, dormant hearts, actives, env)."""
    states = []
    for k in range(n_pop + 1):
        for a in range(k + 1):
            for b in range(n_pop - k + 1):
                for s in (0, 1):
                    states.append((a, b, k, s))
    return states


def frequency_chain_generator(n_pop: int, params: SimParams) -> tuple[list, dict, csr_matrix]:
    """Exact rate matrix of the frequency chain, including large-event
    participation thinning (enumerated binomially)."""
    states = frequency_chain_states(n_pop)
    index = {st: i for i, st in enumerate(states)}
    Q = lil_matrix((len(states), len(states)))

    def add(i, st2, rate):
        if rate <= 0.0:
            return
        j = index[st2]
        if j == i:
            return
        Q[i, j] += rate
        Q[i, i] -= rate

    for i, (a, b, k, s) in enumerate(states):
        n_sp = k - a
        d_sp = n_pop - k - b
        add(i, (a + 1, b, k, s), params.a0 * a * n_sp / 2.0)
        add(i, (a - 1, b, k, s), params.a0 * a * n_sp / 2.0)
        for (y, w) in params.reproduction.atoms:
            rate = w / y**2
            for k1 in range(a + 1):
                p1 = comb(a, k1) * y**k1 * (1 - y) ** (a - k1)
                for k2 in range(n_sp + 1):
                    if k1 + k2 < 2 or k1 == 0 or k2 == 0:
                        continue  # no-ops: too few or single-type participants
                    p2 = comb(n_sp, k2) * y**k2 * (1 - y) ** (n_sp - k2)
                    pr = rate * p1 * p2
                    add(i, (a + k2, b, k, s), pr * k1 / (k1 + k2))
                    add(i, (a - k1, b, k, s), pr * k2 / (k1 + k2))
        if s == 1:
            add(i, (a + 1, b, k, s), params.b0 * n_sp)
            for (y, w) in params.mutation.atoms:
                rate = w / y
                for k2 in range(1, n_sp + 1):
                    p2 = comb(n_sp, k2) * y**k2 * (1 - y) ** (n_sp - k2)
                    add(i, (a + k2, b, k, s), rate * p2)
        add(i, (a - 1, b + 1, k - 1, s), params.alpha * a)
        add(i, (a + 1, b - 1, k + 1, s), params.sigma * b)
        add(i, (a, b, k - 1, s), params.alpha * n_sp)
        add(i, (a, b, k + 1, s), params.sigma * d_sp)
        add(i, (a, b, k, 1 - s), params.env_flip_rate(s))
    return states, index, csr_matrix(Q)


def forward_expectation_exact(n_pop: int, params: SimParams, z: FrequencyState,
                              n: int, m: int, ts) -> list[float]:
    """E[H(Z(t), n, m)] by matrix exponential of the frequency chain."""
    states, index, Q = frequency_chain_generator(n_pop, params)
    h = np.array([
        h_sampling(FrequencyState(a / n_pop, b / n_pop, k / n_pop, s), n, m, n_pop)
        for (a, b, k, s) in states])
    a0, b0, k0 = z.counts(n_pop)
    i0 = index[(a0, b0, k0, z.s)]
    return [float(expm_multiply(Q * t, h)[i0]) for t in ts]


def backward_expectation_exact(n_pop: int, params: SimParams, z: FrequencyState,
                               n: int, m: int, ts) -> list[float]:
    """E[H(z, N_t, M_t)] by matrix exponential of the block-counting chain."""
    states = []
    for tot in range(n + m + 1):
        for nn in range(tot + 1):
            for s in (0, 1):
                states.append((nn, tot - nn, s))
    index = {st: i for i, st in enumerate(states)}
    Q = lil_matrix((len(states), len(states)))
    for i, (nn, mm, s) in enumerate(states):
        for target, rate in transition_rates(BlockCountState(nn, mm, s), params):
            j = index[(target.n, target.m, target.s)]
            if j != i:
                Q[i, j] += rate
                Q[i, i] -= rate
    Q = csr_matrix(Q)
    h = np.array([h_sampling(z, nn, mm, n_pop) for (nn, mm, s) in states])
    i0 = index[(n, m, z.s)]
    return [float(expm_multiply(Q * t, h)[i0]) for t in ts]


def csv_row(instance: DualityInstance, lhs: float, rhs: float, gap: float,
            se: float, k_sigma: float = 4.0) -> str:
    z = instance.z
    n, m = instance.nm
    ok = abs(gap) <= k_sigma * se
    return (f"{instance.n_pop},{instance.t!r},{n},{m},"
            f"{z.z1!r},{z.z2!r},{z.z3!r},{lhs!r},{rhs!r},{gap!r},{se!r},"
            f"{int(ok)}")


DUALITY_CSV_HEADER = "N,t,n,m,z1,z2,z3,lhs,rhs,gap,se,pass"
