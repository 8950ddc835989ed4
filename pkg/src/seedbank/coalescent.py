"""Backward-in-time ancestry: marked partitions and block counting.

A marked partition carries one activity flag per block.  Active blocks can
merge (pairwise at the Kingman rate, in groups through the reproduction
atoms), every block flips its flag at the activity rates, and while the
environment is on, groups of active blocks are removed by mutation events
(their lineages are resolved by a mutation, so they stop constraining the
sample).

Rate table, with n active and m dormant blocks and environment s:

* merge of a specific set of i active blocks (2 <= i <= n):
      a0 * 1{i=2}  +  sum_j w_j y_j^(i-2) (1-y_j)^(n-i)
  so the block count drops by i-1 at C(n,i) times that rate;
* removal of a specific set of i active blocks (1 <= i <= n), only when s=1:
      b0 * 1{i=1}  +  sum_j w'_j y_j^(i-1) (1-y_j)^(n-i)
* a -> d per active block at alpha, d -> a per dormant block at sigma;
* environment flip per the configured convention.

The pairwise Kingman merge carries the same per-pair rate a0 as the forward
model's pair events; that per-pair normalization is what makes the sampling
duality exact (it is also how the marked-partition transitions are stated,
per target partition).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .params import SimParams
from .rng import philox_make_state, philox_next_double, philox_next_exponential

comb = math.comb


@dataclass(frozen=True)
class BlockCountState:
    """Counts of active and dormant ancestral blocks plus the environment."""

    n: int
    m: int
    s: int

    def __post_init__(self):
        if self.n < 0 or self.m < 0:
            raise ValueError("block counts must be >= 0")
        if self.s not in (0, 1):
            raise ValueError("environment must be 0 or 1")


def _merge_rate(n: int, i: int, params: SimParams) -> float:
    """Total rate at which some i of n active blocks merge."""
    lam = (params.a0 if i == 2 else 0.0) + sum(
        w * y ** (i - 2) * (1.0 - y) ** (n - i)
        for y, w in params.reproduction.atoms)
    return comb(n, i) * lam


def _removal_rate(n: int, i: int, params: SimParams) -> float:
    """Total rate at which some i of n active blocks are removed (env on)."""
    mu = (params.b0 if i == 1 else 0.0) + sum(
        w * y ** (i - 1) * (1.0 - y) ** (n - i)
        for y, w in params.mutation.atoms)
    return comb(n, i) * mu


def transition_rates(state: BlockCountState,
                     params: SimParams) -> list[tuple[BlockCountState, float]]:
    """Complete enumerated list of (target, rate); zero rates omitted."""
    n, m, s = state.n, state.m, state.s
    out: list[tuple[BlockCountState, float]] = []
    for i in range(2, n + 1):
        r = _merge_rate(n, i, params)
        if r > 0:
            out.append((BlockCountState(n - i + 1, m, s), r))
    if n > 0 and params.alpha > 0:
        out.append((BlockCountState(n - 1, m + 1, s), params.alpha * n))
    if m > 0 and params.sigma > 0:
        out.append((BlockCountState(n + 1, m - 1, s), params.sigma * m))
    if s == 1:
        for i in range(1, n + 1):
            r = _removal_rate(n, i, params)
            if r > 0:
                out.append((BlockCountState(n - i, m, s), r))
    flip = params.env_flip_rate(s)
    if flip > 0:
        out.append((BlockCountState(n, m, 1 - s), flip))
    return out


@njit(cache=True)
def _sim_block_kernel(n, m, s, horizon, a0, b0, alpha, sigma,
                      lam_y, lam_w, mut_y, mut_w, env_am, st, out_nm,
                      stop_at_single):
    """Gillespie on (n, m, s) until the horizon; returns the stopping time.

    With stop_at_single the run also ends once n+m <= 1 (the genealogical
    absorption convention).  Without it the chain keeps flipping / removing
    the last lineage, which is the version the sampling duality pairs with
    the forward model.  out_nm receives the final (n, m, s).
    """
    t = 0.0
    n_lam = lam_y.shape[0]
    n_mut = mut_y.shape[0]
    # scratch for per-i rates (n+m can only shrink, so size once)
    max_n = n + m
    rates = np.empty(2 * (max_n + 1) + 3, dtype=np.float64)
    while n + m > 0 and not (stop_at_single and n + m <= 1):
        k = 0
        total = 0.0
        # merges: rates[0..n-2] for i = 2..n
        for i in range(2, n + 1):
            lam = a0 if i == 2 else 0.0
            for j in range(n_lam):
                lam += lam_w[j] * lam_y[j] ** (i - 2) * (1.0 - lam_y[j]) ** (n - i)
            # C(n, i) without math.comb (numba): multiplicative form
            c = 1.0
            for q in range(i):
                c = c * (n - q) / (q + 1)
            rates[k] = c * lam
            total += rates[k]
            k += 1
        sleep_at = k
        rates[k] = alpha * n
        total += rates[k]
        k += 1
        wake_at = k
        rates[k] = sigma * m
        total += rates[k]
        k += 1
        removal_at = k
        if s == 1:
            for i in range(1, n + 1):
                mu = b0 if i == 1 else 0.0
                for j in range(n_mut):
                    mu += mut_w[j] * mut_y[j] ** (i - 1) * (1.0 - mut_y[j]) ** (n - i)
                c = 1.0
                for q in range(i):
                    c = c * (n - q) / (q + 1)
                rates[k] = c * mu
                total += rates[k]
                k += 1
        flip_at = k
        if env_am:
            rates[k] = alpha if s == 1 else sigma
        else:
            rates[k] = sigma if s == 1 else alpha
        total += rates[k]
        k += 1

        if total <= 0.0:
            break
        dt = philox_next_exponential(st) / total
        if t + dt > horizon:
            t = horizon
            break
        t += dt
        u = philox_next_double(st) * total
        acc = 0.0
        idx = k - 1
        for q in range(k):
            acc += rates[q]
            if u < acc:
                idx = q
                break
        if idx < sleep_at:
            i = idx + 2
            n -= i - 1
        elif idx == sleep_at:
            n -= 1
            m += 1
        elif idx == wake_at:
            n += 1
            m -= 1
        elif idx < flip_at:
            i = idx - removal_at + 1
            n -= i
        else:
            s = 1 - s
    out_nm[0] = n
    out_nm[1] = m
    out_nm[2] = s
    return t


@njit(cache=True)
def sim_block_many(reps, rep_offset, master_seed, role, n, m, s, horizon,
                   a0, b0, alpha, sigma, lam_y, lam_w, mut_y, mut_w, env_am,
                   env_stationary_p, stop_at_single):
    out = np.empty((reps, 3), dtype=np.int64)
    times = np.empty(reps, dtype=np.float64)
    buf = np.empty(3, dtype=np.int64)
    for r in range(reps):
        st = philox_make_state(master_seed, np.uint64(rep_offset + r), role)
        s_r = s
        if env_stationary_p >= 0.0:
            s_r = 1 if philox_next_double(st) < env_stationary_p else 0
        times[r] = _sim_block_kernel(n, m, s_r, horizon, a0, b0, alpha, sigma,
                                     lam_y, lam_w, mut_y, mut_w, env_am, st,
                                     buf, stop_at_single)
        out[r, 0] = buf[0]
        out[r, 1] = buf[1]
        out[r, 2] = buf[2]
    return out, times


def simulate_block_counting_many(
    init: BlockCountState,
    params: SimParams,
    horizon: float,
    reps: int,
    master_seed: int,
    role: int = 0,
    rep_offset: int = 0,
    env_stationary: bool = False,
    stop_at_single: bool = True,
):
    """Replicated block-counting runs on per-replicate streams.

    Returns (final_states, stop_times) with final_states[r] = (n, m, s).
    """
    lam_y = np.array([y for y, _ in params.reproduction.atoms], dtype=np.float64)
    lam_w = np.array([w for _, w in params.reproduction.atoms], dtype=np.float64)
    mut_y = np.array([y for y, _ in params.mutation.atoms], dtype=np.float64)
    mut_w = np.array([w for _, w in params.mutation.atoms], dtype=np.float64)
    from .params import EnvConvention
    env_am = params.env_convention is EnvConvention.ACTIVITY_MATCHED
    p_env = params.env_stationary_on() if env_stationary else -1.0
    return sim_block_many(reps, rep_offset, np.uint64(master_seed), np.uint64(role),
                          init.n, init.m, init.s, horizon,
                          params.a0, params.b0, params.alpha, params.sigma,
                          lam_y, lam_w, mut_y, mut_w, env_am, p_env,
                          stop_at_single)


def simulate_block_counting(
    init: BlockCountState,
    params: SimParams,
    horizon: float,
    rng: np.random.Generator,
    record: list[float] | None = None,
):
    """Gillespie path of (n, m, s); stops at the horizon or when n+m <= 1.

    Returns (times, states) where states[i] is the state entered at times[i];
    the path is right-continuous and the last entry is the state at the
    horizon.  record, when given, adds sampled states at those times.
    """
    t = 0.0
    state = init
    times = [0.0]
    states = [state]
    while state.n + state.m > 1:
        moves = transition_rates(state, params)
        total = sum(r for _, r in moves)
        if total <= 0:
            break
        dt = rng.exponential(1.0 / total)
        if t + dt > horizon:
            break
        t += dt
        u = rng.uniform(0.0, total)
        acc = 0.0
        target = moves[-1][0]
        for cand, r in moves:
            acc += r
            if u < acc:
                target = cand
                break
        state = target
        times.append(t)
        states.append(state)
    sampled = None
    if record is not None:
        sampled = []
        for tq in record:
            # last state entered at or before tq
            idx = max(i for i, ti in enumerate(times) if ti <= tq)
            sampled.append(states[idx])
    return times, states, sampled


# ---------------------------------------------------------------------------
# Marked partitions
# ---------------------------------------------------------------------------

ACTIVE_FLAG = "a"
DORMANT_FLAG = "d"


@dataclass
class MarkedPartition:
    """Partition of range(k) with an activity flag per block."""

    blocks: list[frozenset]
    flags: list[str]

    def __post_init__(self):
        seen: set[int] = set()
        for b in self.blocks:
            if not b:
                raise ValueError("empty block")
            if seen & b:
                raise ValueError("blocks are not disjoint")
            seen |= b
        self.ground = seen
        if len(self.flags) != len(self.blocks):
            raise ValueError("one flag per block required")
        if any(f not in (ACTIVE_FLAG, DORMANT_FLAG) for f in self.flags):
            raise ValueError("flags must be 'a' or 'd'")

    @staticmethod
    def singletons(k: int, flags: list[str]) -> "MarkedPartition":
        return MarkedPartition([frozenset([i]) for i in range(k)], list(flags))

    def counts(self) -> tuple[int, int]:
        n = sum(1 for f in self.flags if f == ACTIVE_FLAG)
        return n, len(self.flags) - n


@dataclass
class GenealogyEvent:
    t: float
    kind: str                   # "merge" | "flag" | "removal" | "env"
    blocks: list[frozenset] = field(default_factory=list)
    detail: str = ""


@dataclass
class GenealogyRecord:
    """Event-stamped backward history of a marked-coalescent run."""

    k: int
    events: list[GenealogyEvent]
    final: MarkedPartition
    final_env: int
    horizon: float

    def to_json_events(self) -> list[dict]:
        return [
            {"t": e.t, "kind": e.kind,
             "blocks": [sorted(b) for b in e.blocks], "detail": e.detail}
            for e in self.events
        ]


def simulate_marked_coalescent(
    k: int,
    init_flags: list[str],
    params: SimParams,
    horizon: float,
    rng: np.random.Generator,
    env0: int = 0,
    stop_at_single: bool = False,
) -> GenealogyRecord:
    """Full partition-valued coalescent path started from singletons.

    Merging blocks are chosen uniformly among active blocks (the rate table's
    combinatorial factor is exactly the count of such subsets); flag flips
    pick a uniform block of the flipping class; removals delete a uniform
    set of active blocks and record it, so genealogies stay reconstructible.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if math.isinf(horizon) and not stop_at_single:
        raise ValueError("an unbounded run must stop at a single block")
    part = MarkedPartition.singletons(k, list(init_flags))
    s = env0
    t = 0.0
    events: list[GenealogyEvent] = []

    while True:
        n, m = part.counts()
        if n + m == 0 or (stop_at_single and n + m <= 1):
            break
        # by default a single remaining block still flips its flag (and can
        # be removed), so only the horizon or total removal ends the run
        moves: list[tuple[float, str, int]] = []
        for i in range(2, n + 1):
            r = _merge_rate(n, i, params)
            if r > 0:
                moves.append((r, "merge", i))
        if params.alpha > 0 and n > 0:
            moves.append((params.alpha * n, "sleep", 0))
        if params.sigma > 0 and m > 0:
            moves.append((params.sigma * m, "wake", 0))
        if s == 1:
            for i in range(1, n + 1):
                r = _removal_rate(n, i, params)
                if r > 0:
                    moves.append((r, "removal", i))
        flip = params.env_flip_rate(s)
        if flip > 0:
            moves.append((flip, "env", 0))
        total = sum(r for r, _, _ in moves)
        if total <= 0:
            break
        dt = rng.exponential(1.0 / total)
        if t + dt > horizon:
            break
        t += dt
        u = rng.uniform(0.0, total)
        acc = 0.0
        kind, i_sel = moves[-1][1], moves[-1][2]
        for r, kd, ii in moves:
            acc += r
            if u < acc:
                kind, i_sel = kd, ii
                break

        active_idx = [j for j, f in enumerate(part.flags) if f == ACTIVE_FLAG]
        dormant_idx = [j for j, f in enumerate(part.flags) if f == DORMANT_FLAG]
        if kind == "merge":
            chosen = sorted(rng.choice(len(active_idx), size=i_sel, replace=False))
            sel = [active_idx[c] for c in chosen]
            merged = frozenset().union(*(part.blocks[j] for j in sel))
            events.append(GenealogyEvent(t, "merge",
                                         [part.blocks[j] for j in sel]))
            keep = [j for j in range(len(part.blocks)) if j not in set(sel)]
            part = MarkedPartition(
                [part.blocks[j] for j in keep] + [merged],
                [part.flags[j] for j in keep] + [ACTIVE_FLAG])
        elif kind == "sleep":
            j = active_idx[rng.integers(len(active_idx))]
            part.flags[j] = DORMANT_FLAG
            events.append(GenealogyEvent(t, "flag", [part.blocks[j]], "a->d"))
        elif kind == "wake":
            j = dormant_idx[rng.integers(len(dormant_idx))]
            part.flags[j] = ACTIVE_FLAG
            events.append(GenealogyEvent(t, "flag", [part.blocks[j]], "d->a"))
        elif kind == "removal":
            chosen = sorted(rng.choice(len(active_idx), size=i_sel, replace=False))
            sel = [active_idx[c] for c in chosen]
            events.append(GenealogyEvent(t, "removal",
                                         [part.blocks[j] for j in sel],
                                         f"mutated at {t}"))
            keep = [j for j in range(len(part.blocks)) if j not in set(sel)]
            part = MarkedPartition([part.blocks[j] for j in keep],
                                   [part.flags[j] for j in keep])
            if not part.blocks:
                break
        else:
            s = 1 - s
            events.append(GenealogyEvent(t, "env", [], f"to {s}"))

    rec = GenealogyRecord(k=k, events=events, final=part, final_env=s,
                          horizon=horizon)
    return rec


def block_count_projection(rec: GenealogyRecord,
                           init_flags: list[str]) -> list[tuple[float, int, int]]:
    """(t, n, m) path implied by a genealogy record, starting at t=0."""
    n = sum(1 for f in init_flags if f == ACTIVE_FLAG)
    m = len(init_flags) - n
    path = [(0.0, n, m)]
    for e in rec.events:
        if e.kind == "merge":
            n -= len(e.blocks) - 1
        elif e.kind == "flag":
            if e.detail == "a->d":
                n -= 1
                m += 1
            else:
                n += 1
                m -= 1
        elif e.kind == "removal":
            n -= len(e.blocks)
        path.append((e.t, n, m))
    return path


def to_newick(rec: GenealogyRecord) -> str:
    """Newick string for a fully coalesced run without removals.

    Leaves are labelled by sample index; branch lengths are the time from the
    child node to its parent merge event.
    """
    if any(e.kind == "removal" for e in rec.events):
        raise ValueError("Newick output requires a run without removals")
    if len(rec.final.blocks) != 1:
        raise ValueError("Newick output requires full coalescence")
    # node per live block: (newick string, birth time of the node)
    live: dict[frozenset, tuple[str, float]] = {
        frozenset([i]): (str(i), 0.0) for i in range(rec.k)}
    for e in rec.events:
        if e.kind != "merge":
            continue
        parts = []
        for b in e.blocks:
            text, born = live.pop(b)
            parts.append(f"{text}:{e.t - born:.6g}")
        merged = frozenset().union(*e.blocks)
        live[merged] = ("(" + ",".join(parts) + ")", e.t)
    (text, _born), = live.values()
    return text + ";"
