"""Ordered (lookdown) particle model, its coupling to the unordered model,
ancestral-line tracing, and the fixation-conditioned reduced model.

The ordered model shares every clock with the unordered one; only parent
selection differs: in a reproduction event the individual at the lowest
participating level is the parent and its allele is copied to the other
participants.  Level 1 is therefore never overwritten, which is what makes
fixation equivalent to the level-1 allele at time zero.

Every reproduction event is logged as (time, class, participating levels,
atom index), enough to replay the run for the permutation coupling and for
ancestry tracing.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .measures import MeasureKind, MeasureSpec, induced_mutation_measure
from .params import EnvConvention, FrequencyState, SimParams
from .records import PathRecord

HEART, SPADE = 1, 0
ACTIVE, DORMANT = 1, 0


@dataclass
class LookdownState:
    """Alleles and activities indexed by level (1-based level = index + 1)."""

    alleles: np.ndarray
    activities: np.ndarray
    env: int = 0
    time: float = 0.0

    @property
    def size(self) -> int:
        return len(self.alleles)

    def copy(self) -> "LookdownState":
        return LookdownState(self.alleles.copy(), self.activities.copy(),
                             self.env, self.time)


@dataclass
class ReproductionEvent:
    t: float
    kind: str                  # "pair" | "large"
    levels: tuple[int, ...]    # participating levels, ascending; parent first
    atom: int | None = None

    @property
    def parent(self) -> int:
        return self.levels[0]


@dataclass
class LookdownRun:
    """Recorded grid path plus the full event log of one replicate."""

    record: PathRecord
    events: list[ReproductionEvent]
    init: LookdownState
    horizon: float
    level_snapshots: list[tuple[np.ndarray, np.ndarray]] | None = None

    def events_to_json_lines(self) -> str:
        import json
        lines = []
        for e in self.events:
            lines.append(json.dumps({
                "t": e.t, "class": e.kind, "levels": list(e.levels),
                "atom": e.atom}))
        return "\n".join(lines) + ("\n" if lines else "")


def exchangeable_lookdown_init(
    n_heart_active: int, n_heart_dormant: int,
    n_spade_active: int, n_spade_dormant: int,
    rng: np.random.Generator, env: int = 0,
    force_level1_heart: bool = False,
) -> LookdownState:
    """Uniformly permuted multiset init; optionally condition the level-1
    allele to heart (redraw until it is, preserving exchangeability of the
    remaining levels)."""
    alleles = np.array([HEART] * (n_heart_active + n_heart_dormant)
                       + [SPADE] * (n_spade_active + n_spade_dormant))
    acts = np.array([ACTIVE] * n_heart_active + [DORMANT] * n_heart_dormant
                    + [ACTIVE] * n_spade_active + [DORMANT] * n_spade_dormant)
    while True:
        order = rng.permutation(len(alleles))
        if not force_level1_heart or alleles[order[0]] == HEART:
            return LookdownState(alleles[order].copy(), acts[order].copy(), env)


def lookdown_frequencies(state: LookdownState) -> FrequencyState:
    n = state.size
    act = state.activities == ACTIVE
    hearts = state.alleles == HEART
    return FrequencyState(
        float((act & hearts).sum()) / n,
        float((~act & hearts).sum()) / n,
        float(act.sum()) / n,
        state.env,
    )


def simulate_lookdown(
    init: LookdownState,
    params: SimParams,
    horizon: float | None,
    record: list[float],
    rng: np.random.Generator,
    replicate: int = 0,
    until_monomorphic: bool = False,
    record_levels: bool = False,
) -> LookdownRun:
    """Event-driven run of the ordered model.

    Same clocks as the unordered model: pair events per active pair at a0,
    large events per reproduction atom at w/y^2 with Bernoulli(y)
    participation, activity flips, environment flips, single and coordinated
    mutations gated by the environment.  The lowest participating level is
    always the parent.
    """
    if until_monomorphic and params.mutation.total_mass() > 0:
        raise ValueError("monomorphic stopping requires a zero mutation measure")
    state = init.copy()
    n = state.size
    lam_atoms = params.reproduction.atoms
    lam_rates = [w / y**2 for y, w in lam_atoms]
    mut_atoms = params.mutation.atoms
    mut_rates = [w / y for y, w in mut_atoms]
    grid = sorted(float(t) for t in record)
    t_end = math.inf if until_monomorphic else float(horizon)

    events: list[ReproductionEvent] = []
    out_t: list[float] = []
    out_z: list[tuple] = []
    snapshots: list[tuple[np.ndarray, np.ndarray]] = []
    gi = 0
    fixation = None
    fixation_time = None

    def check_mono():
        nonlocal fixation, fixation_time
        if fixation is None:
            tot = int(state.alleles.sum())
            if tot == 0 or tot == n:
                fixation = "heart" if tot == n else "spade"
                fixation_time = state.time

    def record_until(t_next: float):
        nonlocal gi
        while gi < len(grid) and grid[gi] <= t_next + 1e-15:
            fs = lookdown_frequencies(state)
            out_t.append(grid[gi])
            out_z.append((fs.z1, fs.z2, fs.z3, fs.s))
            if record_levels:
                snapshots.append((state.alleles.copy(), state.activities.copy()))
            gi += 1

    check_mono()
    while True:
        if until_monomorphic:
            if fixation is not None and gi >= len(grid):
                break
        elif state.time >= t_end:
            break

        active = np.flatnonzero(state.activities == ACTIVE)
        n_act = len(active)
        n_dorm = n - n_act
        r_pair = params.a0 * n_act * (n_act - 1) / 2.0
        r_flip = params.alpha * n_act + params.sigma * n_dorm
        r_env = params.env_flip_rate(state.env)
        r_lam = sum(lam_rates)
        r_mut1 = params.b0 * n_act if state.env == 1 else 0.0
        r_mutc = sum(mut_rates) if state.env == 1 else 0.0
        total = r_pair + r_flip + r_env + r_lam + r_mut1 + r_mutc
        if total <= 0.0:
            record_until(math.inf)
            break
        t_next = state.time + rng.exponential(1.0 / total)
        record_until(min(t_next, t_end))
        if t_next > t_end:
            state.time = t_end
            break
        state.time = t_next

        u = rng.uniform(0.0, total)
        if u < r_pair:
            i, j = rng.choice(n_act, size=2, replace=False)
            lo, hi = sorted((int(active[i]), int(active[j])))
            state.alleles[hi] = state.alleles[lo]
            events.append(ReproductionEvent(state.time, "pair",
                                            (lo + 1, hi + 1)))
        elif u < r_pair + r_flip:
            v = rng.uniform(0.0, r_flip)
            if v < params.alpha * n_act:
                i = int(active[rng.integers(n_act)])
                state.activities[i] = DORMANT
            else:
                dorm = np.flatnonzero(state.activities == DORMANT)
                i = int(dorm[rng.integers(len(dorm))])
                state.activities[i] = ACTIVE
        elif u < r_pair + r_flip + r_env:
            state.env = 1 - state.env
        elif u < r_pair + r_flip + r_env + r_lam:
            j_at = _pick(lam_rates, rng)
            y = lam_atoms[j_at][0]
            mask = rng.random(n_act) < y
            participants = active[mask]
            if len(participants) >= 2:
                lo = int(participants[0])  # active indices ascend
                state.alleles[participants] = state.alleles[lo]
                events.append(ReproductionEvent(
                    state.time, "large",
                    tuple(int(p) + 1 for p in participants), j_at))
        elif u < r_pair + r_flip + r_env + r_lam + r_mut1:
            i = int(active[rng.integers(n_act)])
            state.alleles[i] = HEART
        else:
            j_at = _pick(mut_rates, rng)
            y = mut_atoms[j_at][0]
            mask = rng.random(n_act) < y
            state.alleles[active[mask]] = HEART
        check_mono()

    record_until(t_end)
    z = np.array(out_z) if out_z else np.zeros((0, 4))
    rec = PathRecord(
        replicate=replicate,
        times=np.array(out_t),
        z1=z[:, 0] if len(z) else np.array([]),
        z2=z[:, 1] if len(z) else np.array([]),
        z3=z[:, 2] if len(z) else np.array([]),
        env=z[:, 3].astype(int) if len(z) else np.array([], dtype=int),
        fixation=fixation,
        fixation_time=fixation_time,
    )
    return LookdownRun(record=rec, events=events, init=init.copy(),
                       horizon=t_end,
                       level_snapshots=snapshots if record_levels else None)


def _pick(weights, rng) -> int:
    total = sum(weights)
    u = rng.uniform(0.0, total)
    acc = 0.0
    for j, w in enumerate(weights):
        acc += w
        if u < acc:
            return j
    return len(weights) - 1


# ---------------------------------------------------------------------------
# Permutation coupling
# ---------------------------------------------------------------------------


@dataclass
class PermutationCoupling:
    """Skeleton chain of the permutation linking ordered and unordered runs.

    thetas[k] is the permutation in force on [event_times[k], next time);
    theta maps unordered position -> level, so the unordered individual i is
    X_{theta[i]} in the ordered run.
    """

    event_times: list[float]
    thetas: list[np.ndarray]

    def theta_at(self, t: float) -> np.ndarray:
        idx = bisect.bisect_right(self.event_times, t) - 1
        return self.thetas[max(idx, 0)]


def couple_permutation(run: LookdownRun, theta0: np.ndarray,
                       rng: np.random.Generator) -> PermutationCoupling:
    """Build the permutation process from a run's reproduction log.

    theta0 must be drawn uniformly and independently of the run.  At each
    reproduction event the positions currently mapped to the involved levels
    are rearranged by an independent uniform permutation of the involved
    index set (Fisher-Yates on that set only); everything else stays put.
    """
    n = run.init.size
    theta = np.asarray(theta0, dtype=np.int64)
    if sorted(theta.tolist()) != list(range(1, n + 1)):
        raise ValueError("theta0 must be a permutation of 1..N")
    for e in run.events:
        if any(not (1 <= lv <= n) for lv in e.levels):
            raise ValueError("event log inconsistent with run size")
    times = [0.0]
    thetas = [theta.copy()]
    inv = np.empty(n + 1, dtype=np.int64)
    for e in run.events:
        for lv, pos in zip(theta, range(n)):
            inv[lv] = pos
        levels = np.array(sorted(e.levels), dtype=np.int64)
        positions = np.array(sorted(inv[lv] for lv in levels), dtype=np.int64)
        sigma = rng.permutation(len(levels))
        theta = theta.copy()
        theta[positions] = levels[sigma]
        times.append(e.t)
        thetas.append(theta.copy())
    return PermutationCoupling(times, thetas)


def unordered_view(run: LookdownRun, coupling: PermutationCoupling,
                   t: float, state_at):
    """Alleles/activities of the coupled unordered model at time t.

    state_at must supply the ordered state at t (see replay_state).
    """
    theta = coupling.theta_at(t)
    st = state_at(t)
    return st.alleles[theta - 1], st.activities[theta - 1]


def replay_state(run: LookdownRun, t: float) -> LookdownState:
    """Ordered alleles at time t by replaying the reproduction log.

    Activities are not replayed (the log stores only reproduction); use grid
    recordings when activities are needed.
    """
    st = run.init.copy()
    for e in run.events:
        if e.t > t:
            break
        levels = np.array(e.levels, dtype=np.int64) - 1
        st.alleles[levels] = st.alleles[levels[0]]
    st.time = t
    return st


# ---------------------------------------------------------------------------
# Ancestral lines
# ---------------------------------------------------------------------------


@dataclass
class AncestralLine:
    """Backward trace of one sampled level.

    trace is piecewise constant in elapsed backward time: a list of
    (backward_time, level) steps starting at (0, sampled level).  tau is the
    first backward time the line occupies level 1 (inf if censored at the
    available history).
    """

    sample_level: int
    sample_time: float
    trace: list[tuple[float, int]]
    tau: float

    def level_at(self, backward_time: float) -> int:
        level = self.trace[0][1]
        for (bt, lv) in self.trace:
            if bt <= backward_time:
                level = lv
            else:
                break
        return level


def trace_ancestry(run: LookdownRun, sample: tuple[int, float]) -> AncestralLine:
    """Walk the event log backward from (level, time).

    At each reproduction event where the line's level is an offspring the
    line jumps to the parent (lowest participating) level; otherwise it is
    unchanged.
    """
    level, t_sample = sample
    n = run.init.size
    if not (1 <= level <= n):
        raise ValueError(f"level {level} out of range 1..{n}")
    if t_sample > run.horizon:
        raise ValueError("sample time is beyond the run horizon")
    trace = [(0.0, level)]
    tau = 0.0 if level == 1 else math.inf
    current = level
    for e in reversed(run.events):
        if e.t > t_sample:
            continue
        if current in e.levels and current != e.parent:
            current = e.parent
            bt = t_sample - e.t
            trace.append((bt, current))
            if current == 1 and math.isinf(tau):
                tau = bt
                break
    return AncestralLine(level, t_sample, trace, tau)


# ---------------------------------------------------------------------------
# Conditioned model
# ---------------------------------------------------------------------------


class ConditionedMode(Enum):
    DIRECT = "direct"
    REDUCED = "reduced"


def conditioned_model(
    params: SimParams,
    n_pop: int,
    init_counts: tuple[int, int, int, int],
    horizon: float,
    record: list[float],
    rng: np.random.Generator,
    mode: ConditionedMode = ConditionedMode.DIRECT,
    replicate: int = 0,
) -> PathRecord:
    """Fixation-conditioned dynamics of the levels above the first.

    init_counts = (heart active, heart dormant, spade active, spade dormant)
    for the full N-level model; the level-1 allele is forced to heart.  The
    input mutation measure must be zero: the conditioning construction is
    for reproduction-only dynamics.

    DIRECT simulates the full N-level run and reports the frequency vector
    of levels 2..N together with env = 1{level 1 active}.  REDUCED simulates
    an (N-1)-level run whose environment is an autonomous activity chain
    (1 -> 0 at alpha, 0 -> 1 at sigma under the default convention) and
    whose mutation measure is the induced one; it reports its own
    frequencies and environment.  The full-model frequency decomposes as
    (1/N)(env, 1-env, env) + ((N-1)/N) * reduced frequency.
    """
    if params.mutation.total_mass() > 0:
        raise ValueError("conditioning assumes reproduction-only dynamics "
                         "(zero mutation measure)")
    ha, hd, sa, sd = init_counts
    if ha + hd + sa + sd != n_pop:
        raise ValueError("initial counts must sum to the population size")
    if ha + hd < 1:
        raise ValueError("need at least one heart to force onto level 1")

    if mode is ConditionedMode.DIRECT:
        init = exchangeable_lookdown_init(ha, hd, sa, sd, rng,
                                          force_level1_heart=True)
        run = simulate_lookdown(init, params, horizon, record, rng,
                                replicate=replicate, record_levels=True)
        # report levels 2..N; env is the level-1 activity (level 1 stays
        # heart forever: the lowest level is never overwritten)
        times, z1, z2, z3, env = [], [], [], [], []
        for t, (alleles, acts) in zip(run.record.times, run.level_snapshots):
            upper_alleles = alleles[1:]
            upper_acts = acts[1:]
            hearts = upper_alleles == HEART
            active = upper_acts == ACTIVE
            times.append(t)
            z1.append(float((hearts & active).sum()) / (n_pop - 1))
            z2.append(float((hearts & ~active).sum()) / (n_pop - 1))
            z3.append(float(active.sum()) / (n_pop - 1))
            env.append(int(acts[0] == ACTIVE))
        return PathRecord(replicate=replicate, times=np.array(times),
                          z1=np.array(z1), z2=np.array(z2), z3=np.array(z3),
                          env=np.array(env, dtype=int),
                          fixation=run.record.fixation,
                          fixation_time=run.record.fixation_time)

    # REDUCED: (N-1)-level model, induced mutations, autonomous environment
    reduced_params = SimParams(
        params.reproduction,
        induced_mutation_measure(params.reproduction),
        params.alpha, params.sigma, params.env_convention)
    # level 1's initial activity: hypergeometric given its allele is heart
    p_active = ha / (ha + hd)
    lvl1_active = 1 if rng.random() < p_active else 0
    if lvl1_active:
        rem = (ha - 1, hd, sa, sd)
    else:
        rem = (ha, hd - 1, sa, sd)
    init = exchangeable_lookdown_init(*rem, rng, env=lvl1_active)
    return _simulate_reduced(init, reduced_params, horizon, record, rng,
                             replicate)


def _simulate_reduced(init, params, horizon, record, rng, replicate):
    run = simulate_lookdown(init, params, horizon, record, rng,
                            replicate=replicate)
    return run.record


# ---------------------------------------------------------------------------
# Replicated kernel (no event logs) for the fixation experiments
# ---------------------------------------------------------------------------
# The pure-Python simulator above is the reference; this kernel repeats its
# dynamics without event logging so that thousands of runs to monomorphism
# stay cheap.  Law equality between the two is covered by tests.

from numba import njit  # noqa: E402
from .rng import (philox_make_state, philox_next_double,  # noqa: E402
                  philox_next_exponential, philox_randint)


@njit(cache=True)
def _shuffle(arr, st):
    for i in range(arr.shape[0] - 1, 0, -1):
        j = philox_randint(st, i + 1)
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp


@njit(cache=True)
def _lookdown_once(alleles, acts, env, a0, b0, alpha, sigma,
                   lam_y, lam_rate, mut_y, mut_rate, env_am,
                   grid, until_mono, report_upper, st, out_z, out_fix,
                   lv_alleles, lv_acts):
    n = alleles.shape[0]
    lo_report = 1 if report_upper else 0
    n_rep = n - lo_report
    t = 0.0
    gi = 0
    n_grid = grid.shape[0]
    t_end = grid[n_grid - 1] if n_grid > 0 else 0.0
    n_lam = lam_y.shape[0]
    n_mut = mut_y.shape[0]
    lam_total = 0.0
    for j in range(n_lam):
        lam_total += lam_rate[j]
    mut_total = 0.0
    for j in range(n_mut):
        mut_total += mut_rate[j]
    fix_code = CENSORED_LD
    fix_time = -1.0

    while True:
        if fix_code == CENSORED_LD:
            tot = 0
            for i in range(n):
                tot += alleles[i]
            if tot == 0:
                fix_code = FIXED_SPADE_LD
                fix_time = t
            elif tot == n:
                fix_code = FIXED_HEART_LD
                fix_time = t
        if gi >= n_grid and (not until_mono or fix_code != CENSORED_LD):
            break

        n_act = 0
        for i in range(n):
            n_act += acts[i]
        n_dorm = n - n_act
        r_pair = a0 * n_act * (n_act - 1) / 2.0
        r_flip = alpha * n_act + sigma * n_dorm
        r_env = (alpha if env == 1 else sigma) if env_am else \
            (sigma if env == 1 else alpha)
        r_mut1 = b0 * n_act if env == 1 else 0.0
        r_mutc = mut_total if env == 1 else 0.0
        total = r_pair + r_flip + r_env + lam_total + r_mut1 + r_mutc
        if total <= 0.0:
            while gi < n_grid:
                _record_ld(out_z, gi, alleles, acts, env, lo_report, n_rep,
                           report_upper)
                if gi == n_grid - 1:
                    _snapshot_levels(alleles, acts, lv_alleles, lv_acts)
                gi += 1
            break
        t_next = t + philox_next_exponential(st) / total
        while gi < n_grid and grid[gi] <= t_next:
            _record_ld(out_z, gi, alleles, acts, env, lo_report, n_rep,
                       report_upper)
            if gi == n_grid - 1:
                _snapshot_levels(alleles, acts, lv_alleles, lv_acts)
            gi += 1
        t = t_next

        u = philox_next_double(st) * total
        if u < r_pair:
            i1 = philox_randint(st, n_act)
            j1 = philox_randint(st, n_act - 1)
            if j1 >= i1:
                j1 += 1
            lo = i1 if i1 < j1 else j1
            hi = i1 + j1 - lo
            # translate active ranks to level indices
            lo_lv = _kth_active(acts, lo)
            hi_lv = _kth_active(acts, hi)
            alleles[hi_lv] = alleles[lo_lv]
        elif u < r_pair + r_flip:
            v = philox_next_double(st) * r_flip
            if v < alpha * n_act:
                i = _kth_active(acts, philox_randint(st, n_act))
                acts[i] = 0
            else:
                i = _kth_dormant(acts, philox_randint(st, n_dorm))
                acts[i] = 1
        elif u < r_pair + r_flip + r_env:
            env = 1 - env
        elif u < r_pair + r_flip + r_env + lam_total:
            v = philox_next_double(st) * lam_total
            acc = 0.0
            j_at = n_lam - 1
            for j in range(n_lam):
                acc += lam_rate[j]
                if v < acc:
                    j_at = j
                    break
            y = lam_y[j_at]
            parent = -1
            count = 0
            for i in range(n):
                if acts[i] == 1 and philox_next_double(st) < y:
                    if parent < 0:
                        parent = i
                    else:
                        alleles[i] = -1  # mark offspring, fill after parent known
                    count += 1
            if count >= 2:
                pa = alleles[parent]
                for i in range(n):
                    if alleles[i] == -1:
                        alleles[i] = pa
            elif count == 1:
                pass  # single participant: nothing to copy
        elif u < r_pair + r_flip + r_env + lam_total + r_mut1:
            i = _kth_active(acts, philox_randint(st, n_act))
            alleles[i] = 1
        else:
            v = philox_next_double(st) * r_mutc
            acc = 0.0
            j_at = n_mut - 1
            for j in range(n_mut):
                acc += mut_rate[j]
                if v < acc:
                    j_at = j
                    break
            y = mut_y[j_at]
            for i in range(n):
                if acts[i] == 1 and philox_next_double(st) < y:
                    alleles[i] = 1

    out_fix[0] = fix_code
    out_fix[1] = fix_time
    return t


@njit(cache=True, inline="always")
def _snapshot_levels(alleles, acts, lv_alleles, lv_acts):
    for i in range(alleles.shape[0]):
        lv_alleles[i] = alleles[i]
        lv_acts[i] = acts[i]


@njit(cache=True, inline="always")
def _kth_active(acts, k):
    c = -1
    for i in range(acts.shape[0]):
        if acts[i] == 1:
            c += 1
            if c == k:
                return i
    return acts.shape[0] - 1


@njit(cache=True, inline="always")
def _kth_dormant(acts, k):
    c = -1
    for i in range(acts.shape[0]):
        if acts[i] == 0:
            c += 1
            if c == k:
                return i
    return acts.shape[0] - 1


@njit(cache=True, inline="always")
def _record_ld(out_z, gi, alleles, acts, env, lo, n_rep, report_upper):
    h_act = 0
    h_dor = 0
    act = 0
    for i in range(lo, alleles.shape[0]):
        if alleles[i] == 1:
            if acts[i] == 1:
                h_act += 1
            else:
                h_dor += 1
        if acts[i] == 1:
            act += 1
    out_z[gi, 0] = h_act / n_rep
    out_z[gi, 1] = h_dor / n_rep
    out_z[gi, 2] = act / n_rep
    out_z[gi, 3] = acts[0] if report_upper else env


CENSORED_LD, FIXED_HEART_LD, FIXED_SPADE_LD = 0, 1, 2


@njit(cache=True)
def lookdown_many(reps, rep_offset, master_seed, role,
                  ha, hd, sa, sd, env0,
                  a0, b0, alpha, sigma, lam_y, lam_rate, mut_y, mut_rate,
                  env_am, grid, until_mono, force_l1_heart, report_upper,
                  reduce_level1):
    """Replicated lookdown runs without event logs.

    With reduce_level1 the level-1 individual (a heart, activity drawn from
    the conditioned hypergeometric) is removed from the multiset, its
    activity becomes the autonomous environment bit, and the remaining
    multiset runs as an (N-1)-level model: the reduced conditioned mode.
    Returns grid samples, fixation codes/times and the initial level-1
    allele of each run.
    """
    n_grid = grid.shape[0]
    out = np.empty((reps, n_grid, 4), dtype=np.float64)
    fix = np.empty((reps, 2), dtype=np.float64)
    lvl1 = np.empty(reps, dtype=np.int64)
    n_build = ha + hd + sa + sd - (1 if reduce_level1 else 0)
    levels = np.zeros((reps, 2, n_build), dtype=np.int64)
    for r in range(reps):
        st = philox_make_state(master_seed, np.uint64(rep_offset + r), role)
        env = env0
        ha_r, hd_r, sa_r, sd_r = ha, hd, sa, sd
        if reduce_level1:
            p_act = ha / (ha + hd)
            if philox_next_double(st) < p_act:
                env = 1
                ha_r -= 1
            else:
                env = 0
                hd_r -= 1
        n = ha_r + hd_r + sa_r + sd_r
        alleles = np.empty(n, dtype=np.int64)
        acts = np.empty(n, dtype=np.int64)
        idx = 0
        for _ in range(ha_r):
            alleles[idx] = 1
            acts[idx] = 1
            idx += 1
        for _ in range(hd_r):
            alleles[idx] = 1
            acts[idx] = 0
            idx += 1
        for _ in range(sa_r):
            alleles[idx] = 0
            acts[idx] = 1
            idx += 1
        for _ in range(sd_r):
            alleles[idx] = 0
            acts[idx] = 0
            idx += 1
        perm = np.arange(n)
        while True:
            _shuffle(perm, st)
            if not force_l1_heart or alleles[perm[0]] == 1:
                break
        a2 = alleles[perm].copy()
        c2 = acts[perm].copy()
        lvl1[r] = a2[0]
        _lookdown_once(a2, c2, env, a0, b0, alpha, sigma,
                       lam_y, lam_rate, mut_y, mut_rate, env_am,
                       grid, until_mono, report_upper, st, out[r], fix[r],
                       levels[r, 0], levels[r, 1])
    return out, fix, lvl1, levels


def lookdown_replicates(
    params: SimParams,
    counts: tuple[int, int, int, int],
    env0: int,
    grid,
    reps: int,
    master_seed: int,
    role: int = 0,
    rep_offset: int = 0,
    until_monomorphic: bool = False,
    force_level1_heart: bool = False,
    report_upper: bool = False,
    reduce_level1: bool = False,
):
    """Python wrapper over the replicated kernel.

    counts = (heart active, heart dormant, spade active, spade dormant).
    """
    if until_monomorphic and params.mutation.total_mass() > 0:
        raise ValueError("monomorphic stopping requires a zero mutation measure")
    lam_y = np.array([y for y, _ in params.reproduction.atoms], dtype=np.float64)
    lam_rate = np.array([w / y**2 for y, w in params.reproduction.atoms],
                        dtype=np.float64)
    mut_y = np.array([y for y, _ in params.mutation.atoms], dtype=np.float64)
    mut_rate = np.array([w / y for y, w in params.mutation.atoms],
                        dtype=np.float64)
    env_am = params.env_convention is EnvConvention.ACTIVITY_MATCHED
    grid = np.asarray(grid, dtype=np.float64)
    ha, hd, sa, sd = (int(c) for c in counts)
    return lookdown_many(reps, rep_offset, np.uint64(master_seed),
                         np.uint64(role), ha, hd, sa, sd, int(env0),
                         params.a0, params.b0, params.alpha, params.sigma,
                         lam_y, lam_rate, mut_y, mut_rate, env_am, grid,
                         until_monomorphic, force_level1_heart, report_upper,
                         reduce_level1)
