"""Exact event-driven simulation of the unordered seed-bank Moran model.

Every individual carries an allele (heart or spade) and an activity state;
only active individuals reproduce or mutate.  Five event classes compete as
exponential clocks:

* activity flips, per individual (deactivate at alpha, activate at sigma);
* pairwise reproduction, rate a0 per unordered pair of active individuals
  (parent uniform within the pair);
* large reproduction per atom (y, w) at rate w/y^2: each active individual
  participates with probability y, the parent is uniform among participants,
  events with fewer than two participants consume the clock but change
  nothing;
* single mutation to heart at rate b0 per active individual while the
  environment is on;
* coordinated mutation per atom (y, w) at rate w/y while the environment is
  on: each active individual mutates to heart with probability y;
* environment flips per the configured convention.

This implementation keeps the full individual vector and is the readable
reference the fast frequency-chain kernel is tested against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .params import FrequencyState, SimParams
from .records import PathRecord


class Allele(Enum):
    HEART = 1
    SPADE = 0


class Activity(Enum):
    ACTIVE = 1
    DORMANT = 0


@dataclass(frozen=True)
class Individual:
    allele: Allele
    activity: Activity


@dataclass
class PopulationState:
    """N individuals plus the environment bit and the running clock."""

    individuals: list[Individual]
    env: int = 0
    time: float = 0.0

    def __post_init__(self):
        if len(self.individuals) == 0:
            raise ValueError("population must contain at least one individual")
        if self.env not in (0, 1):
            raise ValueError("env must be 0 or 1")

    @property
    def size(self) -> int:
        return len(self.individuals)

    def copy(self) -> "PopulationState":
        return PopulationState(list(self.individuals), self.env, self.time)


class EventTag(Enum):
    ACTIVATE = "activate"
    DEACTIVATE = "deactivate"
    ENV_FLIP = "env_flip"
    PAIR_REPRODUCTION = "pair_reproduction"
    LARGE_REPRODUCTION = "large_reproduction"
    SINGLE_MUTATION = "single_mutation"
    COORDINATED_MUTATION = "coordinated_mutation"


UNTIL_MONOMORPHIC = "until_monomorphic"

_HA = Individual(Allele.HEART, Activity.ACTIVE)


def exchangeable_init(
    n_heart_active: int,
    n_heart_dormant: int,
    n_spade_active: int,
    n_spade_dormant: int,
    rng: np.random.Generator,
    env: int = 0,
) -> PopulationState:
    """Uniformly permuted multiset of (allele, activity) pairs.

    The uniform permutation is what makes the initial law exchangeable.
    """
    pool = (
        [Individual(Allele.HEART, Activity.ACTIVE)] * n_heart_active
        + [Individual(Allele.HEART, Activity.DORMANT)] * n_heart_dormant
        + [Individual(Allele.SPADE, Activity.ACTIVE)] * n_spade_active
        + [Individual(Allele.SPADE, Activity.DORMANT)] * n_spade_dormant
    )
    order = rng.permutation(len(pool))
    return PopulationState([pool[i] for i in order], env=env)


def frequencies(state: PopulationState) -> FrequencyState:
    n = state.size
    z1 = sum(1 for ind in state.individuals
             if ind.allele is Allele.HEART and ind.activity is Activity.ACTIVE)
    z2 = sum(1 for ind in state.individuals
             if ind.allele is Allele.HEART and ind.activity is Activity.DORMANT)
    z3 = sum(1 for ind in state.individuals if ind.activity is Activity.ACTIVE)
    return FrequencyState(z1 / n, z2 / n, z3 / n, state.env)


def _active_indices(state: PopulationState) -> list[int]:
    return [i for i, ind in enumerate(state.individuals)
            if ind.activity is Activity.ACTIVE]


def event_rates(state: PopulationState, params: SimParams) -> dict[EventTag, float]:
    """Instantaneous total rate of each event class (no-op events included)."""
    active = _active_indices(state)
    n_act = len(active)
    n_dorm = state.size - n_act
    rates = {
        EventTag.DEACTIVATE: params.alpha * n_act,
        EventTag.ACTIVATE: params.sigma * n_dorm,
        EventTag.ENV_FLIP: params.env_flip_rate(state.env),
        EventTag.PAIR_REPRODUCTION: params.a0 * n_act * (n_act - 1) / 2.0,
        EventTag.LARGE_REPRODUCTION: sum(w / y**2 for y, w in params.reproduction.atoms),
        EventTag.SINGLE_MUTATION: params.b0 * n_act if state.env == 1 else 0.0,
        EventTag.COORDINATED_MUTATION: (
            sum(w / y for y, w in params.mutation.atoms) if state.env == 1 else 0.0),
    }
    return rates


def step(state: PopulationState, params: SimParams,
         rng: np.random.Generator) -> tuple[PopulationState, EventTag]:
    """Apply one event sampled from the competing exponential clocks.

    Returns the new state (time advanced by the exponential holding time)
    and the tag of the event class that fired.
    """
    rates = event_rates(state, params)
    total = sum(rates.values())
    if total <= 0.0:
        raise RuntimeError("no event can occur (all rates zero)")
    hold = rng.exponential(1.0 / total)
    new = state.copy()
    new.time = state.time + hold

    u = rng.uniform(0.0, total)
    acc = 0.0
    tag = None
    for candidate, r in rates.items():
        acc += r
        if u < acc:
            tag = candidate
            break
    if tag is None:  # floating-point edge; take the last positive class
        tag = candidate

    inds = new.individuals
    active = _active_indices(new)

    if tag is EventTag.DEACTIVATE:
        i = active[rng.integers(len(active))]
        inds[i] = Individual(inds[i].allele, Activity.DORMANT)
    elif tag is EventTag.ACTIVATE:
        dormant = [i for i, ind in enumerate(inds) if ind.activity is Activity.DORMANT]
        i = dormant[rng.integers(len(dormant))]
        inds[i] = Individual(inds[i].allele, Activity.ACTIVE)
    elif tag is EventTag.ENV_FLIP:
        new.env = 1 - new.env
    elif tag is EventTag.PAIR_REPRODUCTION:
        i, j = rng.choice(len(active), size=2, replace=False)
        a, b = active[i], active[j]
        parent, child = (a, b) if rng.random() < 0.5 else (b, a)
        inds[child] = Individual(inds[parent].allele, inds[child].activity)
    elif tag is EventTag.LARGE_REPRODUCTION:
        atom_rates = [w / y**2 for y, w in params.reproduction.atoms]
        j = _pick(atom_rates, rng)
        y = params.reproduction.atoms[j][0]
        participants = [i for i in active if rng.random() < y]
        if len(participants) >= 2:
            parent = participants[rng.integers(len(participants))]
            allele = inds[parent].allele
            for i in participants:
                inds[i] = Individual(allele, inds[i].activity)
    elif tag is EventTag.SINGLE_MUTATION:
        i = active[rng.integers(len(active))]
        inds[i] = Individual(Allele.HEART, Activity.ACTIVE)
    elif tag is EventTag.COORDINATED_MUTATION:
        atom_rates = [w / y for y, w in params.mutation.atoms]
        j = _pick(atom_rates, rng)
        y = params.mutation.atoms[j][0]
        for i in active:
            if rng.random() < y:
                inds[i] = Individual(Allele.HEART, Activity.ACTIVE)

    return new, tag


def _pick(weights: list[float], rng: np.random.Generator) -> int:
    total = sum(weights)
    u = rng.uniform(0.0, total)
    acc = 0.0
    for j, w in enumerate(weights):
        acc += w
        if u < acc:
            return j
    return len(weights) - 1


def is_monomorphic(state: PopulationState) -> Allele | None:
    alleles = {ind.allele for ind in state.individuals}
    if len(alleles) == 1:
        return next(iter(alleles))
    return None


def simulate(
    init: PopulationState,
    params: SimParams,
    horizon: float | str,
    record: list[float],
    rng: np.random.Generator,
    replicate: int = 0,
    record_individuals: bool = False,
) -> PathRecord:
    """Run until the horizon (or until monomorphic) recording the frequency
    path on the grid.

    With horizon=UNTIL_MONOMORPHIC the mutation measure must be zero
    (otherwise absorption is not guaranteed) and the run continues until the
    population is monomorphic and every grid time has been recorded.
    """
    until_mono = horizon == UNTIL_MONOMORPHIC
    if until_mono and params.mutation.total_mass() > 0:
        raise ValueError("UNTIL_MONOMORPHIC requires a zero mutation measure")
    t_end = math.inf if until_mono else float(horizon)
    grid = sorted(float(t) for t in record)

    state = init.copy()
    out_t, out_z, snaps = [], [], []
    gi = 0
    fixation = None
    fixation_time = None

    def record_until(t_next: float):
        nonlocal gi
        while gi < len(grid) and grid[gi] <= t_next + 1e-15:
            fs = frequencies(state)
            out_t.append(grid[gi])
            out_z.append((fs.z1, fs.z2, fs.z3, fs.s))
            if record_individuals:
                snaps.append({
                    "t": grid[gi],
                    "individuals": [[ind.allele.name, ind.activity.name]
                                    for ind in state.individuals],
                    "env": state.env,
                })
            gi += 1

    mono = is_monomorphic(state)
    if mono is not None:
        fixation = "heart" if mono is Allele.HEART else "spade"
        fixation_time = state.time

    while True:
        done_mono = fixation is not None
        if until_mono:
            if done_mono and gi >= len(grid):
                break
            if done_mono and params.alpha == 0 and params.sigma == 0:
                # alleles fixed and activities frozen: fill the rest of the grid
                record_until(math.inf)
                break
        elif state.time >= t_end:
            break

        rates = event_rates(state, params)
        if sum(rates.values()) <= 0:
            record_until(math.inf)
            break
        nxt, _tag = step(state, params, rng)
        t_cut = min(nxt.time, t_end)
        record_until(t_cut)
        if nxt.time > t_end:
            break
        state = nxt
        if fixation is None:
            mono = is_monomorphic(state)
            if mono is not None:
                fixation = "heart" if mono is Allele.HEART else "spade"
                fixation_time = state.time

    record_until(math.inf if until_mono else t_end)
    z = np.array(out_z) if out_z else np.zeros((0, 4))
    return PathRecord(
        replicate=replicate,
        times=np.array(out_t),
        z1=z[:, 0] if len(z) else np.array([]),
        z2=z[:, 1] if len(z) else np.array([]),
        z3=z[:, 2] if len(z) else np.array([]),
        env=z[:, 3].astype(int) if len(z) else np.array([], dtype=int),
        fixation=fixation,
        fixation_time=fixation_time,
        snapshots=snaps if record_individuals else None,
    )
