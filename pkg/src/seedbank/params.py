"""Shared model parameters and the frequency-state tuple."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .measures import MeasureKind, MeasureSpec, require_valid


class EnvConvention(Enum):
    """How the mutation-gating environment flips between its two states.

    ACTIVITY_MATCHED: the environment behaves like an individual's activity
    chain (1 -> 0 at rate alpha, 0 -> 1 at rate sigma).  This is the
    convention under which the fixation-conditioning experiments come out
    consistent, and the default everywhere.

    PAPER_LITERAL: the opposite orientation (0 -> 1 at alpha, 1 -> 0 at
    sigma).  Kept so the discrepancy between the conventions can be
    demonstrated; see the fixation experiment.
    """

    ACTIVITY_MATCHED = "activity_matched"
    PAPER_LITERAL = "paper_literal"


ZERO_MUTATION = MeasureSpec(0.0, (), MeasureKind.MUTATION)


@dataclass(frozen=True)
class SimParams:
    """Parameters shared by the particle models, the coalescent and the SDEs.

    alpha is the deactivation rate, sigma the activation rate; both >= 0
    (zero rates are accepted, leaving permanently active or dormant
    individuals reachable).
    """

    reproduction: MeasureSpec
    mutation: MeasureSpec = ZERO_MUTATION
    alpha: float = 0.0
    sigma: float = 0.0
    env_convention: EnvConvention = EnvConvention.ACTIVITY_MATCHED

    def __post_init__(self):
        if self.reproduction.kind is not MeasureKind.REPRODUCTION:
            raise ValueError("reproduction measure must have kind REPRODUCTION")
        if self.mutation.kind is not MeasureKind.MUTATION:
            raise ValueError("mutation measure must have kind MUTATION")
        require_valid(self.reproduction)
        require_valid(self.mutation)
        if self.alpha < 0 or self.sigma < 0:
            raise ValueError("activity rates must be >= 0")

    @property
    def a0(self) -> float:
        return self.reproduction.kingman_mass

    @property
    def b0(self) -> float:
        return self.mutation.kingman_mass

    def env_flip_rate(self, s: int) -> float:
        """Rate at which the environment leaves state s."""
        if self.env_convention is EnvConvention.ACTIVITY_MATCHED:
            return self.alpha if s == 1 else self.sigma
        return self.sigma if s == 1 else self.alpha

    def env_stationary_on(self) -> float:
        """Stationary probability of the mutation-permitting state."""
        if self.alpha + self.sigma == 0:
            return 0.5
        if self.env_convention is EnvConvention.ACTIVITY_MATCHED:
            return self.sigma / (self.alpha + self.sigma)
        return self.alpha / (self.alpha + self.sigma)

    def with_mutation(self, mutation: MeasureSpec) -> "SimParams":
        return SimParams(self.reproduction, mutation, self.alpha, self.sigma,
                         self.env_convention)


@dataclass(frozen=True)
class FrequencyState:
    """(z1, z2, z3, s): active-heart, dormant-heart and active-total
    frequencies plus the environment bit."""

    z1: float
    z2: float
    z3: float
    s: int = 0

    def counts(self, n_pop: int) -> tuple[int, int, int]:
        """Integer counts (N*z1, N*z2, N*z3); raises if any is non-integer."""
        out = []
        for name, z in (("z1", self.z1), ("z2", self.z2), ("z3", self.z3)):
            v = z * n_pop
            r = round(v)
            if abs(v - r) > 1e-9:
                raise ValueError(f"N*{name} = {v} is not an integer")
            out.append(int(r))
        a, b, k = out
        if not (0 <= a <= k <= n_pop and 0 <= b <= n_pop - k):
            raise ValueError(f"frequencies outside the admissible lattice: {self}")
        return a, b, k

    def in_simplex(self) -> bool:
        return (0.0 <= self.z1 <= self.z3 <= 1.0
                and 0.0 <= self.z2 <= 1.0 - self.z3)
