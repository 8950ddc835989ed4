"""Reproduction and mutation measures as finite atom lists.

A reproduction measure splits into a Kingman atom at zero (pairwise events)
plus finitely many atoms on (0, 1] driving large events; a mutation measure
splits into a single-mutation rate plus atoms driving coordinated mutations.
Finite atom lists keep every Poisson driver at finite rate, so the particle
simulators stay exactly event-driven.

Event-rate conventions used throughout the package:

* reproduction atom (y, w): events at rate w / y^2, each active individual
  participates with probability y;
* mutation atom (y, w): events at rate w / y, each active individual mutates
  with probability y (only while the environment allows mutation).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence


class MeasureKind(Enum):
    REPRODUCTION = "reproduction"
    MUTATION = "mutation"


@dataclass(frozen=True)
class MeasureSpec:
    """Finite-atom representation of a reproduction or mutation measure.

    ``kingman_mass`` is the atom at zero (pairwise-reproduction rate, or the
    single-mutation rate).  ``atoms`` holds (location, weight) pairs with
    locations in (0, 1], strictly increasing.
    """

    kingman_mass: float
    atoms: tuple[tuple[float, float], ...] = ()
    kind: MeasureKind = MeasureKind.REPRODUCTION

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple((float(y), float(w)) for y, w in self.atoms))

    @property
    def locations(self) -> tuple[float, ...]:
        return tuple(y for y, _ in self.atoms)

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(w for _, w in self.atoms)

    def total_mass(self) -> float:
        return self.kingman_mass + sum(self.weights)

    def to_json(self) -> str:
        return json.dumps({
            "kingman_mass": self.kingman_mass,
            "atoms": [[y, w] for y, w in self.atoms],
            "kind": self.kind.value,
        })

    @staticmethod
    def from_json(text: str) -> "MeasureSpec":
        obj = json.loads(text)
        return MeasureSpec(
            kingman_mass=float(obj["kingman_mass"]),
            atoms=tuple((float(y), float(w)) for y, w in obj["atoms"]),
            kind=MeasureKind(obj["kind"]),
        )


@dataclass
class ValidationReport:
    """Diagnostic list of invariant violations; empty means valid."""

    violations: list[str] = field(default_factory=list)

    def add(self, message: str) -> None:
        self.violations.append(message)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:  # truthy iff valid, so `if validate(spec):` reads naturally
        return self.ok


class InvalidMeasureError(ValueError):
    def __init__(self, report: ValidationReport):
        super().__init__("; ".join(report.violations))
        self.report = report


def validate(spec: MeasureSpec) -> ValidationReport:
    """Check every structural invariant of a measure spec."""
    report = ValidationReport()
    if not math.isfinite(spec.kingman_mass) or spec.kingman_mass < 0:
        report.add(f"kingman_mass must be finite and >= 0, got {spec.kingman_mass}")
    prev = 0.0
    for j, (y, w) in enumerate(spec.atoms):
        if not (0.0 < y <= 1.0):
            report.add(f"atom {j}: location {y} outside (0, 1]")
        if not (w > 0.0 and math.isfinite(w)):
            report.add(f"atom {j}: weight {w} not strictly positive and finite")
        if y == prev:
            report.add(f"atom {j}: duplicate location {y}")
        elif y < prev:
            report.add(f"atom {j}: locations not strictly increasing ({y} after {prev})")
        prev = y
    # Finite event rates; automatic for finite positive atoms but asserted so
    # that a corrupted spec (e.g. location 0 slipped in) is caught loudly.
    if report.ok:
        if spec.kind is MeasureKind.REPRODUCTION:
            rate = sum(w / y**2 for y, w in spec.atoms)
        else:
            rate = sum(w / y for y, w in spec.atoms)
        if not math.isfinite(rate):
            report.add("aggregate event rate is not finite")
    return report


def require_valid(spec: MeasureSpec) -> MeasureSpec:
    report = validate(spec)
    if not report.ok:
        raise InvalidMeasureError(report)
    return spec


def induced_mutation_measure(lam: MeasureSpec) -> MeasureSpec:
    """Mutation measure arising when a reproduction measure is conditioned on
    fixation: the zero atom is kept and each atom weight is divided by its
    location."""
    if lam.kind is not MeasureKind.REPRODUCTION:
        raise ValueError("induced_mutation_measure expects a REPRODUCTION measure")
    require_valid(lam)
    return MeasureSpec(
        kingman_mass=lam.kingman_mass,
        atoms=tuple((y, w / y) for y, w in lam.atoms),
        kind=MeasureKind.MUTATION,
    )


def total_event_rates(spec: MeasureSpec) -> tuple[tuple[float, ...], float]:
    """Per-atom Poisson event rates and their sum.

    Reproduction atoms fire at w/y^2, mutation atoms at w/y.
    """
    require_valid(spec)
    if spec.kind is MeasureKind.REPRODUCTION:
        rates = tuple(w / y**2 for y, w in spec.atoms)
    else:
        rates = tuple(w / y for y, w in spec.atoms)
    return rates, sum(rates)


def beta_discretization(
    a: float,
    b: float,
    total_mass: float,
    grid: Sequence[float],
    kind: MeasureKind = MeasureKind.REPRODUCTION,
) -> tuple[MeasureSpec, float]:
    """Discretize a Beta(a, b)-density measure of given total mass onto atoms
    by the midpoint rule on a user-chosen grid over (0, 1].

    Returns the spec together with its aggregate event rate so convergence in
    the number of atoms can be checked externally.  Accuracy is the caller's
    responsibility.
    """
    if len(grid) < 2:
        raise ValueError("grid needs at least two edges")
    edges = [float(g) for g in grid]
    if any(e1 <= e0 for e0, e1 in zip(edges, edges[1:])):
        raise ValueError("grid edges must be strictly increasing")
    if edges[0] < 0.0 or edges[-1] > 1.0:
        raise ValueError("grid must lie within [0, 1]")
    norm = math.gamma(a) * math.gamma(b) / math.gamma(a + b)
    atoms = []
    for lo, hi in zip(edges, edges[1:]):
        mid = 0.5 * (lo + hi)
        density = mid ** (a - 1.0) * (1.0 - mid) ** (b - 1.0) / norm
        weight = total_mass * density * (hi - lo)
        if weight > 0.0:
            atoms.append((mid, weight))
    spec = require_valid(MeasureSpec(0.0, tuple(atoms), kind))
    _, aggregate = total_event_rates(spec)
    return spec, aggregate
