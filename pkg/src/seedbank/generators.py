"""Numerical evaluation of the finite-population generator and its limit.

The finite-N operator is the exact generator of the particle simulator: the
large-event term enumerates both participation binomials and weights the two
jump directions by the uniform-parent probabilities, which is what makes the
cross-validation against the simulator's empirical drift an identity rather
than an approximation.  The limit operator is the generator of the
jump-diffusion integrated in :mod:`seedbank.diffusion`; reproduction-jump
weights carry the participation probability z1/z3 at intensity w/y^2, and
coordinated-mutation terms carry their event rate w/y.  Applied to smooth
test functions the pair forms a first-order convergence oracle: the gap
shrinks like 1/N (and vanishes identically for linear functions).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import binom

from .params import FrequencyState, SimParams

_FD_STEP = 1e-6


@dataclass
class TestFunction:
    """Bounded test function of (z1, z2, z3, s).

    The evaluator must broadcast over numpy arrays in its first argument.
    Partial derivatives may be supplied; missing ones fall back to central
    finite differences with step 1e-6 (second derivatives supplied
    analytically are strongly preferable for convergence studies).
    """

    name: str
    evaluator: Callable
    d1: Callable | None = None
    d2: Callable | None = None
    d3: Callable | None = None
    d11: Callable | None = None

    def __call__(self, z1, z2, z3, s):
        return self.evaluator(z1, z2, z3, s)

    def partial1(self, z1, z2, z3, s):
        if self.d1 is not None:
            return self.d1(z1, z2, z3, s)
        h = _FD_STEP
        return (self(z1 + h, z2, z3, s) - self(z1 - h, z2, z3, s)) / (2 * h)

    def partial2(self, z1, z2, z3, s):
        if self.d2 is not None:
            return self.d2(z1, z2, z3, s)
        h = _FD_STEP
        return (self(z1, z2 + h, z3, s) - self(z1, z2 - h, z3, s)) / (2 * h)

    def partial3(self, z1, z2, z3, s):
        if self.d3 is not None:
            return self.d3(z1, z2, z3, s)
        h = _FD_STEP
        return (self(z1, z2, z3 + h, s) - self(z1, z2, z3 - h, s)) / (2 * h)

    def partial11(self, z1, z2, z3, s):
        if self.d11 is not None:
            return self.d11(z1, z2, z3, s)
        h = _FD_STEP
        return (self(z1 + h, z2, z3, s) - 2 * self(z1, z2, z3, s)
                + self(z1 - h, z2, z3, s)) / (h * h)


def apply_generator_N(f: TestFunction, z: FrequencyState, n_pop: int,
                      params: SimParams) -> float:
    """Exact finite-N generator applied to f at a lattice state."""
    a, b, k = z.counts(n_pop)
    s = z.s
    n1 = a                # active hearts
    n2 = k - a            # active spades
    d1 = b                # dormant hearts
    d2 = n_pop - k - b    # dormant spades
    z1, z2, z3 = z.z1, z.z2, z.z3
    inv = 1.0 / n_pop
    f0 = float(f(z1, z2, z3, s))
    out = 0.0

    # pairwise reproduction: mixed pairs move z1 one step either way
    pair = params.a0 * n1 * n2 / 2.0
    if pair > 0:
        out += pair * (float(f(z1 + inv, z2, z3, s)) - f0)
        out += pair * (float(f(z1 - inv, z2, z3, s)) - f0)

    # large reproduction: both participation binomials, uniform parent
    for (y, w) in params.reproduction.atoms:
        rate = w / y**2
        k1 = np.arange(n1 + 1)
        k2 = np.arange(n2 + 1)
        p1 = binom.pmf(k1, n1, y)
        p2 = binom.pmf(k2, n2, y)
        up = np.asarray(f(z1 + k2 * inv, z2, z3, s), dtype=float) - f0
        down = np.asarray(f(z1 - k1 * inv, z2, z3, s), dtype=float) - f0
        kk1 = k1[:, None].astype(float)
        kk2 = k2[None, :].astype(float)
        tot = kk1 + kk2
        with np.errstate(invalid="ignore", divide="ignore"):
            w_up = np.where(tot > 0, kk1 / np.where(tot > 0, tot, 1.0), 0.0)
            w_down = np.where(tot > 0, kk2 / np.where(tot > 0, tot, 1.0), 0.0)
        pm = p1[:, None] * p2[None, :]
        out += rate * float((pm * (w_up * up[None, :] + w_down * down[:, None])).sum())

    # mutation, gated by the environment
    if s == 1:
        out += params.b0 * n2 * (float(f(z1 + inv, z2, z3, s)) - f0)
        for (y, w) in params.mutation.atoms:
            rate = w / y
            kk = np.arange(n2 + 1)
            pk = binom.pmf(kk, n2, y)
            vals = np.asarray(f(z1 + kk * inv, z2, z3, s), dtype=float) - f0
            out += rate * float((pk * vals).sum())

    # seed-bank switches
    out += params.alpha * n1 * (float(f(z1 - inv, z2 + inv, z3 - inv, s)) - f0)
    out += params.sigma * d1 * (float(f(z1 + inv, z2 - inv, z3 + inv, s)) - f0)
    out += params.alpha * n2 * (float(f(z1, z2, z3 - inv, s)) - f0)
    out += params.sigma * d2 * (float(f(z1, z2, z3 + inv, s)) - f0)

    # environment flip
    out += params.env_flip_rate(s) * (float(f(z1, z2, z3, 1 - s)) - f0)
    return out


def apply_generator_limit(f: TestFunction, z1: float, z2: float, z3: float,
                          s: int, params: SimParams) -> float:
    """Limit generator applied to f (requires f twice differentiable in z1)."""
    f0 = float(f(z1, z2, z3, s))
    out = 0.0
    out += 0.5 * params.a0 * z1 * (z3 - z1) * float(f.partial11(z1, z2, z3, s))
    if z3 > 0.0:
        for (y, w) in params.reproduction.atoms:
            rate = w / y**2
            up = float(f(z1 + y * (z3 - z1), z2, z3, s)) - f0
            down = float(f(z1 - y * z1, z2, z3, s)) - f0
            out += rate * ((z1 / z3) * up + ((z3 - z1) / z3) * down)
    out += (params.sigma * z2 - params.alpha * z1) * float(f.partial1(z1, z2, z3, s))
    out += (params.alpha * z1 - params.sigma * z2) * float(f.partial2(z1, z2, z3, s))
    out += (params.sigma * (1 - z3) - params.alpha * z3) * float(f.partial3(z1, z2, z3, s))
    if s == 1:
        out += params.b0 * (z3 - z1) * float(f.partial1(z1, z2, z3, s))
        for (y, w) in params.mutation.atoms:
            out += (w / y) * (float(f(z1 + y * (z3 - z1), z2, z3, s)) - f0)
    out += params.env_flip_rate(s) * (float(f(z1, z2, z3, 1 - s)) - f0)
    return out


def polynomial_test_functions() -> list[TestFunction]:
    """The convergence-study set with analytic derivatives."""
    return [
        TestFunction("z1", lambda z1, z2, z3, s: z1,
                     d1=lambda *a: 1.0, d2=lambda *a: 0.0, d3=lambda *a: 0.0,
                     d11=lambda *a: 0.0),
        TestFunction("z1^2", lambda z1, z2, z3, s: z1 * z1,
                     d1=lambda z1, z2, z3, s: 2 * z1, d2=lambda *a: 0.0,
                     d3=lambda *a: 0.0, d11=lambda *a: 2.0),
        TestFunction("z1*z2", lambda z1, z2, z3, s: z1 * z2,
                     d1=lambda z1, z2, z3, s: z2,
                     d2=lambda z1, z2, z3, s: z1,
                     d3=lambda *a: 0.0, d11=lambda *a: 0.0),
        TestFunction("s*z1", lambda z1, z2, z3, s: s * z1,
                     d1=lambda z1, z2, z3, s: float(s), d2=lambda *a: 0.0,
                     d3=lambda *a: 0.0, d11=lambda *a: 0.0),
    ]


def interior_lattice_grid(n_pop: int, n_per_axis: int = 10,
                          z3: float = 0.5) -> list[FrequencyState]:
    """n x n grid of interior lattice states at fixed active fraction.

    Points sit on the N-lattice; choose n_pop divisible by 2*n_per_axis so
    the same real-valued states exist on finer lattices too.
    """
    k = round(z3 * n_pop)
    states = []
    for i in range(1, n_per_axis + 1):
        a = round(i * k / (n_per_axis + 1))
        for j in range(1, n_per_axis + 1):
            b = round(j * (n_pop - k) / (n_per_axis + 1))
            if 0 < a < k and 0 < b < n_pop - k:
                for s in (0, 1):
                    states.append(FrequencyState(a / n_pop, b / n_pop,
                                                 k / n_pop, s))
    return states


def convergence_table(n_values: list[int], params: SimParams,
                      functions: list[TestFunction] | None = None,
                      n_per_axis: int = 10, z3: float = 0.5):
    """Sup-norm gap between the finite and limit generators per (f, N).

    Returns {f.name: {N: sup_error}} over a shared interior grid.  The grid
    is anchored to the smallest N's lattice so every state is representable
    at all requested sizes.
    """
    if functions is None:
        functions = polynomial_test_functions()
    n_min = min(n_values)
    base = interior_lattice_grid(n_min, n_per_axis, z3)
    out: dict[str, dict[int, float]] = {f.name: {} for f in functions}
    for n_pop in n_values:
        if (n_pop * min(s.z1 for s in base)) % 1 > 1e-9:
            raise ValueError(f"grid states are not on the N={n_pop} lattice")
        for f in functions:
            sup = 0.0
            for st in base:
                gn = apply_generator_N(f, st, n_pop, params)
                gl = apply_generator_limit(f, st.z1, st.z2, st.z3, st.s, params)
                sup = max(sup, abs(gn - gl))
            out[f.name][n_pop] = sup
    return out


def convergence_csv(table: dict[str, dict[int, float]]) -> str:
    lines = ["f_name,N,sup_error"]
    for name, by_n in table.items():
        for n_pop, err in sorted(by_n.items()):
            lines.append(f"{name},{n_pop},{err!r}")
    return "\n".join(lines) + "\n"
