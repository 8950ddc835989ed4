"""Counter-based random number streams for reproducible parallel Monte Carlo.

Every replicate owns a Philox-4x64-10 stream keyed by
``(master_seed, replicate_index)`` with the stream role placed in the top
counter word.  Streams are therefore independent of scheduling and worker
count: replicate 17 draws the same numbers whether it runs first, last, or
on another process.

Two interchangeable frontends share the same bit stream:

* :func:`stream` returns a ``numpy.random.Generator`` for ordinary Python
  code.
* :func:`philox_state` returns a raw ``uint64`` state vector consumed by the
  numba kernels in :mod:`seedbank.freqchain` and :mod:`seedbank.diffusion`
  via the ``philox_*`` functions below (bit-exact with numpy's Philox).
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

# Philox-4x64 round constants (Salmon et al. 2011), as used by numpy.
_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)

# state vector layout: counter[0:4], key[4:6], buffer[6:10], buffer_pos[10]
STATE_SIZE = 11


def stream(master_seed: int, replicate: int, role: int = 0) -> np.random.Generator:
    """numpy Generator on the (master_seed, replicate, role) Philox stream."""
    bitgen = np.random.Philox(
        key=np.array([master_seed, replicate], dtype=np.uint64),
        counter=np.array([0, 0, 0, role], dtype=np.uint64),
    )
    return np.random.Generator(bitgen)


@njit(cache=True)
def philox_make_state(master_seed, replicate, role):
    """Raw state vector for the numba-side Philox functions (jitted)."""
    st = np.zeros(STATE_SIZE, dtype=np.uint64)
    st[3] = role
    st[4] = master_seed
    st[5] = replicate
    st[10] = 4  # buffer empty, force a refill on first draw
    return st


def philox_state(master_seed: int, replicate: int, role: int = 0) -> np.ndarray:
    """Raw state vector for the numba-side Philox functions."""
    return philox_make_state(np.uint64(master_seed), np.uint64(replicate),
                             np.uint64(role))


@njit(cache=True, inline="always")
def _mulhilo(a, b):
    """Full 128-bit product of two uint64, as (hi, lo)."""
    a = np.uint64(a)
    b = np.uint64(b)
    mask = np.uint64(0xFFFFFFFF)
    ahi = a >> np.uint64(32)
    alo = a & mask
    bhi = b >> np.uint64(32)
    blo = b & mask
    ll = alo * blo
    lh = alo * bhi
    hl = ahi * blo
    hh = ahi * bhi
    mid = (ll >> np.uint64(32)) + (lh & mask) + (hl & mask)
    lo = a * b
    hi = hh + (lh >> np.uint64(32)) + (hl >> np.uint64(32)) + (mid >> np.uint64(32))
    return hi, lo


@njit(cache=True)
def _philox_refill(st):
    # numpy advances the counter first, then runs the rounds
    st[0] += np.uint64(1)
    if st[0] == np.uint64(0):
        st[1] += np.uint64(1)
        if st[1] == np.uint64(0):
            st[2] += np.uint64(1)
            if st[2] == np.uint64(0):
                st[3] += np.uint64(1)
    c0, c1, c2, c3 = st[0], st[1], st[2], st[3]
    k0, k1 = st[4], st[5]
    for _ in range(10):
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 += _W0
        k1 += _W1
    st[6], st[7], st[8], st[9] = c0, c1, c2, c3
    st[10] = 0


@njit(cache=True)
def philox_next_uint64(st):
    pos = np.int64(st[10])
    if pos >= 4:
        _philox_refill(st)
        pos = 0
    out = st[6 + pos]
    st[10] = np.uint64(pos + 1)
    return out


@njit(cache=True)
def philox_next_double(st):
    """Uniform double in [0, 1) from the top 53 bits, numpy's convention."""
    return (philox_next_uint64(st) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def philox_next_exponential(st):
    u = philox_next_double(st)
    return -math.log1p(-u)


@njit(cache=True)
def philox_next_normal_pair(st):
    """Box-Muller pair from two uniforms."""
    u1 = philox_next_double(st)
    u2 = philox_next_double(st)
    r = math.sqrt(-2.0 * math.log1p(-u1))
    theta = 2.0 * math.pi * u2
    return r * math.cos(theta), r * math.sin(theta)


@njit(cache=True)
def philox_next_binomial(st, n, p):
    """Binomial(n, p) by summing Bernoulli draws.

    O(n), fine here: binomial draws happen only at the rare large-event and
    coordinated-mutation clocks, never in the per-event hot path.
    """
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    k = 0
    for _ in range(n):
        if philox_next_double(st) < p:
            k += 1
    return k


@njit(cache=True)
def philox_randint(st, n):
    """Uniform integer in [0, n), rejection-sampled to avoid modulo bias."""
    nn = np.uint64(n)
    t = (np.uint64(0) - nn) % nn  # 2^64 mod n
    while True:
        x = philox_next_uint64(st)
        if x >= t:
            return np.int64(x % nn)
