"""Bits, BPSK symbols, seeded random sources and the single-user baseline.

Bit and symbol streams are plain 1-D numpy arrays: bits are ``uint8`` in
{0, 1}, symbols are ``int8`` in {+1, -1}.  Random draws come from numpy's
``PCG64`` bit generator seeded through :class:`numpy.random.SeedSequence`,
so a 64-bit integer seed fully identifies a run.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc

__all__ = [
    "make_rng",
    "derive_seed",
    "random_bits",
    "bpsk_modulate",
    "bpsk_demodulate_hard",
    "q_function",
    "ebn0_to_n0",
    "analytic_bpsk_ber",
]

SEED_MAX = 2**64 - 1


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def make_rng(seed: int) -> np.random.Generator:
    """Return a PCG64 generator for ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(_check_seed(seed))))


def derive_seed(master: int, index: int) -> int:
    """Child seed for work item ``index`` of a run seeded with ``master``.

    Pure function of its arguments, so a sweep gives the same per-point seeds
    regardless of execution order or worker count.
    """
    ss = np.random.SeedSequence(_check_seed(master), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def random_bits(length: int, seed: int) -> np.ndarray:
    if length < 0:
        raise ValueError("length must be non-negative")
    return make_rng(seed).integers(0, 2, size=length, dtype=np.uint8)


def bpsk_modulate(bits) -> np.ndarray:
    """Map bit 0 to +1 and bit 1 to -1."""
    bits = np.asarray(bits)
    if bits.size and not np.all((bits == 0) | (bits == 1)):
        raise ValueError("bits must be 0 or 1")
    return (1 - 2 * bits.astype(np.int8)).astype(np.int8)


def bpsk_demodulate_hard(estimates) -> np.ndarray:
    """Sign decision; an estimate of exactly zero decides bit 0."""
    return (np.real(np.asarray(estimates)) < 0).astype(np.uint8)


def q_function(x):
    """Gaussian tail probability P(N(0,1) > x)."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def ebn0_to_n0(ebn0_db: float) -> float:
    """Noise density for unit symbol energy at the given Eb/N0 in dB."""
    return 10.0 ** (-ebn0_db / 10.0)


def analytic_bpsk_ber(ebn0_db):
    """Coherent BPSK bit error rate Q(sqrt(2 Eb/N0)); -inf dB gives 0.5."""
    gamma = 10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0)
    ber = q_function(np.sqrt(2.0 * gamma))
    return float(ber) if np.ndim(ber) == 0 else ber
