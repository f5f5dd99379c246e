"""Comparison receivers: single-user BPSK and interference-as-noise SIC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import CollisionScenario, SubSampleStream
from .signal import bpsk_demodulate_hard, bpsk_modulate, ebn0_to_n0, make_rng

__all__ = ["SicConfig", "single_user_trial", "single_user_errors", "sic_decode", "sic_decode_batch"]


@dataclass(frozen=True)
class SicConfig:
    """Detection order of the sources; the default detects the earlier arrival first."""

    decode_order: tuple[int, ...] = (0, 1)

    def __post_init__(self):
        object.__setattr__(self, "decode_order", tuple(int(i) for i in self.decode_order))
        if sorted(self.decode_order) != list(range(len(self.decode_order))):
            raise ValueError(f"decode_order {self.decode_order} is not a permutation of source indices")


def single_user_errors(rng: np.random.Generator, noise_density: float, shape) -> tuple[int, int]:
    """Bits and bit errors for BPSK packets of ``shape`` in AWGN of variance N0/2."""
    bits = rng.integers(0, 2, size=shape, dtype=np.uint8)
    y = bpsk_modulate(bits).astype(float)
    if noise_density > 0:
        y = y + rng.standard_normal(shape) * np.sqrt(noise_density / 2.0)
    errors = int(np.count_nonzero(bpsk_demodulate_hard(y) != bits))
    return bits.size, errors


def single_user_trial(ebn0_db: float, packet_len: int, seed: int) -> tuple[int, int]:
    """One BPSK packet with a full-symbol matched filter.

    ``ebn0_db = inf`` gives a noiseless channel.  Returns ``(bits, errors)``.
    """
    if packet_len < 1:
        raise ValueError("packet_len must be >= 1")
    n0 = 0.0 if np.isposinf(ebn0_db) else ebn0_to_n0(ebn0_db)
    return single_user_errors(make_rng(seed), n0, (packet_len,))


def _source_taps(scenario: CollisionScenario, source: int, k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sub-sample indices and matched-filter weights for symbol ``k`` of ``source``."""
    n = scenario.n
    lengths = scenario.interval_lengths
    idx = n * k[:, None] + source + np.arange(n)[None, :]
    return idx, lengths[idx % n]


def sic_decode_batch(values: np.ndarray, scenario: CollisionScenario, config: SicConfig = SicConfig()) -> np.ndarray:
    """SIC on a batch of sub-sample rows; returns ``(batch, n, L)`` symbols.

    Each source in turn is detected by integrating over its own full symbol
    period (sub-samples weighted by their lengths), treating everything not
    yet cancelled as noise.  Its hard decisions are then subtracted from
    every sub-sample they touch.
    """
    if scenario.n != 2:
        raise ValueError("SIC is defined here for two-packet collisions only")
    if sorted(config.decode_order) != list(range(scenario.n)):
        raise ValueError("decode_order does not match the number of sources")
    residual = np.array(np.atleast_2d(values), dtype=complex)
    batch, stages = residual.shape
    if stages != scenario.stage_count:
        raise ValueError(f"expected {scenario.stage_count} sub-samples, got {stages}")
    k = np.arange(scenario.packet_len)
    decided = np.zeros((batch, scenario.n, scenario.packet_len), dtype=np.int8)
    for source in config.decode_order:
        h = scenario.channels[source]
        idx, weights = _source_taps(scenario, source, k)
        matched = np.sum(residual[:, idx] * weights, axis=-1)
        # the projection onto h is exactly zero when interference cancels the signal
        projected = (np.conj(h) * matched).real
        symbols = np.where(projected < 0, -1, 1).astype(np.int8)
        decided[:, source] = symbols
        for s in range(scenario.n):
            residual[:, idx[:, s]] -= h * symbols
    return decided


def sic_decode(y: SubSampleStream, scenario: CollisionScenario, config: SicConfig = SicConfig()) -> list[np.ndarray]:
    decided = sic_decode_batch(np.asarray(y.values)[None, :], scenario, config)[0]
    return [decided[j] for j in range(scenario.n)]
