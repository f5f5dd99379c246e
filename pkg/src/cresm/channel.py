"""Oversampled observation of an n-packet, symbol-misaligned collision.

Time is normalised to the symbol duration of the first arrival (source 0).
Source ``j`` starts ``offsets[j-1]`` later, so each symbol period is cut
into ``n`` sub-intervals whose lengths are the gaps between consecutive
arrival offsets.  The receiver integrates over every sub-interval and
normalises by its length; the k-th sub-interval of symbol ``k`` becomes
sub-sample ``n*k + s``.

Writing the sources' symbols as one interleaved stream
``v[n*k + j] = x_j[k]``, the noiseless sub-sample is a sliding window sum::

    z[m] = sum_{i=0}^{n-1} h[(m - i) % n] * v[m - i]

with ``v`` zero outside ``[0, n*L)``.  The stream therefore has
``n*L + n - 1`` entries: ``n - 1`` trailing partial samples where only the
later arrivals are still on the air.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .signal import make_rng

__all__ = [
    "OFFSET_EPS",
    "CollisionScenario",
    "SubSampleStream",
    "interleave",
    "deinterleave",
    "encode_interleaved",
    "virtual_encode",
    "add_noise",
    "noise_array",
    "passband_oracle",
    "random_scenario",
]

OFFSET_EPS = 1e-3
MAX_SOURCES = 4


@dataclass(frozen=True)
class CollisionScenario:
    """Geometry and channel of one collision.

    ``offsets`` are the arrival times of sources 1..n-1 relative to source 0,
    in symbol durations.  ``channels`` hold one complex gain per source, with
    any carrier-phase difference folded in.
    """

    offsets: tuple[float, ...]
    channels: tuple[complex, ...]
    noise_density: float = 0.0
    packet_len: int = 1

    def __post_init__(self):
        offsets = tuple(float(o) for o in np.atleast_1d(self.offsets))
        channels = tuple(complex(h) for h in np.atleast_1d(self.channels))
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "channels", channels)
        n = len(channels)
        if not 2 <= n <= MAX_SOURCES:
            raise ValueError(f"need 2..{MAX_SOURCES} sources, got {n}")
        if len(offsets) != n - 1:
            raise ValueError(f"{n} sources need {n - 1} offsets, got {len(offsets)}")
        edges = (0.0, *offsets, 1.0)
        for lo, hi in zip(edges, edges[1:]):
            if hi - lo < OFFSET_EPS:
                raise ValueError(
                    f"offsets {offsets} must increase within ({OFFSET_EPS}, {1 - OFFSET_EPS}) "
                    f"with gaps of at least {OFFSET_EPS}"
                )
        if any(abs(h) == 0 for h in channels):
            raise ValueError("channel coefficients must be non-zero")
        if not (self.noise_density >= 0 and math.isfinite(self.noise_density)):
            raise ValueError("noise_density must be finite and non-negative")
        if int(self.packet_len) != self.packet_len or self.packet_len < 1:
            raise ValueError("packet_len must be a positive integer")
        object.__setattr__(self, "packet_len", int(self.packet_len))

    @classmethod
    def two_packet(cls, delta: float, amplitude_ratio: float = 1.0, phase_deg: float = 0.0,
                   noise_density: float = 0.0, packet_len: int = 1) -> "CollisionScenario":
        """Two sources with ``h_A = 1`` and ``h_B = H * exp(j*theta)``."""
        h_b = amplitude_ratio * np.exp(1j * np.deg2rad(phase_deg))
        if phase_deg % 180 == 0:
            h_b = complex(round(h_b.real, 15), 0.0)
        return cls((delta,), (1.0, h_b), noise_density, packet_len)

    @property
    def n(self) -> int:
        return len(self.channels)

    @property
    def interval_lengths(self) -> np.ndarray:
        return np.diff(np.array([0.0, *self.offsets, 1.0]))

    @property
    def is_real(self) -> bool:
        """True for the carrier-synchronous case: every gain real and positive."""
        return all(h.imag == 0 and h.real > 0 for h in self.channels)

    @property
    def stage_count(self) -> int:
        return self.n * self.packet_len + self.n - 1

    def stage_variances(self) -> np.ndarray:
        """Noise variance N0 / (2 delta) of every sub-sample, per real dimension."""
        lengths = self.interval_lengths
        return self.noise_density / (2.0 * lengths[np.arange(self.stage_count) % self.n])

    def with_noise(self, noise_density: float) -> "CollisionScenario":
        return CollisionScenario(self.offsets, self.channels, noise_density, self.packet_len)


@dataclass(frozen=True)
class SubSampleStream:
    """Receiver output: one value per sub-interval plus its noise level.

    ``noise_variances`` is the per-real-dimension variance of each entry.
    When the values are complex, the real and imaginary noise components are
    independent with that variance each.
    """

    values: np.ndarray
    interval_lengths: np.ndarray
    noise_variances: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.interval_lengths)

    def __len__(self) -> int:
        return len(self.values)


def interleave(streams: Sequence[Sequence[int]]) -> np.ndarray:
    """Multiplex ``n`` equal-length symbol streams: ``v[n*k + j] = streams[j][k]``."""
    if len(streams) < 2:
        raise ValueError("interleave needs at least two streams")
    lengths = {len(s) for s in streams}
    if len(lengths) != 1:
        raise ValueError(f"streams must have equal length, got lengths {sorted(lengths)}")
    arr = np.asarray([np.asarray(s) for s in streams])
    return arr.T.reshape(-1)


def deinterleave(v, n: int) -> list[np.ndarray]:
    """Inverse of :func:`interleave`."""
    v = np.asarray(v)
    if n < 1 or len(v) % n:
        raise ValueError(f"length {len(v)} is not divisible by n={n}")
    return [v[j::n].copy() for j in range(n)]


def encode_interleaved(v: np.ndarray, channels) -> np.ndarray:
    """Window-sum encoder on interleaved inputs of shape ``(..., n*L)``.

    Returns the noiseless sub-samples, shape ``(..., n*L + n - 1)``.
    """
    h = np.asarray(channels, dtype=complex)
    n = len(h)
    v = np.asarray(v)
    length = v.shape[-1]
    gains = h[np.arange(length) % n]
    if np.all(h.imag == 0):
        gains = gains.real
    weighted = v * gains
    z = np.zeros(v.shape[:-1] + (length + n - 1,), dtype=weighted.dtype)
    for i in range(n):
        z[..., i:i + length] += weighted
    return z


def virtual_encode(scenario: CollisionScenario, streams) -> SubSampleStream:
    """Noiseless sub-sample stream for the given source symbols."""
    if len(streams) != scenario.n:
        raise ValueError(f"expected {scenario.n} streams, got {len(streams)}")
    if any(len(s) != scenario.packet_len for s in streams):
        raise ValueError(f"every stream must have packet_len={scenario.packet_len} symbols")
    z = encode_interleaved(interleave(streams), scenario.channels)
    if scenario.is_real:
        z = z.real.astype(float)
    return SubSampleStream(z, scenario.interval_lengths, scenario.stage_variances())


def noise_array(rng: np.random.Generator, variances: np.ndarray, shape, complex_noise: bool) -> np.ndarray:
    """Zero-mean Gaussian noise with per-column variance ``variances``.

    Complex noise draws the real and imaginary parts independently, each
    with the given variance (the in-phase and quadrature integrator outputs).
    """
    std = np.sqrt(variances)
    if complex_noise:
        return rng.standard_normal(shape) * std + 1j * (rng.standard_normal(shape) * std)
    return rng.standard_normal(shape) * std


def add_noise(z: SubSampleStream, scenario: CollisionScenario, seed: int) -> SubSampleStream:
    """Add sub-interval noise of variance N0 / (2 delta) to a noiseless stream."""
    variances = scenario.stage_variances()
    if len(variances) != len(z.values):
        raise ValueError("stream length does not match scenario")
    if scenario.noise_density == 0:
        return SubSampleStream(z.values.copy(), z.interval_lengths, variances)
    rng = make_rng(seed)
    complex_noise = not scenario.is_real or np.iscomplexobj(z.values)
    y = z.values + noise_array(rng, variances, variances.shape, complex_noise)
    return SubSampleStream(y, z.interval_lengths, variances)


# 3-point Gauss-Legendre panel on [0, 1]
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(3)
_GL_NODES = (_GL_NODES + 1.0) / 2.0
_GL_WEIGHTS = _GL_WEIGHTS / 2.0


def passband_oracle(scenario: CollisionScenario, streams, carrier_cycles: int = 100,
                    grid_points_per_symbol: int = 10_000) -> SubSampleStream:
    """Brute-force sub-samples from the continuous-time passband signal.

    Synthesises ``sum_j Re{h_j exp(j w t)} x_j[floor(t - offset_j)]`` with
    ``w = 2 pi K``, mixes it down with ``2 exp(-j w t)`` (2cos on the
    in-phase arm, -2sin on the quadrature arm), integrates each sub-interval
    numerically on a fine grid and divides by the sub-interval length.
    The double-frequency mixing product is left in, so agreement with
    :func:`virtual_encode` is limited by about ``|z| / (w * delta)``.
    """
    if int(carrier_cycles) != carrier_cycles or carrier_cycles < 50:
        raise ValueError("carrier_cycles must be an integer >= 50")
    if grid_points_per_symbol < 10_000:
        raise ValueError("grid_points_per_symbol must be >= 10000")
    n, length = scenario.n, scenario.packet_len
    symbols = np.asarray(streams, dtype=float)
    if symbols.shape != (n, length):
        raise ValueError(f"expected {n} streams of {length} symbols")
    omega = 2.0 * math.pi * carrier_cycles
    starts = np.array([0.0, *scenario.offsets])
    h = np.array(scenario.channels)

    edges = np.concatenate([k + starts for k in range(length + 1)])[: scenario.stage_count + 1]
    out = np.empty(scenario.stage_count, dtype=complex)
    for m, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        panels = max(1, math.ceil(grid_points_per_symbol * (b - a) / len(_GL_NODES)))
        width = (b - a) / panels
        t = (a + width * (np.arange(panels)[:, None] + _GL_NODES[None, :])).ravel()
        w = np.tile(_GL_WEIGHTS * width, panels)
        received = np.zeros_like(t)
        for j in range(n):
            k = np.floor(t - starts[j]).astype(int)
            on_air = (k >= 0) & (k < length)
            amp = np.where(on_air, symbols[j, np.clip(k, 0, length - 1)], 0.0)
            received += amp * np.real(h[j] * np.exp(1j * omega * t))
        out[m] = np.sum(w * received * 2.0 * np.exp(-1j * omega * t)) / (b - a)
    values = out.real.copy() if scenario.is_real else out
    return SubSampleStream(values, scenario.interval_lengths, scenario.stage_variances())


def random_scenario(rng: np.random.Generator, n: int, packet_len: int, noise_density: float = 0.0,
                    complex_channels: bool = True) -> CollisionScenario:
    """Uniformly random valid offsets and random channel gains (|h| in [0.5, 1.5])."""
    while True:
        offsets = np.sort(rng.uniform(OFFSET_EPS, 1 - OFFSET_EPS, size=n - 1))
        gaps = np.diff(np.concatenate([[0.0], offsets, [1.0]]))
        if np.all(gaps >= OFFSET_EPS):
            break
    mags = rng.uniform(0.5, 1.5, size=n)
    if complex_channels:
        channels = mags * np.exp(1j * rng.uniform(0, 2 * math.pi, size=n))
    else:
        channels = mags
    return CollisionScenario(tuple(offsets), tuple(channels), noise_density, packet_len)
