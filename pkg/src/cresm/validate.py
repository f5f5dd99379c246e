"""Self-check suites behind ``cresm validate``.

Each suite returns a :class:`SuiteResult`; ``passed`` is False as soon as one
instance disagrees with its oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import (CollisionScenario, add_noise, passband_oracle, random_scenario,
                      virtual_encode)
from .signal import derive_seed, ebn0_to_n0, make_rng
from .trellis import build_trellis, exhaustive_ml_oracle, successive_decode, viterbi_decode


@dataclass
class SuiteResult:
    name: str
    passed: bool
    trials: int
    failures: int
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.trials - self.failures}/{self.trials} ok; {self.detail}"


def zero_noise_roundtrip(trials: int = 500, packet_len: int = 64, seed: int = 1) -> SuiteResult:
    """Noiseless encode then Viterbi decode, random n in {2,3,4} and complex gains."""
    rng = make_rng(seed)
    failures = 0
    for _ in range(trials):
        n = int(rng.integers(2, 5))
        scenario = random_scenario(rng, n, packet_len)
        x = rng.choice(np.array([-1, 1], dtype=np.int8), size=(n, packet_len))
        z = virtual_encode(scenario, x)
        decoded = viterbi_decode(z, build_trellis(scenario))
        ok = np.array_equal(np.array(decoded.streams), x)
        if n == 2:
            ok &= np.array_equal(np.array(successive_decode(z, scenario).streams), x)
        failures += not ok
    return SuiteResult("zero-noise round-trip", failures == 0, trials, failures,
                       f"n in {{2,3,4}}, L={packet_len}")


def ml_equivalence(trials: int = 1000, packet_len: int = 6, snrs=(0.0, 4.0, 8.0), seed: int = 2) -> SuiteResult:
    """Whitened Viterbi against exhaustive ML search on noisy two-packet collisions."""
    rng = make_rng(seed)
    failures = 0
    for i in range(trials):
        n0 = ebn0_to_n0(snrs[i % len(snrs)])
        scenario = random_scenario(rng, 2, packet_len, n0, complex_channels=bool(i % 2))
        x = rng.choice(np.array([-1, 1], dtype=np.int8), size=(2, packet_len))
        y = add_noise(virtual_encode(scenario, x), scenario, derive_seed(seed, i))
        trellis = build_trellis(scenario)
        fast = viterbi_decode(y, trellis)
        slow = exhaustive_ml_oracle(y, trellis)
        failures += not np.array_equal(fast.interleaved, slow.interleaved)
    return SuiteResult("Viterbi = exhaustive ML", failures == 0, trials, failures,
                       f"n=2, L={packet_len}, Eb/N0 in {list(snrs)} dB")


def mixing_residual(scenario: CollisionScenario, z: np.ndarray, carrier_cycles: int) -> np.ndarray:
    """Closed-form double-frequency term left by mix-and-integrate.

    Over a sub-interval ``[a, b]`` carrying baseband value ``s`` the mixer
    output averages to ``s + conj(s) * mean(exp(-2j w t))``.
    """
    omega = 2.0 * math.pi * carrier_cycles
    starts = np.array([0.0, *scenario.offsets])
    edges = np.concatenate([k + starts for k in range(scenario.packet_len + 1)])[: scenario.stage_count + 1]
    a, b = edges[:-1], edges[1:]
    mean_phasor = (np.exp(-2j * omega * b) - np.exp(-2j * omega * a)) / (-2j * omega * (b - a))
    return np.conj(z) * mean_phasor


def _carrier_aligned(rng, n: int, packet_len: int, carrier_cycles: int) -> CollisionScenario:
    """Random scenario whose sub-interval lengths are whole half carrier periods."""
    grid = 2 * carrier_cycles
    cuts = np.sort(rng.choice(np.arange(1, grid), size=n - 1, replace=False)) / grid
    base = random_scenario(rng, n, packet_len)
    return CollisionScenario(tuple(cuts), base.channels, 0.0, packet_len)


def passband_agreement(trials: int = 100, packet_len: int = 4, carrier_cycles: int = 100,
                       grid_points: int = 10_000, tolerance: float = 1e-3, seed: int = 3,
                       offsets: str = "uniform") -> SuiteResult:
    """Passband integration oracle against the analytic window-sum encoder.

    ``offsets="uniform"`` draws arbitrary valid offsets and compares the raw
    oracle with :func:`virtual_encode`.  ``"aligned"`` restricts offsets to
    multiples of half a carrier period, where the mixing product integrates
    to zero.  ``"residual"`` uses uniform offsets and first adds the
    closed-form mixing product to the analytic stream.
    """
    rng = make_rng(seed)
    worst = 0.0
    failures = 0
    for _ in range(trials):
        n = int(rng.integers(2, 4))
        if offsets == "aligned":
            scenario = _carrier_aligned(rng, n, packet_len, carrier_cycles)
        else:
            scenario = random_scenario(rng, n, packet_len)
        x = rng.choice(np.array([-1.0, 1.0]), size=(n, packet_len))
        analytic = np.asarray(virtual_encode(scenario, x).values, dtype=complex)
        if offsets == "residual":
            analytic = analytic + mixing_residual(scenario, analytic, carrier_cycles)
        oracle = passband_oracle(scenario, x, carrier_cycles, grid_points).values
        dev = float(np.max(np.abs(oracle - (analytic.real if scenario.is_real else analytic))))
        worst = max(worst, dev)
        failures += dev >= tolerance
    return SuiteResult(f"passband oracle ({offsets} offsets)", failures == 0, trials, failures,
                       f"K={carrier_cycles}, G={grid_points}, max deviation {worst:.3g} (tol {tolerance:g})")


def run_all(quick: bool = False) -> list[SuiteResult]:
    """Suites run by the CLI.

    Uniformly random offsets are checked against the analytic stream plus
    its mixing residual; carrier-aligned offsets against the bare stream.
    """
    scale = 10 if quick else 1
    return [
        zero_noise_roundtrip(500 // scale),
        ml_equivalence(1000 // scale),
        passband_agreement(100 // scale, offsets="aligned"),
        passband_agreement(100 // scale, offsets="residual"),
    ]
