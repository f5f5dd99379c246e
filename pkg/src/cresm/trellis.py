"""Virtual convolutional trellis and the three collision decoders.

State at stage ``m`` is the sign vector ``(v[m-1], ..., v[m-n+1])`` of the
previous ``n - 1`` interleaved inputs, packed into an integer whose bit ``i``
is set when ``v[m-1-i] == -1``.  Inputs outside ``[0, n*L)`` are padding
with value 0; their state bits stay clear, so the path starts and ends in
state 0.

All decoders work on batches (rows of a 2-D array) so Monte-Carlo runs can
decode many packets per numpy call; the single-stream functions wrap them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import CollisionScenario, SubSampleStream, deinterleave, encode_interleaved

__all__ = [
    "VirtualTrellis",
    "DecodeResult",
    "build_trellis",
    "path_metric",
    "viterbi_decode",
    "viterbi_decode_batch",
    "exhaustive_ml_oracle",
    "successive_decode",
    "successive_decode_batch",
    "format_trellis",
    "EXHAUSTIVE_MAX_INPUTS",
]

METRICS = ("whitened", "plain")
EXHAUSTIVE_MAX_INPUTS = 20


def _state_values(state: int, width: int) -> np.ndarray:
    return np.array([-1 if state >> i & 1 else 1 for i in range(width)], dtype=float)


@dataclass(frozen=True)
class VirtualTrellis:
    """Time-varying trellis of the window-sum encoder.

    ``outputs[m, s, u]`` is the noiseless sub-sample produced at stage ``m``
    from state ``s`` with input bit ``u`` (0 for +1, 1 for -1).  At the
    ``n - 1`` tail stages only ``u = 0`` (the zero padding) is allowed and
    ``outputs[m, :, 1]`` is NaN.
    """

    n: int
    packet_len: int
    channels: tuple[complex, ...]
    outputs: np.ndarray
    stage_variances: np.ndarray
    interval_lengths: np.ndarray

    @property
    def num_states(self) -> int:
        return 1 << (self.n - 1)

    @property
    def stage_count(self) -> int:
        return self.outputs.shape[0]

    @property
    def num_inputs(self) -> int:
        return self.n * self.packet_len

    @property
    def initial_state(self) -> int:
        return 0

    @property
    def final_state(self) -> int:
        return 0

    def state_vector(self, state: int) -> tuple[int, ...]:
        """``(v[m-1], ..., v[m-n+1])`` as a tuple of +1/-1."""
        return tuple(int(x) for x in _state_values(state, self.n - 1))

    def next_state(self, state: int, bit: int) -> int:
        return ((state << 1) | bit) & (self.num_states - 1)

    def predecessors(self, state: int) -> tuple[int, int]:
        base = state >> 1
        return base, base | (1 << (self.n - 2))

    def interior_outputs(self, stage: int | None = None) -> np.ndarray:
        """Branch outputs of one fully interior stage, shape ``(states, 2)``."""
        if stage is None:
            stage = self.n - 1
        if not self.n - 1 <= stage < self.num_inputs:
            raise ValueError("not an interior stage")
        return self.outputs[stage]


def build_trellis(scenario: CollisionScenario) -> VirtualTrellis:
    n, length = scenario.n, scenario.packet_len
    h = np.asarray(scenario.channels, dtype=complex)
    num_inputs = n * length
    stages = num_inputs + n - 1
    num_states = 1 << (n - 1)
    states = np.array([_state_values(s, n - 1) for s in range(num_states)]).reshape(num_states, n - 1)

    outputs = np.empty((stages, num_states, 2), dtype=complex)
    for m in range(stages):
        past = m - 1 - np.arange(n - 1)
        live = (past >= 0) & (past < num_inputs)
        memory = states @ (np.where(live, h[past % n], 0.0))
        if m < num_inputs:
            outputs[m, :, 0] = memory + h[m % n]
            outputs[m, :, 1] = memory - h[m % n]
        else:
            outputs[m, :, 0] = memory
            outputs[m, :, 1] = np.nan
    if scenario.is_real:
        outputs = outputs.real.copy()
    outputs.setflags(write=False)
    return VirtualTrellis(n, length, tuple(scenario.channels), outputs,
                          scenario.stage_variances(), scenario.interval_lengths)


def _metric_weights(variances: np.ndarray, lengths: np.ndarray, metric: str) -> np.ndarray:
    """Per-stage weight of the squared distance.

    Whitened weights are 1/sigma^2.  With a noiseless stream (all variances
    zero) they fall back to 2*delta, i.e. the weights for N0 = 1, which
    leaves the argmin unchanged.
    """
    if metric == "plain":
        return np.ones(len(variances))
    if metric != "whitened":
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    variances = np.asarray(variances, dtype=float)
    if np.all(variances > 0):
        return 1.0 / variances
    n = len(lengths)
    return 2.0 * np.asarray(lengths)[np.arange(len(variances)) % n]


def path_metric(y: SubSampleStream, z, metric: str = "whitened") -> float:
    """Weighted squared distance between ``y`` and a noiseless stream ``z``."""
    weights = _metric_weights(y.noise_variances, y.interval_lengths, metric)
    return float(np.sum(weights * np.abs(np.asarray(y.values) - np.asarray(z)) ** 2))


@dataclass(frozen=True)
class DecodeResult:
    interleaved: np.ndarray
    streams: tuple[np.ndarray, ...]
    path_metric: float
    metric: str = "whitened"


def _result(v: np.ndarray, n: int, metric_value: float, metric: str) -> DecodeResult:
    v = v.astype(np.int8)
    return DecodeResult(v, tuple(deinterleave(v, n)), float(metric_value), metric)


def viterbi_decode_batch(values: np.ndarray, trellis: VirtualTrellis, weights: np.ndarray):
    """Viterbi search over a batch of sub-sample rows.

    Returns ``(v_hat, metrics)``: interleaved +1/-1 estimates of shape
    ``(batch, n*L)`` and the accumulated weighted distance of each survivor.
    Equal candidates keep the predecessor whose oldest symbol is +1.
    """
    values = np.atleast_2d(values)
    batch, stages = values.shape
    if stages != trellis.stage_count:
        raise ValueError(f"expected {trellis.stage_count} sub-samples, got {stages}")
    num_states = trellis.num_states
    num_inputs = trellis.num_inputs
    next_states = np.arange(num_states)
    pred0 = next_states >> 1
    pred1 = pred0 | (1 << (trellis.n - 2))
    bit = next_states & 1

    metrics = np.full((batch, num_states), np.inf)
    metrics[:, trellis.initial_state] = 0.0
    choices = np.zeros((stages, batch, num_states), dtype=bool)
    for m in range(stages):
        out = trellis.outputs[m]
        y = values[:, m, None]
        cost0 = weights[m] * np.abs(y - out[pred0, bit]) ** 2
        cost1 = weights[m] * np.abs(y - out[pred1, bit]) ** 2
        cand0 = metrics[:, pred0] + cost0
        cand1 = metrics[:, pred1] + cost1
        if m >= num_inputs:
            cand0[:, bit == 1] = np.inf
            cand1[:, bit == 1] = np.inf
        pick1 = cand1 < cand0
        choices[m] = pick1
        metrics = np.where(pick1, cand1, cand0)

    rows = np.arange(batch)
    state = np.full(batch, trellis.final_state)
    v_hat = np.empty((batch, num_inputs), dtype=np.int8)
    top = 1 << (trellis.n - 2)
    for m in range(stages - 1, -1, -1):
        if m < num_inputs:
            v_hat[:, m] = 1 - 2 * (state & 1)
        state = (state >> 1) | np.where(choices[m, rows, state], top, 0)
    return v_hat, metrics[:, trellis.final_state]


def viterbi_decode(y: SubSampleStream, trellis: VirtualTrellis, metric: str = "whitened") -> DecodeResult:
    """Minimum-distance path through the trellis.

    With the whitened metric this is the exact maximum-likelihood sequence
    under the sub-interval noise model.  The plain metric drops the
    per-stage weights.
    """
    if len(y.values) != trellis.stage_count:
        raise ValueError(f"expected {trellis.stage_count} sub-samples, got {len(y.values)}")
    weights = _metric_weights(y.noise_variances, y.interval_lengths, metric)
    v_hat, metrics = viterbi_decode_batch(np.asarray(y.values)[None, :], trellis, weights)
    return _result(v_hat[0], trellis.n, metrics[0], metric)


def exhaustive_ml_oracle(y: SubSampleStream, trellis: VirtualTrellis, chunk: int = 1 << 14) -> DecodeResult:
    """Whitened-metric argmin over every possible input sequence.

    Candidates are enumerated in lexicographic order with +1 before -1, and
    the first minimiser wins.
    """
    count = trellis.num_inputs
    if count > EXHAUSTIVE_MAX_INPUTS:
        raise ValueError(f"n*L = {count} exceeds the exhaustive-search cap of {EXHAUSTIVE_MAX_INPUTS}")
    if len(y.values) != trellis.stage_count:
        raise ValueError(f"expected {trellis.stage_count} sub-samples, got {len(y.values)}")
    weights = _metric_weights(y.noise_variances, y.interval_lengths, "whitened")
    shifts = np.arange(count - 1, -1, -1)
    best_metric, best_index = np.inf, -1
    for start in range(0, 1 << count, chunk):
        idx = np.arange(start, min(start + chunk, 1 << count))
        v = 1 - 2 * ((idx[:, None] >> shifts) & 1)
        z = encode_interleaved(v, trellis.channels)
        d = np.sum(weights * np.abs(np.asarray(y.values) - z) ** 2, axis=1)
        k = int(np.argmin(d))
        if d[k] < best_metric:
            best_metric, best_index = float(d[k]), int(idx[k])
    v = 1 - 2 * ((best_index >> shifts) & 1)
    return _result(v, trellis.n, best_metric, "whitened")


def _alphabet(scenario: CollisionScenario) -> list[np.ndarray]:
    """Distinct noiseless values each stage can take, for two sources."""
    trellis = build_trellis(scenario)
    table = []
    for m in range(trellis.stage_count):
        out = trellis.outputs[m]
        points = out[:, 0] if m >= trellis.num_inputs else out.ravel()
        if m == 0:
            points = out[0]
        table.append(np.unique(np.round(np.asarray(points, dtype=complex), 12)))
    return table


def successive_decode_batch(values: np.ndarray, scenario: CollisionScenario) -> np.ndarray:
    """Hard-quantise each sub-sample, then run the differencing recursion.

    ``x_A[k] = (z[2k] - z[2k-1]) / h_A + x_A[k-1]`` and
    ``x_B[k] = (z[2k+1] - z[2k]) / h_B + x_B[k-1]``, each result clamped to
    +1/-1 by the sign of its real part.  For unit gains this is the plain
    difference recursion.  Returns interleaved estimates.
    """
    if scenario.n != 2:
        raise ValueError("successive decoding is defined for two-packet collisions only")
    values = np.atleast_2d(values)
    batch, stages = values.shape
    if stages != scenario.stage_count:
        raise ValueError(f"expected {scenario.stage_count} sub-samples, got {stages}")
    h_a, h_b = scenario.channels
    z_hat = np.empty(values.shape, dtype=complex)
    for m, points in enumerate(_alphabet(scenario)):
        nearest = np.argmin(np.abs(values[:, m, None] - points[None, :]), axis=1)
        z_hat[:, m] = points[nearest]

    length = scenario.packet_len
    x_a = np.zeros((batch, length), dtype=np.int8)
    x_b = np.zeros((batch, length), dtype=np.int8)
    prev_a = z_hat[:, 0] / h_a
    x_a[:, 0] = np.where(prev_a.real < 0, -1, 1)
    prev_b = np.zeros(batch)
    for k in range(length):
        if k > 0:
            est = (z_hat[:, 2 * k] - z_hat[:, 2 * k - 1]) / h_a + x_a[:, k - 1]
            x_a[:, k] = np.where(est.real < 0, -1, 1)
        est = (z_hat[:, 2 * k + 1] - z_hat[:, 2 * k]) / h_b + prev_b
        x_b[:, k] = np.where(est.real < 0, -1, 1)
        prev_b = x_b[:, k]
    v = np.empty((batch, 2 * length), dtype=np.int8)
    v[:, 0::2], v[:, 1::2] = x_a, x_b
    return v


def successive_decode(y: SubSampleStream, scenario: CollisionScenario) -> DecodeResult:
    v = successive_decode_batch(np.asarray(y.values)[None, :], scenario)[0]
    z = encode_interleaved(v, scenario.channels)
    return _result(v, 2, path_metric(y, z), "whitened")


def _fmt(value) -> str:
    value = complex(value)
    if value.imag == 0:
        return f"{value.real:+.4g}"
    return f"{value.real:+.4g}{value.imag:+.4g}j"


def format_trellis(trellis: VirtualTrellis, stages: int | None = None) -> str:
    """Text dump of states, transitions and branch outputs."""
    width = trellis.n - 1
    lines = [
        f"n={trellis.n} packet_len={trellis.packet_len} states={trellis.num_states} "
        f"stages={trellis.stage_count}",
        "channels: " + " ".join(_fmt(h) for h in trellis.channels),
        "interval lengths: " + " ".join(f"{d:.6g}" for d in trellis.interval_lengths),
    ]
    shown = range(trellis.stage_count) if stages is None else range(min(stages, trellis.stage_count))
    for m in shown:
        tail = m >= trellis.num_inputs
        lines.append(f"stage {m} (sub-interval {m % trellis.n}, variance {trellis.stage_variances[m]:.6g})"
                     + (" [tail]" if tail else ""))
        padded = [i for i in range(width) if not 0 <= m - 1 - i < trellis.num_inputs]
        for s in range(trellis.num_states):
            if any(s >> i & 1 for i in padded):
                continue
            signs = trellis.state_vector(s)
            state = ",".join("0" if i in padded else f"{signs[i]:+d}" for i in range(width))
            for bit in (0, 1) if not tail else (0,):
                label = "0" if tail else ("+1", "-1")[bit]
                nxt = trellis.next_state(s, bit)
                lines.append(f"  [{state}] --{label}/{_fmt(trellis.outputs[m, s, bit])}--> state {nxt}")
    return "\n".join(lines)
