"""Monte-Carlo BER measurement, parameter sweeps and CSV output."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .baselines import SicConfig, sic_decode_batch, single_user_errors
from .channel import CollisionScenario, encode_interleaved, noise_array
from .signal import derive_seed, ebn0_to_n0, make_rng
from .trellis import _metric_weights, build_trellis, successive_decode_batch, viterbi_decode_batch

__all__ = [
    "SCHEMES",
    "CSV_COLUMNS",
    "ConfigError",
    "MonteCarloConfig",
    "BerPoint",
    "BerCurve",
    "SweepConfig",
    "run_ber_point",
    "parse_config",
    "load_config",
    "sweep_points",
    "sweep",
    "curves_from_points",
    "write_csv",
    "read_csv",
    "db_penalty",
]

SCHEMES = ("cresm-viterbi", "cresm-successive", "g-cresm", "sic", "bpsk")
CSV_COLUMNS = ("scheme", "n", "delta", "phase_deg", "ebn0_db", "packet_len",
               "bits", "errors", "ber", "ci95", "seed")
# bits decoded per numpy batch; fixed so results do not depend on the machine
BATCH_BITS = 1 << 16


class ConfigError(ValueError):
    """Malformed sweep configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class MonteCarloConfig:
    min_errors: int = 100
    max_bits: int = 10_000_000
    seed: int = 0

    def __post_init__(self):
        if self.min_errors < 1:
            raise ValueError("min_errors must be >= 1")
        if self.max_bits < 1:
            raise ValueError("max_bits must be >= 1")


@dataclass(frozen=True)
class BerPoint:
    scheme: str
    n: int
    delta: tuple[float, ...]
    phase_deg: float
    ebn0_db: float
    packet_len: int
    bits: int
    errors: int
    ber: float
    ci95: float
    seed: int

    def __post_init__(self):
        if not 0 <= self.errors <= self.bits:
            raise ValueError("errors must lie in [0, bits]")

    @property
    def sigma(self) -> float:
        """Binomial standard error of ``ber``."""
        return _binomial_sigma(self.ber, self.bits)


@dataclass(frozen=True)
class BerCurve:
    points: tuple[BerPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        snr = self.ebn0_db
        if np.any(np.diff(snr) <= 0):
            raise ValueError("BerCurve needs a strictly increasing SNR axis")

    @property
    def ebn0_db(self) -> np.ndarray:
        return np.array([p.ebn0_db for p in self.points], dtype=float)

    @property
    def ber(self) -> np.ndarray:
        return np.array([p.ber for p in self.points], dtype=float)

    def __len__(self) -> int:
        return len(self.points)


def _binomial_sigma(p: float, bits: int) -> float:
    return math.sqrt(p * (1.0 - p) / bits) if bits else 0.0


def _check_pairing(scheme: str, scenario: CollisionScenario | None):
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if scheme == "bpsk":
        return
    if scenario is None:
        raise ValueError(f"scheme {scheme} needs a collision scenario")
    if scheme in ("sic", "cresm-successive") and scenario.n != 2:
        raise ValueError(f"scheme {scheme} is defined for n=2 only, got n={scenario.n}")
    if scheme.startswith("cresm") and not scenario.is_real:
        raise ValueError(f"scheme {scheme} assumes carrier-synchronous (real positive) channels; use g-cresm")


def run_ber_point(scheme: str, scenario: CollisionScenario | None, ebn0_db: float,
                  mc: MonteCarloConfig = MonteCarloConfig(), metric: str = "whitened",
                  sic: SicConfig = SicConfig(), packet_len: int | None = None) -> BerPoint:
    """Measure one BER point.

    Packets are generated, encoded, corrupted and decoded in fixed-size
    batches until ``mc.min_errors`` bit errors have accumulated or
    ``mc.max_bits`` bits have been spent.  Errors are counted over every
    source's bits.  ``scenario`` may be ``None`` for ``bpsk``, in which case
    ``packet_len`` sets the packet size.
    """
    _check_pairing(scheme, scenario)
    length = scenario.packet_len if scenario is not None else packet_len
    if length is None or length < 1:
        raise ValueError("packet_len must be >= 1")
    if mc.max_bits < length:
        raise ValueError("max_bits must be at least one packet")
    n0 = ebn0_to_n0(ebn0_db)
    rng = make_rng(mc.seed)

    if scheme == "bpsk":
        bits_per_packet = length
        decode = None
    else:
        scenario = scenario.with_noise(n0)
        bits_per_packet = scenario.n * length
        variances = scenario.stage_variances()
        complex_noise = not scenario.is_real
        if scheme in ("cresm-viterbi", "g-cresm"):
            trellis = build_trellis(scenario)
            weights = _metric_weights(variances, scenario.interval_lengths, metric)

            def decode(y):
                return viterbi_decode_batch(y, trellis, weights)[0]
        elif scheme == "cresm-successive":
            def decode(y):
                return successive_decode_batch(y, scenario)
        else:
            def decode(y):
                decided = sic_decode_batch(y, scenario, sic)
                return decided.transpose(0, 2, 1).reshape(len(y), -1)

    per_batch = max(1, BATCH_BITS // bits_per_packet)
    bits = errors = 0
    while errors < mc.min_errors and bits + bits_per_packet <= mc.max_bits:
        packets = min(per_batch, (mc.max_bits - bits) // bits_per_packet)
        if decode is None:
            b, e = single_user_errors(rng, n0, (packets, length))
        else:
            v = 1 - 2 * rng.integers(0, 2, size=(packets, bits_per_packet), dtype=np.int8)
            z = encode_interleaved(v, scenario.channels)
            y = z + noise_array(rng, variances, z.shape, complex_noise)
            b, e = v.size, int(np.count_nonzero(decode(y) != v))
        bits += b
        errors += e

    ber = errors / bits
    return BerPoint(
        scheme=scheme,
        n=1 if scheme == "bpsk" else scenario.n,
        delta=() if scheme == "bpsk" else scenario.offsets,
        phase_deg=0.0 if scheme == "bpsk" else _phase_deg(scenario),
        ebn0_db=float(ebn0_db),
        packet_len=length,
        bits=bits,
        errors=errors,
        ber=ber,
        ci95=1.96 * _binomial_sigma(ber, bits),
        seed=mc.seed,
    )


def _phase_deg(scenario: CollisionScenario) -> float:
    h = scenario.channels
    return float(np.round(np.degrees(np.angle(h[-1] / h[0])), 9)) + 0.0


# --- configuration --------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    schemes: tuple[str, ...]
    delta: tuple[tuple[float, ...], ...] = ((0.5,),)
    phase_deg: tuple[float, ...] = (0.0,)
    snr_db: tuple[float, ...] = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0)
    packet_len: int = 100
    amplitude_ratio: float = 1.0
    min_errors: int = 100
    max_bits: int = 10_000_000
    seed: int = 0
    metric: str = "whitened"
    workers: int = 1
    output: str | None = None


_LIST_KEYS = {"schemes", "delta", "phase_deg", "snr_db"}
CONFIG_KEYS = tuple(f.name for f in fields(SweepConfig))


def _parse_float_list(text: str) -> tuple[float, ...]:
    items = [t.strip() for t in text.replace(";", ",").split(",") if t.strip()]
    out: list[float] = []
    for item in items:
        if ":" in item:
            parts = [float(p) for p in item.split(":")]
            if len(parts) != 3 or parts[2] <= 0:
                raise ValueError(f"range {item!r} must be start:stop:step with step > 0")
            start, stop, step = parts
            count = int(math.ceil((stop - start) / step - 1e-9))
            out.extend(round(start + i * step, 10) for i in range(max(count, 0)))
        else:
            out.append(float(item))
    return tuple(out)


def _parse_value(key: str, text: str):
    text = text.strip()
    if key == "schemes":
        schemes = tuple(s.strip() for s in text.split(",") if s.strip())
        for s in schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}; expected one of {', '.join(SCHEMES)}")
        return schemes
    if key == "delta":
        groups = [g.strip() for g in text.split(",") if g.strip()]
        return tuple(tuple(float(x) for x in g.split("/")) for g in groups)
    if key in ("phase_deg", "snr_db"):
        return _parse_float_list(text)
    if key in ("packet_len", "min_errors", "max_bits", "seed", "workers"):
        return int(text)
    if key == "amplitude_ratio":
        return float(text)
    if key == "metric":
        if text not in ("whitened", "plain"):
            raise ValueError("metric must be 'whitened' or 'plain'")
        return text
    if key == "output":
        return text or None
    raise ValueError(f"unknown key {key!r}")


def _validate(cfg: SweepConfig, lines: dict[str, int]):
    def fail(key, message):
        raise ConfigError(message, lines.get(key))

    if not cfg.schemes:
        fail("schemes", "scheme list is empty")
    if not cfg.snr_db:
        fail("snr_db", "SNR grid is empty")
    if any(np.diff(cfg.snr_db) <= 0):
        fail("snr_db", "SNR grid must be strictly increasing")
    if not cfg.delta:
        fail("delta", "delta list is empty")
    if not cfg.phase_deg:
        fail("phase_deg", "phase list is empty")
    if cfg.packet_len < 1:
        fail("packet_len", "packet_len must be >= 1")
    if cfg.min_errors < 1:
        fail("min_errors", "min_errors must be >= 1")
    if cfg.max_bits < cfg.packet_len:
        fail("max_bits", "max_bits must be >= packet_len")
    if cfg.workers < 1:
        fail("workers", "workers must be >= 1")
    if not 0 <= cfg.seed < 2**64:
        fail("seed", "seed must be a 64-bit unsigned integer")
    for offsets in cfg.delta:
        try:
            CollisionScenario(offsets, (1.0,) * (len(offsets) + 1))
        except ValueError as exc:
            fail("delta", str(exc))


def parse_config(text: str, overrides: dict | None = None) -> SweepConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    ``overrides`` maps keys to raw strings (as given on a command line) and
    replaces file values.
    """
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}; known keys: {', '.join(CONFIG_KEYS)}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", lineno)
        try:
            values[key] = _parse_value(key, value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno) from None
        lines[key] = lineno
    for key, value in (overrides or {}).items():
        key = key.replace("-", "_")
        if value is None:
            continue
        try:
            values[key] = _parse_value(key, str(value))
        except ValueError as exc:
            raise ConfigError(f"bad value for --{key}: {exc}") from None
        lines.pop(key, None)
    if "schemes" not in values:
        raise ConfigError("missing required key 'schemes'")
    cfg = SweepConfig(**values)
    _validate(cfg, lines)
    return cfg


def load_config(path: str | Path, overrides: dict | None = None) -> SweepConfig:
    return parse_config(Path(path).read_text(), overrides)


# --- sweeps ------------------------------------------------------------------

@dataclass(frozen=True)
class _Task:
    scheme: str
    offsets: tuple[float, ...]
    phase_deg: float
    ebn0_db: float
    seed: int


def sweep_points(cfg: SweepConfig) -> list[_Task]:
    """Enumerate the grid in canonical order with per-point seeds.

    ``bpsk`` has no collision, so it is swept over SNR only.  The
    carrier-synchronous ``cresm-*`` schemes ignore the phase list.
    """
    tasks = []
    for scheme in cfg.schemes:
        deltas = [()] if scheme == "bpsk" else cfg.delta
        phases = [0.0] if scheme == "bpsk" or scheme.startswith("cresm") else cfg.phase_deg
        for offsets in deltas:
            for phase in phases:
                for snr in cfg.snr_db:
                    tasks.append(_Task(scheme, tuple(offsets), float(phase), float(snr),
                                       derive_seed(cfg.seed, len(tasks))))
    return tasks


def _scenario_for(cfg: SweepConfig, task: _Task) -> CollisionScenario | None:
    if task.scheme == "bpsk":
        return None
    h_other = cfg.amplitude_ratio * np.exp(1j * np.deg2rad(task.phase_deg))
    if task.phase_deg % 180 == 0:
        h_other = complex(round(h_other.real, 15), 0.0)
    channels = (1.0,) + (h_other,) * len(task.offsets)
    return CollisionScenario(task.offsets, channels, 0.0, cfg.packet_len)


def _run_task(args) -> BerPoint:
    cfg, task = args
    mc = MonteCarloConfig(cfg.min_errors, cfg.max_bits, task.seed)
    point = run_ber_point(task.scheme, _scenario_for(cfg, task), task.ebn0_db, mc,
                          metric=cfg.metric, packet_len=cfg.packet_len)
    return replace(point, phase_deg=task.phase_deg)


def sweep(cfg: SweepConfig, progress=None) -> list[BerPoint]:
    """Run every grid point; results come back in canonical order.

    With ``cfg.workers > 1`` points run in separate processes.  Seeds depend
    only on the point's index, so the output is the same either way.
    """
    tasks = sweep_points(cfg)
    jobs = [(cfg, t) for t in tasks]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            points = []
            for point in pool.map(_run_task, jobs):
                points.append(point)
                if progress:
                    progress(point)
    else:
        points = []
        for job in jobs:
            point = _run_task(job)
            points.append(point)
            if progress:
                progress(point)
    return points


def curves_from_points(points: Iterable[BerPoint]) -> list[BerCurve]:
    """Group points sharing everything but SNR into curves."""
    groups: dict[tuple, list[BerPoint]] = {}
    for p in points:
        groups.setdefault((p.scheme, p.n, p.delta, p.phase_deg, p.packet_len), []).append(p)
    return [BerCurve(tuple(sorted(g, key=lambda p: p.ebn0_db))) for g in groups.values()]


# --- CSV ---------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    # repr is the shortest string that parses back to the same double
    return repr(float(x))


def _row(p: BerPoint) -> list[str]:
    return [p.scheme, str(p.n), "/".join(_fmt_float(d) for d in p.delta), _fmt_float(p.phase_deg),
            _fmt_float(p.ebn0_db), str(p.packet_len), str(p.bits), str(p.errors),
            _fmt_float(p.ber), _fmt_float(p.ci95), str(p.seed)]


def write_csv(points: Sequence[BerPoint], target) -> None:
    """Write points to a path or an open text stream."""
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="") as fh:
            write_csv(points, fh)
        return
    writer = csv.writer(target, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for p in points:
        writer.writerow(_row(p))


def read_csv(source) -> list[BerPoint]:
    """Parse points from a path or an open text stream."""
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return read_csv(fh)
    reader = csv.reader(source)
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {header}")
    points = []
    for row in reader:
        rec = dict(zip(CSV_COLUMNS, row))
        points.append(BerPoint(
            scheme=rec["scheme"], n=int(rec["n"]),
            delta=tuple(float(x) for x in rec["delta"].split("/")) if rec["delta"] else (),
            phase_deg=float(rec["phase_deg"]), ebn0_db=float(rec["ebn0_db"]),
            packet_len=int(rec["packet_len"]), bits=int(rec["bits"]), errors=int(rec["errors"]),
            ber=float(rec["ber"]), ci95=float(rec["ci95"]), seed=int(rec["seed"]),
        ))
    return points


# --- penalties ---------------------------------------------------------------

def _snr_at(curve, target: float) -> float:
    snr = np.asarray(curve.ebn0_db, dtype=float)
    ber = np.asarray(curve.ber, dtype=float)
    keep = ber > 0
    snr, log_ber = snr[keep], np.log10(ber[keep])
    goal = math.log10(target)
    for i in range(len(snr) - 1):
        hi, lo = log_ber[i], log_ber[i + 1]
        if hi >= goal >= lo and hi != lo:
            return float(snr[i] + (hi - goal) / (hi - lo) * (snr[i + 1] - snr[i]))
        if hi == goal:
            return float(snr[i])
    if len(snr) and log_ber[-1] == goal:
        return float(snr[-1])
    achievable = (10 ** log_ber.min(), 10 ** log_ber.max()) if len(snr) else (float("nan"),) * 2
    raise ValueError(
        f"target BER {target:g} is not bracketed; curve spans {achievable[0]:.3g} .. {achievable[1]:.3g}"
    )


def db_penalty(curve_a, curve_b, target_ber: float) -> float:
    """SNR needed by ``curve_a`` minus that needed by ``curve_b`` at ``target_ber``.

    Curves are interpolated linearly in log10(BER); zero-error points are
    skipped.  Any object with ``ebn0_db`` and ``ber`` sequences works.
    """
    if not 0 < target_ber < 1:
        raise ValueError("target_ber must be in (0, 1)")
    return _snr_at(curve_a, target_ber) - _snr_at(curve_b, target_ber)
