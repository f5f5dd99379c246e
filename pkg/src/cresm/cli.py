"""Command-line front end: ``cresm sweep | decode | trellis | validate``.

Exit codes: 0 success, 1 usage or configuration error, 2 validation failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .baselines import sic_decode
from .channel import CollisionScenario, add_noise, virtual_encode
from .experiment import CONFIG_KEYS, ConfigError, load_config, sweep, write_csv
from .signal import bpsk_modulate, ebn0_to_n0, random_bits
from .trellis import EXHAUSTIVE_MAX_INPUTS, build_trellis, exhaustive_ml_oracle, format_trellis, \
    successive_decode, viterbi_decode
from .validate import run_all

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _complex_list(text: str) -> list[complex]:
    return [complex(t.strip().replace(" ", "")) for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.replace("/", ",").split(",") if t.strip()]


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delta", type=_float_list, default=[0.5],
                   help="arrival offsets of sources 2..n, comma separated (default 0.5)")
    p.add_argument("--channels", type=_complex_list, default=None,
                   help="complex gain per source, e.g. '1,0.8+0.6j'; overrides --amplitude-ratio/--phase-deg")
    p.add_argument("--amplitude-ratio", "--amplitude_ratio", type=float, default=1.0,
                   help="|h_j / h_1| for the later sources")
    p.add_argument("--phase-deg", "--phase_deg", type=float, default=0.0,
                   help="carrier phase of the later sources relative to the first")
    p.add_argument("--packet-len", "--packet_len", type=int, default=8)


def _scenario(args, noise_density: float = 0.0) -> CollisionScenario:
    n = len(args.delta) + 1
    if args.channels is not None:
        channels = tuple(args.channels)
    else:
        h = args.amplitude_ratio * np.exp(1j * np.deg2rad(args.phase_deg))
        if args.phase_deg % 180 == 0:
            h = complex(round(h.real, 15), 0.0)
        channels = (1.0,) + (h,) * (n - 1)
    return CollisionScenario(tuple(args.delta), channels, noise_density, args.packet_len)


def _fmt_values(values) -> str:
    values = np.asarray(values)
    if np.iscomplexobj(values):
        return " ".join(f"{v.real:+.3f}{v.imag:+.3f}j" for v in values)
    return " ".join(f"{v:+.3f}" for v in values)


def _fmt_symbols(symbols) -> str:
    return " ".join(f"{int(s):+d}" for s in symbols)


def cmd_sweep(args) -> int:
    overrides = {key: getattr(args, key) for key in CONFIG_KEYS}
    cfg = load_config(args.config, overrides)

    def progress(point):
        print(f"{point.scheme:17s} delta={'/'.join(map(str, point.delta)) or '-':8s} "
              f"phase={point.phase_deg:g} Eb/N0={point.ebn0_db:g} dB  "
              f"BER={point.ber:.4g} ({point.errors}/{point.bits})", file=sys.stderr)

    points = sweep(cfg, progress=None if args.quiet else progress)
    if cfg.output:
        write_csv(points, cfg.output)
        print(f"wrote {len(points)} rows to {cfg.output}", file=sys.stderr)
    else:
        write_csv(points, sys.stdout)
    return EXIT_OK


def cmd_decode(args) -> int:
    n0 = 0.0 if args.ebn0_db is None else ebn0_to_n0(args.ebn0_db)
    scenario = _scenario(args, n0)
    n, length = scenario.n, scenario.packet_len
    streams = np.array([bpsk_modulate(random_bits(length, args.seed + j)) for j in range(n)])
    z = virtual_encode(scenario, streams)
    y = add_noise(z, scenario, args.seed + n)
    snr = "noiseless" if args.ebn0_db is None else f"Eb/N0 = {args.ebn0_db:g} dB"
    print(f"n={n} offsets={scenario.offsets} channels={scenario.channels} {snr} seed={args.seed}")
    for j, s in enumerate(streams):
        print(f"packet {j}:       {_fmt_symbols(s)}")
    print(f"noiseless z:    {_fmt_values(z.values)}")
    print(f"received y:     {_fmt_values(y.values)}")

    trellis = build_trellis(scenario)
    decoders = [
        ("viterbi", lambda: viterbi_decode(y, trellis, "whitened").streams),
        ("viterbi-plain", lambda: viterbi_decode(y, trellis, "plain").streams),
    ]
    if trellis.num_inputs <= EXHAUSTIVE_MAX_INPUTS:
        decoders.append(("exhaustive-ml", lambda: exhaustive_ml_oracle(y, trellis).streams))
    if n == 2:
        decoders.append(("successive", lambda: successive_decode(y, scenario).streams))
        decoders.append(("sic", lambda: sic_decode(y, scenario)))
    for name, run in decoders:
        decoded = np.array(run())
        errors = int(np.count_nonzero(decoded != streams))
        print(f"{name} ({errors} bit errors):")
        for j, s in enumerate(decoded):
            print(f"  packet {j}:     {_fmt_symbols(s)}")
    return EXIT_OK


def cmd_trellis(args) -> int:
    scenario = _scenario(args, 0.0 if args.ebn0_db is None else ebn0_to_n0(args.ebn0_db))
    print(format_trellis(build_trellis(scenario), args.stages))
    return EXIT_OK


def cmd_validate(args) -> int:
    results = run_all(quick=args.quick)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cresm", description="Collision resolution by exploiting symbol misalignment.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sweep", help="run a BER grid from a key=value config and write CSV")
    p.add_argument("config", help="config file")
    p.add_argument("--quiet", action="store_true", help="no per-point progress on stderr")
    for key in CONFIG_KEYS:
        flags = [f"--{key}"] + ([f"--{key.replace('_', '-')}"] if "_" in key else [])
        p.add_argument(*flags, dest=key, default=None, metavar="VALUE",
                       help=f"override '{key}' from the config file")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("decode", help="encode random packets, add noise, decode with every scheme")
    _add_scenario_flags(p)
    p.add_argument("--ebn0-db", "--ebn0_db", type=float, default=None, help="omit for a noiseless channel")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("trellis", help="print states, transitions and branch outputs")
    _add_scenario_flags(p)
    p.add_argument("--ebn0-db", "--ebn0_db", type=float, default=None,
                   help="only affects the printed stage variances")
    p.add_argument("--stages", type=int, default=None, help="print at most this many stages")
    p.set_defaults(func=cmd_trellis)

    p = sub.add_parser("validate", help="run the oracle-equivalence and passband-oracle suites")
    p.add_argument("--quick", action="store_true", help="one tenth of the trials")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"cresm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
