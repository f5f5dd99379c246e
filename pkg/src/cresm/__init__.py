"""Decoding of colliding, symbol-misaligned BPSK packets.

The superposition of ``n`` packets that arrive with fractional symbol
offsets is oversampled at the offset boundaries and treated as the output of
a rate-1 "virtual" convolutional encoder, then decoded jointly by Viterbi
search.
"""

from .baselines import SicConfig, sic_decode, single_user_trial
from .channel import (CollisionScenario, SubSampleStream, add_noise, deinterleave, interleave,
                      passband_oracle, virtual_encode)
from .experiment import (BerCurve, BerPoint, MonteCarloConfig, db_penalty, load_config, parse_config,
                         read_csv, run_ber_point, sweep, write_csv)
from .signal import analytic_bpsk_ber, bpsk_demodulate_hard, bpsk_modulate, random_bits
from .trellis import (DecodeResult, VirtualTrellis, build_trellis, exhaustive_ml_oracle, successive_decode,
                      viterbi_decode)

__version__ = "0.1.0"

__all__ = [
    "SicConfig", "sic_decode", "single_user_trial",
    "CollisionScenario", "SubSampleStream", "add_noise", "deinterleave", "interleave",
    "passband_oracle", "virtual_encode",
    "BerCurve", "BerPoint", "MonteCarloConfig", "db_penalty", "load_config", "parse_config",
    "read_csv", "run_ber_point", "sweep", "write_csv",
    "analytic_bpsk_ber", "bpsk_demodulate_hard", "bpsk_modulate", "random_bits",
    "DecodeResult", "VirtualTrellis", "build_trellis", "exhaustive_ml_oracle", "successive_decode",
    "viterbi_decode",
]
