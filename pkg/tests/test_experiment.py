import io
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cresm.channel import CollisionScenario
from cresm.experiment import (CSV_COLUMNS, BerCurve, BerPoint, ConfigError, MonteCarloConfig,
                              curves_from_points, db_penalty, load_config, parse_config, read_csv,
                              run_ber_point, sweep, sweep_points, write_csv)
from cresm.signal import analytic_bpsk_ber

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


class Curve:
    def __init__(self, snr, ber):
        self.ebn0_db = np.asarray(snr, dtype=float)
        self.ber = np.asarray(ber, dtype=float)


def small_mc(seed=1, max_bits=20_000):
    return MonteCarloConfig(min_errors=50, max_bits=max_bits, seed=seed)


class TestRunBerPoint:
    def test_deterministic(self):
        sc = CollisionScenario.two_packet(0.4, packet_len=20)
        assert run_ber_point("cresm-viterbi", sc, 3.0, small_mc()) == \
            run_ber_point("cresm-viterbi", sc, 3.0, small_mc())

    def test_seed_matters(self):
        sc = CollisionScenario.two_packet(0.4, packet_len=20)
        a = run_ber_point("cresm-viterbi", sc, 0.0, small_mc(1))
        b = run_ber_point("cresm-viterbi", sc, 0.0, small_mc(2))
        assert a.errors != b.errors or a.bits != b.bits

    @pytest.mark.parametrize("scheme, phase", [("cresm-viterbi", 0), ("g-cresm", 45),
                                               ("cresm-successive", 0)])
    def test_high_snr_is_error_free(self, scheme, phase):
        sc = CollisionScenario.two_packet(0.5, phase_deg=phase, packet_len=50)
        point = run_ber_point(scheme, sc, 60.0, small_mc())
        assert point.errors == 0
        assert point.bits == 20_000
        assert point.ber == 0.0 and point.ci95 == 0.0

    def test_three_packet_viterbi(self):
        sc = CollisionScenario((0.3, 0.6), (1, 1, 1), packet_len=30)
        point = run_ber_point("cresm-viterbi", sc, 60.0, small_mc(max_bits=9_000))
        assert (point.n, point.errors, point.bits) == (3, 0, 9_000)

    def test_bpsk_matches_q_function(self):
        point = run_ber_point("bpsk", None, 6.0, MonteCarloConfig(100, 2_000_000, 4), packet_len=100)
        p = analytic_bpsk_ber(6.0)
        assert abs(point.ber - p) <= 4 * math.sqrt(p * (1 - p) / point.bits)
        assert point.n == 1 and point.delta == ()

    def test_stops_at_min_errors(self):
        sc = CollisionScenario.two_packet(0.5, packet_len=100)
        point = run_ber_point("sic", sc, 0.0, MonteCarloConfig(10, 10**7, 3))
        assert point.errors >= 10
        assert point.bits < 10**7

    def test_ci95(self):
        point = run_ber_point("bpsk", None, 0.0, small_mc(), packet_len=100)
        assert point.ber == point.errors / point.bits
        assert point.ci95 == pytest.approx(1.96 * math.sqrt(point.ber * (1 - point.ber) / point.bits))

    @pytest.mark.parametrize("scheme, scenario", [
        ("sic", CollisionScenario((0.3, 0.6), (1, 1, 1), packet_len=4)),
        ("cresm-successive", CollisionScenario((0.3, 0.6), (1, 1, 1), packet_len=4)),
        ("cresm-viterbi", CollisionScenario.two_packet(0.5, phase_deg=30, packet_len=4)),
        ("g-cresm", None),
        ("qpsk", CollisionScenario.two_packet(0.5, packet_len=4)),
    ])
    def test_invalid_pairings(self, scheme, scenario):
        with pytest.raises(ValueError):
            run_ber_point(scheme, scenario, 4.0, small_mc())

    def test_bpsk_needs_length(self):
        with pytest.raises(ValueError):
            run_ber_point("bpsk", None, 4.0, small_mc())

    def test_mc_validation(self):
        with pytest.raises(ValueError):
            MonteCarloConfig(min_errors=0)
        with pytest.raises(ValueError):
            run_ber_point("bpsk", None, 4.0, MonteCarloConfig(max_bits=10), packet_len=100)

    @pytest.mark.parametrize("ebn0_db", [4.0, 8.0])
    def test_viterbi_beats_sic(self, ebn0_db):
        sc = CollisionScenario.two_packet(0.5, packet_len=100)
        mc = MonteCarloConfig(200, 2_000_000, 21)
        assert run_ber_point("cresm-viterbi", sc, ebn0_db, mc).ber < run_ber_point("sic", sc, ebn0_db, mc).ber


class TestConfig:
    def test_offset_sweep_has_66_rows(self):
        cfg = load_config(CONFIGS / "offset_sweep.conf")
        assert cfg.snr_db == (0.0, 2.0, 4.0, 6.0, 8.0, 10.0)
        tasks = sweep_points(cfg)
        assert len(tasks) == 66
        assert sum(t.scheme == "bpsk" for t in tasks) == 6
        assert len({t.seed for t in tasks}) == 66

    def test_phase_sweep_recipe(self):
        cfg = load_config(CONFIGS / "phase_sweep.conf")
        tasks = sweep_points(cfg)
        assert {t.phase_deg for t in tasks} == {0.0, 30.0, 60.0, 90.0}
        assert {t.scheme for t in tasks} == {"g-cresm"}

    def test_phase45_recipe(self):
        cfg = load_config(CONFIGS / "phase45.conf")
        assert cfg.schemes == ("g-cresm",)
        assert cfg.phase_deg == (45.0,)

    def test_comments_and_lists(self):
        cfg = parse_config("# header\nschemes = sic, g-cresm  # two\ndelta = 0.2, 0.3/0.6\n"
                           "phase_deg = 0, 90\nsnr_db = 1, 3, 5.5\nmetric = plain\n")
        assert cfg.delta == ((0.2,), (0.3, 0.6))
        assert cfg.snr_db == (1.0, 3.0, 5.5)
        assert cfg.metric == "plain"

    def test_range_is_half_open(self):
        assert parse_config("schemes = bpsk\nsnr_db = 0:1:0.25").snr_db == (0.0, 0.25, 0.5, 0.75)

    @pytest.mark.parametrize("text, line", [
        ("schemes = bpsk\nnot a pair\n", 2),
        ("schemes = bpsk\n\nbogus = 3\n", 3),
        ("schemes = bpsk\nschemes = sic\n", 2),
        ("schemes = bpsk, qpsk\n", 1),
        ("schemes = bpsk\npacket_len = ten\n", 2),
        ("schemes = bpsk\nsnr_db = 0:4:0\n", 2),
        ("# c\nschemes =\n", 2),
        ("schemes = bpsk\nsnr_db = 4, 2\n", 2),
        ("schemes = bpsk\ndelta = 0.5/0.2\n", 2),
        ("schemes = bpsk\nmetric = euclid\n", 2),
    ])
    def test_errors_carry_line_numbers(self, text, line):
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert info.value.line == line
        assert f"line {line}" in str(info.value)

    def test_missing_schemes(self):
        with pytest.raises(ConfigError):
            parse_config("snr_db = 1\n")

    def test_overrides(self):
        cfg = parse_config("schemes = bpsk\nseed = 3\n", {"seed": "9", "snr-db": "2,4", "workers": None})
        assert cfg.seed == 9
        assert cfg.snr_db == (2.0, 4.0)
        assert cfg.workers == 1

    def test_bad_override(self):
        with pytest.raises(ConfigError):
            parse_config("schemes = bpsk\n", {"packet_len": "x"})

    def test_canonical_order(self):
        cfg = parse_config("schemes = g-cresm, bpsk\ndelta = 0.3, 0.5\nphase_deg = 0, 90\nsnr_db = 0, 4\n")
        tasks = [(t.scheme, t.offsets, t.phase_deg, t.ebn0_db) for t in sweep_points(cfg)]
        assert tasks[:3] == [("g-cresm", (0.3,), 0.0, 0.0), ("g-cresm", (0.3,), 0.0, 4.0),
                             ("g-cresm", (0.3,), 90.0, 0.0)]
        assert tasks[-2:] == [("bpsk", (), 0.0, 0.0), ("bpsk", (), 0.0, 4.0)]
        assert len(tasks) == 2 * 2 * 2 + 2


SWEEP_TEXT = """
schemes = bpsk, cresm-viterbi, g-cresm, sic, cresm-successive
delta = 0.3
phase_deg = 0, 90
snr_db = 0, 3
packet_len = 40
min_errors = 20
max_bits = 8000
seed = 5
"""


class TestSweep:
    def test_serial_equals_parallel(self):
        serial = sweep(parse_config(SWEEP_TEXT))
        parallel = sweep(parse_config(SWEEP_TEXT, {"workers": "3"}))
        assert serial == parallel
        out_a, out_b = io.StringIO(), io.StringIO()
        write_csv(serial, out_a)
        write_csv(parallel, out_b)
        assert out_a.getvalue() == out_b.getvalue()

    def test_rows_and_phase_column(self):
        points = sweep(parse_config(SWEEP_TEXT))
        assert len(points) == 2 + 2 + 4 + 4 + 2
        g = [p for p in points if p.scheme == "g-cresm"]
        assert sorted({p.phase_deg for p in g}) == [0.0, 90.0]
        assert all(p.seed != q.seed for p, q in zip(points, points[1:]))

    def test_progress_callback(self):
        seen = []
        points = sweep(parse_config(SWEEP_TEXT), progress=seen.append)
        assert seen == points

    def test_curves(self):
        curves = curves_from_points(sweep(parse_config(SWEEP_TEXT)))
        assert len(curves) == 7
        assert all(len(c) == 2 for c in curves)


point_strategy = st.builds(
    lambda scheme, delta, phase, snr, bits, frac, seed: BerPoint(
        scheme, len(delta) + 1, tuple(delta), phase, snr, 100, bits, int(bits * frac),
        int(bits * frac) / bits, 1.96 * math.sqrt(frac * (1 - frac) / bits), seed),
    st.sampled_from(["bpsk", "sic", "g-cresm"]),
    st.lists(st.floats(0.001, 0.999), min_size=0, max_size=3),
    st.floats(-180, 180), st.floats(-10, 30),
    st.integers(1, 10**9), st.floats(0, 1), st.integers(0, 2**64 - 1),
)


class TestCsv:
    @given(st.lists(point_strategy, max_size=5))
    def test_round_trip_is_exact(self, points):
        buf = io.StringIO()
        write_csv(points, buf)
        buf.seek(0)
        assert read_csv(buf) == points

    def test_header_and_file(self, tmp_path):
        p = BerPoint("sic", 2, (0.5,), 0.0, 4.0, 100, 1000, 3, 0.003, 0.0034, 7)
        path = tmp_path / "out.csv"
        write_csv([p], path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[1] == "sic,2,0.5,0.0,4.0,100,1000,3,0.003,0.0034,7"
        assert read_csv(path) == [p]

    def test_bad_header(self):
        with pytest.raises(ValueError):
            read_csv(io.StringIO("a,b\n"))


class TestPenalty:
    def test_identical_curves(self):
        snr = np.arange(0, 11, 1.0)
        c = Curve(snr, analytic_bpsk_ber(snr))
        assert db_penalty(c, c, 1e-3) == 0.0

    def test_shifted_analytic_curve(self):
        snr = np.arange(0, 14, 1.0)
        base = Curve(snr, analytic_bpsk_ber(snr))
        shifted = Curve(snr, analytic_bpsk_ber(snr - 3.0))
        assert db_penalty(shifted, base, 1e-3) == pytest.approx(3.0, abs=0.01)
        assert db_penalty(base, shifted, 1e-3) == pytest.approx(-3.0, abs=0.01)

    def test_zero_ber_points_skipped(self):
        c = Curve([0, 2, 4, 6], [1e-1, 1e-2, 1e-4, 0.0])
        assert db_penalty(c, Curve([0, 2], [1e-2, 1e-4]), 1e-3) == pytest.approx(2.0)

    def test_not_bracketed(self):
        c = Curve([0, 2, 4], [1e-1, 5e-2, 2e-2])
        with pytest.raises(ValueError, match="0.02 .. 0.1"):
            db_penalty(c, c, 1e-3)

    def test_target_range(self):
        c = Curve([0, 2], [1e-1, 1e-2])
        with pytest.raises(ValueError):
            db_penalty(c, c, 0.0)

    def test_accepts_ber_curve(self):
        pts = [BerPoint("bpsk", 1, (), 0.0, float(s), 100, 10**6, int(analytic_bpsk_ber(s) * 1e6),
                        int(analytic_bpsk_ber(s) * 1e6) / 1e6, 0.0, 0) for s in range(0, 10)]
        curve = BerCurve(pts)
        assert db_penalty(curve, curve, 1e-3) == 0.0

    def test_curve_requires_increasing_snr(self):
        p = BerPoint("bpsk", 1, (), 0.0, 2.0, 100, 10, 1, 0.1, 0.0, 0)
        with pytest.raises(ValueError):
            BerCurve([p, replace(p, ebn0_db=1.0)])
