import itertools
import math

import numpy as np
import pytest

from cresm.baselines import SicConfig, sic_decode, sic_decode_batch, single_user_trial
from cresm.channel import CollisionScenario, add_noise, encode_interleaved, virtual_encode
from cresm.signal import analytic_bpsk_ber, ebn0_to_n0, make_rng


def two_sample_z(e1, n1, e2, n2):
    p1, p2 = e1 / n1, e2 / n2
    pooled = (e1 + e2) / (n1 + n2)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    return 0.0 if se == 0 else (p1 - p2) / se


def sic_first_user_floor(delta):
    """Noiseless error rate of the first SIC decision, by enumerating x_A and B's two neighbours."""
    errors = 0
    for x_a, b_prev, b_cur in itertools.product((1, -1), repeat=3):
        matched = x_a + delta * b_prev + (1 - delta) * b_cur
        errors += (1 if matched >= 0 else -1) != x_a
    return errors / 8


def test_sic_config_validation():
    assert SicConfig().decode_order == (0, 1)
    SicConfig((1, 0))
    with pytest.raises(ValueError):
        SicConfig((0, 0))


class TestSingleUser:
    def test_noiseless(self):
        bits, errors = single_user_trial(math.inf, 1000, 3)
        assert (bits, errors) == (1000, 0)

    def test_rejects_empty_packet(self):
        with pytest.raises(ValueError):
            single_user_trial(4.0, 0, 1)

    def test_matches_q_function_at_6db(self):
        bits, errors = single_user_trial(6.0, 10**7, 11)
        p = analytic_bpsk_ber(6.0)
        assert p == pytest.approx(2.39e-3, abs=5e-6)
        assert abs(errors / bits - p) <= 4 * math.sqrt(p * (1 - p) / bits)

    def test_monotone_in_snr(self):
        rates = [single_user_trial(snr, 200_000, 20 + i)[1] for i, snr in enumerate((0, 2, 4, 6, 8))]
        assert all(a > b for a, b in zip(rates, rates[1:]))

    def test_deterministic(self):
        assert single_user_trial(3.0, 5000, 8) == single_user_trial(3.0, 5000, 8)


class TestSic:
    def test_rejects_three_packets(self):
        sc = CollisionScenario((0.3, 0.6), (1, 1, 1), packet_len=2)
        with pytest.raises(ValueError):
            sic_decode(virtual_encode(sc, np.ones((3, 2))), sc)

    def test_enumerated_floor(self):
        assert sic_first_user_floor(0.5) == 0.125

    def test_noiseless_floor_at_half_symbol(self):
        length = 10**6
        sc = CollisionScenario((0.5,), (1, 1), 0.0, length)
        x = 1 - 2 * make_rng(4).integers(0, 2, size=(2, length))
        x_a_hat = sic_decode(virtual_encode(sc, x), sc)[0]
        ber = np.mean(x_a_hat != x[0])
        p = sic_first_user_floor(0.5)
        assert abs(ber - p) <= 4 * math.sqrt(p * (1 - p) / length)

    def test_weak_interferer_decodes_exactly(self):
        sc = CollisionScenario.two_packet(0.3, amplitude_ratio=0.2, packet_len=50)
        x = 1 - 2 * make_rng(5).integers(0, 2, size=(2, 50))
        decoded = sic_decode(virtual_encode(sc, x), sc)
        np.testing.assert_array_equal(np.array(decoded), x)

    def test_decode_order(self):
        # the stronger source should go first; with B strong, order (1, 0) resolves both
        sc = CollisionScenario((0.4,), (0.2, 1.0), 0.0, 50)
        x = 1 - 2 * make_rng(6).integers(0, 2, size=(2, 50))
        decoded = sic_decode(virtual_encode(sc, x), sc, SicConfig((1, 0)))
        np.testing.assert_array_equal(np.array(decoded), x)

    def test_no_interferer_matches_single_user(self):
        # h_B must be non-zero for a valid scenario, so use a negligible one
        length, snr = 400_000, 4.0
        sc = CollisionScenario((0.5,), (1, 1e-12), ebn0_to_n0(snr), length)
        x = 1 - 2 * make_rng(7).integers(0, 2, size=(2, length))
        y = add_noise(virtual_encode(sc, x), sc, 8)
        sic_errors = int(np.count_nonzero(sic_decode(y, sc)[0] != x[0]))
        bits, su_errors = single_user_trial(snr, length, 9)
        assert abs(two_sample_z(sic_errors, length, su_errors, bits)) < 4

    def test_first_stage_noise_variance(self):
        # the length-weighted sum of the two sub-samples has variance N0/2 for any delta
        length, delta = 200_000, 0.2
        sc = CollisionScenario((delta,), (1, 1e-12), 1.0, length)
        z = virtual_encode(sc, np.ones((2, length)))
        noise = add_noise(z, sc, 12).values - z.values
        matched = delta * noise[0:2 * length:2] + (1 - delta) * noise[1:2 * length:2]
        assert np.var(matched) == pytest.approx(0.5, rel=0.02)

    def test_batch_matches_single(self):
        sc = CollisionScenario.two_packet(0.35, phase_deg=20, noise_density=0.3, packet_len=12)
        rng = make_rng(13)
        v = 1 - 2 * rng.integers(0, 2, size=(5, 24))
        y = encode_interleaved(v, sc.channels) + 0.3 * rng.standard_normal((5, 25))
        batch = sic_decode_batch(y, sc)
        for row in range(5):
            stream = virtual_encode(sc, [v[row, 0::2], v[row, 1::2]])
            single = sic_decode(type(stream)(y[row], stream.interval_lengths, stream.noise_variances), sc)
            np.testing.assert_array_equal(batch[row], np.array(single))
