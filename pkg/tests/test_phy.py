import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from drlpower.channel import ChannelMatrix
from drlpower.core import ContractViolation
from drlpower.phy import (Intent, PhyParams, RateTable, contend_and_transmit,
                          energy_for_frame, quantize_quality, rate_for_snr, snr_db)

PHY = PhyParams()


def test_snr_examples():
    assert snr_db(-70.0, 0.0, -94.0) == pytest.approx(24.0)
    assert snr_db(-94.0, 0.0, -94.0) == pytest.approx(0.0, abs=1e-12)
    noise_mw = 10 ** (-94 / 10)
    expected = 10 * math.log10(10 ** (-70 / 10) / (2 * noise_mw))
    assert snr_db(-70.0, noise_mw, -94.0) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(20.99, abs=0.005)


@pytest.mark.parametrize("snr, q", [(24.3, 24), (-5, 0), (80, 70), (24.5, 25)])
def test_quantize_quality(snr, q):
    assert quantize_quality(snr) == q


@pytest.mark.parametrize("snr, rate", [(26, 65.0), (3, 0.0), (5, 6.5), (4.999, 0.0), (24.9, 58.5), (25, 65.0)])
def test_rate_lookup(snr, rate):
    assert rate_for_snr(snr) == rate


@given(st.floats(-50, 100), st.floats(-50, 100))
def test_rate_monotone(a, b):
    lo, hi = sorted((a, b))
    assert rate_for_snr(lo) <= rate_for_snr(hi)


def test_rate_table_validation():
    with pytest.raises(ValueError):
        RateTable((5.0, 5.0), (1.0, 2.0))
    with pytest.raises(ValueError):
        RateTable((5.0, 6.0), (2.0, 1.0))
    assert RateTable.from_pairs([[5, 6.5], [8, 13]]).min_snr == 5.0


@pytest.mark.parametrize("p, transmitting, joules", [(20, True, 5.5e-3), (0, True, 0.55e-3), (7, False, 0.5e-3)])
def test_energy_examples(p, transmitting, joules):
    rec = energy_for_frame(p, transmitting, PHY)
    assert rec.energy_joules == pytest.approx(joules, rel=1e-12)
    assert rec.processing_watts == 0.1
    assert rec.tx_power_watts == (10 ** ((p - 30) / 10) if transmitting else 0.0)


def test_energy_increasing_in_power():
    e = [energy_for_frame(p, True, PHY).energy_joules for p in range(21)]
    assert all(b > a for a, b in zip(e, e[1:]))


def test_lone_link_delivers_full_frame():
    # SNR 26 dB: rx at -68 dBm from 20 dBm means 88 dB of pathloss
    pl = np.full((2, 2), 88.0)
    reports, deferred = contend_and_transmit([Intent(0, 1, 10**7)], ChannelMatrix(pl), [20, 20],
                                             np.random.default_rng(0), PHY)
    assert not deferred
    (r,) = reports
    assert r.success and r.bits_delivered == 325_000
    assert r.snr == pytest.approx(26.0)
    assert r.frame_duration == 5e-3


def test_mutually_audible_transmitters_one_defers():
    # nodes 0,1 transmit to 2,3; 0 and 1 hear each other at -50 dBm
    pl = np.full((4, 4), 150.0)
    pl[0, 1] = pl[1, 0] = 70.0
    pl[0, 2] = pl[2, 0] = pl[1, 3] = pl[3, 1] = 80.0
    for seed in range(10):
        reports, deferred = contend_and_transmit([Intent(0, 2, 1000), Intent(1, 3, 1000)], ChannelMatrix(pl),
                                                 [20] * 4, np.random.default_rng(seed), PHY)
        assert len(reports) == 1 and len(deferred) == 1


def test_hidden_terminals_collide_at_common_receiver():
    # 0 and 2 cannot hear each other (-130 dBm) but both reach receiver 1 at -80 dBm
    pl = np.full((3, 3), 150.0)
    pl[0, 1] = pl[1, 0] = 100.0
    pl[2, 1] = pl[1, 2] = 100.0
    reports, deferred = contend_and_transmit([Intent(0, 1, 1000), Intent(2, 1, 1000)], ChannelMatrix(pl),
                                             [20, 20, 20], np.random.default_rng(0), PHY)
    assert not deferred and len(reports) == 2
    # linear-domain oracle: equal signal and interference at -80 dBm
    sig = 10 ** (-80 / 10)
    expected = 10 * math.log10(sig / (10 ** (-94 / 10) + sig))
    for r in reports:
        assert r.snr == pytest.approx(expected, rel=1e-9)
        assert not r.success and r.bits_delivered == 0


def test_half_duplex_deferral():
    pl = np.full((3, 3), 150.0)
    pl[0, 1] = pl[1, 0] = pl[1, 2] = pl[2, 1] = 100.0  # 0 and 2 hidden from each other
    # 1 receives from 0 and also wants to send to 2; exactly one of the two goes
    for seed in range(10):
        reports, deferred = contend_and_transmit([Intent(0, 1, 10), Intent(1, 2, 10)], ChannelMatrix(pl),
                                                 [20, 20, 20], np.random.default_rng(seed), PHY)
        assert len(reports) == 1 and len(deferred) == 1


def test_duplicate_transmitter_rejected():
    with pytest.raises(ContractViolation):
        contend_and_transmit([Intent(0, 1, 1), Intent(0, 2, 1)], ChannelMatrix(np.full((3, 3), 80.0)),
                             [20] * 3, np.random.default_rng(0), PHY)


def random_slot(seed):
    rng = np.random.default_rng(seed)
    n = 6
    pos = rng.random((n, 2)) * 300
    ch = ChannelMatrix.from_positions(pos)
    powers = rng.integers(0, 21, n)
    intents = [Intent(i, int((i + 1 + rng.integers(n - 1)) % n), 100_000) for i in range(n)]
    intents = [it for it in intents if it.tx != it.rx]
    return ch, powers, intents


@pytest.mark.parametrize("seed", range(25))
def test_contention_properties(seed):
    ch, powers, intents = random_slot(seed)
    a = contend_and_transmit(intents, ch, powers, np.random.default_rng(seed), PHY)
    b = contend_and_transmit(intents, ch, powers, np.random.default_rng(seed), PHY)
    assert a == b
    reports, deferred = a
    assert len(reports) + len(deferred) == len(intents)
    rx = ch.rx_matrix(powers)
    txs = [r.tx for r in reports]  # admission order
    for a, i in enumerate(txs):
        for j in txs[a + 1:]:
            assert rx[i, j] < PHY.cs_threshold_dbm
    for r in reports:
        assert (r.bits_delivered > 0) == r.success
        assert r.bits_delivered <= rate_for_snr(r.snr) * 1e6 * PHY.frame_duration


def test_lone_link_bits_monotone_in_power():
    pl = np.full((2, 2), 105.0)
    bits = []
    for p in range(21):
        (r,), _ = contend_and_transmit([Intent(0, 1, 10**7)], ChannelMatrix(pl), [p, 0],
                                       np.random.default_rng(0), PHY)
        bits.append(r.bits_delivered)
    assert bits == sorted(bits) and bits[0] == 0 and bits[-1] > 0
