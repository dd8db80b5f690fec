import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ratsteer.netmodel import (RAT, BaseStation, ChannelRealization, Packet, PacketQueue,
                               RadioMap, RbgAllocation, UserEquipment, check_capacity_constraint,
                               compute_channel_gain, compute_sinr, link_capacity, path_loss_db,
                               rayleigh_power, total_delay, transmission_delay)
from ratsteer.sim import BatchQueue

N0 = 4e-21


def bs(i, rat=RAT.LTE, power=1.0, bw=180e3, nrbg=1, pos=(0.0, 0.0), f=2e9):
    return BaseStation(i, rat, power, bw, f, pos, nrbg)


# -- channel gain ------------------------------------------------------------

def test_lte_path_loss_at_one_km():
    ue = UserEquipment(0, (1000.0, 0.0), 0, 1)
    enb = bs(0, pos=(0.0, 0.0))
    assert path_loss_db(1000.0, RAT.LTE, 3.5e9) == pytest.approx(128.1, abs=1e-12)
    g = compute_channel_gain(ue, enb, 0, np.random.default_rng(0), shadowing_db=0.0, fading=False)
    assert g == pytest.approx(10 ** -12.81, rel=1e-12)


def test_nr_path_loss_formula():
    # 32.4 + 21 log10(100) + 20 log10(3.5)
    assert path_loss_db(100.0, RAT.NR, 3.5e9) == pytest.approx(32.4 + 42.0 + 20 * math.log10(3.5))


def test_zero_distance_clamps_to_one_metre():
    assert path_loss_db(0.0, RAT.NR, 1e9) == pytest.approx(path_loss_db(1.0, RAT.NR, 1e9))
    ue = UserEquipment(0, (0.0, 0.0), 0, 1)
    g = compute_channel_gain(ue, bs(0), 0, np.random.default_rng(0), 0.0, fading=False)
    assert g == pytest.approx(10 ** (-(128.1 + 37.6 * math.log10(1e-3)) / 10))


def test_channel_gain_deterministic_for_seed():
    ue = UserEquipment(0, (300.0, 40.0), 0, 1)
    g1 = compute_channel_gain(ue, bs(0), 3, np.random.default_rng(11))
    g2 = compute_channel_gain(ue, bs(0), 3, np.random.default_rng(11))
    assert g1 == g2


def test_rayleigh_power_has_unit_mean():
    x = rayleigh_power(np.random.default_rng(1), 100_000)
    assert abs(x.mean() - 1.0) < 0.02


# -- SINR / capacity ---------------------------------------------------------

def _single_link(snr, omega=180e3):
    b = bs(0, bw=omega)
    u = UserEquipment(0, (10.0, 0.0), 0, 1)
    alloc = RbgAllocation()
    alloc.assign(0, 0, 0)
    g = snr * omega * N0 / b.rbg_power
    return u, b, alloc, ChannelRealization({(0, 0, 0): g}, N0)


def test_sinr_unit_ratio_without_interference():
    u, b, alloc, chan = _single_link(1.0)
    assert compute_sinr(0, u, b, [], alloc, chan) == pytest.approx(1.0, rel=1e-9)


def test_sinr_with_one_interferer():
    omega = 180e3
    b, m = bs(0), bs(1, pos=(500.0, 0.0))
    u = UserEquipment(0, (10.0, 0.0), 0, 1)
    alloc = RbgAllocation()
    alloc.assign(0, 0, 0)
    alloc.assign(0, 1, 1)  # m is transmitting on RBG 0 to another UE
    gains = {(0, 0, 0): 2 * omega * N0 / b.rbg_power, (0, 0, 1): omega * N0 / m.rbg_power}
    chan = ChannelRealization(gains, N0)
    assert compute_sinr(0, u, b, [m], alloc, chan) == pytest.approx(1.0, rel=1e-9)


def test_idle_interferer_is_ignored():
    b, m = bs(0), bs(1)
    u = UserEquipment(0, (10.0, 0.0), 0, 1)
    alloc = RbgAllocation()
    alloc.assign(0, 0, 0)
    chan = ChannelRealization({(0, 0, 0): 1e-10, (0, 0, 1): 1e-5}, N0)
    assert compute_sinr(0, u, b, [m], alloc, chan) == pytest.approx(1e-10 / (180e3 * N0))


def test_sinr_matches_scalar_oracle_three_interferers():
    rng = np.random.default_rng(5)
    stations = [bs(i, power=rng.uniform(1, 40), bw=1.8e6, nrbg=10) for i in range(4)]
    u = UserEquipment(0, (0.0, 0.0), 0, 1)
    alloc = RbgAllocation()
    h = 4
    alloc.assign(h, 0, 0)
    for m in (1, 2, 3):
        if rng.random() < 0.8:
            alloc.assign(h, 10 + m, m)
    gains = {(h, 0, b): float(rng.uniform(1e-14, 1e-11)) for b in range(4)}
    chan = ChannelRealization(gains, N0)
    # oracle: SINR denominator written out by hand
    num = stations[0].tx_power_total / 10 * gains[(h, 0, 0)]
    den = 180e3 * N0
    for m in (1, 2, 3):
        x = 1 if alloc.busy(h, m) else 0
        den += stations[m].tx_power_total / 10 * x * gains[(h, 0, m)]
    assert compute_sinr(h, u, stations[0], stations[1:], alloc, chan) == pytest.approx(num / den, rel=1e-12)


def test_capacity_unit_and_triple_sinr():
    u, b, alloc, chan = _single_link(1.0)
    assert link_capacity(u, b, alloc, chan) == pytest.approx(180_000, rel=1e-9)
    u, b, alloc, chan = _single_link(3.0)
    assert link_capacity(u, b, alloc, chan) == pytest.approx(360_000, rel=1e-9)


def test_capacity_zero_without_rbgs():
    u, b, _, chan = _single_link(1.0)
    assert link_capacity(u, b, RbgAllocation(), chan) == 0.0


def test_capacity_four_rbgs_matches_oracle():
    rng = np.random.default_rng(2)
    b = bs(0, power=8.0, bw=4 * 180e3, nrbg=4)
    m = bs(1, power=8.0, bw=4 * 180e3, nrbg=4)
    u = UserEquipment(0, (0.0, 0.0), 0, 1)
    alloc = RbgAllocation()
    for h in range(4):
        alloc.assign(h, 0, 0)
        if h % 2:
            alloc.assign(h, 7, 1)
    gains = {(h, 0, s): float(rng.uniform(1e-14, 1e-12)) for h in range(4) for s in range(2)}
    chan = ChannelRealization(gains, N0)
    expected = 0.0
    for h in range(4):
        i = 2.0 * gains[(h, 0, 1)] if h % 2 else 0.0
        expected += 180e3 * math.log2(1 + 2.0 * gains[(h, 0, 0)] / (180e3 * N0 + i))
    assert link_capacity(u, b, alloc, chan, [m]) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-15, 1e-9), st.floats(1.0, 100.0), st.integers(0, 3))
def test_capacity_monotone_in_gain(g, factor, h_boost):
    b = bs(0, power=4.0, bw=4 * 180e3, nrbg=4)
    m = bs(1, power=4.0, bw=4 * 180e3, nrbg=4)
    u = UserEquipment(0, (0.0, 0.0), 0, 1)
    alloc = RbgAllocation()
    for h in range(4):
        alloc.assign(h, 0, 0)
        alloc.assign(h, 1, 1)
    gains = {(h, 0, s): g * (1 + h + s) for h in range(4) for s in range(2)}
    before = link_capacity(u, b, alloc, ChannelRealization(gains, N0), [m])
    gains[(h_boost, 0, 0)] *= factor
    after = link_capacity(u, b, alloc, ChannelRealization(gains, N0), [m])
    assert after >= before


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1e-14, 1e-9), min_size=1, max_size=5), st.floats(1e-14, 1e-9))
def test_adding_interferer_never_raises_sinr(igains, extra):
    n = len(igains)
    stations = [bs(i) for i in range(n + 2)]
    u = UserEquipment(0, (0.0, 0.0), 0, 1)
    alloc = RbgAllocation()
    for i in range(n + 2):
        alloc.assign(0, i, i)
    gains = {(0, 0, 0): 1e-10}
    gains.update({(0, 0, i + 1): g for i, g in enumerate(igains)})
    gains[(0, 0, n + 1)] = extra
    chan = ChannelRealization(gains, N0)
    without = compute_sinr(0, u, stations[0], stations[1:n + 1], alloc, chan)
    with_ = compute_sinr(0, u, stations[0], stations[1:], alloc, chan)
    assert with_ <= without


def test_radio_map_matches_scalar_route():
    """The vectorised per-carrier SINR/capacity equals the reference functions."""
    rng = np.random.default_rng(9)
    stations = [BaseStation(i, RAT.NR, 20.0, 6 * 200e3, 0.8e9, (300.0 * i, 0.0), 6) for i in range(3)]
    ues = [UserEquipment(u, tuple(rng.uniform(-100, 700, 2)), 0, 0) for u in range(4)]
    rm = RadioMap(stations, ues, np.random.default_rng(1), N0, 8.0)
    gains = rm.draw_fading(np.random.default_rng(3))[0]
    owner = np.array([[0, 0, 1, -1, 2, 3], [3, -1, -1, 1, 1, 0], [2, 2, 2, 2, -1, -1]])
    sinr = rm.sinr(gains, 0, owner)
    cap = rm.capacities(sinr, 0, owner)
    alloc = RbgAllocation()
    for b in range(3):
        alloc.rbg_bandwidth[b] = 200e3
        for h in range(6):
            if owner[b, h] >= 0:
                alloc.assign(h, int(owner[b, h]), b)
    chan = ChannelRealization({(h, u, b): float(gains[b, u, h]) for b in range(3)
                               for u in range(4) for h in range(6)}, N0)
    for b in range(3):
        for u in range(4):
            ref = link_capacity(ues[u], stations[b], alloc, chan, stations)
            assert cap[b, u] == pytest.approx(ref, rel=1e-9)
            for h in alloc.rbgs_of(u, b):
                assert sinr[b, u, h] == pytest.approx(compute_sinr(h, ues[u], stations[b], stations, alloc, chan),
                                                      rel=1e-9)


@pytest.mark.parametrize("nb", [1, 3])
def test_serving_views_match_full_arrays(nb):
    rng = np.random.default_rng(12)
    stations = [BaseStation(i, RAT.NR, 20.0, 6 * 200e3, 0.8e9, (300.0 * i, 0.0), 6) for i in range(nb)]
    ues = [UserEquipment(u, tuple(rng.uniform(-100, 700, 2)), 0, 0) for u in range(5)]
    rm = RadioMap(stations, ues, np.random.default_rng(1), N0, 8.0)
    gains = rm.draw_fading(np.random.default_rng(3))[0]
    serving = np.array([u % nb for u in range(5)])
    owner = -np.ones((nb, 6), dtype=np.int64)
    for b in range(nb):
        mine = [u for u in range(5) if serving[u] == b]
        owner[b, :4] = [mine[h % len(mine)] for h in range(4)]
    full = rm.sinr(gains, 0, owner)
    ss = rm.serving_sinr(gains, 0, owner, serving)
    # the full array subtracts the own signal from total received power, which
    # cancels down to the noise floor; agreement is limited by that rounding
    np.testing.assert_allclose(ss, full[serving, np.arange(5)], rtol=1e-8)
    cap = rm.capacities(full, 0, owner)
    np.testing.assert_allclose(rm.ue_capacities(ss, 0, owner), cap[serving, np.arange(5)], rtol=1e-9)


# -- constraint / delay ------------------------------------------------------

def test_capacity_constraint():
    assert check_capacity_constraint([2e6, 3e6], 5e6)
    assert not check_capacity_constraint([2e6, 3e6], 4.9e6)
    assert check_capacity_constraint([0.0], 0.0)
    assert check_capacity_constraint([2e6, 3e6], 2e6, indicators=[1, 0])


def test_transmission_delay():
    assert transmission_delay(2000, 1e6) == pytest.approx(0.002, rel=1e-9)
    assert transmission_delay(30 * 8, 0.1e6) == pytest.approx(0.0024, rel=1e-9)
    assert transmission_delay(0, 5e6) == 0.0
    assert transmission_delay(100, 0.0) == math.inf


def test_total_delay():
    assert total_delay(7, 7, 1000, 1e6) == pytest.approx(1e-3, rel=1e-9)
    assert total_delay(3, 8, 2000, 1e6, 1e-3) == pytest.approx(7e-3, rel=1e-9)
    with pytest.raises(ValueError):
        total_delay(9, 8, 1, 1.0)


def test_batch_queue_delays_match_packet_replay():
    """Batch queue bookkeeping against a per-packet, per-bit replay."""
    rng = np.random.default_rng(4)
    q = BatchQueue(10_000)
    ref: list[list] = []  # [enq, size, bits_left]
    got, want = [], []
    sizes = [240, 960, 2000]
    for t in range(400):
        for _ in range(int(rng.integers(0, 3))):
            size = sizes[int(rng.integers(3))]
            n = int(rng.integers(1, 5))
            q.push(0, 0, size, t, n)
            ref.extend([t, size, float(size)] for _ in range(n))
        cap = float(rng.uniform(1e5, 4e6))
        for flow, k, size, enq, n in q.serve(cap * 1e-3):
            got.extend([total_delay(enq, t, size, cap)] * n)
        budget = cap * 1e-3
        while ref and budget > 0:
            head = ref[0]
            used = min(budget, head[2])
            head[2] -= used
            budget -= used
            if head[2] <= 1e-9:
                want.append((t - head[0]) * 1e-3 + head[1] / cap)
                ref.pop(0)
        assert q.npkts == len(ref)
    assert len(got) == len(want) > 100
    np.testing.assert_allclose(got, want, rtol=1e-12)


# -- queues / allocation -----------------------------------------------------

def test_packet_queue_fifo_and_drop_newest():
    q = PacketQueue(capacity=3)
    for i in range(5):
        q.push(Packet(i, 0, 8, i))
    assert len(q) == 3 and q.dropped == 2
    assert [q.pop().flow for _ in range(3)] == [0, 1, 2]
    assert q.enqueued - q.dequeued == len(q) == 0


def test_batch_queue_capacity():
    q = BatchQueue(10)
    assert q.push(0, 0, 8, 0, 7) == 0
    assert q.push(0, 0, 8, 0, 7) == 4
    assert q.npkts == 10


def test_allocation_exclusive():
    alloc = RbgAllocation()
    alloc.assign(0, 1, 0)
    with pytest.raises(ValueError):
        alloc.assign(0, 2, 0)
    alloc.assign(0, 2, 1)
    assert alloc.is_exclusive()


def test_base_station_invariants():
    b = BaseStation(0, RAT.LTE, 40.0, 10e6, 3.5e9, (0, 0), 50)
    assert b.rbg_power * b.rbg_count == pytest.approx(40.0)
    assert b.rbg_bandwidth * b.rbg_count == pytest.approx(10e6)
    with pytest.raises(ValueError):
        BaseStation(0, RAT.LTE, 0.0, 10e6, 3.5e9, (0, 0), 50)
    with pytest.raises(ValueError):
        BaseStation(0, RAT.LTE, 1.0, 10e6, 3.5e9, (0, 0), 0)
