import statistics

import pytest
from hypothesis import assume, given, settings, strategies as st

from batchbackoff.costmodel import (
    ESTIMATION_SLOT_US, CostBreakdown, PacketShape, decompose, detailed_total_time,
    simple_time_of, simple_total_time, transmission_time, worst_station_ack_wait,
)
from batchbackoff.domain import ParameterError, PhaseTag, PolicySpec, SlotRecord, TimingParams
from batchbackoff.engine import Trace, TrialConfig, run_trial

DEF = TimingParams()
SHAPE = PacketShape(64)
P64 = 128 * 8 / 54  # 18.963 us
COLLISION_US = 20 + P64 + 75 + 34
SUCCESS_US = 20 + P64 + 16 + 24 + 34


def _trace(n, *slots, tag=PhaseTag.CONTENTION_WINDOW):
    return Trace(n, tuple(SlotRecord.of(i, tx, tag) for i, tx in enumerate(slots)))


@pytest.mark.parametrize("payload, expected, resolution", [(64, 18.96, 0.005), (1024, 161.2, 0.05)])
def test_transmission_time(payload, expected, resolution):
    p = transmission_time(PacketShape(payload), DEF)
    assert p == (payload + 64) * 8 / 54
    assert abs(p - expected) < resolution


def test_shape_validation():
    assert PacketShape(12).total_bytes == 76
    with pytest.raises(ParameterError):
        PacketShape(11)
    with pytest.raises(ParameterError):
        PacketShape(64, -1)
    with pytest.raises(ParameterError):
        TimingParams(data_rate_mbps=0)


def test_simple_total_time_examples():
    assert simple_total_time(337.5, 0, 19, DEF) == 13_162.5
    assert simple_total_time(0, 886, 19, DEF) == 7_974
    assert simple_total_time(0, 0, 19, DEF) == 0
    with pytest.raises(ParameterError):
        simple_total_time(-1, 0, 19, DEF)


def test_single_success_charge():
    c = detailed_total_time(_trace(1, [0]), SHAPE, DEF)
    assert c.to_dict()["total_us"] == 112.96
    assert c.total_us == pytest.approx(SUCCESS_US)
    assert c.transmission_time_us == c.ack_timeout_time_us == c.cw_slot_time_us == 0


def test_collisions_then_success():
    c = decompose(_trace(2, [0, 1], [0, 1], [0], [1]), SHAPE, DEF)
    assert c.transmission_time_us == pytest.approx(2 * (P64 + 20))
    assert c.total_us == pytest.approx(2 * COLLISION_US + 2 * SUCCESS_US)


def test_one_collision_components():
    c = decompose(_trace(2, [0, 1], [], [0], [1]), SHAPE, DEF)
    assert c.to_dict()["transmission_time_us"] == 38.96
    assert c.ack_timeout_time_us == 75
    assert c.cw_slot_time_us == 9


def test_no_collisions_components():
    c = decompose(_trace(3, [], [2], [0], [], [1]), SHAPE, DEF)
    assert c.transmission_time_us == 0 and c.ack_timeout_time_us == 0
    assert c.cw_slot_time_us == 18


def test_estimation_slots_charged_at_round_duration():
    E = PhaseTag.ESTIMATION
    recs = (SlotRecord.of(0, [0, 1], E), SlotRecord.of(1, [], E), SlotRecord.of(2, [0]),
            SlotRecord.of(3, [1]))
    c = decompose(Trace(2, recs), SHAPE, DEF)
    assert c.estimation_time_us == 2 * ESTIMATION_SLOT_US
    assert c.transmission_time_us == 0


def test_trace_and_stats_agree():
    trace = run_trial(TrialConfig(30, PolicySpec.parse("lb"), 1))
    assert decompose(trace, SHAPE, DEF) == decompose(trace.stats, SHAPE, DEF)


def test_breakdown_json():
    c = decompose(_trace(2, [0, 1], [], [0], [1]), SHAPE, DEF)
    d = c.to_dict()
    assert d["total_us"] == round(c.total_us, 2)
    assert d["transmission_time_us"] == 38.96
    assert CostBreakdown.from_dict(d).total_us == pytest.approx(c.total_us, abs=0.03)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.sampled_from(["beb", "lb", "stb", "fixed:4"]),
       st.integers(0, 2 ** 32), st.integers(12, 2000))
def test_adding_a_collision_adds_exact_charge(n, policy, seed, payload):
    trace = run_trial(TrialConfig(n, PolicySpec.parse(policy), seed))
    shape = PacketShape(payload)
    before = detailed_total_time(trace, shape, DEF).total_us
    # prepend one extra collision slot and shift the rest
    extra = (SlotRecord.of(0, [0, n]),) + tuple(
        SlotRecord(r.slot_index + 1, r.transmitters, r.outcome, r.phase_tag) for r in trace.records)
    after = detailed_total_time(Trace(n + 1, extra + (SlotRecord.of(len(extra), [n]),)),
                                shape, DEF).total_us
    p = transmission_time(shape, DEF)
    success = DEF.preamble_us + p + DEF.sifs_us + DEF.ack_duration_us + DEF.difs_us
    assert after - before - success == pytest.approx(DEF.preamble_us + p + DEF.ack_timeout_us
                                                     + DEF.difs_us)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 30), st.sampled_from(["beb", "llb", "stb", "bestof:5"]),
       st.integers(0, 2 ** 32), st.integers(12, 3000),
       st.floats(1, 50), st.floats(1, 40), st.floats(0.1, 100), st.floats(0.1, 100))
def test_detailed_at_least_simple(n, policy, seed, payload, slot, sifs, gap, ack):
    params = TimingParams(slot_us=slot, sifs_us=sifs, difs_us=sifs + gap, ack_duration_us=ack)
    # an empty CW slot costs slot_us in both models; a success must cover it
    assume(slot <= params.difs_us)
    trace = run_trial(TrialConfig(n, PolicySpec.parse(policy), seed))
    shape = PacketShape(payload)
    assert detailed_total_time(trace, shape, params).total_us >= simple_time_of(trace, shape, params)


def test_payload_scaling_only_moves_transmission_terms():
    trace = run_trial(TrialConfig(50, PolicySpec.parse("beb"), 3))
    a = decompose(trace, PacketShape(64), DEF)
    b = decompose(trace, PacketShape(128), DEF)
    assert a.cw_slot_time_us == b.cw_slot_time_us
    assert a.ack_timeout_time_us == b.ack_timeout_time_us
    assert b.transmission_time_us > a.transmission_time_us
    assert b.success_overhead_us > a.success_overhead_us


def test_simple_model_slope_per_byte():
    # d(total)/d(payload byte) for one collision = 8 / rate
    slope = (simple_total_time(1, 0, transmission_time(PacketShape(1001), DEF), DEF)
             - simple_total_time(1, 0, transmission_time(PacketShape(1000), DEF), DEF))
    assert slope == pytest.approx(8 / DEF.data_rate_mbps, rel=1e-12)


@pytest.fixture(scope="module")
def beb150():
    return [run_trial(TrialConfig(150, PolicySpec.parse("beb", window_cap=1024), 9000 + t)).stats
            for t in range(30)]


def test_beb_150_transmission_and_slots_dwarf_worst_station_wait(beb150):
    # the ACK-timeout component here is the wait of the unluckiest station
    ratio = []
    for s in beb150:
        c = decompose(s, SHAPE, DEF)
        wait = worst_station_ack_wait(s, DEF)
        ratio.append(min(c.transmission_time_us, c.cw_slot_time_us) / (3 * wait))
    assert statistics.median(ratio) > 1


def test_beb_150_detailed_total_near_lower_bound(beb150):
    total = statistics.median(decompose(s, SHAPE, DEF).total_us for s in beb150)
    assert 22_237 / 2 <= total <= 22_237 * 2, f"median detailed total {total:.0f} us"
