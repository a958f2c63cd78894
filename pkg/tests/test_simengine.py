from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emsnm.errors import InvalidSize, NoPath
from emsnm.simengine import Engine, LatencyModel, MessageRecord, TrafficLedger, ledger_to_csv, ledger_totals

from conftest import make_topology, mesh_links


@pytest.fixture
def pair():
    return make_topology({0: "gnm", 1: "element"}, [(0, 1, 1)])


def rec(cost, tag, seq=0):
    return MessageRecord(seq, 0, 1, Fraction(cost), Fraction(1), Fraction(cost), 0.0, 1.0, tag)


def test_single_message_latency_and_cost(pair):
    eng = Engine(pair, LatencyModel(1.0, 0.001))
    r = eng.send_message(0, 1, 100, "t")
    assert r.traffic_cost == 100
    assert r.arrive_time - r.send_time == pytest.approx(1.1)


@pytest.mark.parametrize("size", [0, -5])
def test_non_positive_size(pair, size):
    with pytest.raises(InvalidSize):
        Engine(pair).send_message(0, 1, size, "t")


def test_message_to_self(pair):
    r = Engine(pair).send_message(1, 1, 100, "t")
    assert r.traffic_cost == 0
    assert r.arrive_time == 1.0


def test_unknown_destination(pair):
    with pytest.raises(NoPath):
        Engine(pair).send_message(0, 7, 1, "t")


def test_empty_run_advances_clock(pair):
    eng = Engine(pair)
    assert eng.run(100) == 100
    assert eng.ledger.records == []


def test_same_time_events_run_in_schedule_order(pair):
    eng = Engine(pair)
    seen = []
    eng.schedule(5, lambda: seen.append("a"))
    eng.schedule(5, lambda: seen.append("b"))
    eng.schedule(1, lambda: seen.append("first"))
    eng.run()
    assert seen == ["first", "a", "b"]


def test_cannot_schedule_in_the_past(pair):
    eng = Engine(pair)
    eng.run(10)
    with pytest.raises(ValueError):
        eng.schedule(5, lambda: None)


def test_delivery_callback_fires_at_arrival(pair):
    eng = Engine(pair)
    times = []
    eng.send_message(0, 1, 1000, "t", lambda r: times.append((eng.now, r.arrive_time)))
    eng.run()
    assert times == [(2.0, 2.0)]


def ping_pong(eng, n):
    # a chain of replies, each triggered by the previous delivery
    def bounce(r):
        if r.seq < n:
            eng.send_message(r.dst, r.src, 100 + r.seq, "pp", bounce)

    eng.send_message(0, 1, 100, "pp", bounce)
    eng.schedule(3.3, lambda: eng.send_message(1, 0, 7, "side"))


def test_split_run_matches_single_run(pair):
    a, b = Engine(pair), Engine(pair)
    ping_pong(a, 12)
    ping_pong(b, 12)
    a.run(4.0)
    a.run(9.5)
    a.run()
    b.run()
    assert a.ledger.records == b.ledger.records


def test_totals_no_records():
    assert ledger_totals(TrafficLedger()) == 0


def test_totals_one_tag():
    led = TrafficLedger()
    led.append(rec(200, "x"))
    led.append(rec(400, "x"))
    assert ledger_totals(led, "x") == 600


def test_totals_filter_excluding_everything():
    led = TrafficLedger()
    led.append(rec(200, "x"))
    assert ledger_totals(led, "nothing") == 0


def test_tag_filter_matches_subtags():
    led = TrafficLedger()
    for cost, tag in [(1, "setup:ems"), (2, "setup:msnlm"), (4, "setupx"), (8, "mgmt:cs")]:
        led.append(rec(cost, tag))
    assert ledger_totals(led, "setup") == 3
    assert ledger_totals(led, lambda t: t.startswith("mgmt")) == 8


def test_ledger_csv_has_one_line_per_record(pair):
    eng = Engine(pair)
    ping_pong(eng, 3)
    eng.run()
    lines = ledger_to_csv(eng.ledger.records).splitlines()
    assert lines[0].startswith("seq,tag")
    assert len(lines) == 1 + len(eng.ledger.records)


sends = st.lists(
    st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(1, 5000), st.sampled_from(["a", "b:c", "b:d"]), st.integers(0, 50)),
    max_size=30,
)


@settings(max_examples=80, deadline=None)
@given(sends)
def test_conservation_monotone_clock_and_record_invariants(batch):
    topo = make_topology({0: "gnm", 1: "element", 2: "element", 3: "element"}, mesh_links([0, 1, 2, 3], Fraction(1, 3)))
    eng = Engine(topo)
    clock = []
    for src, dst, size, tag, at in batch:
        eng.schedule(at, lambda s=src, d=dst, z=size, t=tag: (clock.append(eng.now), eng.send_message(s, d, z, t, lambda _r: clock.append(eng.now))))
    eng.run()
    assert clock == sorted(clock)
    records = eng.ledger.records
    assert sum(ledger_totals(eng.ledger, t) for t in eng.ledger.tags()) == sum((r.traffic_cost for r in records), Fraction(0))
    for r in records:
        assert r.traffic_cost == r.size * r.path_coefficient_sum
        assert r.arrive_time >= r.send_time
    for tag in eng.ledger.tags():
        assert eng.ledger.totals[tag] == sum((r.traffic_cost for r in records if r.tag == tag), Fraction(0))


@settings(max_examples=30, deadline=None)
@given(sends)
def test_identical_schedules_give_identical_ledgers(batch):
    topo = make_topology({0: "gnm", 1: "element", 2: "element", 3: "element"}, mesh_links([0, 1, 2, 3], 2))

    def play():
        eng = Engine(topo)
        for src, dst, size, tag, at in batch:
            eng.schedule(at, lambda s=src, d=dst, z=size, t=tag: eng.send_message(s, d, z, t))
        eng.run()
        return eng.ledger.records

    assert play() == play()
