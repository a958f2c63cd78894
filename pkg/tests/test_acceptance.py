"""One test per acceptance criterion; each prints a PASS/FAIL line."""

import random
import time
from dataclasses import replace
from fractions import Fraction
from itertools import combinations

from hypothesis import given, settings
from hypothesis import strategies as st

from emsnm.costmodel import CostParams, c_ems, c_msnlm, c_total
from emsnm.emsstore import health_function
from emsnm.errors import ZeroDenominator
from emsnm.harness import cli
from emsnm.harness.runner import compare_run, run_scenario
from emsnm.harness.scenario import Scenario, load_scenario
from emsnm.mib import HEALTH_COUNTERS
from emsnm.strategies import TAG_FLATBED, AgentDescriptor, AgentKind, Strategy, flatbed_round

from conftest import SCENARIOS, make_topology, network_for, ring_links
from emsnm.topology import partition_by_size

# two mothers with three child domains each; rows are mothers, columns children
F_MATRIX = [[2, 3, Fraction(5, 2)], [1, 4, 7]]
GNM, MOTHERS = 100, (101, 102)
DOMAIN_SIZE = 3


def two_level_topology():
    roles = {GNM: "gnm", **{m: "mother" for m in MOTHERS}}
    links = [(GNM, m, 1) for m in MOTHERS]
    for h, row in enumerate(F_MATRIX):
        for j, f in enumerate(row):
            first = (h * len(row) + j) * DOMAIN_SIZE
            members = list(range(first, first + DOMAIN_SIZE))
            roles.update({n: "element" for n in members})
            links.append((MOTHERS[h], members[0], f))
            links += [(a, b, 1) for a, b in combinations(members, 2)]
    return {"nodes": roles, "links": links}


def test_ac1_setup_ledger_equals_cost_model(criterion):
    with criterion("AC1 setup ledger == c_msnlm and c_ems (exact)"):
        t0 = time.perf_counter()
        sc = Scenario(topology=two_level_topology(), seed=1, strategies=(Strategy.HYBRID,), rounds=1,
                      max_domain_size=DOMAIN_SIZE, ma_size=1000, s_req=100, s_res=100)
        result = run_scenario(sc)
        elapsed = time.perf_counter() - t0

        # oracle: enumerate the deployment messages by hand
        dispatch = [(MOTHERS[h], f, 1000) for h, row in enumerate(F_MATRIX) for f in row]
        discovery = [(100 + 100) * 1 for _domain in range(6) for _device in range(DOMAIN_SIZE - 1)]
        want_msnlm = sum(f * size for _m, f, size in dispatch)
        want_ems = sum(discovery)

        h = result.partition.hierarchy
        assert h.L == 2 and [len(m.children) for m in h.mothers] == [3, 3]
        assert result.params.f == tuple(tuple(Fraction(x) for x in row) for row in F_MATRIX)
        sim_msnlm, sim_ems = result.ledger.total("setup:msnlm"), result.ledger.total("setup:ems")
        assert sim_msnlm == want_msnlm == c_msnlm(result.params) == 19500
        assert sim_ems == want_ems == c_ems(result.params) == 2400
        assert elapsed < 1.0, f"took {elapsed:.3f} s"


def flatbed_traffic(rq, kq, mda=1000):
    nodes = list(range(rq + 1))
    links = ring_links(nodes, kq) if rq > 1 else [(0, 1, kq)]
    topo = make_topology({99: "gnm", **{n: "element" for n in nodes}}, [(99, 0, 1), *links])
    part = partition_by_size(topo, rq + 1)
    net = network_for(topo)
    r = flatbed_round(net, 0, part.domains[0], ["int32.1"], AgentDescriptor(AgentKind.DATA, mda, 0))
    net.engine.run()
    assert r.done and r.round_traffic == net.engine.ledger.total(TAG_FLATBED)
    return r.round_traffic


def test_ac2_flatbed_round_matches_closed_form(criterion):
    with criterion("AC2 flat-bed ledger == MDASize*(RQ+1)*KQ, RQ 1..50, KQ {0,1,2,10}"):
        mesh_nodes = [0, 1, 2, 3]
        topo = make_topology({99: "gnm", **{n: "element" for n in mesh_nodes}},
                             [(99, 0, 1), *[(a, b, 2) for a, b in combinations(mesh_nodes, 2)]])
        net = network_for(topo)
        r = flatbed_round(net, 0, partition_by_size(topo, 4).domains[0], ["int32.1"], AgentDescriptor(AgentKind.DATA, 1000))
        net.engine.run()
        assert net.engine.ledger.total(TAG_FLATBED) == r.round_traffic == 8000

        failures = [(rq, kq) for rq in range(1, 51) for kq in (0, 1, 2, 10) if flatbed_traffic(rq, kq) != 1000 * (rq + 1) * kq]
        assert not failures, failures


def test_ac3_health_function_matches_direct_oracle(criterion):
    with criterion("AC3 health function vs direct oracle, 1000 rows, rel err <= 1e-12"):
        rng = random.Random(7)
        worst = 0.0
        for _ in range(1000):
            lost = [rng.randrange(0, 2**31) for _ in range(3)]
            sent = [rng.randrange(0, 2**31) for _ in range(2)]
            if sum(sent) == 0:
                sent[0] = 1
            got = float(health_function(dict(zip(HEALTH_COUNTERS, lost + sent))).e_t)
            want = 100.0 * (lost[0] + lost[1] + lost[2]) / (sent[0] + sent[1])
            if want:
                worst = max(worst, abs(got - want) / want)
            else:
                assert got == 0
        assert worst <= 1e-12, worst

        for requests, forw in [(1, 0), (0, 1), (123, 456)]:
            zero = dict(zip(HEALTH_COUNTERS, (0, 0, 0, requests, forw)))
            assert health_function(zero).e_t == 0
        try:
            health_function(dict.fromkeys(HEALTH_COUNTERS, 0) | {"ipOutDiscards": 4})
        except ZeroDenominator:
            pass
        else:
            raise AssertionError("zero denominator was not guarded")


def test_ac4_desk_run_latency_ordering(criterion):
    with criterion("AC4 desk run: hybrid < client/server < flat-bed mean latency, < 5 s"):
        t0 = time.perf_counter()
        result = run_scenario(load_scenario(SCENARIOS / "desk.scn"))
        elapsed = time.perf_counter() - t0
        mean = {s: t.overall_mean for s, t in result.tables.items()}
        assert result.tables[Strategy.CS].nodes == (1, 2, 3)
        assert all(len(t.rows) == 50 for t in result.tables.values())
        assert mean[Strategy.HYBRID] < mean[Strategy.CS] < mean[Strategy.FLATBED], mean
        assert elapsed < 5.0, f"took {elapsed:.3f} s"


def sweep_topology(n_devices, domains=3, intra=1):
    """Wheel-shaped domains (EMS hub plus a device chain) joined by 10x links."""
    inter = 10 * intra
    gnm = 10**6
    roles = {gnm: "gnm"}
    links = []
    hosts = []
    for d in range(domains):
        first = d * (n_devices + 1)
        host, devices = first, list(range(first + 1, first + n_devices + 1))
        hosts.append(host)
        roles.update({n: "element" for n in (host, *devices)})
        links += [(host, x, intra) for x in devices]
        links += [(a, b, intra) for a, b in zip(devices, devices[1:])]
        links.append((gnm, host, inter))
    links += [(a, b, inter) for a, b in zip(hosts, hosts[1:])]
    return {"nodes": roles, "links": links}


def test_ac5_scaling_and_crossover(criterion):
    with criterion("AC5 sweep N 3/10/50/100: hybrid constant, flat and C/S at least linear, hybrid <= flat"):
        sweep = (3, 10, 50, 100)
        hybrid, flat, cs = [], [], []
        for n in sweep:
            sc = Scenario(topology=sweep_topology(n), seed=3, rounds=2, max_domain_size=n + 1)
            result = run_scenario(sc)
            assert len(result.partition.domains) == 3
            assert compare_run(result, strict=True).ok
            b = result.breakdown
            hybrid.append(b.c_mgmttr_hybrid)
            flat.append(b.c_mgmttr_flat)
            cs.append(result.ledger.total("mgmt:cs") / sc.rounds)
        assert len(set(hybrid)) == 1, hybrid
        assert all(h <= f for h, f in zip(hybrid, flat))
        for series in (flat, cs):
            slopes = [(b - a) / (n2 - n1) for a, b, n1, n2 in zip(series, series[1:], sweep, sweep[1:])]
            assert slopes[0] > 0 and slopes == sorted(slopes), (series, slopes)


def test_ac6_same_seed_gives_identical_csv(criterion, tmp_path):
    with criterion("AC6 same scenario and seed give byte-identical CSV outputs"):
        scenario = tmp_path / "jittery.scn"
        scenario.write_text((SCENARIOS / "desk.scn").read_text() + "jitter = on\n")
        for path in (SCENARIOS / "desk.scn", scenario):
            outs = []
            for run in ("a", "b"):
                out = tmp_path / f"{path.stem}-{run}"
                assert cli.main([str(path), "--rounds", "20", "-o", str(out)]) == 0
                outs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
            assert outs[0] == outs[1]
            assert len(outs[0]) >= 6


def test_ac7_replica_staleness_bound(criterion):
    with criterion("AC7 hybrid staleness <= 5 s and value lag <= 5 s of accrual"):
        base = load_scenario(SCENARIOS / "desk.scn")
        for period in (1000.0, 700.0, 2500.0):
            sc = replace(base, strategies=(Strategy.HYBRID,), round_period_ms=period, rounds=40)
            assert sc.sync_interval == 5
            audit = run_scenario(sc).staleness_audit
            assert audit
            assert max(s.staleness_s for s in audit) <= 5
            for s in audit:
                assert s.lag_seconds <= 5, s
        # value accrual is only bounded without jitter; the age bound holds either way
        sc = replace(base, strategies=(Strategy.HYBRID,), jitter=True, rounds=40)
        assert max(s.staleness_s for s in run_scenario(sc).staleness_audit) <= 5


coeff = st.fractions(min_value=0, max_value=30, max_denominator=10)
size = st.integers(1, 10**6)


@st.composite
def cost_params(draw):
    f = [draw(st.lists(coeff, min_size=1, max_size=4)) for _ in range(draw(st.integers(0, 3)))]
    children = sum(len(r) for r in f)
    return CostParams(
        ma_size=draw(size), mda_size=draw(size), ma_res=draw(size), s_req=draw(size), s_res=draw(size),
        f=f, k0=[draw(st.lists(coeff, max_size=6)) for _ in range(children)],
        rq=draw(st.lists(st.integers(0, 100), min_size=children, max_size=children)),
        kq=draw(st.lists(coeff, min_size=children, max_size=children)),
        convention=draw(st.sampled_from(["per_child", "strict"])),
    )


OUTPUTS = ("c_msnlm", "c_ems", "c_setup", "c_mgmttr_flat", "c_mgmttr_hybrid", "c_mgmttr", "c_total")


@settings(max_examples=300, deadline=None)
@given(cost_params())
def _doubling_property(p):
    for strategy in ("flat", "hybrid"):
        for include_setup in (True, False):
            a, b = c_total(p, strategy, include_setup), c_total(p.scaled(2), strategy, include_setup)
            for name in OUTPUTS:
                assert getattr(b, name) == 2 * getattr(a, name), name
            assert b.per_domain_cq == tuple(2 * x for x in a.per_domain_cq)


def test_ac8_doubling_sizes_doubles_every_cost(criterion):
    with criterion("AC8 doubling all sizes doubles every cost output (model and ledger)"):
        _doubling_property()
        base = Scenario(topology=two_level_topology(), seed=1, rounds=3, max_domain_size=DOMAIN_SIZE)
        doubled = replace(base, **{k: 2 * getattr(base, k) for k in ("ma_size", "mda_size", "ma_res", "s_req", "s_res")})
        a, b = run_scenario(base), run_scenario(doubled)
        for tag in ("setup:msnlm", "setup:ems", "mgmt:flatbed", "mgmt:report", "mgmt:cs"):
            assert b.ledger.total(tag) == 2 * a.ledger.total(tag), tag
        for name in OUTPUTS:
            assert getattr(b.breakdown, name) == 2 * getattr(a.breakdown, name), name
