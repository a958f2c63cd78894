"""Scenario execution and model-versus-simulation comparison.

Timeline of one run (engine clock in ms):

* t = 0: deployment (manager dispatch + EMS discovery) when flat-bed or
  hybrid rounds are selected; plain client/server needs none.
* t = k * sync_interval: every device publishes its changed counters to its
  EMS (only when hybrid rounds are selected).
* t = r * round_period_ms, r = 1..rounds: one management round per selected
  strategy in every domain. Flat-bed and hybrid rounds end with each child
  manager reporting to its mother.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction

from emsnm._format import fmt_number
from emsnm.costmodel import CostBreakdown, CostParams, c_total
from emsnm.emsstore import HEALTH, EmsStore
from emsnm.errors import MismatchError
from emsnm.harness.report import ReportTable
from emsnm.mib import HEALTH_COUNTERS, new_mib_store
from emsnm.simengine import Engine, LatencyModel, TrafficLedger, ledger_totals, tag_matches
from emsnm.strategies import (
    TAG_CS,
    TAG_FLATBED,
    TAG_REPORT,
    TAG_SETUP_EMS,
    TAG_SETUP_MSNLM,
    TAG_SUMMARY,
    TAG_SYNC,
    AgentDescriptor,
    AgentKind,
    ManagedNetwork,
    PollRequestShape,
    Report,
    RoundResult,
    SetupRecord,
    Strategy,
    cs_poll_round,
    deploy_hierarchy,
    flatbed_hop_costs,
    flatbed_round,
    hybrid_round,
    publish_changes,
    report_up,
)
from emsnm.harness.scenario import Scenario
from emsnm.topology import NetworkTopology, NodeId, Partition, build_topology, link_cost_sum, partition_by_size

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StalenessSample:
    """Replica age and value lag of one node at one hybrid query instant.

    ``lag_seconds`` is the largest ``(live - replica) / rate`` over counters
    with a positive rate, i.e. how many seconds of accrual the replica misses.
    """

    time_s: Fraction
    node: NodeId
    staleness_s: Fraction
    lag_seconds: Fraction


@dataclass
class RunResult:
    scenario: Scenario
    topology: NetworkTopology
    partition: Partition
    tables: dict[Strategy, ReportTable]
    ledger: TrafficLedger
    breakdown: CostBreakdown
    strict_breakdown: CostBreakdown
    params: CostParams
    flat_comparable: bool
    rounds: dict[Strategy, list[list[RoundResult]]] = field(default_factory=dict)
    setup: SetupRecord | None = None
    staleness_audit: list[StalenessSample] = field(default_factory=list)
    stores: dict[int, EmsStore] = field(default_factory=dict)


def derive_cost_params(topology: NetworkTopology, partition: Partition, sc: Scenario, convention="per_child") -> tuple[CostParams, bool]:
    """Read the model inputs off a partitioned topology.

    Returns the parameters and whether the flat-bed identity applies: every
    itinerary leg of every non-empty domain must cost the same (uniform KQ)
    and the data agent must not grow. When legs differ, ``rq``/``kq`` are left
    unset and only the hybrid polling cost is defined.
    """
    hierarchy = partition.hierarchy
    f, k0, rq, kq = [], [], [], []
    uniform = True
    for mother in hierarchy.mothers:
        row = []
        for child_id in mother.children:
            domain = partition.domain(child_id)
            row.append(link_cost_sum(topology, mother.host, domain))
            k0.append([topology.path_cost(domain.ems_host, d) for d in domain.devices])
            if domain.devices:
                legs = flatbed_hop_costs(topology, domain.ems_host, domain)
                if len(set(legs)) == 1:
                    rq.append(len(domain.devices))
                    kq.append(legs[0])
                else:
                    uniform = False
        f.append(row)
    params = CostParams(
        ma_size=sc.ma_size,
        mda_size=sc.mda_size,
        ma_res=sc.ma_res,
        s_req=sc.s_req,
        s_res=sc.s_res,
        f=f,
        k0=k0,
        rq=rq if uniform else None,
        kq=kq if uniform else None,
        convention=convention,
    )
    return params, uniform and sc.payload_growth == 0


def run_scenario(sc: Scenario) -> RunResult:
    topology = build_topology(sc.topology)
    partition = partition_by_size(topology, sc.max_domain_size)
    engine = Engine(topology, LatencyModel(sc.overhead_ms, sc.ms_per_cost_unit))

    int32 = sorted({o for o in (*sc.oids, *sc.rates, sc.metric) if o != HEALTH and o not in HEALTH_COUNTERS})
    mibs = {
        n: new_mib_store(n, sc.seed, rates=sc.rates, int32_oids=int32, jitter=sc.jitter)
        for n in topology.managed_elements
    }
    net = ManagedNetwork(engine, mibs)
    selected = [s for s in Strategy if s in sc.strategies]
    shape = PollRequestShape(sc.s_req, sc.s_res)
    data_agent = AgentDescriptor(AgentKind.DATA, sc.mda_size, sc.payload_growth)
    last_round_ms = sc.rounds * sc.round_period_ms

    setup = None
    if Strategy.FLATBED in selected or Strategy.HYBRID in selected:
        setup = deploy_hierarchy(
            net,
            partition,
            AgentDescriptor(AgentKind.MANAGER, sc.ma_size),
            shape,
            sc.sync_interval,
            sc.update_unit_size,
            sc.update_header_size,
        )

    if Strategy.HYBRID in selected:
        interval_ms = float(sc.sync_interval * 1000)
        k = 1
        while k * interval_ms <= last_round_ms:
            engine.schedule(k * interval_ms, lambda: _sync_all(net, partition))
            k += 1

    rounds: dict[Strategy, list[list[RoundResult]]] = {s: [] for s in selected}
    audit: list[StalenessSample] = []

    def start_round() -> None:
        for strategy in selected:
            if strategy is Strategy.CS:
                rounds[strategy].append(
                    [cs_poll_round(net, d.ems_host, d.devices, sc.oids, shape) for d in partition.domains]
                )
            else:
                rounds[strategy].append(_managed_round(net, partition, sc, strategy, data_agent, audit))

    for r in range(1, sc.rounds + 1):
        engine.schedule(r * sc.round_period_ms, start_round)
    engine.run()

    tables = {s: ReportTable.from_rounds(s.value, rounds[s]) for s in selected}
    params, flat_ok = derive_cost_params(topology, partition, sc)
    strict_params, _ = derive_cost_params(topology, partition, sc, convention="strict")
    breakdown = _with_sync(c_total(params, "hybrid", include_setup=True), engine.ledger)
    strict = _with_sync(c_total(strict_params, "hybrid", include_setup=True), engine.ledger)
    logger.info("scenario %s: %d records, total traffic %s", sc.name, len(engine.ledger.records), engine.ledger.total())
    return RunResult(
        scenario=sc,
        topology=topology,
        partition=partition,
        tables=tables,
        ledger=engine.ledger,
        breakdown=breakdown,
        strict_breakdown=strict,
        params=params,
        flat_comparable=flat_ok,
        rounds=rounds,
        setup=setup,
        staleness_audit=audit,
        stores=dict(sorted(net.ems.items())),
    )


def _with_sync(breakdown: CostBreakdown, ledger: TrafficLedger) -> CostBreakdown:
    return replace(breakdown, c_sync=ledger_totals(ledger, TAG_SYNC))


def _summary(result: RoundResult | None):
    if result is None:
        return ()
    return tuple(sorted(result.values.items()))


def _managed_round(
    net: ManagedNetwork,
    partition: Partition,
    sc: Scenario,
    strategy: Strategy,
    data_agent: AgentDescriptor,
    audit: list[StalenessSample],
) -> list[RoundResult]:
    """One flat-bed or hybrid round in every domain, then child reports once all are in."""
    hierarchy = partition.hierarchy
    tag = f"{TAG_REPORT}:{strategy.value}"
    summary_tag = f"{TAG_SUMMARY}:{strategy.value}"
    # flat-bed skips domains with nothing to visit
    active = [d for d in partition.domains if d.devices or strategy is Strategy.HYBRID]
    finished: dict[int, RoundResult] = {}
    results: list[RoundResult] = []

    def domain_done(res: RoundResult, domain_id: int) -> None:
        finished[domain_id] = res
        if len(finished) == len(active):
            reports = [Report(c.id, c.mother, sc.ma_res, _summary(finished.get(c.domain_id))) for c in hierarchy.children]
            report_up(net, hierarchy, reports, tag=tag, summary_tag=summary_tag)

    if not active:
        reports = [Report(c.id, c.mother, sc.ma_res) for c in hierarchy.children]
        report_up(net, hierarchy, reports, tag=tag, summary_tag=summary_tag)
    for domain in active:
        if strategy is Strategy.FLATBED:
            results.append(
                flatbed_round(
                    net,
                    domain.ems_host,
                    domain,
                    sc.oids,
                    data_agent,
                    on_complete=lambda r, d=domain.id: domain_done(r, d),
                )
            )
        else:
            store = net.ems[domain.id]
            res = hybrid_round(net, domain.ems_host, store, sc.metric, local_query_ms=sc.local_query_ms)
            _audit(net, store, res, audit)
            results.append(res)
            domain_done(res, domain.id)
    return results


def _sync_all(net: ManagedNetwork, partition: Partition) -> None:
    for domain in partition.domains:
        for device in domain.devices:
            publish_changes(net, domain, device)


def _audit(net: ManagedNetwork, store: EmsStore, res: RoundResult, audit: list[StalenessSample]) -> None:
    now = net.now_s
    for node, age in res.staleness.items():
        live = net.live(node)
        replica = store.rows[node].values
        lag = Fraction(0)
        for oid, rate in live.rates.items():
            if rate > 0 and oid in replica:
                lag = max(lag, Fraction(live.table[oid] - replica[oid]) / rate)
        audit.append(StalenessSample(now, node, age, lag))


# --------------------------------------------------------------------------
# model vs simulation


@dataclass(frozen=True)
class ComparisonEntry:
    name: str
    simulated: Fraction | None
    model: Fraction | None
    status: str  # "equal", "MISMATCH", "skipped" or "info"
    note: str = ""


@dataclass
class ComparisonRecord:
    entries: list[ComparisonEntry]

    @property
    def mismatches(self) -> list[ComparisonEntry]:
        return [e for e in self.entries if e.status == "MISMATCH"]

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def to_text(self) -> str:
        lines = []
        for e in self.entries:
            line = f"{e.name:<24} {e.status:<9} simulated={fmt_number(e.simulated)} model={fmt_number(e.model)}"
            if e.note:
                line += f"  # {e.note}"
            lines.append(line.rstrip())
        lines.append(f"result: {'PASS' if self.ok else 'FAIL'}")
        return "\n".join(lines) + "\n"


def _has_tag(ledger: TrafficLedger, tag: str) -> bool:
    return any(tag_matches(t, tag) for t in ledger.totals)


def compare_model_vs_sim(
    ledger: TrafficLedger,
    breakdown: CostBreakdown,
    rounds: int = 1,
    flat_comparable: bool = True,
    strict: bool = True,
) -> ComparisonRecord:
    """Check simulated ledger totals against the closed-form costs, exactly.

    Polling totals are compared against ``rounds`` times the per-round model
    cost. Sections whose tags are absent from the ledger are skipped; sync
    and client/server traffic are listed for information only.

    Raises:
        MismatchError: on the first unequal pair, when ``strict`` is set.
    """
    entries: list[ComparisonEntry] = []

    def check(name: str, tags: list[str], model: Fraction | None, present_tag: str, skip_note: str | None = None) -> None:
        if not _has_tag(ledger, present_tag):
            entries.append(ComparisonEntry(name, None, model, "skipped", f"no {present_tag} records"))
            return
        simulated = sum((ledger_totals(ledger, t) for t in tags), Fraction(0))
        if skip_note or model is None:
            entries.append(ComparisonEntry(name, simulated, model, "skipped", skip_note or "model term undefined"))
            return
        status = "equal" if simulated == model else "MISMATCH"
        entry = ComparisonEntry(name, simulated, model, status)
        entries.append(entry)
        if status == "MISMATCH" and strict:
            raise MismatchError(name, simulated, model)

    check("setup:msnlm", [TAG_SETUP_MSNLM], breakdown.c_msnlm, TAG_SETUP_MSNLM)
    check("setup:ems", [TAG_SETUP_EMS], breakdown.c_ems, TAG_SETUP_EMS)
    flat_model = None if breakdown.c_mgmttr_flat is None else breakdown.c_mgmttr_flat * rounds
    check(
        "mgmt:flatbed+report",
        [TAG_FLATBED, f"{TAG_REPORT}:flatbed"],
        flat_model,
        TAG_FLATBED,
        None if flat_comparable else "non-uniform domain coefficients or growing agent",
    )
    check("mgmt:report:hybrid", [f"{TAG_REPORT}:hybrid"], breakdown.c_mgmttr_hybrid * rounds, f"{TAG_REPORT}:hybrid")
    if _has_tag(ledger, TAG_CS):
        entries.append(ComparisonEntry("mgmt:cs", ledger_totals(ledger, TAG_CS), None, "info", "client/server, outside the model"))
    if _has_tag(ledger, TAG_SYNC):
        entries.append(ComparisonEntry("sync", ledger_totals(ledger, TAG_SYNC), None, "info", "publish/subscribe upkeep, kept out of hybrid polling cost"))
    return ComparisonRecord(entries)


def compare_run(result: RunResult, strict: bool = False) -> ComparisonRecord:
    return compare_model_vs_sim(
        result.ledger, result.breakdown, rounds=result.scenario.rounds, flat_comparable=result.flat_comparable, strict=strict
    )

