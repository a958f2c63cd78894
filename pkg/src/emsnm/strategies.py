"""Management strategies driven by the event engine.

* client/server polling: one request and one response per target;
* flat-bed itinerary: a data agent hops home -> n1 -> ... -> nR -> home;
* hybrid: the co-located manager queries the EMS replica, no messages;
* deployment of managers and EMS discovery, and child-to-mother reports.

Round functions start work at the engine's current time and return a
:class:`RoundResult` that fills in as the engine delivers messages. Call
``engine.run()`` to finish a round; ``on_complete`` fires once it is done.
"""

from __future__ import annotations

import enum
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from emsnm.emsstore import (
    HEALTH,
    EmsStore,
    UpdateEvent,
    apply_update,
    ingest_snapshot,
    new_ems_store,
    query_aggregate,
    staleness,
    update_message_size,
)
from emsnm.errors import EmptyDomain, InvalidSize, UnknownEdge
from emsnm.mib import MibStore, SnapshotRow, advance_to, mib_get, snapshot
from emsnm.simengine import Engine, MessageRecord
from emsnm.topology import Domain, ManagerHierarchy, NetworkTopology, NodeId, Partition, as_fraction

TAG_CS = "mgmt:cs"
TAG_FLATBED = "mgmt:flatbed"
TAG_REPORT = "mgmt:report"
TAG_SUMMARY = "mgmt:summary"
TAG_SETUP_MSNLM = "setup:msnlm"
TAG_SETUP_EMS = "setup:ems"
TAG_SYNC = "sync"


class Strategy(str, enum.Enum):
    CS = "cs"
    FLATBED = "flatbed"
    HYBRID = "hybrid"


class AgentKind(str, enum.Enum):
    MANAGER = "manager-agent"
    DATA = "data-agent"


@dataclass(frozen=True)
class AgentDescriptor:
    kind: AgentKind
    base_size: int
    payload_growth: int = 0

    def __post_init__(self) -> None:
        if self.base_size <= 0:
            raise InvalidSize("agent base_size must be > 0")
        if self.payload_growth < 0:
            raise InvalidSize("agent payload_growth must be >= 0")


@dataclass(frozen=True)
class PollRequestShape:
    request_size: int
    response_size: int

    def __post_init__(self) -> None:
        if self.request_size <= 0 or self.response_size <= 0:
            raise InvalidSize("request and response sizes must be > 0")


@dataclass(frozen=True)
class Report:
    from_: int
    to: int
    size: int
    summary: Any = None

    def __post_init__(self) -> None:
        if self.size <= 0:
            raise InvalidSize("report size must be > 0")


@dataclass
class RoundResult:
    strategy: Strategy
    started_at: float
    per_node_latency: dict[NodeId, float] = field(default_factory=dict)
    values: dict[NodeId, Any] = field(default_factory=dict)
    round_traffic: Fraction = Fraction(0)
    records: list[MessageRecord] = field(default_factory=list)
    staleness: dict[NodeId, Fraction] = field(default_factory=dict)
    done: bool = False

    def _book(self, record: MessageRecord) -> None:
        self.records.append(record)
        self.round_traffic += record.traffic_cost


@dataclass
class TrafficRecord:
    """Traffic booked by a setup or reporting step."""

    traffic: Fraction = Fraction(0)
    records: list[MessageRecord] = field(default_factory=list)
    gnm_summaries: dict[int, list[Any]] = field(default_factory=dict)

    def _book(self, record: MessageRecord) -> None:
        self.records.append(record)
        self.traffic += record.traffic_cost


@dataclass
class SetupRecord:
    msnlm: TrafficRecord = field(default_factory=TrafficRecord)
    ems: TrafficRecord = field(default_factory=TrafficRecord)
    done: bool = False


class ManagedNetwork:
    """Engine plus the live MIB of every managed node and each domain's EMS store.

    MIBs are advanced lazily to the engine clock whenever they are read.
    """

    def __init__(self, engine: Engine, mibs: Mapping[NodeId, MibStore]):
        self.engine = engine
        self.mibs: dict[NodeId, MibStore] = dict(mibs)
        self.ems: dict[int, EmsStore] = {}
        self.published: dict[NodeId, dict[str, int]] = {}
        self._update_seq = 0

    @property
    def topology(self) -> NetworkTopology:
        return self.engine.topology

    @property
    def now_s(self) -> Fraction:
        return as_fraction(self.engine.now) / 1000

    def live(self, node: NodeId) -> MibStore:
        store = advance_to(self.mibs[node], self.now_s)
        self.mibs[node] = store
        return store

    def read(self, node: NodeId, oids: Sequence[str]) -> list[tuple[str, int]]:
        return mib_get(self.live(node), oids)

    def read_snapshot(self, node: NodeId) -> SnapshotRow:
        return snapshot(self.live(node))

    def next_update_sequence(self) -> int:
        self._update_seq += 1
        return self._update_seq


def _check_reachable(topology: NetworkTopology, src: NodeId, dsts: Sequence[NodeId]) -> None:
    for dst in dsts:
        topology.route(src, dst)


def cs_poll_round(
    net: ManagedNetwork,
    manager: NodeId,
    targets: Sequence[NodeId],
    oids: Sequence[str],
    shape: PollRequestShape,
    tag: str = TAG_CS,
    on_complete: Callable[[RoundResult], None] | None = None,
) -> RoundResult:
    """Issue one get request to every target at once and collect the responses.

    Per-node latency is request latency plus response latency; traffic is
    ``(S_req + S_res) * F`` summed over targets.
    """
    engine = net.engine
    _check_reachable(net.topology, manager, targets)
    result = RoundResult(Strategy.CS, engine.now)
    start = engine.now
    outstanding = len(targets)

    def finish() -> None:
        result.done = True
        if on_complete:
            on_complete(result)

    def poll(target: NodeId) -> None:
        def at_agent(_req: MessageRecord) -> None:
            values = net.read(target, oids)

            def at_manager(resp: MessageRecord) -> None:
                nonlocal outstanding
                result.values[target] = values
                result.per_node_latency[target] = resp.arrive_time - start
                outstanding -= 1
                if outstanding == 0:
                    finish()

            result._book(engine.send_message(target, manager, shape.response_size, tag, at_manager))

        result._book(engine.send_message(manager, target, shape.request_size, tag, at_agent))

    for target in targets:
        poll(target)
    if not targets:
        finish()
    return result


def flatbed_itinerary(home: NodeId, domain: Domain) -> list[NodeId]:
    return sorted(n for n in domain.members if n != home)


def flatbed_round(
    net: ManagedNetwork,
    home: NodeId,
    itinerary_domain: Domain,
    oids: Sequence[str],
    agent: AgentDescriptor,
    tag: str = TAG_FLATBED,
    on_complete: Callable[[RoundResult], None] | None = None,
) -> RoundResult:
    """Send one data agent around the domain in ascending node order and back.

    The agent visits every member except ``home``. Hop ``h`` carries
    ``base_size + payload_growth * visited_so_far``; per-node latency is the
    agent's arrival time at that node measured from departure.

    Raises:
        EmptyDomain: there is nothing to visit.
        NoPath: some hop has no route.
    """
    if agent.kind is not AgentKind.DATA:
        raise ValueError("flat-bed rounds need a data-agent")
    stops = flatbed_itinerary(home, itinerary_domain)
    if not stops:
        raise EmptyDomain(f"domain {itinerary_domain.id} has no nodes to visit from {home}")
    legs = list(zip([home, *stops], [*stops, home]))
    for a, b in legs:
        net.topology.route(a, b)

    engine = net.engine
    result = RoundResult(Strategy.FLATBED, engine.now)
    start = engine.now

    def hop(index: int) -> None:
        src, dst = legs[index]
        size = agent.base_size + agent.payload_growth * index

        def arrive(rec: MessageRecord) -> None:
            if index == len(legs) - 1:
                result.done = True
                if on_complete:
                    on_complete(result)
                return
            result.per_node_latency[dst] = rec.arrive_time - start
            result.values[dst] = net.read(dst, oids)
            hop(index + 1)

        result._book(engine.send_message(src, dst, size, tag, arrive))

    hop(0)
    return result


def flatbed_hop_costs(topology: NetworkTopology, home: NodeId, domain: Domain) -> list[Fraction]:
    """Path coefficient sum of each itinerary leg, including the return hop."""
    stops = flatbed_itinerary(home, domain)
    legs = zip([home, *stops], [*stops, home])
    return [topology.path_cost(a, b) for a, b in legs]


def hybrid_round(
    net: ManagedNetwork,
    msnlm_host: NodeId,
    store: EmsStore,
    metric: str = HEALTH,
    nodes: Sequence[NodeId] | None = None,
    local_query_ms: float = 1.0,
    on_complete: Callable[[RoundResult], None] | None = None,
) -> RoundResult:
    """Answer from the EMS replica; sends nothing.

    ``nodes`` defaults to the store's devices (every member but the host), so a
    store that has not been discovered yet raises NoRow.
    """
    if msnlm_host != store.host:
        raise ValueError(f"manager at {msnlm_host} is not co-located with the EMS at {store.host}")
    selected = store.devices if nodes is None else tuple(nodes)
    engine = net.engine
    result = RoundResult(Strategy.HYBRID, engine.now)
    now_s = net.now_s
    for q in query_aggregate(store, selected, metric):
        result.values[q.node] = q
        result.per_node_latency[q.node] = local_query_ms
        result.staleness[q.node] = staleness(store, q.node, now_s)
    result.done = True
    if on_complete:
        on_complete(result)
    return result


def deploy_hierarchy(
    net: ManagedNetwork,
    partition: Partition,
    agent: AgentDescriptor,
    shape: PollRequestShape,
    sync_interval=5,
    update_unit_size: int = 20,
    update_header_size: int = 40,
    on_complete: Callable[[SetupRecord], None] | None = None,
) -> SetupRecord:
    """Dispatch child managers and let every EMS discover its devices.

    (a) each mother sends one manager agent of ``agent.base_size`` to the EMS
    host of each of its child domains (tag ``setup:msnlm``); (b) each EMS host
    exchanges one request/response with each of its devices over the
    intra-domain route and ingests the snapshot (tag ``setup:ems``). The two
    components are booked separately.
    """
    if agent.kind is not AgentKind.MANAGER:
        raise ValueError("deployment needs a manager-agent")
    topology = net.topology
    hierarchy = partition.hierarchy
    for mother in hierarchy.mothers:
        for child_id in mother.children:
            topology.route(mother.host, partition.domain(child_id).ems_host)
    for domain in partition.domains:
        _check_reachable(topology, domain.ems_host, domain.devices)

    engine = net.engine
    setup = SetupRecord()
    outstanding = 0

    def settle() -> None:
        nonlocal outstanding
        outstanding -= 1
        if outstanding == 0:
            setup.done = True
            if on_complete:
                on_complete(setup)

    for mother in hierarchy.mothers:
        for child_id in mother.children:
            outstanding += 1
            dst = partition.domain(child_id).ems_host
            setup.msnlm._book(engine.send_message(mother.host, dst, agent.base_size, TAG_SETUP_MSNLM, lambda _r: settle()))

    for domain in partition.domains:
        net.ems[domain.id] = new_ems_store(domain, sync_interval, update_unit_size, update_header_size)
        for device in domain.devices:
            outstanding += 1

            def discover(device: NodeId = device, domain: Domain = domain) -> None:
                def at_device(_req: MessageRecord) -> None:
                    row = net.read_snapshot(device)

                    def at_ems(_resp: MessageRecord) -> None:
                        net.ems[domain.id] = ingest_snapshot(net.ems[domain.id], row)
                        net.published[device] = dict(row.values)
                        settle()

                    setup.ems._book(engine.send_message(device, domain.ems_host, shape.response_size, TAG_SETUP_EMS, at_ems))

                setup.ems._book(engine.send_message(domain.ems_host, device, shape.request_size, TAG_SETUP_EMS, at_device))

            discover()

    if outstanding == 0:
        setup.done = True
        if on_complete:
            on_complete(setup)
    return setup


def publish_changes(net: ManagedNetwork, domain: Domain, device: NodeId, tag: str = TAG_SYNC) -> MessageRecord | None:
    """Publish the device's changed OIDs to its EMS; returns None when nothing changed.

    The message is ``header + unit * |changed|`` cost-bytes; the EMS applies the
    update on delivery with the publish (send) time as its timestamp.
    """
    if device not in net.published:
        return None
    row = net.read_snapshot(device)
    last = net.published[device]
    changed = tuple((oid, v) for oid, v in row.values.items() if last.get(oid) != v)
    if not changed:
        return None
    ev = UpdateEvent(device, changed, row.timestamp, net.next_update_sequence())
    net.published[device] = dict(row.values)
    size = update_message_size(net.ems[domain.id], ev)

    def deliver(_rec: MessageRecord) -> None:
        net.ems[domain.id] = apply_update(net.ems[domain.id], ev)

    return net.engine.send_message(device, domain.ems_host, size, tag, deliver)


def report_up(
    net: ManagedNetwork,
    hierarchy: ManagerHierarchy,
    reports: Sequence[Report],
    tag: str = TAG_REPORT,
    summary_tag: str = TAG_SUMMARY,
    on_complete: Callable[[TrafficRecord], None] | None = None,
) -> TrafficRecord:
    """Send each child's report to its mother, then one summary per mother to the GNM.

    Report traffic is ``F_hj * report.size`` per report, where ``F_hj`` is the
    route cost between the child's host and its mother's host; ``F_hj(MA_res)``
    is read as a product. Summary messages are booked under ``summary_tag`` and
    are not part of the returned traffic.

    Raises:
        UnknownEdge: a report names a child/mother pair that is not in the hierarchy.
    """
    edges = {(c.id, c.mother) for c in hierarchy.children}
    for rep in reports:
        if (rep.from_, rep.to) not in edges:
            raise UnknownEdge(f"no manager edge {rep.from_} -> {rep.to}")

    engine = net.engine
    record = TrafficRecord()
    pending: dict[int, list[Report]] = {}
    waiting: dict[int, int] = {}
    for rep in reports:
        waiting[rep.to] = waiting.get(rep.to, 0) + 1
    remaining = len(waiting)

    def mother_done(mother_id: int) -> None:
        mother = hierarchy.mother(mother_id)
        batch = pending[mother_id]

        def at_gnm(_rec: MessageRecord) -> None:
            nonlocal remaining
            record.gnm_summaries[mother_id] = [r.summary for r in batch]
            remaining -= 1
            if remaining == 0 and on_complete:
                on_complete(record)

        engine.send_message(mother.host, hierarchy.gnm, max(r.size for r in batch), summary_tag, at_gnm)

    for rep in reports:
        child = hierarchy.child(rep.from_)
        mother = hierarchy.mother(rep.to)

        def at_mother(_rec: MessageRecord, rep: Report = rep) -> None:
            pending.setdefault(rep.to, []).append(rep)
            waiting[rep.to] -= 1
            if waiting[rep.to] == 0:
                mother_done(rep.to)

        record._book(engine.send_message(child.host, mother.host, rep.size, tag, at_mother))

    if not reports and on_complete:
        on_complete(record)
    return record

