"""EMS-platform replica of a domain's MIB counters.

The store is filled once by discovery (:func:`ingest_snapshot`) and then kept
fresh by published change sets (:func:`apply_update`). Aggregate queries,
including the discarded-packet health function, run against the replica only
and never contact a managed node.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from fractions import Fraction
from types import MappingProxyType

from emsnm._format import fmt_number
from emsnm.errors import ForeignNode, NoRow, UnknownSource, ZeroDenominator
from emsnm.mib import (
    HEALTH_COUNTERS,
    IP_FORW_DATAGRAMS,
    IP_FRAG_FAILS,
    IP_OUT_DISCARDS,
    IP_OUT_NO_ROUTES,
    IP_OUT_REQUESTS,
    SnapshotRow,
    canonical_oid,
)
from emsnm.topology import Domain, NodeId, as_fraction

HEALTH = "health"


@dataclass(frozen=True)
class StoredRow:
    node: NodeId
    values: Mapping[str, int]
    as_of: Fraction
    sequence: int = -1


@dataclass(frozen=True)
class UpdateEvent:
    source: NodeId
    changed: tuple[tuple[str, int], ...]
    publish_time: Fraction
    sequence: int = 0

    def __post_init__(self) -> None:
        if not self.changed:
            raise ValueError("update event must carry at least one changed oid")


@dataclass(frozen=True)
class HealthResult:
    node: NodeId | None
    e_t: Fraction
    as_of: Fraction | None


@dataclass(frozen=True)
class QueryResult:
    """One row of an aggregate query; ``error`` names the failure when ``value`` is None."""

    node: NodeId
    metric: str
    value: Fraction | int | None
    as_of: Fraction
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class EmsStore:
    domain_id: int
    host: NodeId
    members: tuple[NodeId, ...]
    rows: Mapping[NodeId, StoredRow] = field(default_factory=dict)
    sync_interval: Fraction = Fraction(5)
    update_unit_size: int = 20
    update_header_size: int = 40

    @property
    def devices(self) -> tuple[NodeId, ...]:
        return tuple(n for n in self.members if n != self.host)


def new_ems_store(
    domain: Domain, sync_interval=5, update_unit_size: int = 20, update_header_size: int = 40
) -> EmsStore:
    return EmsStore(
        domain_id=domain.id,
        host=domain.ems_host,
        members=domain.members,
        rows=MappingProxyType({}),
        sync_interval=as_fraction(sync_interval),
        update_unit_size=update_unit_size,
        update_header_size=update_header_size,
    )


def _with_row(store: EmsStore, row: StoredRow) -> EmsStore:
    rows = dict(store.rows)
    rows[row.node] = row
    return replace(store, rows=MappingProxyType(dict(sorted(rows.items()))))


def ingest_snapshot(store: EmsStore, row: SnapshotRow) -> EmsStore:
    """Store a discovery snapshot, replacing any earlier row for that node."""
    if row.node not in store.members:
        raise ForeignNode(f"node {row.node} is not in domain {store.domain_id}")
    return _with_row(store, StoredRow(row.node, MappingProxyType(dict(row.values)), as_fraction(row.timestamp)))


def update_message_size(store: EmsStore, ev: UpdateEvent) -> int:
    return store.update_header_size + store.update_unit_size * len(ev.changed)


def apply_update(store: EmsStore, ev: UpdateEvent) -> EmsStore:
    """Overwrite the published OIDs of an already-discovered node.

    Last write wins by ``(publish_time, sequence)``; an event older than the
    stored row is ignored.
    """
    current = store.rows.get(ev.source)
    if current is None:
        raise UnknownSource(f"node {ev.source} has not been discovered in domain {store.domain_id}")
    publish_time = as_fraction(ev.publish_time)
    if (publish_time, ev.sequence) < (current.as_of, current.sequence):
        return store
    values = dict(current.values)
    for oid, value in ev.changed:
        values[canonical_oid(oid)] = value
    return _with_row(store, StoredRow(ev.source, MappingProxyType(values), publish_time, ev.sequence))


def health_function(row) -> HealthResult:
    """Percentage of IP packets discarded over packets sent.

    ``row`` is a snapshot row, a stored row, or a plain OID->value mapping.
    The result is an exact Fraction:
    ``(discards + noRoutes + fragFails) / (outRequests + forwDatagrams) * 100``.

    Raises:
        ZeroDenominator: no packets were sent.
    """
    if isinstance(row, Mapping):
        values, node, as_of = row, None, None
    else:
        values = row.values
        node = row.node
        as_of = getattr(row, "as_of", None)
        if as_of is None:
            as_of = getattr(row, "timestamp", None)
    values = {canonical_oid(k): v for k, v in values.items()}
    sent = values[IP_OUT_REQUESTS] + values[IP_FORW_DATAGRAMS]
    if sent == 0:
        raise ZeroDenominator(f"node {node}: ipOutRequests + ipForwDatagrams == 0")
    lost = values[IP_OUT_DISCARDS] + values[IP_OUT_NO_ROUTES] + values[IP_FRAG_FAILS]
    return HealthResult(node, Fraction(lost, sent) * 100, as_of)


def query_aggregate(store: EmsStore, nodes: Iterable[NodeId] | None, metric: str) -> list[QueryResult]:
    """Evaluate ``metric`` (``"health"`` or an OID) for each selected node.

    ``nodes=None`` selects every stored row. A zero denominator on one node is
    reported in that node's result rather than aborting the query.

    Raises:
        NoRow: a selected node has never been discovered.
    """
    selected = sorted(store.rows) if nodes is None else list(nodes)
    out = []
    for node in selected:
        row = store.rows.get(node)
        if row is None:
            raise NoRow(f"no row for node {node} in domain {store.domain_id}")
        if metric == HEALTH:
            try:
                value = health_function(row).e_t
            except ZeroDenominator:
                out.append(QueryResult(node, metric, None, row.as_of, error="ZeroDenominator"))
                continue
            out.append(QueryResult(node, metric, value, row.as_of))
        else:
            oid = canonical_oid(metric)
            if oid not in row.values:
                out.append(QueryResult(node, oid, None, row.as_of, error="UnknownOid"))
            else:
                out.append(QueryResult(node, oid, row.values[oid], row.as_of))
    return out


def staleness(store: EmsStore, node: NodeId, now) -> Fraction:
    """Seconds since the node's row was last refreshed."""
    row = store.rows.get(node)
    if row is None:
        raise NoRow(f"no row for node {node} in domain {store.domain_id}")
    age = as_fraction(now) - row.as_of
    if age < 0:
        raise ValueError(f"query time {now} precedes row timestamp {row.as_of}")
    return age


def to_csv(store: EmsStore, columns: Sequence[str] = HEALTH_COUNTERS) -> str:
    """One line per stored node: node id, the counter columns, as_of."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["node", *columns, "as_of"])
    for node, row in store.rows.items():
        writer.writerow([node, *(row.values.get(c, "") for c in columns), fmt_number(row.as_of)])
    return buf.getvalue()
