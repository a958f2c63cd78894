"""Deterministic discrete-event engine with exact traffic accounting.

The clock is in simulated milliseconds. Events fire in ``(time, sequence)``
order, where ``sequence`` is assigned at scheduling time. Every message is
recorded in a :class:`TrafficLedger` with traffic cost
``size * path_coefficient_sum`` as an exact Fraction; latency is a float
derived from that cost by :class:`LatencyModel`.
"""

from __future__ import annotations

import csv
import heapq
import io
import itertools
from collections import defaultdict
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from fractions import Fraction

from emsnm._format import fmt_number
from emsnm.errors import InvalidSize
from emsnm.topology import NetworkTopology, NodeId, as_fraction

TagFilter = str | Callable[[str], bool] | None


@dataclass(frozen=True)
class LatencyModel:
    """``latency_ms = overhead_ms + size * F * ms_per_cost_unit``."""

    overhead_ms: float = 1.0
    ms_per_cost_unit: float = 0.001

    def latency(self, traffic_cost: Fraction) -> float:
        return self.overhead_ms + float(traffic_cost) * self.ms_per_cost_unit


@dataclass(order=True)
class Event:
    time: float
    sequence: int
    action: Callable[[], None] = field(compare=False, repr=False)


@dataclass(frozen=True)
class MessageRecord:
    seq: int
    src: NodeId
    dst: NodeId
    size: Fraction
    path_coefficient_sum: Fraction
    traffic_cost: Fraction
    send_time: float
    arrive_time: float
    tag: str


def tag_matches(tag: str, tag_filter: TagFilter) -> bool:
    """``None`` matches everything; a string matches itself and its ``:`` sub-tags."""
    if tag_filter is None:
        return True
    if callable(tag_filter):
        return bool(tag_filter(tag))
    return tag == tag_filter or tag.startswith(tag_filter + ":")


@dataclass
class TrafficLedger:
    records: list[MessageRecord] = field(default_factory=list)
    totals: dict[str, Fraction] = field(default_factory=lambda: defaultdict(Fraction))

    def append(self, record: MessageRecord) -> None:
        self.records.append(record)
        self.totals[record.tag] += record.traffic_cost

    def total(self, tag_filter: TagFilter = None) -> Fraction:
        return ledger_totals(self, tag_filter)

    def tags(self) -> list[str]:
        return sorted(self.totals)


def ledger_totals(ledger: TrafficLedger, tag_filter: TagFilter = None) -> Fraction:
    return sum((cost for tag, cost in ledger.totals.items() if tag_matches(tag, tag_filter)), Fraction(0))


LEDGER_COLUMNS = (
    "seq",
    "tag",
    "src",
    "dst",
    "size",
    "path_coefficient_sum",
    "traffic_cost",
    "send_time_ms",
    "arrive_time_ms",
)


def ledger_to_csv(records: Iterable[MessageRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LEDGER_COLUMNS)
    for r in records:
        writer.writerow(
            [
                r.seq,
                r.tag,
                r.src,
                r.dst,
                fmt_number(r.size),
                fmt_number(r.path_coefficient_sum),
                fmt_number(r.traffic_cost),
                fmt_number(r.send_time),
                fmt_number(r.arrive_time),
            ]
        )
    return buf.getvalue()


class Engine:
    """Single-threaded event loop over one topology."""

    def __init__(self, topology: NetworkTopology, latency: LatencyModel | None = None):
        self.topology = topology
        self.latency = latency or LatencyModel()
        self.now = 0.0
        self.ledger = TrafficLedger()
        self._queue: list[Event] = []
        self._event_seq = itertools.count()
        self._message_seq = itertools.count()

    @property
    def pending(self) -> int:
        return len(self._queue)

    def schedule(self, at: float, action: Callable[[], None]) -> Event:
        if at < self.now:
            raise ValueError(f"cannot schedule at {at} ms, clock is already {self.now} ms")
        event = Event(float(at), next(self._event_seq), action)
        heapq.heappush(self._queue, event)
        return event

    def send_message(
        self,
        src: NodeId,
        dst: NodeId,
        size,
        tag: str,
        on_deliver: Callable[[MessageRecord], None] | None = None,
    ) -> MessageRecord:
        """Send now along the cheapest route and book its traffic cost.

        Raises:
            InvalidSize: ``size`` is not positive.
            NoPath: either endpoint is unknown or unreachable.
        """
        size = as_fraction(size)
        if size <= 0:
            raise InvalidSize(f"message size must be > 0, got {size}")
        route = self.topology.route(src, dst)
        cost = size * route.cost
        record = MessageRecord(
            seq=next(self._message_seq),
            src=src,
            dst=dst,
            size=size,
            path_coefficient_sum=route.cost,
            traffic_cost=cost,
            send_time=self.now,
            arrive_time=self.now + self.latency.latency(cost),
            tag=tag,
        )
        self.ledger.append(record)
        if on_deliver is None:
            self.schedule(record.arrive_time, _noop)
        else:
            self.schedule(record.arrive_time, lambda: on_deliver(record))
        return record

    def run(self, until: float | None = None) -> float:
        """Process events due at or before ``until`` (all events when None).

        The clock ends at ``until`` if given, otherwise at the last event time.
        """
        if until is not None and until < self.now:
            raise ValueError(f"until={until} is before the current clock {self.now}")
        while self._queue and (until is None or self._queue[0].time <= until):
            event = heapq.heappop(self._queue)
            self.now = event.time
            event.action()
        if until is not None:
            self.now = float(until)
        return self.now


def _noop() -> None:
    pass
