"""Per-node management data: a MIB-II counter subset plus generic Integer32 values.

Counters accrue at a configured per-second rate. Accrual is computed from the
store's absolute clock, ``floor(rate * t1) - floor(rate * t0)``, so successive
advances add up exactly to one advance over the combined interval. An
optional seeded jitter adds an extra integer in ``[0, rate)`` per advance.
"""

from __future__ import annotations

import math
import random
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from fractions import Fraction
from types import MappingProxyType

from emsnm.errors import UnknownOid
from emsnm.topology import NodeId, as_fraction

IP_OUT_REQUESTS = "ipOutRequests"
IP_FORW_DATAGRAMS = "ipForwDatagrams"
IP_OUT_DISCARDS = "ipOutDiscards"
IP_OUT_NO_ROUTES = "ipOutNoRoutes"
IP_FRAG_FAILS = "ipFragFails"

HEALTH_COUNTERS = (IP_OUT_DISCARDS, IP_OUT_NO_ROUTES, IP_FRAG_FAILS, IP_OUT_REQUESTS, IP_FORW_DATAGRAMS)

DEFAULT_RATES: Mapping[str, Fraction] = MappingProxyType(
    {
        IP_OUT_REQUESTS: Fraction(90),
        IP_FORW_DATAGRAMS: Fraction(10),
        IP_OUT_DISCARDS: Fraction(5),
        IP_OUT_NO_ROUTES: Fraction(3),
        IP_FRAG_FAILS: Fraction(2),
    }
)

_ALIASES = {"ipForwDatagram": IP_FORW_DATAGRAMS, "ipOutDiscard": IP_OUT_DISCARDS, "ipOutRequest": IP_OUT_REQUESTS}
_INT32 = re.compile(r"int32\.(\d+)\Z")
INT32_MAX = 2**31 - 1


def canonical_oid(name: str) -> str:
    """Map singular spellings (``ipForwDatagram`` etc.) onto the MIB-II names."""
    return _ALIASES.get(name, name)


def is_registered(oid: str) -> bool:
    oid = canonical_oid(oid)
    return oid in HEALTH_COUNTERS or _INT32.match(oid) is not None


def is_counter(oid: str) -> bool:
    return canonical_oid(oid) in HEALTH_COUNTERS


@dataclass(frozen=True)
class SnapshotRow:
    node: NodeId
    values: Mapping[str, int]
    timestamp: Fraction

    def __getitem__(self, oid: str) -> int:
        return self.values[canonical_oid(oid)]


@dataclass(frozen=True)
class MibStore:
    """Immutable MIB table for one node; every mutation returns a new store.

    ``clock`` is simulated seconds since the store was created.
    """

    owner: NodeId
    table: Mapping[str, int]
    rates: Mapping[str, Fraction]
    seed: int
    clock: Fraction = Fraction(0)
    jitter: bool = False

    def __post_init__(self) -> None:
        missing = [oid for oid in HEALTH_COUNTERS if oid not in self.table]
        if missing:
            raise ValueError(f"store for node {self.owner} lacks counters {missing}")
        bad = [oid for oid in self.table if not is_registered(oid)]
        if bad:
            raise UnknownOid(f"unregistered oids {bad}")
        for oid, rate in self.rates.items():
            if rate < 0:
                raise ValueError(f"negative rate for {oid}")
            if oid not in self.table:
                raise UnknownOid(f"rate configured for absent oid {oid}")


def new_mib_store(
    owner: NodeId,
    seed: int,
    rates: Mapping[str, object] | None = None,
    int32_oids: Sequence[str] = (),
    jitter: bool = False,
) -> MibStore:
    """Fresh store at t=0 with all counters zero.

    ``rates`` overrides entries of :data:`DEFAULT_RATES`. Generic ``int32.k``
    values start at a seeded pseudo-random Integer32 and stay fixed unless a
    rate is configured for them.
    """
    table: dict[str, int] = {oid: 0 for oid in HEALTH_COUNTERS}
    rng = random.Random(f"int32-init:{seed}:{owner}")
    for oid in sorted(int32_oids, key=_oid_sort_key):
        if not _INT32.match(oid):
            raise UnknownOid(oid)
        table[oid] = rng.randint(0, INT32_MAX)
    merged = dict(DEFAULT_RATES)
    for oid, rate in (rates or {}).items():
        merged[canonical_oid(oid)] = as_fraction(rate)
    return MibStore(owner=owner, table=table, rates=merged, seed=seed, jitter=jitter)


def _oid_sort_key(oid: str) -> tuple[int, str]:
    m = _INT32.match(oid)
    return (int(m.group(1)), oid) if m else (-1, oid)


def mib_get(store: MibStore, oids: Sequence[str]) -> list[tuple[str, int]]:
    """Read the requested OIDs in request order.

    Raises:
        UnknownOid: an OID is unregistered or absent from this store.
    """
    out = []
    for oid in oids:
        key = canonical_oid(oid)
        if key not in store.table:
            raise UnknownOid(oid)
        out.append((key, store.table[key]))
    return out


def _jitter(store: MibStore, oid: str, rate: Fraction, dt: Fraction) -> int:
    ceiling = math.ceil(rate)
    if ceiling <= 0:
        return 0
    rng = random.Random(f"jitter:{store.seed}:{store.owner}:{oid}:{store.clock}:{dt}")
    # an integer in [0, rate)
    value = rng.randrange(ceiling)
    return value if value < rate else 0


def advance_counters(store: MibStore, dt) -> MibStore:
    """Advance the store's clock by ``dt`` simulated seconds.

    Each OID with a rate grows by ``floor(rate * t1) - floor(rate * t0)``, which
    equals ``floor(rate * dt)`` whenever ``rate * t0`` is whole, plus a seeded
    jitter in ``[0, rate)`` when the store has jitter enabled. Counters never
    decrease.
    """
    dt = as_fraction(dt)
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if dt == 0:
        return store
    t0, t1 = store.clock, store.clock + dt
    table = dict(store.table)
    for oid, rate in store.rates.items():
        inc = math.floor(rate * t1) - math.floor(rate * t0)
        if store.jitter:
            inc += _jitter(store, oid, rate, dt)
        if inc:
            table[oid] = table[oid] + inc
    return replace(store, table=table, clock=t1)


def advance_to(store: MibStore, t) -> MibStore:
    """Advance to absolute simulated time ``t`` (seconds); no-op if already there."""
    t = as_fraction(t)
    if t < store.clock:
        raise ValueError(f"cannot rewind node {store.owner} from {store.clock} to {t}")
    return advance_counters(store, t - store.clock)


def snapshot(store: MibStore) -> SnapshotRow:
    return SnapshotRow(store.owner, MappingProxyType(dict(store.table)), store.clock)
