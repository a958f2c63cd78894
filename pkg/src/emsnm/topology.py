"""Managed network model: weighted links, routing, domain partitioning.

Link coefficients are dimensionless cost weights kept as exact
``Fraction`` values so every traffic figure derived from them stays exact.
Routes are minimum coefficient-sum paths; ties go to the lexicographically
smallest node-id sequence.
"""

from __future__ import annotations

import enum
import heapq
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from emsnm.errors import (
    DisconnectedTopology,
    DuplicateNode,
    NegativeCoefficient,
    NoPath,
    NotOversized,
    TopologyError,
)

NodeId = int


class Role(str, enum.Enum):
    GNM = "gnm"
    MOTHER = "mother"
    ELEMENT = "element"


def as_fraction(value: Any) -> Fraction:
    """Convert ints, decimal strings, floats and fractions to an exact Fraction.

    Floats go through their shortest repr so ``0.1`` becomes ``1/10``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite number: {value!r}")
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class Link:
    endpoint_a: NodeId
    endpoint_b: NodeId
    coefficient: Fraction

    def __post_init__(self) -> None:
        if self.endpoint_a == self.endpoint_b:
            raise TopologyError(f"self-loop on node {self.endpoint_a}")
        if self.coefficient < 0:
            raise NegativeCoefficient(
                f"link {self.endpoint_a}-{self.endpoint_b} has coefficient {self.coefficient}"
            )


@dataclass(frozen=True)
class Route:
    cost: Fraction
    nodes: tuple[NodeId, ...]

    @property
    def hops(self) -> int:
        return len(self.nodes) - 1


@dataclass(frozen=True, eq=False)
class NetworkTopology:
    """Validated, immutable network. Build it with :func:`build_topology`."""

    nodes: tuple[NodeId, ...]
    links: tuple[Link, ...]
    host_roles: Mapping[NodeId, Role]
    _adjacency: Mapping[NodeId, tuple[tuple[NodeId, Fraction], ...]] = field(repr=False)
    _routes: dict[NodeId, dict[NodeId, Route]] = field(default_factory=dict, repr=False)

    @property
    def gnm(self) -> NodeId:
        return next(n for n in self.nodes if self.host_roles[n] is Role.GNM)

    @property
    def managed_elements(self) -> tuple[NodeId, ...]:
        return tuple(n for n in self.nodes if self.host_roles[n] is Role.ELEMENT)

    @property
    def mother_hosts(self) -> tuple[NodeId, ...]:
        return tuple(n for n in self.nodes if self.host_roles[n] is Role.MOTHER)

    def neighbors(self, node: NodeId) -> tuple[tuple[NodeId, Fraction], ...]:
        return self._adjacency[node]

    def routes_from(self, src: NodeId) -> Mapping[NodeId, Route]:
        if src not in self._adjacency:
            raise NoPath(f"unknown node {src}")
        table = self._routes.get(src)
        if table is None:
            table = _shortest_paths(self._adjacency, src)
            self._routes[src] = table
        return table

    def route(self, src: NodeId, dst: NodeId) -> Route:
        if dst not in self._adjacency:
            raise NoPath(f"unknown node {dst}")
        try:
            return self.routes_from(src)[dst]
        except KeyError:
            raise NoPath(f"no path {src} -> {dst}") from None

    def path_cost(self, src: NodeId, dst: NodeId) -> Fraction:
        return self.route(src, dst).cost


def _shortest_paths(
    adjacency: Mapping[NodeId, Sequence[tuple[NodeId, Fraction]]], src: NodeId
) -> dict[NodeId, Route]:
    # Heap entries compare by (cost, path), so the first pop of a node is its
    # cheapest route and, among equal-cost routes, the lexicographically smallest.
    settled: dict[NodeId, Route] = {}
    heap: list[tuple[Fraction, tuple[NodeId, ...]]] = [(Fraction(0), (src,))]
    while heap:
        cost, path = heapq.heappop(heap)
        node = path[-1]
        if node in settled:
            continue
        settled[node] = Route(cost, path)
        for nbr, weight in adjacency[node]:
            if nbr not in settled:
                heapq.heappush(heap, (cost + weight, path + (nbr,)))
    return settled


def build_topology(layout: Mapping[str, Any]) -> NetworkTopology:
    """Validate a parsed topology description and return a NetworkTopology.

    ``layout["nodes"]`` is either a mapping ``{id: role}`` or a sequence of
    ``(id, role)`` pairs; ``layout["links"]`` is a sequence of
    ``(a, b, coefficient)`` triples. Exactly one node must have role ``gnm``
    and every node must be reachable from it.

    Raises:
        DuplicateNode: a node id is listed twice.
        NegativeCoefficient: a link has a coefficient below zero.
        DisconnectedTopology: some node is unreachable from the GNM host.
        TopologyError: any other structural problem (unknown endpoint,
            self-loop, wrong number of GNM hosts, bad role).
    """
    raw_nodes = layout.get("nodes", ())
    pairs = list(raw_nodes.items()) if isinstance(raw_nodes, Mapping) else list(raw_nodes)

    roles: dict[NodeId, Role] = {}
    for node_id, role in pairs:
        node_id = int(node_id)
        if node_id < 0:
            raise TopologyError(f"node ids must be non-negative, got {node_id}")
        if node_id in roles:
            raise DuplicateNode(f"node {node_id} listed twice")
        try:
            roles[node_id] = Role(role)
        except ValueError:
            raise TopologyError(f"node {node_id}: unknown role {role!r}") from None

    gnms = [n for n, r in roles.items() if r is Role.GNM]
    if len(gnms) != 1:
        raise TopologyError(f"expected exactly one gnm host, found {len(gnms)}")

    links = []
    for a, b, coeff in layout.get("links", ()):
        link = Link(int(a), int(b), as_fraction(coeff))
        for end in (link.endpoint_a, link.endpoint_b):
            if end not in roles:
                raise TopologyError(f"link references unknown node {end}")
        links.append(link)

    adjacency: dict[NodeId, list[tuple[NodeId, Fraction]]] = {n: [] for n in sorted(roles)}
    for link in links:
        adjacency[link.endpoint_a].append((link.endpoint_b, link.coefficient))
        adjacency[link.endpoint_b].append((link.endpoint_a, link.coefficient))
    frozen_adj = {n: tuple(sorted(nbrs)) for n, nbrs in adjacency.items()}

    topo = NetworkTopology(
        nodes=tuple(sorted(roles)),
        links=tuple(links),
        host_roles=dict(sorted(roles.items())),
        _adjacency=frozen_adj,
    )
    reachable = _reachable(frozen_adj, gnms[0])
    missing = [n for n in topo.nodes if n not in reachable]
    if missing:
        raise DisconnectedTopology(f"nodes unreachable from gnm {gnms[0]}: {missing}")
    return topo


def _reachable(adjacency: Mapping[NodeId, Sequence[tuple[NodeId, Fraction]]], start: NodeId) -> set[NodeId]:
    seen = {start}
    stack = [start]
    while stack:
        node = stack.pop()
        for nbr, _ in adjacency[node]:
            if nbr not in seen:
                seen.add(nbr)
                stack.append(nbr)
    return seen


# --------------------------------------------------------------------------
# partitioning and manager hierarchy


@dataclass(frozen=True)
class Domain:
    id: int
    members: tuple[NodeId, ...]
    ems_host: NodeId
    parent_manager: int

    def __post_init__(self) -> None:
        if not self.members:
            raise TopologyError(f"domain {self.id} has no members")
        if self.ems_host not in self.members:
            raise TopologyError(f"domain {self.id}: ems_host {self.ems_host} is not a member")

    @property
    def devices(self) -> tuple[NodeId, ...]:
        """Members managed from the EMS host, i.e. everything but the host itself."""
        return tuple(n for n in self.members if n != self.ems_host)


@dataclass(frozen=True)
class MotherManager:
    id: int
    host: NodeId
    children: tuple[int, ...]


@dataclass(frozen=True)
class ChildManager:
    id: int
    host: NodeId
    domain_id: int
    mother: int


@dataclass(frozen=True)
class ManagerHierarchy:
    gnm: NodeId
    mothers: tuple[MotherManager, ...]
    children: tuple[ChildManager, ...]

    @property
    def L(self) -> int:
        return len(self.mothers)

    def mother(self, mother_id: int) -> MotherManager:
        for m in self.mothers:
            if m.id == mother_id:
                return m
        raise KeyError(mother_id)

    def child(self, child_id: int) -> ChildManager:
        for c in self.children:
            if c.id == child_id:
                return c
        raise KeyError(child_id)


@dataclass(frozen=True)
class Partition:
    domains: tuple[Domain, ...]
    hierarchy: ManagerHierarchy

    def domain(self, domain_id: int) -> Domain:
        for d in self.domains:
            if d.id == domain_id:
                return d
        raise KeyError(domain_id)


def _blocks(items: Sequence[NodeId], size: int) -> list[tuple[NodeId, ...]]:
    return [tuple(items[i : i + size]) for i in range(0, len(items), size)]


def partition_by_size(topology: NetworkTopology, max_domain_size: int) -> Partition:
    """Split the managed elements into contiguous ascending-id domains.

    Each domain holds at most ``max_domain_size`` elements and its EMS host is
    its lowest node id. Mother managers are the ``mother``-role hosts (or the
    GNM host alone when there are none); domains are dealt to mothers in
    contiguous blocks of ``ceil(domains / mothers)``. Each domain gets one child
    manager, co-located with its EMS host, whose id equals the domain id.
    """
    if max_domain_size < 1:
        raise ValueError("max_domain_size must be >= 1")

    mother_hosts = topology.mother_hosts or (topology.gnm,)
    blocks = _blocks(topology.managed_elements, max_domain_size)
    per_mother = math.ceil(len(blocks) / len(mother_hosts)) if blocks else 0

    domains = []
    for i, members in enumerate(blocks):
        domains.append(Domain(id=i, members=members, ems_host=members[0], parent_manager=i // per_mother))

    mothers = tuple(
        MotherManager(id=h, host=host, children=tuple(d.id for d in domains if d.parent_manager == h))
        for h, host in enumerate(mother_hosts)
    )
    children = tuple(ChildManager(id=d.id, host=d.ems_host, domain_id=d.id, mother=d.parent_manager) for d in domains)
    return Partition(tuple(domains), ManagerHierarchy(topology.gnm, mothers, children))


def spawn_split(domain: Domain, max_domain_size: int, first_id: int | None = None) -> list[Domain]:
    """Split an oversized domain into contiguous child domains.

    Child ids count up from ``first_id`` (default: the parent's id); the caller
    keeps them unique within its partition.

    Raises:
        NotOversized: the domain already fits within ``max_domain_size``.
    """
    if max_domain_size < 1:
        raise ValueError("max_domain_size must be >= 1")
    if len(domain.members) <= max_domain_size:
        raise NotOversized(f"domain {domain.id} has {len(domain.members)} members, limit {max_domain_size}")
    start = domain.id if first_id is None else first_id
    ordered = sorted(domain.members)
    return [
        Domain(id=start + k, members=block, ems_host=block[0], parent_manager=domain.parent_manager)
        for k, block in enumerate(_blocks(ordered, max_domain_size))
    ]


def link_cost_sum(topology: NetworkTopology, mother_host: NodeId, child_domain: Domain) -> Fraction:
    """Summed coefficients on the cheapest path from a mother host to a domain's EMS host."""
    return topology.path_cost(mother_host, child_domain.ems_host)

