from __future__ import annotations

from contextlib import contextmanager
from fractions import Fraction
from itertools import combinations
from pathlib import Path

import pytest

from emsnm.mib import new_mib_store
from emsnm.simengine import Engine, LatencyModel
from emsnm.strategies import ManagedNetwork
from emsnm.topology import build_topology

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"


def make_topology(roles: dict[int, str], links):
    return build_topology({"nodes": roles, "links": links})


def mesh_links(nodes, coeff):
    return [(a, b, coeff) for a, b in combinations(nodes, 2)]


def ring_links(nodes, coeff):
    return [(nodes[i], nodes[(i + 1) % len(nodes)], coeff) for i in range(len(nodes))]


def brute_force_route(links, src, dst):
    """Cheapest simple path by exhaustive DFS; ties to the lexicographically smallest."""
    adj: dict[int, list[tuple[int, Fraction]]] = {}
    for a, b, c in links:
        c = Fraction(c)
        adj.setdefault(a, []).append((b, c))
        adj.setdefault(b, []).append((a, c))
    best = None

    def dfs(node, path, cost):
        nonlocal best
        if node == dst:
            cand = (cost, tuple(path))
            if best is None or cand < best:
                best = cand
            return
        for nbr, c in adj.get(node, ()):
            if nbr not in path:
                path.append(nbr)
                dfs(nbr, path, cost + c)
                path.pop()

    dfs(src, [src], Fraction(0))
    return best


def network_for(topology, seed=1, latency=None, rates=None, int32=("int32.1",), jitter=False):
    engine = Engine(topology, latency or LatencyModel())
    mibs = {
        n: new_mib_store(n, seed, rates=rates, int32_oids=int32, jitter=jitter)
        for n in topology.managed_elements
    }
    return ManagedNetwork(engine, mibs)


@pytest.fixture
def desk_scenario_path():
    return SCENARIOS / "desk.scn"


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Context manager that records a PASS/FAIL line for an acceptance check."""
    verdicts = request.config.stash.setdefault(_VERDICTS, [])

    @contextmanager
    def check(label):
        try:
            yield
        except BaseException:
            line = f"FAIL  {label}"
            verdicts.append(line)
            print(line)
            raise
        line = f"PASS  {label}"
        verdicts.append(line)
        print(line)

    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = config.stash.get(_VERDICTS, [])
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for line in verdicts:
            terminalreporter.write_line(line)
