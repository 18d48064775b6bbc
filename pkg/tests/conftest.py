import math

import numpy as np
import pytest

from truckplatoon.coordination import CoordinationGraph
from truckplatoon.road_network import RoadNetwork, generate_random_network
from truckplatoon.trucking import FuelParams, TransportAssignment

PARAMS = FuelParams()  # F0=1, F1=1/80, Fp = 0.9 F


def chain_network(lengths, coords=None):
    """Nodes 0..n on a line, both directions, segment k of length lengths[k]."""
    n = len(lengths) + 1
    if coords is None:
        xs = np.concatenate(([0.0], np.cumsum(lengths)))
        coords = np.column_stack((xs, np.zeros(n)))
    w = {}
    for k, L in enumerate(lengths):
        w[(k, k + 1)] = L
        w[(k + 1, k)] = L
    return RoadNetwork(coords, w)


def truck(net, tid, s, d, t_start, speed=80.0):
    path = net.shortest_path(s, d)
    return TransportAssignment(tid, s, d, t_start, t_start + path.total_length / speed, path)


def random_graph(rng, k, density=0.4, integer=False):
    fol, lead, w = [], [], []
    for i in range(k):
        for j in range(k):
            if i != j and rng.random() < density:
                fol.append(i)
                lead.append(j)
                w.append(float(rng.integers(1, 10)) if integer else float(rng.uniform(0.1, 10.0)))
    return CoordinationGraph(k, fol, lead, w)


@pytest.fixture(scope="session")
def net10():
    return generate_random_network(10, 800.0, 1.5, seed=42)


@pytest.fixture(scope="session")
def net100():
    return generate_random_network(100, 800.0, 1.5, seed=7)


def rel_close(a, b, rtol):
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1e-300) or a == b


def isclose(a, b, tol=1e-9):
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)


def random_trucks(net, k, seed, terminals=10, interval=1.0):
    rng = np.random.default_rng(seed)
    term = rng.choice(net.num_nodes, terminals, replace=False)
    out = []
    for tid in range(k):
        s, d = (int(x) for x in rng.choice(term, 2, replace=False))
        out.append(truck(net, tid, s, d, float(rng.uniform(0, interval))))
    return out


def feasible_pairs(net, count, seed, v_min=70.0, v_max=90.0, params=PARAMS, k=80):
    """Up to ``count`` (leader, follower, plan) triples with a plan, in a fixed order."""
    from truckplatoon.pairwise import adapted_plan

    out = []
    trucks = random_trucks(net, k, seed)
    for f in trucks:
        for l in trucks:
            if f is l:
                continue
            plan = adapted_plan(l, f, net, params, v_min, v_max)
            if plan is not None:
                out.append((l, f, plan))
                if len(out) >= count:
                    return out
    return out


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
