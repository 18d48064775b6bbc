"""Road network: a weighted directed graph of locations and one-way segments."""

from __future__ import annotations

import heapq
import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

RNG_ALGORITHM = "numpy.random.PCG64 (seeded through numpy.random.SeedSequence)"

Edge = Tuple[int, int]


class Unreachable(Exception):
    """No path exists between the requested nodes."""


class OrderViolation(ValueError):
    """The second position precedes the first one on the path."""


class OverlapNotContiguous(Exception):
    """Two shortest paths share edges that do not form a single run."""


class RoadNetwork:
    """Immutable weighted digraph with planar node coordinates.

    Nodes are ``0..n-1``.  ``weights`` maps an edge ``(i, j)`` to its length.
    """

    def __init__(self, coords, weights: Dict[Edge, float]):
        coords = np.array(coords, dtype=float).reshape(-1, 2)
        coords.setflags(write=False)
        n = len(coords)
        adj: List[List[Tuple[int, float]]] = [[] for _ in range(n)]
        w: Dict[Edge, float] = {}
        for (i, j), wij in weights.items():
            i, j, wij = int(i), int(j), float(wij)
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValueError(f"bad edge ({i}, {j})")
            if not wij > 0:
                raise ValueError(f"edge ({i}, {j}) has non-positive weight {wij}")
            w[(i, j)] = wij
            adj[i].append((j, wij))
        for lst in adj:
            lst.sort()
        self._coords = coords
        self._weights = w
        self._adj = tuple(tuple(lst) for lst in adj)
        self._sp_cache: Dict[Edge, Path] = {}

    @property
    def coords(self) -> np.ndarray:
        return self._coords

    @property
    def num_nodes(self) -> int:
        return len(self._coords)

    @property
    def edges(self) -> List[Edge]:
        return sorted(self._weights)

    @property
    def num_edges(self) -> int:
        return len(self._weights)

    def weight(self, i: int, j: int) -> float:
        return self._weights[(i, j)]

    def has_edge(self, i: int, j: int) -> bool:
        return (i, j) in self._weights

    def successors(self, i: int) -> Tuple[Tuple[int, float], ...]:
        return self._adj[i]

    def euclidean(self, i: int, j: int) -> float:
        dx, dy = self._coords[i] - self._coords[j]
        return math.hypot(dx, dy)

    def shortest_path(self, source: int, target: int) -> "Path":
        key = (source, target)
        path = self._sp_cache.get(key)
        if path is None:
            path = shortest_path(self, source, target)
            self._sp_cache[key] = path
        return path

    def __eq__(self, other):
        if not isinstance(other, RoadNetwork):
            return NotImplemented
        return np.array_equal(self._coords, other._coords) and self._weights == other._weights

    def __repr__(self):
        return f"RoadNetwork(num_nodes={self.num_nodes}, num_edges={self.num_edges})"


@dataclass(frozen=True)
class PathPosition:
    edge_index: int
    offset: float


@dataclass(frozen=True)
class Path:
    """A node sequence with the lengths of the edges between consecutive nodes."""

    nodes: Tuple[int, ...]
    weights: Tuple[float, ...]

    def __post_init__(self):
        if len(self.nodes) != len(self.weights) + 1 or not self.weights:
            raise ValueError("a path needs at least one edge and len(nodes) == len(weights) + 1")
        starts = [0.0]
        for w in self.weights[:-1]:
            starts.append(starts[-1] + w)
        object.__setattr__(self, "_starts", tuple(starts))

    @classmethod
    def from_nodes(cls, net: RoadNetwork, nodes: Sequence[int]) -> "Path":
        nodes = tuple(int(n) for n in nodes)
        return cls(nodes, tuple(net.weight(a, b) for a, b in zip(nodes, nodes[1:])))

    @property
    def edges(self) -> Tuple[Edge, ...]:
        return tuple(zip(self.nodes, self.nodes[1:]))

    @property
    def num_edges(self) -> int:
        return len(self.weights)

    @property
    def total_length(self) -> float:
        return sum(self.weights)

    @property
    def edge_starts(self) -> Tuple[float, ...]:
        """Arc length at the beginning of every edge."""
        return self._starts

    def arc_length(self, pos: PathPosition) -> float:
        return self._starts[pos.edge_index] + pos.offset

    def position_at(self, s: float) -> PathPosition:
        """Canonical position at arc length ``s`` from the start of the path.

        A position at the very end of an edge is reported as offset 0 on the
        following edge, except on the last edge.
        """
        total = self.total_length
        if s < 0 or s > total * (1 + 1e-12):
            raise ValueError(f"arc length {s} outside [0, {total}]")
        k = min(bisect_right(self._starts, s) - 1, self.num_edges - 1)
        offset = min(max(s - self._starts[k], 0.0), self.weights[k])
        return canonical(self, PathPosition(k, offset))

    @property
    def start(self) -> PathPosition:
        return PathPosition(0, 0.0)

    @property
    def end(self) -> PathPosition:
        return PathPosition(self.num_edges - 1, self.weights[-1])


def canonical(path: Path, pos: PathPosition) -> PathPosition:
    k, x = pos.edge_index, pos.offset
    if not 0 <= k < path.num_edges:
        raise IndexError(f"edge index {k} outside path with {path.num_edges} edges")
    if x < 0 or x > path.weights[k]:
        raise ValueError(f"offset {x} outside [0, {path.weights[k]}]")
    if x == path.weights[k] and k < path.num_edges - 1:
        return PathPosition(k + 1, 0.0)
    return PathPosition(k, float(x))


def path_distance(path: Path, a: PathPosition, b: PathPosition) -> float:
    """Distance between two positions along ``path`` (``a`` not after ``b``)."""
    if b.edge_index < a.edge_index:
        raise OrderViolation(f"{b} precedes {a} on the path")
    return abs(b.offset - a.offset + sum(path.weights[a.edge_index:b.edge_index]))


def shortest_path(net: RoadNetwork, source: int, target: int) -> Path:
    """Dijkstra with lexicographically smallest node sequence on ties."""
    if source == target:
        raise ValueError("source and target must differ")
    n = net.num_nodes
    if not (0 <= source < n and 0 <= target < n):
        raise IndexError("node out of range")
    best: Dict[int, Tuple[float, Tuple[int, ...]]] = {source: (0.0, (source,))}
    heap = [(0.0, (source,))]
    done = set()
    while heap:
        d, seq = heapq.heappop(heap)
        u = seq[-1]
        if u in done or best[u] != (d, seq):
            continue
        if u == target:
            return Path.from_nodes(net, seq)
        done.add(u)
        for v, w in net.successors(u):
            if v in done:
                continue
            cand = (d + w, seq + (v,))
            if v not in best or cand < best[v]:
                best[v] = cand
                heapq.heappush(heap, cand)
    raise Unreachable(f"no path from {source} to {target}")


def _has_path_within(adj, source: int, target: int, cutoff: float) -> bool:
    dist = {source: 0.0}
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u == target:
            return d <= cutoff
        if d > dist.get(u, math.inf):
            continue
        for v, w in adj[u]:
            nd = d + w
            if nd <= cutoff and nd < dist.get(v, math.inf):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return False


def sorted_location_pairs(coords: np.ndarray) -> List[Tuple[int, int, float]]:
    """All unordered pairs ``(i, j, euclid)`` with ``i < j``, nearest first.

    Equal distances keep ``(i, j)`` lexicographic order.
    """
    n = len(coords)
    iu, ju = np.triu_indices(n, k=1)
    dist = np.hypot(*(coords[iu] - coords[ju]).T)
    order = np.argsort(dist, kind="stable")
    return [(int(iu[k]), int(ju[k]), float(dist[k])) for k in order]


def generate_random_network(num_locations: int = 100, side_length: float = 800.0,
                            detour_factor: float = 1.5, seed=0) -> RoadNetwork:
    """Random planar network grown from the nearest location pairs outward.

    A pair is joined by two opposite segments of Euclidean length unless the
    network already connects it with a path no longer than
    ``detour_factor`` times the Euclidean distance.
    """
    if num_locations < 2:
        raise ValueError("num_locations must be >= 2")
    if not side_length > 0:
        raise ValueError("side_length must be positive")
    if not detour_factor > 1:
        raise ValueError("detour_factor must exceed 1")
    rng = np.random.Generator(np.random.PCG64(seed_sequence(seed)))
    coords = rng.uniform(0.0, side_length, size=(num_locations, 2))
    adj: List[List[Tuple[int, float]]] = [[] for _ in range(num_locations)]
    weights: Dict[Edge, float] = {}
    for i, j, d in sorted_location_pairs(coords):
        # edges are inserted in symmetric pairs, so checking i -> j suffices
        if _has_path_within(adj, i, j, detour_factor * d):
            continue
        adj[i].append((j, d))
        adj[j].append((i, d))
        weights[(i, j)] = d
        weights[(j, i)] = d
    net = RoadNetwork(coords, weights)
    assert _strongly_connected(net), "generated network is not strongly connected"
    return net


def _strongly_connected(net: RoadNetwork) -> bool:
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v, _ in net.successors(u):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    # generated networks are symmetric, so reachability from 0 is enough
    return len(seen) == net.num_nodes


def seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


@dataclass(frozen=True)
class Overlap:
    """Shared run of edges between two paths, F (first) to L (last)."""

    first0: PathPosition
    first1: PathPosition
    last0: PathPosition
    last1: PathPosition
    shared_length: float
    # edge index ranges [start, stop) of the shared run on each path
    span0: Tuple[int, int]
    span1: Tuple[int, int]

    @property
    def edges(self) -> int:
        return self.span0[1] - self.span0[0]


def shared_subpath(p0: Path, p1: Path) -> Optional[Overlap]:
    """Common contiguous subpath of two shortest paths, or ``None``."""
    idx0 = {e: k for k, e in enumerate(p0.edges)}
    common = [(idx0[e], k1) for k1, e in enumerate(p1.edges) if e in idx0]
    if not common:
        return None
    ks0 = [k0 for k0, _ in common]
    ks1 = [k1 for _, k1 in common]
    m = len(common)
    if ks1 != list(range(ks1[0], ks1[0] + m)) or ks0 != list(range(ks0[0], ks0[0] + m)):
        raise OverlapNotContiguous(f"shared edges at {ks0} / {ks1} are not one run")
    s0, s1 = ks0[0], ks1[0]
    e0, e1 = s0 + m - 1, s1 + m - 1
    return Overlap(
        first0=PathPosition(s0, 0.0),
        first1=PathPosition(s1, 0.0),
        last0=canonical(p0, PathPosition(e0, p0.weights[e0])),
        last1=canonical(p1, PathPosition(e1, p1.weights[e1])),
        shared_length=sum(p1.weights[s1:e1 + 1]),
        span0=(s0, e0 + 1),
        span1=(s1, e1 + 1),
    )


def write_network(net: RoadNetwork, fh) -> None:
    for i, (x, y) in enumerate(net.coords):
        fh.write(f"node {i} {float(x)!r} {float(y)!r}\n")
    for (i, j) in net.edges:
        fh.write(f"edge {i} {j} {net.weight(i, j)!r}\n")


def read_network(lines: Iterable[str]) -> RoadNetwork:
    nodes: Dict[int, Tuple[float, float]] = {}
    weights: Dict[Edge, float] = {}
    for lineno, line in enumerate(lines, 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "node" and len(parts) == 4:
                nodes[int(parts[1])] = (float(parts[2]), float(parts[3]))
            elif parts[0] == "edge" and len(parts) == 4:
                weights[(int(parts[1]), int(parts[2]))] = float(parts[3])
            else:
                raise ValueError(f"unrecognised record {parts[0]!r}")
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if sorted(nodes) != list(range(len(nodes))):
        raise ValueError("node ids must be 0..n-1")
    coords = [nodes[i] for i in range(len(nodes))]
    return RoadNetwork(coords, weights)
