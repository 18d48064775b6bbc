"""Coordination graph: edge (i, j) carries the fuel truck i saves by following j."""

from __future__ import annotations

import logging
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .pairwise import PairwisePlan, pair_geometry
from .road_network import RoadNetwork
from .trucking import FuelParams, TransportAssignment

LOG = logging.getLogger(__name__)


class CoordinationGraph:
    """Directed graph over trucks in CSR form.

    Nodes are positions ``0..K-1`` in the truck list; ``ids`` maps them to
    truck ids.  Out-edges are stored sorted by (follower, leader) and the
    in-edge CSR indexes into the same edge arrays.  ``plans`` holds one row
    per edge laid out as :data:`truckplatoon.kernels.PLAN_FIELDS` (absent for
    graphs loaded from a dump).
    """

    def __init__(self, num_nodes: int, follower, leader, weight, plans=None, ids=None,
                 delta_d_start=None):
        follower = np.asarray(follower, dtype=np.int64)
        leader = np.asarray(leader, dtype=np.int64)
        weight = np.asarray(weight, dtype=float)
        if not (len(follower) == len(leader) == len(weight)):
            raise ValueError("edge arrays differ in length")
        if np.any(follower == leader):
            raise ValueError("self-loops are not allowed")
        if np.any(~(weight > 0)):
            raise ValueError("edge weights must be strictly positive")
        if len(follower) and (follower.min() < 0 or max(follower.max(), leader.max()) >= num_nodes
                              or leader.min() < 0):
            raise ValueError("edge endpoint out of range")
        order = np.lexsort((leader, follower))
        follower, leader, weight = follower[order], leader[order], weight[order]
        if len(follower) > 1 and np.any((np.diff(follower) == 0) & (np.diff(leader) == 0)):
            raise ValueError("duplicate edge")
        self.num_nodes = int(num_nodes)
        self.ids = np.arange(num_nodes) if ids is None else np.asarray(ids, dtype=np.int64)
        self.follower = follower
        self.leader = leader
        self.weight = weight
        self.plans = None if plans is None else np.asarray(plans, dtype=float)[:, order]
        if delta_d_start is None and self.plans is not None:
            delta_d_start = self.plans[kernels.PLAN_FIELDS.index("delta_d_start")]
        elif delta_d_start is not None:
            delta_d_start = np.asarray(delta_d_start, dtype=float)[order]
        self.delta_d_start = delta_d_start
        self.out_ptr = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(follower, minlength=num_nodes), out=self.out_ptr[1:])
        in_order = np.lexsort((follower, leader))
        self.in_edge = in_order  # position in the edge arrays of each in-edge
        self.in_ptr = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(leader, minlength=num_nodes), out=self.in_ptr[1:])
        self.in_idx = follower[in_order]
        self.in_w = weight[in_order]
        self._lookup: Optional[Dict[Tuple[int, int], int]] = None
        for arr in (self.follower, self.leader, self.weight, self.out_ptr, self.in_ptr,
                    self.in_idx, self.in_w):
            arr.setflags(write=False)

    @property
    def num_edges(self) -> int:
        return len(self.weight)

    @property
    def out_idx(self):
        return self.leader

    @property
    def out_w(self):
        return self.weight

    def out_neighbors(self, i: int):
        s = slice(self.out_ptr[i], self.out_ptr[i + 1])
        return self.leader[s], self.weight[s]

    def in_neighbors(self, n: int):
        s = slice(self.in_ptr[n], self.in_ptr[n + 1])
        return self.in_idx[s], self.in_w[s]

    def edge_index(self, i: int, j: int) -> Optional[int]:
        if self._lookup is None:
            self._lookup = {(int(f), int(l)): k for k, (f, l) in enumerate(zip(self.follower, self.leader))}
        return self._lookup.get((int(i), int(j)))

    def edge_positions(self, fol, lead) -> np.ndarray:
        """Edge-array positions of the edges ``(fol[k], lead[k])``; all must exist."""
        keys = self.follower * self.num_nodes + self.leader
        q = np.asarray(fol, dtype=np.int64) * self.num_nodes + np.asarray(lead, dtype=np.int64)
        pos = np.searchsorted(keys, q)
        if np.any(pos >= len(keys)) or np.any(keys[np.minimum(pos, len(keys) - 1)] != q):
            raise KeyError("edge not in coordination graph")
        return pos

    def weight_of(self, i: int, j: int) -> float:
        k = self.edge_index(i, j)
        return 0.0 if k is None else float(self.weight[k])

    def edges(self):
        """Iterate ``(follower, leader, weight)`` in (follower, leader) order."""
        for f, l, w in zip(self.follower, self.leader, self.weight):
            yield int(f), int(l), float(w)

    def plan(self, i: int, j: int, trucks: Optional[Sequence[TransportAssignment]] = None
             ) -> Optional[PairwisePlan]:
        """Stored plan for follower ``i`` behind leader ``j``.

        Positions on the follower's path need ``trucks``; without it they are
        left as ``None``.
        """
        k = self.edge_index(i, j)
        if k is None or self.plans is None:
            return None
        rec = dict(zip(kernels.PLAN_FIELDS, (float(x) for x in self.plans[:, k])))
        merge_pos = split_pos = None
        leader_speed = None
        if trucks is not None:
            fpath = trucks[i].path
            merge_pos = fpath.position_at(rec["d_merge"])
            split_pos = fpath.position_at(fpath.total_length - rec["d_tail"])
            leader_speed = trucks[j].default_speed
        return PairwisePlan(
            leader_id=int(self.ids[j]), follower_id=int(self.ids[i]),
            v_merge=rec["v_merge"], v_split=rec["v_split"], v_platoon=leader_speed,
            t_merge=rec["t_merge"], t_split=rec["t_split"], merge_pos=merge_pos, split_pos=split_pos,
            d_merge=rec["d_merge"], d_tail=rec["d_tail"], delta_d_start=rec["delta_d_start"],
            delta_d_end=rec["delta_d_end"], fuel_adapted=rec["fuel_adapted"],
            fuel_default=rec["fuel_default"],
        )

    def same_edges(self, other: "CoordinationGraph") -> bool:
        return (self.num_nodes == other.num_nodes and np.array_equal(self.follower, other.follower)
                and np.array_equal(self.leader, other.leader))

    def dump(self, fh) -> None:
        dd = self.delta_d_start
        for k, (f, l, w) in enumerate(self.edges()):
            d = float(dd[k]) if dd is not None else float("nan")
            fh.write(f"cedge {self.ids[f]} {self.ids[l]} {w!r} {d!r}\n")

    @classmethod
    def load(cls, lines: Iterable[str]) -> "CoordinationGraph":
        rows = []
        for lineno, line in enumerate(lines, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] != "cedge" or len(parts) != 5:
                raise ValueError(f"line {lineno}: expected 'cedge <follower> <leader> <weight> <delta_d_start>'")
            rows.append((int(parts[1]), int(parts[2]), float(parts[3]), float(parts[4])))
        ids = sorted({r[0] for r in rows} | {r[1] for r in rows})
        pos = {t: k for k, t in enumerate(ids)}
        return cls(len(ids), [pos[r[0]] for r in rows], [pos[r[1]] for r in rows],
                   [r[2] for r in rows], ids=ids, delta_d_start=[r[3] for r in rows])

    def __repr__(self):
        return f"CoordinationGraph(num_nodes={self.num_nodes}, num_edges={self.num_edges})"


def route_geometry(trucks: Sequence[TransportAssignment]):
    """Group trucks by path and compute the pairwise meeting geometry of the paths.

    Returns ``(route, rlen, (has, a, b, shared, a_tail))`` with arrays indexed
    ``[follower route, leader route]``.
    """
    keys: Dict[Tuple[int, ...], int] = {}
    reps: List[TransportAssignment] = []
    route = np.empty(len(trucks), dtype=np.int64)
    for k, t in enumerate(trucks):
        r = keys.get(t.path.nodes)
        if r is None:
            r = keys[t.path.nodes] = len(reps)
            reps.append(t)
        route[k] = r
    nr = len(reps)
    has = np.zeros((nr, nr), dtype=bool)
    geo = np.zeros((4, nr, nr))
    for rf, tf in enumerate(reps):
        for rl, tl in enumerate(reps):
            g = pair_geometry(tl, tf)
            if g is not None:
                has[rf, rl] = True
                geo[:, rf, rl] = (g.a, g.b, g.shared, g.a_tail)
    rlen = np.array([t.length for t in reps])
    return route, rlen, (has, geo[0].copy(), geo[1].copy(), geo[2].copy(), geo[3].copy())


def build(trucks: Sequence[TransportAssignment], net: Optional[RoadNetwork], params: FuelParams,
          v_min: float, v_max: float, backend=None, block_rows: Optional[int] = None,
          row_order=None) -> CoordinationGraph:
    """All-pairs planning sweep.

    Rows (followers) are processed in blocks; ``block_rows`` and
    ``row_order`` only change the schedule, never the result.
    """
    ids = [t.truck_id for t in trucks]
    if len(set(ids)) != len(ids):
        raise ValueError("truck ids must be distinct")
    k = len(trucks)
    if k < 2:
        return CoordinationGraph(k, [], [], [], plans=np.zeros((kernels.N_PLAN, 0)), ids=ids)
    route, rlen, geometry = route_geometry(trucks)
    t_start = np.array([t.start_time for t in trucks])
    t_arr = np.array([t.arrival_time for t in trucks])
    if block_rows is None:
        block_rows = max(1, min(k, 500_000 // k))
    rows = np.arange(k) if row_order is None else np.asarray(row_order, dtype=np.int64)
    leaders = np.arange(k, dtype=np.int64)
    parts_f, parts_l, parts_p = [], [], []
    for start in range(0, k, block_rows):
        blk = rows[start:start + block_rows]
        fol = np.repeat(blk, k)
        lead = np.tile(leaders, len(blk))
        ok, out = kernels.plan_pairs(fol, lead, route, t_start, t_arr, rlen, geometry, params,
                                     v_min, v_max, backend=backend)
        parts_f.append(fol[ok])
        parts_l.append(lead[ok])
        parts_p.append(out[:, ok])
    follower = np.concatenate(parts_f)
    leader = np.concatenate(parts_l)
    plans = np.concatenate(parts_p, axis=1)
    fi = kernels.PLAN_FIELDS.index
    weight = plans[fi("fuel_default")] - plans[fi("fuel_adapted")]
    LOG.debug("coordination graph: %d trucks, %d edges", k, len(weight))
    return CoordinationGraph(k, follower, leader, weight, plans=plans, ids=ids)


def best_leader(g: CoordinationGraph, i: int, leaders) -> Optional[Tuple[int, float]]:
    """Leader among ``leaders`` that saves ``i`` the most fuel (smallest id on ties)."""
    leaders = _as_mask(leaders, g.num_nodes)
    if leaders[i]:
        raise ValueError(f"node {i} is itself a leader")
    idx, w = g.out_neighbors(i)
    best = None
    for j, wj in zip(idx, w):
        if leaders[j] and (best is None or wj > best[1]):
            best = (int(j), float(wj))
    return best


def _as_mask(leaders, k: int) -> np.ndarray:
    if isinstance(leaders, np.ndarray) and leaders.dtype == bool:
        if leaders.shape != (k,):
            raise ValueError("leader mask has wrong shape")
        return leaders
    mask = np.zeros(k, dtype=bool)
    for j in leaders:
        mask[int(j)] = True
    return mask
