"""Leader selection by single membership flips, in the spirit of PAM's build phase.

Starting from an empty leader set, repeatedly pick a node whose flip has a
positive gain and flip it.  The gain is either the change of the total
saving (``total``) or the change of the flipping node's own utility when
savings are shared between follower and leader (``pairwise``).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional

import numpy as np

from . import kernels
from .coordination import CoordinationGraph, _as_mask

GAIN_KINDS = ("total", "pairwise")
SELECTIONS = ("greedy", "random")


@dataclass(frozen=True)
class ClusteringConfig:
    gain_kind: str = "total"
    selection: str = "greedy"
    rho_l: float = 0.5
    seed: int = 0
    max_iterations: int = 1_000_000

    def __post_init__(self):
        if self.gain_kind not in GAIN_KINDS:
            raise ValueError(f"gain_kind must be one of {GAIN_KINDS}")
        if self.selection not in SELECTIONS:
            raise ValueError(f"selection must be one of {SELECTIONS}")
        if not 0 < self.rho_l < 1:
            raise ValueError("rho_l must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    @property
    def rho_f(self) -> float:
        return 1.0 - self.rho_l

    @property
    def name(self) -> str:
        return f"{self.gain_kind}-{self.selection}"

    @classmethod
    def from_name(cls, name: str, **kw) -> "ClusteringConfig":
        gain, _, sel = name.partition("-")
        return cls(gain_kind=gain, selection=sel, **kw)


@dataclass
class ClusteringResult:
    leaders: FrozenSet[int]
    assignment: Dict[int, int]
    objective: float
    iterations: int
    termination: str
    history_hashes: List[str] = field(default_factory=list)
    mask: Optional[np.ndarray] = None


def _best(g: CoordinationGraph, i: int, mask) -> float:
    idx, w = g.out_neighbors(i)
    sel = w[mask[idx]]
    return float(sel.max()) if sel.size else 0.0


def _best_arg(g: CoordinationGraph, i: int, mask):
    idx, w = g.out_neighbors(i)
    b, a = 0.0, -1
    for j, wj in zip(idx, w):
        if mask[j] and wj > b:
            b, a = float(wj), int(j)
    return b, a


def objective_fce(g: CoordinationGraph, leaders) -> float:
    """Total saving when every non-leader follows its best leader (0 if none)."""
    mask = _as_mask(leaders, g.num_nodes)
    if g.num_edges == 0:
        return 0.0
    wm = np.where(mask[g.leader], g.weight, 0.0)
    best = np.zeros(g.num_nodes)
    np.maximum.at(best, g.follower, wm)
    return math.fsum(best[~mask])


def delta_u_total(g: CoordinationGraph, n: int, leaders) -> float:
    """Change of :func:`objective_fce` when ``n`` flips membership (local form)."""
    mask = _as_mask(leaders, g.num_nodes)
    terms = []
    idx, w = g.in_neighbors(n)
    if not mask[n]:
        for i, wi in zip(idx, w):
            if mask[i]:
                continue
            bi = _best(g, i, mask)
            terms.append(max(bi, float(wi)) - bi)
        terms.append(-_best(g, n, mask))
    else:
        without = mask.copy()
        without[n] = False
        for i, wi in zip(idx, w):
            if mask[i]:
                continue
            bi, ai = _best_arg(g, i, mask)
            if ai == n:
                terms.append(_best(g, i, without) - bi)
        terms.append(_best(g, n, without))
    return math.fsum(terms)


def delta_u_pairwise(g: CoordinationGraph, n: int, leaders, rho_l: float) -> float:
    """Change of ``n``'s own utility when it flips membership, savings split ``rho_l : 1 - rho_l``."""
    mask = _as_mask(leaders, g.num_nodes)
    rho_f = 1.0 - rho_l
    idx, w = g.in_neighbors(n)
    gained = []
    if not mask[n]:
        with_n = mask.copy()
        with_n[n] = True
        for i, wi in zip(idx, w):
            if not mask[i] and _best_arg(g, i, with_n)[1] == n:
                gained.append(rho_l * float(wi))
        return math.fsum(gained) - rho_f * _best(g, n, mask)
    for i, wi in zip(idx, w):
        if not mask[i] and _best_arg(g, i, mask)[1] == n:
            gained.append(rho_l * float(wi))
    return rho_f * _best(g, n, mask) - math.fsum(gained)


def leader_digest(mask: np.ndarray) -> str:
    return hashlib.blake2b(np.packbits(mask).tobytes(), digest_size=16).hexdigest()


def run(g: CoordinationGraph, cfg: ClusteringConfig = ClusteringConfig(),
        trace: Optional[Callable[[int, int, float, float], None]] = None,
        backend=None) -> ClusteringResult:
    """Flip memberships until no node has a positive gain.

    With pairwise gain the run also stops as soon as a leader set repeats;
    the best-objective leader set seen is reported in that case.
    ``trace(k, node, delta_u, objective)`` is called after every flip.
    """
    k = g.num_nodes
    mask = np.zeros(k, dtype=bool)
    pairwise = cfg.gain_kind == "pairwise"
    rng = np.random.default_rng(cfg.seed) if cfg.selection == "random" else None
    history: List[str] = []
    seen = set()
    if pairwise:
        history.append(leader_digest(mask))
        seen.add(history[-1])
    best_obj, best_mask = 0.0, mask.copy()
    iterations = 0
    pending = None
    termination = None
    while True:
        tables = kernels.leader_tables(g.out_ptr, g.leader, g.weight, mask, backend=backend)
        objective = float(tables[0][~mask].sum())
        if pending is not None and trace is not None:
            trace(iterations, pending[0], pending[1], objective)
        if objective > best_obj:
            best_obj, best_mask = objective, mask.copy()
        if termination is not None:
            break
        du = kernels.delta_u_all(g.in_ptr, g.in_idx, g.in_w, mask, tables, pairwise=pairwise,
                                 rho_l=cfg.rho_l, backend=backend)
        cand = np.flatnonzero(du > 0)
        if cand.size == 0:
            termination = "equilibrium"
            break
        if iterations >= cfg.max_iterations:
            termination = "cap_reached"
            break
        if rng is None:
            n = int(cand[np.argmax(du[cand])])
        else:
            n = int(cand[rng.integers(cand.size)])
        mask[n] = not mask[n]
        iterations += 1
        pending = (n, float(du[n]))
        if pairwise:
            d = leader_digest(mask)
            history.append(d)
            if d in seen:
                termination = "cycle_detected"
                # loop once more so the trace and best-state bookkeeping see this flip
                continue
            seen.add(d)
    if termination == "cycle_detected":
        mask = best_mask
    return _result(g, mask, iterations, termination, history)


def _result(g, mask, iterations, termination, history) -> ClusteringResult:
    _, arg, _ = kernels.leader_tables(g.out_ptr, g.leader, g.weight, mask, backend="numpy")
    assignment = {int(i): int(arg[i]) for i in np.flatnonzero(~mask & (arg >= 0))}
    return ClusteringResult(
        leaders=frozenset(int(x) for x in np.flatnonzero(mask)),
        assignment=assignment,
        objective=objective_fce(g, mask),
        iterations=iterations,
        termination=termination,
        history_hashes=history,
        mask=mask.copy(),
    )


def limit_cycle_witness() -> CoordinationGraph:
    """Four-truck graph on which pairwise-gain greedy selection never settles (rho_l = 0.45)."""
    follower, leader, weight = zip(*_WITNESS_EDGES)
    return CoordinationGraph(4, follower, leader, weight)


# found by random search over 4-node digraphs with small integer weights
# (scripts/find_limit_cycle.py); checked in tests/test_clustering.py::test_witness_cycles
_WITNESS_EDGES = (
    (0, 1, 6.0), (0, 3, 6.0), (1, 2, 7.0), (1, 3, 9.0),
    (2, 1, 9.0), (2, 3, 3.0), (3, 1, 6.0), (3, 2, 12.0),
)
