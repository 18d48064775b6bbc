"""Search small weighted digraphs for a pairwise-gain limit cycle.

Draws random 4-node coordination graphs with integer weights and keeps the
ones on which greedy selection with pairwise gain revisits a leader set.
The smallest hit (fewest edges, then fewest iterations) is printed in the
form used by ``truckplatoon.clustering._WITNESS_EDGES``.

    python3 scripts/find_limit_cycle.py --trials 60000 --seed 3
"""

import argparse

import numpy as np

from truckplatoon.clustering import ClusteringConfig, run
from truckplatoon.coordination import CoordinationGraph


def search(trials, seed, rho_l, density, max_weight, nodes=4):
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(nodes) for j in range(nodes) if i != j]
    cfg = ClusteringConfig("pairwise", "greedy", rho_l=rho_l)
    hits = []
    for _ in range(trials):
        keep = rng.random(len(pairs)) < density
        edges = [p for p, k in zip(pairs, keep) if k]
        if not edges:
            continue
        w = rng.integers(1, max_weight + 1, size=len(edges)).astype(float)
        g = CoordinationGraph(nodes, [a for a, _ in edges], [b for _, b in edges], w)
        res = run(g, cfg, backend="numpy")
        if res.termination == "cycle_detected":
            hits.append((len(edges), res.iterations, tuple((a, b, float(x)) for (a, b), x in zip(edges, w))))
    hits.sort(key=lambda h: (h[0], h[1]))
    return hits


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=60000)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--rho-l", type=float, default=0.45)
    ap.add_argument("--density", type=float, default=0.55)
    ap.add_argument("--max-weight", type=int, default=12)
    args = ap.parse_args()
    hits = search(args.trials, args.seed, args.rho_l, args.density, args.max_weight)
    print(f"{len(hits)} cycling graphs in {args.trials} trials")
    for n_edges, iters, edges in hits[:5]:
        print(f"{n_edges} edges, cycle after {iters} flips: {edges}")


if __name__ == "__main__":
    main()
