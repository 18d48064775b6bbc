"""Numba vs numpy timings for the hot kernels.

    python3 benchmarks/bench_kernels.py            # K = 500 1000 2000
    python3 benchmarks/bench_kernels.py --K 4000 --repeat 5

Both backends must produce the same result; the script checks that before
printing timings.  Compilation is excluded (one warm-up call per backend).
"""

import argparse
import time

import numpy as np

from truckplatoon import _accel, coordination, kernels
from truckplatoon.clustering import ClusteringConfig, run
from truckplatoon.config import ExperimentConfig
from truckplatoon.experiments import child_seed, generate_trucks, network_for


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_K(net, cfg, K, repeat):
    trucks = generate_trucks(net, cfg.with_K(K).trucks, child_seed(cfg.seed, "trucks", 0))
    route, rlen, geo = coordination.route_geometry(trucks)
    ts = np.array([t.start_time for t in trucks])
    ta = np.array([t.arrival_time for t in trucks])
    fol = np.repeat(np.arange(K), K)
    lead = np.tile(np.arange(K), K)
    rows = []

    def sweep(b):
        return kernels.plan_pairs(fol, lead, route, ts, ta, rlen, geo, cfg.fuel, cfg.v_min, cfg.v_max, backend=b)

    res = {}
    for b in _accel.BACKENDS:
        sweep(b)
        res[b] = best_of(lambda: sweep(b), repeat)
    assert np.array_equal(res["numba"][1][0], res["numpy"][1][0])
    rows.append(("plan_pairs", K * K, res["numba"][0], res["numpy"][0]))

    g = coordination.build(trucks, net, cfg.fuel, cfg.v_min, cfg.v_max)
    mask = np.zeros(K, dtype=bool)
    mask[::7] = True

    def gains(b):
        t = kernels.leader_tables(g.out_ptr, g.leader, g.weight, mask, backend=b)
        return kernels.delta_u_all(g.in_ptr, g.in_idx, g.in_w, mask, t, backend=b)

    res = {b: best_of(lambda: gains(b), repeat * 5) for b in _accel.BACKENDS}
    assert np.allclose(res["numba"][1], res["numpy"][1], rtol=1e-12, atol=1e-12)
    rows.append(("tables+delta_u", g.num_edges, res["numba"][0], res["numpy"][0]))

    res = {b: best_of(lambda: run(g, ClusteringConfig(), backend=b), 1) for b in _accel.BACKENDS}
    assert res["numba"][1].leaders == res["numpy"][1].leaders
    rows.append((f"run total-greedy ({res['numba'][1].iterations} it)", g.num_edges,
                 res["numba"][0], res["numpy"][0]))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, nargs="+", default=[500, 1000, 2000])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    cfg = ExperimentConfig()
    net = network_for(cfg, 0)
    print(f"{'kernel':<32} {'K':>6} {'size':>10} {'numba s':>10} {'numpy s':>10} {'speed-up':>9}")
    for K in args.K:
        for name, size, t_nb, t_np in bench_K(net, cfg, K, args.repeat):
            print(f"{name:<32} {K:>6} {size:>10} {t_nb:>10.4f} {t_np:>10.4f} {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
