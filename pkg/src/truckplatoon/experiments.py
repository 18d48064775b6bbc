"""Monte Carlo experiments: random trucks, all variants, savings metrics."""

from __future__ import annotations

import csv
import logging
import math
import zlib
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import clustering, coordination
from .config import ExperimentConfig, TruckConfig
from .kernels import PLAN_FIELDS
from .road_network import RoadNetwork, generate_random_network
from .trucking import FuelParams, TransportAssignment, default_fuel

LOG = logging.getLogger(__name__)

ROW_FIELDS = ("replicate", "variant", "K", "v_min", "v_max", "rho_l", "relative_saving",
              "spontaneous_saving", "mean_abs_delta_d_start", "num_leaders", "iterations",
              "termination")
AGG_METRICS = ("relative_saving", "spontaneous_saving", "mean_abs_delta_d_start", "num_leaders",
               "iterations")


class SavingsIdentityError(AssertionError):
    pass


def child_seed(seed: int, tag: str, replicate: Optional[int] = None) -> np.random.SeedSequence:
    """Seed for one purpose of one replicate; depends only on (seed, replicate, tag)."""
    key = (zlib.crc32(tag.encode()),) if replicate is None else (int(replicate), zlib.crc32(tag.encode()))
    return np.random.SeedSequence(entropy=int(seed), spawn_key=key)


def make_rng(ss) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(ss))


def generate_trucks(net: RoadNetwork, cfg: TruckConfig, seed, terminals=None) -> List[TransportAssignment]:
    """Trucks with uniform start times and start/destination drawn from a small terminal subset.

    ``terminals`` fixes the subset; otherwise it is drawn first from the
    same generator.
    """
    rng = make_rng(seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed))
    if terminals is None:
        terminals = draw_terminals(net, cfg, rng)
    terminals = np.asarray(terminals)
    m = len(terminals)
    trucks = []
    for k in range(cfg.K):
        t_start = float(rng.uniform(0.0, cfg.start_time_interval))
        s = int(terminals[rng.integers(m)])
        d = int(terminals[rng.integers(m)])
        while d == s:
            d = int(terminals[rng.integers(m)])
        path = net.shortest_path(s, d)
        trucks.append(TransportAssignment(k, s, d, t_start, t_start + path.total_length / cfg.nominal_speed, path))
    return trucks


def draw_terminals(net: RoadNetwork, cfg: TruckConfig, rng) -> np.ndarray:
    return rng.choice(net.num_nodes, size=cfg.terminal_subset_size, replace=False)


def spontaneous_platooning(trucks: Sequence[TransportAssignment], net: Optional[RoadNetwork],
                           nominal_speed: float, time_gap: float,
                           params: FuelParams = FuelParams()) -> float:
    """Relative saving when trucks at nominal speed platoon only by chance.

    On every segment, trucks are ordered by entry time and grouped greedily:
    a group collects trucks entering at most ``time_gap`` after its first
    member.  All but the first member of a group pay follower fuel on that
    segment.
    """
    entries = defaultdict(list)
    baseline = []
    for a in trucks:
        baseline.append(a.length * params.f0(nominal_speed))
        for edge, s0, w in zip(a.path.edges, a.path.edge_starts, a.path.weights):
            entries[edge].append((a.start_time + s0 / nominal_speed, a.truck_id, w))
    gain = params.f0(nominal_speed) - params.fp(nominal_speed)
    saved = []
    for edge in sorted(entries):
        group_start = None
        for t, _, w in sorted(entries[edge]):
            if group_start is not None and t - group_start <= time_gap:
                saved.append(w * gain)
            else:
                group_start = t
    base = math.fsum(baseline)
    if base == 0:
        return 0.0
    total = base - math.fsum(saved)
    return 1.0 - total / base


@dataclass
class VariantMetrics:
    relative_saving: float
    mean_abs_delta_d_start: Optional[float]
    num_leaders: int
    iterations: int
    termination: str
    total_fuel: float
    baseline_fuel: float


def evaluate_variant(g: coordination.CoordinationGraph, result: clustering.ClusteringResult,
                     trucks: Sequence[TransportAssignment], params: FuelParams,
                     tol: float = 1e-9) -> VariantMetrics:
    """Fuel of the combined plan; checks that the saving equals the clustering objective."""
    fd = np.array([default_fuel(a, params) for a in trucks])
    baseline = math.fsum(fd)
    fol = np.array(sorted(result.assignment), dtype=np.int64)
    lead = np.array([result.assignment[i] for i in fol], dtype=np.int64)
    own = np.ones(len(trucks), dtype=bool)
    own[fol] = False
    if len(fol):
        pos = g.edge_positions(fol, lead)
        adapted = g.plans[PLAN_FIELDS.index("fuel_adapted"), pos]
        dd = g.delta_d_start[pos]
    else:
        adapted = dd = np.zeros(0)
    total = math.fsum(fd[own]) + math.fsum(adapted)
    saving = 1.0 - total / baseline
    expected = result.objective / baseline
    if abs(saving - expected) > tol:
        raise SavingsIdentityError(f"saving {saving} != objective/baseline {expected}")
    return VariantMetrics(
        relative_saving=saving,
        mean_abs_delta_d_start=float(np.mean(np.abs(dd))) if len(dd) else None,
        num_leaders=len(result.leaders),
        iterations=result.iterations,
        termination=result.termination,
        total_fuel=total,
        baseline_fuel=baseline,
    )


def network_for(cfg: ExperimentConfig, replicate: int) -> RoadNetwork:
    n = cfg.network
    ss = child_seed(cfg.seed, "network", replicate if n.per_replicate else None)
    return generate_random_network(n.num_locations, n.side_length, n.detour_factor, ss)


def run_replicate(cfg: ExperimentConfig, replicate: int, net: Optional[RoadNetwork] = None,
                  backend=None) -> List[Dict[str, object]]:
    if net is None or cfg.network.per_replicate:
        net = network_for(cfg, replicate)
    terminals = None
    if cfg.trucks.freeze_terminals:
        terminals = draw_terminals(net, cfg.trucks, make_rng(child_seed(cfg.seed, "terminals")))
    trucks = generate_trucks(net, cfg.trucks, child_seed(cfg.seed, "trucks", replicate), terminals)
    g = coordination.build(trucks, net, cfg.fuel, cfg.v_min, cfg.v_max, backend=backend)
    spont = spontaneous_platooning(trucks, net, cfg.trucks.nominal_speed, cfg.spontaneous_time_gap, cfg.fuel)
    rows = []
    for variant in cfg.variants:
        seed = int(child_seed(cfg.seed, "cluster:" + variant, replicate).generate_state(1)[0])
        ccfg = clustering.ClusteringConfig.from_name(variant, rho_l=cfg.rho_l, seed=seed,
                                                     max_iterations=cfg.max_iterations)
        res = clustering.run(g, ccfg, backend=backend)
        m = evaluate_variant(g, res, trucks, cfg.fuel)
        rows.append({
            "replicate": replicate, "variant": variant, "K": cfg.trucks.K,
            "v_min": cfg.v_min, "v_max": cfg.v_max, "rho_l": cfg.rho_l,
            "relative_saving": m.relative_saving, "spontaneous_saving": spont,
            "mean_abs_delta_d_start": m.mean_abs_delta_d_start, "num_leaders": m.num_leaders,
            "iterations": m.iterations, "termination": m.termination,
        })
    LOG.info("replicate %d K=%d band=[%g, %g]: %d edges", replicate, cfg.trucks.K, cfg.v_min,
             cfg.v_max, g.num_edges)
    return rows


def _replicate_job(args):
    cfg, rep, backend = args
    return run_replicate(cfg, rep, backend=backend)


def sweep_points(cfg: ExperimentConfig) -> List[ExperimentConfig]:
    points = [cfg]
    if cfg.sweep_K:
        points = [p.with_K(k) for p in points for k in cfg.sweep_K]
    if cfg.sweep_band_width:
        points = [p.with_band_width(w) for p in points for w in cfg.sweep_band_width]
    return points


def run_experiment(cfg: ExperimentConfig, backend=None) -> List[Dict[str, object]]:
    """One row per (sweep point, replicate, variant)."""
    rows: List[Dict[str, object]] = []
    shared = None if cfg.network.per_replicate else network_for(cfg, 0)
    for point in sweep_points(cfg):
        if cfg.workers > 1:
            jobs = [(point, r, backend) for r in range(cfg.replicates)]
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                for part in pool.map(_replicate_job, jobs):
                    rows.extend(part)
        else:
            for r in range(cfg.replicates):
                rows.extend(run_replicate(point, r, shared, backend=backend))
    return rows


def aggregate(rows: Sequence[Dict[str, object]]) -> List[Dict[str, object]]:
    """Mean and sample standard deviation per (K, band width, variant)."""
    groups: Dict[tuple, List[Dict[str, object]]] = {}
    for r in rows:
        key = (r["K"], float(r["v_max"]) - float(r["v_min"]), r["variant"])
        groups.setdefault(key, []).append(r)
    out = []
    for (K, width, variant), members in groups.items():
        rec: Dict[str, object] = {"K": K, "band_width": width, "variant": variant, "n": len(members)}
        for m in AGG_METRICS:
            vals = np.array([float(r[m]) for r in members if r[m] is not None and r[m] != ""])
            rec[m + "_mean"] = float(vals.mean()) if len(vals) else None
            rec[m + "_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else (0.0 if len(vals) else None)
        out.append(rec)
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows: Sequence[Dict[str, object]], fh, fields=None) -> None:
    if fields is None:
        fields = list(rows[0]) if rows else list(ROW_FIELDS)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r[f]) for f in fields])
