import io
import math
from collections import defaultdict

import numpy as np
import pytest

from truckplatoon import clustering, config, coordination, experiments
from truckplatoon.clustering import ClusteringConfig, objective_fce, run
from truckplatoon.config import ConfigInvalid, ExperimentConfig, NetworkConfig, TruckConfig
from truckplatoon.pairwise import materialize_profile
from truckplatoon.trucking import default_fuel, default_profile, fuel_consumption

from conftest import PARAMS, chain_network, truck


def small_cfg(**kw):
    base = dict(network=NetworkConfig(num_locations=30), trucks=TruckConfig(K=40), replicates=2, seed=5)
    base.update(kw)
    return ExperimentConfig(**base)


# --- truck generation

def test_single_truck_default_speed(net100):
    (a,) = experiments.generate_trucks(net100, TruckConfig(K=1), 0)
    assert a.start_node != a.dest_node
    assert a.default_speed == pytest.approx(80.0, rel=1e-12)


def test_truck_generation_deterministic(net100):
    a = experiments.generate_trucks(net100, TruckConfig(K=400), 17)
    b = experiments.generate_trucks(net100, TruckConfig(K=400), 17)
    c = experiments.generate_trucks(net100, TruckConfig(K=400), 18)
    assert a == b and a != c


def test_truck_invariant_sweep(net100):
    trucks = experiments.generate_trucks(net100, TruckConfig(K=10_000), 3)
    nodes = {t.start_node for t in trucks} | {t.dest_node for t in trucks}
    assert len(nodes) <= 10
    for t in trucks:
        assert t.start_node != t.dest_node
        assert 0.0 <= t.start_time <= 1.0
        t.check_band(70, 90)
        assert t.default_speed == pytest.approx(80.0, rel=1e-12)


def test_frozen_terminals(net100):
    cfg = TruckConfig(K=50)
    term = [1, 2, 3]
    trucks = experiments.generate_trucks(net100, cfg, 0, terminals=term)
    assert {t.start_node for t in trucks} | {t.dest_node for t in trucks} <= set(term)


def test_child_seeds_depend_only_on_inputs():
    a = experiments.child_seed(1, "trucks", 3).generate_state(2)
    assert np.array_equal(a, experiments.child_seed(1, "trucks", 3).generate_state(2))
    assert not np.array_equal(a, experiments.child_seed(1, "trucks", 4).generate_state(2))
    assert not np.array_equal(a, experiments.child_seed(1, "network", 3).generate_state(2))
    assert not np.array_equal(a, experiments.child_seed(2, "trucks", 3).generate_state(2))


# --- spontaneous platooning

def spontaneous_oracle(trucks, v, gap):
    """Groups enumerated by definition: a group starts at the earliest unassigned entry
    and takes every later entry within ``gap`` of it."""
    base = math.fsum(t.length * PARAMS.f0(v) for t in trucks)
    per_edge = defaultdict(list)
    for t in trucks:
        s = 0.0
        for e, w in zip(t.path.edges, t.path.weights):
            per_edge[e].append((t.start_time + s / v, t.truck_id, w))
            s += w
    saved = []
    for entries in per_edge.values():
        left = sorted(entries)
        while left:
            first = left[0]
            group = [x for x in left if x[0] - first[0] <= gap]
            saved += [w * (PARAMS.f0(v) - PARAMS.fp(v)) for _, _, w in group[1:]]
            left = [x for x in left if x not in group]
    return 1.0 - (base - math.fsum(saved)) / base


def test_spontaneous_examples():
    net = chain_network([100.0, 200.0])
    one = [truck(net, 0, 0, 2, 0.3)]
    assert experiments.spontaneous_platooning(one, net, 80.0, 0.01) == 0.0
    two = [truck(net, 0, 0, 2, 0.3), truck(net, 1, 0, 2, 0.3)]
    assert experiments.spontaneous_platooning(two, net, 80.0, 0.01) == pytest.approx(0.05, rel=1e-12)
    apart = [truck(net, 0, 0, 2, 0.3), truck(net, 1, 0, 2, 0.32)]
    assert experiments.spontaneous_platooning(apart, net, 80.0, 0.01) == 0.0


def test_spontaneous_matches_oracle(net100):
    for seed in range(4):
        trucks = experiments.generate_trucks(net100, TruckConfig(K=300), seed)
        for gap in (0.0, 0.01, 0.05):
            got = experiments.spontaneous_platooning(trucks, net100, 80.0, gap)
            assert got == pytest.approx(spontaneous_oracle(trucks, 80.0, gap), rel=1e-12, abs=1e-15)


# --- variant evaluation

def test_evaluate_without_leaders():
    net = chain_network([100.0, 200.0])
    trucks = [truck(net, 0, 0, 2, 0.3), truck(net, 1, 0, 2, 0.3)]
    g = coordination.build(trucks, net, PARAMS, 70, 90)
    res = clustering._result(g, np.zeros(2, dtype=bool), 0, "equilibrium", [])
    m = experiments.evaluate_variant(g, res, trucks, PARAMS)
    assert m.relative_saving == 0.0 and m.mean_abs_delta_d_start is None and m.num_leaders == 0


def test_evaluate_two_trucks():
    net = chain_network([300.0])
    trucks = [truck(net, 0, 0, 1, 0.3), truck(net, 1, 0, 1, 0.3)]
    g = coordination.build(trucks, net, PARAMS, 70, 90)
    res = run(g, ClusteringConfig())
    m = experiments.evaluate_variant(g, res, trucks, PARAMS)
    w = g.weight_of(0, 1)
    assert m.relative_saving == pytest.approx(w / m.baseline_fuel, rel=1e-12)
    assert m.mean_abs_delta_d_start == 0.0


def test_evaluate_matches_full_resimulation(net100):
    trucks = experiments.generate_trucks(net100, TruckConfig(K=50, terminal_subset_size=6), 11)
    g = coordination.build(trucks, net100, PARAMS, 70, 90)
    for variant in config.VARIANTS:
        res = run(g, ClusteringConfig.from_name(variant, seed=1))
        m = experiments.evaluate_variant(g, res, trucks, PARAMS)
        fuel = []
        for i, t in enumerate(trucks):
            if i in res.assignment:
                plan = g.plan(i, res.assignment[i], trucks)
                prof = materialize_profile(plan, t)
                prof.check_covers(t)
                fuel.append(fuel_consumption(t, prof, PARAMS))
            else:
                fuel.append(fuel_consumption(t, default_profile(t), PARAMS))
        assert math.fsum(fuel) == pytest.approx(m.total_fuel, rel=1e-9)
        assert m.baseline_fuel - m.total_fuel == pytest.approx(res.objective, rel=1e-9, abs=1e-9)
    assert g.num_edges > 0


def test_identity_violation_is_detected(net100):
    trucks = experiments.generate_trucks(net100, TruckConfig(K=30, terminal_subset_size=4), 2)
    g = coordination.build(trucks, net100, PARAMS, 70, 90)
    res = run(g, ClusteringConfig())
    assert res.objective > 0
    res.objective *= 2
    with pytest.raises(experiments.SavingsIdentityError):
        experiments.evaluate_variant(g, res, trucks, PARAMS)


# --- experiments

def test_tiny_pipeline_is_deterministic():
    cfg = small_cfg(trucks=TruckConfig(K=2), replicates=1)
    a = experiments.run_experiment(cfg)
    b = experiments.run_experiment(cfg)
    assert a == b and len(a) == 4
    assert [r["variant"] for r in a] == list(config.VARIANTS)


def test_rows_and_bounds():
    rows = experiments.run_experiment(small_cfg())
    assert len(rows) == 2 * 4
    for r in rows:
        assert set(r) == set(experiments.ROW_FIELDS)
        assert 0.0 <= r["relative_saving"] <= 0.10
        assert 0.0 <= r["spontaneous_saving"] <= 0.10
        assert r["termination"] in ("equilibrium", "cycle_detected", "cap_reached")


def test_replicate_order_independence():
    cfg = small_cfg(replicates=3)
    rows = experiments.run_experiment(cfg)
    net = experiments.network_for(cfg, 0)
    only2 = experiments.run_replicate(cfg, 2, net)
    assert only2 == [r for r in rows if r["replicate"] == 2]


def test_per_replicate_network_and_workers():
    cfg = small_cfg(network=NetworkConfig(num_locations=20, per_replicate=True), replicates=2)
    serial = experiments.run_experiment(cfg)
    parallel = experiments.run_experiment(config.from_mapping({"run.workers": "2"}, cfg))
    assert serial == parallel


def test_sweep_points():
    cfg = small_cfg(sweep_K=(10, 20), sweep_band_width=(4.0, 20.0))
    pts = experiments.sweep_points(cfg)
    assert [(p.trucks.K, p.v_min, p.v_max) for p in pts] == [
        (10, 78.0, 82.0), (10, 70.0, 90.0), (20, 78.0, 82.0), (20, 70.0, 90.0)]


def test_aggregate_and_csv():
    cfg = small_cfg(replicates=3, sweep_K=(10, 20))
    rows = experiments.run_experiment(cfg)
    agg = experiments.aggregate(rows)
    assert len(agg) == 2 * 4
    for rec in agg:
        sel = [r["relative_saving"] for r in rows if r["K"] == rec["K"] and r["variant"] == rec["variant"]]
        assert rec["n"] == 3
        assert rec["relative_saving_mean"] == pytest.approx(np.mean(sel), rel=1e-12)
        assert rec["relative_saving_std"] == pytest.approx(np.std(sel, ddof=1), rel=1e-9, abs=1e-15)
    buf = io.StringIO()
    experiments.write_csv(rows, buf, experiments.ROW_FIELDS)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ("replicate,variant,K,v_min,v_max,rho_l,relative_saving,spontaneous_saving,"
                        "mean_abs_delta_d_start,num_leaders,iterations,termination")
    assert len(lines) == len(rows) + 1


# --- configuration

def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "x.cfg"
    p.write_text("# comment\ntrucks.K = 123\nfuel.F1 = 0.0125\nclustering.variants = total-greedy, pairwise-random\n"
                 "sweep.band_width = 4, 20\n")
    cfg = config.load(p, ["band.v_min = 75"], seed=9)
    assert cfg.trucks.K == 123 and cfg.v_min == 75 and cfg.seed == 9
    assert cfg.variants == ("total-greedy", "pairwise-random")
    assert cfg.sweep_band_width == (4.0, 20.0)
    m = config.to_mapping(cfg)
    assert m["trucks.K"] == 123 and m["run.seed"] == 9
    assert config.from_mapping({k: v for k, v in m.items()}) == cfg


@pytest.mark.parametrize("lines, key", [
    (["bogus.key = 1"], "bogus.key"),
    (["trucks.K = many"], "trucks.K"),
    (["trucks.K = 0"], "trucks.K"),
    (["band.v_min = 85"], "trucks.nominal_speed"),
    (["trucks.terminal_subset_size = 1"], "trucks.terminal_subset_size"),
    (["run.replicates = 0"], "run.replicates"),
    (["clustering.variants = best-ever"], "clustering.variants"),
    (["clustering.rho_l = 1.5"], "clustering.rho_l"),
    (["fuel.Fp1 = 0.02"], "fuel"),
    (["sweep.band_width = 200"], "sweep.band_width"),
    (["no equals sign"], "line 1"),
])
def test_config_errors_name_the_field(lines, key):
    with pytest.raises(ConfigInvalid, match=key.replace(".", r"\.")):
        config.from_mapping(config.parse_lines(lines))


def test_defaults_match_setup():
    cfg = ExperimentConfig()
    assert cfg.network == NetworkConfig(100, 800.0, 1.5, False)
    assert (cfg.trucks.K, cfg.trucks.start_time_interval, cfg.trucks.terminal_subset_size,
            cfg.trucks.nominal_speed) == (400, 1.0, 10, 80.0)
    assert (cfg.v_min, cfg.v_max, cfg.rho_l, cfg.spontaneous_time_gap, cfg.replicates) == (70.0, 90.0, 0.5, 0.01, 100)
    assert cfg.fuel == PARAMS
