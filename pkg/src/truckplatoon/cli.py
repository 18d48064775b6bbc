"""Command-line front end.

Exit status: 0 on success, 1 for configuration, usage or input errors, 2
for failures while running.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, clustering, config, coordination, experiments
from ._accel import default_backend
from .pairwise import adapted_plan
from .road_network import RNG_ALGORITHM, read_network, write_network
from .trucking import read_trucks, write_trucks

LOG = logging.getLogger("truckplatoon")


class InputError(Exception):
    pass


def _common(p: argparse.ArgumentParser, outputs=True):
    p.add_argument("--config", help="flat 'key = value' configuration file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a configuration key (repeatable)")
    p.add_argument("--seed", type=int, help="override run.seed")
    if outputs:
        p.add_argument("-o", "--output-dir", default=".", help="directory for output files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="truckplatoon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-network", help="generate a random road network and one truck set")
    _common(p)

    p = sub.add_parser("plan-pair", help="print the adapted plan of one follower behind one leader")
    _common(p, outputs=False)
    p.add_argument("--network", required=True)
    p.add_argument("--trucks", required=True)
    p.add_argument("--leader", type=int, required=True)
    p.add_argument("--follower", type=int, required=True)

    p = sub.add_parser("build-graph", help="build and dump the coordination graph")
    _common(p)
    p.add_argument("--network", required=True)
    p.add_argument("--trucks", required=True)

    p = sub.add_parser("cluster", help="run leader selection on a dumped coordination graph")
    _common(p, outputs=False)
    p.add_argument("--graph", required=True)
    p.add_argument("--variant", default="total-greedy", choices=config.VARIANTS)
    p.add_argument("--trace", action="store_true", help="print one 'iter' line per flip")

    p = sub.add_parser("experiment", help="Monte Carlo runs, CSV output")
    _common(p)

    p = sub.add_parser("sweep", help="like experiment, but requires sweep.K or sweep.band_width")
    _common(p)
    return parser


def _load_cfg(args) -> config.ExperimentConfig:
    return config.load(args.config, args.overrides, args.seed)


def _check_outputs(args, outputs):
    inputs = [getattr(args, a, None) for a in ("config", "network", "trucks", "graph")]
    inputs = {Path(p).resolve() for p in inputs if p}
    for out in outputs:
        if Path(out).resolve() in inputs:
            raise config.ConfigInvalid(f"output {out} would overwrite an input file")


def _read(path, reader, *extra):
    try:
        with open(path) as fh:
            return reader(fh, *extra)
    except (OSError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _manifest(args, cfg, out_dir: Path, files):
    data = {
        "command": args.command,
        "argv": sys.argv[1:],
        "version": __version__,
        "backend": default_backend(),
        "rng_algorithm": RNG_ALGORITHM,
        "child_seed_rule": "SeedSequence(entropy=run.seed, spawn_key=(replicate, crc32(tag)))",
        "config": config.to_mapping(cfg),
        "outputs": sorted(files),
    }
    with open(out_dir / "run-manifest.json", "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _outdir(args, names):
    out = Path(args.output_dir)
    paths = [out / n for n in names] + [out / "run-manifest.json"]
    _check_outputs(args, paths)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_network(args):
    cfg = _load_cfg(args)
    out = _outdir(args, ["network.txt", "trucks.txt"])
    net = experiments.network_for(cfg, 0)
    trucks = experiments.generate_trucks(net, cfg.trucks, experiments.child_seed(cfg.seed, "trucks", 0))
    with open(out / "network.txt", "w") as fh:
        write_network(net, fh)
    with open(out / "trucks.txt", "w") as fh:
        write_trucks(trucks, fh)
    _manifest(args, cfg, out, ["network.txt", "trucks.txt"])
    print(f"wrote {out / 'network.txt'} ({net.num_nodes} nodes, {net.num_edges} edges) "
          f"and {out / 'trucks.txt'} ({len(trucks)} trucks)")


def cmd_plan_pair(args):
    cfg = _load_cfg(args)
    net = _read(args.network, read_network)
    trucks = _read(args.trucks, read_trucks, net)
    by_id = {t.truck_id: t for t in trucks}
    for tid in (args.leader, args.follower):
        if tid not in by_id:
            raise InputError(f"no truck with id {tid}")
    plan = adapted_plan(by_id[args.leader], by_id[args.follower], net, cfg.fuel, cfg.v_min, cfg.v_max)
    if plan is None:
        print("no plan")
        return
    for name, value in vars(plan).items():
        print(f"{name} = {value}")
    print(f"saving = {plan.saving!r}")


def cmd_build_graph(args):
    cfg = _load_cfg(args)
    out = _outdir(args, ["coordination-graph.txt"])
    net = _read(args.network, read_network)
    trucks = _read(args.trucks, read_trucks, net)
    g = coordination.build(trucks, net, cfg.fuel, cfg.v_min, cfg.v_max)
    with open(out / "coordination-graph.txt", "w") as fh:
        g.dump(fh)
    _manifest(args, cfg, out, ["coordination-graph.txt"])
    print(f"wrote {out / 'coordination-graph.txt'} ({g.num_nodes} trucks, {g.num_edges} edges)")


def cmd_cluster(args):
    cfg = _load_cfg(args)
    g = _read(args.graph, coordination.CoordinationGraph.load)
    ccfg = clustering.ClusteringConfig.from_name(args.variant, rho_l=cfg.rho_l, seed=cfg.seed,
                                                 max_iterations=cfg.max_iterations)
    ids = g.ids

    def trace(k, node, du, obj):
        print(f"iter {k} {ids[node]} {du!r} {obj!r}")

    res = clustering.run(g, ccfg, trace=trace if args.trace else None)
    print(f"termination {res.termination}")
    print(f"iterations {res.iterations}")
    print(f"objective {res.objective!r}")
    print("leaders " + " ".join(str(ids[j]) for j in sorted(res.leaders)))
    for i in sorted(res.assignment):
        print(f"assign {ids[i]} {ids[res.assignment[i]]}")


def cmd_experiment(args, require_sweep=False):
    cfg = _load_cfg(args)
    if require_sweep and not (cfg.sweep_K or cfg.sweep_band_width):
        raise config.ConfigInvalid("sweep: set sweep.K and/or sweep.band_width")
    out = _outdir(args, ["rows.csv", "aggregate.csv"])
    rows = experiments.run_experiment(cfg)
    agg = experiments.aggregate(rows)
    with open(out / "rows.csv", "w") as fh:
        experiments.write_csv(rows, fh, experiments.ROW_FIELDS)
    with open(out / "aggregate.csv", "w") as fh:
        experiments.write_csv(agg, fh)
    _manifest(args, cfg, out, ["rows.csv", "aggregate.csv"])
    print(f"wrote {len(rows)} rows to {out / 'rows.csv'} and {len(agg)} groups to {out / 'aggregate.csv'}")


COMMANDS = {
    "gen-network": cmd_gen_network,
    "plan-pair": cmd_plan_pair,
    "build-graph": cmd_build_graph,
    "cluster": cmd_cluster,
    "experiment": cmd_experiment,
    "sweep": lambda a: cmd_experiment(a, require_sweep=True),
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse has already printed usage; bad flags count as configuration errors
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (config.ConfigInvalid, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - reported as runtime failure
        LOG.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
