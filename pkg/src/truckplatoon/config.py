"""Experiment configuration and the flat ``key = value`` file format.

Keys are dotted (``fuel.F1 = 0.0125``).  Lines starting with ``#`` are
comments.  Unknown keys are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Tuple

from .clustering import ClusteringConfig
from .trucking import FuelParams

VARIANTS = ("total-greedy", "total-random", "pairwise-greedy", "pairwise-random")


class ConfigInvalid(ValueError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    num_locations: int = 100
    side_length: float = 800.0
    detour_factor: float = 1.5
    per_replicate: bool = False


@dataclass(frozen=True)
class TruckConfig:
    K: int = 400
    start_time_interval: float = 1.0
    terminal_subset_size: int = 10
    nominal_speed: float = 80.0
    freeze_terminals: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    trucks: TruckConfig = field(default_factory=TruckConfig)
    fuel: FuelParams = field(default_factory=FuelParams)
    v_min: float = 70.0
    v_max: float = 90.0
    variants: Tuple[str, ...] = VARIANTS
    rho_l: float = 0.5
    max_iterations: int = 1_000_000
    spontaneous_time_gap: float = 0.01
    replicates: int = 100
    seed: int = 0
    workers: int = 1
    sweep_K: Tuple[int, ...] = ()
    sweep_band_width: Tuple[float, ...] = ()

    def clustering_configs(self, seed: int = 0) -> List[ClusteringConfig]:
        return [ClusteringConfig.from_name(v, rho_l=self.rho_l, seed=seed,
                                           max_iterations=self.max_iterations) for v in self.variants]

    def with_band_width(self, width: float) -> "ExperimentConfig":
        v = self.trucks.nominal_speed
        return replace(self, v_min=v - width / 2.0, v_max=v + width / 2.0)

    def with_K(self, K: int) -> "ExperimentConfig":
        return replace(self, trucks=replace(self.trucks, K=int(K)))


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _tuple(conv):
    def parse(s: str):
        items = [x.strip() for x in s.split(",") if x.strip()]
        return tuple(conv(x) for x in items)
    return parse


# key -> (section attribute or None, field name, parser)
KEYS = {
    "network.num_locations": ("network", "num_locations", int),
    "network.side_length": ("network", "side_length", float),
    "network.detour_factor": ("network", "detour_factor", float),
    "network.per_replicate": ("network", "per_replicate", _bool),
    "trucks.K": ("trucks", "K", int),
    "trucks.start_time_interval": ("trucks", "start_time_interval", float),
    "trucks.terminal_subset_size": ("trucks", "terminal_subset_size", int),
    "trucks.nominal_speed": ("trucks", "nominal_speed", float),
    "trucks.freeze_terminals": ("trucks", "freeze_terminals", _bool),
    "fuel.F0": ("fuel", "F0", float),
    "fuel.F1": ("fuel", "F1", float),
    "fuel.Fp0": ("fuel", "Fp0", float),
    "fuel.Fp1": ("fuel", "Fp1", float),
    "band.v_min": (None, "v_min", float),
    "band.v_max": (None, "v_max", float),
    "clustering.variants": (None, "variants", _tuple(str)),
    "clustering.rho_l": (None, "rho_l", float),
    "clustering.max_iterations": (None, "max_iterations", int),
    "spontaneous.time_gap": (None, "spontaneous_time_gap", float),
    "run.replicates": (None, "replicates", int),
    "run.seed": (None, "seed", int),
    "run.workers": (None, "workers", int),
    "sweep.K": (None, "sweep_K", _tuple(int)),
    "sweep.band_width": (None, "sweep_band_width", _tuple(float)),
}


def parse_lines(lines: Iterable[str]) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"line {lineno}: expected 'key = value'")
        key, value = (x.strip() for x in line.split("=", 1))
        if key not in KEYS:
            raise ConfigInvalid(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def parse_overrides(items: Iterable[str]) -> Dict[str, str]:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigInvalid(f"override {item!r} is not key=value")
        key, value = (x.strip() for x in item.split("=", 1))
        if key not in KEYS:
            raise ConfigInvalid(f"unknown key {key!r}")
        out[key] = value
    return out


def from_mapping(values: Dict[str, str], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    sections = {"network": {}, "trucks": {}, "fuel": {}}
    top = {}
    for key, raw in values.items():
        if key not in KEYS:
            raise ConfigInvalid(f"unknown key {key!r}")
        section, name, conv = KEYS[key]
        if isinstance(raw, (list, tuple)):
            raw = ", ".join(str(x) for x in raw)
        try:
            val = conv(str(raw))
        except ValueError as exc:
            raise ConfigInvalid(f"{key}: {exc}") from None
        (sections[section] if section else top)[name] = val
    try:
        fuel = replace(cfg.fuel, **sections["fuel"])
    except ValueError as exc:
        raise ConfigInvalid(f"fuel: {exc}") from None
    cfg = replace(cfg, network=replace(cfg.network, **sections["network"]),
                  trucks=replace(cfg.trucks, **sections["trucks"]), fuel=fuel, **top)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    def bad(key, msg):
        raise ConfigInvalid(f"{key}: {msg}")

    n, t = cfg.network, cfg.trucks
    if n.num_locations < 2:
        bad("network.num_locations", "must be >= 2")
    if not n.side_length > 0:
        bad("network.side_length", "must be positive")
    if not n.detour_factor > 1:
        bad("network.detour_factor", "must exceed 1")
    if t.K < 1:
        bad("trucks.K", "must be >= 1")
    if not t.start_time_interval >= 0:
        bad("trucks.start_time_interval", "must be non-negative")
    if not 2 <= t.terminal_subset_size <= n.num_locations:
        bad("trucks.terminal_subset_size", "must lie in [2, network.num_locations]")
    if not 0 < cfg.v_min <= cfg.v_max:
        bad("band.v_min", "need 0 < v_min <= v_max")
    if not cfg.v_min <= t.nominal_speed <= cfg.v_max:
        bad("trucks.nominal_speed", f"must lie in [{cfg.v_min}, {cfg.v_max}]")
    try:
        cfg.fuel.check_band(cfg.v_min, cfg.v_max)
    except ValueError as exc:
        bad("fuel", str(exc))
    for v in cfg.variants:
        if v not in VARIANTS:
            bad("clustering.variants", f"unknown variant {v!r}; choose from {', '.join(VARIANTS)}")
    if not cfg.variants:
        bad("clustering.variants", "at least one variant is required")
    if not 0 < cfg.rho_l < 1:
        bad("clustering.rho_l", "must lie in (0, 1)")
    if cfg.max_iterations < 1:
        bad("clustering.max_iterations", "must be >= 1")
    if not cfg.spontaneous_time_gap >= 0:
        bad("spontaneous.time_gap", "must be non-negative")
    if cfg.replicates < 1:
        bad("run.replicates", "must be >= 1")
    if cfg.seed < 0:
        bad("run.seed", "must be non-negative")
    if cfg.workers < 1:
        bad("run.workers", "must be >= 1")
    if any(k < 1 for k in cfg.sweep_K):
        bad("sweep.K", "values must be >= 1")
    for w in cfg.sweep_band_width:
        if not 0 <= w < 2 * t.nominal_speed:
            bad("sweep.band_width", f"width {w} must lie in [0, 2 * nominal_speed)")
        try:
            cfg.with_band_width(w).fuel.check_band(t.nominal_speed - w / 2, t.nominal_speed + w / 2)
        except ValueError as exc:
            bad("sweep.band_width", str(exc))


def to_mapping(cfg: ExperimentConfig) -> Dict[str, object]:
    """Resolved configuration keyed like the file format."""
    out = {}
    for key, (section, name, _) in KEYS.items():
        obj = getattr(cfg, section) if section else cfg
        val = getattr(obj, name)
        out[key] = list(val) if isinstance(val, tuple) else val
    return out


def load(path, overrides: Iterable[str] = (), seed: Optional[int] = None) -> ExperimentConfig:
    values = {}
    if path is not None:
        try:
            with open(path) as fh:
                values = parse_lines(fh)
        except OSError as exc:
            raise ConfigInvalid(f"cannot read config: {exc}") from None
    values.update(parse_overrides(overrides))
    if seed is not None:
        values["run.seed"] = str(seed)
    return from_mapping(values)
