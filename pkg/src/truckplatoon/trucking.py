"""Transport assignments, piecewise-constant speed profiles and fuel use."""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .road_network import Path, PathPosition, RoadNetwork


class SpeedBoundViolation(ValueError):
    pass


@dataclass(frozen=True)
class FuelParams:
    """Fuel per distance: ``f0(v) = F1*v + F0`` alone, ``fp(v) = Fp1*v + Fp0`` as platoon follower."""

    F0: float = 1.0
    F1: float = 1.0 / 80.0
    Fp0: float = 0.9
    Fp1: float = 0.9 / 80.0

    def __post_init__(self):
        if not self.F1 > self.Fp1 > 0:
            raise ValueError(f"need F1 > Fp1 > 0, got F1={self.F1}, Fp1={self.Fp1}")

    @classmethod
    def scaled(cls, F0=1.0, F1=1.0 / 80.0, factor=0.9):
        return cls(F0=F0, F1=F1, Fp0=factor * F0, Fp1=factor * F1)

    @property
    def dF0(self) -> float:
        return self.F0 - self.Fp0

    def f0(self, v):
        return self.F1 * v + self.F0

    def fp(self, v):
        return self.Fp1 * v + self.Fp0

    def check_band(self, v_min: float, v_max: float) -> None:
        """Platooning must save fuel everywhere in ``[v_min, v_max]``."""
        # both sides are affine in v, so the endpoints decide
        for v in (v_min, v_max):
            if not self.fp(v) < self.f0(v):
                raise ValueError(f"platooning does not save fuel at v={v}")


@dataclass(frozen=True)
class TransportAssignment:
    truck_id: int
    start_node: int
    dest_node: int
    start_time: float
    arrival_time: float
    path: Path

    def __post_init__(self):
        if not self.arrival_time > self.start_time:
            raise ValueError(f"truck {self.truck_id}: arrival must be after start")
        if self.path.nodes[0] != self.start_node or self.path.nodes[-1] != self.dest_node:
            raise ValueError(f"truck {self.truck_id}: path does not join start and destination")

    @classmethod
    def on_network(cls, net: RoadNetwork, truck_id, start_node, dest_node, start_time, arrival_time):
        return cls(int(truck_id), int(start_node), int(dest_node), float(start_time),
                   float(arrival_time), net.shortest_path(int(start_node), int(dest_node)))

    @property
    def length(self) -> float:
        return self.path.total_length

    @property
    def default_speed(self) -> float:
        return self.path.total_length / (self.arrival_time - self.start_time)

    def check_band(self, v_min: float, v_max: float) -> None:
        v = self.default_speed
        if not v_min <= v <= v_max:
            raise SpeedBoundViolation(
                f"truck {self.truck_id}: default speed {v} outside [{v_min}, {v_max}]")


@dataclass(frozen=True)
class Phase:
    start: float
    end: float
    speed: float
    follower: bool = False
    leader_id: Optional[int] = None

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def distance(self) -> float:
        return (self.end - self.start) * self.speed


@dataclass(frozen=True)
class SpeedProfile:
    phases: Tuple[Phase, ...]

    def __post_init__(self):
        if not self.phases:
            raise ValueError("empty speed profile")
        for p, q in zip(self.phases, self.phases[1:]):
            if p.end != q.start:
                raise ValueError("phases must be contiguous")
        for p in self.phases:
            if not p.end > p.start:
                raise ValueError("phases must have positive duration")
            if not p.speed > 0:
                raise ValueError("speeds must be positive")

    @property
    def start(self) -> float:
        return self.phases[0].start

    @property
    def end(self) -> float:
        return self.phases[-1].end

    @property
    def distance(self) -> float:
        return sum(p.distance for p in self.phases)

    def speed_at(self, t: float) -> float:
        k = bisect_right([p.start for p in self.phases], t) - 1
        return self.phases[min(max(k, 0), len(self.phases) - 1)].speed

    def check_band(self, v_min: float, v_max: float) -> None:
        for p in self.phases:
            if not v_min <= p.speed <= v_max:
                raise SpeedBoundViolation(f"phase speed {p.speed} outside [{v_min}, {v_max}]")

    def check_covers(self, a: TransportAssignment, rtol: float = 1e-9) -> None:
        if self.start != a.start_time or self.end != a.arrival_time:
            raise ValueError("profile does not cover [t_start, t_arrive)")
        if abs(self.distance - a.length) > rtol * a.length:
            raise ValueError(f"profile covers {self.distance}, path is {a.length}")


def default_profile(a: TransportAssignment) -> SpeedProfile:
    return SpeedProfile((Phase(a.start_time, a.arrival_time, a.default_speed),))


class Trajectory:
    """Position along a path as a function of time for a piecewise-constant profile."""

    def __init__(self, path: Path, profile: SpeedProfile):
        self.path = path
        self.profile = profile
        self._t = np.array([p.start for p in profile.phases] + [profile.end])
        self._v = np.array([p.speed for p in profile.phases])
        self._s = np.concatenate(([0.0], np.cumsum(self._v * np.diff(self._t))))
        ends = np.cumsum(path.weights)
        jumps = [profile.start]
        jumps += [self.time_at_arc(s) for s in ends[:-1]]
        jumps.append(profile.end)
        self.jump_times = np.array(jumps)

    def arc_length(self, t):
        """Arc length travelled at time ``t`` (scalar or array)."""
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self._t, t, side="right") - 1, 0, len(self._v) - 1)
        s = self._s[k] + self._v[k] * (t - self._t[k])
        return np.minimum(s, self.path.total_length) if s.ndim else float(min(s, self.path.total_length))

    def time_at_arc(self, s: float) -> float:
        k = int(np.clip(np.searchsorted(self._s, s, side="right") - 1, 0, len(self._v) - 1))
        return float(self._t[k] + (s - self._s[k]) / self._v[k])

    def position(self, t: float) -> PathPosition:
        return self.path.position_at(min(self.arc_length(t), self.path.total_length))

    def time_at(self, pos: PathPosition) -> float:
        """Inverse of :meth:`position`: when the truck is at ``pos``."""
        return self.time_at_arc(self.path.arc_length(pos))


def trajectory(a: TransportAssignment, s: SpeedProfile, v_min: Optional[float] = None,
               v_max: Optional[float] = None) -> Trajectory:
    if v_min is not None and v_max is not None:
        s.check_band(v_min, v_max)
    s.check_covers(a)
    return Trajectory(a.path, s)


def fuel_consumption(a: TransportAssignment, s: SpeedProfile, params: FuelParams) -> float:
    total = 0.0
    for p in s.phases:
        f = params.fp(p.speed) if p.follower else params.f0(p.speed)
        total += p.distance * f
    return total


def default_fuel(a: TransportAssignment, params: FuelParams) -> float:
    return a.length * params.f0(a.default_speed)


def write_trucks(trucks: Sequence[TransportAssignment], fh) -> None:
    for a in trucks:
        fh.write(f"truck {a.truck_id} {a.start_node} {a.dest_node} "
                 f"{a.start_time!r} {a.arrival_time!r}\n")


def read_trucks(lines: Iterable[str], net: RoadNetwork) -> List[TransportAssignment]:
    out = []
    for lineno, line in enumerate(lines, 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] != "truck" or len(parts) != 6:
            raise ValueError(f"line {lineno}: expected 'truck <id> <start> <dest> <t_start> <t_arrive>'")
        out.append(TransportAssignment.on_network(net, int(parts[1]), int(parts[2]), int(parts[3]),
                                                  float(parts[4]), float(parts[5])))
    ids = [a.truck_id for a in out]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate truck ids")
    return out
