"""Fuel-optimal speed adaptation of a coordination follower (CF) to a leader (CL).

The CL keeps its default speed ``v0``.  The CF drives three constant-speed
phases: catch up (or fall back) to the merge point, platoon behind the CL at
``v0``, then drive to its destination so that it arrives on time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from .road_network import Overlap, PathPosition, RoadNetwork, path_distance, shared_subpath
from .trucking import FuelParams, Phase, SpeedProfile, TransportAssignment, default_fuel


class NoFuelAdvantage(ValueError):
    """Platooning at ``v0`` does not save fuel, so no rendezvous speed exists."""


class SignMismatch(ValueError):
    """Speed difference and gap have incompatible signs."""


def _radicand(v0: float, params: FuelParams) -> float:
    return 1.0 - params.Fp1 / params.F1 + params.dF0 / (params.F1 * v0)


def unconstrained_rendezvous_speeds(v0: float, params: FuelParams) -> Tuple[float, float]:
    """Both stationary points ``(slow, fast)`` of the residual fuel."""
    r = _radicand(v0, params)
    if not r > 0:
        raise NoFuelAdvantage(f"no fuel advantage from platooning at v0={v0}")
    root = math.sqrt(r)
    return v0 * (1.0 - root), v0 * (1.0 + root)


def optimal_rendezvous_speed(v0: float, delta_d: float, params: FuelParams,
                             v_min: float, v_max: float) -> float:
    """Fuel-optimal constant speed to close a virtual gap ``delta_d`` to a truck at ``v0``.

    Positive ``delta_d`` means the other truck is ahead, so the result is at
    least ``v0``; negative means it is behind.  The total distance travelled
    does not enter.
    """
    slow, fast = unconstrained_rendezvous_speeds(v0, params)
    if delta_d > 0:
        return min(fast, v_max)
    if delta_d < 0:
        return max(slow, v_min)
    return v0


def catchup_distance(v_s: float, v0: float, delta_d: float) -> float:
    """Distance driven at ``v_s`` until the gap ``delta_d`` to a truck at ``v0`` closes."""
    if delta_d == 0 or (v_s - v0) * delta_d <= 0:
        raise SignMismatch(f"v_s - v0 = {v_s - v0} incompatible with delta_d = {delta_d}")
    return v_s / (v_s - v0) * delta_d


def residual_fuel(v_s: float, v0: float, delta_d: float, params: FuelParams) -> float:
    """Speed-dependent part of the fuel used until the end of the platoon."""
    d_s = catchup_distance(v_s, v0, delta_d)
    return (params.F1 * v_s - params.Fp1 * v0 + params.dF0) * d_s


@dataclass(frozen=True)
class PairGeometry:
    """Arc lengths describing how the follower's path meets the leader's.

    ``a``: follower start to F along the follower path; ``b``: leader start
    to F along the leader path; ``shared``: F to L; ``a_tail``: L to the
    follower's destination.
    """

    a: float
    b: float
    shared: float
    a_tail: float
    overlap: Overlap


def pair_geometry(leader: TransportAssignment, follower: TransportAssignment) -> Optional[PairGeometry]:
    ov = shared_subpath(leader.path, follower.path)
    if ov is None:
        return None
    p0, p1 = leader.path, follower.path
    a = path_distance(p1, p1.start, ov.first1)
    b = path_distance(p0, p0.start, ov.first0)
    a_tail = path_distance(p1, ov.last1, p1.end)
    return PairGeometry(a, b, ov.shared_length, a_tail, ov)


def virtual_gaps(leader: TransportAssignment, follower: TransportAssignment, overlap, v0: float
                 ) -> Tuple[float, float]:
    """Signed virtual position differences at the follower's start and end.

    ``overlap`` is either a :class:`PairGeometry` or the raw
    :class:`~truckplatoon.road_network.Overlap` of the two paths.
    """
    geo = overlap if isinstance(overlap, PairGeometry) else _geometry_from_overlap(leader, follower, overlap)
    t_L = leader.start_time + (geo.b + geo.shared) / v0
    dd_start = geo.a - geo.b + v0 * (follower.start_time - leader.start_time)
    dd_end = geo.a_tail - v0 * (follower.arrival_time - t_L)
    return dd_start, dd_end


def _geometry_from_overlap(leader, follower, ov: Overlap) -> PairGeometry:
    p0, p1 = leader.path, follower.path
    return PairGeometry(path_distance(p1, p1.start, ov.first1), path_distance(p0, p0.start, ov.first0),
                        ov.shared_length, path_distance(p1, ov.last1, p1.end), ov)


@dataclass(frozen=True)
class PairwisePlan:
    leader_id: int
    follower_id: int
    v_merge: float
    v_split: float
    v_platoon: float
    t_merge: float
    t_split: float
    merge_pos: PathPosition
    split_pos: PathPosition
    d_merge: float
    d_tail: float
    delta_d_start: float
    delta_d_end: float
    fuel_adapted: float
    fuel_default: float

    @property
    def saving(self) -> float:
        return self.fuel_default - self.fuel_adapted


def adapted_plan(leader: TransportAssignment, follower: TransportAssignment, net: Optional[RoadNetwork],
                 params: FuelParams, v_min: float, v_max: float) -> Optional[PairwisePlan]:
    """Fuel-optimal plan for ``follower`` to platoon behind ``leader``, or ``None``.

    ``None`` is returned when the paths share no edge, a clamped speed leaves
    the band, the merge point does not lie strictly before the split point,
    or the plan would not save fuel.  ``net`` is only used for its cached
    paths and may be ``None``.
    """
    geo = pair_geometry(leader, follower)
    if geo is None:
        return None
    v0 = leader.default_speed
    length = follower.length
    t_S1, t_D1 = follower.start_time, follower.arrival_time
    t_F = leader.start_time + geo.b / v0
    t_L = leader.start_time + (geo.b + geo.shared) / v0
    dd_s, dd_sp = virtual_gaps(leader, follower, geo, v0)

    try:
        merge = _phase_speed(dd_s, v0, params, v_min, v_max, geo.a, t_F - t_S1)
        split = _phase_speed(dd_sp, v0, params, v_min, v_max, geo.a_tail, t_D1 - t_L)
    except NoFuelAdvantage:
        return None
    if merge is None or split is None:
        return None
    v_s, d_s = merge
    v_sp, d_sp = split
    if not d_s + d_sp < length:
        return None

    fuel = d_s * params.f0(v_s) + d_sp * params.f0(v_sp) + (length - d_s - d_sp) * params.fp(v0)
    fuel_default = default_fuel(follower, params)
    if not fuel < fuel_default:
        return None
    t_merge, t_split = _event_times(leader.start_time, v0, geo.a, geo.b, length, d_s, d_sp, t_S1, t_D1)
    p1 = follower.path
    return PairwisePlan(
        leader_id=leader.truck_id, follower_id=follower.truck_id,
        v_merge=v_s, v_split=v_sp, v_platoon=v0, t_merge=t_merge, t_split=t_split,
        merge_pos=p1.position_at(d_s), split_pos=p1.position_at(length - d_sp),
        d_merge=d_s, d_tail=d_sp, delta_d_start=dd_s, delta_d_end=dd_sp,
        fuel_adapted=fuel, fuel_default=fuel_default,
    )


def _event_times(t_S0, v0, a, b, length, d_s, d_sp, t_S1, t_D1):
    """Times at which the leader passes the merge and split points."""
    # pin zero-length end phases so the profile stays contiguous under rounding
    t_merge = t_S1 if d_s == 0 else max(t_S1, t_S0 + (b + d_s - a) / v0)
    t_split = t_D1 if d_sp == 0 else min(t_D1, t_S0 + (b + (length - d_sp) - a) / v0)
    return t_merge, t_split


def _phase_speed(dd, v0, params, v_min, v_max, clamp_dist, clamp_time):
    """Speed and distance of the catch-up (or final) phase, ``None`` if infeasible.

    ``clamp_dist`` is the distance between the follower's end point of the
    phase and the shared subpath; ``clamp_time`` the time the leader leaves
    for covering it.
    """
    if dd == 0:
        return v0, clamp_dist
    v = optimal_rendezvous_speed(v0, dd, params, v_min, v_max)
    if v == v0:
        return None  # band collapsed onto v0: the gap can never close
    d = catchup_distance(v, v0, dd)
    if d < clamp_dist:
        if not clamp_time > 0:
            return None  # the leader passes the clamp point too early
        d = clamp_dist
        v = clamp_dist / clamp_time
        if not v_min <= v <= v_max:
            return None
    return v, d


def materialize_profile(plan: PairwisePlan, follower: TransportAssignment) -> SpeedProfile:
    """Three-phase speed profile of the follower; zero-length phases are dropped."""
    phases = []
    spans = [
        (follower.start_time, plan.t_merge, plan.v_merge, False),
        (plan.t_merge, plan.t_split, plan.v_platoon, True),
        (plan.t_split, follower.arrival_time, plan.v_split, False),
    ]
    for start, end, v, platoon in spans:
        if end > start:
            phases.append(Phase(start, end, v, platoon, plan.leader_id if platoon else None))
    return SpeedProfile(tuple(phases))
