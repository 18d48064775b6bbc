"""Hot loops, each in a numba flavour and a vectorised numpy flavour.

``plan_pairs`` evaluates the adapted plan for many (follower, leader) pairs
from precomputed route-pair geometry.  ``leader_tables`` and
``delta_u_all`` evaluate the clustering gains of every node for one leader
set.  The public functions dispatch on ``backend`` (see
:mod:`truckplatoon._accel`).
"""

import numpy as np

from ._accel import njit, resolve_backend

# row layout of the plan output block
PLAN_FIELDS = ("v_merge", "v_split", "t_merge", "t_split", "d_merge", "d_tail",
               "delta_d_start", "delta_d_end", "fuel_adapted", "fuel_default")
N_PLAN = len(PLAN_FIELDS)


# ---------------------------------------------------------------- plan sweep

@njit
def _phase_nb(dd, v0, root, vmin, vmax, clamp_dist, clamp_time):
    # returns (ok, speed, distance)
    if dd == 0.0:
        return True, v0, clamp_dist
    if dd > 0.0:
        v = min(v0 * (1.0 + root), vmax)
    else:
        v = max(v0 * (1.0 - root), vmin)
    if v == v0:
        return False, v, 0.0
    d = v / (v - v0) * dd
    if d < clamp_dist:
        if not clamp_time > 0.0:
            return False, v, d
        d = clamp_dist
        v = clamp_dist / clamp_time
        if not (vmin <= v <= vmax):
            return False, v, d
    return True, v, d


@njit
def _plan_pairs_nb(fol, lead, route, t_start, t_arr, rlen, has, ga, gb, gs, gtail,
                   F0, F1, Fp0, Fp1, vmin, vmax):
    m = fol.shape[0]
    ok = np.zeros(m, dtype=np.bool_)
    out = np.full((N_PLAN, m), np.nan)
    dF0 = F0 - Fp0
    for k in range(m):
        i = fol[k]
        j = lead[k]
        if i == j:
            continue
        ri = route[i]
        rj = route[j]
        if not has[ri, rj]:
            continue
        a = ga[ri, rj]
        b = gb[ri, rj]
        s = gs[ri, rj]
        a2 = gtail[ri, rj]
        length = rlen[ri]
        tS0 = t_start[j]
        tS1 = t_start[i]
        tD1 = t_arr[i]
        v0 = rlen[rj] / (t_arr[j] - tS0)
        v1 = length / (tD1 - tS1)
        r = 1.0 - Fp1 / F1 + dF0 / (F1 * v0)
        if not r > 0.0:
            continue
        root = np.sqrt(r)
        t_F = tS0 + b / v0
        t_L = tS0 + (b + s) / v0
        dd_s = a - b + v0 * (tS1 - tS0)
        dd_sp = a2 - v0 * (tD1 - t_L)
        ok_s, v_s, d_s = _phase_nb(dd_s, v0, root, vmin, vmax, a, t_F - tS1)
        if not ok_s:
            continue
        ok_sp, v_sp, d_sp = _phase_nb(dd_sp, v0, root, vmin, vmax, a2, tD1 - t_L)
        if not ok_sp:
            continue
        if not d_s + d_sp < length:
            continue
        fuel = (d_s * (F1 * v_s + F0) + d_sp * (F1 * v_sp + F0)
                + (length - d_s - d_sp) * (Fp1 * v0 + Fp0))
        fuel_def = length * (F1 * v1 + F0)
        if not fuel < fuel_def:
            continue
        if d_s == 0.0:
            t_m = tS1
        else:
            t_m = max(tS1, tS0 + (b + d_s - a) / v0)
        if d_sp == 0.0:
            t_sp = tD1
        else:
            t_sp = min(tD1, tS0 + (b + (length - d_sp) - a) / v0)
        ok[k] = True
        out[0, k] = v_s
        out[1, k] = v_sp
        out[2, k] = t_m
        out[3, k] = t_sp
        out[4, k] = d_s
        out[5, k] = d_sp
        out[6, k] = dd_s
        out[7, k] = dd_sp
        out[8, k] = fuel
        out[9, k] = fuel_def
    return ok, out


def _phase_np(dd, v0, root, vmin, vmax, clamp_dist, clamp_time):
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(dd > 0, np.minimum(v0 * (1.0 + root), vmax), np.maximum(v0 * (1.0 - root), vmin))
        v = np.where(dd == 0, v0, v)
        ok = (dd == 0) | (v != v0)
        d = np.where(dd == 0, clamp_dist, v / (v - v0) * dd)
        clamp = (dd != 0) & (d < clamp_dist)
        d = np.where(clamp, clamp_dist, d)
        v = np.where(clamp, clamp_dist / clamp_time, v)
        ok &= ~clamp | ((clamp_time > 0) & (vmin <= v) & (v <= vmax))
    return ok, v, d


def _plan_pairs_np(fol, lead, route, t_start, t_arr, rlen, has, ga, gb, gs, gtail,
                   F0, F1, Fp0, Fp1, vmin, vmax):
    m = fol.shape[0]
    ri, rj = route[fol], route[lead]
    ok = has[ri, rj] & (fol != lead)
    a, b, s, a2 = ga[ri, rj], gb[ri, rj], gs[ri, rj], gtail[ri, rj]
    length = rlen[ri]
    tS0, tS1, tD1 = t_start[lead], t_start[fol], t_arr[fol]
    v0 = rlen[rj] / (t_arr[lead] - tS0)
    v1 = length / (tD1 - tS1)
    r = 1.0 - Fp1 / F1 + (F0 - Fp0) / (F1 * v0)
    ok &= r > 0
    root = np.sqrt(np.where(r > 0, r, 0.0))
    t_F = tS0 + b / v0
    t_L = tS0 + (b + s) / v0
    dd_s = a - b + v0 * (tS1 - tS0)
    dd_sp = a2 - v0 * (tD1 - t_L)
    ok_s, v_s, d_s = _phase_np(dd_s, v0, root, vmin, vmax, a, t_F - tS1)
    ok_sp, v_sp, d_sp = _phase_np(dd_sp, v0, root, vmin, vmax, a2, tD1 - t_L)
    ok &= ok_s & ok_sp
    with np.errstate(invalid="ignore"):
        ok &= d_s + d_sp < length
        fuel = (d_s * (F1 * v_s + F0) + d_sp * (F1 * v_sp + F0)
                + (length - d_s - d_sp) * (Fp1 * v0 + Fp0))
        fuel_def = length * (F1 * v1 + F0)
        ok &= fuel < fuel_def
        t_m = np.where(d_s == 0, tS1, np.maximum(tS1, tS0 + (b + d_s - a) / v0))
        t_sp = np.where(d_sp == 0, tD1, np.minimum(tD1, tS0 + (b + (length - d_sp) - a) / v0))
    out = np.full((N_PLAN, m), np.nan)
    cols = (v_s, v_sp, t_m, t_sp, d_s, d_sp, dd_s, dd_sp, fuel, fuel_def)
    for row, col in enumerate(cols):
        out[row, ok] = col[ok]
    return ok, out


def plan_pairs(fol, lead, route, t_start, t_arr, rlen, geometry, params, v_min, v_max, backend=None):
    """Evaluate adapted plans for the pairs ``(fol[k], lead[k])``.

    ``geometry`` is ``(has, a, b, shared, a_tail)``, each indexed by
    ``[follower route, leader route]``.  Returns ``ok`` (plan exists and
    saves fuel) and a ``(N_PLAN, len(fol))`` array laid out as
    :data:`PLAN_FIELDS`; entries where ``ok`` is false are NaN.
    """
    has, ga, gb, gs, gtail = geometry
    fn = _plan_pairs_nb if resolve_backend(backend) == "numba" else _plan_pairs_np
    return fn(np.ascontiguousarray(fol, dtype=np.int64), np.ascontiguousarray(lead, dtype=np.int64),
              route, t_start, t_arr, rlen, has, ga, gb, gs, gtail,
              float(params.F0), float(params.F1), float(params.Fp0), float(params.Fp1),
              float(v_min), float(v_max))


# ---------------------------------------------------------------- clustering

@njit
def _leader_tables_nb(out_ptr, out_idx, out_w, is_leader):
    k = out_ptr.shape[0] - 1
    best = np.zeros(k)
    arg = np.full(k, -1, dtype=np.int64)
    second = np.zeros(k)
    for i in range(k):
        b1 = 0.0
        a1 = -1
        b2 = 0.0
        # out_idx is sorted within a row, so strict '>' keeps the smallest id on ties
        for e in range(out_ptr[i], out_ptr[i + 1]):
            j = out_idx[e]
            if not is_leader[j]:
                continue
            w = out_w[e]
            if w > b1:
                b2 = b1
                b1 = w
                a1 = j
            elif w > b2:
                b2 = w
        best[i] = b1
        arg[i] = a1
        second[i] = b2
    return best, arg, second


def _leader_tables_np(out_ptr, out_idx, out_w, is_leader):
    k = out_ptr.shape[0] - 1
    deg = np.diff(out_ptr)
    row = np.repeat(np.arange(k), deg)
    wm = np.where(is_leader[out_idx], out_w, 0.0)
    best = np.zeros(k)
    np.maximum.at(best, row, wm)
    big = np.iinfo(np.int64).max
    cand = np.where((wm > 0) & (wm == best[row]), out_idx, big)
    arg = np.full(k, big, dtype=np.int64)
    np.minimum.at(arg, row, cand)
    arg[arg == big] = -1
    wm2 = np.where(out_idx == arg[row], 0.0, wm)
    second = np.zeros(k)
    np.maximum.at(second, row, wm2)
    return best, arg, second


@njit
def _delta_u_nb(in_ptr, in_idx, in_w, is_leader, best, arg, second, pairwise, rho_l):
    k = in_ptr.shape[0] - 1
    du = np.zeros(k)
    rho_f = 1.0 - rho_l
    for n in range(k):
        acc = 0.0
        lead = is_leader[n]
        for e in range(in_ptr[n], in_ptr[n + 1]):
            i = in_idx[e]
            if is_leader[i]:
                continue
            w = in_w[e]
            bi = best[i]
            if not lead:
                if pairwise:
                    ai = arg[i]
                    if ai < 0 or w > bi or (w == bi and n < ai):
                        acc += rho_l * w
                elif w > bi:
                    acc += w - bi
            elif arg[i] == n:
                if pairwise:
                    acc += rho_l * w
                else:
                    acc += second[i] - bi
        if pairwise:
            if lead:
                du[n] = rho_f * best[n] - acc
            else:
                du[n] = acc - rho_f * best[n]
        else:
            if lead:
                du[n] = acc + best[n]
            else:
                du[n] = acc - best[n]
    return du


def _delta_u_np(in_ptr, in_idx, in_w, is_leader, best, arg, second, pairwise, rho_l):
    k = in_ptr.shape[0] - 1
    owner = np.repeat(np.arange(k), np.diff(in_ptr))
    i = in_idx
    active = ~is_leader[i]
    lead = is_leader[owner]
    bi = best[i]
    ai = arg[i]
    w = in_w
    rho_f = 1.0 - rho_l
    if pairwise:
        takes = (ai < 0) | (w > bi) | ((w == bi) & (owner < ai))
        contrib = np.where(lead, np.where(ai == owner, rho_l * w, 0.0), np.where(takes, rho_l * w, 0.0))
    else:
        contrib = np.where(lead, np.where(ai == owner, second[i] - bi, 0.0),
                           np.where(w > bi, w - bi, 0.0))
    contrib = np.where(active, contrib, 0.0)
    acc = np.bincount(owner, weights=contrib, minlength=k)
    if pairwise:
        return np.where(is_leader, rho_f * best - acc, acc - rho_f * best)
    return np.where(is_leader, acc + best, acc - best)


def leader_tables(out_ptr, out_idx, out_w, is_leader, backend=None):
    """Per node: best leader weight, its id (-1 if none) and the runner-up weight.

    Leaders are looked up among out-neighbours for every node, leaders
    included; ties pick the smallest id.
    """
    fn = _leader_tables_nb if resolve_backend(backend) == "numba" else _leader_tables_np
    return fn(out_ptr, out_idx, out_w, is_leader)


def delta_u_all(in_ptr, in_idx, in_w, is_leader, tables, pairwise=False, rho_l=0.5, backend=None):
    """Gain of flipping the membership of every node, from the local formulas."""
    best, arg, second = tables
    fn = _delta_u_nb if resolve_backend(backend) == "numba" else _delta_u_np
    return fn(in_ptr, in_idx, in_w, is_leader, best, arg, second, bool(pairwise), float(rho_l))
