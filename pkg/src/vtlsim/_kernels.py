"""Numba kernels for the hot loops: ray casting, DWA rollout scoring,
and path segment-pair distances.

Everything here is a plain function over float64 arrays so it stays
cacheable and deterministic; the public modules wrap these with typed
interfaces.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def rollout_steps(x, y, th, v, w, n, step, out):
    """Exact-arc unicycle integration; fills out[(n,3)] with poses after
    each substep (start pose excluded)."""
    for k in range(n):
        if abs(w) < 1e-12:
            x += v * step * np.cos(th)
            y += v * step * np.sin(th)
        else:
            th2 = th + w * step
            x += (v / w) * (np.sin(th2) - np.sin(th))
            y -= (v / w) * (np.cos(th2) - np.cos(th))
            th = th2
        out[k, 0] = x
        out[k, 1] = y
        out[k, 2] = th
    return out


@njit(cache=True)
def raycast_many(ox, oy, angles, max_range, circles, width, height, out):
    """Ranges for a fan of rays from (ox, oy) against walls and circles.

    circles: (N, 3) array of (cx, cy, r). out: (len(angles),) ranges,
    clamped to max_range.
    """
    n_circ = circles.shape[0]
    for i in range(angles.shape[0]):
        dx = np.cos(angles[i])
        dy = np.sin(angles[i])
        best = max_range
        # walls (origin assumed inside the arena)
        if dx > 1e-12:
            t = (width - ox) / dx
            if 0.0 < t < best:
                best = t
        elif dx < -1e-12:
            t = -ox / dx
            if 0.0 < t < best:
                best = t
        if dy > 1e-12:
            t = (height - oy) / dy
            if 0.0 < t < best:
                best = t
        elif dy < -1e-12:
            t = -oy / dy
            if 0.0 < t < best:
                best = t
        for c in range(n_circ):
            fx = ox - circles[c, 0]
            fy = oy - circles[c, 1]
            r = circles[c, 2]
            b = fx * dx + fy * dy
            disc = b * b - (fx * fx + fy * fy - r * r)
            if disc <= 0.0:
                continue
            sq = np.sqrt(disc)
            t = -b - sq
            if t < 0.0:
                t = -b + sq  # origin inside the circle
            if 0.0 < t < best:
                best = t
        out[i] = best
    return out


@njit(cache=True)
def dwa_evaluate(px, py, pth, vs, ws, obstacles, safe_radius, hard_radius,
                 recovery_slack, clear_cap, tx, ty, horizon, step,
                 w_heading, w_clear, w_vel, v_max):
    """Score every (v, w) pair; return (v, w, score, feasible_flag).

    A command is discarded when its rollout passes closer than safe_radius
    to any obstacle point. Near the boundary the threshold relaxes to the
    current standing clearance minus recovery_slack — trading a little
    clearance to slide past a blockage instead of freezing against it —
    but never below hard_radius; standing inside hard_radius leaves
    nothing admissible. Ties broken by larger v, then smaller |w|.
    """
    n = int(np.ceil(horizon / step))
    cap2 = clear_cap * clear_cap
    n_obs = obstacles.shape[0]
    d02 = cap2
    for p in range(n_obs):
        ddx = px - obstacles[p, 0]
        ddy = py - obstacles[p, 1]
        d2 = ddx * ddx + ddy * ddy
        if d2 < d02:
            d02 = d2
    r_eff = np.sqrt(d02) - recovery_slack
    if r_eff > safe_radius:
        r_eff = safe_radius
    if r_eff < hard_radius:
        r_eff = hard_radius
    r2 = r_eff * r_eff
    best_score = -1.0
    best_v = 0.0
    best_w = 0.0
    best_absw = 0.0
    feasible = False
    for i in range(vs.shape[0]):
        for j in range(ws.shape[0]):
            v = vs[i]
            w = ws[j]
            x = px
            y = py
            th = pth
            c2 = cap2
            ok = True
            for k in range(n):
                if abs(w) < 1e-12:
                    x += v * step * np.cos(th)
                    y += v * step * np.sin(th)
                else:
                    th2 = th + w * step
                    x += (v / w) * (np.sin(th2) - np.sin(th))
                    y -= (v / w) * (np.cos(th2) - np.cos(th))
                    th = th2
                for p in range(n_obs):
                    ddx = x - obstacles[p, 0]
                    ddy = y - obstacles[p, 1]
                    d2 = ddx * ddx + ddy * ddy
                    if d2 < c2:
                        c2 = d2
                        if c2 < r2:
                            ok = False
                            break
                if not ok:
                    break
            if not ok:
                continue
            feasible = True
            ang = np.arctan2(ty - y, tx - x) - th
            while ang > np.pi:
                ang -= 2.0 * np.pi
            while ang < -np.pi:
                ang += 2.0 * np.pi
            heading = (np.pi - abs(ang)) / np.pi
            clear = np.sqrt(c2) / clear_cap
            score = w_heading * heading + w_clear * clear + w_vel * (v / v_max)
            if score > best_score + 1e-12:
                better = True
            elif score > best_score - 1e-12:
                better = (v > best_v + 1e-12
                          or (v > best_v - 1e-12 and abs(w) < best_absw - 1e-12))
            else:
                better = False
            if better:
                best_score = score
                best_v = v
                best_w = w
                best_absw = abs(w)
    return best_v, best_w, best_score, feasible


@njit(cache=True)
def min_rollout_clearance(px, py, pth, v, w, n, step, obstacles, cap):
    """Minimum distance from a command's rollout to any obstacle point."""
    c2 = cap * cap
    x = px
    y = py
    th = pth
    for k in range(n):
        if abs(w) < 1e-12:
            x += v * step * np.cos(th)
            y += v * step * np.sin(th)
        else:
            th2 = th + w * step
            x += (v / w) * (np.sin(th2) - np.sin(th))
            y -= (v / w) * (np.cos(th2) - np.cos(th))
            th = th2
        for p in range(obstacles.shape[0]):
            ddx = x - obstacles[p, 0]
            ddy = y - obstacles[p, 1]
            d2 = ddx * ddx + ddy * ddy
            if d2 < c2:
                c2 = d2
    return np.sqrt(c2)


@njit(cache=True)
def segment_pair_distances(pa, pb, dist_out, s_out, t_out):
    """All-pairs closest approach between the segments of two polylines.

    pa: (Na, 2), pb: (Nb, 2). Outputs are (Na-1, Nb-1) matrices of the
    minimum distance and the parameters along each segment.
    """
    na = pa.shape[0] - 1
    nb = pb.shape[0] - 1
    for i in range(na):
        a0x = pa[i, 0]
        a0y = pa[i, 1]
        d1x = pa[i + 1, 0] - a0x
        d1y = pa[i + 1, 1] - a0y
        for j in range(nb):
            b0x = pb[j, 0]
            b0y = pb[j, 1]
            d2x = pb[j + 1, 0] - b0x
            d2y = pb[j + 1, 1] - b0y
            rx = a0x - b0x
            ry = a0y - b0y
            a = d1x * d1x + d1y * d1y
            e = d2x * d2x + d2y * d2y
            f = d2x * rx + d2y * ry
            if a <= 1e-18 and e <= 1e-18:
                s = 0.0
                t = 0.0
            elif a <= 1e-18:
                s = 0.0
                t = min(max(f / e, 0.0), 1.0)
            else:
                c = d1x * rx + d1y * ry
                if e <= 1e-18:
                    t = 0.0
                    s = min(max(-c / a, 0.0), 1.0)
                else:
                    b = d1x * d2x + d1y * d2y
                    denom = a * e - b * b
                    if denom > 1e-18:
                        s = min(max((b * f - c * e) / denom, 0.0), 1.0)
                    else:
                        s = 0.0
                    t = (b * s + f) / e
                    if t < 0.0:
                        t = 0.0
                        s = min(max(-c / a, 0.0), 1.0)
                    elif t > 1.0:
                        t = 1.0
                        s = min(max((b - c) / a, 0.0), 1.0)
            cx = a0x + s * d1x - (b0x + t * d2x)
            cy = a0y + s * d1y - (b0y + t * d2y)
            dist_out[i, j] = np.sqrt(cx * cx + cy * cy)
            s_out[i, j] = s
            t_out[i, j] = t
    return dist_out
