"""Dynamic Window Approach local controller plus the simulated LIDAR
that feeds it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import Pose2
from .global_planner import PlannedPath
from .world import WorldMap


@dataclass(frozen=True)
class KinematicLimits:
    v_max: float = 2.0
    v_min: float = 0.0
    w_max: float = 1.5
    a_lin: float = 2.0
    a_ang: float = 3.0


@dataclass(frozen=True)
class VelocityCommand:
    v: float = 0.0
    w: float = 0.0


@dataclass(frozen=True)
class LidarConfig:
    n_rays: int = 72
    span: float = 2.0 * math.pi
    max_range: float = 12.0


@dataclass(frozen=True)
class DwaConfig:
    limits: KinematicLimits = field(default_factory=KinematicLimits)
    dt: float = 0.1                 # control interval
    horizon: float = 1.5            # rollout length, seconds
    rollout_step: float = 0.1
    n_v: int = 11
    n_w: int = 21
    w_heading: float = 0.8
    w_clear: float = 0.2
    w_vel: float = 0.1
    robot_radius: float = 1.5
    clearance_margin: float = 0.2   # extra slack over the radius when pruning
    recovery_slack: float = 0.1     # allowed clearance loss while recovering
    hard_margin: float = 0.05       # recovery never dips below radius + this
    lookahead: float = 3.0


@dataclass
class LidarScan:
    ranges: np.ndarray          # (n_rays,)
    angles: np.ndarray          # world-frame ray angles, (n_rays,)
    max_range: float
    origin: Pose2

    def hit_points(self) -> np.ndarray:
        """World-frame (x, y) of rays that hit something, (P, 2)."""
        hit = self.ranges < self.max_range - 1e-9
        r = self.ranges[hit]
        a = self.angles[hit]
        return np.column_stack([self.origin.x + r * np.cos(a),
                                self.origin.y + r * np.sin(a)])


def simulate_lidar(world: WorldMap, others, pose: Pose2,
                   cfg: LidarConfig = LidarConfig()) -> LidarScan:
    """One raycast per ray, evenly spaced over the span, rotated by the
    robot heading. `others` is a list of (Point2, radius) dynamic discs."""
    if cfg.n_rays < 1:
        raise ValueError("n_rays must be >= 1")
    if cfg.n_rays == 1:
        rel = np.zeros(1)
    elif abs(cfg.span - 2.0 * math.pi) < 1e-9:
        rel = np.linspace(0.0, cfg.span, cfg.n_rays, endpoint=False)
    else:
        rel = np.linspace(-cfg.span / 2.0, cfg.span / 2.0, cfg.n_rays)
    angles = pose.heading + rel
    circles = world.circles()
    if others:
        extra = np.array([[c.x, c.y, r] for c, r in others])
        circles = np.vstack([circles, extra]) if circles.size else extra
    ranges = np.empty(cfg.n_rays)
    _kernels.raycast_many(pose.x, pose.y, angles, cfg.max_range, circles,
                          world.width, world.height, ranges)
    return LidarScan(ranges, angles, cfg.max_range, pose)


def dynamic_window(current: VelocityCommand, limits: KinematicLimits,
                   dt: float):
    """Velocity-space rectangle reachable within one control interval."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    v_lo = max(limits.v_min, current.v - limits.a_lin * dt)
    v_hi = min(limits.v_max, current.v + limits.a_lin * dt)
    w_lo = max(-limits.w_max, current.w - limits.a_ang * dt)
    w_hi = min(limits.w_max, current.w + limits.a_ang * dt)
    return (v_lo, v_hi), (w_lo, w_hi)


def rollout(pose: Pose2, cmd: VelocityCommand, horizon: float,
            step: float) -> np.ndarray:
    """Constant-velocity unicycle rollout; ceil(horizon/step) poses,
    start pose excluded."""
    if step <= 0 or horizon < step:
        raise ValueError("need horizon >= step > 0")
    n = int(math.ceil(horizon / step))
    out = np.empty((n, 3))
    _kernels.rollout_steps(pose.x, pose.y, pose.heading, cmd.v, cmd.w,
                           n, step, out)
    return out


def path_target(path: PlannedPath, pose: Pose2, lookahead: float) -> np.ndarray:
    """Point on the path the controller should steer toward: the position
    one lookahead of arc length past the robot's projection onto the
    closest segment (pure pursuit), so tight detours are followed around
    their corners instead of being cut."""
    wps = path.waypoints
    if len(wps) == 1:
        return wps[0]
    p = np.array([pose.x, pose.y])
    # closest segment to the robot
    a = wps[:-1]
    b = wps[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom[denom == 0.0] = 1.0
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    seg = int(np.argmin(np.hypot(*(proj - p).T)))
    cur = proj[seg]
    remaining = lookahead
    for k in range(seg, len(wps) - 1):
        d = float(np.hypot(*(wps[k + 1] - cur)))
        if d >= remaining:
            return cur + (wps[k + 1] - cur) * (remaining / d) if d > 0 else cur
        remaining -= d
        cur = wps[k + 1]
    return wps[-1]


def select_command(pose: Pose2, velocity: VelocityCommand, path: PlannedPath,
                   scan: LidarScan, cfg: DwaConfig = DwaConfig()):
    """Best admissible command in the dynamic window, or None when every
    sampled command's rollout would pass too close to an obstacle."""
    (v_lo, v_hi), (w_lo, w_hi) = dynamic_window(velocity, cfg.limits, cfg.dt)
    vs = np.linspace(v_lo, v_hi, cfg.n_v) if cfg.n_v > 1 else np.array([v_lo])
    ws = np.linspace(w_lo, w_hi, cfg.n_w) if cfg.n_w > 1 else np.array([w_lo])
    obstacles = scan.hit_points()
    # when standing inside the recovery band, shrink the lookahead to the
    # standing clearance so the evasive jog of a detour is tracked instead
    # of corner-cut straight back into the blockage
    lookahead = cfg.lookahead
    if len(obstacles):
        d0 = float(np.min(np.hypot(obstacles[:, 0] - pose.x,
                                   obstacles[:, 1] - pose.y)))
        if d0 < cfg.robot_radius + cfg.clearance_margin + cfg.recovery_slack:
            lookahead = min(cfg.lookahead, max(1.0, d0))
    target = path_target(path, pose, lookahead)
    v, w, _, feasible = _kernels.dwa_evaluate(
        pose.x, pose.y, pose.heading, vs, ws, obstacles,
        cfg.robot_radius + cfg.clearance_margin,
        cfg.robot_radius + cfg.hard_margin,
        cfg.recovery_slack, scan.max_range,
        float(target[0]), float(target[1]),
        cfg.horizon, cfg.rollout_step,
        cfg.w_heading, cfg.w_clear, cfg.w_vel, cfg.limits.v_max)
    if not feasible:
        return None
    return VelocityCommand(float(v), float(w))


def min_clearance(pose: Pose2, cmd: VelocityCommand, scan: LidarScan,
                  cfg: DwaConfig) -> float:
    """Minimum rollout clearance of a command against the scan's hit
    points (post-hoc safety check)."""
    obstacles = scan.hit_points()
    if len(obstacles) == 0:
        return scan.max_range
    n = int(math.ceil(cfg.horizon / cfg.rollout_step))
    return float(_kernels.min_rollout_clearance(
        pose.x, pose.y, pose.heading, cmd.v, cmd.w, n, cfg.rollout_step,
        obstacles, scan.max_range))
