"""Discrete-time engine: steps all robots (DWA control, motion
integration, collision accounting), enforces coordinator verdicts,
detects stuck robots, triggers replans, and produces per-trial metrics
and traces."""

from __future__ import annotations

import json
import math
import time
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .coordinator import STOP, Coordinator, CoordinatorConfig
from .geometry import Point2, Pose2
from .global_planner import (InvalidStart, Mission, NoPath, PlannedPath,
                             SamplingExhausted, annotate_etas, plan_path,
                             sample_mission)
from .local_planner import (DwaConfig, LidarConfig, VelocityCommand,
                            select_command, simulate_lidar)
from .world import WorldConfig, build_world, free_at

HYBRID = "hybrid"
DECENTRALIZED = "decentralized"

NAVIGATING = "NAVIGATING"
HELD = "HELD"
REPLANNING = "REPLANNING"
REACHED = "REACHED"
TIMED_OUT = "TIMED_OUT"

TERMINAL = (REACHED, TIMED_OUT)


@dataclass(frozen=True)
class TrialConfig:
    mode: str = HYBRID
    n_robots: int = 1
    world: WorldConfig = field(default_factory=WorldConfig)
    dwa: DwaConfig = field(default_factory=DwaConfig)
    lidar: LidarConfig = field(default_factory=LidarConfig)
    coordinator: CoordinatorConfig = field(default_factory=CoordinatorConfig)
    robot_radius: float = 1.5
    dt: float = 0.1
    timeout: float = 135.0
    goal_tolerance: float = 1.5
    patience_min: float = 3.0
    patience_max: float = 6.0
    stuck_displacement: float = 0.5
    eta_speed_factor: float = 0.8     # ETA speed = factor * v_max
    min_start_gap: float = 1.0
    record_trace: bool = True

    def __post_init__(self):
        if self.mode not in (HYBRID, DECENTRALIZED):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.n_robots < 1:
            raise ValueError("n_robots must be >= 1")
        if self.dwa.robot_radius != self.robot_radius:
            object.__setattr__(self, "dwa",
                               replace(self.dwa, robot_radius=self.robot_radius))

    @property
    def nominal_speed(self) -> float:
        return self.eta_speed_factor * self.dwa.limits.v_max


@dataclass
class RobotState:
    id: str
    pose: Pose2
    velocity: VelocityCommand
    radius: float
    mission: Mission
    path: PlannedPath
    patience: float
    status: str = NAVIGATING
    progress_history: deque = field(default_factory=deque)
    replan_count: int = 0
    distance_travelled: float = 0.0
    steps_active: int = 0
    time_to_goal: float = math.nan
    last_held_time: float = -math.inf

    @property
    def terminal(self) -> bool:
        return self.status in TERMINAL


@dataclass(frozen=True)
class SimEvent:
    t: float
    robot_id: str
    kind: str
    info: str = ""


@dataclass
class TrialResult:
    mode: str
    n_robots: int
    seed: int
    robot_ids: list
    success: list                    # bool per robot
    avg_speed: list                  # (units per step) * 100, per robot
    replans: list
    time_to_goal: list
    rr_collisions: int
    ro_collisions: int
    max_cluster_size: int
    wall_ms: float = field(compare=False, default=0.0)

    @property
    def success_rate(self) -> float:
        return sum(self.success) / self.n_robots

    @property
    def total_replans(self) -> int:
        return sum(self.replans)

    @property
    def mean_speed(self) -> float:
        return float(np.mean(self.avg_speed))


class Simulation:
    """One deterministic trial. Build with (config, seed), call run()."""

    def __init__(self, cfg: TrialConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.world = build_world(cfg.world)
        self.t = 0.0
        self.step_count = 0
        self.trace = []
        self.events = []
        self.rr_collisions = 0
        self.ro_collisions = 0
        self.max_cluster_size = 0
        self._pair_overlap = set()
        self._obstacle_overlap = set()
        self._traced_paths = {}
        self.coordinator = (Coordinator(cfg.coordinator)
                            if cfg.mode == HYBRID else None)
        self.robots = {}
        self._spawn_robots()

    # -- setup ---------------------------------------------------------

    def _spawn_robots(self):
        cfg = self.cfg
        starts = []
        for i in range(cfg.n_robots):
            rid = f"r{i:02d}"
            for _ in range(200):
                mission = sample_mission(self.world, cfg.robot_radius, self.rng)
                s = mission.start
                if any(math.hypot(s.x - o.x, s.y - o.y)
                       < 2 * cfg.robot_radius + cfg.min_start_gap
                       for o in starts):
                    continue
                try:
                    path = plan_path(self.world, mission.start, mission.goal,
                                     cfg.robot_radius, robot_id=rid)
                except (NoPath, InvalidStart):
                    continue
                break
            else:
                raise SamplingExhausted(
                    f"could not place robot {rid} after 200 attempts")
            starts.append(s)
            heading = math.atan2(path.waypoints[min(1, len(path.waypoints) - 1), 1] - s.y,
                                 path.waypoints[min(1, len(path.waypoints) - 1), 0] - s.x)
            patience = float(self.rng.uniform(cfg.patience_min, cfg.patience_max))
            self.robots[rid] = RobotState(
                rid, Pose2(s.x, s.y, heading), VelocityCommand(),
                cfg.robot_radius, mission,
                annotate_etas(path, cfg.nominal_speed, 0.0), patience)

    # -- per-step logic ------------------------------------------------

    def _active_discs(self, exclude: str):
        return [(Point2(r.pose.x, r.pose.y), r.radius)
                for r in self.robots.values()
                if r.id != exclude and r.status != REACHED]

    def detect_stuck(self, robot: RobotState, now: float) -> bool:
        """Near-zero net displacement over the trailing patience window,
        not counting windows that include a coordinator hold."""
        if robot.last_held_time > now - robot.patience:
            return False
        hist = robot.progress_history
        if not hist or hist[0][0] > now - robot.patience + 1e-9:
            return False
        x0, y0 = hist[0][1], hist[0][2]
        return math.hypot(robot.pose.x - x0, robot.pose.y - y0) \
            < self.cfg.stuck_displacement

    def trigger_replan(self, robot: RobotState):
        robot.replan_count += 1
        robot.status = REPLANNING
        extras = self._active_discs(exclude=robot.id)
        try:
            path = plan_path(self.world, Point2(robot.pose.x, robot.pose.y),
                             robot.mission.goal, robot.radius,
                             extra_obstacles=extras, robot_id=robot.id)
        except (NoPath, InvalidStart) as exc:
            self.events.append(SimEvent(self.t, robot.id, "replan_failed",
                                        type(exc).__name__))
        else:
            robot.path = annotate_etas(path, self.cfg.nominal_speed, self.t)
            self.events.append(SimEvent(self.t, robot.id, "replan"))
        robot.progress_history.clear()
        robot.status = NAVIGATING

    def step(self):
        """One fixed-dt simulation step; returns the events it raised."""
        cfg = self.cfg
        now = self.t
        first_event = len(self.events)

        held_ids = set()
        cmds = []
        if self.coordinator is not None:
            active = {r.id: r for r in self.robots.values() if not r.terminal}
            if active:
                poses = {rid: (r.pose, now) for rid, r in active.items()}
                paths = {rid: r.path for rid, r in active.items()}
                cmds = self.coordinator.tick(poses, paths, now)
                held_ids = {c.robot_id for c in cmds if c.verdict == STOP}
                for z in self.coordinator.zones.values():
                    self.max_cluster_size = max(self.max_cluster_size,
                                                len(z.members))

        for rid in sorted(self.robots):
            robot = self.robots[rid]
            if robot.terminal:
                continue
            goal = robot.mission.goal
            if math.hypot(robot.pose.x - goal.x,
                          robot.pose.y - goal.y) <= cfg.goal_tolerance:
                robot.status = REACHED
                robot.time_to_goal = now
                continue
            if now >= cfg.timeout:
                robot.status = TIMED_OUT
                continue
            robot.steps_active += 1
            if rid in held_ids:
                robot.status = HELD
                robot.velocity = VelocityCommand()
                robot.last_held_time = now
            else:
                robot.status = NAVIGATING
                scan = simulate_lidar(self.world, self._active_discs(rid),
                                      robot.pose, cfg.lidar)
                cmd = select_command(robot.pose, robot.velocity, robot.path,
                                     scan, cfg.dwa)
                if cmd is None:
                    # every sampled command would collide; halt and let
                    # stuck detection trigger a replan
                    cmd = VelocityCommand()
                    self.events.append(SimEvent(now, rid, "infeasible"))
                out = np.empty((1, 3))
                _kernels.rollout_steps(robot.pose.x, robot.pose.y,
                                       robot.pose.heading, cmd.v, cmd.w,
                                       1, cfg.dt, out)
                moved = math.hypot(out[0, 0] - robot.pose.x,
                                   out[0, 1] - robot.pose.y)
                robot.pose = Pose2(out[0, 0], out[0, 1], out[0, 2])
                robot.velocity = cmd
                robot.distance_travelled += moved
            robot.progress_history.append((now, robot.pose.x, robot.pose.y))
            while robot.progress_history[0][0] < now - robot.patience - 1.0:
                robot.progress_history.popleft()
            if self.detect_stuck(robot, now):
                self.trigger_replan(robot)

        self._record_collisions(now)
        if cfg.record_trace:
            self._record_trace(now, cmds)
        self.t = round(self.t + cfg.dt, 9)
        self.step_count += 1
        return self.events[first_event:]

    def _record_collisions(self, now):
        active = [r for r in self.robots.values() if r.status not in
                  (REACHED, TIMED_OUT)]
        for i in range(len(active)):
            a = active[i]
            for j in range(i + 1, len(active)):
                b = active[j]
                key = (a.id, b.id)
                overlap = math.hypot(a.pose.x - b.pose.x,
                                     a.pose.y - b.pose.y) < a.radius + b.radius
                if overlap and key not in self._pair_overlap:
                    self.rr_collisions += 1
                    self.events.append(SimEvent(now, a.id, "collision_robot",
                                                b.id))
                if overlap:
                    self._pair_overlap.add(key)
                else:
                    self._pair_overlap.discard(key)
        for r in active:
            overlap = not free_at(self.world, r.pose.x, r.pose.y, r.radius)
            if overlap and r.id not in self._obstacle_overlap:
                self.ro_collisions += 1
                self.events.append(SimEvent(now, r.id, "collision_obstacle"))
            if overlap:
                self._obstacle_overlap.add(r.id)
            else:
                self._obstacle_overlap.discard(r.id)

    def _record_trace(self, now, cmds):
        zones = []
        if self.coordinator is not None:
            for zid, z in self.coordinator.zones.items():
                zones.append({"id": zid,
                              "bbox": [round(z.bbox.x0, 4), round(z.bbox.y0, 4),
                                       round(z.bbox.x1, 4), round(z.bbox.y1, 4)],
                              "occupied": z.occupied})
        step_events = [e for e in self.events if e.t == now
                       and e.kind in ("replan", "replan_failed")]
        announced = []
        for rid in sorted(self.robots):
            r = self.robots[rid]
            if self._traced_paths.get(rid) is not r.path:
                self._traced_paths[rid] = r.path
                announced.append(
                    {"robot": rid,
                     "waypoints": [[round(float(x), 4), round(float(y), 4)]
                                   for x, y in r.path.waypoints]})
        self.trace.append({
            "t": round(now, 4),
            "robots": [{"id": r.id,
                        "x": round(r.pose.x, 4), "y": round(r.pose.y, 4),
                        "heading": round(r.pose.heading, 4),
                        "status": r.status}
                       for r in self.robots.values()],
            "zones": zones,
            "cmds": [{"robot": c.robot_id, "verdict": c.verdict,
                      "zone": c.zone_id} for c in cmds],
            "events": [{"robot": e.robot_id, "kind": e.kind}
                       for e in step_events],
            "paths": announced,
        })

    # -- trial driver --------------------------------------------------

    @property
    def done(self) -> bool:
        return all(r.terminal for r in self.robots.values())

    def run(self) -> TrialResult:
        t0 = time.perf_counter()
        max_steps = int(self.cfg.timeout / self.cfg.dt) + 2
        while not self.done and self.step_count <= max_steps:
            self.step()
        ids = sorted(self.robots)
        robots = [self.robots[i] for i in ids]
        return TrialResult(
            mode=self.cfg.mode,
            n_robots=self.cfg.n_robots,
            seed=self.seed,
            robot_ids=ids,
            success=[r.status == REACHED for r in robots],
            avg_speed=[100.0 * r.distance_travelled / max(r.steps_active, 1)
                       for r in robots],
            replans=[r.replan_count for r in robots],
            time_to_goal=[r.time_to_goal for r in robots],
            rr_collisions=self.rr_collisions,
            ro_collisions=self.ro_collisions,
            max_cluster_size=self.max_cluster_size,
            wall_ms=(time.perf_counter() - t0) * 1e3,
        )

    def write_trace(self, path):
        with open(path, "w") as fh:
            for rec in self.trace:
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def run_trial(cfg: TrialConfig, seed: int, trace_path=None) -> TrialResult:
    """Run one trial to completion; deterministic in (cfg, seed)."""
    if trace_path is not None and not cfg.record_trace:
        cfg = replace(cfg, record_trace=True)
    sim = Simulation(cfg, seed)
    result = sim.run()
    if trace_path is not None:
        sim.write_trace(trace_path)
    return result
