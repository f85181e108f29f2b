"""Decentralized global planning: grid A* with obstacle inflation,
line-of-sight shortcutting, ETA annotation, and mission sampling."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import Point2, point_segment_distance
from .world import WorldMap, free_at

# Extra inflation on top of the robot radius so grid paths keep slack for
# cell-center discretization and DWA tracking error.
INFLATION_MARGIN = 0.3

SQRT2 = math.sqrt(2.0)


class NoPath(Exception):
    pass


class InvalidStart(Exception):
    pass


class SamplingExhausted(Exception):
    pass


@dataclass
class PlannedPath:
    robot_id: str
    waypoints: np.ndarray          # (N, 2)
    etas: np.ndarray               # (N,)
    announced_at: float = 0.0

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=float).reshape(-1, 2)
        self.etas = np.asarray(self.etas, dtype=float).reshape(-1)
        if len(self.waypoints) == 0:
            raise ValueError("path must have at least one waypoint")
        if len(self.etas) != len(self.waypoints):
            raise ValueError("etas and waypoints must have equal length")
        if np.any(np.diff(self.etas) < 0):
            raise ValueError("etas must be non-decreasing")

    def length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.waypoints, axis=0).T)))

    def cumulative_lengths(self) -> np.ndarray:
        seg = np.hypot(*np.diff(self.waypoints, axis=0).T)
        return np.concatenate([[0.0], np.cumsum(seg)])


@dataclass(frozen=True)
class Mission:
    start: Point2
    goal: Point2


@dataclass
class OccupancyGrid:
    resolution: float
    blocked: np.ndarray            # (nx, ny) bool, indexed [ix, iy]

    def cell_of(self, x: float, y: float):
        nx, ny = self.blocked.shape
        ix = min(max(int(x / self.resolution), 0), nx - 1)
        iy = min(max(int(y / self.resolution), 0), ny - 1)
        return ix, iy

    def center_of(self, cell):
        return ((cell[0] + 0.5) * self.resolution,
                (cell[1] + 0.5) * self.resolution)


@lru_cache(maxsize=16)
def _base_blocked(world: WorldMap, inflation: float) -> np.ndarray:
    res = world.grid_resolution
    nx = int(round(world.width / res))
    ny = int(round(world.height / res))
    cx = (np.arange(nx) + 0.5) * res
    cy = (np.arange(ny) + 0.5) * res
    gx, gy = np.meshgrid(cx, cy, indexing="ij")
    blocked = ((gx < inflation) | (gx > world.width - inflation)
               | (gy < inflation) | (gy > world.height - inflation))
    for p in world.pillars:
        blocked |= np.hypot(gx - p.center.x, gy - p.center.y) < p.radius + inflation
    return blocked


def build_grid(world: WorldMap, robot_radius: float,
               extra_obstacles=(), anchors=()) -> OccupancyGrid:
    """Occupancy grid inflated by robot_radius (+ margin); extra obstacles
    are stamped the same way.

    Any extra obstacle whose inflated stamp would swallow an anchor point
    (the planning start or goal) is stamped with a radius shrunk to just
    inside that anchor's actual distance, so a robot replanning from — or
    toward — another robot's clearance envelope still has a connected
    grid to plan on."""
    inflation = robot_radius + INFLATION_MARGIN
    blocked = _base_blocked(world, inflation).copy()
    if extra_obstacles:
        res = world.grid_resolution
        nx, ny = blocked.shape
        cx = (np.arange(nx) + 0.5) * res
        cy = (np.arange(ny) + 0.5) * res
        gx, gy = np.meshgrid(cx, cy, indexing="ij")
        for center, radius in extra_obstacles:
            stamp = radius + inflation
            for a in anchors:
                d = math.hypot(a.x - center.x, a.y - center.y)
                if d < stamp:
                    stamp = d
            blocked |= np.hypot(gx - center.x, gy - center.y) < stamp
    return OccupancyGrid(world.grid_resolution, blocked)


_NEIGHBORS = ((1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
              (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2))


def astar(grid: OccupancyGrid, start_cell, goal_cell):
    """8-connected A* with octile heuristic; diagonals may not cut corners.

    Returns (cells, cost) with cost in length units. Raises NoPath.
    """
    blocked = grid.blocked
    nx, ny = blocked.shape
    if blocked[goal_cell]:
        raise NoPath("goal cell blocked")
    res = grid.resolution

    def h(c):
        dx = abs(c[0] - goal_cell[0])
        dy = abs(c[1] - goal_cell[1])
        return (max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)) * res

    g = {start_cell: 0.0}
    parent = {}
    counter = 0
    heap = [(h(start_cell), counter, start_cell)]
    closed = set()
    while heap:
        _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        if cur == goal_cell:
            cells = [cur]
            while cur in parent:
                cur = parent[cur]
                cells.append(cur)
            cells.reverse()
            return cells, g[goal_cell]
        closed.add(cur)
        cx, cy = cur
        for dx, dy, step in _NEIGHBORS:
            x, y = cx + dx, cy + dy
            if x < 0 or y < 0 or x >= nx or y >= ny or blocked[x, y]:
                continue
            if dx and dy and (blocked[cx + dx, cy] or blocked[cx, cy + dy]):
                continue
            ng = g[cur] + step * res
            nb = (x, y)
            if ng < g.get(nb, math.inf) - 1e-12:
                g[nb] = ng
                parent[nb] = cur
                counter += 1
                heapq.heappush(heap, (ng + h(nb), counter, nb))
    raise NoPath("goal unreachable")


def segment_clear(world: WorldMap, a: np.ndarray, b: np.ndarray,
                  clearance: float, extra_obstacles=()) -> bool:
    """True if the whole segment keeps `clearance` from walls, pillars,
    and any extra (center, radius) discs."""
    for v in (a, b):
        if (v[0] < clearance or v[0] > world.width - clearance
                or v[1] < clearance or v[1] > world.height - clearance):
            return False
    for p in world.pillars:
        if point_segment_distance(p.center.to_array(), a, b) < p.radius + clearance:
            return False
    for center, radius in extra_obstacles:
        if point_segment_distance(center.to_array(), a, b) < radius + clearance:
            return False
    return True


def shortcut(world: WorldMap, points: np.ndarray, clearance: float,
             extra_obstacles=()) -> np.ndarray:
    """Greedy string-pulling: from each kept point, jump to the farthest
    point reachable in a straight clear line."""
    points = np.asarray(points, dtype=float)
    if len(points) <= 2:
        return points
    kept = [0]
    i = 0
    while i < len(points) - 1:
        j = len(points) - 1
        while j > i + 1 and not segment_clear(world, points[i], points[j],
                                              clearance, extra_obstacles):
            j -= 1
        kept.append(j)
        i = j
    return points[kept]


def plan_path(world: WorldMap, start: Point2, goal: Point2, robot_radius: float,
              extra_obstacles=(), robot_id: str = "r0") -> PlannedPath:
    """A* over the inflated grid, then line-of-sight shortcutting.

    Raises InvalidStart if the start is inside an obstacle, NoPath if the
    goal cell is blocked or unreachable. A start cell blocked only by
    inflation slack or extra obstacles is carved free so replans from a
    tight spot still work.
    """
    if not free_at(world, start.x, start.y, robot_radius):
        raise InvalidStart(f"start ({start.x:.2f}, {start.y:.2f}) is blocked")
    grid = build_grid(world, robot_radius, extra_obstacles,
                      anchors=(start, goal))
    s = grid.cell_of(start.x, start.y)
    t = grid.cell_of(goal.x, goal.y)
    if grid.blocked[s]:
        grid.blocked = grid.blocked.copy()
        grid.blocked[s] = False
    if grid.blocked[t] and extra_obstacles \
            and free_at(world, goal.x, goal.y, robot_radius):
        grid.blocked = grid.blocked.copy()
        grid.blocked[t] = False
    cells, _ = astar(grid, s, t)
    if len(cells) == 1:
        if math.hypot(goal.x - start.x, goal.y - start.y) < 1e-12:
            pts = np.array([[start.x, start.y]])
        else:
            pts = np.array([[start.x, start.y], [goal.x, goal.y]])
    else:
        pts = np.array([grid.center_of(c) for c in cells])
        pts[0] = (start.x, start.y)
        pts[-1] = (goal.x, goal.y)
        pts = shortcut(world, pts, robot_radius + INFLATION_MARGIN,
                       extra_obstacles)
    path = PlannedPath(robot_id, pts, np.zeros(len(pts)))
    return annotate_etas(path, 1.0, 0.0)


def densify(path: PlannedPath, max_segment: float) -> PlannedPath:
    """Subdivide long segments so no segment exceeds max_segment; ETAs
    are interpolated linearly along each original segment."""
    wps = path.waypoints
    if len(wps) < 2:
        return path
    pts = [wps[0]]
    etas = [path.etas[0]]
    for k in range(len(wps) - 1):
        seg = wps[k + 1] - wps[k]
        length = float(np.hypot(*seg))
        n = max(1, int(math.ceil(length / max_segment)))
        for j in range(1, n + 1):
            f = j / n
            pts.append(wps[k] + f * seg)
            etas.append(path.etas[k] + f * (path.etas[k + 1] - path.etas[k]))
    return PlannedPath(path.robot_id, np.array(pts), np.array(etas),
                       path.announced_at)


def annotate_etas(path: PlannedPath, nominal_speed: float,
                  now: float) -> PlannedPath:
    """ETAs from cumulative arc length at a constant nominal speed."""
    if nominal_speed <= 0:
        raise ValueError("nominal_speed must be positive")
    etas = now + path.cumulative_lengths() / nominal_speed
    return PlannedPath(path.robot_id, path.waypoints, etas, announced_at=now)


def sample_mission(world: WorldMap, robot_radius: float, rng,
                   min_separation_frac: float = 0.75,
                   max_attempts: int = 10_000) -> Mission:
    """Rejection-sample a start/goal pair at least min_separation_frac of
    the map width apart, both clear of obstacles.

    Endpoints are required free at the planner's inflated radius so the
    sampled mission is plannable on the grid, not just collision-free.
    """
    min_dist = min_separation_frac * world.width
    clearance = robot_radius + INFLATION_MARGIN + world.grid_resolution
    for _ in range(max_attempts):
        sx, sy, gx, gy = rng.uniform(0.0, 1.0, size=4)
        sx *= world.width
        gx *= world.width
        sy *= world.height
        gy *= world.height
        if math.hypot(gx - sx, gy - sy) < min_dist:
            continue
        if not free_at(world, sx, sy, clearance):
            continue
        if not free_at(world, gx, gy, clearance):
            continue
        return Mission(Point2(sx, sy), Point2(gx, gy))
    raise SamplingExhausted(
        f"no valid mission after {max_attempts} attempts")
