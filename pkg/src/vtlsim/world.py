"""Static 2D world: bounded arena with a grid of circular pillars,
free-space queries, and ray casting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import Point2


class InvalidConfig(ValueError):
    pass


@dataclass(frozen=True)
class WorldConfig:
    width: float = 50.0
    height: float = 50.0
    pillar_rows: int = 4
    pillar_cols: int = 4
    pillar_radius: float = 2.0
    grid_resolution: float = 0.5


@dataclass(frozen=True)
class Pillar:
    center: Point2
    radius: float


@dataclass(frozen=True)
class WorldMap:
    width: float
    height: float
    pillars: tuple
    grid_resolution: float

    def circles(self) -> np.ndarray:
        """Pillars as an (N, 3) array of (cx, cy, r)."""
        if not self.pillars:
            return np.zeros((0, 3))
        return np.array([[p.center.x, p.center.y, p.radius] for p in self.pillars])


def build_world(config: WorldConfig = WorldConfig()) -> WorldMap:
    """Place pillars on an evenly spaced interior grid.

    With the defaults (50x50 arena, 4x4 pillars) centers land on
    x, y in {10, 20, 30, 40}.
    """
    if config.width <= 0 or config.height <= 0:
        raise InvalidConfig("arena dimensions must be positive")
    if config.grid_resolution <= 0:
        raise InvalidConfig("grid_resolution must be positive")
    if config.pillar_rows < 0 or config.pillar_cols < 0:
        raise InvalidConfig("pillar grid counts must be >= 0")

    pillars = []
    if config.pillar_rows and config.pillar_cols:
        if config.pillar_radius <= 0:
            raise InvalidConfig("pillar_radius must be positive")
        xs = [config.width * (i + 1) / (config.pillar_cols + 1)
              for i in range(config.pillar_cols)]
        ys = [config.height * (j + 1) / (config.pillar_rows + 1)
              for j in range(config.pillar_rows)]
        r = config.pillar_radius
        for y in ys:
            for x in xs:
                if x - r < 0 or x + r > config.width or y - r < 0 or y + r > config.height:
                    raise InvalidConfig(
                        f"pillar at ({x:.2f}, {y:.2f}) r={r} overlaps the arena boundary")
                pillars.append(Pillar(Point2(x, y), r))
    return WorldMap(config.width, config.height, tuple(pillars),
                    config.grid_resolution)


def is_free(world: WorldMap, p: Point2, robot_radius: float = 0.0) -> bool:
    """True iff a disc of robot_radius at p fits inside the arena and
    touches no pillar."""
    return free_at(world, p.x, p.y, robot_radius)


def free_at(world: WorldMap, x: float, y: float, robot_radius: float = 0.0) -> bool:
    """Array-free fast path of is_free for the simulation loop."""
    if (x - robot_radius < 0 or x + robot_radius > world.width
            or y - robot_radius < 0 or y + robot_radius > world.height):
        return False
    for p in world.pillars:
        if math.hypot(x - p.center.x, y - p.center.y) < p.radius + robot_radius:
            return False
    return True


def raycast(world: WorldMap, origin: Point2, angle: float, max_range: float,
            dynamic_discs=()) -> float:
    """Distance to the nearest hit among pillars, walls and dynamic discs,
    clamped to max_range."""
    if max_range <= 0:
        raise ValueError("max_range must be positive")
    circles = world.circles()
    if dynamic_discs:
        extra = np.array([[c.x, c.y, r] for c, r in dynamic_discs])
        circles = np.vstack([circles, extra]) if circles.size else extra
    out = np.empty(1)
    _kernels.raycast_many(origin.x, origin.y, np.array([float(angle)]),
                          float(max_range), circles,
                          world.width, world.height, out)
    return float(out[0])
