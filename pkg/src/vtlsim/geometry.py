"""Basic 2D geometry: points, poses, angles, segment math."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def normalize_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    @property
    def position(self) -> Point2:
        return Point2(self.x, self.y)

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading], dtype=float)


def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Distance from point p to segment ab."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.hypot(*(p - a)))
    t = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    closest = a + t * ab
    return float(np.hypot(*(p - closest)))


def segment_segment_closest(a0, a1, b0, b1):
    """Closest approach of segments a0a1 and b0b1.

    Returns (s, t, dist): parameters along each segment in [0, 1] and the
    minimum distance.
    """
    a0 = np.asarray(a0, dtype=float)
    a1 = np.asarray(a1, dtype=float)
    b0 = np.asarray(b0, dtype=float)
    b1 = np.asarray(b1, dtype=float)
    d1 = a1 - a0
    d2 = b1 - b0
    r = a0 - b0
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    if a <= 1e-18 and e <= 1e-18:
        return 0.0, 0.0, float(np.hypot(*r))
    if a <= 1e-18:
        s = 0.0
        t = float(np.clip(f / e, 0.0, 1.0))
    else:
        c = float(d1 @ r)
        if e <= 1e-18:
            t = 0.0
            s = float(np.clip(-c / a, 0.0, 1.0))
        else:
            b = float(d1 @ d2)
            denom = a * e - b * b
            if denom > 1e-18:
                s = float(np.clip((b * f - c * e) / denom, 0.0, 1.0))
            else:
                s = 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = float(np.clip(-c / a, 0.0, 1.0))
            elif t > 1.0:
                t = 1.0
                s = float(np.clip((b - c) / a, 0.0, 1.0))
    pa = a0 + s * d1
    pb = b0 + t * d2
    return s, t, float(np.hypot(*(pa - pb)))


@dataclass(frozen=True)
class AABB:
    """Axis-aligned bounding box."""
    x0: float
    y0: float
    x1: float
    y1: float

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def inflate(self, margin: float) -> "AABB":
        return AABB(self.x0 - margin, self.y0 - margin,
                    self.x1 + margin, self.y1 + margin)

    def union(self, other: "AABB") -> "AABB":
        return AABB(min(self.x0, other.x0), min(self.y0, other.y0),
                    max(self.x1, other.x1), max(self.y1, other.y1))

    @property
    def center(self) -> np.ndarray:
        return np.array([(self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0])

    def intersects_segment(self, a: np.ndarray, b: np.ndarray) -> bool:
        """True if segment ab touches the box (slab clipping)."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        d = b - a
        tmin, tmax = 0.0, 1.0
        for lo, hi, o, dd in ((self.x0, self.x1, a[0], d[0]),
                              (self.y0, self.y1, a[1], d[1])):
            if abs(dd) < 1e-18:
                if o < lo or o > hi:
                    return False
            else:
                t1 = (lo - o) / dd
                t2 = (hi - o) / dd
                if t1 > t2:
                    t1, t2 = t2, t1
                tmin = max(tmin, t1)
                tmax = min(tmax, t2)
                if tmin > tmax:
                    return False
        return True

    @staticmethod
    def of_points(pts: np.ndarray) -> "AABB":
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        return AABB(float(pts[:, 0].min()), float(pts[:, 1].min()),
                    float(pts[:, 0].max()), float(pts[:, 1].max()))
