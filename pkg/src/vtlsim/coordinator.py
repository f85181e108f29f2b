"""Centralized virtual traffic light.

Consumes announced paths and live poses, detects pairwise path conflicts
within an ETA threshold, clusters conflicting robots transitively,
maintains conflict zones with enclosing stop areas, and issues per-tick
STOP/PROCEED commands. Resolution is proximity-priority in dynamic mode
and first-come-first-served for pre-defined static intersections.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .geometry import AABB, Pose2
from .global_planner import PlannedPath, densify

STOP = "STOP"
PROCEED = "PROCEED"


class StaleSnapshot(Exception):
    pass


@dataclass(frozen=True)
class CoordinatorConfig:
    eta_threshold: float = 5.0
    robot_diameter: float = 3.0
    stop_margin: float = 6.0        # stop area = bbox inflated by this
    nominal_speed: float = 1.6      # speed assumed when refreshing ETAs
    staleness_bound: float = 1.0
    detect_resolution: float = 2.0  # max segment length fed to detection
    detect_horizon: float = 15.0    # only conflicts this close in time form zones
    # stalled PROCEED grants are revoked after this; must exceed the
    # robots' patience so a stalled holder replans before losing its turn
    grant_timeout: float = 8.0
    progress_epsilon: float = 0.25  # displacement below this counts as stalled


@dataclass(frozen=True)
class Conflict:
    robot_a: str
    robot_b: str
    segment_a: tuple                # (first, last) segment indices, inclusive
    segment_b: tuple
    region: AABB


@dataclass(frozen=True)
class ConflictCluster:
    members: frozenset
    region: AABB
    conflicts: tuple


@dataclass
class ConflictZone:
    id: str
    bbox: AABB
    stop_area: AABB
    members: frozenset
    occupants: set = field(default_factory=set)
    mode: str = "dynamic"           # "dynamic" | "static_fcfs"
    fcfs_queue: list = field(default_factory=list)
    # robots holding a PROCEED grant, in grant order; a grant persists
    # until the robot clears the zone so right-of-way cannot oscillate
    granted: list = field(default_factory=list)
    # holder -> (x, y, t of last observed progress), for grant revocation
    holder_progress: dict = field(default_factory=dict)

    @property
    def occupied(self) -> bool:
        return bool(self.occupants)


@dataclass(frozen=True)
class Command:
    robot_id: str
    verdict: str
    zone_id: str
    issued_at: float


class DisjointSet:
    """Union-find over hashable items."""

    def __init__(self):
        self._parent = {}

    def find(self, x):
        p = self._parent.setdefault(x, x)
        while p != x:
            self._parent[x] = self._parent.setdefault(p, p)
            x = self._parent[x]
            p = self._parent.setdefault(x, x)
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self._parent[rb] = ra

    def groups(self):
        out = {}
        for x in self._parent:
            out.setdefault(self.find(x), []).append(x)
        return list(out.values())


def _segment_hits(pa: PlannedPath, pb: PlannedPath, diameter: float,
                  eta_threshold: float, eta_cutoff: float = None):
    """Segment-index pairs of pa x pb that pass within one robot diameter
    with interpolated ETAs inside the threshold."""
    a, b = pa.waypoints, pb.waypoints
    if len(a) < 2 or len(b) < 2:
        return []
    box_a = AABB.of_points(a)
    box_b = AABB.of_points(b)
    if (box_a.x1 + diameter < box_b.x0 or box_b.x1 + diameter < box_a.x0
            or box_a.y1 + diameter < box_b.y0 or box_b.y1 + diameter < box_a.y0):
        return []
    na, nb = len(a) - 1, len(b) - 1
    dist = np.empty((na, nb))
    s = np.empty((na, nb))
    t = np.empty((na, nb))
    _kernels.segment_pair_distances(a, b, dist, s, t)
    hits = []
    for i, j in zip(*np.nonzero(dist < diameter)):
        eta_a = pa.etas[i] + s[i, j] * (pa.etas[i + 1] - pa.etas[i])
        eta_b = pb.etas[j] + t[i, j] * (pb.etas[j + 1] - pb.etas[j])
        if abs(eta_a - eta_b) > eta_threshold:
            continue
        if eta_cutoff is not None and min(eta_a, eta_b) > eta_cutoff:
            continue
        hits.append((int(i), int(j)))
    return hits


def _paths_conflict(pa: PlannedPath, pb: PlannedPath, diameter: float,
                    eta_threshold: float) -> bool:
    return bool(_segment_hits(pa, pb, diameter, eta_threshold))


def detect_conflicts(paths, eta_threshold: float,
                     robot_diameter: float = 3.0, eta_cutoff: float = None):
    """Pairwise path conflicts; adjacent hit segment pairs of the same
    robot pair merge into one Conflict with a single bounding region.

    eta_cutoff, when given, ignores conflicts whose earlier arrival lies
    beyond that absolute time (they re-surface on later ticks)."""
    paths = sorted(paths, key=lambda p: p.robot_id)
    conflicts = []
    for ia in range(len(paths)):
        for ib in range(ia + 1, len(paths)):
            pa, pb = paths[ia], paths[ib]
            hits = _segment_hits(pa, pb, robot_diameter, eta_threshold,
                                 eta_cutoff)
            if not hits:
                continue
            dsu = DisjointSet()
            for h in hits:
                dsu.find(h)
            for k in range(len(hits)):
                i1, j1 = hits[k]
                for m in range(k + 1, len(hits)):
                    i2, j2 = hits[m]
                    if abs(i1 - i2) <= 1 and abs(j1 - j2) <= 1:
                        dsu.union(hits[k], hits[m])
            for group in sorted(dsu.groups()):
                ii = [g[0] for g in group]
                jj = [g[1] for g in group]
                ia0, ia1 = min(ii), max(ii)
                jb0, jb1 = min(jj), max(jj)
                pts = np.vstack([pa.waypoints[ia0:ia1 + 2],
                                 pb.waypoints[jb0:jb1 + 2]])
                conflicts.append(Conflict(pa.robot_id, pb.robot_id,
                                          (ia0, ia1), (jb0, jb1),
                                          AABB.of_points(pts)))
    return conflicts


def cluster_conflicts(conflicts):
    """Connected components of the conflict graph; one cluster per
    component, region = union of member conflict regions."""
    dsu = DisjointSet()
    for c in conflicts:
        dsu.union(c.robot_a, c.robot_b)
    clusters = []
    for members in dsu.groups():
        mset = frozenset(members)
        mine = tuple(c for c in conflicts
                     if c.robot_a in mset and c.robot_b in mset)
        region = mine[0].region
        for c in mine[1:]:
            region = region.union(c.region)
        clusters.append(ConflictCluster(mset, region, mine))
    clusters.sort(key=lambda c: min(c.members))
    return clusters


def _in_zone_subpath(path: PlannedPath, bbox: AABB):
    """Portion of a path from its first to last segment touching bbox."""
    wps = path.waypoints
    if len(wps) < 2:
        return None
    touching = [k for k in range(len(wps) - 1)
                if bbox.intersects_segment(wps[k], wps[k + 1])]
    if not touching:
        return None
    k0, k1 = touching[0], touching[-1]
    return PlannedPath(path.robot_id, wps[k0:k1 + 2], path.etas[k0:k1 + 2],
                       path.announced_at)


def resolve_zone(zone: ConflictZone, poses: dict, paths: dict,
                 cfg: CoordinatorConfig, now: float):
    """Proximity-priority resolution for a dynamic zone.

    Robots inside the stop area are ordered by distance to the bbox
    center; the head proceeds, and each later robot proceeds only if its
    in-zone path segment is conflict-free against every robot already
    cleared. A PROCEED grant is sticky: it is re-issued ahead of any new
    grant until the robot clears the zone, so right-of-way cannot
    oscillate between converging robots. Everyone else stops.
    """
    if zone.mode != "dynamic":
        raise ValueError("resolve_zone requires a dynamic zone")
    center = zone.bbox.center
    inside = []
    for rid in zone.members:
        pose = poses.get(rid)
        if pose is not None and zone.stop_area.contains(pose.x, pose.y):
            d = float(np.hypot(pose.x - center[0], pose.y - center[1]))
            inside.append((d, rid))
    inside.sort()
    inside_ids = {rid for _, rid in inside}

    def subpath(rid):
        return _in_zone_subpath(paths[rid], zone.bbox) if rid in paths else None

    # grants persist while the holder is still crossing: present, inside
    # the stop area, and with path remaining through the bbox — but a
    # holder that has stalled for grant_timeout is revoked and sent to
    # the back of the queue, so a physically blocked holder cannot pin
    # the whole zone
    holders = []
    revoked = []
    for rid in zone.granted:
        if rid not in inside_ids or subpath(rid) is None:
            zone.holder_progress.pop(rid, None)
            continue
        pose = poses[rid]
        rec = zone.holder_progress.get(rid)
        if rec is None or np.hypot(pose.x - rec[0],
                                   pose.y - rec[1]) > cfg.progress_epsilon:
            zone.holder_progress[rid] = (pose.x, pose.y, now)
            holders.append(rid)
        elif now - rec[2] > cfg.grant_timeout:
            zone.holder_progress.pop(rid, None)
            revoked.append(rid)
        else:
            holders.append(rid)
    cleared = [subpath(rid) for rid in holders]
    commands = [Command(rid, PROCEED, zone.id, now) for rid in holders]
    queue = [rid for _, rid in inside
             if rid not in holders and rid not in revoked] + revoked
    for rid in queue:
        sub = subpath(rid)
        blocked = False
        if sub is not None:
            for other in cleared:
                if other is not None and _paths_conflict(
                        sub, other, cfg.robot_diameter, cfg.eta_threshold):
                    blocked = True
                    break
        if blocked:
            commands.append(Command(rid, STOP, zone.id, now))
        else:
            commands.append(Command(rid, PROCEED, zone.id, now))
            cleared.append(sub)
            holders.append(rid)
            pose = poses[rid]
            zone.holder_progress[rid] = (pose.x, pose.y, now)
    zone.granted = holders
    return commands


def resolve_fcfs(zone: ConflictZone, arrivals, now: float = 0.0):
    """First-come-first-served resolution for a static intersection.

    arrivals: list of (robot_id, arrival timestamp at the stop area).
    The head proceeds only while the bbox is empty or occupied by the
    head alone; everyone else stops.
    """
    if zone.mode != "static_fcfs":
        raise ValueError("resolve_fcfs requires a static_fcfs zone")
    queue = sorted(arrivals, key=lambda a: (a[1], a[0]))
    zone.fcfs_queue = [rid for rid, _ in queue]
    commands = []
    for k, (rid, _) in enumerate(queue):
        if k == 0 and (not zone.occupants or zone.occupants == {rid}):
            commands.append(Command(rid, PROCEED, zone.id, now))
        else:
            commands.append(Command(rid, STOP, zone.id, now))
    return commands


def remaining_path(path: PlannedPath, pose: Pose2, now: float,
                   nominal_speed: float) -> PlannedPath:
    """Suffix of an announced path from the robot's current position
    onward, with ETAs refreshed from live progress."""
    wps = path.waypoints
    if len(wps) < 2:
        return PlannedPath(path.robot_id, wps,
                           np.full(len(wps), now), path.announced_at)
    p = np.array([pose.x, pose.y])
    a, b = wps[:-1], wps[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom[denom == 0.0] = 1.0
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    seg = int(np.argmin(np.hypot(*(proj - p).T)))
    pts = np.vstack([p, wps[seg + 1:]])
    suffix = PlannedPath(path.robot_id, pts, np.zeros(len(pts)),
                         path.announced_at)
    etas = now + suffix.cumulative_lengths() / nominal_speed
    return PlannedPath(path.robot_id, pts, etas, path.announced_at)


class Coordinator:
    """Single logical actor: call tick() with a consistent snapshot; get
    back one immutable command batch. STOP dominates across zones."""

    def __init__(self, cfg: CoordinatorConfig = CoordinatorConfig(),
                 mode: str = "dynamic", static_zones=()):
        if mode not in ("dynamic", "static_fcfs"):
            raise ValueError(f"unknown mode {mode!r}")
        self.cfg = cfg
        self.mode = mode
        self.zones: dict = {}
        self._next_id = 0
        self._arrivals: dict = {}       # zone id -> {robot: arrival t}
        if mode == "static_fcfs":
            for bbox in static_zones:
                zid = self._new_id()
                self.zones[zid] = ConflictZone(
                    zid, bbox, bbox.inflate(cfg.stop_margin),
                    frozenset(), mode="static_fcfs")
                self._arrivals[zid] = {}

    def _new_id(self) -> str:
        zid = f"z{self._next_id}"
        self._next_id += 1
        return zid

    def tick(self, poses: dict, paths: dict, now: float):
        """poses: robot -> (Pose2, timestamp); paths: robot -> PlannedPath
        (dynamic mode). Returns the merged command batch for this tick."""
        for rid, (_, t) in poses.items():
            if now - t > self.cfg.staleness_bound:
                raise StaleSnapshot(f"pose of {rid} is {now - t:.2f}s old")
        if self.mode == "static_fcfs":
            return self._tick_static({r: p for r, (p, _) in poses.items()}, now)
        return self._tick_dynamic({r: p for r, (p, _) in poses.items()},
                                  paths, now)

    def _tick_dynamic(self, poses, paths, now):
        for rid in poses:
            if rid not in paths:
                raise StaleSnapshot(f"pose of {rid} has no announced path")
        remaining = {rid: densify(remaining_path(paths[rid], poses[rid], now,
                                                 self.cfg.nominal_speed),
                                  self.cfg.detect_resolution)
                     for rid in sorted(poses)}
        conflicts = detect_conflicts(remaining.values(),
                                     self.cfg.eta_threshold,
                                     self.cfg.robot_diameter,
                                     eta_cutoff=now + self.cfg.detect_horizon)
        clusters = cluster_conflicts(conflicts)

        by_members = {z.members: zid for zid, z in self.zones.items()}
        seen = set()
        new_zones = {}
        for cluster in clusters:
            zid = by_members.get(cluster.members)
            if zid is None:
                zid = self._new_id()
            seen.add(zid)
            prior = self.zones.get(zid)
            new_zones[zid] = ConflictZone(
                zid, cluster.region, cluster.region.inflate(self.cfg.stop_margin),
                cluster.members,
                granted=list(prior.granted) if prior is not None else [],
                holder_progress=(dict(prior.holder_progress)
                                 if prior is not None else {}))
        # zones not re-detected persist while a member's remaining path
        # still runs through the bbox, unless a fresh cluster supersedes
        # them by sharing a member (keeps zone membership disjoint, so a
        # robot never answers to two traffic lights at once)
        fresh_members = set()
        for cluster in clusters:
            fresh_members |= cluster.members
        for zid, zone in self.zones.items():
            if zid in seen:
                continue
            if zone.members & fresh_members:
                continue
            live = False
            for rid in zone.members:
                sub = remaining.get(rid)
                if sub is not None and _in_zone_subpath(sub, zone.bbox):
                    live = True
                    break
            if live:
                new_zones[zid] = zone
        self.zones = dict(sorted(new_zones.items(),
                                 key=lambda kv: int(kv[0][1:])))

        merged: dict = {}
        for zone in self.zones.values():
            zone.occupants = {rid for rid in zone.members
                              if rid in poses
                              and zone.bbox.contains(poses[rid].x, poses[rid].y)}
            for cmd in resolve_zone(zone, poses, remaining, self.cfg, now):
                prev = merged.get(cmd.robot_id)
                if prev is None or (prev.verdict == PROCEED
                                    and cmd.verdict == STOP):
                    merged[cmd.robot_id] = cmd
        return [merged[rid] for rid in sorted(merged)]

    def _tick_static(self, poses, now):
        merged: dict = {}
        for zid, zone in self.zones.items():
            arrivals = self._arrivals[zid]
            inside_bbox = {rid for rid, p in poses.items()
                           if zone.bbox.contains(p.x, p.y)}
            # dequeue robots that traversed and exited the bbox, and
            # forget robots that left the stop area without entering
            for rid in list(arrivals):
                p = poses.get(rid)
                gone = p is None or not zone.stop_area.contains(p.x, p.y)
                exited = rid in zone.occupants and rid not in inside_bbox
                if exited or gone:
                    del arrivals[rid]
            for rid, p in sorted(poses.items()):
                if zone.stop_area.contains(p.x, p.y) and rid not in arrivals:
                    arrivals[rid] = now
            zone.occupants = inside_bbox & set(arrivals)
            for cmd in resolve_fcfs(zone, sorted(arrivals.items()), now):
                prev = merged.get(cmd.robot_id)
                if prev is None or (prev.verdict == PROCEED
                                    and cmd.verdict == STOP):
                    merged[cmd.robot_id] = cmd
        return [merged[rid] for rid in sorted(merged)]
