import math

import numpy as np
import pytest

from vtlsim.coordinator import (PROCEED, STOP, Command, ConflictZone,
                                Coordinator, CoordinatorConfig, DisjointSet,
                                StaleSnapshot, cluster_conflicts,
                                detect_conflicts, remaining_path,
                                resolve_fcfs, resolve_zone)
from vtlsim.geometry import AABB, Pose2
from vtlsim.global_planner import PlannedPath


def path(rid, points, speed=1.6, start_t=0.0):
    p = PlannedPath(rid, points, np.zeros(len(points)))
    etas = start_t + p.cumulative_lengths() / speed
    return PlannedPath(rid, p.waypoints, etas, announced_at=start_t)


def crossing_pair(start_t_b=0.0):
    # two straight paths crossing at (25, 25) with near-equal ETAs
    a = path("ra", [[10.0, 25.0], [40.0, 25.0]])
    b = path("rb", [[25.0, 10.0], [25.0, 40.0]], start_t=start_t_b)
    return a, b


class TestDisjointSet:
    def test_groups(self):
        dsu = DisjointSet()
        dsu.union("a", "b")
        dsu.union("c", "d")
        dsu.union("b", "c")
        dsu.find("e")
        groups = {frozenset(g) for g in dsu.groups()}
        assert groups == {frozenset("abcd"), frozenset("e")}


class TestDetectConflicts:
    def test_crossing_paths_conflict(self):
        a, b = crossing_pair()
        conflicts = detect_conflicts([a, b], eta_threshold=5.0)
        assert len(conflicts) == 1
        c = conflicts[0]
        assert {c.robot_a, c.robot_b} == {"ra", "rb"}
        assert c.region.contains(25.0, 25.0)

    def test_eta_separation_suppresses(self):
        # same geometry, but rb arrives 30 s later: no conflict
        a, b = crossing_pair(start_t_b=30.0)
        assert detect_conflicts([a, b], eta_threshold=5.0) == []

    def test_spatially_distant_paths(self):
        a = path("ra", [[5.0, 5.0], [45.0, 5.0]])
        b = path("rb", [[5.0, 45.0], [45.0, 45.0]])
        assert detect_conflicts([a, b], eta_threshold=5.0) == []

    def test_diameter_controls_hit(self):
        a = path("ra", [[5.0, 25.0], [45.0, 25.0]])
        b = path("rb", [[5.0, 29.0], [45.0, 29.0]])
        assert detect_conflicts([a, b], 5.0, robot_diameter=3.0) == []
        assert len(detect_conflicts([a, b], 5.0, robot_diameter=4.5)) == 1

    def test_eta_cutoff(self):
        a, b = crossing_pair()
        # conflict happens ~9.4 s in; a cutoff before that drops it
        assert detect_conflicts([a, b], 5.0, eta_cutoff=5.0) == []
        assert len(detect_conflicts([a, b], 5.0, eta_cutoff=15.0)) == 1

    def test_adjacent_hits_merge(self):
        # head-on along the same line: many adjacent segment hits, but ETAs
        # only align near the midpoint, forming one merged conflict
        a = path("ra", [[10.0, 25.0], [20.0, 25.0], [30.0, 25.0]])
        b = path("rb", [[30.0, 25.0], [20.0, 25.0], [10.0, 25.0]])
        conflicts = detect_conflicts([a, b], eta_threshold=5.0)
        assert len(conflicts) == 1


class TestClusterConflicts:
    def test_chain_forms_one_cluster(self):
        from vtlsim.coordinator import Conflict
        conflicts = [Conflict("a", "b", (0, 0), (0, 0), AABB(0, 0, 1, 1)),
                     Conflict("b", "c", (0, 0), (0, 0), AABB(2, 2, 3, 3))]
        clusters = cluster_conflicts(conflicts)
        assert len(clusters) == 1
        assert clusters[0].members == frozenset("abc")
        assert clusters[0].region == AABB(0, 0, 3, 3)

    def test_disjoint_pairs_stay_separate(self):
        from vtlsim.coordinator import Conflict
        conflicts = [Conflict("a", "b", (0, 0), (0, 0), AABB(0, 0, 1, 1)),
                     Conflict("c", "d", (0, 0), (0, 0), AABB(5, 5, 6, 6))]
        clusters = cluster_conflicts(conflicts)
        assert sorted(c.members for c in clusters) == [frozenset("ab"),
                                                       frozenset("cd")]


def dynamic_zone(members, bbox=AABB(20, 20, 30, 30), margin=6.0):
    return ConflictZone("z0", bbox, bbox.inflate(margin), frozenset(members))


class TestResolveZone:
    def test_closest_proceeds_other_stops(self):
        a, b = crossing_pair()
        zone = dynamic_zone({"ra", "rb"})
        poses = {"ra": Pose2(22.0, 25.0), "rb": Pose2(25.0, 18.0)}
        cmds = {c.robot_id: c.verdict for c in resolve_zone(
            zone, poses, {"ra": a, "rb": b}, CoordinatorConfig(), 0.0)}
        assert cmds == {"ra": PROCEED, "rb": STOP}
        assert zone.granted == ["ra"]

    def test_outside_stop_area_uncommanded(self):
        a, b = crossing_pair()
        zone = dynamic_zone({"ra", "rb"})
        poses = {"ra": Pose2(22.0, 25.0), "rb": Pose2(25.0, 2.0)}
        cmds = resolve_zone(zone, poses, {"ra": a, "rb": b},
                            CoordinatorConfig(), 0.0)
        assert [c.robot_id for c in cmds] == ["ra"]

    def test_non_conflicting_followers_proceed(self):
        # parallel paths far apart inside one (artificially wide) zone
        a = path("ra", [[10.0, 21.0], [40.0, 21.0]])
        b = path("rb", [[10.0, 29.0], [40.0, 29.0]])
        zone = dynamic_zone({"ra", "rb"}, AABB(15, 15, 35, 35))
        poses = {"ra": Pose2(18.0, 21.0), "rb": Pose2(18.0, 29.0)}
        cmds = {c.robot_id: c.verdict for c in resolve_zone(
            zone, poses, {"ra": a, "rb": b}, CoordinatorConfig(), 0.0)}
        assert cmds == {"ra": PROCEED, "rb": PROCEED}

    def test_grant_is_sticky(self):
        a, b = crossing_pair()
        paths = {"ra": a, "rb": b}
        zone = dynamic_zone({"ra", "rb"})
        cfg = CoordinatorConfig()
        poses = {"ra": Pose2(22.0, 25.0), "rb": Pose2(25.0, 18.0)}
        resolve_zone(zone, poses, paths, cfg, 0.0)
        assert zone.granted == ["ra"]
        # rb is now closer to the zone center, but ra keeps its grant
        poses = {"ra": Pose2(23.0, 25.0), "rb": Pose2(25.0, 24.0)}
        cmds = {c.robot_id: c.verdict for c in resolve_zone(
            zone, poses, paths, cfg, 1.0)}
        assert cmds == {"ra": PROCEED, "rb": STOP}

    def test_stalled_grant_revoked(self):
        a, b = crossing_pair()
        paths = {"ra": a, "rb": b}
        zone = dynamic_zone({"ra", "rb"})
        cfg = CoordinatorConfig()
        pose_a = Pose2(22.0, 25.0)
        poses = {"ra": pose_a, "rb": Pose2(25.0, 18.0)}
        resolve_zone(zone, poses, paths, cfg, 0.0)
        # ra never moves; after grant_timeout its grant passes to rb
        t = 0.0
        while t <= cfg.grant_timeout:
            t += 1.0
            cmds = {c.robot_id: c.verdict for c in resolve_zone(
                zone, poses, paths, cfg, t)}
        assert cmds["rb"] == PROCEED
        assert cmds["ra"] == STOP

    def test_grant_released_after_crossing(self):
        a, b = crossing_pair()
        paths = {"ra": a, "rb": b}
        zone = dynamic_zone({"ra", "rb"})
        cfg = CoordinatorConfig()
        poses = {"ra": Pose2(22.0, 25.0), "rb": Pose2(25.0, 18.0)}
        resolve_zone(zone, poses, paths, cfg, 0.0)
        # ra has left the stop area: its grant is dropped and rb proceeds
        done = {"ra": path("ra", [[38.0, 25.0], [40.0, 25.0]]), "rb": b}
        poses = {"ra": Pose2(38.0, 25.0), "rb": Pose2(25.0, 18.0)}
        cmds = {c.robot_id: c.verdict for c in resolve_zone(
            zone, poses, done, cfg, 5.0)}
        assert cmds["rb"] == PROCEED
        assert "ra" not in zone.granted

    def test_rejects_static_zone(self):
        zone = dynamic_zone({"ra"})
        zone.mode = "static_fcfs"
        with pytest.raises(ValueError):
            resolve_zone(zone, {}, {}, CoordinatorConfig(), 0.0)


class TestResolveFcfs:
    def make_zone(self):
        bbox = AABB(20, 20, 30, 30)
        return ConflictZone("z0", bbox, bbox.inflate(6.0), frozenset(),
                            mode="static_fcfs")

    def test_earliest_arrival_proceeds(self):
        zone = self.make_zone()
        cmds = {c.robot_id: c.verdict for c in resolve_fcfs(
            zone, [("rb", 2.0), ("ra", 1.0), ("rc", 3.0)])}
        assert cmds == {"ra": PROCEED, "rb": STOP, "rc": STOP}
        assert zone.fcfs_queue == ["ra", "rb", "rc"]

    def test_ties_break_by_id(self):
        zone = self.make_zone()
        cmds = {c.robot_id: c.verdict for c in resolve_fcfs(
            zone, [("rb", 1.0), ("ra", 1.0)])}
        assert cmds == {"ra": PROCEED, "rb": STOP}

    def test_occupied_by_other_blocks_head(self):
        zone = self.make_zone()
        zone.occupants = {"rz"}
        cmds = {c.robot_id: c.verdict for c in resolve_fcfs(
            zone, [("ra", 1.0)])}
        assert cmds == {"ra": STOP}

    def test_head_already_inside_keeps_proceed(self):
        zone = self.make_zone()
        zone.occupants = {"ra"}
        cmds = {c.robot_id: c.verdict for c in resolve_fcfs(
            zone, [("ra", 1.0), ("rb", 2.0)])}
        assert cmds == {"ra": PROCEED, "rb": STOP}

    def test_rejects_dynamic_zone(self):
        with pytest.raises(ValueError):
            resolve_fcfs(dynamic_zone({"ra"}), [("ra", 0.0)])


class TestRemainingPath:
    def test_refreshes_etas_from_progress(self):
        p = path("ra", [[0.0, 0.0], [10.0, 0.0]], speed=1.0)
        rem = remaining_path(p, Pose2(4.0, 0.0), now=7.0, nominal_speed=2.0)
        np.testing.assert_allclose(rem.waypoints, [[4.0, 0.0], [10.0, 0.0]])
        np.testing.assert_allclose(rem.etas, [7.0, 10.0])

    def test_projects_off_path_pose(self):
        p = path("ra", [[0.0, 0.0], [10.0, 0.0]])
        rem = remaining_path(p, Pose2(5.0, 2.0), now=0.0, nominal_speed=1.0)
        np.testing.assert_allclose(rem.waypoints[0], [5.0, 2.0])
        np.testing.assert_allclose(rem.waypoints[-1], [10.0, 0.0])

    def test_single_point_path(self):
        p = PlannedPath("ra", [[3.0, 3.0]], [0.0])
        rem = remaining_path(p, Pose2(3.0, 3.0), now=5.0, nominal_speed=1.0)
        np.testing.assert_allclose(rem.etas, [5.0])


class TestCoordinatorTick:
    def test_crossing_scenario_commands(self):
        a, b = crossing_pair()
        coord = Coordinator()
        poses = {"ra": (Pose2(22.0, 25.0), 0.0), "rb": (Pose2(25.0, 18.0), 0.0)}
        cmds = coord.tick(poses, {"ra": a, "rb": b}, 0.0)
        verdicts = {c.robot_id: c.verdict for c in cmds}
        assert verdicts == {"ra": PROCEED, "rb": STOP}
        assert len(coord.zones) == 1

    def test_no_conflict_no_commands(self):
        a = path("ra", [[5.0, 5.0], [45.0, 5.0]])
        b = path("rb", [[5.0, 45.0], [45.0, 45.0]])
        coord = Coordinator()
        cmds = coord.tick({"ra": (Pose2(5.0, 5.0), 0.0),
                           "rb": (Pose2(5.0, 45.0), 0.0)},
                          {"ra": a, "rb": b}, 0.0)
        assert cmds == []
        assert coord.zones == {}

    def test_stale_pose_raises(self):
        a, b = crossing_pair()
        coord = Coordinator()
        with pytest.raises(StaleSnapshot):
            coord.tick({"ra": (Pose2(22.0, 25.0), 0.0)}, {"ra": a}, 2.0)

    def test_pose_without_path_raises(self):
        coord = Coordinator()
        with pytest.raises(StaleSnapshot):
            coord.tick({"ra": (Pose2(22.0, 25.0), 0.0)}, {}, 0.0)

    def test_zone_ids_stable_across_ticks(self):
        a, b = crossing_pair()
        coord = Coordinator()
        poses = {"ra": (Pose2(22.0, 25.0), 0.0), "rb": (Pose2(25.0, 18.0), 0.0)}
        coord.tick(poses, {"ra": a, "rb": b}, 0.0)
        zid = next(iter(coord.zones))
        poses = {"ra": (Pose2(22.5, 25.0), 0.1), "rb": (Pose2(25.0, 18.0), 0.1)}
        coord.tick(poses, {"ra": a, "rb": b}, 0.1)
        assert list(coord.zones) == [zid]

    def test_invalid_mode(self):
        with pytest.raises(ValueError):
            Coordinator(mode="anarchy")

    def test_static_fcfs_tick(self):
        bbox = AABB(20.0, 20.0, 30.0, 30.0)
        coord = Coordinator(mode="static_fcfs", static_zones=[bbox])
        # ra arrives first at the stop area, rb second
        cmds = coord.tick({"ra": (Pose2(16.0, 25.0), 0.0)}, {}, 0.0)
        assert [(c.robot_id, c.verdict) for c in cmds] == [("ra", PROCEED)]
        cmds = coord.tick({"ra": (Pose2(18.0, 25.0), 1.0),
                           "rb": (Pose2(25.0, 16.0), 1.0)}, {}, 1.0)
        verdicts = {c.robot_id: c.verdict for c in cmds}
        assert verdicts == {"ra": PROCEED, "rb": STOP}
        # ra inside the bbox: still its turn
        cmds = coord.tick({"ra": (Pose2(25.0, 25.0), 2.0),
                           "rb": (Pose2(25.0, 16.0), 2.0)}, {}, 2.0)
        verdicts = {c.robot_id: c.verdict for c in cmds}
        assert verdicts == {"ra": PROCEED, "rb": STOP}
        # ra traversed and exited the bbox: dequeued, rb's turn
        cmds = coord.tick({"ra": (Pose2(31.5, 25.0), 3.0),
                           "rb": (Pose2(25.0, 16.0), 3.0)}, {}, 3.0)
        verdicts = {c.robot_id: c.verdict for c in cmds}
        assert verdicts["rb"] == PROCEED
