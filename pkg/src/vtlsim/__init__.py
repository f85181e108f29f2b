"""Hybrid multi-robot coordination: decentralized A* + DWA navigation
with a centralized virtual traffic light, plus a batch experiment
harness."""

from .coordinator import (Command, Conflict, ConflictCluster, ConflictZone,
                          Coordinator, CoordinatorConfig, cluster_conflicts,
                          detect_conflicts, resolve_fcfs, resolve_zone)
from .experiments import (AggregateRow, SweepConfig, aggregate, cell_seed,
                          emit_outputs, load_config, parse_config, run_sweep)
from .geometry import AABB, Point2, Pose2
from .global_planner import (Mission, NoPath, PlannedPath, SamplingExhausted,
                             annotate_etas, plan_path, sample_mission)
from .local_planner import (DwaConfig, KinematicLimits, LidarConfig,
                            LidarScan, VelocityCommand, dynamic_window,
                            rollout, select_command, simulate_lidar)
from .simulation import (DECENTRALIZED, HYBRID, RobotState, Simulation,
                         TrialConfig, TrialResult, run_trial)
from .world import (InvalidConfig, Pillar, WorldConfig, WorldMap,
                    build_world, is_free, raycast)

__version__ = "0.1.0"
