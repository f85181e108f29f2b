"""Batch experiment harness: sweeps (mode x robot count x trials),
aggregates means with 95% confidence intervals, and emits CSV tables
and optional SVG plots."""

from __future__ import annotations

import csv
import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .coordinator import CoordinatorConfig
from .local_planner import DwaConfig, KinematicLimits, LidarConfig
from .simulation import DECENTRALIZED, HYBRID, TrialConfig, TrialResult, run_trial
from .world import WorldConfig


class ConfigError(ValueError):
    pass


class EmptyCell(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    modes: tuple = (HYBRID, DECENTRALIZED)
    robot_counts: tuple = tuple(range(1, 11))
    trials_per_cell: int = 50
    base_seed: int = 0
    out_dir: str = "results"
    trial: TrialConfig = field(default_factory=lambda: TrialConfig(record_trace=False))

    def __post_init__(self):
        if self.trials_per_cell < 1:
            raise ConfigError("trials_per_cell must be >= 1")
        if not self.robot_counts:
            raise ConfigError("robot_counts must be non-empty")
        if not self.modes:
            raise ConfigError("modes must be non-empty")
        for m in self.modes:
            if m not in (HYBRID, DECENTRALIZED):
                raise ConfigError(f"unknown mode {m!r}")

    def trial_config(self, mode: str, n: int) -> TrialConfig:
        return replace(self.trial, mode=mode, n_robots=n)


@dataclass(frozen=True)
class AggregateRow:
    mode: str
    n_robots: int
    trials: int
    success_mean: float
    success_ci: float
    speed_mean: float
    speed_ci: float
    replans_mean: float
    replans_ci: float
    collisions_total: int


def cell_seed(base_seed: int, mode: str, n: int, index: int) -> int:
    """Deterministic, cell-independent trial seed."""
    digest = hashlib.sha256(f"{base_seed}:{mode}:{n}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _mean_ci(values) -> tuple:
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    if len(values) < 2:
        return mean, 0.0
    return mean, float(1.96 * values.std(ddof=1) / math.sqrt(len(values)))


def aggregate(results) -> AggregateRow:
    """Mean and normal-approximation 95% CI per metric for one cell."""
    results = list(results)
    if not results:
        raise EmptyCell("no trial results to aggregate")
    mode = results[0].mode
    n = results[0].n_robots
    if any(r.mode != mode or r.n_robots != n for r in results):
        raise ValueError("results must share (mode, n_robots)")
    s_mean, s_ci = _mean_ci([r.success_rate for r in results])
    v_mean, v_ci = _mean_ci([r.mean_speed for r in results])
    r_mean, r_ci = _mean_ci([r.total_replans for r in results])
    collisions = sum(r.rr_collisions + r.ro_collisions for r in results)
    return AggregateRow(mode, n, len(results), s_mean, s_ci, v_mean, v_ci,
                        r_mean, r_ci, collisions)


def _run_cell_trial(args):
    cfg, seed = args
    return run_trial(cfg, seed)


def run_sweep(cfg: SweepConfig, jobs: int = 1, progress=None):
    """Run every (mode, n, trial) cell; returns (rows, results, failures).

    results: dict (mode, n) -> list of TrialResult in trial-index order.
    failures: list of (mode, n, index, seed, error-string); failed trials
    are recorded, never silently dropped.
    """
    cells = sorted((m, n) for m in cfg.modes for n in cfg.robot_counts)
    results = {}
    failures = []
    for mode, n in cells:
        tcfg = cfg.trial_config(mode, n)
        seeds = [cell_seed(cfg.base_seed, mode, n, i)
                 for i in range(cfg.trials_per_cell)]
        cell_results = []
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futs = [pool.submit(_run_cell_trial, (tcfg, s)) for s in seeds]
                for i, fut in enumerate(futs):
                    try:
                        cell_results.append(fut.result())
                    except Exception as exc:  # noqa: BLE001
                        failures.append((mode, n, i, seeds[i], repr(exc)))
        else:
            for i, seed in enumerate(seeds):
                try:
                    cell_results.append(run_trial(tcfg, seed))
                except Exception as exc:  # noqa: BLE001 - recorded, not dropped
                    failures.append((mode, n, i, seed, repr(exc)))
        results[(mode, n)] = cell_results
        if progress is not None:
            progress(mode, n, len(cell_results))
    rows = [aggregate(results[c]) for c in cells if results[c]]
    return rows, results, failures


SUMMARY_HEADER = ("mode,n_robots,trials,success_mean,success_ci,speed_mean,"
                  "speed_ci,replans_mean,replans_ci,collisions_total")

TRIALS_HEADER = ("mode,n_robots,trial,seed,success_rate,avg_speed,"
                 "replans_total,rr_collisions,ro_collisions,max_cluster_size")


def emit_outputs(rows, results, out_dir: str, plots: bool = False,
                 failures=()):
    """Write summary.csv, trials.csv, optional SVG plots. Deterministic:
    re-running on the same rows yields byte-identical files."""
    try:
        os.makedirs(out_dir, exist_ok=True)
        written = []
        summary = os.path.join(out_dir, "summary.csv")
        with open(summary, "w", newline="") as fh:
            fh.write(SUMMARY_HEADER + "\n")
            for r in rows:
                fh.write(f"{r.mode},{r.n_robots},{r.trials},"
                         f"{r.success_mean!r},{r.success_ci!r},"
                         f"{r.speed_mean!r},{r.speed_ci!r},"
                         f"{r.replans_mean!r},{r.replans_ci!r},"
                         f"{r.collisions_total}\n")
        written.append(summary)
        trials = os.path.join(out_dir, "trials.csv")
        with open(trials, "w", newline="") as fh:
            fh.write(TRIALS_HEADER + "\n")
            for (mode, n) in sorted(results):
                for i, t in enumerate(results[(mode, n)]):
                    fh.write(f"{mode},{n},{i},{t.seed},{t.success_rate!r},"
                             f"{t.mean_speed!r},{t.total_replans},"
                             f"{t.rr_collisions},{t.ro_collisions},"
                             f"{t.max_cluster_size}\n")
        written.append(trials)
        if failures:
            fpath = os.path.join(out_dir, "failures.csv")
            with open(fpath, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["mode", "n_robots", "trial", "seed", "error"])
                for row in failures:
                    w.writerow(row)
            written.append(fpath)
        if plots:
            from .plots import plot_metric
            for metric, name in (("success", "success.svg"),
                                 ("speed", "speed.svg"),
                                 ("replans", "replans.svg")):
                path = os.path.join(out_dir, name)
                plot_metric(rows, metric, path)
                written.append(path)
        return written
    except OSError as exc:
        raise OSError(f"writing outputs under {out_dir!r}: {exc}") from exc


def rows_from_trials_csv(path: str):
    """Recompute AggregateRows from trials.csv alone."""
    cells = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            key = (rec["mode"], int(rec["n_robots"]))
            cells.setdefault(key, []).append(rec)
    rows = []
    for (mode, n) in sorted(cells):
        recs = cells[(mode, n)]
        s_mean, s_ci = _mean_ci([float(r["success_rate"]) for r in recs])
        v_mean, v_ci = _mean_ci([float(r["avg_speed"]) for r in recs])
        r_mean, r_ci = _mean_ci([float(r["replans_total"]) for r in recs])
        collisions = sum(int(r["rr_collisions"]) + int(r["ro_collisions"])
                         for r in recs)
        rows.append(AggregateRow(mode, n, len(recs), s_mean, s_ci,
                                 v_mean, v_ci, r_mean, r_ci, collisions))
    return rows


# -- flat key = value config files ------------------------------------

_SWEEP_KEYS = {"modes", "robot_counts", "trials_per_cell", "base_seed",
               "out_dir"}

# key -> (config section, field, type)
_OVERRIDE_KEYS = {
    "width": ("world", "width", float),
    "height": ("world", "height", float),
    "pillar_rows": ("world", "pillar_rows", int),
    "pillar_cols": ("world", "pillar_cols", int),
    "pillar_radius": ("world", "pillar_radius", float),
    "grid_resolution": ("world", "grid_resolution", float),
    "v_max": ("limits", "v_max", float),
    "w_max": ("limits", "w_max", float),
    "a_lin": ("limits", "a_lin", float),
    "a_ang": ("limits", "a_ang", float),
    "dwa_horizon": ("dwa", "horizon", float),
    "w_heading": ("dwa", "w_heading", float),
    "w_clear": ("dwa", "w_clear", float),
    "w_vel": ("dwa", "w_vel", float),
    "clearance_margin": ("dwa", "clearance_margin", float),
    "lookahead": ("dwa", "lookahead", float),
    "n_rays": ("lidar", "n_rays", int),
    "lidar_span": ("lidar", "span", float),
    "lidar_max_range": ("lidar", "max_range", float),
    "eta_threshold": ("coordinator", "eta_threshold", float),
    "stop_margin": ("coordinator", "stop_margin", float),
    "robot_radius": ("trial", "robot_radius", float),
    "dt": ("trial", "dt", float),
    "timeout": ("trial", "timeout", float),
    "goal_tolerance": ("trial", "goal_tolerance", float),
    "patience_min": ("trial", "patience_min", float),
    "patience_max": ("trial", "patience_max", float),
    "stuck_displacement": ("trial", "stuck_displacement", float),
    "eta_speed_factor": ("trial", "eta_speed_factor", float),
}


def _parse_counts(text: str):
    counts = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-")
            counts.extend(range(int(lo), int(hi) + 1))
        else:
            counts.append(int(part))
    return tuple(counts)


def parse_config(text: str) -> SweepConfig:
    """Flat `key = value` sweep config; unknown keys are errors."""
    sweep_kwargs = {}
    sections = {"world": {}, "limits": {}, "dwa": {}, "lidar": {},
                "coordinator": {}, "trial": {}}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected `key = value`: {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "modes":
            sweep_kwargs["modes"] = tuple(m.strip() for m in value.split(","))
        elif key == "robot_counts":
            sweep_kwargs["robot_counts"] = _parse_counts(value)
        elif key == "trials_per_cell":
            sweep_kwargs["trials_per_cell"] = int(value)
        elif key == "base_seed":
            sweep_kwargs["base_seed"] = int(value)
        elif key == "out_dir":
            sweep_kwargs["out_dir"] = value
        elif key in _OVERRIDE_KEYS:
            section, fname, typ = _OVERRIDE_KEYS[key]
            sections[section][fname] = typ(value)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")

    trial = TrialConfig(record_trace=False)
    if sections["world"]:
        trial = replace(trial, world=replace(trial.world, **sections["world"]))
    if sections["limits"] or sections["dwa"]:
        limits = replace(trial.dwa.limits, **sections["limits"])
        trial = replace(trial, dwa=replace(trial.dwa, limits=limits,
                                           **sections["dwa"]))
    if sections["lidar"]:
        trial = replace(trial, lidar=replace(trial.lidar, **sections["lidar"]))
    if sections["coordinator"]:
        trial = replace(trial, coordinator=replace(trial.coordinator,
                                                   **sections["coordinator"]))
    if sections["trial"]:
        trial = replace(trial, **sections["trial"])
    return SweepConfig(trial=trial, **sweep_kwargs)


def load_config(path: str) -> SweepConfig:
    with open(path) as fh:
        return parse_config(fh.read())
