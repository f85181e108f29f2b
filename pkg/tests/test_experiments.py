import math

import pytest

from vtlsim.experiments import (ConfigError, EmptyCell, SUMMARY_HEADER,
                                TRIALS_HEADER, SweepConfig, aggregate,
                                cell_seed, emit_outputs, parse_config,
                                rows_from_trials_csv, run_sweep)
from vtlsim.simulation import TrialConfig, TrialResult


def fake_result(mode="hybrid", n=2, seed=0, success=(True, True),
                speed=(50.0, 60.0), replans=(1, 2), rr=0, ro=0):
    return TrialResult(mode=mode, n_robots=n, seed=seed,
                       robot_ids=[f"r{i:02d}" for i in range(n)],
                       success=list(success), avg_speed=list(speed),
                       replans=list(replans),
                       time_to_goal=[10.0] * n,
                       rr_collisions=rr, ro_collisions=ro,
                       max_cluster_size=2)


SMALL = SweepConfig(robot_counts=(1, 2), trials_per_cell=2,
                    trial=TrialConfig(timeout=20.0, record_trace=False))


class TestCellSeed:
    def test_deterministic(self):
        assert cell_seed(0, "hybrid", 8, 3) == cell_seed(0, "hybrid", 8, 3)

    def test_cells_independent(self):
        seeds = {cell_seed(0, m, n, i)
                 for m in ("hybrid", "decentralized")
                 for n in range(1, 11) for i in range(50)}
        assert len(seeds) == 1000  # no collisions across cells

    def test_base_seed_changes_everything(self):
        assert cell_seed(0, "hybrid", 8, 3) != cell_seed(1, "hybrid", 8, 3)


class TestAggregate:
    def test_means_and_ci(self):
        results = [fake_result(success=(True, True)),
                   fake_result(seed=1, success=(True, False), replans=(3, 4))]
        row = aggregate(results)
        assert row.trials == 2
        assert row.success_mean == pytest.approx(0.75)
        assert row.replans_mean == pytest.approx(5.0)
        # 1.96 * sample std / sqrt(n) on success rates {1.0, 0.5}
        expected_ci = 1.96 * math.sqrt(0.125) / math.sqrt(2)
        assert row.success_ci == pytest.approx(expected_ci)
        assert row.collisions_total == 0

    def test_single_trial_has_zero_ci(self):
        row = aggregate([fake_result()])
        assert row.success_ci == 0.0

    def test_empty_cell_raises(self):
        with pytest.raises(EmptyCell):
            aggregate([])

    def test_mixed_cells_rejected(self):
        with pytest.raises(ValueError):
            aggregate([fake_result(n=2), fake_result(n=3)])


class TestSweepConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            SweepConfig(trials_per_cell=0)
        with pytest.raises(ConfigError):
            SweepConfig(robot_counts=())
        with pytest.raises(ConfigError):
            SweepConfig(modes=("other",))

    def test_trial_config_stamps_cell(self):
        cfg = SweepConfig()
        t = cfg.trial_config("decentralized", 7)
        assert t.mode == "decentralized" and t.n_robots == 7


@pytest.fixture(scope="module")
def sweep():
    return run_sweep(SMALL)


class TestRunSweepAndEmit:
    def test_all_cells_present(self, sweep):
        rows, results, failures = sweep
        assert failures == []
        assert sorted(results) == [(m, n) for m in sorted(SMALL.modes)
                                   for n in (1, 2)]
        assert all(len(v) == 2 for v in results.values())
        assert [(r.mode, r.n_robots) for r in rows] == sorted(results)

    def test_seed_independence(self, sweep):
        # removing a cell leaves the other cells' trials unchanged
        _, results, _ = sweep
        solo = SweepConfig(modes=("hybrid",), robot_counts=(2,),
                           trials_per_cell=2, trial=SMALL.trial)
        _, solo_results, _ = run_sweep(solo)
        assert solo_results[("hybrid", 2)] == results[("hybrid", 2)]

    def test_emit_outputs_deterministic(self, sweep, tmp_path):
        rows, results, _ = sweep
        d1, d2 = tmp_path / "a", tmp_path / "b"
        emit_outputs(rows, results, str(d1), plots=True)
        emit_outputs(rows, results, str(d2), plots=True)
        for name in ("summary.csv", "trials.csv", "success.svg",
                     "speed.svg", "replans.svg"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_csv_schemas(self, sweep, tmp_path):
        rows, results, _ = sweep
        emit_outputs(rows, results, str(tmp_path))
        header = (tmp_path / "summary.csv").read_text().splitlines()[0]
        assert header == ("mode,n_robots,trials,success_mean,success_ci,"
                          "speed_mean,speed_ci,replans_mean,replans_ci,"
                          "collisions_total")
        assert header == SUMMARY_HEADER
        lines = (tmp_path / "summary.csv").read_text().splitlines()
        assert len(lines) == 1 + len(rows)
        t_header = (tmp_path / "trials.csv").read_text().splitlines()[0]
        assert t_header == TRIALS_HEADER

    def test_summary_recomputable_from_trials(self, sweep, tmp_path):
        rows, results, _ = sweep
        emit_outputs(rows, results, str(tmp_path))
        recomputed = rows_from_trials_csv(str(tmp_path / "trials.csv"))
        assert len(recomputed) == len(rows)
        for a, b in zip(rows, sorted(rows, key=lambda r: (r.mode, r.n_robots))):
            assert a == b
        for a, b in zip(recomputed, rows):
            assert (a.mode, a.n_robots, a.trials) == (b.mode, b.n_robots,
                                                      b.trials)
            assert a.success_mean == pytest.approx(b.success_mean)
            assert a.replans_mean == pytest.approx(b.replans_mean)
            assert a.collisions_total == b.collisions_total

    def test_failures_recorded_not_raised(self):
        bad = SweepConfig(modes=("hybrid",), robot_counts=(1,),
                          trials_per_cell=1,
                          trial=TrialConfig(record_trace=False,
                                            world=SMALL.trial.world,
                                            robot_radius=30.0))
        rows, results, failures = run_sweep(bad)
        assert rows == [] and results[("hybrid", 1)] == []
        assert len(failures) == 1
        mode, n, idx, seed, err = failures[0]
        assert (mode, n, idx) == ("hybrid", 1, 0)
        assert err

    def test_failures_csv_emitted(self, tmp_path):
        emit_outputs([], {}, str(tmp_path),
                     failures=[("hybrid", 1, 0, 42, "boom")])
        text = (tmp_path / "failures.csv").read_text()
        assert "mode,n_robots,trial,seed,error" in text
        assert "boom" in text


class TestParseConfig:
    def test_full_roundtrip(self):
        cfg = parse_config("""
            # comment line
            modes = hybrid, decentralized
            robot_counts = 1-3, 8
            trials_per_cell = 5
            base_seed = 7
            out_dir = out
            v_max = 1.0          # inline comment
            pillar_radius = 2.5
            eta_threshold = 4.0
            timeout = 60
            n_rays = 36
        """)
        assert cfg.modes == ("hybrid", "decentralized")
        assert cfg.robot_counts == (1, 2, 3, 8)
        assert cfg.trials_per_cell == 5
        assert cfg.base_seed == 7
        assert cfg.out_dir == "out"
        assert cfg.trial.dwa.limits.v_max == 1.0
        assert cfg.trial.world.pillar_radius == 2.5
        assert cfg.trial.coordinator.eta_threshold == 4.0
        assert cfg.trial.timeout == 60.0
        assert cfg.trial.lidar.n_rays == 36

    def test_defaults_when_empty(self):
        cfg = parse_config("")
        assert cfg == SweepConfig()

    def test_unknown_key_is_error(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("warp_speed = 9")

    def test_missing_equals_is_error(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_config("just some words")

    def test_bad_mode_is_error(self):
        with pytest.raises(ConfigError):
            parse_config("modes = hybrid, other")
