"""An 8-robot trial in both modes on the same seed, side by side.

Shows where the coordinator earns its keep: under congestion the
decentralized robots replan repeatedly and some never arrive, while the
hybrid run resolves the same encounters with STOP/PROCEED verdicts.

Usage: python demos/congestion.py [seed] [n_robots]
"""

import sys

from vtlsim.simulation import TrialConfig, run_trial


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 7
    n = int(sys.argv[2]) if len(sys.argv) > 2 else 8
    print(f"seed {seed}, {n} robots")
    print(f"{'mode':>15} {'success':>8} {'avg speed':>10} "
          f"{'replans':>8} {'rr':>3} {'ro':>3} {'max zone':>9}")
    for mode in ("hybrid", "decentralized"):
        cfg = TrialConfig(mode=mode, n_robots=n, record_trace=False)
        r = run_trial(cfg, seed)
        print(f"{mode:>15} {r.success_rate:8.2f} {r.mean_speed:10.2f} "
              f"{r.total_replans:8d} {r.rr_collisions:3d} "
              f"{r.ro_collisions:3d} {r.max_cluster_size:9d}")


if __name__ == "__main__":
    main()
