"""Command line interface: batch sweeps, single trials, trace replay."""

from __future__ import annotations

import argparse
import sys

from .experiments import SweepConfig, emit_outputs, load_config, run_sweep
from .simulation import TrialConfig, run_trial


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config) if args.config else SweepConfig()
    out_dir = args.out or cfg.out_dir

    def progress(mode, n, k):
        print(f"[sweep] {mode} n={n}: {k} trials done", flush=True)

    rows, results, failures = run_sweep(cfg, jobs=args.jobs,
                                        progress=progress)
    written = emit_outputs(rows, results, out_dir, plots=args.plots,
                           failures=failures)
    for path in written:
        print(f"wrote {path}")
    if failures:
        print(f"{len(failures)} trial(s) failed; see failures.csv",
              file=sys.stderr)
        return 1
    return 0


def _cmd_run(args) -> int:
    cfg = TrialConfig(mode=args.mode, n_robots=args.robots,
                      record_trace=args.trace is not None)
    result = run_trial(cfg, args.seed, trace_path=args.trace)
    print(f"mode={result.mode} n={result.n_robots} seed={result.seed}")
    print(f"success_rate={result.success_rate:.2f} "
          f"avg_speed={result.mean_speed:.2f} "
          f"replans={result.total_replans} "
          f"collisions_rr={result.rr_collisions} "
          f"collisions_ro={result.ro_collisions}")
    if args.trace:
        print(f"wrote {args.trace}")
    return 0


def _cmd_replay(args) -> int:
    from .plots import replay_trace
    frames = replay_trace(args.trace, args.svg, every=args.every)
    print(f"wrote {len(frames)} frames to {args.svg}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vtlsim",
        description="Hybrid multi-robot coordination simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run the batch experiment sweep")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--plots", action="store_true",
                   help="emit success/speed/replans SVG curves")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("run", help="run a single trial")
    p.add_argument("--mode", choices=("hybrid", "decentralized"),
                   required=True)
    p.add_argument("--robots", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", help="write a JSONL trace to this path")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("replay", help="render trace snapshots as SVG")
    p.add_argument("--trace", required=True)
    p.add_argument("--svg", required=True, help="output directory")
    p.add_argument("--every", type=int, default=10,
                   help="render every Nth step")
    p.set_defaults(func=_cmd_replay)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
