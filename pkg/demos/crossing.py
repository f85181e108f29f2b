"""Two robots on crossing missions, with and without the coordinator.

The hybrid run holds exactly one robot at the shared crossing; the
decentralized run lets both dodge each other reactively. Prints the
verdict timeline and the per-robot outcome for each mode.

Usage: python demos/crossing.py [seed]
"""

import sys

from vtlsim.simulation import HELD, Simulation, TrialConfig


def run(mode, seed):
    sim = Simulation(TrialConfig(mode=mode, n_robots=2), seed)
    print(f"\n=== {mode} (seed {seed}) ===")
    for rid, r in sim.robots.items():
        print(f"  {rid}: ({r.mission.start.x:5.1f}, {r.mission.start.y:5.1f})"
              f" -> ({r.mission.goal.x:5.1f}, {r.mission.goal.y:5.1f})")
    held_spans = {}
    while not sim.done:
        sim.step()
        for rid, r in sim.robots.items():
            if r.status == HELD and rid not in held_spans:
                held_spans[rid] = [sim.t, sim.t]
                print(f"  t={sim.t:6.1f}s  {rid} HELD at the crossing")
            elif r.status == HELD:
                held_spans[rid][1] = sim.t
    for rid, (t0, t1) in held_spans.items():
        print(f"  {rid} held for {t1 - t0:.1f}s")
    for rid, r in sim.robots.items():
        print(f"  {rid}: {r.status} at t={r.time_to_goal:.1f}s, "
              f"{r.replan_count} replans")
    print(f"  collisions: robot-robot={sim.rr_collisions} "
          f"robot-obstacle={sim.ro_collisions}")


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    run("hybrid", seed)
    run("decentralized", seed)


if __name__ == "__main__":
    main()
