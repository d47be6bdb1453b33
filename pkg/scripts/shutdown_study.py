"""Yaw set points after a row shutdown on the 4 x 8 aligned farm, closed loop vs open loop."""

import argparse

import numpy as np

from qsfarm.loop import LoopConfig, load_scenario, report_gains, run_scenario


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--rows", default="b,c,d")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    np.set_printoptions(precision=1, suppress=True)
    for row in args.rows.split(","):
        sc = load_scenario(f"shutdown_{row}")
        cl = run_scenario(sc, LoopConfig(mode="cl"), args.seed)
        ol = run_scenario(sc, LoopConfig(mode="ol"), args.seed)
        g = report_gains(ol, cl)
        print(f"row {row.upper()} off: CL over OL {g['energy_gain']:+.2%} "
              f"(95% CI {g['energy_gain_ci'][0]:+.2%} .. {g['energy_gain_ci'][1]:+.2%}, Welch p {g['welch_p']:.1e})")
        # columns are rows A..H from upstream, one line per lateral position
        print(np.array(cl.windows[-1]["target"]).reshape(4, 8))


if __name__ == "__main__":
    main()
