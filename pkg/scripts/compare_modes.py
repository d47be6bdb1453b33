"""Closed loop vs open loop vs greedy on a bundled scenario over several seeds."""

import argparse

import numpy as np

from qsfarm.loop import LoopConfig, load_scenario, report_gains, run_scenario
from qsfarm.lut import FatigueLut
from qsfarm.optimize import ObjectiveWeights
from qsfarm.stats import welch_t_test


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--scenario", default="mismatch4x4")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--weights", default="1,0")
    p.add_argument("--lut")
    args = p.parse_args()
    sc = load_scenario(args.scenario)
    lut = FatigueLut.load(args.lut) if args.lut else None
    w = ObjectiveWeights.parse(args.weights)
    pooled = {"ol": [], "cl": []}
    print("seed  cl/greedy  cl/ol    farm DEL greedy/ol/cl")
    for seed in range(args.seeds):
        runs = {m: run_scenario(sc, LoopConfig(mode=m, weights=w), seed, lut) for m in ("greedy", "ol", "cl")}
        for m in pooled:
            pooled[m].append(runs[m].window_power)
        g_greedy = report_gains(runs["greedy"], runs["cl"])["energy_gain"]
        g_ol = report_gains(runs["ol"], runs["cl"])["energy_gain"]
        # farm DEL tallies need a table
        dels = "/".join("-" if runs[m].farm_del is None else f"{runs[m].farm_del:.0f}" for m in ("greedy", "ol", "cl"))
        print(f"{seed:4d}  {g_greedy:+8.2%}  {g_ol:+7.2%}  {dels}")
    t, dof, pval = welch_t_test(np.concatenate(pooled["cl"]), np.concatenate(pooled["ol"]))
    print(f"pooled window means CL vs OL: t {t:.2f}, dof {dof:.1f}, p {pval:.2e}")


if __name__ == "__main__":
    main()
