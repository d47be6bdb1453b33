"""Build the desk-scale fatigue table and write it next to a CSV dump."""

import argparse
import time

from qsfarm.lut import LutGrid, build_lut


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="desk.lut")
    p.add_argument("--csv")
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    grid = LutGrid.desk()
    t0 = time.perf_counter()
    lut = build_lut(grid, workers=args.workers, provenance="surrogate:desk")
    lut.save(args.out)
    if args.csv:
        lut.dump_csv(args.csv)
    print(f"{grid.n_nodes} nodes, {grid.simulation_count()} simulations, "
          f"{time.perf_counter() - t0:.1f}s, sha256 {lut.digest()}")


if __name__ == "__main__":
    main()
