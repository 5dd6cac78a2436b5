"""Strong-scaling sweep of sort-first, sort-last and tile compounds.

Runs the sweep twice: on a centered model and on one pushed into the top
third of the screen, where static bands leave most channels idle.

    python scripts/bench_scaling.py --counts 1,2,4,8 --out results/
"""

import argparse
import csv
from dataclasses import replace
from pathlib import Path

from compound_render.cli import BENCH_MODES, bench_rows
from compound_render.simrender.scene import david_like_mesh
from compound_render.simrender.simulator import CostModel

SCENES = {
    "centered": lambda t: david_like_mesh(t, seed=0, radius=1.4),
    "skewed": lambda t: replace(david_like_mesh(t, seed=0, radius=1.0), center=(0.0, 2.0, -4.0)),
}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--counts", default="1,2,4,8")
    p.add_argument("--triangles", type=int, default=20000)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--out", default="results")
    args = p.parse_args()
    counts = [int(v) for v in args.counts.split(",")]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, make in SCENES.items():
        rows = bench_rows(counts, list(BENCH_MODES), make(args.triangles), CostModel(), args.frames)
        with open(out / f"bench_{name}.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["n", "mode", "fps", "speedup"])
            writer.writeheader()
            writer.writerows(rows)
        print(f"\n{name} scene")
        print(f"{'n':>3} " + " ".join(f"{m:>11}" for m in BENCH_MODES))
        for n in counts:
            speed = {r["mode"]: r["speedup"] for r in rows if r["n"] == n}
            print(f"{n:>3} " + " ".join(f"{speed[m]:>11.2f}" for m in BENCH_MODES))


if __name__ == "__main__":
    main()
