"""Command-line front end.

Run a config::

    python -m compound_render --config wall.eqc --frames 10 --scene mesh:20000 --out out/

Benchmark the preset modes over channel counts::

    python -m compound_render --bench 1,2,4,8 --scene mesh:20000 --out out/

Exit codes: 0 success, 2 configuration error, 3 simulation error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from compound_render import codecs, presets
from compound_render.compositing.image import write_ppm
from compound_render.config.parser import ConfigError, load_config, parse_config
from compound_render.simrender.scene import david_like_mesh, procedural_volume
from compound_render.simrender.simulator import (
    CostModel,
    SimConfig,
    SimulationError,
    simulate,
    write_stats_csv,
    write_timeline,
)
from compound_render.tasking import DependencyCycle

EXIT_OK, EXIT_CONFIG, EXIT_SIM = 0, 2, 3
BENCH_MODES = ("sort-first", "sort-last", "tiles")


def parse_scene(spec: str, seed: int = 0):
    kind, _, size = spec.partition(":")
    try:
        n = int(size)
    except ValueError:
        raise ValueError(f"scene size must be an integer: {spec!r}") from None
    if kind == "mesh":
        return david_like_mesh(n, seed=seed, radius=1.4)
    if kind == "volume":
        return procedural_volume(n, seed=seed)
    raise ValueError(f"unknown scene kind {kind!r} (mesh:T or volume:V)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="compound_render", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="configuration file")
    p.add_argument("--frames", type=int, default=1)
    p.add_argument("--scene", default="mesh:20000", help="mesh:T or volume:V")
    p.add_argument("--eye", choices=("mono", "stereo"), default="mono")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--bench", help="comma separated channel counts to sweep")
    p.add_argument("--modes", default=",".join(BENCH_MODES), help="bench modes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cost", action="append", default=[], metavar="KEY=VALUE", help="cost model override")
    p.add_argument("--latency", type=int, help="override the configured latency")
    p.add_argument("--codec", help="compress transmitted frames (rle64, per_component, swizzle_per_component)")
    p.add_argument("--chunks", type=int, default=1)
    return p


def run(args, scene, cost: CostModel) -> int:
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sim = SimConfig(
        frames=args.frames,
        latency=args.latency,
        eye_mode=args.eye,
        workers=codecs.default_workers(),
        codec=args.codec,
        chunks=args.chunks,
    )
    try:
        result = simulate(cfg, scene, cost, sim)
    except (SimulationError, DependencyCycle) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIM
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for frame, images in sorted(result.images.items()):
        for label, image in sorted(images.items()):
            write_ppm(out / f"frame{frame:04d}_{label}.ppm", image)
    write_stats_csv(result, out / "stats.csv")
    write_timeline(result, out / "timeline.jsonl")
    fps = result.throughput_fps()
    print(f"{len(result.frames)} frames, {fps:.2f} fps simulated, output in {out}")
    return EXIT_OK


def bench_rows(
    counts: list[int],
    modes: list[str],
    scene,
    cost: CostModel,
    frames: int = 8,
    width: int = 640,
    height: int = 480,
) -> list[dict]:
    """Simulated throughput of each preset mode per channel count, relative to n = 1."""
    rows = []
    for mode in modes:
        if mode not in presets.MODES:
            raise ValueError(f"unknown bench mode {mode!r}")
        base_fps = None
        for n in sorted(counts):
            size = dict(width=width, height=height)
            text = presets.single(**size) if n == 1 else presets.MODES[mode](n, **size)
            result = simulate(parse_config(text), scene, cost, SimConfig(frames=frames, render=False))
            fps = result.throughput_fps(warmup=2)
            if base_fps is None:
                base_fps = fps if n == 1 else None
            speedup = fps / base_fps if base_fps else float("nan")
            rows.append({"n": n, "mode": mode, "fps": round(fps, 3), "speedup": round(speedup, 4)})
    return rows


def bench(args, scene, cost: CostModel) -> int:
    try:
        counts = [int(v) for v in args.bench.split(",") if v]
    except ValueError:
        print(f"error: bad --bench list {args.bench!r}", file=sys.stderr)
        return EXIT_CONFIG
    if not counts or min(counts) < 1:
        print("error: bench counts must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if 1 not in counts:
        counts = [1] + counts
    try:
        rows = bench_rows(counts, args.modes.split(","), scene, cost, max(args.frames, 4))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIM
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "bench.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["n", "mode", "fps", "speedup"])
        writer.writeheader()
        writer.writerows(rows)
    for row in rows:
        print(f"{row['mode']:>12} n={row['n']:<3} {row['fps']:9.2f} fps  x{row['speedup']:.2f}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.frames < 1:
        print("error: --frames must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cost = CostModel.from_overrides(args.cost)
        scene = parse_scene(args.scene, args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.bench:
        return bench(args, scene, cost)
    if not args.config:
        print("error: --config is required unless --bench is given", file=sys.stderr)
        return EXIT_CONFIG
    return run(args, scene, cost)
