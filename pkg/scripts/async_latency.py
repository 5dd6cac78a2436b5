"""Throughput of latency 0 vs latency 1 on an alternating two-channel imbalance.

Each source is slow on every other frame. With one frame of latency the
fast source runs ahead instead of idling at the frame boundary.
"""

import argparse

from compound_render import presets
from compound_render.config import parse_config
from compound_render.simrender.scene import quad_mesh
from compound_render.simrender.simulator import MS, CostModel, SimConfig, simulate

ZERO = dict(per_triangle=0, per_fragment=0, per_pixel_readback=0, per_byte_transmit=0, per_pixel_assemble=0, fixed_per_task=0, draw_fixed=0)


def cost(heavy_ms: float, light_ms: float) -> CostModel:
    def override(channel, frame, ctx):
        if channel == "c0":
            return None
        heavy = (frame % 2 == 0) == (channel == "c1")
        return (heavy_ms if heavy else light_ms) * MS

    return CostModel(**ZERO, readback_fixed=MS, assemble_fixed=MS, draw_override=override)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--frames", type=int, default=40)
    args = p.parse_args()
    scene = quad_mesh(8, 8, -2.0, 4)
    print(f"{'heavy/light ms':>15} {'fps lat0':>9} {'fps lat1':>9} {'gain':>7}")
    for heavy, light in ((12, 10), (15, 10), (20, 10), (30, 10), (40, 5)):
        fps = []
        for latency in (0, 1):
            cfg = parse_config(presets.alternating_pair(latency=latency))
            r = simulate(cfg, scene, cost(heavy, light), SimConfig(frames=args.frames, render=False))
            fps.append(r.throughput_fps(warmup=2))
        print(f"{heavy:>8}/{light:<6} {fps[0]:9.2f} {fps[1]:9.2f} {100 * (fps[1] / fps[0] - 1):6.1f}%")


if __name__ == "__main__":
    main()
