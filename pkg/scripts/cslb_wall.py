"""Six-segment, twelve-GPU wall: static GPU pairs vs the view equalizer.

One segment carries six times the load of its neighbours. Prints the mean
frame time of both setups and the final GPU allocation.
"""

import argparse

from compound_render import presets
from compound_render.config import parse_config
from compound_render.simrender.scene import quad_mesh
from compound_render.simrender.simulator import MS, CostModel, SimConfig, simulate

ZERO = dict(per_triangle=0, per_fragment=0, per_pixel_readback=0, per_byte_transmit=0, per_pixel_assemble=0,
            fixed_per_task=0, draw_fixed=0, readback_fixed=0, assemble_fixed=0)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--weights", default="1,1,2,6,1,1")
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--segment-ms", type=float, default=20.0, help="draw time of a weight-1 segment on one GPU")
    args = p.parse_args()
    weights = [float(w) for w in args.weights.split(",")]

    def load(channel, frame, ctx):
        segment = int(ctx.destination[1:]) // 2
        return args.segment_ms * MS * weights[segment] * ctx.pvp.area / ctx.dest_pvp.area

    cost = CostModel(**ZERO, draw_override=load)
    scene = quad_mesh(8, 8, -2.0, 4)
    times = {}
    for label, ve in (("static pairs", False), ("view equalizer", True)):
        cfg = parse_config(presets.cslb_wall(segments=len(weights), gpus=2 * len(weights), view_equalizer=ve))
        r = simulate(cfg, scene, cost, SimConfig(frames=args.frames, render=False))
        times[label] = r.mean_frame_interval_ns(warmup=5) / MS
        print(f"{label:>15}: {times[label]:7.2f} ms/frame")
        if ve:
            alloc = r.allocations[max(r.allocations)]
            for g, shares in enumerate(alloc):
                print(f"   g{g:<2} " + ", ".join(f"segment {d}: {s:.2f}" for d, s in sorted(shares.items())))
    print(f"speedup {times['static pairs'] / times['view equalizer']:.2f}x")


if __name__ == "__main__":
    main()
