"""Compression ratios of the three RLE codecs on the radial gradient and on rendered frames."""

import argparse

from compound_render import codecs, presets
from compound_render.config import parse_config
from compound_render.simrender.scene import david_like_mesh
from compound_render.simrender.simulator import SimConfig, simulate


def report(label: str, data: bytes):
    cells = []
    for codec in codecs.CodecId:
        ratio = codecs.compression_ratio(len(data), codecs.encode(codec, data))
        cells.append(f"{100 * ratio:>10.2f}%")
    print(f"{label:>22} " + " ".join(cells))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=512)
    args = p.parse_args()
    print(f"{'buffer':>22} " + " ".join(f"{label:>11}" for label in ("rle64", "per-comp", "swizzled")))
    report(f"radial gradient {args.size}", codecs.radial_gradient(args.size).tobytes())
    cfg = parse_config(presets.single(640, 480))
    img = simulate(cfg, david_like_mesh(20000, seed=0, radius=1.4), sim=SimConfig(frames=1)).image(0)
    report("mesh frame color", img.color.tobytes())
    report("mesh frame depth", img.depth.tobytes())


if __name__ == "__main__":
    main()
