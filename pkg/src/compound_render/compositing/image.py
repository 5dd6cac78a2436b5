"""Pixel-viewport anchored RGBA8 + depth images and their golden-file formats."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from compound_render.geometry import PixelViewport

FAR_DEPTH = np.uint32(0xFFFFFFFF)


class ImageError(ValueError):
    pass


@dataclass
class Image:
    """Color (h, w, 4) uint8 premultiplied RGBA and optional (h, w) uint32 depth.

    ``pvp`` places the arrays within the destination; ``roi`` is the part of
    ``pvp`` holding rendered pixels. Pixels outside the ROI are background:
    transparent black, far depth.
    """

    pvp: PixelViewport
    color: np.ndarray
    depth: np.ndarray | None = None
    roi: PixelViewport | None = None

    def __post_init__(self):
        if self.color.shape != (self.pvp.h, self.pvp.w, 4) or self.color.dtype != np.uint8:
            raise ImageError(f"color array {self.color.shape} does not match {self.pvp}")
        if self.depth is not None and (
            self.depth.shape != (self.pvp.h, self.pvp.w) or self.depth.dtype != np.uint32
        ):
            raise ImageError(f"depth array {self.depth.shape} does not match {self.pvp}")
        if self.roi is None:
            self.roi = self.pvp
        if not self.pvp.contains(self.roi):
            raise ImageError(f"roi {self.roi} outside {self.pvp}")

    @classmethod
    def blank(cls, pvp: PixelViewport, depth: bool = True) -> "Image":
        return cls(
            pvp,
            np.zeros((pvp.h, pvp.w, 4), np.uint8),
            np.full((pvp.h, pvp.w), FAR_DEPTH, np.uint32) if depth else None,
            PixelViewport(pvp.x, pvp.y, 0, 0),
        )

    @property
    def has_depth(self) -> bool:
        return self.depth is not None

    def copy(self) -> "Image":
        return Image(
            self.pvp,
            self.color.copy(),
            None if self.depth is None else self.depth.copy(),
            self.roi,
        )

    def crop(self, region: PixelViewport, with_depth: bool = True) -> "Image":
        region = self.pvp.intersect(region)
        rows, cols = region.slices(self.pvp)
        depth = None
        if with_depth and self.depth is not None:
            depth = self.depth[rows, cols].copy()
        roi = self.roi.intersect(region)
        if roi.empty:
            roi = PixelViewport(region.x, region.y, 0, 0)
        return Image(region, self.color[rows, cols].copy(), depth, roi)

    def expand(self, region: PixelViewport) -> "Image":
        """Pad (or crop) to ``region`` filling with background."""
        out = Image.blank(region, depth=self.depth is not None)
        part = self.pvp.intersect(region)
        if not part.empty:
            out.color[part.slices(region)] = self.color[part.slices(self.pvp)]
            if self.depth is not None:
                out.depth[part.slices(region)] = self.depth[part.slices(self.pvp)]
        roi = self.roi.intersect(region)
        out.roi = roi if not roi.empty else PixelViewport(region.x, region.y, 0, 0)
        return out

    def nbytes(self, with_depth: bool | None = None) -> int:
        """Transport size of the ROI: 4 bytes color plus 4 bytes depth per pixel."""
        if with_depth is None:
            with_depth = self.depth is not None
        return self.roi.area * (8 if with_depth else 4)

    def written_bounds(self) -> PixelViewport:
        """Tight bounds of pixels differing from background."""
        mask = self.color.any(axis=2)
        if self.depth is not None:
            mask |= self.depth != FAR_DEPTH
        if not mask.any():
            return PixelViewport(self.pvp.x, self.pvp.y, 0, 0)
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        return PixelViewport(
            self.pvp.x + int(cols[0]),
            self.pvp.y + int(rows[0]),
            int(cols[-1] - cols[0] + 1),
            int(rows[-1] - rows[0] + 1),
        )

    def same_pixels(self, other: "Image", depth: bool = False) -> bool:
        if self.pvp != other.pvp or not np.array_equal(self.color, other.color):
            return False
        if depth:
            return np.array_equal(self.depth, other.depth)
        return True


def write_ppm(path: str | Path, image: Image) -> None:
    """Binary P6, RGB only, rows top to bottom."""
    rgb = np.ascontiguousarray(image.color[:, :, :3])
    header = f"P6\n{image.pvp.w} {image.pvp.h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + rgb.tobytes())


def read_ppm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields, pos = _pnm_header(data, b"P6")
    w, h, maxval = fields
    if maxval != 255:
        raise ImageError("only 8-bit PPM supported")
    return np.frombuffer(data, np.uint8, w * h * 3, pos).reshape(h, w, 3)


def write_pgm16(path: str | Path, image: Image) -> None:
    """Binary P5 with maxval 65535, big-endian; stores the high 16 bits of depth."""
    if image.depth is None:
        raise ImageError("image has no depth buffer")
    hi = (image.depth >> 16).astype(">u2")
    header = f"P5\n{image.pvp.w} {image.pvp.h}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + hi.tobytes())


def read_pgm16(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    (w, h, maxval), pos = _pnm_header(data, b"P5")
    if maxval != 65535:
        raise ImageError("expected 16-bit PGM")
    return np.frombuffer(data, ">u2", w * h, pos).reshape(h, w).astype(np.uint16)


def _pnm_header(data: bytes, magic: bytes):
    if not data.startswith(magic):
        raise ImageError(f"not a {magic.decode()} file")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    return fields, pos + 1
