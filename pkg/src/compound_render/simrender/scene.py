"""Procedural, seeded scenes: a triangle mesh and a bricked volume."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from compound_render.geometry import Range

MAX_TRIANGLES = 0xFFFF  # triangle index lives in the low 16 depth bits
SCENE_CENTER = (0.0, 0.0, -3.0)


@dataclass(frozen=True)
class TriangleMesh:
    """Triangles in database order. Colors are opaque premultiplied RGBA."""

    vertices: np.ndarray  # (V, 3) float64, model space
    triangles: np.ndarray  # (T, 3) int64
    colors: np.ndarray  # (T, 4) uint8
    center: tuple[float, float, float] = SCENE_CENTER
    spin: float = 0.0  # radians per frame about the model's y axis

    def __post_init__(self):
        if len(self.triangles) > MAX_TRIANGLES:
            raise ValueError(f"at most {MAX_TRIANGLES} triangles supported")

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    def model_matrix(self, frame: int) -> np.ndarray:
        a = self.spin * frame
        c, s = math.cos(a), math.sin(a)
        m = np.eye(4)
        m[:3, :3] = [[c, 0, s], [0, 1, 0], [-s, 0, c]]
        m[:3, 3] = self.center
        return m

    def world_vertices(self, frame: int) -> np.ndarray:
        m = self.model_matrix(frame)
        return self.vertices @ m[:3, :3].T + m[:3, 3]

    def span(self, rng: Range) -> tuple[int, int]:
        return rng.index_span(self.triangle_count)

    def bounds(self, rng: Range, frame: int):
        a, b = self.span(rng)
        if b <= a:
            return None
        pts = self.world_vertices(frame)[self.triangles[a:b].ravel()]
        return pts.min(axis=0), pts.max(axis=0)


def david_like_mesh(triangles: int = 20000, seed: int = 0, radius: float = 1.0, spin: float = 0.0) -> TriangleMesh:
    """A bumpy closed surface standing in for a scanned statue.

    Rings of latitude are emitted top to bottom, so any database range is a
    contiguous horizontal slice of the model.
    """
    if triangles < 1:
        raise ValueError("need at least one triangle")
    rng = np.random.default_rng(seed)
    n_lat = max(2, int(math.ceil(math.sqrt(triangles / 4.0))) + 1)
    n_lon = 2 * n_lat
    while 2 * n_lon * (n_lat - 1) < triangles:
        n_lat += 1
        n_lon = 2 * n_lat
    theta = np.linspace(0.0, math.pi, n_lat + 1)
    phi = np.linspace(0.0, 2 * math.pi, n_lon, endpoint=False)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    bumps = 1.0 + 0.08 * rng.standard_normal(tt.shape)
    bumps[0, :] = bumps[0, 0]
    bumps[-1, :] = bumps[-1, 0]
    # statue-like silhouette: narrower in the middle, taller than wide
    profile = 0.75 + 0.25 * np.cos(2.0 * tt)
    r = radius * bumps * profile
    verts = np.stack(
        [r * np.sin(tt) * np.cos(pp), 1.4 * radius * np.cos(tt) * bumps, r * np.sin(tt) * np.sin(pp)],
        axis=-1,
    ).reshape(-1, 3)

    def vid(i, j):
        return i * n_lon + (j % n_lon)

    tris = []
    for i in range(n_lat):
        for j in range(n_lon):
            a, b, c, d = vid(i, j), vid(i, j + 1), vid(i + 1, j), vid(i + 1, j + 1)
            if i > 0:
                tris.append((a, c, b))
            if i < n_lat - 1:
                tris.append((b, c, d))
    tris = np.asarray(tris[:triangles], np.int64)
    v = verts[tris]
    normal = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    normal /= np.maximum(np.linalg.norm(normal, axis=1, keepdims=True), 1e-12)
    light = np.array([0.4, 0.6, 0.7])
    light /= np.linalg.norm(light)
    shade = np.abs(normal @ light)
    base = np.array([200.0, 180.0, 150.0])
    tint = rng.integers(0, 24, size=(len(tris), 3))
    rgb = np.clip(base * (0.25 + 0.75 * shade[:, None]) + tint, 0, 255).astype(np.uint8)
    colors = np.concatenate([rgb, np.full((len(tris), 1), 255, np.uint8)], axis=1)
    return TriangleMesh(verts, tris, colors, SCENE_CENTER, spin)


def quad_mesh(width: float = 2.0, height: float = 1.5, z: float = -1.0, grid: int = 1) -> TriangleMesh:
    """A flat screen-aligned grid of triangles in world space, centred on the z axis."""
    xs = np.linspace(-width / 2, width / 2, grid + 1)
    ys = np.linspace(-height / 2, height / 2, grid + 1)
    verts = np.array([(x, y, 0.0) for y in ys for x in xs])
    tris = []
    for j in range(grid):
        for i in range(grid):
            a = j * (grid + 1) + i
            tris += [(a, a + 1, a + grid + 1), (a + 1, a + grid + 2, a + grid + 1)]
    tris = np.asarray(tris, np.int64)
    k = np.arange(len(tris))
    colors = np.stack([(37 * k) % 256, (91 * k + 40) % 256, (53 * k + 90) % 256, np.full_like(k, 255)], 1)
    return TriangleMesh(verts, tris, colors.astype(np.uint8), (0.0, 0.0, z))


@dataclass(frozen=True)
class VolumeBricks:
    """Premultiplied RGBA voxels, sliced along z into front-to-back slabs.

    ``voxels`` is (V, V, V, 4) indexed [z, y, x] with z = 0 the front slice
    (nearest a viewer looking down -z). The volume fills the axis-aligned
    cube ``center +- size / 2``.
    """

    voxels: np.ndarray
    center: tuple[float, float, float] = SCENE_CENTER
    size: float = 2.0
    brick: int = 8

    @property
    def resolution(self) -> int:
        return self.voxels.shape[0]

    def slice_span(self, rng: Range) -> tuple[int, int]:
        return rng.index_span(self.resolution)

    def slice_z(self, k: int) -> float:
        v = self.resolution
        return self.center[2] + self.size / 2 - (k + 0.5) * self.size / v

    def bounds(self, rng: Range, frame: int = 0):
        """World AABB of the occupied voxels inside the range's slab."""
        a, b = self.slice_span(rng)
        if b <= a:
            return None
        alpha = self.voxels[a:b, :, :, 3]
        occ = np.argwhere(alpha > 0)
        if occ.size == 0:
            return None
        v = self.resolution
        step = self.size / v
        c = np.asarray(self.center)
        lo_idx, hi_idx = occ.min(axis=0), occ.max(axis=0) + 1
        z_front = c[2] + self.size / 2 - (a + lo_idx[0]) * step
        z_back = c[2] + self.size / 2 - (a + hi_idx[0]) * step
        x0 = c[0] - self.size / 2 + lo_idx[2] * step
        x1 = c[0] - self.size / 2 + hi_idx[2] * step
        y_top = c[1] + self.size / 2 - lo_idx[1] * step
        y_bot = c[1] + self.size / 2 - hi_idx[1] * step
        return np.array([x0, y_bot, z_back]), np.array([x1, y_top, z_front])


def procedural_volume(resolution: int = 32, seed: int = 0, brick: int = 8) -> VolumeBricks:
    """A translucent torus-like blob; the cube's corners stay empty."""
    rng = np.random.default_rng(seed)
    v = resolution
    g = (np.arange(v) + 0.5) / v * 2 - 1
    z, y, x = np.meshgrid(g, -g, g, indexing="ij")
    ring = np.hypot(np.hypot(x, y) - 0.5, z)
    density = np.clip(1.0 - ring / 0.35, 0.0, 1.0)
    density *= 0.85 + 0.15 * rng.random(density.shape)
    alpha = np.round(density * 90).astype(np.uint32)
    rgb = np.stack(
        [128 + 127 * np.cos(3 * x), 128 + 127 * np.sin(2 * y + 1), 128 + 127 * np.cos(2 * z + 2)], axis=-1
    )
    rgb = np.clip(np.round(rgb), 0, 255).astype(np.uint32)
    pre = (rgb * alpha[..., None] + 127) // 255
    vox = np.concatenate([pre, alpha[..., None]], axis=-1).astype(np.uint8)
    # mirror index order: [z, y, x] with z = 0 the front (largest world z)
    vox = vox[::-1].copy()
    return VolumeBricks(vox, SCENE_CENTER, 2.0, brick)
