"""Viewports, data ranges, decomposition kernels and frustum math.

Conventions used throughout the package:

* Pixel coordinates grow right (x) and *down* (y), matching row-major image
  arrays. Fractional viewports use the same orientation.
* Eye-local frames are right-handed with the eye looking down -z.
* A wall's normal is ``(BR - BL) x (TL - BL)`` and must face the eye.
* Angles are radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "GeometryError",
    "FrustumError",
    "Viewport",
    "PixelViewport",
    "Range",
    "PixelKernel",
    "SubpixelKernel",
    "Eye",
    "Wall",
    "Projection",
    "FrustumPlanes",
    "Observer",
    "FocusMode",
    "round_edge",
    "viewport_of",
    "narrow_frustum",
    "wall_to_planes",
    "projection_to_wall",
    "projection_to_planes",
    "scale_wall",
    "eye_world_position",
    "apply_dynamic_focus",
    "hpr_matrix",
]


class GeometryError(ValueError):
    """Invalid geometric input (degenerate wall, bad kernel, ...)."""


class FrustumError(GeometryError):
    """The frustum would be degenerate, e.g. the eye lies in the wall plane."""


def round_edge(value: float) -> int:
    """Round half down. 511.5 -> 511, 299.99999999999994 -> 300."""
    return math.ceil(value - 0.5)


@dataclass(frozen=True)
class Viewport:
    """Fractional sub-rectangle of a parent viewport."""

    x: float = 0.0
    y: float = 0.0
    w: float = 1.0
    h: float = 1.0

    def __post_init__(self):
        eps = 1e-12
        if self.w <= 0 or self.h <= 0:
            raise GeometryError(f"viewport extent must be positive: {self}")
        if self.x < -eps or self.y < -eps:
            raise GeometryError(f"viewport origin must be >= 0: {self}")
        if self.x + self.w > 1 + eps or self.y + self.h > 1 + eps:
            raise GeometryError(f"viewport exceeds [0,1]: {self}")

    @property
    def is_full(self) -> bool:
        return (self.x, self.y, self.w, self.h) == (0.0, 0.0, 1.0, 1.0)

    def compose(self, child: "Viewport") -> "Viewport":
        """The child viewport expressed in this viewport's parent frame."""
        return Viewport(
            self.x + child.x * self.w,
            self.y + child.y * self.h,
            child.w * self.w,
            child.h * self.h,
        )

    def intersect(self, other: "Viewport") -> "Viewport | None":
        x0 = max(self.x, other.x)
        y0 = max(self.y, other.y)
        x1 = min(self.x + self.w, other.x + other.w)
        y1 = min(self.y + self.h, other.y + other.h)
        if x1 - x0 <= 1e-12 or y1 - y0 <= 1e-12:
            return None
        return Viewport(x0, y0, x1 - x0, y1 - y0)

    def relative_to(self, outer: "Viewport") -> "Viewport":
        """Express this viewport as a fraction of ``outer``."""
        return Viewport(
            (self.x - outer.x) / outer.w,
            (self.y - outer.y) / outer.h,
            min(self.w / outer.w, 1.0),
            min(self.h / outer.h, 1.0),
        )


@dataclass(frozen=True)
class PixelViewport:
    x: int = 0
    y: int = 0
    w: int = 0
    h: int = 0

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise GeometryError(f"pixel viewport extent must be >= 0: {self}")

    @property
    def empty(self) -> bool:
        return self.w == 0 or self.h == 0

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def x1(self) -> int:
        return self.x + self.w

    @property
    def y1(self) -> int:
        return self.y + self.h

    def intersect(self, other: "PixelViewport") -> "PixelViewport":
        x0, y0 = max(self.x, other.x), max(self.y, other.y)
        x1, y1 = min(self.x1, other.x1), min(self.y1, other.y1)
        if x1 <= x0 or y1 <= y0:
            return PixelViewport(x0, y0, 0, 0)
        return PixelViewport(x0, y0, x1 - x0, y1 - y0)

    def union(self, other: "PixelViewport") -> "PixelViewport":
        if self.empty:
            return other
        if other.empty:
            return self
        x0, y0 = min(self.x, other.x), min(self.y, other.y)
        x1, y1 = max(self.x1, other.x1), max(self.y1, other.y1)
        return PixelViewport(x0, y0, x1 - x0, y1 - y0)

    def contains(self, other: "PixelViewport") -> bool:
        if other.empty:
            return True
        return (
            other.x >= self.x
            and other.y >= self.y
            and other.x1 <= self.x1
            and other.y1 <= self.y1
        )

    def slices(self, origin: "PixelViewport") -> tuple[slice, slice]:
        """Array slices (rows, cols) of this rectangle inside an array at ``origin``."""
        return (
            slice(self.y - origin.y, self.y1 - origin.y),
            slice(self.x - origin.x, self.x1 - origin.x),
        )


@dataclass(frozen=True)
class Range:
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.lo <= self.hi <= 1.0):
            raise GeometryError(f"range must satisfy 0 <= lo <= hi <= 1: {self}")

    @property
    def is_full(self) -> bool:
        return self.lo == 0.0 and self.hi == 1.0

    @property
    def size(self) -> float:
        return self.hi - self.lo

    def compose(self, child: "Range") -> "Range":
        span = self.hi - self.lo
        return Range(self.lo + span * child.lo, min(self.lo + span * child.hi, 1.0))

    def index_span(self, n: int) -> tuple[int, int]:
        """Item indices ``[floor(lo*n), floor(hi*n))`` selected out of ``n``."""
        return math.floor(self.lo * n), math.floor(self.hi * n)


@dataclass(frozen=True)
class PixelKernel:
    """Pixel ownership: a source owns (x, y) with x % w == dx and y % h == dy."""

    w: int = 1
    h: int = 1
    dx: int = 0
    dy: int = 0

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise GeometryError(f"pixel kernel size must be >= 1: {self}")
        if not (0 <= self.dx < self.w and 0 <= self.dy < self.h):
            raise GeometryError(f"pixel kernel offset out of range: {self}")

    @property
    def is_identity(self) -> bool:
        return self.w == 1 and self.h == 1

    def compose(self, child: "PixelKernel") -> "PixelKernel":
        return PixelKernel(
            self.w * child.w,
            self.h * child.h,
            self.dx + self.w * child.dx,
            self.dy + self.h * child.dy,
        )


@dataclass(frozen=True)
class SubpixelKernel:
    size: int = 1
    index: int = 0

    def __post_init__(self):
        if self.size < 1 or not (0 <= self.index < self.size):
            raise GeometryError(f"invalid subpixel kernel: {self}")

    @property
    def is_identity(self) -> bool:
        return self.size == 1

    def compose(self, child: "SubpixelKernel") -> "SubpixelKernel":
        return SubpixelKernel(self.size * child.size, self.index + self.size * child.index)


class Eye(Enum):
    CYCLOP = "cyclop"
    LEFT = "left"
    RIGHT = "right"


def _vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(3)
    return a


@dataclass(frozen=True)
class Wall:
    bottom_left: tuple[float, float, float]
    bottom_right: tuple[float, float, float]
    top_left: tuple[float, float, float]

    def __post_init__(self):
        for name in ("bottom_left", "bottom_right", "top_left"):
            object.__setattr__(self, name, tuple(float(c) for c in getattr(self, name)))
        u = _vec3(self.bottom_right) - _vec3(self.bottom_left)
        v = _vec3(self.top_left) - _vec3(self.bottom_left)
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        if nu == 0 or nv == 0:
            raise GeometryError("degenerate wall: zero-length edge")
        if abs(float(np.dot(u, v))) > 1e-6 * nu * nv:
            raise GeometryError("degenerate wall: edges are not orthogonal")

    @property
    def top_right(self) -> tuple[float, float, float]:
        tr = _vec3(self.bottom_right) + _vec3(self.top_left) - _vec3(self.bottom_left)
        return tuple(float(c) for c in tr)

    @property
    def width(self) -> float:
        return float(np.linalg.norm(_vec3(self.bottom_right) - _vec3(self.bottom_left)))

    @property
    def height(self) -> float:
        return float(np.linalg.norm(_vec3(self.top_left) - _vec3(self.bottom_left)))

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Unit right, up and normal vectors."""
        bl = _vec3(self.bottom_left)
        u = _vec3(self.bottom_right) - bl
        v = _vec3(self.top_left) - bl
        n = np.cross(u, v)
        return u / np.linalg.norm(u), v / np.linalg.norm(v), n / np.linalg.norm(n)

    def sub_wall(self, vp: Viewport) -> "Wall":
        """The part of the wall covered by ``vp`` (vp.y measured from the top)."""
        bl = _vec3(self.bottom_left)
        u = _vec3(self.bottom_right) - bl
        v = _vec3(self.top_left) - bl
        y_bottom = 1.0 - (vp.y + vp.h)
        nbl = bl + u * vp.x + v * y_bottom
        return Wall(
            tuple(nbl),
            tuple(nbl + u * vp.w),
            tuple(nbl + v * vp.h),
        )

    def scaled(self, factor: float) -> "Wall":
        return Wall(
            tuple(_vec3(self.bottom_left) * factor),
            tuple(_vec3(self.bottom_right) * factor),
            tuple(_vec3(self.top_left) * factor),
        )


@dataclass(frozen=True)
class Projection:
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    hpr: tuple[float, float, float] = (0.0, 0.0, 0.0)
    fov: tuple[float, float] = (math.radians(45.0), math.radians(45.0))
    distance: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))
        object.__setattr__(self, "hpr", tuple(float(c) for c in self.hpr))
        object.__setattr__(self, "fov", tuple(float(c) for c in self.fov))
        if not all(0.0 < f < math.pi / 2 for f in self.fov):
            raise GeometryError(f"fov half-angles must lie in (0, pi/2): {self.fov}")
        if self.distance <= 0:
            raise GeometryError("projection distance must be positive")


@dataclass(frozen=True)
class FrustumPlanes:
    left: float
    right: float
    bottom: float
    top: float
    near: float
    far: float

    def __post_init__(self):
        if not (self.left < self.right and self.bottom < self.top):
            raise FrustumError(f"degenerate frustum: {self}")
        if not (0 < self.near < self.far):
            raise FrustumError(f"near/far must satisfy 0 < near < far: {self}")

    def as_tuple(self) -> tuple[float, ...]:
        return (self.left, self.right, self.bottom, self.top, self.near, self.far)

    def projection_matrix(self) -> np.ndarray:
        """The glFrustum matrix."""
        l, r, b, t, n, f = self.as_tuple()
        return np.array(
            [
                [2 * n / (r - l), 0, (r + l) / (r - l), 0],
                [0, 2 * n / (t - b), (t + b) / (t - b), 0],
                [0, 0, -(f + n) / (f - n), -2 * f * n / (f - n)],
                [0, 0, -1, 0],
            ]
        )


class FocusMode(Enum):
    FIXED = "fixed"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class Observer:
    name: str = "observer"
    head_matrix: tuple[tuple[float, ...], ...] = tuple(
        tuple(float(i == j) for j in range(4)) for i in range(4)
    )
    eye_left: tuple[float, float, float] = (-0.032, 0.0, 0.0)
    eye_right: tuple[float, float, float] = (0.032, 0.0, 0.0)
    eye_cyclop: tuple[float, float, float] = (0.0, 0.0, 0.0)
    focus_distance: float = 1.0
    focus_mode: FocusMode = FocusMode.FIXED

    def __post_init__(self):
        m = np.asarray(self.head_matrix, dtype=float)
        if m.shape != (4, 4):
            raise GeometryError("head matrix must be 4x4")
        object.__setattr__(self, "head_matrix", tuple(tuple(float(c) for c in row) for row in m))
        rot = m[:3, :3]
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-6) or abs(np.linalg.det(rot) - 1) > 1e-6:
            raise GeometryError("head matrix must be a rigid transform")
        if not np.allclose(m[3], [0, 0, 0, 1], atol=1e-12):
            raise GeometryError("head matrix must be affine")
        for name in ("eye_left", "eye_right", "eye_cyclop"):
            object.__setattr__(self, name, tuple(float(c) for c in getattr(self, name)))

    def eye_offset(self, eye: Eye) -> tuple[float, float, float]:
        return {Eye.LEFT: self.eye_left, Eye.RIGHT: self.eye_right, Eye.CYCLOP: self.eye_cyclop}[eye]


def viewport_of(pvp: PixelViewport, vp: Viewport) -> PixelViewport:
    """Map a fractional viewport onto pixels by rounding edges, not extents.

    Siblings sharing an edge fraction land on the same pixel edge, so any
    tiling of [0,1]^2 tiles the parent exactly.
    """
    x0 = pvp.x + round_edge(vp.x * pvp.w)
    x1 = pvp.x + round_edge((vp.x + vp.w) * pvp.w)
    y0 = pvp.y + round_edge(vp.y * pvp.h)
    y1 = pvp.y + round_edge((vp.y + vp.h) * pvp.h)
    return PixelViewport(x0, y0, max(x1 - x0, 0), max(y1 - y0, 0))


def narrow_frustum(
    planes: FrustumPlanes, parent: PixelViewport, child: PixelViewport
) -> FrustumPlanes:
    """Sub-frustum covering the pixel rectangle ``child`` of ``parent``.

    Uses pixel edges so frustum and pixel viewport always agree. Rows grow
    downward, so the top plane maps to ``parent.y``.
    """
    sx = (planes.right - planes.left) / parent.w
    sy = (planes.top - planes.bottom) / parent.h
    left = planes.left + sx * (child.x - parent.x)
    right = planes.left + sx * (child.x1 - parent.x)
    top = planes.top - sy * (child.y - parent.y)
    bottom = planes.top - sy * (child.y1 - parent.y)
    return FrustumPlanes(left, right, bottom, top, planes.near, planes.far)


def wall_to_planes(
    wall: Wall, eye_world, near: float, far: float
) -> tuple[FrustumPlanes, np.ndarray]:
    """Off-axis frustum from ``eye_world`` through the wall rectangle.

    Returns the glFrustum planes and the 4x4 world-to-eye head transform.
    """
    if not (0 < near < far):
        raise FrustumError("near/far must satisfy 0 < near < far")
    eye = _vec3(eye_world)
    u, v, n = wall.basis()
    bl = _vec3(wall.bottom_left)
    dist = float(np.dot(eye - bl, n))
    if dist <= 1e-12 * max(1.0, wall.width, wall.height):
        raise FrustumError("eye lies in or behind the wall plane")
    scale = near / dist
    left = float(np.dot(bl - eye, u))
    bottom = float(np.dot(bl - eye, v))
    planes = FrustumPlanes(
        left * scale,
        (left + wall.width) * scale,
        bottom * scale,
        (bottom + wall.height) * scale,
        near,
        far,
    )
    head = np.eye(4)
    rot = np.stack([u, v, n])
    head[:3, :3] = rot
    head[:3, 3] = -rot @ eye
    return planes, head


def hpr_matrix(hpr) -> np.ndarray:
    """Rotation for head (about y), pitch (about x), roll (about z), applied R_y R_x R_z."""
    h, p, r = hpr
    ch, sh = math.cos(h), math.sin(h)
    cp, sp = math.cos(p), math.sin(p)
    cr, sr = math.cos(r), math.sin(r)
    ry = np.array([[ch, 0, sh], [0, 1, 0], [-sh, 0, ch]])
    rx = np.array([[1, 0, 0], [0, cp, -sp], [0, sp, cp]])
    rz = np.array([[cr, -sr, 0], [sr, cr, 0], [0, 0, 1]])
    return ry @ rx @ rz


def projection_to_wall(p: Projection) -> Wall:
    """The wall rectangle a projector paints at its configured distance."""
    hw = math.tan(p.fov[0]) * p.distance
    hh = math.tan(p.fov[1]) * p.distance
    rot = hpr_matrix(p.hpr)
    origin = _vec3(p.origin)
    local = np.array(
        [[-hw, -hh, -p.distance], [hw, -hh, -p.distance], [-hw, hh, -p.distance]]
    )
    bl, br, tl = (origin + rot @ c for c in local)
    return Wall(tuple(bl), tuple(br), tuple(tl))


def projection_to_planes(p: Projection, eye_world, near: float, far: float):
    return wall_to_planes(projection_to_wall(p), eye_world, near, far)


def scale_wall(wall: Wall, model_unit: float) -> Wall:
    """Apply the model unit to a projection surface."""
    if model_unit <= 0:
        raise GeometryError("model unit must be positive")
    return wall.scaled(model_unit)


def eye_world_position(obs: Observer, eye: Eye, model_unit: float = 1.0) -> np.ndarray:
    """World position of an eye: the head matrix applied to the metric eye offset.

    The model unit is deliberately *not* applied here; callers scale the
    projection surface with :func:`scale_wall` instead. Scaling the wall by
    ``s`` and keeping the eye metric yields the same frustum as keeping the
    wall and dividing the eye position by ``s``.
    """
    if model_unit <= 0:
        raise GeometryError("model unit must be positive")
    head = np.asarray(obs.head_matrix, dtype=float)
    offset = np.append(_vec3(obs.eye_offset(eye)), 1.0)
    return (head @ offset)[:3]


def apply_dynamic_focus(
    planes: FrustumPlanes,
    wall_distance: float,
    focus_distance: float,
    eye_offset=(0.0, 0.0, 0.0),
) -> FrustumPlanes:
    """Move the zero-parallax plane from the wall to ``focus_distance``.

    ``planes`` is the frustum of one eye through the wall. ``eye_offset`` is
    that eye's displacement from the cyclop eye in wall coordinates (x right,
    y up, z along the wall normal towards the viewer); ``wall_distance`` is
    the cyclop eye's distance to the wall along the normal. The wall is
    virtually rescaled about the cyclop eye to sit at ``focus_distance``.
    """
    if focus_distance <= 0:
        raise GeometryError("focus distance must be positive")
    if focus_distance == wall_distance:
        return planes
    ex, ey, ez = (float(c) for c in eye_offset)
    near = planes.near
    d_eye = wall_distance + ez
    f_eye = focus_distance + ez
    if d_eye <= 0 or f_eye <= 0:
        raise FrustumError("eye lies behind the focal plane")
    ratio = focus_distance / wall_distance

    def refocus(edge: float, offset: float) -> float:
        on_wall = edge * d_eye / near + offset  # relative to the cyclop foot point
        return (on_wall * ratio - offset) * near / f_eye

    return FrustumPlanes(
        refocus(planes.left, ex),
        refocus(planes.right, ex),
        refocus(planes.bottom, ey),
        refocus(planes.top, ey),
        planes.near,
        planes.far,
    )
