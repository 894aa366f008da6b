"""Analytic ray casting and point-to-surface distances.

Conventions: world frame is right-handed, +z up.  Rays are (origin,
unit direction); intersection routines are vectorized over a batch of rays
and return the smallest non-negative hit parameter per ray, ``np.inf`` on a
miss.  Boxes are axis-aligned; cylinders and prisms are extruded along +z
from a base height.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_DEGENERATE_TOL = 1e-9


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"sphere radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by center and positive half extents."""

    center: tuple
    half: tuple

    def __post_init__(self):
        if any(h <= 0 for h in self.half):
            raise ValueError(f"box half extents must be positive, got {self.half}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "half", tuple(float(h) for h in self.half))


@dataclass(frozen=True)
class Cylinder:
    """Vertical cylinder; ``base`` is the center of the bottom disk."""

    base: tuple
    radius: float
    height: float

    def __post_init__(self):
        if self.radius <= 0 or self.height <= 0:
            raise ValueError(
                f"cylinder radius/height must be positive, got {self.radius}, {self.height}"
            )
        object.__setattr__(self, "base", tuple(float(c) for c in self.base))


@dataclass(frozen=True)
class Prism:
    """Triangular prism: a 2-D base triangle extruded from z0 upward."""

    verts: tuple  # ((x0,y0), (x1,y1), (x2,y2))
    z0: float
    height: float

    def __post_init__(self):
        v = np.asarray(self.verts, dtype=float)
        if v.shape != (3, 2):
            raise ValueError(f"prism needs 3 base vertices, got array shape {v.shape}")
        area2 = abs(
            (v[1, 0] - v[0, 0]) * (v[2, 1] - v[0, 1])
            - (v[2, 0] - v[0, 0]) * (v[1, 1] - v[0, 1])
        )
        if area2 < _DEGENERATE_TOL:
            raise ValueError("prism base triangle is degenerate (area ~ 0)")
        if self.height <= 0:
            raise ValueError(f"prism height must be positive, got {self.height}")
        object.__setattr__(self, "verts", tuple((float(a), float(b)) for a, b in self.verts))


Shape = Sphere | Box | Cylinder | Prism


# ---------------------------------------------------------------------------
# ray intersection, vectorized over rays
# ---------------------------------------------------------------------------


def _hits_sphere(sh: Sphere, o: np.ndarray, d: np.ndarray) -> np.ndarray:
    oc = o - np.asarray(sh.center)
    b = np.einsum("ij,ij->i", oc, d)
    c = np.einsum("ij,ij->i", oc, oc) - sh.radius * sh.radius
    disc = b * b - c
    sq = np.sqrt(np.maximum(disc, 0.0))
    t0 = -b - sq
    t1 = -b + sq
    t = np.where(t0 >= 0.0, t0, t1)
    return np.where((disc >= 0.0) & (t >= 0.0), t, np.inf)


def _slab_times(o: np.ndarray, d: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = (lo - o) / d
        tb = (hi - o) / d
    # fmin/fmax drop the NaNs produced by on-boundary parallel rays
    tn = np.fmax.reduce(np.fmin(ta, tb), axis=-1)
    tf = np.fmin.reduce(np.fmax(ta, tb), axis=-1)
    return tn, tf


def _hits_box(sh: Box, o: np.ndarray, d: np.ndarray) -> np.ndarray:
    c = np.asarray(sh.center)
    h = np.asarray(sh.half)
    tn, tf = _slab_times(o, d, c - h, c + h)
    t = np.where(tn >= 0.0, tn, tf)
    return np.where((tn <= tf) & (tf >= 0.0) & (t >= 0.0), t, np.inf)


def ray_box_exit(o: np.ndarray, d: np.ndarray, lo, hi) -> np.ndarray:
    """Distance to the inside surface of box [lo, hi] (for rays within it)."""
    tn, tf = _slab_times(o, d, np.asarray(lo, float), np.asarray(hi, float))
    return np.where((tn <= tf) & (tf >= 0.0), tf, np.inf)


def _hits_cylinder(sh: Cylinder, o: np.ndarray, d: np.ndarray) -> np.ndarray:
    cx, cy, z0 = sh.base
    z1 = z0 + sh.height
    ox = o[:, 0] - cx
    oy = o[:, 1] - cy
    dx = d[:, 0]
    dy = d[:, 1]
    a = dx * dx + dy * dy
    b = ox * dx + oy * dy
    c = ox * ox + oy * oy - sh.radius * sh.radius
    best = np.full(o.shape[0], np.inf)

    radial = a > 1e-16
    disc = b * b - a * c
    sq = np.sqrt(np.maximum(disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = (-b - sq) / a
        t1 = (-b + sq) / a
    for t in (t0, t1):
        z = o[:, 2] + t * d[:, 2]
        ok = radial & (disc >= 0.0) & (t >= 0.0) & (z >= z0) & (z <= z1)
        best = np.where(ok & (t < best), t, best)

    dz = d[:, 2]
    axial = np.abs(dz) > 1e-16
    for zc in (z0, z1):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (zc - o[:, 2]) / dz
            px = o[:, 0] + t * d[:, 0] - cx
            py = o[:, 1] + t * d[:, 1] - cy
            ok = axial & (t >= 0.0) & (px * px + py * py <= sh.radius * sh.radius)
        best = np.where(ok & (t < best), t, best)
    return best


def _prism_planes(sh: Prism):
    """Five outward (normal, point) half-space bounds of the prism."""
    v = np.asarray(sh.verts, dtype=float)
    planes = []
    for i in range(3):
        a = v[i]
        b = v[(i + 1) % 3]
        third = v[(i + 2) % 3]
        e = b - a
        n2 = np.array([e[1], -e[0]])
        if np.dot(n2, third - a) > 0:  # make it point away from the interior
            n2 = -n2
        n2 /= np.hypot(n2[0], n2[1])
        planes.append((np.array([n2[0], n2[1], 0.0]), np.array([a[0], a[1], 0.0])))
    planes.append((np.array([0.0, 0.0, -1.0]), np.array([0.0, 0.0, sh.z0])))
    planes.append((np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, sh.z0 + sh.height])))
    return planes


def _hits_prism(sh: Prism, o: np.ndarray, d: np.ndarray) -> np.ndarray:
    n = o.shape[0]
    tn = np.full(n, -np.inf)
    tf = np.full(n, np.inf)
    alive = np.ones(n, dtype=bool)
    for normal, point in _prism_planes(sh):
        denom = d @ normal
        num = (point - o) @ normal
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num / denom
        entering = denom < 0.0
        exiting = denom > 0.0
        parallel = ~entering & ~exiting
        tn = np.where(entering, np.maximum(tn, t), tn)
        tf = np.where(exiting, np.minimum(tf, t), tf)
        alive &= ~(parallel & (num < 0.0))  # parallel and fully outside
    t = np.where(tn >= 0.0, tn, tf)
    ok = alive & (tn <= tf) & (tf >= 0.0) & (t >= 0.0)
    return np.where(ok, t, np.inf)


def ray_hits(shape: Shape, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Batch hit distances for one shape; ``np.inf`` marks misses."""
    o = np.atleast_2d(np.asarray(origins, dtype=float))
    d = np.atleast_2d(np.asarray(dirs, dtype=float))
    if o.shape[0] == 1 and d.shape[0] > 1:
        o = np.broadcast_to(o, d.shape)
    if isinstance(shape, Sphere):
        return _hits_sphere(shape, o, d)
    if isinstance(shape, Box):
        return _hits_box(shape, o, d)
    if isinstance(shape, Cylinder):
        return _hits_cylinder(shape, o, d)
    if isinstance(shape, Prism):
        return _hits_prism(shape, o, d)
    raise TypeError(f"unknown shape type {type(shape).__name__}")


def ray_intersect(origin, direction, shape: Shape):
    """Nearest non-negative hit of a single unit-direction ray, or None.

    Raises on a zero or non-unit direction so callers cannot silently query
    distances in a scaled parameterization.
    """
    d = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(d)
    if norm < 1e-12:
        raise ValueError("ray direction is the zero vector")
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"ray direction must be unit length, |d| = {norm:.6g}")
    t = ray_hits(shape, np.asarray(origin, dtype=float)[None], d[None])[0]
    return None if np.isinf(t) else float(t)


# ---------------------------------------------------------------------------
# point-to-surface distance (signed: negative means inside)
# ---------------------------------------------------------------------------


def _sd_sphere(sh: Sphere, p: np.ndarray) -> np.ndarray:
    return np.linalg.norm(p - np.asarray(sh.center), axis=-1) - sh.radius


def _sd_box(sh: Box, p: np.ndarray) -> np.ndarray:
    q = np.abs(p - np.asarray(sh.center)) - np.asarray(sh.half)
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
    inside = np.minimum(q.max(axis=-1), 0.0)
    return outside + inside


def _combine_slab(d_profile: np.ndarray, d_axial: np.ndarray) -> np.ndarray:
    outside = np.hypot(np.maximum(d_profile, 0.0), np.maximum(d_axial, 0.0))
    inside = np.minimum(np.maximum(d_profile, d_axial), 0.0)
    return outside + inside


def _sd_cylinder(sh: Cylinder, p: np.ndarray) -> np.ndarray:
    cx, cy, z0 = sh.base
    dr = np.hypot(p[..., 0] - cx, p[..., 1] - cy) - sh.radius
    dz = np.abs(p[..., 2] - (z0 + sh.height / 2.0)) - sh.height / 2.0
    return _combine_slab(dr, dz)


def _sd_triangle2d(v: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Signed distance from 2-D points ``q`` [N,2] to triangle ``v`` [3,2]."""
    d2min = np.full(q.shape[0], np.inf)
    crosses = []
    for i in range(3):
        a = v[i]
        b = v[(i + 1) % 3]
        e = b - a
        w = q - a
        tproj = np.clip((w @ e) / (e @ e), 0.0, 1.0)
        closest = w - tproj[:, None] * e
        d2min = np.minimum(d2min, np.einsum("ij,ij->i", closest, closest))
        crosses.append(e[0] * w[:, 1] - e[1] * w[:, 0])
    c0, c1, c2 = crosses
    inside = ((c0 >= 0) & (c1 >= 0) & (c2 >= 0)) | ((c0 <= 0) & (c1 <= 0) & (c2 <= 0))
    dist = np.sqrt(d2min)
    return np.where(inside, -dist, dist)


def _sd_prism(sh: Prism, p: np.ndarray) -> np.ndarray:
    v = np.asarray(sh.verts, dtype=float)
    dtri = _sd_triangle2d(v, p[..., :2].reshape(-1, 2))
    dz = np.abs(p[..., 2] - (sh.z0 + sh.height / 2.0)) - sh.height / 2.0
    return _combine_slab(dtri.reshape(dz.shape), dz)


def surface_distance(shape: Shape, points: np.ndarray) -> np.ndarray:
    """Signed distance from points [N,3] (or [3]) to the shape surface."""
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if isinstance(shape, Sphere):
        out = _sd_sphere(shape, p)
    elif isinstance(shape, Box):
        out = _sd_box(shape, p)
    elif isinstance(shape, Cylinder):
        out = _sd_cylinder(shape, p)
    elif isinstance(shape, Prism):
        out = _sd_prism(shape, p)
    else:
        raise TypeError(f"unknown shape type {type(shape).__name__}")
    return float(out[0]) if single else out


def bounding_sphere(shape: Shape):
    """(center, radius) of a conservative bounding sphere."""
    if isinstance(shape, Sphere):
        return np.asarray(shape.center), shape.radius
    if isinstance(shape, Box):
        return np.asarray(shape.center), float(np.linalg.norm(shape.half))
    if isinstance(shape, Cylinder):
        c = np.asarray(shape.base) + np.array([0.0, 0.0, shape.height / 2.0])
        return c, float(np.hypot(shape.radius, shape.height / 2.0))
    if isinstance(shape, Prism):
        v = np.asarray(shape.verts)
        c2 = v.mean(axis=0)
        r2 = float(np.linalg.norm(v - c2, axis=1).max())
        c = np.array([c2[0], c2[1], shape.z0 + shape.height / 2.0])
        return c, float(np.hypot(r2, shape.height / 2.0))
    raise TypeError(f"unknown shape type {type(shape).__name__}")
