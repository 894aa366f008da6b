"""Test-side oracles, implemented independently of the library's math.

Containment here uses plain coordinate comparisons (no slab clipping, no
quadratic roots, no signed-distance formulas), and first-hit distances come
from uniform marching plus bisection on the occupancy function.  These are
the reference answers the analytic ray caster is checked against.
"""

import numpy as np

from cnav.geometry import Box, Cylinder, Prism, Sphere


def inside_points(shape, pts: np.ndarray) -> np.ndarray:
    """Boolean containment for points [N,3]."""
    p = np.asarray(pts, dtype=float)
    if isinstance(shape, Sphere):
        c = np.asarray(shape.center)
        return ((p - c) ** 2).sum(axis=-1) <= shape.radius**2
    if isinstance(shape, Box):
        c = np.asarray(shape.center)
        h = np.asarray(shape.half)
        return (np.abs(p - c) <= h).all(axis=-1)
    if isinstance(shape, Cylinder):
        cx, cy, z0 = shape.base
        ok_z = (p[:, 2] >= z0) & (p[:, 2] <= z0 + shape.height)
        r2 = (p[:, 0] - cx) ** 2 + (p[:, 1] - cy) ** 2
        return ok_z & (r2 <= shape.radius**2)
    if isinstance(shape, Prism):
        v = np.asarray(shape.verts)
        ok_z = (p[:, 2] >= shape.z0) & (p[:, 2] <= shape.z0 + shape.height)
        signs = []
        for i in range(3):
            a = v[i]
            e = v[(i + 1) % 3] - a
            signs.append(e[0] * (p[:, 1] - a[1]) - e[1] * (p[:, 0] - a[0]))
        s0, s1, s2 = signs
        in_tri = ((s0 >= 0) & (s1 >= 0) & (s2 >= 0)) | ((s0 <= 0) & (s1 <= 0) & (s2 <= 0))
        return ok_z & in_tri
    raise TypeError(type(shape).__name__)


def scene_occupancy(shapes, bounds=None):
    """Solid-matter predicate for a scene; bounds walls count as solid."""

    def occ(pts):
        p = np.asarray(pts, dtype=float)
        solid = np.zeros(p.shape[0], dtype=bool)
        for sh in shapes:
            solid |= inside_points(sh, p)
        if bounds is not None:
            lo, hi = np.asarray(bounds[0]), np.asarray(bounds[1])
            solid |= ~((p >= lo) & (p <= hi)).all(axis=-1)
        return solid

    return occ


def march_hits(occ, origins, dirs, t_max: float, step: float = 5e-4,
               refine_iters: int = 30, chunk: int = 32) -> np.ndarray:
    """First occupancy crossing along each ray; np.inf where none.

    Accuracy after bisection is step / 2**refine_iters.  Origins must lie
    in free space.
    """
    o = np.atleast_2d(np.asarray(origins, dtype=float))
    d = np.atleast_2d(np.asarray(dirs, dtype=float))
    if o.shape[0] == 1 and d.shape[0] > 1:
        o = np.broadcast_to(o, d.shape).copy()
    n = d.shape[0]
    ts = np.arange(0.0, t_max + step, step)
    out = np.full(n, np.inf)
    for s in range(0, n, chunk):
        oo = o[s : s + chunk]
        dd = d[s : s + chunk]
        m = oo.shape[0]
        pts = oo[:, None, :] + ts[None, :, None] * dd[:, None, :]
        solid = occ(pts.reshape(-1, 3)).reshape(m, ts.size)
        if solid[:, 0].any():
            raise ValueError("ray origin starts inside solid matter")
        first = np.argmax(solid, axis=1)  # 0 when no hit
        hit = solid.any(axis=1)
        lo = ts[np.maximum(first - 1, 0)]
        hi = ts[first]
        for _ in range(refine_iters):
            mid = 0.5 * (lo + hi)
            mid_solid = occ(oo + mid[:, None] * dd)
            hi = np.where(mid_solid, mid, hi)
            lo = np.where(mid_solid, lo, mid)
        out[s : s + chunk] = np.where(hit, 0.5 * (lo + hi), np.inf)
    return out
