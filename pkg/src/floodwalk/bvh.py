"""BVH-accelerated ray casting against a CityMesh.

The tree is built once in Python (median split on the longest centroid axis)
and flattened to arrays; traversal runs in a numba kernel so that whole
equirectangular frames can be cast per alignment loss evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

# keep IEEE inf/nan semantics (the miss logic relies on them)
_FM = {'contract', 'reassoc', 'nsz', 'arcp'}

from .citymodel import CityMesh

T_EPS = 1e-4  # self-hit epsilon, meters along the ray
LEAF_SIZE = 4


class RaycastError(ValueError):
    pass


@dataclass(frozen=True)
class RayHit:
    t: float
    label: int
    triangle: int  # index into the source mesh
    building: str | None


@dataclass(frozen=True)
class RayAccel:
    mesh: CityMesh
    node_min: np.ndarray
    node_max: np.ndarray
    node_left: np.ndarray  # child index, -1 for leaves
    node_right: np.ndarray
    node_start: np.ndarray  # leaf range into the reordered triangle arrays
    node_count: np.ndarray
    v0: np.ndarray  # (m, 3) reordered triangle origin vertex
    e1: np.ndarray
    e2: np.ndarray
    tri_id: np.ndarray  # reordered -> original triangle index


def build_accel(mesh: CityMesh) -> RayAccel:
    if mesh.num_triangles == 0:
        raise RaycastError("cannot build acceleration structure for an empty mesh")
    tri = mesh.triangles
    a = mesh.vertices[tri[:, 0]]
    b = mesh.vertices[tri[:, 1]]
    c = mesh.vertices[tri[:, 2]]
    tmin = np.minimum(np.minimum(a, b), c)
    tmax = np.maximum(np.maximum(a, b), c)
    centroid = (a + b + c) / 3.0

    node_min: list = []
    node_max: list = []
    node_left: list = []
    node_right: list = []
    node_start: list = []
    node_count: list = []
    order: list = []

    def build(idx: np.ndarray) -> int:
        ni = len(node_min)
        node_min.append(tmin[idx].min(axis=0))
        node_max.append(tmax[idx].max(axis=0))
        node_left.append(-1)
        node_right.append(-1)
        node_start.append(0)
        node_count.append(0)
        if len(idx) <= LEAF_SIZE:
            node_start[ni] = len(order)
            node_count[ni] = len(idx)
            order.extend(idx.tolist())
            return ni
        cen = centroid[idx]
        axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
        part = np.argsort(cen[:, axis], kind="stable")
        half = len(idx) // 2
        node_left[ni] = build(idx[part[:half]])
        node_right[ni] = build(idx[part[half:]])
        return ni

    import sys

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 10000))
    try:
        build(np.arange(mesh.num_triangles))
    finally:
        sys.setrecursionlimit(old_limit)

    order_arr = np.array(order, dtype=np.int64)
    return RayAccel(
        mesh=mesh,
        node_min=np.array(node_min),
        node_max=np.array(node_max),
        node_left=np.array(node_left, dtype=np.int64),
        node_right=np.array(node_right, dtype=np.int64),
        node_start=np.array(node_start, dtype=np.int64),
        node_count=np.array(node_count, dtype=np.int64),
        v0=np.ascontiguousarray(a[order_arr]),
        e1=np.ascontiguousarray(b[order_arr] - a[order_arr]),
        e2=np.ascontiguousarray(c[order_arr] - a[order_arr]),
        tri_id=order_arr,
    )


@njit(cache=True, fastmath=_FM)
def _tri_hit(ox, oy, oz, dx, dy, dz, v0, e1, e2, k):
    """Moller-Trumbore; returns t or inf."""
    e1x, e1y, e1z = e1[k, 0], e1[k, 1], e1[k, 2]
    e2x, e2y, e2z = e2[k, 0], e2[k, 1], e2[k, 2]
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) < 1e-14:
        return np.inf
    inv = 1.0 / det
    tx = ox - v0[k, 0]
    ty = oy - v0[k, 1]
    tz = oz - v0[k, 2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < 0.0 or u > 1.0:
        return np.inf
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return np.inf
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t <= T_EPS:
        return np.inf
    return t


@njit(cache=True, fastmath=_FM)
def _box_enter(ox, oy, oz, dx, dy, dz, bmin, bmax, n, best_t):
    """Slab test; returns the box entry distance, or inf when the box cannot
    contain a closer hit than best_t."""
    tmin = T_EPS
    tmax = best_t
    for axis in range(3):
        if axis == 0:
            o, d = ox, dx
        elif axis == 1:
            o, d = oy, dy
        else:
            o, d = oz, dz
        lo = bmin[n, axis]
        hi = bmax[n, axis]
        if abs(d) < 1e-300:
            if o < lo or o > hi:
                return np.inf
        else:
            inv = 1.0 / d
            t1 = (lo - o) * inv
            t2 = (hi - o) * inv
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > tmin:
                tmin = t1
            if t2 < tmax:
                tmax = t2
            if tmin > tmax:
                return np.inf
    return tmin


@njit(cache=True, fastmath=_FM)
def _cast_one(
    ox, oy, oz, dx, dy, dz,
    node_min, node_max, node_left, node_right, node_start, node_count,
    v0, e1, e2, tri_id,
    stack, dist,
):
    best_t = np.inf
    best_tri = -1
    sp = 1
    stack[0] = 0
    dist[0] = 0.0
    while sp > 0:
        sp -= 1
        n = stack[sp]
        if dist[sp] >= best_t:
            continue
        if node_left[n] < 0:
            s = node_start[n]
            for k in range(s, s + node_count[n]):
                t = _tri_hit(ox, oy, oz, dx, dy, dz, v0, e1, e2, k)
                if t < best_t or (t == best_t and tri_id[k] < best_tri):
                    best_t = t
                    best_tri = tri_id[k]
        else:
            lc = node_left[n]
            rc = node_right[n]
            tl = _box_enter(ox, oy, oz, dx, dy, dz, node_min, node_max, lc, best_t)
            tr = _box_enter(ox, oy, oz, dx, dy, dz, node_min, node_max, rc, best_t)
            # push the nearer child last so it is popped first
            if tl < tr:
                if tr < np.inf:
                    stack[sp] = rc
                    dist[sp] = tr
                    sp += 1
                stack[sp] = lc
                dist[sp] = tl
                sp += 1
            else:
                if tl < np.inf:
                    stack[sp] = lc
                    dist[sp] = tl
                    sp += 1
                if tr < np.inf:
                    stack[sp] = rc
                    dist[sp] = tr
                    sp += 1
    return best_t, best_tri


@njit(parallel=True, cache=True, fastmath=_FM)
def _cast_many(
    origins, dirs,
    node_min, node_max, node_left, node_right, node_start, node_count,
    v0, e1, e2, tri_id,
    out_t, out_tri,
):
    n_rays = origins.shape[0]
    chunk = 1024
    n_chunks = (n_rays + chunk - 1) // chunk
    for c in prange(n_chunks):
        stack = np.empty(128, dtype=np.int64)
        dist = np.empty(128)
        for r in range(c * chunk, min(n_rays, (c + 1) * chunk)):
            t, k = _cast_one(
                origins[r, 0], origins[r, 1], origins[r, 2],
                dirs[r, 0], dirs[r, 1], dirs[r, 2],
                node_min, node_max, node_left, node_right, node_start, node_count,
                v0, e1, e2, tri_id,
                stack, dist,
            )
            out_t[r] = t
            out_tri[r] = k


def raycast_batch(accel: RayAccel, origins: np.ndarray, dirs: np.ndarray):
    """Cast many rays; returns (t, tri) with t = inf and tri = -1 on miss."""
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    out_t = np.empty(len(origins))
    out_tri = np.empty(len(origins), dtype=np.int64)
    _cast_many(
        origins, dirs,
        accel.node_min, accel.node_max, accel.node_left, accel.node_right,
        accel.node_start, accel.node_count,
        accel.v0, accel.e1, accel.e2, accel.tri_id,
        out_t, out_tri,
    )
    return out_t, out_tri


def raycast(accel: RayAccel, origin, direction) -> RayHit | None:
    """Nearest hit beyond the self-hit epsilon, or None."""
    direction = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise RaycastError("ray direction must be a unit vector")
    t, tri = raycast_batch(accel, np.asarray(origin, dtype=np.float64)[None, :], direction[None, :])
    if tri[0] < 0:
        return None
    k = int(tri[0])
    return RayHit(
        t=float(t[0]),
        label=int(accel.mesh.tri_label[k]),
        triangle=k,
        building=accel.mesh.tri_building[k],
    )


def brute_force_raycast(mesh: CityMesh, origin, direction):
    """Independent all-triangles nearest-hit scan (oracle for the BVH path).

    Vectorized over triangles with a separate intersection formulation
    (barycentric via cross products), no shared code with the kernel.
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    tri = mesh.triangles
    a = mesh.vertices[tri[:, 0]]
    b = mesh.vertices[tri[:, 1]]
    c = mesh.vertices[tri[:, 2]]
    e1 = b - a
    e2 = c - a
    n = np.cross(e1, e2)
    denom = n @ d
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.einsum("ij,ij->i", a - o, np.broadcast_to(n, a.shape)) / denom
        t = np.where(np.abs(denom) < 1e-14, np.inf, t)
    p = o + t[:, None] * d
    # barycentric inside test
    v0p = p - a
    d00 = np.einsum("ij,ij->i", e1, e1)
    d01 = np.einsum("ij,ij->i", e1, e2)
    d11 = np.einsum("ij,ij->i", e2, e2)
    d20 = np.einsum("ij,ij->i", v0p, e1)
    d21 = np.einsum("ij,ij->i", v0p, e2)
    denom2 = d00 * d11 - d01 * d01
    with np.errstate(divide="ignore", invalid="ignore"):
        v = (d11 * d20 - d01 * d21) / denom2
        w = (d00 * d21 - d01 * d20) / denom2
    ok = (t > T_EPS) & np.isfinite(t) & (v >= -1e-12) & (w >= -1e-12) & (v + w <= 1 + 1e-12)
    if not np.any(ok):
        return None
    ts = np.where(ok, t, np.inf)
    k = int(np.argmin(ts))  # argmin returns the lowest index on ties
    return RayHit(
        t=float(ts[k]),
        label=int(mesh.tri_label[k]),
        triangle=k,
        building=mesh.tri_building[k],
    )
