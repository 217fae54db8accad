"""Ear-clipping triangulation for polygons with holes.

Exterior rings are CCW, holes CW (as produced by ingest). Holes are bridged
into the exterior earcut-style before clipping. Output triangles are CCW.
"""

from __future__ import annotations

import numpy as np


class EarClipError(ValueError):
    """Polygon could not be triangulated (self-intersecting or degenerate)."""


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _point_in_tri(p, a, b, c) -> bool:
    """Inclusive test: points on the boundary count as inside (they block ears
    unless they coincide exactly with a corner, which callers exclude)."""
    d1 = _cross(a, b, p)
    d2 = _cross(b, c, p)
    d3 = _cross(c, a, p)
    return (d1 >= 0 and d2 >= 0 and d3 >= 0) or (d1 <= 0 and d2 <= 0 and d3 <= 0)


def _ring_area(ring: np.ndarray) -> float:
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _bridge_hole(outer: list, hole: list) -> list:
    """Splice one hole into the outer ring via a mutually visible vertex pair."""
    # hole vertex to connect: leftmost (ties by y)
    m = min(range(len(hole)), key=lambda i: (hole[i][0], hole[i][1]))
    hx, hy = hole[m][0], hole[m][1]

    # cast a ray toward -x, find the closest outer edge crossing it
    qx = -np.inf
    best = None
    n = len(outer)
    for i in range(n):
        p, pn = outer[i], outer[(i + 1) % n]
        if (p[1] >= hy >= pn[1] or pn[1] >= hy >= p[1]) and p[1] != pn[1]:
            x = p[0] + (hy - p[1]) * (pn[0] - p[0]) / (pn[1] - p[1])
            if x <= hx and x > qx:
                qx = x
                best = i if p[0] < pn[0] else (i + 1) % n
                if x == hx:
                    break
    if best is None:
        raise EarClipError("hole is not inside the exterior ring")

    # prefer a reflex outer vertex inside the candidate triangle (closest by
    # tangent angle) so the bridge does not cross other edges
    bx, by = outer[best][0], outer[best][1]
    if hx != qx or (bx, by) != (hx, hy):
        tri_a = (hx if hy < by else qx, hy)
        tri_c = (qx if hy < by else hx, hy)
        min_tan = np.inf
        for i in range(n):
            px, py = outer[i][0], outer[i][1]
            if qx <= px <= hx and (px, py) not in ((hx, hy), (bx, by)):
                if _point_in_tri((px, py), tri_a, (bx, by), tri_c):
                    prev = outer[(i - 1) % n]
                    nxt = outer[(i + 1) % n]
                    reflex = _cross(prev, outer[i], nxt) < 0
                    tan = abs(hy - py) / (hx - px) if hx != px else np.inf
                    if reflex and tan < min_tan:
                        min_tan = tan
                        best = i

    # splice: outer[..best], hole[m..m] (full loop), back to outer[best..]
    rotated = [hole[(m + i) % len(hole)] for i in range(len(hole))]
    return outer[: best + 1] + rotated + [hole[m], outer[best]] + outer[best + 1:]


def triangulate(exterior: np.ndarray, holes=()) -> tuple[np.ndarray, np.ndarray]:
    """Triangulate a CCW polygon with CW holes.

    Returns (vertices (n, 2), triangles (m, 3) int indices). Vertices may
    contain duplicates where holes were bridged.
    """
    outer = [(float(x), float(y), i) for i, (x, y) in enumerate(exterior)]
    verts = [tuple(v) for v in exterior]
    for hole in holes:
        base = len(verts)
        hole_list = [(float(x), float(y), base + i) for i, (x, y) in enumerate(hole)]
        verts.extend(tuple(v) for v in hole)
        outer = _bridge_hole(outer, hole_list)
    vert_array = np.array([(v[0], v[1]) for v in outer], dtype=np.float64)

    target_area = abs(_ring_area(np.asarray(exterior, dtype=np.float64))) - sum(
        abs(_ring_area(np.asarray(h, dtype=np.float64))) for h in holes
    )
    scale = max(1.0, float(np.abs(vert_array).max()))
    area_eps = 1e-12 * scale * scale

    idx = list(range(len(outer)))
    tris: list[tuple[int, int, int]] = []

    def is_ear(a: int, b: int, c: int) -> bool:
        pa, pb, pc = outer[a][:2], outer[b][:2], outer[c][:2]
        if _cross(pa, pb, pc) <= area_eps:
            return False
        for j in idx:
            p = outer[j][:2]
            if p in (pa, pb, pc):
                continue
            if _point_in_tri(p, pa, pb, pc):
                return False
        return True

    guard = 0
    while len(idx) > 3:
        n = len(idx)
        clipped = False
        for k in range(n):
            a, b, c = idx[(k - 1) % n], idx[k], idx[(k + 1) % n]
            if is_ear(a, b, c):
                tris.append((a, b, c))
                idx.pop(k)
                clipped = True
                break
        if not clipped:
            # drop a collinear (zero-area) vertex, e.g. along a bridge cut
            dropped = False
            for k in range(n):
                a, b, c = idx[(k - 1) % n], idx[k], idx[(k + 1) % n]
                if abs(_cross(outer[a][:2], outer[b][:2], outer[c][:2])) <= area_eps:
                    idx.pop(k)
                    dropped = True
                    break
            if not dropped:
                raise EarClipError("no ear found; polygon is likely self-intersecting")
        guard += 1
        if guard > 10 * len(outer) + 100:
            raise EarClipError("ear clipping did not terminate")
    if len(idx) == 3:
        a, b, c = idx
        if _cross(outer[a][:2], outer[b][:2], outer[c][:2]) > area_eps:
            tris.append((a, b, c))

    tri_array = np.array(tris, dtype=np.int64).reshape(-1, 3)
    got_area = 0.0
    for a, b, c in tris:
        got_area += 0.5 * _cross(outer[a][:2], outer[b][:2], outer[c][:2])
    if target_area <= 0:
        raise EarClipError(f"polygon has non-positive area {target_area}")
    if abs(got_area - target_area) > 1e-6 * target_area:
        raise EarClipError(
            f"triangulated area {got_area} != polygon area {target_area}"
        )
    return vert_array, tri_array
