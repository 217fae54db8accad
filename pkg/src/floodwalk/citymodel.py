"""Terrain and extruded-building mesh construction.

Terrain comes straight from the DEM grid (2 triangles per cell quad);
buildings are footprint prisms embedded 1 m below the lowest terrain contact
and extruded to a constant height above it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import LABEL_BUILDING, LABEL_GROUND
from .earclip import EarClipError, triangulate
from .ingest import DemGrid, FootprintSet

log = logging.getLogger(__name__)

EMBED_DEPTH = 1.0  # m below the lowest terrain contact
DEFAULT_HEIGHT = 20.0  # constant extrusion height above the terrain surface
INTERIOR_SAMPLE_PITCH = 1.0  # m grid for the min-elevation scan under a footprint


class CityModelError(ValueError):
    pass


@dataclass(frozen=True)
class CityMesh:
    vertices: np.ndarray  # (n, 3) float64
    triangles: np.ndarray  # (m, 3) int64
    tri_label: np.ndarray  # (m,) uint8: LABEL_GROUND or LABEL_BUILDING
    tri_building: tuple  # (m,) footprint id (str) or None per triangle

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def validate(self) -> None:
        if len(self.triangles) and self.triangles.max() >= len(self.vertices):
            raise CityModelError("triangle index out of range")
        if len(self.triangles) != len(self.tri_label) or len(self.triangles) != len(self.tri_building):
            raise CityModelError("per-triangle attribute length mismatch")
        a = self.vertices[self.triangles[:, 0]]
        b = self.vertices[self.triangles[:, 1]]
        c = self.vertices[self.triangles[:, 2]]
        areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
        if len(areas) and areas.min() <= 0.0:
            raise CityModelError("degenerate (zero-area) triangle")
        for lbl, bid in zip(self.tri_label, self.tri_building):
            if lbl == LABEL_BUILDING and bid is None:
                raise CityModelError("building triangle without footprint id")
            if lbl == LABEL_GROUND and bid is not None:
                raise CityModelError("ground triangle with footprint id")


def empty_mesh() -> CityMesh:
    return CityMesh(
        vertices=np.zeros((0, 3)),
        triangles=np.zeros((0, 3), dtype=np.int64),
        tri_label=np.zeros(0, dtype=np.uint8),
        tri_building=(),
    )


# ---------------------------------------------------------------------------
# Terrain


def terrain_elevation(dem: DemGrid, x, y):
    """Bilinear elevation at (x, y) from the 4 surrounding cell centers.

    Accepts scalars or same-shape arrays. Raises on out-of-bounds queries or
    nodata in the interpolation neighborhood.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    scalar = x.ndim == 0
    col = (x - dem.origin[0]) / dem.spacing
    row = (dem.origin[1] - y) / dem.spacing  # row 0 = northernmost
    eps = 1e-9
    if np.any(col < -eps) or np.any(col > dem.ncols - 1 + eps) or np.any(
        row < -eps
    ) or np.any(row > dem.nrows - 1 + eps):
        raise CityModelError("terrain query outside the DEM cell-center hull")
    col = np.clip(col, 0.0, dem.ncols - 1)
    row = np.clip(row, 0.0, dem.nrows - 1)
    c0 = np.minimum(np.floor(col).astype(np.int64), dem.ncols - 2)
    r0 = np.minimum(np.floor(row).astype(np.int64), dem.nrows - 2)
    fc = col - c0
    fr = row - r0
    z00 = dem.elevation[r0, c0]
    z01 = dem.elevation[r0, c0 + 1]
    z10 = dem.elevation[r0 + 1, c0]
    z11 = dem.elevation[r0 + 1, c0 + 1]
    if np.any(dem.is_nodata(np.stack([z00, z01, z10, z11]))):
        raise CityModelError("nodata cell in interpolation neighborhood")
    z = (
        z00 * (1 - fc) * (1 - fr)
        + z01 * fc * (1 - fr)
        + z10 * (1 - fc) * fr
        + z11 * fc * fr
    )
    return float(z) if scalar else z


def build_terrain(dem: DemGrid) -> CityMesh:
    """Ground mesh over cell centers; quads touching a nodata cell are omitted."""
    jj, ii = np.meshgrid(np.arange(dem.ncols), np.arange(dem.nrows))
    xs = dem.origin[0] + jj * dem.spacing
    ys = dem.origin[1] - ii * dem.spacing
    vertices = np.stack([xs, ys, dem.elevation], axis=-1).reshape(-1, 3)

    valid = ~dem.is_nodata(dem.elevation)
    tris = []
    for i in range(dem.nrows - 1):
        for j in range(dem.ncols - 1):
            if not (valid[i, j] and valid[i, j + 1] and valid[i + 1, j] and valid[i + 1, j + 1]):
                continue
            a = i * dem.ncols + j
            b = i * dem.ncols + j + 1
            c = (i + 1) * dem.ncols + j
            d = (i + 1) * dem.ncols + j + 1
            # fixed diagonal a-d, CCW from above
            tris.append((a, d, b))
            tris.append((a, c, d))
    triangles = np.array(tris, dtype=np.int64).reshape(-1, 3)
    return CityMesh(
        vertices=vertices,
        triangles=triangles,
        tri_label=np.full(len(triangles), LABEL_GROUND, dtype=np.uint8),
        tri_building=(None,) * len(triangles),
    )


# ---------------------------------------------------------------------------
# Footprint extrusion


def _points_in_ring(px: np.ndarray, py: np.ndarray, ring: np.ndarray) -> np.ndarray:
    """Even-odd rule point-in-polygon, vectorized over query points."""
    inside = np.zeros(px.shape, dtype=bool)
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        crosses = (y1 > py) != (y2 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < xint)
    return inside


def _footprint_base_elevation(fp, dem: DemGrid) -> float:
    """Min terrain elevation over ring vertices and an interior 1 m sample grid."""
    samples_x = [fp.exterior[:, 0]]
    samples_y = [fp.exterior[:, 1]]
    for h in fp.holes:
        samples_x.append(h[:, 0])
        samples_y.append(h[:, 1])

    xmin, ymin = fp.exterior.min(axis=0)
    xmax, ymax = fp.exterior.max(axis=0)
    gx = np.arange(xmin, xmax + INTERIOR_SAMPLE_PITCH, INTERIOR_SAMPLE_PITCH)
    gy = np.arange(ymin, ymax + INTERIOR_SAMPLE_PITCH, INTERIOR_SAMPLE_PITCH)
    if len(gx) and len(gy):
        mx, my = np.meshgrid(gx, gy)
        mx, my = mx.ravel(), my.ravel()
        keep = _points_in_ring(mx, my, fp.exterior)
        for h in fp.holes:
            keep &= ~_points_in_ring(mx, my, h)
        samples_x.append(mx[keep])
        samples_y.append(my[keep])

    px = np.concatenate(samples_x)
    py = np.concatenate(samples_y)
    z = terrain_elevation(dem, px, py)
    return float(np.min(z))


def _extrude_one(fp, dem: DemGrid, height: float) -> CityMesh:
    z_base = _footprint_base_elevation(fp, dem) - EMBED_DEPTH
    z_top = z_base + EMBED_DEPTH + height

    cap2d, cap_tris = triangulate(fp.exterior, fp.holes)
    nc = len(cap2d)
    verts = [np.column_stack([cap2d, np.full(nc, z_top)]),
             np.column_stack([cap2d, np.full(nc, z_base)])]
    tris = [cap_tris,  # top cap, CCW from above
            cap_tris[:, ::-1] + nc]  # bottom cap, flipped to face down
    offset = 2 * nc

    for ring in (fp.exterior, *fp.holes):
        n = len(ring)
        for i in range(n):
            vi = ring[i]
            vj = ring[(i + 1) % n]
            quad = np.array(
                [
                    [vi[0], vi[1], z_base],
                    [vj[0], vj[1], z_base],
                    [vj[0], vj[1], z_top],
                    [vi[0], vi[1], z_top],
                ]
            )
            verts.append(quad)
            tris.append(
                np.array([[offset, offset + 1, offset + 2], [offset, offset + 2, offset + 3]])
            )
            offset += 4

    vertices = np.vstack(verts)
    triangles = np.vstack(tris).astype(np.int64)
    return CityMesh(
        vertices=vertices,
        triangles=triangles,
        tri_label=np.full(len(triangles), LABEL_BUILDING, dtype=np.uint8),
        tri_building=(fp.id,) * len(triangles),
    )


def extrude_footprints(
    fps: FootprintSet, dem: DemGrid, height: float = DEFAULT_HEIGHT
) -> tuple[CityMesh, list[str]]:
    """Extrude every footprint into a closed prism.

    Invalid footprints (outside the DEM, or failing ear clipping) are skipped
    with a warning; their ids are returned alongside the merged mesh.
    """
    parts = []
    skipped: list[str] = []
    for fp in fps.footprints:
        try:
            parts.append(_extrude_one(fp, dem, height))
        except (EarClipError, CityModelError) as e:
            log.warning("skipping footprint %s: %s", fp.id, e)
            skipped.append(fp.id)
    return merge(parts), skipped


def merge(parts: list[CityMesh]) -> CityMesh:
    if not parts:
        return empty_mesh()
    verts = []
    tris = []
    labels = []
    buildings = []
    offset = 0
    for m in parts:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        labels.append(m.tri_label)
        buildings.extend(m.tri_building)
        offset += len(m.vertices)
    return CityMesh(
        vertices=np.vstack(verts),
        triangles=np.vstack(tris),
        tri_label=np.concatenate(labels),
        tri_building=tuple(buildings),
    )
