"""Loaders for footprints, DEM, SLAM output, segmentation masks and endpoints.

All loaders are pure functions returning immutable-by-convention dataclasses.
Coordinates are expected in a projected metric CRS; no geodetic handling here.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image


class IngestError(ValueError):
    """Raised when an input file is missing, malformed or violates an invariant."""


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class Footprint:
    id: str
    exterior: np.ndarray  # (n, 2) float64, CCW, not closed
    holes: tuple[np.ndarray, ...] = ()  # each (m, 2) float64, CW


@dataclass(frozen=True)
class FootprintSet:
    footprints: tuple[Footprint, ...]


@dataclass(frozen=True)
class DemGrid:
    origin: tuple[float, float]  # center of cell [row 0, col 0] (northwest cell)
    spacing: float
    ncols: int
    nrows: int
    elevation: np.ndarray  # (nrows, ncols) float64, row 0 = northernmost
    nodata: float = -9999.0

    def is_nodata(self, values: np.ndarray) -> np.ndarray:
        return np.isclose(values, self.nodata) | ~np.isfinite(values)

    @property
    def x_min(self) -> float:
        return self.origin[0]

    @property
    def x_max(self) -> float:
        return self.origin[0] + (self.ncols - 1) * self.spacing

    @property
    def y_max(self) -> float:
        # row 0 is northernmost; origin is that row's cell center
        return self.origin[1]

    @property
    def y_min(self) -> float:
        return self.origin[1] - (self.nrows - 1) * self.spacing

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


@dataclass(frozen=True)
class Keyframe:
    id: int
    position: np.ndarray  # (3,) float64
    orientation: np.ndarray  # (4,) float64 quaternion [w, x, y, z], camera -> local
    video_time: float


@dataclass(frozen=True)
class CameraTrajectory:
    keyframes: tuple[Keyframe, ...]
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        if len(self.keyframes) < 2:
            raise IngestError("trajectory needs at least 2 keyframes")
        ids = [k.id for k in self.keyframes]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise IngestError("keyframe ids must be strictly increasing")
        for k in self.keyframes:
            n = float(np.linalg.norm(k.orientation))
            if abs(n - 1.0) > 1e-6:
                raise IngestError(f"keyframe {k.id}: quaternion norm {n} not unit")

    def keyframe(self, kf_id: int) -> Keyframe:
        for k in self.keyframes:
            if k.id == kf_id:
                return k
        raise KeyError(f"unknown keyframe id {kf_id}")

    @property
    def ids(self) -> list[int]:
        return [k.id for k in self.keyframes]

    def positions(self) -> np.ndarray:
        return np.array([k.position for k in self.keyframes])


@dataclass(frozen=True)
class SlamPoint:
    position: np.ndarray  # (3,) float64
    keyframe_id: int


@dataclass(frozen=True)
class SlamPointCloud:
    points: tuple[SlamPoint, ...]


@dataclass(frozen=True)
class SegMask:
    width: int
    height: int
    labels: np.ndarray  # (height, width) uint8 in {0 Other, 1 Ground, 2 Building}

    def __post_init__(self):
        if self.width != 2 * self.height:
            raise IngestError(
                f"mask {self.width}x{self.height} is not 2:1 equirectangular"
            )
        if self.labels.shape != (self.height, self.width):
            raise IngestError("label array shape does not match width/height")
        bad = set(np.unique(self.labels)) - {0, 1, 2}
        if bad:
            raise IngestError(f"unknown mask label values {sorted(bad)}")


@dataclass(frozen=True)
class MapEndpoints:
    start: tuple[float, float]
    end: tuple[float, float]


# ---------------------------------------------------------------------------
# Footprints (GeoJSON)


def _ring_area(ring: np.ndarray) -> float:
    """Signed shoelace area; positive = CCW."""
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _clean_ring(coords, what: str) -> np.ndarray:
    ring = np.asarray(coords, dtype=np.float64)
    if ring.ndim != 2 or ring.shape[1] < 2:
        raise IngestError(f"{what}: ring is not a coordinate list")
    ring = ring[:, :2]
    if not np.all(np.isfinite(ring)):
        raise IngestError(f"{what}: non-finite coordinate")
    # drop explicit closure and consecutive exact duplicates
    if len(ring) > 1 and np.array_equal(ring[0], ring[-1]):
        ring = ring[:-1]
    keep = [0]
    for i in range(1, len(ring)):
        if not np.array_equal(ring[i], ring[keep[-1]]):
            keep.append(i)
    ring = ring[keep]
    if len(np.unique(ring, axis=0)) < 3:
        raise IngestError(f"{what}: degenerate ring (< 3 distinct vertices)")
    return ring


def _orient(ring: np.ndarray, ccw: bool) -> np.ndarray:
    area = _ring_area(ring)
    if area == 0.0:
        raise IngestError("degenerate ring (zero area)")
    if (area > 0) != ccw:
        return ring[::-1].copy()
    return ring


def _polygon_to_footprint(fid: str, rings, what: str) -> Footprint:
    exterior = _orient(_clean_ring(rings[0], what), ccw=True)
    holes = tuple(
        _orient(_clean_ring(r, what), ccw=False) for r in rings[1:]
    )
    return Footprint(id=fid, exterior=exterior, holes=holes)


def load_footprints(path: str, allow_geographic: bool = False) -> FootprintSet:
    """Load building footprints from a GeoJSON FeatureCollection.

    Rings are re-oriented (exterior CCW, holes CW), MultiPolygons are split
    into one footprint per part with an ``_<index>`` id suffix.
    """
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise IngestError(f"cannot read footprints from {path}: {e}") from e
    if doc.get("type") != "FeatureCollection":
        raise IngestError("footprints file is not a GeoJSON FeatureCollection")

    footprints: list[Footprint] = []
    max_abs = 0.0
    for i, feat in enumerate(doc.get("features", [])):
        geom = feat.get("geometry") or {}
        fid = str(feat.get("id", feat.get("properties", {}).get("id", i)))
        gtype = geom.get("type")
        if gtype == "Polygon":
            footprints.append(
                _polygon_to_footprint(fid, geom["coordinates"], f"feature {fid}")
            )
        elif gtype == "MultiPolygon":
            for j, part in enumerate(geom["coordinates"]):
                footprints.append(
                    _polygon_to_footprint(
                        f"{fid}_{j}", part, f"feature {fid} part {j}"
                    )
                )
        else:
            raise IngestError(f"feature {fid}: unsupported geometry type {gtype}")

    if footprints:
        max_abs = max(float(np.abs(fp.exterior).max()) for fp in footprints)
    if footprints and max_abs < 360.0 and not allow_geographic:
        raise IngestError(
            "coordinates look geographic (all magnitudes < 360); inputs must be "
            "projected meters, or pass allow_geographic=True to override"
        )
    return FootprintSet(footprints=tuple(footprints))


def save_footprints(fps: FootprintSet, path: str) -> None:
    features = []
    for fp in fps.footprints:
        rings = [fp.exterior] + list(fp.holes)
        coords = [[[float(x), float(y)] for x, y in r] + [[float(r[0, 0]), float(r[0, 1])]] for r in rings]
        features.append(
            {
                "type": "Feature",
                "id": fp.id,
                "properties": {},
                "geometry": {"type": "Polygon", "coordinates": coords},
            }
        )
    with open(path, "w") as f:
        json.dump({"type": "FeatureCollection", "features": features}, f)


# ---------------------------------------------------------------------------
# DEM (Esri ASCII grid)


def load_dem(path: str) -> DemGrid:
    """Load an Esri ASCII grid; origin is converted to the cell-center convention."""
    try:
        with open(path) as f:
            lines = f.read().split("\n")
    except OSError as e:
        raise IngestError(f"cannot read DEM from {path}: {e}") from e

    header: dict[str, float] = {}
    data_start = 0
    for i, line in enumerate(lines):
        parts = line.split()
        if len(parts) == 2 and parts[0].lower() in (
            "ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value",
        ):
            header[parts[0].lower()] = float(parts[1])
        else:
            data_start = i
            break

    for key in ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize"):
        if key not in header:
            raise IngestError(f"DEM header missing {key}")
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    cellsize = header["cellsize"]
    nodata = header.get("nodata_value", -9999.0)
    if cellsize <= 0:
        raise IngestError("DEM cellsize must be > 0")
    if ncols < 2 or nrows < 2:
        raise IngestError("DEM must be at least 2x2")

    try:
        values = np.array(" ".join(lines[data_start:]).split(), dtype=np.float64)
    except ValueError as e:
        raise IngestError(f"non-numeric DEM value: {e}") from e
    if values.size != ncols * nrows:
        raise IngestError(
            f"DEM has {values.size} values, expected {ncols * nrows}"
        )
    grid = values.reshape(nrows, ncols)
    valid = ~(np.isclose(grid, nodata))
    if not np.all(np.isfinite(grid[valid])):
        raise IngestError("non-finite DEM elevation")

    # xll/yll name the lower-left corner of the lower-left cell; row 0 of the
    # value block is the northernmost row, so the stored origin is the center
    # of the top-left cell.
    x0 = header["xllcorner"] + cellsize / 2.0
    y0 = header["yllcorner"] + cellsize / 2.0 + (nrows - 1) * cellsize
    return DemGrid(
        origin=(x0, y0), spacing=cellsize, ncols=ncols, nrows=nrows,
        elevation=grid, nodata=nodata,
    )


def save_dem(dem: DemGrid, path: str) -> None:
    xll = dem.origin[0] - dem.spacing / 2.0
    yll = dem.origin[1] - dem.spacing / 2.0 - (dem.nrows - 1) * dem.spacing
    with open(path, "w") as f:
        f.write(f"ncols {dem.ncols}\n")
        f.write(f"nrows {dem.nrows}\n")
        f.write(f"xllcorner {xll!r}\n")
        f.write(f"yllcorner {yll!r}\n")
        f.write(f"cellsize {dem.spacing!r}\n")
        f.write(f"NODATA_value {dem.nodata!r}\n")
        for row in dem.elevation:
            f.write(" ".join(repr(float(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# SLAM (trajectory + point cloud JSON)


def load_slam(path: str) -> tuple[CameraTrajectory, SlamPointCloud]:
    """Load a SLAM document: keyframe poses plus keyframe-tagged feature points."""
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise IngestError(f"cannot read SLAM file {path}: {e}") from e

    try:
        keyframes = []
        for kf in doc["keyframes"]:
            q = np.asarray(kf["q"], dtype=np.float64)
            norm = float(np.linalg.norm(q))
            if abs(norm - 1.0) > 1e-3:
                raise IngestError(
                    f"keyframe {kf['id']}: quaternion norm {norm} beyond tolerance"
                )
            keyframes.append(
                Keyframe(
                    id=int(kf["id"]),
                    position=np.asarray(kf["p"], dtype=np.float64),
                    orientation=q / norm,
                    video_time=float(kf["t"]),
                )
            )
        gravity = np.asarray(doc.get("gravity", [0.0, 0.0, 1.0]), dtype=np.float64)
        gn = float(np.linalg.norm(gravity))
        if gn == 0 or not np.all(np.isfinite(gravity)):
            raise IngestError("invalid gravity vector")
        traj = CameraTrajectory(keyframes=tuple(keyframes), gravity=gravity / gn)

        known = set(traj.ids)
        points = []
        for p in doc.get("points", []):
            kf_id = int(p["kf"])
            if kf_id not in known:
                raise IngestError(f"point references absent keyframe {kf_id}")
            points.append(
                SlamPoint(position=np.asarray(p["p"], dtype=np.float64), keyframe_id=kf_id)
            )
    except KeyError as e:
        raise IngestError(f"SLAM file missing field {e}") from e
    return traj, SlamPointCloud(points=tuple(points))


def save_slam(traj: CameraTrajectory, cloud: SlamPointCloud, path: str) -> None:
    doc = {
        "gravity": [float(v) for v in traj.gravity],
        "keyframes": [
            {
                "id": k.id,
                "t": float(k.video_time),
                "p": [float(v) for v in k.position],
                "q": [float(v) for v in k.orientation],
            }
            for k in traj.keyframes
        ],
        "points": [
            {"p": [float(v) for v in p.position], "kf": p.keyframe_id}
            for p in cloud.points
        ],
    }
    with open(path, "w") as f:
        json.dump(doc, f)


# ---------------------------------------------------------------------------
# Segmentation masks (indexed PNG)


def load_masks(dir_path: str, keyframe_ids: list[int]) -> dict[int, SegMask]:
    """Load per-keyframe masks named ``mask_<id>.png`` from a directory."""
    masks: dict[int, SegMask] = {}
    dims: tuple[int, int] | None = None
    for kf_id in keyframe_ids:
        fname = os.path.join(dir_path, f"mask_{kf_id}.png")
        if not os.path.exists(fname):
            raise IngestError(f"missing mask file {fname}")
        with Image.open(fname) as img:
            labels = np.asarray(img, dtype=np.uint8)
        h, w = labels.shape[:2]
        if labels.ndim != 2:
            raise IngestError(f"{fname}: mask must be single-channel indexed PNG")
        mask = SegMask(width=w, height=h, labels=labels)
        if dims is None:
            dims = (w, h)
        elif dims != (w, h):
            raise IngestError(
                f"{fname}: dimensions {w}x{h} differ from {dims[0]}x{dims[1]}"
            )
        masks[kf_id] = mask
    return masks


def save_mask(mask_or_labels, path: str) -> None:
    """Write a label array as an 8-bit indexed PNG with the standard palette."""
    labels = mask_or_labels.labels if isinstance(mask_or_labels, SegMask) else mask_or_labels
    img = Image.fromarray(np.asarray(labels, dtype=np.uint8), mode="P")
    # Other gray, Ground green, Building red, Sky blue
    palette = [0] * 768
    for idx, rgb in {0: (90, 90, 90), 1: (60, 170, 60), 2: (200, 60, 60), 3: (90, 140, 220)}.items():
        palette[3 * idx: 3 * idx + 3] = rgb
    img.putpalette(palette)
    img.save(path)


# ---------------------------------------------------------------------------
# Map endpoints


def load_endpoints(path: str, dem: DemGrid | None = None) -> MapEndpoints:
    try:
        with open(path) as f:
            doc = json.load(f)
        start = (float(doc["start"][0]), float(doc["start"][1]))
        end = (float(doc["end"][0]), float(doc["end"][1]))
    except (OSError, json.JSONDecodeError, KeyError, IndexError, TypeError) as e:
        raise IngestError(f"cannot read endpoints from {path}: {e}") from e
    if math.dist(start, end) == 0.0:
        raise IngestError("endpoints must be distinct")
    if dem is not None:
        for name, (x, y) in (("start", start), ("end", end)):
            if not dem.contains(x, y):
                raise IngestError(f"endpoint {name} {x, y} outside DEM bounds")
    return MapEndpoints(start=start, end=end)
