"""Equirectangular 360 camera model and label-image rendering.

Pixel convention (fixed, bit-exact across renderer, mask export and viewer):
directions are evaluated at pixel centers; azimuth alpha = 2*pi*((u+0.5)/W - 0.5),
elevation beta = pi*(0.5 - (v+0.5)/H); camera frame: forward +x, left +y, up +z;
direction = (cos b cos a, -cos b sin a, sin b).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import LABEL_SKY
from .bvh import RayAccel, raycast_batch
from .geom import quat_to_matrix


class ProjectionError(ValueError):
    pass


@dataclass(frozen=True)
class CameraPose:
    position: np.ndarray  # (3,) world meters
    orientation: np.ndarray  # (4,) quaternion [w,x,y,z], world <- camera

    def __post_init__(self):
        n = float(np.linalg.norm(self.orientation))
        if abs(n - 1.0) > 1e-6:
            raise ProjectionError(f"pose quaternion norm {n} not unit")


@dataclass(frozen=True)
class LabelImage:
    width: int
    height: int
    labels: np.ndarray  # (h, w) uint8 in {LABEL_GROUND, LABEL_BUILDING, LABEL_SKY}
    depth: np.ndarray  # (h, w) float64 meters, inf where Sky

    def __post_init__(self):
        if self.width != 2 * self.height:
            raise ProjectionError("label image must be 2:1 equirectangular")


def pixel_to_dir(u, v, width: int, height: int) -> np.ndarray:
    """Unit direction (camera frame) through pixel center (u+0.5, v+0.5)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any(u < 0) or np.any(u >= width) or np.any(v < 0) or np.any(v >= height):
        raise ProjectionError("pixel out of range")
    alpha = 2.0 * np.pi * ((u + 0.5) / width - 0.5)
    beta = np.pi * (0.5 - (v + 0.5) / height)
    cb = np.cos(beta)
    d = np.stack([cb * np.cos(alpha), -cb * np.sin(alpha), np.sin(beta)], axis=-1)
    return d


def dir_to_pixel(direction, width: int, height: int):
    """Real-valued pixel coordinates; inverse of pixel_to_dir away from the poles."""
    d = np.asarray(direction, dtype=np.float64)
    norm = np.linalg.norm(d, axis=-1)
    if np.any(norm == 0):
        raise ProjectionError("zero direction vector")
    x, y, z = d[..., 0] / norm, d[..., 1] / norm, d[..., 2] / norm
    alpha = np.arctan2(-y, x)
    beta = np.arcsin(np.clip(z, -1.0, 1.0))
    u = (alpha / (2.0 * np.pi) + 0.5) * width - 0.5
    v = (0.5 - beta / np.pi) * height - 0.5
    return u, v


_dir_cache: dict[tuple[int, int], np.ndarray] = {}


def _all_pixel_dirs(width: int, height: int) -> np.ndarray:
    """Per-pixel camera-frame directions, cached per resolution (read-only)."""
    key = (width, height)
    if key not in _dir_cache:
        uu, vv = np.meshgrid(np.arange(width), np.arange(height))
        dirs = pixel_to_dir(uu.ravel(), vv.ravel(), width, height)
        dirs.setflags(write=False)
        _dir_cache[key] = dirs
    return _dir_cache[key]


def render_labels(
    accel: RayAccel,
    pose: CameraPose,
    width: int,
    height: int,
    select: np.ndarray | None = None,
) -> LabelImage:
    """One ray per pixel center; Sky where nothing is hit.

    select, if given, is an (h, w) boolean array; rays are cast only for True
    pixels and the rest report Sky/inf. Selected pixels are bit-identical to a
    full render, so callers that only read selected pixels lose nothing.
    """
    if width != 2 * height:
        raise ProjectionError("render target must be 2:1 equirectangular")
    dirs_cam = _all_pixel_dirs(width, height)
    rot = quat_to_matrix(pose.orientation)
    n = width * height
    labels = np.full(n, LABEL_SKY, dtype=np.uint8)
    depth = np.full(n, np.inf)
    if select is not None:
        if select.shape != (height, width):
            raise ProjectionError("selection mask shape must match render target")
        idx = np.flatnonzero(select.ravel())
        dirs_cam = dirs_cam[idx]
    else:
        idx = slice(None)
    dirs_world = dirs_cam @ rot.T
    origins = np.broadcast_to(pose.position, dirs_world.shape)
    t, tri = raycast_batch(accel, origins, dirs_world)

    sub_labels = np.full(len(t), LABEL_SKY, dtype=np.uint8)
    hit = tri >= 0
    sub_labels[hit] = accel.mesh.tri_label[tri[hit]]
    labels[idx] = sub_labels
    depth[idx] = np.where(hit, t, np.inf)
    return LabelImage(
        width=width,
        height=height,
        labels=labels.reshape(height, width),
        depth=depth.reshape(height, width),
    )
