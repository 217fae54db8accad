"""Synthetic ground-truth scenes for end-to-end alignment verification.

A straight street flanked by rectangular buildings, a flat or gently sloped
DEM, a world trajectory down the street center, and a derived local SLAM
frame (random similarity plus optional linear vertical drift). Masks are
self-rendered from the ground-truth poses, and feature points are taken from
rendered building pixels, so every loss is exactly zero at the true params.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import LABEL_BUILDING, LABEL_OTHER, LABEL_SKY
from .alignment import AlignmentParams, WorldTransform, make_transform, world_pose
from .bvh import RayAccel, build_accel
from .citymodel import CityMesh, build_terrain, extrude_footprints, merge, terrain_elevation
from .geom import quat_multiply, quat_rotate, quat_yaw
from .ingest import (
    CameraTrajectory,
    DemGrid,
    Footprint,
    FootprintSet,
    Keyframe,
    MapEndpoints,
    SegMask,
    SlamPoint,
    SlamPointCloud,
    save_dem,
    save_footprints,
    save_mask,
    save_slam,
)
from .spherical import pixel_to_dir, render_labels


@dataclass(frozen=True)
class SynthConfig:
    blocks: int = 3  # buildings per street side
    street_width: float = 12.0
    building_size: float = 15.0
    building_gap: float = 6.0
    keyframes: int = 24
    points_per_kf: int = 40
    z_drift: float = 0.0  # m of linear vertical SLAM drift over the trajectory
    point_sigma: float = 0.0  # m of noise on local point coordinates
    seed: int = 0
    render_width: int = 512
    render_height: int = 256
    height: float = 20.0
    base_elevation: float = 10.0
    slope: float = 0.0  # dz/dx of the terrain along the street
    # projected-CRS offset of the street start; keeps coordinate magnitudes
    # above the ingest module's degree-coordinate heuristic
    origin: tuple[float, float] = (12000.0, 34000.0)

    def __post_init__(self):
        if self.blocks < 1 or self.keyframes < 2 or self.points_per_kf < 0:
            raise ValueError("bad synth config counts")


@dataclass(frozen=True)
class SynthScene:
    cfg: SynthConfig
    footprints: FootprintSet
    dem: DemGrid
    mesh: CityMesh
    accel: RayAccel
    traj_world: CameraTrajectory
    traj_local: CameraTrajectory
    cloud: SlamPointCloud
    masks: dict  # keyframe id -> SegMask
    gt_params: AlignmentParams
    gt_transform: WorldTransform
    endpoints: MapEndpoints


def _make_city(cfg: SynthConfig):
    bs, gap = cfg.building_size, cfg.building_gap
    ox, oy = cfg.origin
    length = cfg.blocks * (bs + gap) + gap
    feet = []
    for b in range(cfg.blocks):
        x0 = ox + gap + b * (bs + gap)
        for side, tag in ((1.0, "n"), (-1.0, "s")):
            y0 = oy + side * (cfg.street_width / 2.0)
            y1 = y0 + side * bs
            ylo, yhi = min(y0, y1), max(y0, y1)
            ring = np.array(
                [[x0, ylo], [x0 + bs, ylo], [x0 + bs, yhi], [x0, yhi]], dtype=np.float64
            )
            feet.append(Footprint(id=f"b{b}{tag}", exterior=ring))
    fps = FootprintSet(footprints=tuple(feet))

    spacing = 5.0
    margin = 4 * spacing
    xmin, xmax = ox - margin, ox + length + margin
    half = cfg.street_width / 2.0 + bs + margin
    ncols = int(np.ceil((xmax - xmin) / spacing)) + 1
    nrows = int(np.ceil(2 * half / spacing)) + 1
    xs = xmin + np.arange(ncols) * spacing
    elev = cfg.base_elevation + cfg.slope * np.broadcast_to(xs - ox, (nrows, ncols))
    dem = DemGrid(
        origin=(xmin, oy + half), spacing=spacing, ncols=ncols, nrows=nrows,
        elevation=np.ascontiguousarray(elev, dtype=np.float64),
    )
    return fps, dem, length


def gen_scene(cfg: SynthConfig) -> SynthScene:
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    fps, dem, length = _make_city(cfg)
    building_mesh, skipped = extrude_footprints(fps, dem, cfg.height)
    assert not skipped
    mesh = merge([build_terrain(dem), building_mesh])
    accel = build_accel(mesh)

    # world trajectory straight down the street center
    ox, oy = cfg.origin
    x_path = ox + np.linspace(2.0, length - 2.0, cfg.keyframes)
    world_kfs = []
    for i, x in enumerate(x_path):
        z = terrain_elevation(dem, x, oy) + 1.6
        world_kfs.append(
            Keyframe(
                id=i,
                position=np.array([x, oy, z]),
                orientation=np.array([1.0, 0.0, 0.0, 0.0]),  # forward = +x
                video_time=0.5 * i,
            )
        )
    traj_world = CameraTrajectory(keyframes=tuple(world_kfs))

    gt_params = AlignmentParams(
        v_s=world_kfs[0].position.copy(), v_e=world_kfs[-1].position.copy(), lam=0.0
    )

    # random similarity defining the local SLAM frame: w = s R(theta) l + T
    s = float(rng.uniform(0.5, 2.0))
    theta = float(rng.uniform(-np.pi, np.pi))
    trans = rng.uniform(-50.0, 50.0, size=3)
    q_inv = quat_yaw(-theta)
    u_path = (x_path - x_path[0]) / (x_path[-1] - x_path[0])
    local_kfs = []
    for kf, u in zip(world_kfs, u_path):
        p = quat_rotate(q_inv, kf.position - trans) / s
        p = p + np.array([0.0, 0.0, cfg.z_drift * u])
        q = quat_multiply(q_inv, kf.orientation)
        local_kfs.append(
            Keyframe(id=kf.id, position=p, orientation=q / np.linalg.norm(q),
                     video_time=kf.video_time)
        )
    traj_local = CameraTrajectory(keyframes=tuple(local_kfs))

    gt_tf = make_transform(gt_params, traj_local)

    # self-rendered masks (Sky relabeled to Other) and wall feature points
    masks = {}
    points: list[SlamPoint] = []
    rot_q = gt_tf.rotation_quat()
    for kf in local_kfs:
        pose = world_pose(traj_local, gt_tf, kf.id)
        img = render_labels(accel, pose, cfg.render_width, cfg.render_height)
        labels = img.labels.copy()
        labels[labels == LABEL_SKY] = LABEL_OTHER
        masks[kf.id] = SegMask(width=cfg.render_width, height=cfg.render_height, labels=labels)

        vs, us = np.nonzero(img.labels == LABEL_BUILDING)
        if len(vs) == 0 or cfg.points_per_kf == 0:
            continue
        pick = rng.choice(len(vs), size=min(cfg.points_per_kf, len(vs)), replace=False)
        dirs = pixel_to_dir(us[pick], vs[pick], cfg.render_width, cfg.render_height)
        dirs_world = quat_rotate(pose.orientation, dirs)
        depths = img.depth[vs[pick], us[pick]]
        pw = pose.position + depths[:, None] * dirs_world
        # exact inverse of gt_tf.apply for this keyframe's arc position
        u = gt_tf.arc_u[kf.id]
        corr = np.array([0.0, 0.0, gt_tf.z0 + gt_tf.z1 * u])
        pl = quat_rotate(
            np.array([rot_q[0], -rot_q[1], -rot_q[2], -rot_q[3]]),
            (pw - corr - gt_tf.translation),
        ) / gt_tf.scale
        if cfg.point_sigma > 0:
            pl = pl + rng.normal(0.0, cfg.point_sigma, size=pl.shape)
        for row in pl:
            points.append(SlamPoint(position=row.copy(), keyframe_id=kf.id))

    cloud = SlamPointCloud(points=tuple(points))
    endpoints = MapEndpoints(
        start=(float(gt_params.v_s[0]), float(gt_params.v_s[1])),
        end=(float(gt_params.v_e[0]), float(gt_params.v_e[1])),
    )
    return SynthScene(
        cfg=cfg, footprints=fps, dem=dem, mesh=mesh, accel=accel,
        traj_world=traj_world, traj_local=traj_local, cloud=cloud, masks=masks,
        gt_params=gt_params, gt_transform=gt_tf, endpoints=endpoints,
    )


def perturb(params: AlignmentParams, pos: float, yaw: float, seed: int) -> AlignmentParams:
    """Uniform noise in +-pos meters per coordinate and +-yaw radians."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return AlignmentParams(
        v_s=params.v_s + rng.uniform(-pos, pos, size=3),
        v_e=params.v_e + rng.uniform(-pos, pos, size=3),
        lam=params.lam + float(rng.uniform(-yaw, yaw)),
    )


def keyframe_position_error(
    traj_local: CameraTrajectory, tf_a: WorldTransform, tf_b: WorldTransform
) -> float:
    """Mean distance between keyframe positions under two transforms."""
    errs = [
        float(np.linalg.norm(tf_a.apply_keyframe(kf) - tf_b.apply_keyframe(kf)))
        for kf in traj_local.keyframes
    ]
    return float(np.mean(errs))


def yaw_error(tf_a: WorldTransform, tf_b: WorldTransform) -> float:
    d = tf_a.yaw - tf_b.yaw
    return abs(float(np.arctan2(np.sin(d), np.cos(d))))


def write_scene(scene: SynthScene, out_dir: str) -> None:
    """Write a complete input set consumable by the align CLI."""
    os.makedirs(out_dir, exist_ok=True)
    save_footprints(scene.footprints, os.path.join(out_dir, "footprints.geojson"))
    save_dem(scene.dem, os.path.join(out_dir, "dem.asc"))
    save_slam(scene.traj_local, scene.cloud, os.path.join(out_dir, "slam.json"))
    mask_dir = os.path.join(out_dir, "masks")
    os.makedirs(mask_dir, exist_ok=True)
    for kf_id, mask in sorted(scene.masks.items()):
        save_mask(mask, os.path.join(mask_dir, f"mask_{kf_id}.png"))
    with open(os.path.join(out_dir, "endpoints.json"), "w") as f:
        json.dump(
            {"start": list(scene.endpoints.start), "end": list(scene.endpoints.end)}, f
        )
    with open(os.path.join(out_dir, "ground_truth.json"), "w") as f:
        json.dump(
            {
                "v_s": [float(v) for v in scene.gt_params.v_s],
                "v_e": [float(v) for v in scene.gt_params.v_e],
                "lambda": float(scene.gt_params.lam),
                "yaw": float(scene.gt_transform.yaw),
                "scale": float(scene.gt_transform.scale),
            },
            f,
            indent=2,
        )
