"""Trajectory-to-model alignment.

Seven scalars (world start point, world end point, residual yaw) determine a
similarity transform plus a linear-in-arc-length vertical correction. The
transform is scored by a ground-region overlap loss against segmentation
masks and a ray-distance loss against SLAM feature points, and optimized
with CMA-ES.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import LABEL_BUILDING, LABEL_GROUND, LABEL_OTHER
from .bvh import RayAccel, raycast_batch
from .citymodel import terrain_elevation
from .cmaes import CmaConfig, minimize
from .geom import quat_multiply, quat_rotate, quat_to_matrix, quat_yaw, rotation_between
from .ingest import CameraTrajectory, DemGrid, MapEndpoints, SegMask, SlamPoint, SlamPointCloud
from .spherical import CameraPose, dir_to_pixel, render_labels

log = logging.getLogger(__name__)

MIN_CHORD = 0.1  # m, horizontal start-end separation below which params are invalid
CAMERA_HEIGHT = 1.6  # m above terrain for endpoint initialization

# normalization units for the CMA-ES search space
POS_UNIT = 5.0  # m
YAW_UNIT = 0.1  # rad


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class AlignmentParams:
    v_s: np.ndarray  # (3,) world meters
    v_e: np.ndarray  # (3,) world meters
    lam: float  # residual yaw (rad) beyond the chord-aligning rotation

    def __post_init__(self):
        object.__setattr__(self, "v_s", np.asarray(self.v_s, dtype=np.float64))
        object.__setattr__(self, "v_e", np.asarray(self.v_e, dtype=np.float64))
        if not (np.all(np.isfinite(self.v_s)) and np.all(np.isfinite(self.v_e)) and np.isfinite(self.lam)):
            raise AlignmentError("non-finite alignment parameter")
        if float(np.linalg.norm(self.v_e[:2] - self.v_s[:2])) <= MIN_CHORD:
            raise AlignmentError("horizontal chord shorter than 0.1 m")

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.v_s / POS_UNIT, self.v_e / POS_UNIT, [self.lam / YAW_UNIT]])

    @staticmethod
    def from_vector(x: np.ndarray) -> "AlignmentParams":
        x = np.asarray(x, dtype=np.float64)
        return AlignmentParams(
            v_s=x[0:3] * POS_UNIT, v_e=x[3:6] * POS_UNIT, lam=float(x[6] * YAW_UNIT)
        )


@dataclass(frozen=True)
class WorldTransform:
    yaw: float  # rad about gravity (+z)
    scale: float
    translation: np.ndarray  # (3,)
    z0: float  # vertical correction at the trajectory start
    z1: float  # additional vertical correction at the trajectory end
    gravity_align: np.ndarray  # quaternion rotating the local frame gravity onto +z
    arc_u: dict  # keyframe id -> normalized horizontal arc length in [0, 1]

    def rotation_quat(self) -> np.ndarray:
        return quat_multiply(quat_yaw(self.yaw), self.gravity_align)

    def apply(self, p_local: np.ndarray, u: float = 0.0) -> np.ndarray:
        p = quat_rotate(self.rotation_quat(), np.asarray(p_local, dtype=np.float64))
        q = self.scale * p + self.translation
        return q + np.array([0.0, 0.0, self.z0 + self.z1 * u])

    def apply_keyframe(self, kf) -> np.ndarray:
        return self.apply(kf.position, self.arc_u[kf.id])


def _horizontal_arc_u(positions: np.ndarray, ids) -> dict:
    d = np.linalg.norm(np.diff(positions[:, :2], axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(d)])
    total = cum[-1]
    if total <= 0:
        u = np.linspace(0.0, 1.0, len(positions))
    else:
        u = cum / total
    return {kf_id: float(ui) for kf_id, ui in zip(ids, u)}


def make_transform(params: AlignmentParams, traj: CameraTrajectory) -> WorldTransform:
    """Build the similarity + vertical-correction transform the 7 scalars determine.

    The local start keyframe maps exactly to v_s; the end keyframe's height is
    pinned to z_e by distributing the residual linearly in horizontal arc length.
    """
    g_align = rotation_between(traj.gravity, np.array([0.0, 0.0, 1.0]))
    local = quat_rotate(g_align, traj.positions())
    chord_l = local[-1, :2] - local[0, :2]
    len_l = float(np.linalg.norm(chord_l))
    if len_l < 1e-12:
        raise AlignmentError("local trajectory has a zero-length horizontal chord")
    chord_w = params.v_e[:2] - params.v_s[:2]
    len_w = float(np.linalg.norm(chord_w))

    scale = len_w / len_l
    yaw = float(
        np.arctan2(chord_w[1], chord_w[0]) - np.arctan2(chord_l[1], chord_l[0]) + params.lam
    )
    rot = quat_multiply(quat_yaw(yaw), g_align)
    start_w = scale * quat_rotate(rot, traj.keyframes[0].position)
    translation = params.v_s - start_w

    arc_u = _horizontal_arc_u(local, traj.ids)
    end_w = scale * quat_rotate(rot, traj.keyframes[-1].position) + translation
    z0 = 0.0  # start is pinned exactly by the translation
    z1 = float(params.v_e[2] - end_w[2])
    return WorldTransform(
        yaw=yaw, scale=scale, translation=translation, z0=z0, z1=z1,
        gravity_align=g_align, arc_u=arc_u,
    )


def world_pose(traj: CameraTrajectory, tf: WorldTransform, kf_id: int) -> CameraPose:
    """World pose of a keyframe; the vertical correction does not tilt the camera."""
    kf = traj.keyframe(kf_id)
    position = tf.apply_keyframe(kf)
    orientation = quat_multiply(tf.rotation_quat(), kf.orientation)
    return CameraPose(position=position, orientation=orientation / np.linalg.norm(orientation))


def sample_frames(traj: CameraTrajectory, n: int = 8) -> list[int]:
    """n keyframe ids at uniform arc-length quantiles, always including both ends."""
    if n < 2:
        raise AlignmentError("need at least 2 sampled frames")
    ids = traj.ids
    if len(ids) <= n:
        return list(ids)
    pos = traj.positions()
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pos, axis=0), axis=1))])
    targets = np.linspace(0.0, cum[-1], n)
    picked: list[int] = []
    prev = -1
    for k, target in enumerate(targets):
        lo = prev + 1
        hi = len(ids) - (n - 1 - k)  # leave room for the remaining quantiles
        i = lo + int(np.argmin(np.abs(cum[lo:hi] - target)))
        picked.append(ids[i])
        prev = i
    picked[-1] = ids[-1]
    return picked


# ---------------------------------------------------------------------------
# Losses


def downsample_labels(labels: np.ndarray, width: int, height: int) -> np.ndarray:
    """Reduce a label image to width x height by per-block majority vote."""
    h, w = labels.shape
    if (h, w) == (height, width):
        return labels
    if h % height or w % width:
        raise AlignmentError(
            f"cannot downsample {w}x{h} to {width}x{height}: non-integer factor"
        )
    fy, fx = h // height, w // width
    blocks = labels.reshape(height, fy, width, fx)
    counts = np.stack(
        [(blocks == lbl).sum(axis=(1, 3)) for lbl in range(3)], axis=0
    )
    # argmax ties resolve to the lowest label value
    return np.argmax(counts, axis=0).astype(np.uint8)


def ground_loss_detail(masks: dict, renders: dict):
    """Per-frame and total ground-region mismatch fraction.

    Pixels labeled Other in the mask are excluded from the count.
    """
    if set(masks) != set(renders):
        raise AlignmentError("mask and render keyframe sets differ")
    total_bad = 0
    total_counted = 0
    per_frame = {}
    for kf_id in sorted(masks):
        m = masks[kf_id]
        r = renders[kf_id]
        m_labels = m.labels if isinstance(m, SegMask) else m
        r_labels = r.labels if hasattr(r, "labels") else r
        if m_labels.shape != r_labels.shape:
            m_labels = downsample_labels(m_labels, r_labels.shape[1], r_labels.shape[0])
        counted = m_labels != LABEL_OTHER
        bad = ((m_labels == LABEL_GROUND) != (r_labels == LABEL_GROUND)) & counted
        nb, nc = int(bad.sum()), int(counted.sum())
        per_frame[kf_id] = nb / nc if nc else 0.0
        total_bad += nb
        total_counted += nc
    loss = total_bad / total_counted if total_counted else 0.0
    return loss, per_frame, total_bad, total_counted


def ground_loss(masks: dict, renders: dict) -> float:
    return ground_loss_detail(masks, renders)[0]


def filter_building_points(
    cloud: SlamPointCloud, traj: CameraTrajectory, masks: dict
) -> SlamPointCloud:
    """Keep points whose local-frame reprojection lands on a Building mask pixel.

    Points tied to keyframes without a mask are dropped. Idempotent.
    """
    kept: list[SlamPoint] = []
    for p in cloud.points:
        if p.keyframe_id not in masks:
            continue
        mask = masks[p.keyframe_id]
        kf = traj.keyframe(p.keyframe_id)
        rel = p.position - kf.position
        if float(np.linalg.norm(rel)) == 0.0:
            continue
        dir_cam = quat_to_matrix(kf.orientation).T @ rel
        u, v = dir_to_pixel(dir_cam, mask.width, mask.height)
        ui = int(np.round(u)) % mask.width
        vi = int(np.clip(np.round(v), 0, mask.height - 1))
        if mask.labels[vi, ui] == LABEL_BUILDING:
            kept.append(p)
    return SlamPointCloud(points=tuple(kept))


def point_loss_detail(
    cloud: SlamPointCloud,
    traj: CameraTrajectory,
    tf: WorldTransform,
    accel: RayAccel,
    d_max: float = 200.0,
):
    """Mean |ray-hit distance - observed distance| over the (filtered) cloud."""
    if not cloud.points:
        return 0.0, 0.0, 0
    origins = []
    dirs = []
    t_obs = []
    for p in cloud.points:
        kf = traj.keyframe(p.keyframe_id)
        c = tf.apply_keyframe(kf)
        pw = tf.apply(p.position, tf.arc_u[kf.id])
        rel = pw - c
        dist = float(np.linalg.norm(rel))
        if dist == 0.0:
            continue
        origins.append(c)
        dirs.append(rel / dist)
        t_obs.append(dist)
    if not origins:
        return 0.0, 0.0, 0
    t_hit, tri = raycast_batch(accel, np.array(origins), np.array(dirs))
    t_hit = np.where(tri >= 0, t_hit, d_max)
    diffs = np.abs(t_hit - np.array(t_obs))
    return float(diffs.mean()), float(diffs.sum()), len(diffs)


def point_loss(cloud, traj, tf, accel, d_max: float = 200.0) -> float:
    return point_loss_detail(cloud, traj, tf, accel, d_max)[0]


@dataclass(frozen=True)
class LossConfig:
    w_ground: float = 1.0
    w_point: float = 1.0
    point_norm: float = 10.0  # m; converts the point loss to a unitless term
    d_max: float = 200.0  # m; substitute hit distance for rays that miss
    n_frames: int = 8
    render_width: int = 512
    render_height: int = 256


@dataclass(frozen=True)
class LossReport:
    ground: float
    point: float  # mean meters
    total: float
    per_frame: dict
    retained_points: int
    ground_mismatch_count: int
    ground_counted_pixels: int
    point_sum: float

    def to_dict(self) -> dict:
        return {
            "ground": self.ground,
            "point": self.point,
            "total": self.total,
            "per_frame": {str(k): v for k, v in sorted(self.per_frame.items())},
            "retained_points": self.retained_points,
            "ground_mismatch_count": self.ground_mismatch_count,
            "ground_counted_pixels": self.ground_counted_pixels,
            "point_sum": self.point_sum,
        }


def total_loss(
    params: AlignmentParams,
    traj: CameraTrajectory,
    cloud: SlamPointCloud,
    masks: dict,
    accel: RayAccel,
    cfg: LossConfig = LossConfig(),
    frame_ids: list[int] | None = None,
) -> LossReport:
    """Weighted sum of the normalized ground and point losses for one candidate."""
    tf = make_transform(params, traj)
    if frame_ids is None:
        frame_ids = sample_frames(traj, cfg.n_frames)
    missing = [k for k in frame_ids if k not in masks]
    if missing:
        raise AlignmentError(f"no mask for sampled keyframes {missing}")
    renders = {}
    small_masks = {}
    for kf_id in frame_ids:
        pose = world_pose(traj, tf, kf_id)
        m = masks[kf_id]
        small = downsample_labels(
            m.labels if isinstance(m, SegMask) else m, cfg.render_width, cfg.render_height
        )
        small_masks[kf_id] = small
        # mask-Other pixels are excluded from the ground loss, so their rays
        # are never needed
        renders[kf_id] = render_labels(
            accel, pose, cfg.render_width, cfg.render_height, select=small != LABEL_OTHER
        )
    g, per_frame, g_bad, g_counted = ground_loss_detail(small_masks, renders)
    p_mean, p_sum, n_pts = point_loss_detail(cloud, traj, tf, accel, cfg.d_max)
    total = cfg.w_ground * g + cfg.w_point * (p_mean / cfg.point_norm)
    return LossReport(
        ground=g, point=p_mean, total=total, per_frame=per_frame,
        retained_points=n_pts, ground_mismatch_count=g_bad,
        ground_counted_pixels=g_counted, point_sum=p_sum,
    )


# ---------------------------------------------------------------------------
# Optimization


def init_params_from_endpoints(
    endpoints: MapEndpoints, dem: DemGrid, camera_height: float = CAMERA_HEIGHT
) -> AlignmentParams:
    sx, sy = endpoints.start
    ex, ey = endpoints.end
    return AlignmentParams(
        v_s=np.array([sx, sy, terrain_elevation(dem, sx, sy) + camera_height]),
        v_e=np.array([ex, ey, terrain_elevation(dem, ex, ey) + camera_height]),
        lam=0.0,
    )


@dataclass(frozen=True)
class AlignConfig:
    loss: LossConfig = field(default_factory=LossConfig)
    sigma0: float = 1.0  # in normalized units (POS_UNIT meters / YAW_UNIT rad)
    # The point loss is periodic in the lateral offset (rows of similar
    # facades repeat every street width), so the combined loss has strong
    # local minima one block over. The ground-region loss alone has a single
    # dominant basin; a coarse region-only stage first pulls the candidate
    # into that basin, then a short-step full-loss stage polishes it.
    coarse_frac: float = 0.3  # share of max_evals for the region-only stage
    polish_sigma0: float = 0.3
    max_evals: int = 6000
    seed: int = 0
    target_loss: float | None = None


@dataclass(frozen=True)
class AlignResult:
    params: AlignmentParams
    report: LossReport
    history: list  # per-generation best loss, both stages concatenated
    evals: int  # loss evaluations actually performed (including resamples)


def align(
    init: AlignmentParams,
    traj: CameraTrajectory,
    cloud: SlamPointCloud,
    masks: dict,
    accel: RayAccel,
    cfg: AlignConfig = AlignConfig(),
) -> AlignResult:
    """Two-stage CMA-ES refinement of the alignment parameters.

    The point cloud is filtered to building points once up front (the filter
    works in the local frame and is transform-independent). The result's loss
    never exceeds the loss of the initial parameters.
    """
    frame_ids = sample_frames(traj, cfg.loss.n_frames)
    filtered = filter_building_points(cloud, traj, masks)
    log.info("retained %d/%d building points", len(filtered.points), len(cloud.points))

    n_evals = 0

    def make_objective(loss_cfg: LossConfig):
        def objective(x: np.ndarray) -> float:
            nonlocal n_evals
            try:
                params = AlignmentParams.from_vector(x)
            except AlignmentError:
                return np.inf
            n_evals += 1
            report = total_loss(params, traj, filtered, masks, accel, loss_cfg, frame_ids)
            if not np.isfinite(report.total):
                raise AlignmentError("non-finite loss; optimizer diverged")
            return report.total
        return objective

    init_report = total_loss(init, traj, filtered, masks, accel, cfg.loss, frame_ids)
    n_evals += 1
    history: list[float] = []
    x0 = init.to_vector()
    sigma0 = cfg.sigma0

    coarse_budget = int(cfg.coarse_frac * cfg.max_evals)
    run_coarse = cfg.loss.w_point > 0.0 and coarse_budget > 0
    if run_coarse:
        coarse_cfg = replace(cfg.loss, w_point=0.0)
        x_coarse, _, hist = minimize(
            make_objective(coarse_cfg),
            CmaConfig(
                dimension=7, x0=x0, sigma0=sigma0,
                max_evals=coarse_budget, seed=cfg.seed,
            ),
        )
        history.extend(hist)
        x0 = x_coarse
        sigma0 = cfg.polish_sigma0

    remaining = max(cfg.max_evals - n_evals + 1, 1)
    x_best, f_best, hist = minimize(
        make_objective(cfg.loss),
        CmaConfig(
            dimension=7, x0=x0, sigma0=sigma0,
            max_evals=remaining, target_f=cfg.target_loss,
            seed=cfg.seed + 1 if run_coarse else cfg.seed,
        ),
    )
    history.extend(hist)

    if f_best <= init_report.total:
        best = AlignmentParams.from_vector(x_best)
        report = total_loss(best, traj, filtered, masks, accel, cfg.loss, frame_ids)
        n_evals += 1
    else:
        best, report = init, init_report
    return AlignResult(params=best, report=report, history=history, evals=n_evals)
