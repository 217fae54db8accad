"""Command-line entry point.

Subcommands wire ingest -> citymodel -> alignment -> export. All logging goes
to stderr; machine-readable output goes to files (or stdout) only, formatted
canonically so reruns with the same inputs and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .alignment import (
    AlignConfig,
    AlignmentError,
    AlignmentParams,
    LossConfig,
    align,
    init_params_from_endpoints,
    make_transform,
    sample_frames,
    total_loss,
    world_pose,
)
from .bvh import build_accel
from .citymodel import DEFAULT_HEIGHT, CityModelError, build_terrain, extrude_footprints, merge
from .earclip import EarClipError
from .flood import ScenarioError, load_scenario, scenario_step
from .gltf import write_glb
from .ingest import (
    IngestError,
    load_dem,
    load_endpoints,
    load_footprints,
    load_masks,
    load_slam,
    save_mask,
)
from .jsonio import dump as canonical_dump
from .jsonio import dumps as canonical_dumps
from .pipeline import ExportError, WorldKeyframe, export_scene
from .spherical import render_labels
from .synth import SynthConfig, gen_scene, write_scene

log = logging.getLogger("floodwalk")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as f:
        return json.load(f)


def _loss_config(cfg: dict) -> LossConfig:
    return LossConfig(
        w_ground=cfg.get("w_ground", 1.0),
        w_point=cfg.get("w_point", 1.0),
        point_norm=cfg.get("point_norm", 10.0),
        d_max=cfg.get("d_max", 200.0),
        n_frames=cfg.get("n_frames", 8),
        render_width=cfg.get("render_width", 512),
        render_height=cfg.get("render_height", 256),
    )


def _align_config(cfg: dict) -> AlignConfig:
    return AlignConfig(
        loss=_loss_config(cfg),
        sigma0=cfg.get("sigma0", 1.0),
        coarse_frac=cfg.get("coarse_frac", 0.3),
        polish_sigma0=cfg.get("polish_sigma0", 0.3),
        max_evals=cfg.get("max_evals", 6000),
        seed=cfg.get("seed", 0),
        target_loss=cfg.get("target_loss"),
    )


def _build_city(args, cfg: dict):
    dem = load_dem(args.dem)
    fps = load_footprints(args.footprints)
    height = args.height if getattr(args, "height", None) is not None else cfg.get(
        "height", DEFAULT_HEIGHT
    )
    buildings, skipped = extrude_footprints(fps, dem, height)
    if skipped:
        log.warning("skipped %d invalid footprints: %s", len(skipped), skipped)
    return dem, merge([build_terrain(dem), buildings])


def _masked_keyframes(mask_dir: str, traj) -> list[int]:
    return [k for k in traj.ids if os.path.exists(os.path.join(mask_dir, f"mask_{k}.png"))]


def cmd_build_model(args) -> int:
    cfg = _load_config(args.config)
    dem, mesh = _build_city(args, cfg)
    sidecar = write_glb(mesh, args.out)
    if args.sidecar:
        canonical_dump(sidecar, args.sidecar)
    log.info("wrote %s (%d triangles)", args.out, mesh.num_triangles)
    return 0


def cmd_align(args) -> int:
    cfg = _load_config(args.config)
    acfg = _align_config(cfg)
    if args.seed is not None:
        acfg = replace(acfg, seed=args.seed)
    dem, mesh = _build_city(args, cfg)
    accel = build_accel(mesh)
    traj, cloud = load_slam(args.slam)
    endpoints = load_endpoints(args.endpoints, dem)
    masked_ids = _masked_keyframes(args.masks, traj)
    frame_ids = sample_frames(traj, acfg.loss.n_frames)
    missing = [k for k in frame_ids if k not in masked_ids]
    if missing:
        raise IngestError(f"no mask for sampled keyframes {missing}")
    masks = load_masks(args.masks, masked_ids)

    init = init_params_from_endpoints(
        endpoints, dem, cfg.get("camera_height", 1.6)
    )
    res = align(init, traj, cloud, masks, accel, acfg)
    best, report = res.params, res.report
    result = {
        "v_s": [float(v) for v in best.v_s],
        "v_e": [float(v) for v in best.v_e],
        "lambda": float(best.lam),
        "loss": {"ground": report.ground, "point": report.point, "total": report.total},
        "history": res.history,
        "evals": res.evals,
        "detail": report.to_dict(),
        "tool_version": __version__,
    }
    if args.out:
        canonical_dump(result, args.out)
    else:
        sys.stdout.write(canonical_dumps(result) + "\n")
    log.info(
        "alignment finished: total loss %.6g after %d generations", report.total, len(res.history)
    )
    return 0


def _params_from_file(path: str) -> AlignmentParams:
    with open(path) as f:
        doc = json.load(f)
    return AlignmentParams(
        v_s=np.asarray(doc["v_s"], dtype=np.float64),
        v_e=np.asarray(doc["v_e"], dtype=np.float64),
        lam=float(doc["lambda"]),
    )


def cmd_render_debug(args) -> int:
    cfg = _load_config(args.config)
    lcfg = _loss_config(cfg)
    dem, mesh = _build_city(args, cfg)
    accel = build_accel(mesh)
    traj, _cloud = load_slam(args.slam)
    params = _params_from_file(args.params)
    tf = make_transform(params, traj)
    frame_ids = sample_frames(traj, lcfg.n_frames)
    os.makedirs(args.out, exist_ok=True)
    for kf_id in frame_ids:
        img = render_labels(
            accel, world_pose(traj, tf, kf_id), lcfg.render_width, lcfg.render_height
        )
        save_mask(img.labels, os.path.join(args.out, f"render_{kf_id}.png"))
    log.info("wrote %d debug renders to %s", len(frame_ids), args.out)
    return 0


def cmd_export(args) -> int:
    cfg = _load_config(args.config)
    dem, mesh = _build_city(args, cfg)
    traj, _cloud = load_slam(args.slam)
    params = _params_from_file(args.params)
    tf = make_transform(params, traj)
    keyframes = []
    for kf in traj.keyframes:
        pose = world_pose(traj, tf, kf.id)
        keyframes.append(
            WorldKeyframe(
                id=kf.id, video_time=kf.video_time,
                position=pose.position, orientation=pose.orientation,
            )
        )
    frames = {}
    for kf in traj.keyframes:
        for ext in (".jpg", ".jpeg", ".png"):
            cand = os.path.join(args.frames, f"frame_{kf.id}{ext}")
            if os.path.exists(cand):
                frames[kf.id] = cand
                break
    scenario = load_scenario(args.scenario)
    alignment_info = {
        "v_s": [float(v) for v in params.v_s],
        "v_e": [float(v) for v in params.v_e],
        "lambda": float(params.lam),
    }
    export_scene(args.out, mesh, keyframes, frames, scenario, alignment_info)
    log.info("exported scene bundle to %s", args.out)
    return 0


def cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    scfg = SynthConfig(
        blocks=args.blocks,
        keyframes=args.keyframes,
        points_per_kf=args.points_per_kf,
        z_drift=args.z_drift,
        point_sigma=args.point_sigma,
        seed=args.seed,
        render_width=cfg.get("render_width", 512),
        render_height=cfg.get("render_height", 256),
        height=cfg.get("height", DEFAULT_HEIGHT),
        slope=args.slope,
    )
    scene = gen_scene(scfg)
    write_scene(scene, args.out)
    log.info("wrote synthetic scene to %s", args.out)
    return 0


def cmd_scenario_check(args) -> int:
    scenario = load_scenario(args.scenario)
    dem = load_dem(args.dem)
    x, y = (float(v) for v in args.avatar.split(","))
    status = scenario_step(scenario, (x, y), args.time, dem)
    sys.stdout.write(canonical_dumps({"status": status}) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="floodwalk", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_city_inputs(sp):
        sp.add_argument("--footprints", required=True)
        sp.add_argument("--dem", required=True)
        sp.add_argument("--config", help="JSON file overriding tunables")

    sp = sub.add_parser("build-model", help="build the terrain + building mesh")
    add_city_inputs(sp)
    sp.add_argument("--height", type=float, default=None)
    sp.add_argument("--out", required=True)
    sp.add_argument("--sidecar")
    sp.set_defaults(func=cmd_build_model)

    sp = sub.add_parser("align", help="optimize the trajectory-to-model alignment")
    add_city_inputs(sp)
    sp.add_argument("--slam", required=True)
    sp.add_argument("--masks", required=True)
    sp.add_argument("--endpoints", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_align)

    sp = sub.add_parser("render-debug", help="write label renders for a parameter set")
    add_city_inputs(sp)
    sp.add_argument("--slam", required=True)
    sp.add_argument("--params", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_render_debug)

    sp = sub.add_parser("export", help="export a viewer scene bundle")
    add_city_inputs(sp)
    sp.add_argument("--slam", required=True)
    sp.add_argument("--params", required=True)
    sp.add_argument("--frames", required=True)
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("synth", help="generate a synthetic ground-truth scene")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--blocks", type=int, default=3)
    sp.add_argument("--keyframes", type=int, default=24)
    sp.add_argument("--points-per-kf", type=int, default=40)
    sp.add_argument("--z-drift", type=float, default=0.0)
    sp.add_argument("--point-sigma", type=float, default=0.0)
    sp.add_argument("--slope", type=float, default=0.0)
    sp.add_argument("--config")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("scenario-check", help="evaluate the evacuation scenario once")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--dem", required=True)
    sp.add_argument("--avatar", required=True, help="x,y meters")
    sp.add_argument("--time", type=float, required=True)
    sp.set_defaults(func=cmd_scenario_check)
    return p


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    try:
        return args.func(args)
    except (IngestError, AlignmentError, CityModelError, EarClipError, ScenarioError, ExportError, ValueError) as e:
        log.error("%s", e)
        return 1
    except Exception as e:  # noqa: BLE001 - runtime failures exit 2
        log.error("runtime failure: %s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
