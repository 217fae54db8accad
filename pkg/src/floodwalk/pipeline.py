"""Scene export: world-space trajectory + mesh + frames + scenario bundle.

The manifest is the contract with the walkthrough viewer; it is versioned,
validated with jsonschema on write and re-read, and written canonically so
exports are byte-reproducible.
"""

from __future__ import annotations

import json
import math
import os
import shutil
from dataclasses import dataclass

import jsonschema
import numpy as np

from . import __version__
from .citymodel import CityMesh
from .flood import EvacuationScenario, scenario_from_dict, scenario_to_dict
from .gltf import write_glb
from .jsonio import dump as canonical_dump


class ExportError(ValueError):
    pass


SCHEMA_VERSION = 1

MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "mesh", "frame_dir", "keyframes", "scenario"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "mesh": {"type": "string"},
        "mesh_sidecar": {"type": "string"},
        "frame_dir": {"type": "string"},
        "keyframes": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "t", "p", "q", "frame"],
                "properties": {
                    "id": {"type": "integer"},
                    "t": {"type": "number"},
                    "p": {"type": "array", "minItems": 3, "maxItems": 3},
                    "q": {"type": "array", "minItems": 4, "maxItems": 4},
                    "frame": {"type": "string"},
                },
            },
        },
        "scenario": {"type": "object"},
        "alignment": {"type": "object"},
    },
}


@dataclass(frozen=True)
class WorldKeyframe:
    id: int
    video_time: float
    position: np.ndarray  # (3,)
    orientation: np.ndarray  # (4,) [w,x,y,z]


def nearest_camera(keyframes, avatar: tuple[float, float]) -> int:
    """Keyframe id minimizing horizontal distance to the avatar; ties -> lower id."""
    if not keyframes:
        raise ExportError("empty trajectory")
    best_id = None
    best_d = math.inf
    for kf in keyframes:
        d = math.dist((float(kf.position[0]), float(kf.position[1])), avatar)
        if d < best_d or (d == best_d and kf.id < best_id):
            best_d = d
            best_id = kf.id
    return best_id


def export_scene(
    out_dir: str,
    mesh: CityMesh,
    keyframes: list[WorldKeyframe],
    frames: dict,  # keyframe id -> source image path
    scenario: EvacuationScenario,
    alignment: dict | None = None,
) -> dict:
    """Write the scene bundle; returns the manifest dict."""
    os.makedirs(out_dir, exist_ok=True)
    frame_dir = os.path.join(out_dir, "frames")
    os.makedirs(frame_dir, exist_ok=True)

    for kf in keyframes:
        if kf.id not in frames:
            raise ExportError(f"no frame image for keyframe {kf.id}")
        if not os.path.exists(frames[kf.id]):
            raise ExportError(f"frame image {frames[kf.id]} for keyframe {kf.id} missing")

    sidecar = write_glb(mesh, os.path.join(out_dir, "city.glb"))
    canonical_dump(sidecar, os.path.join(out_dir, "city_ranges.json"))

    kf_entries = []
    for kf in keyframes:
        ext = os.path.splitext(frames[kf.id])[1] or ".jpg"
        dst = os.path.join(frame_dir, f"frame_{kf.id}{ext}")
        if os.path.abspath(frames[kf.id]) != os.path.abspath(dst):
            shutil.copyfile(frames[kf.id], dst)
        kf_entries.append(
            {
                "id": kf.id,
                "t": float(kf.video_time),
                "p": [float(v) for v in kf.position],
                "q": [float(v) for v in kf.orientation],
                "frame": os.path.relpath(dst, out_dir),
            }
        )

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "mesh": "city.glb",
        "mesh_sidecar": "city_ranges.json",
        "frame_dir": "frames",
        "keyframes": kf_entries,
        "scenario": scenario_to_dict(scenario),
        "alignment": alignment or {},
        "tool_version": __version__,
    }
    jsonschema.validate(manifest, MANIFEST_SCHEMA)
    canonical_dump(manifest, os.path.join(out_dir, "manifest.json"))
    return manifest


def load_manifest(path: str) -> dict:
    """Read and validate a manifest; checks that referenced files exist."""
    with open(path) as f:
        manifest = json.load(f)
    try:
        jsonschema.validate(manifest, MANIFEST_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ExportError(f"invalid manifest: {e.message}") from e
    base = os.path.dirname(os.path.abspath(path))
    for rel in [manifest["mesh"], manifest.get("mesh_sidecar")] + [
        kf["frame"] for kf in manifest["keyframes"]
    ]:
        if rel and not os.path.exists(os.path.join(base, rel)):
            raise ExportError(f"manifest references missing file {rel}")
    # round-trippable domain objects
    scenario_from_dict(manifest["scenario"])
    return manifest


def manifest_keyframes(manifest: dict) -> list[WorldKeyframe]:
    return [
        WorldKeyframe(
            id=int(kf["id"]),
            video_time=float(kf["t"]),
            position=np.asarray(kf["p"], dtype=np.float64),
            orientation=np.asarray(kf["q"], dtype=np.float64),
        )
        for kf in manifest["keyframes"]
    ]
