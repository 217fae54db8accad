#!/usr/bin/env python3
"""Regenerate the golden vectors under goldens/.

Any runtime that reimplements the scenario rules, camera snapping, or the
spherical projection (e.g. the browser viewer) must reproduce these files
exactly; the Python test suite pins them as regressions.
"""

from __future__ import annotations

import os

import numpy as np

from floodwalk.flood import (
    EvacuationPoint,
    EvacuationScenario,
    FloodSchedule,
    scenario_step,
    scenario_to_dict,
)
from floodwalk.ingest import DemGrid
from floodwalk.jsonio import dump as canonical_dump
from floodwalk.pipeline import WorldKeyframe, nearest_camera
from floodwalk.spherical import pixel_to_dir

OUT = os.path.join(os.path.dirname(__file__), os.pardir, "goldens")


def dem_to_dict(dem: DemGrid) -> dict:
    return {
        "origin": list(dem.origin),
        "spacing": dem.spacing,
        "ncols": dem.ncols,
        "nrows": dem.nrows,
        "nodata": dem.nodata,
        "elevation": [[float(v) for v in row] for row in dem.elevation],
    }


def make_dem() -> DemGrid:
    # 6x6 grid, 10 m spacing, sloping up toward +x with a raised corner
    elev = np.add.outer(np.zeros(6), np.linspace(0.0, 5.0, 6))
    elev[0, :] += 2.0  # northern row is higher ground
    return DemGrid(origin=(0.0, 50.0), spacing=10.0, ncols=6, nrows=6,
                   elevation=np.ascontiguousarray(elev))


def scenario_cases() -> dict:
    dem = make_dem()
    scenario = EvacuationScenario(
        evacuation_points=(
            EvacuationPoint(name="hill", position=(45.0, 45.0), radius=6.0),
            EvacuationPoint(name="tower", position=(5.0, 5.0), radius=4.0),
        ),
        time_limit=120.0,
        schedule=FloodSchedule(keyframes=((0.0, 0.0), (60.0, 2.5), (120.0, 4.0), (180.0, 3.0))),
        drown_depth=0.5,
    )
    probes = [
        # (avatar x, y, time) spanning every status and each boundary rule
        (20.0, 20.0, 0.0),      # dry at start
        (20.0, 20.0, 59.0),     # water rising, still shallow on mid slope
        (5.0, 20.0, 60.0),      # low ground goes under at first crest
        (15.0, 20.0, 30.0),     # water present but still wading depth
        (45.0, 45.0, 10.0),     # inside hill radius
        (45.0, 40.0, 10.0),     # exactly on hill radius boundary
        (5.0, 5.0, 119.0),      # tower reached just before the deadline
        (3.0, 5.0, 50.0),       # inside tower radius, center offset
        (20.0, 20.0, 121.0),    # past deadline, high-water mark exactly at drown depth
        (50.0, 20.0, 121.0),    # past deadline on high ground, survives max water
        (5.0, 20.0, 170.0),     # receding water does not help after deadline
        (25.0, 45.0, 0.0),      # higher northern row, dry
        (49.0, 45.0, 170.0),    # evacuation checked before the deadline rule
        (5.0, 20.0, 90.0),      # between schedule keyframes, interpolated
        (3.0, 3.0, 60.0),       # near grid corner, inside tower radius
        (30.0, 20.0, 60.0),     # mid slope at first crest, below drown threshold
    ]
    cases = []
    for x, y, t in probes:
        status = scenario_step(scenario, (x, y), t, dem)
        cases.append({"avatar": [x, y], "time": t, "expected": status})
    return {"dem": dem_to_dict(dem), "scenario": scenario_to_dict(scenario), "cases": cases}


def nearest_camera_cases() -> dict:
    rng = np.random.default_rng(7)
    kfs = []
    for i in range(24):
        x, y = rng.uniform(-40.0, 40.0, size=2)
        kfs.append(WorldKeyframe(
            id=i * 3,  # ids need not be contiguous
            video_time=float(i),
            position=np.array([x, y, rng.uniform(0.0, 30.0)]),
            orientation=np.array([1.0, 0.0, 0.0, 0.0]),
        ))
    cases = []
    for _ in range(40):
        avatar = rng.uniform(-50.0, 50.0, size=2)
        cases.append({
            "avatar": [float(avatar[0]), float(avatar[1])],
            "expected": nearest_camera(kfs, (float(avatar[0]), float(avatar[1]))),
        })
    # exact tie between two keyframes resolves to the lower id
    tie_kfs = [
        WorldKeyframe(id=5, video_time=0.0, position=np.array([0.0, 0.0, 0.0]),
                      orientation=np.array([1.0, 0.0, 0.0, 0.0])),
        WorldKeyframe(id=9, video_time=1.0, position=np.array([4.0, 0.0, 0.0]),
                      orientation=np.array([1.0, 0.0, 0.0, 0.0])),
    ]
    keyframes = [
        {"id": k.id, "p": [float(v) for v in k.position]} for k in kfs
    ]
    return {
        "keyframes": keyframes,
        "cases": cases,
        "tie": {
            "keyframes": [{"id": k.id, "p": [float(v) for v in k.position]} for k in tie_kfs],
            "avatar": [2.0, 7.0],
            "expected": nearest_camera(tie_kfs, (2.0, 7.0)),
        },
    }


def equirect_cases() -> dict:
    width, height = 512, 256
    rng = np.random.default_rng(11)
    us = np.concatenate([[0, width - 1, width // 2], rng.integers(0, width, 29)])
    vs = np.concatenate([[0, height - 1, height // 2], rng.integers(0, height, 29)])
    dirs = pixel_to_dir(us, vs, width, height)
    return {
        "width": width,
        "height": height,
        "cases": [
            {"u": int(u), "v": int(v), "dir": [float(c) for c in d]}
            for u, v, d in zip(us, vs, dirs)
        ],
    }


def main() -> int:
    os.makedirs(OUT, exist_ok=True)
    canonical_dump(scenario_cases(), os.path.join(OUT, "scenario_cases.json"))
    canonical_dump(nearest_camera_cases(), os.path.join(OUT, "nearest_camera_cases.json"))
    canonical_dump(equirect_cases(), os.path.join(OUT, "equirect_cases.json"))
    print(f"wrote goldens to {os.path.abspath(OUT)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
