"""Flood surface schedule, water-depth queries and the evacuation scenario."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .citymodel import CityModelError, terrain_elevation
from .ingest import DemGrid


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class FloodSchedule:
    keyframes: tuple[tuple[float, float], ...]  # (time s, surface elevation m)

    def __post_init__(self):
        if len(self.keyframes) < 1:
            raise ScenarioError("schedule needs at least one entry")
        times = [t for t, _ in self.keyframes]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ScenarioError("schedule times must be strictly increasing")


@dataclass(frozen=True)
class EvacuationPoint:
    name: str
    position: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ScenarioError("evacuation radius must be > 0")


@dataclass(frozen=True)
class EvacuationScenario:
    evacuation_points: tuple[EvacuationPoint, ...]
    time_limit: float
    schedule: FloodSchedule
    drown_depth: float = 0.5

    def __post_init__(self):
        if self.time_limit <= 0:
            raise ScenarioError("time limit must be > 0")


STATUS_ONGOING = "Ongoing"
STATUS_OVERTAKEN = "Overtaken"


def status_evacuated(name: str) -> str:
    return f"Evacuated:{name}"


def water_elevation(schedule: FloodSchedule, t: float) -> float:
    """Piecewise-linear surface elevation, clamped to the first/last entry."""
    kfs = schedule.keyframes
    if t <= kfs[0][0]:
        return kfs[0][1]
    if t >= kfs[-1][0]:
        return kfs[-1][1]
    for (t0, z0), (t1, z1) in zip(kfs, kfs[1:]):
        if t0 <= t <= t1:
            u = (t - t0) / (t1 - t0)
            return z0 + u * (z1 - z0)
    raise AssertionError("unreachable")


def depth_at(schedule: FloodSchedule, dem: DemGrid, x, y, t: float):
    """Water depth max(0, surface - terrain); raises outside the DEM."""
    w = water_elevation(schedule, t)
    z = terrain_elevation(dem, x, y)
    return np.maximum(0.0, w - z) if isinstance(z, np.ndarray) else max(0.0, w - z)


def depth_raster(schedule: FloodSchedule, dem: DemGrid, t: float) -> np.ndarray:
    """Per-cell water depth at cell centers; nodata cells map to 0."""
    w = water_elevation(schedule, t)
    depth = np.maximum(0.0, w - dem.elevation)
    depth[dem.is_nodata(dem.elevation)] = 0.0
    return depth


def scenario_step(sc: EvacuationScenario, avatar: tuple[float, float], t: float, dem: DemGrid) -> str:
    """One scenario evaluation: evacuation check first, then flood depth."""
    if t < 0:
        raise ScenarioError("time must be >= 0")
    x, y = avatar
    for pt in sc.evacuation_points:
        if math.dist((x, y), pt.position) <= pt.radius:
            return status_evacuated(pt.name)
    try:
        terrain = terrain_elevation(dem, x, y)
    except CityModelError as e:
        raise ScenarioError(f"avatar outside DEM: {e}") from e
    surface = water_elevation(sc.schedule, t)
    if t > sc.time_limit:
        # past the deadline the avatar cannot outrun water that has already
        # been scheduled: use the highest surface reached so far
        reached = [z for ts, z in sc.schedule.keyframes if ts <= t]
        if reached:
            surface = max(surface, max(reached))
    if max(0.0, surface - terrain) >= sc.drown_depth:
        return STATUS_OVERTAKEN
    return STATUS_ONGOING


# ---------------------------------------------------------------------------
# Scenario JSON


def scenario_to_dict(sc: EvacuationScenario) -> dict:
    return {
        "points": [
            {"name": p.name, "pos": [p.position[0], p.position[1]], "radius": p.radius}
            for p in sc.evacuation_points
        ],
        "time_limit": sc.time_limit,
        "schedule": [[t, z] for t, z in sc.schedule.keyframes],
        "drown_depth": sc.drown_depth,
    }


def scenario_from_dict(doc: dict) -> EvacuationScenario:
    try:
        return EvacuationScenario(
            evacuation_points=tuple(
                EvacuationPoint(
                    name=str(p["name"]),
                    position=(float(p["pos"][0]), float(p["pos"][1])),
                    radius=float(p["radius"]),
                )
                for p in doc["points"]
            ),
            time_limit=float(doc["time_limit"]),
            schedule=FloodSchedule(
                keyframes=tuple((float(t), float(z)) for t, z in doc["schedule"])
            ),
            drown_depth=float(doc.get("drown_depth", 0.5)),
        )
    except (KeyError, IndexError, TypeError) as e:
        raise ScenarioError(f"malformed scenario document: {e}") from e


def load_scenario(path: str) -> EvacuationScenario:
    with open(path) as f:
        return scenario_from_dict(json.load(f))
