"""Minimal binary glTF (.glb) export of a CityMesh.

Two primitives, Ground and Building, plus a JSON sidecar mapping triangle
ranges of the Building primitive to footprint ids.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from . import LABEL_BUILDING, LABEL_GROUND
from .citymodel import CityMesh


def _pad(data: bytes, align: int, fill: bytes) -> bytes:
    rem = len(data) % align
    return data if rem == 0 else data + fill * (align - rem)


def _primitive_arrays(mesh: CityMesh, label: int):
    sel = np.nonzero(mesh.tri_label == label)[0]
    tris = mesh.triangles[sel]
    used, inverse = np.unique(tris.ravel(), return_inverse=True)
    positions = mesh.vertices[used].astype(np.float32)
    indices = inverse.astype(np.uint32).reshape(-1, 3)
    return positions, indices, sel


def write_glb(mesh: CityMesh, path: str) -> dict:
    """Write the mesh; returns the sidecar dict (building id -> triangle ranges)."""
    buffer = b""
    buffer_views = []
    accessors = []
    primitives = []
    sidecar_ranges: list = []

    for name, label in (("Ground", LABEL_GROUND), ("Building", LABEL_BUILDING)):
        positions, indices, sel = _primitive_arrays(mesh, label)
        if len(indices) == 0:
            continue
        pos_bytes = _pad(positions.tobytes(), 4, b"\x00")
        idx_bytes = _pad(indices.tobytes(), 4, b"\x00")

        pos_view = len(buffer_views)
        buffer_views.append(
            {"buffer": 0, "byteOffset": len(buffer), "byteLength": len(pos_bytes), "target": 34962}
        )
        buffer += pos_bytes
        idx_view = len(buffer_views)
        buffer_views.append(
            {"buffer": 0, "byteOffset": len(buffer), "byteLength": len(idx_bytes), "target": 34963}
        )
        buffer += idx_bytes

        pos_acc = len(accessors)
        accessors.append(
            {
                "bufferView": pos_view,
                "componentType": 5126,
                "count": int(len(positions)),
                "type": "VEC3",
                "min": [float(v) for v in positions.min(axis=0)],
                "max": [float(v) for v in positions.max(axis=0)],
            }
        )
        idx_acc = len(accessors)
        accessors.append(
            {
                "bufferView": idx_view,
                "componentType": 5125,
                "count": int(indices.size),
                "type": "SCALAR",
            }
        )
        primitives.append(
            {
                "attributes": {"POSITION": pos_acc},
                "indices": idx_acc,
                "mode": 4,
                "extras": {"label": name},
            }
        )
        if label == LABEL_BUILDING:
            # runs of identical footprint id over the primitive's triangles
            start = 0
            for i in range(1, len(sel) + 1):
                if i == len(sel) or mesh.tri_building[sel[i]] != mesh.tri_building[sel[start]]:
                    sidecar_ranges.append(
                        {
                            "building": mesh.tri_building[sel[start]],
                            "tri_start": int(start),
                            "tri_end": int(i),
                        }
                    )
                    start = i

    doc = {
        "asset": {"version": "2.0", "generator": "floodwalk"},
        "scene": 0,
        "scenes": [{"nodes": [0]}],
        "nodes": [{"mesh": 0, "name": "city"}],
        "meshes": [{"primitives": primitives, "name": "city"}],
        "accessors": accessors,
        "bufferViews": buffer_views,
        "buffers": [{"byteLength": len(buffer)}],
    }
    json_bytes = _pad(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode(), 4, b" ")
    bin_bytes = _pad(buffer, 4, b"\x00")

    total = 12 + 8 + len(json_bytes) + 8 + len(bin_bytes)
    with open(path, "wb") as f:
        f.write(struct.pack("<III", 0x46546C67, 2, total))
        f.write(struct.pack("<II", len(json_bytes), 0x4E4F534A))
        f.write(json_bytes)
        f.write(struct.pack("<II", len(bin_bytes), 0x004E4942))
        f.write(bin_bytes)
    return {"building_ranges": sidecar_ranges}


def read_glb(path: str) -> tuple[dict, bytes]:
    """Parse a .glb into (gltf json, binary chunk); for tests and tooling."""
    with open(path, "rb") as f:
        data = f.read()
    magic, version, total = struct.unpack_from("<III", data, 0)
    if magic != 0x46546C67 or version != 2:
        raise ValueError("not a glTF 2.0 binary")
    offset = 12
    doc = None
    blob = b""
    while offset < total:
        length, ctype = struct.unpack_from("<II", data, offset)
        offset += 8
        chunk = data[offset: offset + length]
        offset += length
        if ctype == 0x4E4F534A:
            doc = json.loads(chunk.decode())
        elif ctype == 0x004E4942:
            blob = chunk
    if doc is None:
        raise ValueError("glb has no JSON chunk")
    return doc, blob
