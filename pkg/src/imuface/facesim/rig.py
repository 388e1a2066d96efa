"""Blendshape rig container, the procedural default rig and the rig file format."""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ZONES = ("auxiliary", "frontalis", "orbicularis_oculi", "zygomaticus", "buccinator_mentalis")
MENTALIS_SENSOR = 9
RIG_FORMAT = "imuface-rig"


class DegenerateAnchorError(ValueError):
    pass


@dataclass(frozen=True)
class Anchor:
    sensor_id: int
    vertex: int
    support: tuple[int, int]
    zone: str = ""
    name: str = ""

    def to_dict(self) -> dict:
        return {
            "sensor_id": self.sensor_id,
            "vertex": self.vertex,
            "support": list(self.support),
            "zone": self.zone,
            "name": self.name,
        }


@dataclass
class BlendshapeRig:
    neutral_vertices: np.ndarray  # (V, 3) mm
    deltas: np.ndarray  # (m, V, 3) mm
    landmark_indices: np.ndarray
    anchors: list[Anchor]
    blendshape_names: list[str] = field(default_factory=list)
    faces: np.ndarray | None = None

    def __post_init__(self):
        self.neutral_vertices = np.asarray(self.neutral_vertices, dtype=float)
        self.deltas = np.asarray(self.deltas, dtype=float)
        self.landmark_indices = np.asarray(self.landmark_indices, dtype=np.int64)
        V = len(self.neutral_vertices)
        if self.neutral_vertices.shape != (V, 3):
            raise ValueError(f"neutral_vertices must be (V, 3), got {self.neutral_vertices.shape}")
        if self.deltas.ndim != 3 or self.deltas.shape[1:] != (V, 3) or len(self.deltas) < 1:
            raise ValueError(f"deltas must be (m >= 1, {V}, 3), got {self.deltas.shape}")
        if not self.blendshape_names:
            self.blendshape_names = [f"bs{k}" for k in range(self.m)]
        if len(self.blendshape_names) != self.m:
            raise ValueError("blendshape_names length must equal m")
        if np.any((self.landmark_indices < 0) | (self.landmark_indices >= V)):
            raise ValueError("landmark index out of range")
        ids = [a.sensor_id for a in self.anchors]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate anchor sensor ids")
        for a in self.anchors:
            for v in (a.vertex, *a.support):
                if not 0 <= v < V:
                    raise ValueError(f"anchor for sensor {a.sensor_id} references vertex {v} outside 0..{V - 1}")
            p, s1, s2 = self.neutral_vertices[[a.vertex, *a.support]]
            e1, e2 = p - s1, p - s2
            n1, n2 = np.linalg.norm(e1), np.linalg.norm(e2)
            if n1 == 0 or n2 == 0 or np.linalg.norm(np.cross(e1 / n1, e2 / n2)) < 1e-9:
                raise DegenerateAnchorError(f"anchor for sensor {a.sensor_id} is collinear in the neutral mesh")
        self.anchors = sorted(self.anchors, key=lambda a: a.sensor_id)

    @property
    def m(self) -> int:
        return len(self.deltas)

    @property
    def n_vertices(self) -> int:
        return len(self.neutral_vertices)

    @property
    def sensor_ids(self) -> tuple[int, ...]:
        return tuple(a.sensor_id for a in self.anchors)

    def anchor(self, sensor_id: int) -> Anchor:
        for a in self.anchors:
            if a.sensor_id == sensor_id:
                return a
        raise KeyError(f"no anchor for sensor {sensor_id}")

    def sensors_in_zone(self, zone: str) -> list[int]:
        return [a.sensor_id for a in self.anchors if a.zone == zone]

    def channels(self, prefix: str) -> list[int]:
        return [k for k, name in enumerate(self.blendshape_names) if name.startswith(prefix)]


def _b64(arr: np.ndarray, dtype: str) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype=dtype).tobytes()).decode("ascii")


def _unb64(s: str, dtype: str, shape) -> np.ndarray:
    buf = np.frombuffer(base64.b64decode(s), dtype=dtype)
    return buf.reshape(shape).astype(float if dtype == "<f4" else np.int64)


def save_rig(rig: BlendshapeRig, path: str | Path) -> None:
    doc = {
        "format": RIG_FORMAT,
        "version": 1,
        "m": rig.m,
        "n_vertices": rig.n_vertices,
        "neutral_vertices": _b64(rig.neutral_vertices, "<f4"),
        "deltas": _b64(rig.deltas, "<f4"),
        "blendshape_names": list(rig.blendshape_names),
        "landmark_indices": [int(i) for i in rig.landmark_indices],
        "anchors": [a.to_dict() for a in rig.anchors],
    }
    if rig.faces is not None:
        doc["n_faces"] = len(rig.faces)
        doc["faces"] = _b64(rig.faces, "<i4")
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_rig(path: str | Path) -> BlendshapeRig:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != RIG_FORMAT:
        raise ValueError(f"{path}: not an {RIG_FORMAT} file")
    V, m = int(doc["n_vertices"]), int(doc["m"])
    faces = None
    if "faces" in doc:
        faces = _unb64(doc["faces"], "<i4", (int(doc["n_faces"]), 3))
    return BlendshapeRig(
        _unb64(doc["neutral_vertices"], "<f4", (V, 3)),
        _unb64(doc["deltas"], "<f4", (m, V, 3)),
        np.array(doc["landmark_indices"], dtype=np.int64),
        [
            Anchor(int(a["sensor_id"]), int(a["vertex"]), tuple(a["support"]), a.get("zone", ""), a.get("name", ""))
            for a in doc["anchors"]
        ],
        list(doc.get("blendshape_names", [])),
        faces,
    )


# Procedural default rig: a front-facing half ellipsoid with the pole at the
# nose tip. Azimuth 90 deg points up (forehead), 270 deg down (chin).
RINGS = 13
SEGMENTS = 37
SEMI_AXES = (75.0, 100.0, 60.0)  # mm: width, height, depth


def _ellipsoid_point(theta, phi):
    a, b, c = SEMI_AXES
    return np.array([a * np.sin(theta) * np.cos(phi), b * np.sin(theta) * np.sin(phi), c * np.cos(theta)])


def _ring_theta(r: float) -> float:
    return r * (np.pi / 2) / RINGS


def _vid(r: int, s: int) -> int:
    if r == 0:
        return 0
    return 1 + (r - 1) * SEGMENTS + (s % SEGMENTS)


def _seg(phi_deg: float) -> int:
    return int(round((phi_deg % 360.0) / 360.0 * SEGMENTS)) % SEGMENTS


def _bump(verts, center, radius, disp):
    d2 = np.sum((verts - center) ** 2, axis=1) / radius**2
    w = np.where(d2 < 1.0, (1.0 - d2) ** 2, 0.0)
    return w[:, None] * np.asarray(disp, dtype=float)


# (sensor id, zone, name, ring, azimuth deg)
_ANCHORS = [
    (0, "auxiliary", "aux_ear", 13, 0.0),
    (1, "frontalis", "frontalis_l", 9, 70.0),
    (2, "frontalis", "frontalis_r", 9, 110.0),
    (3, "orbicularis_oculi", "oculi_l", 5, 45.0),
    (4, "orbicularis_oculi", "oculi_r", 5, 135.0),
    (5, "zygomaticus", "zygomaticus_l", 7, 350.0),
    (6, "zygomaticus", "zygomaticus_r", 7, 190.0),
    (7, "buccinator_mentalis", "buccinator_l", 8, 325.0),
    (8, "buccinator_mentalis", "buccinator_r", 8, 215.0),
    (MENTALIS_SENSOR, "buccinator_mentalis", "mentalis", 7, 270.0),
    (10, "buccinator_mentalis", "mouth_corner_l", 5, 300.0),
    (11, "buccinator_mentalis", "mouth_corner_r", 5, 240.0),
]

# name -> list of (ring, azimuth deg, radius mm, displacement mm)
_BLENDSHAPES = {
    "browRaise": [(10, 70.0, 30.0, (0.0, 6.0, 1.0)), (10, 110.0, 30.0, (0.0, 6.0, 1.0))],
    "eyeSquint": [(4, 40.0, 22.0, (0.0, 3.0, -2.0)), (4, 140.0, 22.0, (0.0, 3.0, -2.0))],
    "smileLeft": [(6, 340.0, 28.0, (5.0, 5.0, -2.0))],
    "smileRight": [(6, 200.0, 28.0, (-5.0, 5.0, -2.0))],
    "cheekPuff": [(9, 320.0, 25.0, (4.0, 0.0, 3.0)), (9, 220.0, 25.0, (-4.0, 0.0, 3.0))],
    "jawOpen": [(9, 270.0, 40.0, (0.0, -10.0, -1.0))],
    "mouthPucker": [(4, 290.0, 20.0, (-4.0, 0.0, 3.0)), (4, 250.0, 20.0, (4.0, 0.0, 3.0))],
    "chinRaise": [(8, 270.0, 22.0, (0.0, 4.0, 3.0))],
}


def default_rig() -> BlendshapeRig:
    """Procedural 482-vertex half-ellipsoid face with 8 localized bump
    blendshapes, one auxiliary anchor and 11 facial anchors."""
    verts = [_ellipsoid_point(0.0, 0.0)]
    for r in range(1, RINGS + 1):
        for s in range(SEGMENTS):
            verts.append(_ellipsoid_point(_ring_theta(r), 2 * np.pi * s / SEGMENTS))
    verts = np.array(verts)

    faces = [(0, _vid(1, s), _vid(1, s + 1)) for s in range(SEGMENTS)]
    for r in range(2, RINGS + 1):
        for s in range(SEGMENTS):
            faces.append((_vid(r - 1, s), _vid(r, s), _vid(r, s + 1)))
            faces.append((_vid(r - 1, s), _vid(r, s + 1), _vid(r - 1, s + 1)))

    deltas = []
    for bumps in _BLENDSHAPES.values():
        d = np.zeros_like(verts)
        for ring, az, radius, disp in bumps:
            # centres snap to the segment grid, like the anchors
            phi = 2 * np.pi * _seg(az) / SEGMENTS
            d += _bump(verts, _ellipsoid_point(_ring_theta(ring), phi), radius, disp)
        deltas.append(d)

    anchors = []
    for sid, zone, name, ring, az in _ANCHORS:
        s = _seg(az)
        # (r-1, s), (r, s), (r, s+1) is a mesh face
        anchors.append(Anchor(sid, _vid(ring, s), (_vid(ring - 1, s), _vid(ring, s + 1)), zone, name))

    landmarks = [_vid(r, s) for r in range(4, 11) for s in range(0, SEGMENTS, 4)]

    # float32-representable values so the rig file round-trips exactly
    f32 = lambda a: np.asarray(a, dtype=np.float32).astype(float)  # noqa: E731
    return BlendshapeRig(
        f32(verts),
        f32(np.array(deltas)),
        np.array(landmarks),
        anchors,
        list(_BLENDSHAPES),
        np.array(faces, dtype=np.int64),
    )
