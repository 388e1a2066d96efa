"""Frame-indexed multi-sensor IMU sequences and their JSON-lines file format.

A file holds one frame per line::

    {"host_time_us": 16667, "sensors": [{"id": 0, "q": [w, x, y, z], "a": [ax, ay, az]}, ...]}

Assembled streams may add ``"flags"`` to each sensor entry (``measured``,
``interpolated`` or ``held``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FPS = 60.0
PROVENANCE = ("measured", "interpolated", "held")


@dataclass
class ImuSequence:
    """Per-sensor orientation/acceleration time series aligned by frame index.

    quats: (F, S, 4) scalar-first unit quaternions.
    accels: (F, S, 3) accelerations in m/s^2.
    sensor_ids: the S sensor ids, in column order.
    """

    quats: np.ndarray
    accels: np.ndarray
    sensor_ids: tuple[int, ...]
    fps: float = FPS
    times_us: np.ndarray | None = None
    flags: np.ndarray | None = None  # (F, S) indices into PROVENANCE

    def __post_init__(self):
        self.quats = np.asarray(self.quats, dtype=float)
        self.accels = np.asarray(self.accels, dtype=float)
        self.sensor_ids = tuple(int(s) for s in self.sensor_ids)
        if self.quats.ndim != 3 or self.quats.shape[-1] != 4:
            raise ValueError(f"quats must be (F, S, 4), got {self.quats.shape}")
        if self.accels.shape != self.quats.shape[:2] + (3,):
            raise ValueError(
                f"accels shape {self.accels.shape} does not match quats {self.quats.shape}"
            )
        if len(self.sensor_ids) != self.quats.shape[1]:
            raise ValueError("sensor_ids length does not match sensor axis")
        if len(set(self.sensor_ids)) != len(self.sensor_ids):
            raise ValueError("duplicate sensor ids")
        if self.times_us is None:
            self.times_us = np.round(np.arange(self.n_frames) * 1e6 / self.fps).astype(np.int64)
        else:
            self.times_us = np.asarray(self.times_us, dtype=np.int64)

    @property
    def n_frames(self) -> int:
        return self.quats.shape[0]

    @property
    def n_sensors(self) -> int:
        return self.quats.shape[1]

    def column(self, sensor_id: int) -> int:
        try:
            return self.sensor_ids.index(sensor_id)
        except ValueError:
            raise KeyError(f"sensor {sensor_id} not in sequence") from None

    def crop(self, start: int, stop: int | None = None) -> "ImuSequence":
        sl = slice(start, stop)
        return ImuSequence(
            self.quats[sl],
            self.accels[sl],
            self.sensor_ids,
            self.fps,
            self.times_us[sl],
            None if self.flags is None else self.flags[sl],
        )

    def condition_matrix(self, exclude: tuple[int, ...] = (0,)) -> np.ndarray:
        """Per-frame ``[a(3), q(4)]`` concatenated over sensors, excluding
        ``exclude`` (the auxiliary sensor by default). Shape (F, 7 * S')."""
        cols = [self.column(s) for s in self.sensor_ids if s not in exclude]
        parts = np.concatenate([self.accels[:, cols], self.quats[:, cols]], axis=-1)
        return parts.reshape(self.n_frames, -1)


RawSequence = ImuSequence
CalibratedSequence = ImuSequence


def write_jsonl(seq: ImuSequence, path: str | Path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        for j in range(seq.n_frames):
            sensors = []
            for c, sid in enumerate(seq.sensor_ids):
                entry = {
                    "id": sid,
                    "q": [float(v) for v in seq.quats[j, c]],
                    "a": [float(v) for v in seq.accels[j, c]],
                }
                if seq.flags is not None:
                    entry["flag"] = PROVENANCE[int(seq.flags[j, c])]
                sensors.append(entry)
            fh.write(json.dumps({"host_time_us": int(seq.times_us[j]), "sensors": sensors}))
            fh.write("\n")


def read_jsonl(path: str | Path, fps: float = FPS) -> ImuSequence:
    path = Path(path)
    times, quats, accels, flags = [], [], [], []
    ids: tuple[int, ...] | None = None
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                sensors = sorted(rec["sensors"], key=lambda s: s["id"])
                row_ids = tuple(int(s["id"]) for s in sensors)
                if ids is None:
                    ids = row_ids
                elif row_ids != ids:
                    raise ValueError(f"sensor set changes at line {lineno}")
                times.append(int(rec["host_time_us"]))
                quats.append([s["q"] for s in sensors])
                accels.append([s["a"] for s in sensors])
                if all("flag" in s for s in sensors):
                    flags.append([PROVENANCE.index(s["flag"]) for s in sensors])
            except (KeyError, TypeError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed frame record ({exc})") from exc
    if ids is None:
        raise ValueError(f"{path}: no frames")
    return ImuSequence(
        np.array(quats, dtype=float),
        np.array(accels, dtype=float),
        ids,
        fps,
        np.array(times, dtype=np.int64),
        np.array(flags, dtype=np.int8) if len(flags) == len(times) else None,
    )
