"""Resampling per-sensor packet streams onto the common 60 fps host grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geom import quat_normalize, slerp
from ..sequence import ImuSequence
from .clock import ClockModel, to_host_time
from .codec import KIND_DATA, SensorPacket

MEASURED, INTERPOLATED, HELD = 0, 1, 2


@dataclass
class SensorStream:
    """Time-ordered samples of one sensor (device clock)."""

    device_us: np.ndarray  # (N,)
    quats: np.ndarray  # (N, 4)
    accels: np.ndarray  # (N, 3)
    seq: np.ndarray  # (N,)

    @classmethod
    def from_packets(cls, packets) -> "SensorStream":
        """Orders by ``seq``; a duplicated ``seq`` keeps the first arrival."""
        seen: dict[int, SensorPacket] = {}
        for p in packets:
            if p.kind == KIND_DATA and p.seq not in seen:
                seen[p.seq] = p
        ordered = [seen[s] for s in sorted(seen)]
        return cls(
            np.array([p.device_timestamp_us for p in ordered], dtype=float),
            np.array([p.q for p in ordered], dtype=float).reshape(-1, 4),
            np.array([p.a for p in ordered], dtype=float).reshape(-1, 3),
            np.array([p.seq for p in ordered], dtype=np.int64),
        )

    def __len__(self) -> int:
        return len(self.device_us)


@dataclass
class FrameBuffer:
    sequence: ImuSequence  # flags carry per-slot provenance
    t0_us: float
    period_us: float

    @property
    def grid_us(self) -> np.ndarray:
        return self.t0_us + np.arange(self.sequence.n_frames) * self.period_us


def _resample(host, quats, accels, grid, period, max_gap, tol):
    G = len(grid)
    q_out = np.empty((G, 4))
    a_out = np.empty((G, 3))
    flags = np.empty(G, dtype=np.int8)
    right = np.searchsorted(host, grid)  # first sample >= grid point
    left = right - 1
    n = len(host)
    for k, g in enumerate(grid):
        r, l = right[k], left[k]
        # nearest sample within tolerance counts as measured
        best = None
        for c in (l, r):
            if 0 <= c < n and abs(host[c] - g) <= tol:
                if best is None or abs(host[c] - g) < abs(host[best] - g):
                    best = c
        if best is not None:
            q_out[k], a_out[k], flags[k] = quats[best], accels[best], MEASURED
        elif 0 <= l and r < n and host[r] - host[l] <= max_gap * period + tol:
            f = (g - host[l]) / (host[r] - host[l])
            q_out[k] = slerp(quats[l], quats[r], f)
            a_out[k] = (1.0 - f) * accels[l] + f * accels[r]
            flags[k] = INTERPOLATED
        else:
            c = l if l >= 0 else 0
            q_out[k], a_out[k], flags[k] = quats[c], accels[c], HELD
    return q_out, a_out, flags


def assemble_frames(
    streams: dict[int, SensorStream],
    clock: ClockModel,
    fps: float = 60.0,
    max_gap_periods: float = 3.0,
    measured_tol_us: float = 1000.0,
) -> FrameBuffer:
    """Resample every sensor onto ``t0 + k / fps``.

    Orientation is slerped and acceleration linearly interpolated between the
    bracketing samples; gaps wider than ``max_gap_periods`` frame periods are
    filled by holding the last sample (``held``).
    """
    if not streams:
        raise ValueError("no sensor streams")
    ids = tuple(sorted(streams))
    host = {}
    for sid in ids:
        s = streams[sid]
        if len(s) == 0:
            raise ValueError(f"empty stream for sensor {sid}")
        if sid not in clock:
            raise KeyError(f"clock model has no sensor {sid}")
        h = to_host_time(clock, sid, s.device_us)
        order = np.argsort(h, kind="stable")
        host[sid] = (h[order], s.quats[order], s.accels[order])
    period = 1e6 / fps
    t0 = min(h[0] for h, _, _ in host.values())
    t_end = max(h[-1] for h, _, _ in host.values())
    n_frames = int(np.floor((t_end - t0) / period + 0.5)) + 1
    grid = t0 + np.arange(n_frames) * period

    Q = np.empty((n_frames, len(ids), 4))
    A = np.empty((n_frames, len(ids), 3))
    flags = np.empty((n_frames, len(ids)), dtype=np.int8)
    for c, sid in enumerate(ids):
        h, q, a = host[sid]
        Q[:, c], A[:, c], flags[:, c] = _resample(h, q, a, grid, period, max_gap_periods, measured_tol_us)
    seq = ImuSequence(quat_normalize(Q), A, ids, fps, np.round(grid).astype(np.int64), flags)
    return FrameBuffer(seq, float(t0), period)
