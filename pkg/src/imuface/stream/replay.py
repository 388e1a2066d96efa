"""Simulated sensors: turn a RawSequence into a timed UDP packet stream.

Each sensor owns a device clock ``device = true * (1 + drift) + offset``. The
auxiliary sensor's clock is the reference; every ``sync_every`` frames the
auxiliary unit fires a sync pulse and each sensor (the auxiliary included)
reports a sync packet carrying the pulse index in ``seq`` and its own clock
reading at the pulse.
"""

from __future__ import annotations

import logging
import socket
import time
from dataclasses import dataclass, field

import numpy as np

from ..sequence import ImuSequence
from .codec import KIND_DATA, KIND_SYNC, SensorPacket, encode_packet

log = logging.getLogger(__name__)

DEFAULT_PORT = 47500


@dataclass
class FaultConfig:
    jitter_us: float = 0.0  # uniform +/- jitter on data and sync timestamps
    drop_pct: float = 0.0  # data packets only; sync pulses travel on a wire
    offsets_us: dict[int, float] = field(default_factory=dict)
    drifts_ppm: dict[int, float] = field(default_factory=dict)
    seed: int = 0
    sync_every: int = 30  # frames between sync pulses
    epoch_us: float = 1e6  # device clocks read this at the first frame

    def device_time(self, sensor_id: int, true_us):
        drift = self.drifts_ppm.get(sensor_id, 0.0) * 1e-6
        t = np.asarray(true_us, dtype=float)
        return self.epoch_us + t * (1.0 + drift) + self.offsets_us.get(sensor_id, 0.0)


@dataclass(frozen=True)
class TimedPacket:
    true_us: float  # send time on the reference timeline
    packet: SensorPacket


def _f32(values) -> tuple:
    return tuple(float(v) for v in np.asarray(values, dtype=np.float32))


def plan_packets(raw: ImuSequence, faults: FaultConfig | None = None) -> list[TimedPacket]:
    """Deterministic packet schedule (sync pulses and data) for a sequence."""
    faults = faults or FaultConfig()
    if faults.sync_every < 1:
        raise ValueError("sync_every must be >= 1")
    rng = np.random.default_rng(faults.seed)
    F, S = raw.n_frames, raw.n_sensors
    period = 1e6 / raw.fps
    true_us = np.arange(F) * period
    pulse_frames = np.arange(0, F, faults.sync_every)
    # draw order is fixed so a seed pins the whole schedule
    drop = rng.uniform(0.0, 100.0, (F, S)) < faults.drop_pct
    jitter = rng.uniform(-faults.jitter_us, faults.jitter_us, (F, S)) if faults.jitter_us > 0 else np.zeros((F, S))
    sync_jitter = (
        rng.uniform(-faults.jitter_us, faults.jitter_us, (len(pulse_frames), S))
        if faults.jitter_us > 0
        else np.zeros((len(pulse_frames), S))
    )
    device = np.stack([faults.device_time(sid, true_us) for sid in raw.sensor_ids], axis=1) + jitter
    sync_device = (
        np.stack([faults.device_time(sid, true_us[pulse_frames]) for sid in raw.sensor_ids], axis=1) + sync_jitter
    )
    if device.min() < 0 or (len(sync_device) and sync_device.min() < 0):
        raise ValueError("fault config produces negative device timestamps")
    device = np.round(device).astype(np.int64)
    sync_device = np.round(sync_device).astype(np.int64)

    out: list[TimedPacket] = []
    pulse = 0
    for j in range(F):
        if pulse < len(pulse_frames) and pulse_frames[pulse] == j:
            for c, sid in enumerate(raw.sensor_ids):
                out.append(TimedPacket(true_us[j], SensorPacket(sid, pulse, int(sync_device[pulse, c]), (0.0,) * 4, (0.0,) * 3, KIND_SYNC)))
            pulse += 1
        for c, sid in enumerate(raw.sensor_ids):
            if drop[j, c]:
                continue
            p = SensorPacket(sid, j, int(device[j, c]), _f32(raw.quats[j, c]), _f32(raw.accels[j, c]), KIND_DATA)
            out.append(TimedPacket(true_us[j], p))
    return out


def replay(
    raw: ImuSequence,
    endpoint: tuple[str, int] = ("127.0.0.1", DEFAULT_PORT),
    faults: FaultConfig | None = None,
    realtime: bool = True,
    speed: float = 1.0,
    pace_s: float = 2e-4,
    sock: socket.socket | None = None,
) -> int:
    """Send the planned stream over UDP; returns the number of datagrams sent.

    With ``realtime`` the reference timeline is followed at ``speed``;
    otherwise frames go out back to back with ``pace_s`` between frames so a
    loopback receiver is not overrun.
    """
    plan = plan_packets(raw, faults)
    own = sock is None
    if own:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sent = 0
    try:
        start = time.monotonic()
        last_t = None
        for tp in plan:
            if tp.true_us != last_t:
                if realtime:
                    delay = start + tp.true_us * 1e-6 / speed - time.monotonic()
                    if delay > 0:
                        time.sleep(delay)
                elif pace_s > 0 and last_t is not None:
                    time.sleep(pace_s)
                last_t = tp.true_us
            sock.sendto(encode_packet(tp.packet), endpoint)
            sent += 1
    finally:
        if own:
            sock.close()
    log.info("replayed %d datagrams to %s:%d", sent, *endpoint)
    return sent
