"""Receive, decode, clock-align, tap-align and assemble sensor datagrams."""

from __future__ import annotations

import logging
import socket
import time
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..facesim.rig import MENTALIS_SENSOR
from ..sequence import ImuSequence
from .assemble import FrameBuffer, SensorStream, assemble_frames
from .clock import ClockModel, SensorClock, estimate_clock
from .codec import KIND_DATA, KIND_SYNC, PacketError, decode_packet
from .replay import DEFAULT_PORT
from .tap import TapEvent, TapNotFoundError, detect_tap

log = logging.getLogger(__name__)


class MissingSensorError(LookupError):
    pass


class EmptySequenceError(LookupError):
    pass


@dataclass
class IngestResult:
    sequence: ImuSequence  # starts at the tap frame when a tap was found
    clock: ClockModel
    tap: TapEvent | None
    frames: FrameBuffer  # full assembled buffer before tap alignment
    decode_errors: Counter = field(default_factory=Counter)
    warnings: list[str] = field(default_factory=list)

    @property
    def tap_index(self) -> int | None:
        return None if self.tap is None else self.tap.index


def bind_socket(host: str = "127.0.0.1", port: int = DEFAULT_PORT, rcvbuf: int = 4 << 20) -> socket.socket:
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, rcvbuf)
        sock.bind((host, port))
    except OSError:
        sock.close()
        raise
    return sock


def receive_datagrams(
    sock: socket.socket,
    duration: float,
    idle_timeout: float = 1.0,
    on_datagram=None,
) -> list[bytes]:
    """Collect datagrams until ``duration`` seconds pass or the link has been
    idle for ``idle_timeout`` after the first datagram."""
    got: list[bytes] = []
    deadline = time.monotonic() + duration
    last = None
    while True:
        now = time.monotonic()
        if now >= deadline or (last is not None and now - last >= idle_timeout):
            break
        wait = deadline - now if last is None else min(deadline - now, idle_timeout - (now - last))
        sock.settimeout(max(wait, 1e-3))
        try:
            data, _ = sock.recvfrom(2048)
        except socket.timeout:
            continue
        last = time.monotonic()
        got.append(data)
        if on_datagram is not None:
            on_datagram(data)
    return got


def _clock_from_pulses(sync: dict[int, dict[int, int]], ids, aux_index: int, warnings: list[str]) -> ClockModel:
    ref = sync.get(aux_index, {})
    if not ref:
        warnings.append("no sync pulses from the auxiliary sensor; assuming synchronized clocks")
        return ClockModel.identity(ids)
    pulses = {}
    model = ClockModel()
    for sid in ids:
        pairs = [(ref[k], sync[sid][k]) for k in sorted(sync.get(sid, {})) if k in ref]
        if pairs:
            pulses[sid] = pairs
        else:
            warnings.append(f"no sync pulses for sensor {sid}; assuming its clock matches the reference")
            model.sensors[sid] = SensorClock()
    if pulses:
        model.sensors.update(estimate_clock(pulses).sensors)
    return model


def process_datagrams(
    datagrams,
    expected_sensors,
    aux_index: int = 0,
    tap_sensor: int = MENTALIS_SENSOR,
    fps: float = 60.0,
    tap_k: float = 8.0,
) -> IngestResult:
    errors: Counter = Counter()
    data = defaultdict(list)
    sync: dict[int, dict[int, int]] = defaultdict(dict)
    for buf in datagrams:
        try:
            p = decode_packet(buf)
        except PacketError as exc:
            errors[type(exc).__name__] += 1
            continue
        if p.kind == KIND_DATA:
            data[p.sensor_id].append(p)
        elif p.kind == KIND_SYNC:
            sync[p.sensor_id].setdefault(p.seq, p.device_timestamp_us)
    if errors:
        log.warning("skipped %d malformed datagrams: %s", sum(errors.values()), dict(errors))
    if not data:
        raise EmptySequenceError(f"no valid data packets ({sum(errors.values())} malformed)")
    expected = tuple(sorted(int(s) for s in expected_sensors))
    missing = [s for s in expected if s not in data]
    if missing:
        raise MissingSensorError(f"no data from sensors {missing}")

    warnings: list[str] = []
    clock = _clock_from_pulses(sync, expected, aux_index, warnings)
    streams = {sid: SensorStream.from_packets(data[sid]) for sid in expected}
    frames = assemble_frames(streams, clock, fps)
    seq = frames.sequence

    tap = None
    if tap_sensor in seq.sensor_ids:
        mags = np.linalg.norm(seq.accels[:, seq.column(tap_sensor)], axis=1)
        try:
            tap = detect_tap(mags, k=tap_k)
        except (TapNotFoundError, ValueError):
            tap = None
    if tap is None:
        warnings.append("no tap found; sequence is not aligned to the reference")
    else:
        seq = seq.crop(tap.index)
    for w in warnings:
        log.warning(w)
    return IngestResult(seq, clock, tap, frames, errors, warnings)


def ingest(
    sock: socket.socket,
    expected_sensors,
    duration: float,
    idle_timeout: float = 1.0,
    **kwargs,
) -> IngestResult:
    """Receive on ``sock``, then decode, clock-fit, tap-detect and assemble."""
    return process_datagrams(receive_datagrams(sock, duration, idle_timeout), expected_sensors, **kwargs)
