"""Bit-exact sensor datagram codec.

Layout (little-endian, 47 bytes)::

    offset size field
    0      2    magic 0xFA 0xCE
    2      1    version (1)
    3      1    kind (0 data, 1 sync pulse, 2 tap marker, reserved)
    4      1    sensor_id
    5      4    seq (u32)
    9      8    device_timestamp_us (u64)
    17     16   qw qx qy qz (f32)
    33     12   ax ay az (f32, m/s^2)
    45     2    crc16 CCITT (poly 0x1021, init 0xFFFF) over bytes 0..44
"""

from __future__ import annotations

import binascii
import math
import struct
from dataclasses import dataclass

MAGIC = b"\xfa\xce"
VERSION = 1
KIND_DATA = 0
KIND_SYNC = 1
KIND_TAP = 2
KINDS = (KIND_DATA, KIND_SYNC, KIND_TAP)

_BODY = struct.Struct("<2sBBBIQ7f")
_CRC = struct.Struct("<H")
PACKET_SIZE = _BODY.size + _CRC.size
QUAT_UNIT_TOL = 1e-3


class PacketError(ValueError):
    pass


class ShortBufferError(PacketError):
    pass


class BadMagicError(PacketError):
    pass


class BadCrcError(PacketError):
    pass


class BadVersionError(PacketError):
    pass


class NonFiniteError(PacketError):
    pass


def crc16(data: bytes) -> int:
    return binascii.crc_hqx(data, 0xFFFF)


@dataclass(frozen=True)
class SensorPacket:
    sensor_id: int
    seq: int
    device_timestamp_us: int
    q: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    a: tuple[float, float, float] = (0.0, 0.0, 0.0)
    kind: int = KIND_DATA
    version: int = VERSION


def encode_packet(p: SensorPacket) -> bytes:
    if p.kind not in KINDS:
        raise PacketError(f"unknown packet kind {p.kind}")
    floats = tuple(p.q) + tuple(p.a)
    if len(floats) != 7:
        raise PacketError("packet needs 4 quaternion and 3 acceleration components")
    if not all(math.isfinite(v) for v in floats):
        raise NonFiniteError("non-finite quaternion or acceleration value")
    try:
        body = _BODY.pack(MAGIC, p.version, p.kind, p.sensor_id, p.seq, p.device_timestamp_us, *floats)
    except struct.error as exc:
        raise PacketError(f"field out of range: {exc}") from None
    return body + _CRC.pack(crc16(body))


def decode_packet(buf: bytes) -> SensorPacket:
    if len(buf) < PACKET_SIZE:
        raise ShortBufferError(f"packet is {len(buf)} bytes, expected {PACKET_SIZE}")
    if len(buf) > PACKET_SIZE:
        raise PacketError(f"packet is {len(buf)} bytes, expected {PACKET_SIZE}")
    if buf[:2] != MAGIC:
        raise BadMagicError(f"bad magic {buf[:2].hex()}")
    body = bytes(buf[: _BODY.size])
    (crc,) = _CRC.unpack_from(buf, _BODY.size)
    if crc != crc16(body):
        raise BadCrcError(f"crc mismatch: got {crc:#06x}, computed {crc16(body):#06x}")
    _, version, kind, sid, seq, ts, *floats = _BODY.unpack(body)
    if version != VERSION:
        raise BadVersionError(f"unsupported version {version}")
    if kind not in KINDS:
        raise PacketError(f"unknown packet kind {kind}")
    if not all(math.isfinite(v) for v in floats):
        raise NonFiniteError("non-finite quaternion or acceleration value")
    q, a = tuple(floats[:4]), tuple(floats[4:])
    if kind == KIND_DATA and abs(math.sqrt(sum(v * v for v in q)) - 1.0) > QUAT_UNIT_TOL:
        raise PacketError("data packet quaternion is not unit length")
    return SensorPacket(sid, seq, ts, q, a, kind, version)
