from .assemble import HELD, INTERPOLATED, MEASURED, FrameBuffer, SensorStream, assemble_frames
from .clock import ClockModel, SensorClock, estimate_clock, to_host_time
from .codec import (
    KIND_DATA,
    KIND_SYNC,
    KIND_TAP,
    PACKET_SIZE,
    BadCrcError,
    BadMagicError,
    BadVersionError,
    NonFiniteError,
    PacketError,
    SensorPacket,
    ShortBufferError,
    decode_packet,
    encode_packet,
)
from .ingest import (
    EmptySequenceError,
    IngestResult,
    MissingSensorError,
    bind_socket,
    ingest,
    process_datagrams,
    receive_datagrams,
)
from .replay import DEFAULT_PORT, FaultConfig, TimedPacket, plan_packets, replay
from .tap import TapEvent, TapNotFoundError, detect_tap
