from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_DRIFT_PPM = 1000.0


@dataclass(frozen=True)
class SensorClock:
    offset_us: float = 0.0
    drift_ppm: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.offset_us) or not np.isfinite(self.drift_ppm):
            raise ValueError("clock parameters must be finite")
        if abs(self.drift_ppm) >= MAX_DRIFT_PPM:
            raise ValueError(f"drift {self.drift_ppm:.3f} ppm exceeds +/-{MAX_DRIFT_PPM:g} ppm")

    def device_time(self, host_us):
        return np.asarray(host_us, dtype=float) * (1.0 + self.drift_ppm * 1e-6) + self.offset_us

    def host_time(self, device_us):
        return (np.asarray(device_us, dtype=float) - self.offset_us) / (1.0 + self.drift_ppm * 1e-6)


@dataclass
class ClockModel:
    """Per-sensor mapping ``device = host * (1 + drift) + offset``."""

    sensors: dict[int, SensorClock] = field(default_factory=dict)

    @classmethod
    def identity(cls, sensor_ids) -> "ClockModel":
        return cls({int(s): SensorClock() for s in sensor_ids})

    def __contains__(self, sensor_id) -> bool:
        return sensor_id in self.sensors

    def to_dict(self) -> dict:
        return {
            str(s): {"offset_us": c.offset_us, "drift_ppm": c.drift_ppm}
            for s, c in sorted(self.sensors.items())
        }


def fit_line(host, device) -> SensorClock:
    host = np.asarray(host, dtype=float)
    device = np.asarray(device, dtype=float)
    if len(host) == 0:
        raise ValueError("no sync pulses")
    if len(host) == 1 or np.ptp(host) == 0:
        return SensorClock(float(np.mean(device - host)), 0.0)
    # centred least squares keeps the intercept well conditioned
    hm, dm = host.mean(), device.mean()
    dh = host - hm
    slope = np.dot(dh, device - dm) / np.dot(dh, dh)
    return SensorClock(float(dm - slope * hm), float((slope - 1.0) * 1e6))


def estimate_clock(pulses: dict) -> ClockModel:
    """``pulses`` maps sensor id to a list of ``(host_time_us, device_timestamp_us)``."""
    if not pulses:
        raise ValueError("no sync pulses")
    model = ClockModel()
    for sid, pairs in pulses.items():
        if len(pairs) == 0:
            raise ValueError(f"no sync pulses for sensor {sid}")
        h, d = zip(*pairs)
        model.sensors[int(sid)] = fit_line(h, d)
    return model


def to_host_time(model: ClockModel, sensor_id: int, device_timestamp):
    try:
        clock = model.sensors[sensor_id]
    except KeyError:
        raise KeyError(f"clock model has no sensor {sensor_id}") from None
    return clock.host_time(device_timestamp)
