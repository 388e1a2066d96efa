from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class TapNotFoundError(LookupError):
    pass


@dataclass(frozen=True)
class TapEvent:
    index: int
    peak: float


def detect_tap(
    magnitudes,
    k: float = 8.0,
    baseline: int = 30,
    min_mad: float = 0.05,
) -> TapEvent:
    """First frame whose acceleration magnitude departs from the baseline
    median by more than ``k`` baseline MADs.

    The baseline is the first ``baseline`` frames. ``min_mad`` (m/s^2) floors
    the MAD so a noiseless lead-in does not turn every small motion into a tap.
    """
    x = np.asarray(magnitudes, dtype=float)
    if x.ndim == 2:
        x = np.linalg.norm(x, axis=1)
    if len(x) < baseline:
        raise ValueError(f"need at least {baseline} frames of pre-tap baseline, got {len(x)}")
    base = x[:baseline]
    med = np.median(base)
    mad = max(np.median(np.abs(base - med)), min_mad)
    above = np.abs(x - med) > k * mad
    hits = np.flatnonzero(above)
    if len(hits) == 0:
        raise TapNotFoundError("no tap found")
    i = int(hits[0])
    end = i
    while end + 1 < len(x) and above[end + 1]:
        end += 1
    return TapEvent(i, float(x[i : end + 1].max()))
