"""Fundamental-frequency detection and pitch-curve extraction.

Per-frame pitch combines autocorrelation R(k) with the absolute
magnitude difference function M(k): the period is the lag maximizing
R(k)/(M(k)+1) over lags spanning 60-500 Hz.  A frame is unvoiced when
(a) R(P) falls below a quarter of the frame energy, or (b) the AMDF
max/min ratio over the lag range stays under 2.  Gross octave errors
are corrected against the score key when one is active.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadFrameLength, NonPositiveInput
from .signal_io import FRAME_LEN, HOP, Signal, ensure_pipeline_rate, frame_count

PITCH_MIN_HZ = 60.0
PITCH_MAX_HZ = 500.0


@dataclass(frozen=True, eq=False)
class PitchCurve:
    """f0 per frame in Hz; NaN marks unvoiced frames.

    ``start_s`` is the center time of frame 0 relative to the span the
    curve was extracted from; frame i sits at ``start_s + i * hop_s``.
    """

    hop_s: float
    start_s: float
    f0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f0", np.asarray(self.f0, dtype=np.float64))
        if self.hop_s <= 0:
            raise ValueError("hop_s must be positive")

    def __len__(self) -> int:
        return self.f0.size

    def times(self) -> np.ndarray:
        return self.start_s + np.arange(self.f0.size) * self.hop_s

    @property
    def voiced(self) -> np.ndarray:
        return ~np.isnan(self.f0)

    @property
    def out_of_range(self) -> np.ndarray:
        """Voiced frames whose f0 left the 60-500 Hz band (e.g. after shifting)."""
        with np.errstate(invalid="ignore"):
            return self.voiced & ((self.f0 < PITCH_MIN_HZ) | (self.f0 > PITCH_MAX_HZ))

    def value_at(self, t_s: float) -> float:
        """f0 of the frame whose center is nearest to t_s (NaN if unvoiced)."""
        if self.f0.size == 0:
            return math.nan
        i = int(round((t_s - self.start_s) / self.hop_s))
        return float(self.f0[min(max(i, 0), self.f0.size - 1)])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PitchCurve)
            and self.hop_s == other.hop_s
            and self.start_s == other.start_s
            and np.array_equal(self.f0, other.f0, equal_nan=True)
        )


@dataclass(frozen=True)
class LagScores:
    """Raw R(k)/M(k) values over the searched lag range [lag_min, lag_max]."""

    r: np.ndarray
    m: np.ndarray
    energy: float
    lag_min: int


def lag_bounds(sample_rate: int) -> tuple[int, int]:
    return (
        math.ceil(sample_rate / PITCH_MAX_HZ),
        math.floor(sample_rate / PITCH_MIN_HZ),
    )


def lag_scores(frame: np.ndarray, sample_rate: int) -> LagScores:
    """Autocorrelation and AMDF over the pitch lag range, mean removed first."""
    x = np.asarray(frame, dtype=np.float64)
    x = x - x.mean()
    lag_min, lag_max = lag_bounds(sample_rate)
    energy = float(np.dot(x, x))
    full = np.correlate(x, x, mode="full")
    r = full[x.size - 1 + lag_min : x.size - 1 + lag_max + 1]
    m = np.array([np.abs(x[: x.size - k] - x[k:]).sum() for k in range(lag_min, lag_max + 1)])
    return LagScores(r=r, m=m, energy=energy, lag_min=lag_min)


def detect_pitch_frame(frame: np.ndarray, sample_rate: int) -> float | None:
    """f0 of one 20 ms frame, or None when the frame is judged unvoiced."""
    expected = round(0.02 * sample_rate)
    if len(frame) != expected:
        raise BadFrameLength(f"need {expected} samples (20 ms), got {len(frame)}")
    scores = lag_scores(frame, sample_rate)
    m_max = float(scores.m.max(initial=0.0))
    if scores.energy <= 0.0 or m_max == 0.0:
        return None
    best = int(np.argmax(scores.r / (scores.m + 1.0)))
    lag = scores.lag_min + best
    if scores.r[best] < scores.energy / 4.0:  # criterion (a)
        return None
    m_min = float(scores.m.min())
    if m_min > 0.0 and m_max / m_min < 2.0:  # criterion (b)
        return None
    return sample_rate / lag


def correct_octave(f0: float, guide_hz: float) -> float:
    """Snap f0 to the octave of the score key: pick the nearest of
    {f0/2, f0, 2*f0} in log-frequency distance, staying inside 60-500 Hz."""
    if f0 <= 0 or guide_hz <= 0:
        raise NonPositiveInput(f"f0={f0}, guide={guide_hz}")
    candidates = [c for c in (f0 / 2.0, f0, 2.0 * f0) if PITCH_MIN_HZ <= c <= PITCH_MAX_HZ]
    if not candidates:
        return min(max(f0, PITCH_MIN_HZ), PITCH_MAX_HZ)
    log_guide = math.log2(guide_hz)
    # ties resolve toward the uncorrected value
    return min(candidates, key=lambda c: (abs(math.log2(c) - log_guide), c != f0))


def extract_pitch_curve(
    signal: Signal,
    guide: np.ndarray | None = None,
    frame_len: int = FRAME_LEN,
    hop: int = HOP,
) -> PitchCurve:
    """Frame-level pitch curve at a 10 ms hop with octave correction.

    ``guide`` optionally carries one score frequency per frame (NaN for
    frames in score gaps); voiced frames with a guide are snapped to the
    guide's octave.
    """
    ensure_pipeline_rate(signal)
    n = frame_count(len(signal), frame_len, hop)
    f0 = np.full(n, np.nan)
    for i in range(n):
        frame = signal.samples[i * hop : i * hop + frame_len]
        value = detect_pitch_frame(frame, signal.sample_rate)
        if value is None:
            continue
        if guide is not None and i < len(guide) and np.isfinite(guide[i]):
            value = correct_octave(value, float(guide[i]))
        f0[i] = value
    sr = signal.sample_rate
    return PitchCurve(hop_s=hop / sr, start_s=(frame_len // 2) / sr, f0=f0)
