"""Waveform I/O and frame-level envelope extraction.

Audio moves through the toolkit as float64 samples in [-1, 1]; 16-bit
quantization happens only when a file is written, so gain operations
compose without repeated rounding.  Framing uses a 20 ms window with a
10 ms hop at the 22,050 Hz pipeline rate, and trailing partial frames
are dropped so curve lengths stay deterministic.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    AmplitudeOutOfRange,
    EmptySignal,
    FrameLongerThanSignal,
    MalformedRiff,
    UnsupportedFormat,
    UnsupportedRate,
)

PIPELINE_RATE = 22050
FRAME_LEN = 441  # 20 ms at the pipeline rate
HOP = 220  # 10 ms at the pipeline rate

_PCM_FULL_SCALE = 32768.0


@dataclass(frozen=True, eq=False)
class Signal:
    """A mono waveform with normalized float amplitudes."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise EmptySignal("a signal must hold at least one sample")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Signal)
            and self.sample_rate == other.sample_rate
            and np.array_equal(self.samples, other.samples)
        )


@dataclass(frozen=True, eq=False)
class EnergyCurve:
    """Per-frame scalar curve: either max |amplitude| or summed energy."""

    hop_samples: int
    frame_len_samples: int
    values: np.ndarray
    kind: str  # "max_amplitude" | "frame_energy"

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.kind not in ("max_amplitude", "frame_energy"):
            raise ValueError(f"unknown curve kind {self.kind!r}")

    def __len__(self) -> int:
        return self.values.size

    def frame_centers(self) -> np.ndarray:
        """Center sample index of each frame, relative to the curve's origin."""
        idx = np.arange(self.values.size)
        return idx * self.hop_samples + self.frame_len_samples // 2

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EnergyCurve)
            and self.hop_samples == other.hop_samples
            and self.frame_len_samples == other.frame_len_samples
            and self.kind == other.kind
            and np.array_equal(self.values, other.values)
        )


def ensure_pipeline_rate(signal: Signal) -> None:
    """Reject signals not at the 22,050 Hz pipeline rate (never resample)."""
    if signal.sample_rate != PIPELINE_RATE:
        raise UnsupportedRate(
            f"pipeline requires {PIPELINE_RATE} Hz, got {signal.sample_rate} Hz"
        )


def frame_count(n_samples: int, frame_len: int, hop: int) -> int:
    if frame_len > n_samples:
        raise FrameLongerThanSignal(f"frame {frame_len} > signal {n_samples}")
    return (n_samples - frame_len) // hop + 1


def frame_view(samples: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """(n_frames, frame_len) view of the signal; trailing partials dropped."""
    n = frame_count(samples.size, frame_len, hop)
    view = np.lib.stride_tricks.sliding_window_view(samples, frame_len)
    return view[:: hop][:n]


def read_wav(path) -> Signal:
    """Read a 16-bit PCM mono RIFF/WAVE file into normalized floats.

    Samples are divided by 32768; sample rate is whatever the header
    declares (the pipeline guard rejects non-22,050 Hz signals later).
    Unknown chunks are skipped; "fmt " and "data" are required.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedRiff("missing RIFF/WAVE signature")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size:
            raise MalformedRiff(f"chunk {cid!r} truncated")
        if cid == b"fmt ":
            if size < 16:
                raise MalformedRiff("fmt chunk shorter than 16 bytes")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            payload = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or payload is None:
        raise MalformedRiff("missing fmt or data chunk")
    audio_format, channels, rate, _byte_rate, _block_align, bits = fmt
    if audio_format != 1 or bits != 16 or channels != 1:
        raise UnsupportedFormat(
            f"need 16-bit PCM mono, got format={audio_format} "
            f"channels={channels} bits={bits}"
        )
    raw = np.frombuffer(payload[: len(payload) - (len(payload) % 2)], dtype="<i2")
    return Signal(raw.astype(np.float64) / _PCM_FULL_SCALE, int(rate))


def write_wav(signal: Signal, path) -> None:
    """Write a Signal as 16-bit PCM mono; |sample| must not exceed 1."""
    peak = np.max(np.abs(signal.samples))
    if peak > 1.0:
        raise AmplitudeOutOfRange(f"peak amplitude {peak:.6f} exceeds 1.0")
    quantized = np.clip(
        np.round(signal.samples * _PCM_FULL_SCALE), -32768, 32767
    ).astype("<i2")
    payload = quantized.tobytes()
    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 36 + len(payload)),
            b"WAVE",
            b"fmt ",
            struct.pack(
                "<IHHIIHH",
                16,
                1,
                1,
                signal.sample_rate,
                signal.sample_rate * 2,
                2,
                16,
            ),
            b"data",
            struct.pack("<I", len(payload)),
        ]
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def max_amp_envelope(signal: Signal, frame_len: int = FRAME_LEN, hop: int = HOP) -> EnergyCurve:
    """Per-frame maximum of |x|, the amplitude envelope used for A-S-R labeling."""
    frames = frame_view(signal.samples, frame_len, hop)
    return EnergyCurve(hop, frame_len, np.max(np.abs(frames), axis=1), "max_amplitude")


def frame_energy_curve(signal: Signal, frame_len: int = FRAME_LEN, hop: int = HOP) -> EnergyCurve:
    """Per-frame sum of squared samples, the voiced-part dynamics curve."""
    frames = frame_view(signal.samples, frame_len, hop)
    return EnergyCurve(hop, frame_len, np.sum(frames * frames, axis=1), "frame_energy")
