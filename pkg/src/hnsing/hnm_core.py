"""Harmonic-plus-noise analysis and additive resynthesis.

A frame is decomposed into harmonics of the fundamental below a
maximum voiced frequency (MVF) and a noise band above it.  Harmonic
amplitude and phase come from windowed discrete-spectrum evaluation at
the exact harmonic frequencies; the noise band is sampled on a 100 Hz
grid and smoothed into 20 real cepstral coefficients.  Synthesis sums
per-harmonic sinusoids with linearly interpolated parameters and
accumulated phase, plus seeded random-phase sinusoids for the noise.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal.windows import blackmanharris

from .errors import (
    BadFrameLength,
    EmptyFrames,
    EmptyGrid,
    F0OutOfRange,
    FreqOutOfRange,
    NonuniformSpacing,
    SchemaViolation,
    SpanOutOfBounds,
)
from .pitch_analysis import PITCH_MAX_HZ, PITCH_MIN_HZ, PitchCurve
from .segmentation import SegmentLabels, SyllableSegmentation, segment_syllable
from .signal_io import FRAME_LEN, HOP, Signal, ensure_pipeline_rate

NOISE_GRID_HZ = 100.0
CEPS_ORDER = 20
LOG_FLOOR_DB = -100.0
AMP_FLOOR = 10.0 ** (LOG_FLOOR_DB / 20.0)
MVF_MAX_FRACTION = 0.45
HARMONIC_PROMINENCE_DB = 6.0
MVF_MAX_CONSECUTIVE_MISSES = 2
NOISE_FADE_SAMPLES = 100

UNIT_FORMAT_VERSION = "1"


@dataclass(frozen=True, eq=False)
class HnmFrame:
    """Per-frame HNM state; ``f0 == 0`` marks an unvoiced frame."""

    time_s: float
    f0: float
    mvf: float
    amps: np.ndarray
    phases: np.ndarray
    noise_ceps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "amps", np.asarray(self.amps, dtype=np.float64))
        object.__setattr__(self, "phases", np.asarray(self.phases, dtype=np.float64))
        object.__setattr__(
            self, "noise_ceps", np.asarray(self.noise_ceps, dtype=np.float64)
        )
        if self.amps.size != self.phases.size:
            raise ValueError("amps and phases must pair up")

    @property
    def voiced(self) -> bool:
        return self.f0 > 0

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, HnmFrame)
            and self.time_s == other.time_s
            and self.f0 == other.f0
            and self.mvf == other.mvf
            and np.array_equal(self.amps, other.amps)
            and np.array_equal(self.phases, other.phases)
            and np.array_equal(self.noise_ceps, other.noise_ceps)
        )


@dataclass(frozen=True, eq=False)
class SyllableUnit:
    """One corpus syllable: segmentation plus HNM frames at a 10 ms hop."""

    pinyin: str
    segmentation: SyllableSegmentation
    frames: tuple[HnmFrame, ...]
    sample_rate: int

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SyllableUnit)
            and self.pinyin == other.pinyin
            and self.segmentation == other.segmentation
            and self.sample_rate == other.sample_rate
            and len(self.frames) == len(other.frames)
            and all(a == b for a, b in zip(self.frames, other.frames))
        )


def wrap_phase(phi):
    """Wrap into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(phi, dtype=np.float64), 2.0 * np.pi)


def spectrum_at(frame: np.ndarray, sample_rate: int, freqs) -> tuple[np.ndarray, float]:
    """Hamming-windowed spectrum evaluated at exact frequencies.

    Phase is referenced to the frame center.  Returns (complex values,
    window sum); amplitude of a sinusoid at freq f is 2|X(f)| / wsum.
    """
    x = np.asarray(frame, dtype=np.float64)
    w = np.hamming(x.size)
    t = (np.arange(x.size) - (x.size - 1) / 2.0) / sample_rate
    kernel = np.exp(-2j * np.pi * np.outer(np.atleast_1d(freqs), t))
    return kernel @ (w * x), float(w.sum())


def noise_grid(mvf: float, sample_rate: int) -> np.ndarray:
    """100 Hz grid frequencies strictly above the MVF, up to Nyquist."""
    lo = NOISE_GRID_HZ * (math.floor(mvf / NOISE_GRID_HZ) + 1)
    hi = NOISE_GRID_HZ * math.floor(sample_rate / 2 / NOISE_GRID_HZ)
    if lo > hi:
        return np.empty(0)
    return np.arange(lo, hi + NOISE_GRID_HZ / 2, NOISE_GRID_HZ)


def fit_noise_cepstrum(amps: np.ndarray, order: int = CEPS_ORDER) -> np.ndarray:
    """Cosine-series (DCT-II) coefficients of the floored log amplitudes.

    Coefficient 0 is the mean log amplitude; the series is truncated to
    ``order`` terms, which smooths the noise envelope.
    """
    amps = np.asarray(amps, dtype=np.float64)
    if amps.size == 0:
        raise EmptyGrid("no amplitudes on the noise grid")
    log_amps = np.log(np.maximum(amps, AMP_FLOOR))
    m = amps.size
    ceps = np.zeros(order)
    ceps[0] = log_amps.mean()
    n_terms = min(order, m)
    j = (2.0 * np.arange(m) + 1.0) / (2.0 * m)
    for q in range(1, n_terms):
        ceps[q] = 2.0 / m * np.dot(log_amps, np.cos(np.pi * q * j))
    return ceps


def eval_noise_envelope(ceps: np.ndarray, freq_hz, mvf: float, sample_rate: int) -> np.ndarray:
    """Noise amplitude(s) at arbitrary frequencies from the cepstral fit.

    Queries are clamped onto the fitted grid span, so the envelope holds
    its edge value outside the band it was fitted on.
    """
    freqs = np.atleast_1d(np.asarray(freq_hz, dtype=np.float64))
    if np.any(freqs < 0) or np.any(freqs > sample_rate / 2):
        raise FreqOutOfRange(f"frequency outside [0, {sample_rate / 2}] Hz")
    grid = noise_grid(mvf, sample_rate)
    if grid.size == 0:
        raise EmptyGrid("MVF leaves no noise grid to evaluate on")
    m = grid.size
    pos = np.clip((freqs - grid[0]) / NOISE_GRID_HZ, 0.0, m - 1.0)
    u = (2.0 * pos + 1.0) / (2.0 * m)
    log_amp = np.full(freqs.size, ceps[0])
    for q in range(1, len(ceps)):
        if ceps[q] != 0.0:
            log_amp += ceps[q] * np.cos(np.pi * q * u)
    out = np.exp(log_amp)
    return out if np.ndim(freq_hz) else float(out[0])


def estimate_mvf(frame: np.ndarray, f0: float, sample_rate: int) -> float:
    """Maximum voiced frequency by scanning harmonic slots upward.

    A slot k*f0 counts as harmonic when its local spectral peak (within
    +/- f0/4) clears the surrounding median by 6 dB; the MVF is the last
    harmonic slot before three consecutive misses, clamped to
    [f0, 0.45 * sample_rate].
    """
    if not PITCH_MIN_HZ <= f0 <= PITCH_MAX_HZ:
        raise F0OutOfRange(f"f0 {f0} Hz outside [{PITCH_MIN_HZ}, {PITCH_MAX_HZ}]")
    x = np.asarray(frame, dtype=np.float64)
    n_fft = 4096
    mag = np.abs(np.fft.rfft(x * np.hamming(x.size), n_fft))
    freqs = np.fft.rfftfreq(n_fft, 1.0 / sample_rate)

    ceiling = MVF_MAX_FRACTION * sample_rate
    last_pass = 1
    misses = 0
    k = 1
    while k * f0 <= ceiling:
        center = k * f0
        near = np.abs(freqs - center) <= f0 / 4
        around = (np.abs(freqs - center) <= f0) & ~near
        peak = mag[near].max(initial=0.0)
        floor = np.median(mag[around]) if np.any(around) else 0.0
        if peak > 0 and peak >= floor * 10.0 ** (HARMONIC_PROMINENCE_DB / 20.0):
            last_pass = k
            misses = 0
        else:
            misses += 1
            if misses > MVF_MAX_CONSECUTIVE_MISSES:
                break
        k += 1
    mvf = float(min(max(last_pass * f0, f0), ceiling))
    # k*f0 can round a hair below k periods of f0, which would flicker the
    # top harmonic in and out across frames; nudge until floor-division
    # recovers the slot index
    while mvf < ceiling and int(mvf // f0) < last_pass:
        mvf = float(np.nextafter(mvf, np.inf))
    return mvf


def refine_f0(frame: np.ndarray, sample_rate: int, f0_coarse: float) -> float:
    """Refine a lag-quantized f0 by maximizing spectral energy at the
    first few harmonic slots.

    Uses a Blackman-Harris window: its -92 dB sidelobes keep conjugate
    and neighbor-harmonic leakage from shifting the comb peak, which
    open-loop phase accumulation cannot afford over long steady notes.
    """
    x = np.asarray(frame, dtype=np.float64)
    w = blackmanharris(x.size, sym=True)
    t = (np.arange(x.size) - (x.size - 1) / 2.0) / sample_rate
    wx = w * x
    k_max = max(1, min(3, int(2000.0 / f0_coarse)))
    ks = np.arange(1, k_max + 1)

    def neg_comb(f):
        kernel = np.exp(-2j * np.pi * np.outer(ks * f, t))
        return -float(np.sum(np.abs(kernel @ wx) ** 2))

    width = 0.04 * f0_coarse
    res = minimize_scalar(
        neg_comb,
        bounds=(f0_coarse - width, f0_coarse + width),
        method="bounded",
        options={"xatol": 1e-6},
    )
    return float(res.x)


def analyze_frame(
    frame: np.ndarray, f0: float, sample_rate: int, time_s: float = 0.0
) -> HnmFrame:
    """HNM parameters of one 20 ms frame.

    Voiced frames get per-harmonic amplitude/phase below the estimated
    MVF plus a noise cepstrum above it; unvoiced frames (f0 == 0) put
    the whole band into the noise cepstrum.
    """
    expected = round(0.02 * sample_rate)
    if len(frame) != expected:
        raise BadFrameLength(f"need {expected} samples (20 ms), got {len(frame)}")
    if f0 == 0:
        grid = noise_grid(0.0, sample_rate)
        values, wsum = spectrum_at(frame, sample_rate, grid)
        ceps = fit_noise_cepstrum(2.0 * np.abs(values) / wsum)
        return HnmFrame(time_s, 0.0, 0.0, np.empty(0), np.empty(0), ceps)

    mvf = estimate_mvf(frame, f0, sample_rate)
    n_harm = int(mvf // f0)
    freqs = np.arange(1, n_harm + 1) * f0
    values, wsum = spectrum_at(frame, sample_rate, freqs)
    amps = 2.0 * np.abs(values) / wsum
    phases = wrap_phase(np.angle(values))

    grid = noise_grid(mvf, sample_rate)
    noise_values, _ = spectrum_at(frame, sample_rate, grid)
    ceps = fit_noise_cepstrum(2.0 * np.abs(noise_values) / wsum)
    return HnmFrame(time_s, float(f0), mvf, amps, phases, ceps)


def analyze_signal(
    signal: Signal,
    pitch: PitchCurve,
    hop: int = HOP,
    refine: bool = True,
) -> list[HnmFrame]:
    """HNM frames centered every ``hop`` samples across the signal.

    Only full 20 ms windows are analyzed, so the first frame center sits
    half a window into the signal (frame i's time_s is
    (half + i*hop)/sr).  Zero-padded edge windows would bias the very
    phases that seed the synthesis accumulator.  Voiced frames refine
    the curve's lag-quantized f0 so accumulated phase stays locked to
    the source over long stretches.
    """
    ensure_pipeline_rate(signal)
    sr = signal.sample_rate
    half = FRAME_LEN // 2
    frames = []
    for center in range(half, len(signal) - half, hop):
        window = signal.samples[center - half : center - half + FRAME_LEN]
        f0 = pitch.value_at(center / sr)
        f0 = 0.0 if math.isnan(f0) else f0
        if f0 > 0 and refine:
            f0 = refine_f0(window, sr, f0)
        frames.append(analyze_frame(window, f0, sr, time_s=center / sr))
    return frames


def _padded_window(samples: np.ndarray, start: int, length: int) -> np.ndarray:
    out = np.zeros(length)
    lo = max(start, 0)
    hi = min(start + length, samples.size)
    if hi > lo:
        out[lo - start : hi - start] = samples[lo:hi]
    return out


def analyze_syllable(
    signal: Signal,
    labels: SegmentLabels,
    index: int,
    pitch: PitchCurve,
    refine_boundaries: bool = True,
) -> SyllableUnit:
    """Analyze one labeled syllable into a corpus unit.

    The pitch curve is consulted at each frame center (absolute time);
    f0 is 0 where the curve is unvoiced.  Segmentation comes from the
    label file, with A-S-R computed from the envelope when not given.
    """
    ensure_pipeline_rate(signal)
    syllable = labels.syllables()[index]
    if syllable.start < 0 or syllable.end > len(signal):
        raise SpanOutOfBounds(
            f"syllable [{syllable.start}, {syllable.end}) outside signal "
            f"of {len(signal)} samples"
        )
    seg = segment_syllable(signal, labels, index, refine=refine_boundaries)
    sr = signal.sample_rate
    half = FRAME_LEN // 2
    span_len = syllable.end - syllable.start
    frames = []
    for rel in range(0, span_len, HOP):
        center = syllable.start + rel
        window = _padded_window(signal.samples, center - half, FRAME_LEN)
        f0 = pitch.value_at(center / sr)
        f0 = 0.0 if math.isnan(f0) else f0
        if f0 > 0:
            f0 = refine_f0(window, sr, f0)
        frames.append(analyze_frame(window, f0, sr, time_s=rel / sr))
    return SyllableUnit(syllable.text.lstrip("+"), seg, tuple(frames), sr)


def synthesize_stream(
    frames: list[HnmFrame],
    n_samples: int,
    noise_seed: int,
    sample_rate: int,
) -> Signal:
    """Additive resynthesis from uniformly spaced frames.

    Harmonic part: per-harmonic amplitude and instantaneous frequency
    interpolate linearly between frames; phase accumulates from the
    first frame's analyzed phase.  Noise part: random-phase sinusoids on
    the 100 Hz grid, regenerated per span and cross-faded over 100
    samples.  Bit-deterministic for equal seeds.  The final span may be
    shorter than the rest (a terminal control point); any other spacing
    irregularity is rejected.
    """
    if not frames:
        raise EmptyFrames("no frames to synthesize")
    if n_samples < 1:
        raise EmptyFrames("n_samples must be positive")
    t0 = frames[0].time_s
    positions = [round((f.time_s - t0) * sample_rate) for f in frames]
    diffs = np.diff(positions)
    if np.any(diffs <= 0):
        raise NonuniformSpacing("frame times must be strictly increasing")
    if diffs.size > 1 and (np.any(diffs[:-1] != diffs[0]) or diffs[-1] > diffs[0]):
        raise NonuniformSpacing(f"frame spacing not uniform: {sorted(set(diffs))}")

    harmonic = _synthesize_harmonics(frames, positions, n_samples, sample_rate)
    noise = _synthesize_noise(frames, positions, n_samples, noise_seed, sample_rate)
    return Signal(harmonic + noise, sample_rate)


def _synthesize_harmonics(frames, positions, n_samples, sample_rate) -> np.ndarray:
    out = np.zeros(n_samples)
    k_max = max(f.amps.size for f in frames)
    if k_max == 0:
        return out
    pos = np.asarray(positions, dtype=np.float64)
    f0s = np.array([f.f0 for f in frames])
    amp_tracks = np.zeros((k_max, len(frames)))
    for i, f in enumerate(frames):
        amp_tracks[: f.amps.size, i] = f.amps
    seed_phases = np.zeros(k_max)
    seed_phases[: frames[0].phases.size] = frames[0].phases

    t = np.arange(n_samples, dtype=np.float64)
    f0_per_sample = np.interp(t, pos, f0s)
    dphi = 2.0 * np.pi * f0_per_sample / sample_rate
    base_phase = np.concatenate(([0.0], np.cumsum(dphi[:-1])))
    for k in range(k_max):
        amps = np.interp(t, pos, amp_tracks[k])
        if np.any(amps != 0.0):
            out += amps * np.cos(seed_phases[k] + (k + 1) * base_phase)
    return out


def _synthesize_noise(frames, positions, n_samples, noise_seed, sample_rate) -> np.ndarray:
    out = np.zeros(n_samples)
    rng = np.random.default_rng(noise_seed)
    n_seg = len(frames)
    core_ends = [positions[i + 1] if i + 1 < n_seg else n_samples for i in range(n_seg)]
    fades = [
        min(
            NOISE_FADE_SAMPLES,
            (core_ends[i + 1] - positions[i + 1]) if i + 1 < n_seg else 0,
        )
        for i in range(n_seg)
    ]
    for i, frame in enumerate(frames):
        grid = noise_grid(frame.mvf, sample_rate)
        if grid.size == 0:
            continue
        amps = np.atleast_1d(
            eval_noise_envelope(frame.noise_ceps, grid, frame.mvf, sample_rate)
        )
        amps = np.where(amps <= AMP_FLOOR * (1.0 + 1e-9), 0.0, amps)
        if not np.any(amps):
            continue  # silent segment: no phases drawn, no samples added
        psi = rng.uniform(0.0, 2.0 * np.pi, grid.size)
        start = positions[i]
        stop = min(core_ends[i] + fades[i], n_samples)
        if start >= stop:
            continue
        t = np.arange(start, stop, dtype=np.float64)
        seg = amps @ np.cos(2.0 * np.pi * np.outer(grid, t / sample_rate) + psi[:, None])
        weights = np.ones(stop - start)
        fade_in = fades[i - 1] if i > 0 else 0
        fade_in = min(fade_in, stop - start)
        if fade_in > 0:
            weights[:fade_in] = (np.arange(fade_in) + 1.0) / fade_in
        tail = stop - core_ends[i]
        if tail > 0:
            weights[-tail:] = 1.0 - (np.arange(tail) + 1.0) / fades[i]
        out[start:stop] += weights * seg
    return out


def snr_db(reference: np.ndarray, estimate: np.ndarray, skip: int = 0) -> float:
    """Signal-to-noise ratio in dB over the overlap, skipping both edges."""
    n = min(reference.size, estimate.size)
    ref = reference[skip : n - skip]
    err = ref - estimate[skip : n - skip]
    err_power = float(np.dot(err, err))
    if err_power == 0.0:
        return math.inf
    return 10.0 * math.log10(float(np.dot(ref, ref)) / err_power)


# --- corpus unit database ---------------------------------------------------

def unit_to_dict(unit: SyllableUnit) -> dict:
    seg = unit.segmentation
    return {
        "format_version": UNIT_FORMAT_VERSION,
        "pinyin": unit.pinyin,
        "sample_rate": unit.sample_rate,
        "hop_samples": HOP,
        "segmentation": {
            "cx": list(seg.cx) if seg.cx else None,
            "a": list(seg.a),
            "s": list(seg.s),
            "r": list(seg.r),
            "cn": list(seg.cn) if seg.cn else None,
            "t_v": seg.t_v,
        },
        "frames": [
            {
                "f0": f.f0,
                "mvf": f.mvf,
                "amps": f.amps.tolist(),
                "phases": f.phases.tolist(),
                "noise_ceps": f.noise_ceps.tolist(),
            }
            for f in unit.frames
        ],
    }


def unit_from_dict(doc: dict, where: str = "unit") -> SyllableUnit:
    try:
        version = doc["format_version"]
    except (KeyError, TypeError):
        raise SchemaViolation(f"/{where}/format_version", "missing") from None
    if version != UNIT_FORMAT_VERSION:
        raise SchemaViolation(f"/{where}/format_version", f"unknown version {version!r}")
    try:
        seg_doc = doc["segmentation"]
        seg = SyllableSegmentation(
            cx=tuple(seg_doc["cx"]) if seg_doc["cx"] else None,
            a=tuple(seg_doc["a"]),
            s=tuple(seg_doc["s"]),
            r=tuple(seg_doc["r"]),
            cn=tuple(seg_doc["cn"]) if seg_doc["cn"] else None,
            t_v=float(seg_doc["t_v"]),
        )
        sr = int(doc["sample_rate"])
        hop = int(doc["hop_samples"])
        frames = tuple(
            HnmFrame(
                time_s=i * hop / sr,
                f0=float(f["f0"]),
                mvf=float(f["mvf"]),
                amps=np.asarray(f["amps"], dtype=np.float64),
                phases=np.asarray(f["phases"], dtype=np.float64),
                noise_ceps=np.asarray(f["noise_ceps"], dtype=np.float64),
            )
            for i, f in enumerate(doc["frames"])
        )
        return SyllableUnit(str(doc["pinyin"]), seg, frames, sr)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"/{where}", f"bad unit document: {exc}") from None


def save_corpus(units: list[SyllableUnit], directory) -> None:
    """Write one JSON per unit plus a manifest mapping pinyin to file."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"format_version": UNIT_FORMAT_VERSION, "units": {}}
    for unit in units:
        name = f"{unit.pinyin}.json"
        (directory / name).write_text(json.dumps(unit_to_dict(unit)))
        manifest["units"][unit.pinyin] = name
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))


def load_corpus(directory) -> dict[str, SyllableUnit]:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format_version") != UNIT_FORMAT_VERSION:
        raise SchemaViolation(
            "/format_version", f"unknown version {manifest.get('format_version')!r}"
        )
    units = {}
    for pinyin, name in manifest.get("units", {}).items():
        doc = json.loads((directory / name).read_text())
        units[pinyin] = unit_from_dict(doc, where=name)
    return units
