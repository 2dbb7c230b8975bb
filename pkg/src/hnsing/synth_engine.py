"""Expressive syllable rendering and phrase assembly.

Rendering maps corpus-unit time onto the planned target segments, walks
a 100-sample control-point grid, interpolates HNM parameters at each
point, retunes every voiced point to the target pitch with
envelope-preserving spline resampling, and resynthesizes.  Phrase
assembly anchors each syllable's vowel onset at its score time plus the
sung onset deviation, cross-fading voiced transitions and overlapping
fricative initials.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    AlignmentMismatch,
    LyricMismatch,
    NonMonotoneOnsets,
    NonPositiveTargetDuration,
    OutOfSpan,
    RetuneCollapse,
    SegmentSetMismatch,
    TargetF0OutOfRange,
    UnvoicedFrame,
)
from .expression import ExpressionParams, SlidingSub
from .hnm_core import HnmFrame, SyllableUnit, synthesize_stream, wrap_phase
from .pitch_analysis import PITCH_MAX_HZ, PITCH_MIN_HZ, PitchCurve
from .score_model import MergedNote, ScoredSyllable, key_to_hz
from .segmentation import InitialCategory, SyllableSegmentation, classify_initial
from .signal_io import FRAME_LEN, HOP, EnergyCurve, Signal, frame_energy_curve

CONTROL_SPACING = 100  # samples, 4.54 ms at 22,050 Hz
CROSSFADE_RATIO = 0.10
CROSSFADE_CAP_S = 0.05
FRICATIVE_OVERLAP_S = 0.02
DYNAMICS_GAIN_MAX = 8.0
DYNAMICS_ENERGY_FLOOR = 1e-9
PEAK_NORM_TARGET = 0.89  # -1 dBFS, applied only when the phrase clips


@dataclass(frozen=True)
class TimeMap:
    """Piecewise-affine map between source and target segment spans."""

    pairs: tuple[tuple[tuple[int, int], tuple[int, int]], ...]

    @property
    def target_end(self) -> int:
        return self.pairs[-1][1][1]

    def to_source(self, t_target: float) -> float:
        if not 0 <= t_target <= self.target_end:
            raise OutOfSpan(f"t={t_target} outside [0, {self.target_end}]")
        for (x0, x1), (y0, y1) in self.pairs:
            if y0 <= t_target < y1 or (t_target == y1 == self.target_end):
                if y1 == y0:
                    return float(x0)
                return x0 + (t_target - y0) * (x1 - x0) / (y1 - y0)
        # only zero-length trailing spans can fall through
        return float(self.pairs[-1][0][1])


def build_time_map(source: SyllableSegmentation, target: SyllableSegmentation) -> TimeMap:
    """Pair up the present segments of source and target affinely.

    Segment boundaries map to each other exactly; a query inside a
    target segment lands proportionally inside the matching source one.
    """
    src = source.present()
    tgt = target.present()
    if [n for n, _ in src] != [n for n, _ in tgt]:
        raise SegmentSetMismatch(
            f"source has {[n for n, _ in src]}, target has {[n for n, _ in tgt]}"
        )
    return TimeMap(tuple((s, t) for (_, s), (_, t) in zip(src, tgt)))


def plan_plain_targets(
    syllable: ScoredSyllable,
    unit: SyllableUnit,
    proportional: bool = False,
) -> SyllableSegmentation:
    """Target segmentation for synthesis without expression parameters.

    By default every segment keeps its corpus duration and the sustain
    absorbs the remaining note length; when the note is too short for
    that (or ``proportional`` is set) all segments scale by the same
    ratio.
    """
    sr = unit.sample_rate
    duration = syllable.note.t_off - syllable.note.t_on
    target_len = round(duration * sr)
    if target_len <= 0:
        raise NonPositiveTargetDuration(f"note duration {duration:.6f}s")

    src = unit.segmentation
    names = [n for n, _ in src.present()]
    lens = {n: sp[1] - sp[0] for n, sp in src.present()}
    non_s = sum(v for n, v in lens.items() if n != "s")

    if proportional or target_len - non_s < 1:
        total = sum(lens.values())
        cum = 0
        bounds = [0]
        for n in names:
            cum += lens[n]
            bounds.append(round(target_len * cum / total))
    else:
        new_lens = dict(lens)
        new_lens["s"] = target_len - non_s
        bounds = [0]
        for n in names:
            bounds.append(bounds[-1] + new_lens[n])

    spans = {n: (bounds[i], bounds[i + 1]) for i, n in enumerate(names)}
    return SyllableSegmentation.from_spans(
        spans.get("cx"), spans["a"], spans["s"], spans["r"], spans.get("cn"), sr
    )


def place_control_points(target_len: int) -> np.ndarray:
    """Control points every 100 samples plus a terminal point at the end."""
    positions = list(range(0, target_len, CONTROL_SPACING))
    if positions[-1] != target_len - 1:
        positions.append(target_len - 1)
    return np.asarray(positions)


def sample_hnm_at(unit: SyllableUnit, tmap: TimeMap, t_target: int) -> HnmFrame:
    """HNM parameters at one target sample by linear interpolation of the
    two source frames bracketing the mapped source time.

    Harmonic lists of unequal length are zero-padded before
    interpolation; phase is taken from the nearer frame (synthesis
    re-derives phase by accumulation anyway).
    """
    x = tmap.to_source(t_target)
    frames = unit.frames
    j = x / HOP
    j0 = min(max(int(math.floor(j)), 0), len(frames) - 1)
    j1 = min(j0 + 1, len(frames) - 1)
    w = min(max(j - j0, 0.0), 1.0)
    fa, fb = frames[j0], frames[j1]

    k_max = max(fa.amps.size, fb.amps.size)
    amps_a = np.zeros(k_max)
    amps_a[: fa.amps.size] = fa.amps
    amps_b = np.zeros(k_max)
    amps_b[: fb.amps.size] = fb.amps
    nearer = fa if w < 0.5 else fb
    phases = np.zeros(k_max)
    phases[: nearer.phases.size] = nearer.phases

    sr = unit.sample_rate
    return HnmFrame(
        time_s=t_target / sr,
        f0=(1 - w) * fa.f0 + w * fb.f0,
        mvf=(1 - w) * fa.mvf + w * fb.mvf,
        amps=(1 - w) * amps_a + w * amps_b,
        phases=phases,
        noise_ceps=(1 - w) * fa.noise_ceps + w * fb.noise_ceps,
    )


def _envelope_interp(knots_x: np.ndarray, knots_y: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Cubic-spline envelope through the knots, held flat past the ends."""
    q = np.clip(query, knots_x[0], knots_x[-1])
    if knots_x.size >= 3:
        return CubicSpline(knots_x, knots_y, bc_type="natural")(q)
    if knots_x.size == 2:
        return np.interp(q, knots_x, knots_y)
    return np.full(q.size, knots_y[0])


def retune_frame(frame: HnmFrame, target_f0: float) -> HnmFrame:
    """Move a voiced frame to a new fundamental, preserving its envelope.

    Amplitude and unwrapped-phase envelopes are rebuilt through the
    measured harmonics by cubic spline and resampled at multiples of the
    target pitch; shifting the harmonics without this resampling would
    shift the spectral envelope (formants) along with them.
    """
    if not frame.voiced:
        raise UnvoicedFrame("cannot retune an unvoiced frame")
    if not PITCH_MIN_HZ <= target_f0 <= PITCH_MAX_HZ:
        raise TargetF0OutOfRange(f"{target_f0} Hz outside [60, 500]")
    n_harm = int(frame.mvf // target_f0)
    if n_harm < 1:
        raise RetuneCollapse(
            f"target {target_f0} Hz leaves no harmonic below MVF {frame.mvf} Hz"
        )
    src_freqs = np.arange(1, frame.amps.size + 1) * frame.f0
    new_freqs = np.arange(1, n_harm + 1) * target_f0
    amps = np.maximum(_envelope_interp(src_freqs, frame.amps, new_freqs), 0.0)
    unwrapped = np.unwrap(frame.phases)
    phases = wrap_phase(_envelope_interp(src_freqs, unwrapped, new_freqs))
    return HnmFrame(frame.time_s, float(target_f0), frame.mvf, amps, phases, frame.noise_ceps)


def pitch_shift_curve(curve: PitchCurve, k: int) -> PitchCurve:
    """Shift every voiced value by k semitones (factor 2^(k/12)).

    Values leaving the 60-500 Hz band are flagged (``out_of_range``),
    never clamped.
    """
    shifted = PitchCurve(curve.hop_s, curve.start_s, curve.f0 * 2.0 ** (k / 12.0))
    if np.any(shifted.out_of_range):
        warnings.warn(
            f"pitch shift by {k} semitones pushed "
            f"{int(shifted.out_of_range.sum())} frame(s) outside 60-500 Hz",
            stacklevel=2,
        )
    return shifted


def transpose_expression(expr: ExpressionParams, k: int) -> ExpressionParams:
    """Whole-syllable transposition: note keys and pitch curve move together."""
    if k == 0:
        return expr
    note = MergedNote.from_sub_notes(
        (key + k, on, off) for key, on, off in expr.note.sub_notes
    )
    return ExpressionParams(
        lyric=expr.lyric,
        note=note,
        pitch_curve=pitch_shift_curve(expr.pitch_curve, k),
        energy_curve=expr.energy_curve,
        unvoiced_peak=expr.unvoiced_peak,
        segmentation=expr.segmentation,
        t_v=expr.t_v,
        onset_dev=expr.onset_dev,
        sliding=expr.sliding,
    )


@dataclass
class RenderedSyllable:
    """One synthesized syllable plus the bookkeeping joins need."""

    samples: Signal
    vowel_onset_sample: int
    pre_roll_samples: int
    join_kind_prev: str = "pause"
    join_kind_next: str = "pause"
    ext_head: int = 0
    ext_tail: int = 0
    segmentation: SyllableSegmentation | None = None
    debug_rows: list | None = None


def plain_pitch_curve(note: MergedNote, target_len: int, sample_rate: int) -> PitchCurve:
    """Type-III pitch plan: constant key per sub-note, linear ramps across
    the portamento overlap zones, sampled on the 10 ms frame grid."""
    duration = note.t_off - note.t_on
    points_t = [0.0]
    points_hz = [key_to_hz(note.sub_notes[0][0])]
    for (k0, _, off0), (k1, on1, _) in zip(note.sub_notes, note.sub_notes[1:]):
        zone_lo = max(on1 - note.t_on, points_t[-1])
        zone_hi = max(min(off0 - note.t_on, duration), zone_lo)
        points_t.extend([zone_lo, zone_hi])
        points_hz.extend([key_to_hz(k0), key_to_hz(k1)])
    points_t.append(duration)
    points_hz.append(key_to_hz(note.sub_notes[-1][0]))

    n = max(0, (target_len - FRAME_LEN) // HOP + 1) if target_len >= FRAME_LEN else 0
    centers = (FRAME_LEN // 2 + np.arange(n) * HOP) / sample_rate
    f0 = np.interp(centers, points_t, points_hz)
    return PitchCurve(HOP / sample_rate, (FRAME_LEN // 2) / sample_rate, f0)


def plain_expression(
    scored: ScoredSyllable, unit: SyllableUnit, proportional: bool = False
) -> ExpressionParams:
    """Expression bundle for Type-III synthesis, derived from score alone."""
    sr = unit.sample_rate
    seg = plan_plain_targets(scored, unit, proportional=proportional)
    target_len = seg.end
    n_energy = max(0, (target_len - FRAME_LEN) // HOP + 1) if target_len >= FRAME_LEN else 0
    t_v = scored.note.t_on + seg.a[0] / sr
    return ExpressionParams(
        lyric=scored.lyric,
        note=scored.note,
        pitch_curve=plain_pitch_curve(scored.note, target_len, sr),
        energy_curve=EnergyCurve(HOP, FRAME_LEN, np.zeros(n_energy), "frame_energy"),
        unvoiced_peak=0.0,
        segmentation=seg,
        t_v=t_v,
        onset_dev=t_v - scored.note.t_on,
    )


def _extend_segmentation(
    seg: SyllableSegmentation, ext_head: int, ext_tail: int, sample_rate: int
) -> SyllableSegmentation:
    spans = dict(seg.present())
    names = list(spans)
    if ext_head:
        first = names[0]
        spans = {n: (s + ext_head, e + ext_head) for n, (s, e) in spans.items()}
        spans[first] = (0, spans[first][1])
    if ext_tail:
        last = names[-1]
        s, e = spans[last]
        spans[last] = (s, e + ext_tail)
    return SyllableSegmentation.from_spans(
        spans.get("cx"), spans["a"], spans["s"], spans["r"], spans.get("cn"), sample_rate
    )


def _target_f0_at(curve: PitchCurve, times: np.ndarray) -> np.ndarray:
    """Cubic-spline pitch at arbitrary times; NaN where the nearest curve
    frame is unvoiced or the curve is empty."""
    out = np.full(times.size, np.nan)
    if len(curve) == 0:
        return out
    voiced = curve.voiced
    n_voiced = int(voiced.sum())
    if n_voiced == 0:
        return out
    knot_t = curve.times()[voiced]
    knot_f = curve.f0[voiced]
    if n_voiced >= 3:
        spline = CubicSpline(knot_t, knot_f, bc_type="natural")
        values = spline(np.clip(times, knot_t[0], knot_t[-1]))
    elif n_voiced == 2:
        values = np.interp(times, knot_t, knot_f)
    else:
        values = np.full(times.size, knot_f[0])
    nearest = np.clip(
        np.round((times - curve.start_s) / curve.hop_s).astype(int), 0, len(curve) - 1
    )
    mask = voiced[nearest]
    out[mask] = np.clip(values[mask], PITCH_MIN_HZ, PITCH_MAX_HZ)
    return out


def render_syllable(
    unit: SyllableUnit,
    expr: ExpressionParams,
    mode: str,
    noise_seed: int,
    ext_head: int = 0,
    ext_tail: int = 0,
) -> RenderedSyllable:
    """Render one musical syllable from its corpus unit.

    Expressive mode drives target boundaries and pitch from the
    expression bundle; plain mode keeps the bundle's planned boundaries
    but pitches every voiced point from the score keys (with linear
    portamento ramps).  Optional head/tail extensions stretch the outer
    segments for co-articulation cross-fades planned by the caller.
    """
    if mode not in ("expressive", "plain"):
        raise ValueError(f"unknown mode {mode!r}")
    if unit.pinyin != expr.lyric.lstrip("+"):
        raise LyricMismatch(f"unit {unit.pinyin!r} vs lyric {expr.lyric!r}")
    sr = unit.sample_rate
    base_seg = expr.segmentation
    target_seg = _extend_segmentation(base_seg, ext_head, ext_tail, sr)
    target_len = target_seg.end
    tmap = build_time_map(unit.segmentation, target_seg)

    if mode == "plain":
        curve = plain_pitch_curve(expr.note, base_seg.end, sr)
    else:
        curve = expr.pitch_curve

    cps = place_control_points(target_len)
    curve_times = np.clip((cps - ext_head) / sr, 0.0, max(base_seg.end - 1, 0) / sr)
    cp_f0 = _target_f0_at(curve, curve_times)

    frames = []
    debug_rows = []
    for pos, f0_target in zip(cps, cp_f0):
        frame = sample_hnm_at(unit, tmap, int(pos))
        # V/UV boundary frames interpolate toward mvf 0; they are fading
        # out and stay unretuned rather than collapsing
        if (
            frame.voiced
            and not math.isnan(f0_target)
            and int(frame.mvf // f0_target) >= 1
        ):
            frame = retune_frame(frame, float(f0_target))
        frames.append(frame)
        debug_rows.append((int(pos), frame.f0))
    samples = synthesize_stream(frames, target_len, noise_seed, sr)
    anchor = ext_head + base_seg.a[0]
    return RenderedSyllable(
        samples=samples,
        vowel_onset_sample=anchor,
        pre_roll_samples=max(0, anchor - round(expr.onset_dev * sr)),
        ext_head=ext_head,
        ext_tail=ext_tail,
        segmentation=target_seg,
        debug_rows=debug_rows,
    )


def _dynamics_gains(samples: np.ndarray, seg: SyllableSegmentation, expr: ExpressionParams, sr: int) -> np.ndarray:
    length = seg.end
    gains = np.ones(length)
    if length >= FRAME_LEN and len(expr.energy_curve):
        synth_curve = frame_energy_curve(Signal(samples, sr))
        cps = place_control_points(length)
        target = np.interp(
            cps, expr.energy_curve.frame_centers(), expr.energy_curve.values
        )
        synth = np.interp(cps, synth_curve.frame_centers(), synth_curve.values)
        g = np.sqrt(target / np.maximum(synth, DYNAMICS_ENERGY_FLOOR))
        g = np.clip(g, 0.0, DYNAMICS_GAIN_MAX)
        gains = np.interp(np.arange(length), cps, g)

    category = classify_initial(expr.lyric)
    if seg.cx and category in (InitialCategory.STOP, InitialCategory.FRICATIVE):
        lo, hi = seg.cx
        rendered_peak = float(np.max(np.abs(samples[lo:hi]))) if hi > lo else 0.0
        scale = (
            expr.unvoiced_peak / rendered_peak
            if rendered_peak > 0 and expr.unvoiced_peak > 0
            else 1.0
        )
        gains[lo:hi] = scale
    return gains


def apply_dynamics(
    samples: Signal, seg: SyllableSegmentation, expr: ExpressionParams
) -> Signal:
    """Match the rendered dynamics to the analyzed target.

    Voiced-part gains are sqrt(target energy / synthesized energy) at
    each control point, linearly interpolated between points and clamped
    to [0, 8]; a stop/fricative initial is scaled uniformly so its peak
    equals the recorded unvoiced peak.  Cross-fade extensions are
    handled later by the join's linear ramps.
    """
    if len(samples) != seg.end:
        raise AlignmentMismatch(
            f"rendered {len(samples)} samples vs segmentation span {seg.end}"
        )
    gains = _dynamics_gains(samples.samples, seg, expr, samples.sample_rate)
    return Signal(samples.samples * gains, samples.sample_rate)


def _placements(rendered, exprs, sample_rate) -> list[int]:
    starts = []
    for r, e in zip(rendered, exprs):
        vowel_target = round((e.t_m + e.onset_dev) * sample_rate)
        starts.append(vowel_target - r.vowel_onset_sample)
    return starts


def classify_join(gap_samples: int, next_lyric: str) -> str:
    """Join kind between two placed syllables, from the gap and the
    following initial: pauses stay silent, fricatives reach back over
    the preceding final, anything else cross-fades as a voiced
    transition."""
    category = classify_initial(next_lyric.lstrip("+"))
    if gap_samples > 0 or category == InitialCategory.STOP:
        return "pause"
    if category == InitialCategory.FRICATIVE:
        return "fricative_overlap"
    return "voiced_transition"


def join_syllables(
    rendered: list[RenderedSyllable],
    exprs: list[ExpressionParams],
    sample_rate: int,
) -> Signal:
    """Assemble rendered syllables into one phrase.

    Each syllable is placed so its vowel onset lands at
    round((t_m + onset_dev) * sr); overlapping regions sum, voiced
    transitions get complementary linear ramps over the overlap, and the
    phrase is peak-normalized to 0.89 only if it would clip.
    """
    if len(rendered) != len(exprs) or not rendered:
        raise AlignmentMismatch(f"{len(rendered)} rendered vs {len(exprs)} expressions")
    # sliding repetitions share their note's t_m, so order is judged on
    # the actual placement anchors
    anchors = [e.t_m + e.onset_dev for e in exprs]
    if any(b <= a for a, b in zip(anchors, anchors[1:])):
        raise NonMonotoneOnsets(f"onset anchors not strictly increasing: {anchors}")

    starts = _placements(rendered, exprs, sample_rate)
    pieces = [r.samples.samples.copy() for r in rendered]

    for i in range(len(rendered) - 1):
        core_end = starts[i] + len(pieces[i]) - rendered[i].ext_tail
        core_next = starts[i + 1] + rendered[i + 1].ext_head
        kind = classify_join(core_next - core_end, exprs[i + 1].lyric)
        rendered[i].join_kind_next = kind
        rendered[i + 1].join_kind_prev = kind
        if kind != "voiced_transition":
            continue
        zone_lo = starts[i + 1]
        zone_hi = starts[i] + len(pieces[i])
        overlap = min(zone_hi - zone_lo, len(pieces[i]), len(pieces[i + 1]))
        if overlap <= 0:
            continue
        ramp = (np.arange(overlap) + 1.0) / (overlap + 1.0)
        pieces[i][-overlap:] *= ramp[::-1]
        pieces[i + 1][:overlap] *= ramp

    total = max(s + len(p) for s, p in zip(starts, pieces))
    out = np.zeros(max(total, 1))
    for start, piece in zip(starts, pieces):
        if start < 0:
            warnings.warn(
                f"syllable pre-roll precedes sample 0 by {-start} samples; "
                "front-padded with silence",
                stacklevel=2,
            )
            piece = piece[-start:]
            start = 0
        out[start : start + len(piece)] += piece

    peak = float(np.max(np.abs(out))) if out.size else 0.0
    if peak > 1.0:
        out *= PEAK_NORM_TARGET / peak
    return Signal(out, sample_rate)


def expand_sliding(expr: ExpressionParams, sample_rate: int) -> list[ExpressionParams]:
    """Split a sliding syllable into its base plus vowel-repetition parts.

    Each repetition becomes its own expression bundle sharing the note;
    the shared pitch curve is re-anchored so sub-relative lookups land
    on the right stretch of the musical syllable.
    """
    if not expr.sliding:
        return [expr]
    base = ExpressionParams(
        lyric=expr.lyric,
        note=expr.note,
        pitch_curve=expr.pitch_curve,
        energy_curve=expr.energy_curve,
        unvoiced_peak=expr.unvoiced_peak,
        segmentation=expr.segmentation,
        t_v=expr.t_v,
        onset_dev=expr.onset_dev,
    )
    return [base] + [_sliding_params(expr, sub, sample_rate) for sub in expr.sliding]


def _sliding_params(expr: ExpressionParams, sub: SlidingSub, sr: int) -> ExpressionParams:
    hop = expr.energy_curve.hop_samples
    offset_s = sub.offset_samples / sr
    shifted_pitch = PitchCurve(
        expr.pitch_curve.hop_s, expr.pitch_curve.start_s - offset_s, expr.pitch_curve.f0
    )
    sub_len = sub.segmentation.end
    i0 = min(max(0, sub.offset_samples // hop), max(len(expr.energy_curve) - 1, 0))
    n = max(0, (sub_len - expr.energy_curve.frame_len_samples) // hop + 1) \
        if sub_len >= expr.energy_curve.frame_len_samples else 0
    values = expr.energy_curve.values[i0 : i0 + n]
    if values.size < n:
        pad = np.full(n - values.size, values[-1] if values.size else 0.0)
        values = np.concatenate([values, pad])
    return ExpressionParams(
        lyric=sub.lyric,
        note=expr.note,
        pitch_curve=shifted_pitch,
        energy_curve=EnergyCurve(
            hop, expr.energy_curve.frame_len_samples, values, "frame_energy"
        ),
        unvoiced_peak=0.0,
        segmentation=sub.segmentation,
        t_v=sub.t_v,
        onset_dev=sub.t_v - expr.note.t_on,
    )


def render_phrase(
    units: dict[str, SyllableUnit],
    exprs: list[ExpressionParams],
    mode: str,
    noise_seed: int,
    sample_rate: int,
    crossfade_ratio: float = CROSSFADE_RATIO,
    crossfade_cap_s: float = CROSSFADE_CAP_S,
    fricative_overlap_s: float = FRICATIVE_OVERLAP_S,
    debug_sink: list | None = None,
    jobs: int = 1,
) -> Signal:
    """Render and join a whole phrase.

    Plans co-articulation extensions from the placements, renders each
    syllable (extensions included, so the cross-faded material is real
    synthesis, not copied samples), applies dynamics in expressive mode,
    and joins.  Per-syllable noise seeds derive deterministically from
    ``noise_seed`` and the syllable index.
    """
    flat: list[ExpressionParams] = []
    for expr in exprs:
        flat.extend(expand_sliding(expr, sample_rate))

    # plan extensions from the unextended placements
    starts = []
    for e in flat:
        vowel_target = round((e.t_m + e.onset_dev) * sample_rate)
        starts.append(vowel_target - e.segmentation.a[0])
    ext_head = [0] * len(flat)
    ext_tail = [0] * len(flat)
    cap = int(crossfade_cap_s * sample_rate)
    for i in range(len(flat) - 1):
        gap = starts[i + 1] - (starts[i] + flat[i].segmentation.end)
        kind = classify_join(gap, flat[i + 1].lyric)
        if kind == "voiced_transition":
            final_name, final_span = flat[i].segmentation.present()[-1]
            first_name, first_span = flat[i + 1].segmentation.present()[0]
            ext_tail[i] = min(int(crossfade_ratio * (final_span[1] - final_span[0])), cap)
            ext_head[i + 1] = min(
                int(crossfade_ratio * (first_span[1] - first_span[0])), cap
            )
        elif kind == "fricative_overlap":
            ext_head[i + 1] = int(fricative_overlap_s * sample_rate)

    def _render_one(i: int) -> tuple[RenderedSyllable, np.ndarray]:
        expr = flat[i]
        unit = units.get(expr.lyric.lstrip("+"))
        if unit is None:
            raise LyricMismatch(f"no corpus unit for syllable {expr.lyric!r}")
        seed = int(np.random.SeedSequence((noise_seed, i)).generate_state(1)[0])
        piece = render_syllable(
            unit, expr, mode, seed, ext_head=ext_head[i], ext_tail=ext_tail[i]
        )
        full = np.ones(len(piece.samples))
        if mode == "expressive":
            core = slice(ext_head[i], len(piece.samples) - ext_tail[i])
            gains = _dynamics_gains(
                piece.samples.samples[core], expr.segmentation, expr, sample_rate
            )
            full = np.concatenate(
                [
                    np.full(ext_head[i], gains[0] if gains.size else 1.0),
                    gains,
                    np.full(ext_tail[i], gains[-1] if gains.size else 1.0),
                ]
            )
            piece.samples = Signal(piece.samples.samples * full, sample_rate)
        return piece, full

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_render_one, range(len(flat))))
    else:
        results = [_render_one(i) for i in range(len(flat))]

    rendered = []
    for i, (piece, full) in enumerate(results):
        if debug_sink is not None:
            debug_sink.append(
                {
                    "lyric": flat[i].lyric,
                    "start": starts[i],
                    "rows": [
                        (j, pos, f0, float(full[pos]))
                        for j, (pos, f0) in enumerate(piece.debug_rows)
                    ],
                }
            )
        rendered.append(piece)
    return join_syllables(rendered, flat, sample_rate)
