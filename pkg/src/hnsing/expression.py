"""Per-syllable expression parameters: assembly, serialization, reload.

The expression document is what the analysis side hands to the
synthesizer: for every musical syllable, the sung pitch curve, the
frame-energy curve, the unvoiced-initial peak, the refined segment
boundaries, the vowel-onset deviation from the score, and (for long
sliding syllables split in the label file) per-sub-syllable specs.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    LabelScoreMismatch,
    SchemaViolation,
    UnknownVersion,
    UnlabeledSyllable,
)
from .pitch_analysis import PitchCurve, extract_pitch_curve
from .score_model import MergedNote, ScoredSyllable, key_to_hz
from .segmentation import (
    InitialCategory,
    SegmentLabels,
    SyllableSegmentation,
    classify_initial,
    onset_deviation,
    segment_syllable,
)
from .signal_io import (
    FRAME_LEN,
    HOP,
    EnergyCurve,
    Signal,
    ensure_pipeline_rate,
    frame_energy_curve,
)

EXPRESSION_FORMAT_VERSION = "1"


@dataclass(frozen=True, eq=False)
class SlidingSub:
    """One repetition of the stressed vowel inside a sliding syllable."""

    lyric: str
    offset_samples: int  # from the musical syllable's start
    segmentation: SyllableSegmentation
    t_v: float  # absolute seconds

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SlidingSub)
            and self.lyric == other.lyric
            and self.offset_samples == other.offset_samples
            and self.segmentation == other.segmentation
            and self.t_v == other.t_v
        )


@dataclass(frozen=True, eq=False)
class ExpressionParams:
    """Expression bundle for one musical syllable.

    Curves run over the full musical-syllable span (base plus sliding
    repetitions), relative to the syllable start; t_v and onset_dev are
    absolute song-time seconds.
    """

    lyric: str
    note: MergedNote
    pitch_curve: PitchCurve
    energy_curve: EnergyCurve
    unvoiced_peak: float
    segmentation: SyllableSegmentation
    t_v: float
    onset_dev: float
    sliding: tuple[SlidingSub, ...] | None = None

    @property
    def t_m(self) -> float:
        return self.note.t_on

    def span_samples(self) -> int:
        """Total musical-syllable length, including sliding repetitions."""
        end = self.segmentation.end
        for sub in self.sliding or ():
            end = max(end, sub.offset_samples + sub.segmentation.end)
        return end

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ExpressionParams)
            and self.lyric == other.lyric
            and self.note == other.note
            and self.pitch_curve == other.pitch_curve
            and self.energy_curve == other.energy_curve
            and self.unvoiced_peak == other.unvoiced_peak
            and self.segmentation == other.segmentation
            and self.t_v == other.t_v
            and self.onset_dev == other.onset_dev
            and (self.sliding or ()) == (other.sliding or ())
        )


@dataclass(frozen=True, eq=False)
class ExpressionDocument:
    format_version: str
    source: dict
    syllables: tuple[ExpressionParams, ...]

    def __post_init__(self):
        onsets = [s.t_m for s in self.syllables]
        if any(b <= a for a, b in zip(onsets, onsets[1:])):
            raise ValueError("syllable onsets must be strictly increasing")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ExpressionDocument)
            and self.format_version == other.format_version
            and self.source == other.source
            and len(self.syllables) == len(other.syllables)
            and all(a == b for a, b in zip(self.syllables, other.syllables))
        )


def score_guide(
    score: list[ScoredSyllable], frame_times: np.ndarray
) -> np.ndarray:
    """Score frequency active at each frame time; NaN in score gaps."""
    guide = np.full(len(frame_times), np.nan)
    spans = [
        (on, off, key_to_hz(key))
        for syllable in score
        for key, on, off in syllable.note.sub_notes
    ]
    for i, t in enumerate(frame_times):
        for on, off, hz in spans:
            if on <= t < off:
                guide[i] = hz  # later sub-notes win inside portamento overlaps
    return guide


def extract_expression(
    signal: Signal,
    score: list[ScoredSyllable],
    labels: SegmentLabels,
    audio_path: str = "",
    score_path: str = "",
    refine: bool = True,
) -> ExpressionDocument:
    """Extract the full expression document from a sung recording.

    Label syllables pair with score syllables positionally; extra label
    entries whose text starts with ``+`` are sliding repetitions and
    attach to the preceding base syllable.
    """
    ensure_pipeline_rate(signal)
    sr = signal.sample_rate
    all_syllables = labels.syllables()
    base_indices = [
        i for i, e in enumerate(all_syllables) if not e.text.startswith("+")
    ]
    if len(base_indices) != len(score):
        raise LabelScoreMismatch(
            f"{len(base_indices)} labeled syllables vs {len(score)} scored"
        )

    params = []
    for pos, base_idx in enumerate(base_indices):
        scored = score[pos]
        base_entry = all_syllables[base_idx]
        if base_entry.text and base_entry.text != scored.lyric:
            raise UnlabeledSyllable(
                f"label {base_entry.text!r} does not match lyric {scored.lyric!r}"
            )
        next_base = (
            base_indices[pos + 1] if pos + 1 < len(base_indices) else len(all_syllables)
        )
        sub_idx = list(range(base_idx + 1, next_base))

        seg = segment_syllable(signal, labels, base_idx, refine=refine)
        span_start = base_entry.start
        span_end = all_syllables[sub_idx[-1]].end if sub_idx else base_entry.end
        span = Signal(signal.samples[span_start:span_end], sr)

        centers = (
            span_start + FRAME_LEN // 2 + np.arange(_n_frames(len(span))) * HOP
        ) / sr
        pitch = extract_pitch_curve(span, guide=score_guide(score, centers))
        energy = frame_energy_curve(span)

        category = classify_initial(scored.lyric)
        unvoiced_peak = 0.0
        if seg.cx and category in (InitialCategory.STOP, InitialCategory.FRICATIVE):
            cx_lo, cx_hi = seg.cx
            unvoiced_peak = float(
                np.max(np.abs(signal.samples[span_start + cx_lo : span_start + cx_hi]))
            )

        t_v = (span_start + seg.a[0]) / sr
        sliding = None
        if sub_idx:
            subs = []
            for i in sub_idx:
                sub_seg = segment_syllable(signal, labels, i, refine=refine)
                subs.append(
                    SlidingSub(
                        lyric=all_syllables[i].text.lstrip("+"),
                        offset_samples=all_syllables[i].start - span_start,
                        segmentation=sub_seg,
                        t_v=(all_syllables[i].start + sub_seg.a[0]) / sr,
                    )
                )
            sliding = tuple(subs)

        params.append(
            ExpressionParams(
                lyric=scored.lyric,
                note=scored.note,
                pitch_curve=pitch,
                energy_curve=energy,
                unvoiced_peak=unvoiced_peak,
                segmentation=seg,
                t_v=t_v,
                onset_dev=onset_deviation(t_v, scored.note.t_on),
                sliding=sliding,
            )
        )
    return ExpressionDocument(
        format_version=EXPRESSION_FORMAT_VERSION,
        source={"audio": str(audio_path), "score": str(score_path), "sample_rate": sr},
        syllables=tuple(params),
    )


def _n_frames(span_len: int, frame_len: int = FRAME_LEN, hop: int = HOP) -> int:
    if span_len < frame_len:
        return 0
    return (span_len - frame_len) // hop + 1


# --- serialization -----------------------------------------------------------

def _seg_to_dict(seg: SyllableSegmentation) -> dict:
    return {
        "cx": list(seg.cx) if seg.cx else None,
        "a": list(seg.a),
        "s": list(seg.s),
        "r": list(seg.r),
        "cn": list(seg.cn) if seg.cn else None,
    }


def _params_to_dict(p: ExpressionParams, sr: int) -> dict:
    doc = {
        "lyric": p.lyric,
        "note": {
            "keys": list(p.note.keys),
            "t_on": p.note.t_on,
            "t_off": p.note.t_off,
            "portamento": p.note.portamento,
            "sub_notes": [list(sub) for sub in p.note.sub_notes],
        },
        "pitch": {
            "hop_s": p.pitch_curve.hop_s,
            "start_s": p.pitch_curve.start_s,
            "f0": [None if math.isnan(v) else v for v in p.pitch_curve.f0],
        },
        "energy": {
            "hop_s": p.energy_curve.hop_samples / sr,
            "frame_len_samples": p.energy_curve.frame_len_samples,
            "values": p.energy_curve.values.tolist(),
        },
        "unvoiced_peak": p.unvoiced_peak,
        "segments": _seg_to_dict(p.segmentation),
        "t_v": p.t_v,
        "onset_dev": p.onset_dev,
    }
    if p.sliding:
        doc["sliding"] = [
            {
                "lyric": sub.lyric,
                "offset_samples": sub.offset_samples,
                "segments": _seg_to_dict(sub.segmentation),
                "t_v": sub.t_v,
            }
            for sub in p.sliding
        ]
    return doc


def save_expression(doc: ExpressionDocument, path) -> None:
    """Write the document as JSON per the schema in the README."""
    sr = int(doc.source["sample_rate"])
    payload = {
        "format_version": doc.format_version,
        "source": doc.source,
        "syllables": [_params_to_dict(p, sr) for p in doc.syllables],
    }
    Path(path).write_text(json.dumps(payload, allow_nan=False))


def load_expression(path) -> ExpressionDocument:
    """Load and schema-validate an expression document.

    Violations raise SchemaViolation carrying a JSON pointer to the
    offending field; an unrecognized format_version raises
    UnknownVersion.  ``load(save(doc))`` reproduces the document.
    """
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaViolation("/", f"not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise SchemaViolation("/", "top level must be an object")
    if "format_version" not in raw:
        raise SchemaViolation("/format_version", "missing")
    if raw["format_version"] != EXPRESSION_FORMAT_VERSION:
        raise UnknownVersion(f"format_version {raw['format_version']!r}")
    source = _field(raw, "source", dict, "")
    sr = int(_field(source, "sample_rate", (int, float), "/source"))
    syllables_raw = _field(raw, "syllables", list, "")

    syllables = []
    for i, entry in enumerate(syllables_raw):
        syllables.append(_params_from_dict(entry, sr, f"/syllables/{i}"))
    try:
        return ExpressionDocument(raw["format_version"], source, tuple(syllables))
    except ValueError as exc:
        raise SchemaViolation("/syllables", str(exc)) from None


def _field(obj, key, types, pointer):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaViolation(f"{pointer}/{key}", "missing")
    value = obj[key]
    if types is not None and not isinstance(value, types):
        raise SchemaViolation(f"{pointer}/{key}", f"wrong type {type(value).__name__}")
    return value


def _span(value, pointer, optional=False):
    if value is None:
        if optional:
            return None
        raise SchemaViolation(pointer, "span required")
    if not (isinstance(value, list) and len(value) == 2):
        raise SchemaViolation(pointer, "span must be [start, end]")
    return (int(value[0]), int(value[1]))


def _seg_from_dict(doc, sr, pointer) -> SyllableSegmentation:
    try:
        return SyllableSegmentation.from_spans(
            cx=_span(doc.get("cx"), f"{pointer}/cx", optional=True),
            a=_span(_field(doc, "a", list, pointer), f"{pointer}/a"),
            s=_span(_field(doc, "s", list, pointer), f"{pointer}/s"),
            r=_span(_field(doc, "r", list, pointer), f"{pointer}/r"),
            cn=_span(doc.get("cn"), f"{pointer}/cn", optional=True),
            sample_rate=sr,
        )
    except ValueError as exc:
        raise SchemaViolation(pointer, str(exc)) from None


def _params_from_dict(entry, sr, pointer) -> ExpressionParams:
    lyric = _field(entry, "lyric", str, pointer)
    note_doc = _field(entry, "note", dict, pointer)
    subs_raw = _field(note_doc, "sub_notes", list, f"{pointer}/note")
    try:
        note = MergedNote.from_sub_notes(
            (int(k), float(on), float(off)) for k, on, off in subs_raw
        )
    except (TypeError, ValueError) as exc:
        raise SchemaViolation(f"{pointer}/note/sub_notes", str(exc)) from None
    if list(note.keys) != [int(k) for k in _field(note_doc, "keys", list, f"{pointer}/note")]:
        raise SchemaViolation(f"{pointer}/note/keys", "keys disagree with sub_notes")

    pitch_doc = _field(entry, "pitch", dict, pointer)
    f0_raw = _field(pitch_doc, "f0", list, f"{pointer}/pitch")
    f0 = np.array([np.nan if v is None else float(v) for v in f0_raw])
    pitch = PitchCurve(
        hop_s=float(_field(pitch_doc, "hop_s", (int, float), f"{pointer}/pitch")),
        start_s=float(_field(pitch_doc, "start_s", (int, float), f"{pointer}/pitch")),
        f0=f0,
    )

    energy_doc = _field(entry, "energy", dict, pointer)
    energy = EnergyCurve(
        hop_samples=round(
            float(_field(energy_doc, "hop_s", (int, float), f"{pointer}/energy")) * sr
        ),
        frame_len_samples=int(
            _field(energy_doc, "frame_len_samples", int, f"{pointer}/energy")
        ),
        values=np.array(
            _field(energy_doc, "values", list, f"{pointer}/energy"), dtype=np.float64
        ),
        kind="frame_energy",
    )

    seg = _seg_from_dict(_field(entry, "segments", dict, pointer), sr, f"{pointer}/segments")
    t_v = float(_field(entry, "t_v", (int, float), pointer))
    onset_dev = float(_field(entry, "onset_dev", (int, float), pointer))
    if abs(onset_dev - (t_v - note.t_on)) > 1.0 / sr:
        raise SchemaViolation(
            f"{pointer}/onset_dev",
            f"must equal t_v - t_on = {t_v - note.t_on!r}",
        )

    sliding = None
    if "sliding" in entry:
        subs = []
        for j, sub in enumerate(entry["sliding"]):
            sub_pointer = f"{pointer}/sliding/{j}"
            subs.append(
                SlidingSub(
                    lyric=_field(sub, "lyric", str, sub_pointer),
                    offset_samples=int(
                        _field(sub, "offset_samples", int, sub_pointer)
                    ),
                    segmentation=_seg_from_dict(
                        _field(sub, "segments", dict, sub_pointer), sr, f"{sub_pointer}/segments"
                    ),
                    t_v=float(_field(sub, "t_v", (int, float), sub_pointer)),
                )
            )
        sliding = tuple(subs)

    params = ExpressionParams(
        lyric=lyric,
        note=note,
        pitch_curve=pitch,
        energy_curve=energy,
        unvoiced_peak=float(_field(entry, "unvoiced_peak", (int, float), pointer)),
        segmentation=seg,
        t_v=t_v,
        onset_dev=onset_dev,
        sliding=sliding,
    )
    _check_curve_lengths(params, sr, pointer)
    return params


def _check_curve_lengths(params: ExpressionParams, sr: int, pointer: str) -> None:
    span = params.span_samples()
    hop = round(params.pitch_curve.hop_s * sr)
    expected = _n_frames(span, FRAME_LEN, hop) if hop > 0 else 0
    if len(params.pitch_curve) != expected:
        raise SchemaViolation(
            f"{pointer}/pitch/f0",
            f"{len(params.pitch_curve)} frames inconsistent with span "
            f"{span} samples (expected {expected})",
        )
    e = params.energy_curve
    expected_e = _n_frames(span, e.frame_len_samples, e.hop_samples)
    if len(e) != expected_e:
        raise SchemaViolation(
            f"{pointer}/energy/values",
            f"{len(e)} frames inconsistent with span {span} samples "
            f"(expected {expected_e})",
        )
