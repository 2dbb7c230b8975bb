"""Phoneme label files, A-S-R vowel sub-segmentation, and boundary refinement.

Label files arrive from an external forced-alignment stage; this module
validates them, splits vowels into attack/sustain/release regions with
an adaptive envelope threshold, and nudges initial-consonant boundaries
using the acoustic cue appropriate to the initial's category.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadLine,
    OrphanSubSegment,
    OverlappingSyllables,
    SpanTooShort,
    WindowOutOfBounds,
)
from .signal_io import FRAME_LEN, HOP, EnergyCurve, Signal, frame_view, max_amp_envelope

LABEL_KINDS = ("syllable", "initial", "attack", "sustain", "release", "nasal_end")

ASR_THRESHOLD_FACTOR = 0.8
ASR_EDGE_CAP = 0.4  # A and R may each take at most 40% of the vowel
REFINE_WINDOW_S = 0.03


class InitialCategory(enum.Enum):
    STOP = "stop"
    FRICATIVE = "fricative"
    NASAL = "nasal"
    GLIDE = "glide"
    NULL = "null"


_INITIAL_SETS = {
    InitialCategory.STOP: "bpdtgk",
    InitialCategory.FRICATIVE: "cfhjqsz",
    InitialCategory.NASAL: "mn",
    InitialCategory.GLIDE: "lrwy",
}


@dataclass(frozen=True)
class LabelEntry:
    start: int
    end: int
    kind: str
    text: str


@dataclass(frozen=True)
class SegmentLabels:
    entries: tuple[LabelEntry, ...]

    def syllables(self) -> list[LabelEntry]:
        return [e for e in self.entries if e.kind == "syllable"]

    def sub_entries(self, syllable: LabelEntry) -> list[LabelEntry]:
        return [
            e
            for e in self.entries
            if e.kind != "syllable"
            and e.start >= syllable.start
            and e.end <= syllable.end
        ]


@dataclass(frozen=True)
class SyllableSegmentation:
    """Contiguous sample spans cx -> a -> s -> r -> cn, relative to the
    syllable start; ``t_v`` is the vowel onset in seconds on that timeline."""

    cx: tuple[int, int] | None
    a: tuple[int, int]
    s: tuple[int, int]
    r: tuple[int, int]
    cn: tuple[int, int] | None
    t_v: float

    def __post_init__(self):
        spans = [sp for _, sp in self.present()]
        for (s0, e0), (s1, e1) in zip(spans, spans[1:]):
            if e0 != s1:
                raise ValueError(f"segments not contiguous: {spans}")
        # attack/release may collapse to zero length; sustain and any
        # present consonant segments must not
        for name, (s0, e0) in self.present():
            if e0 < s0 or (e0 == s0 and name not in ("a", "r")):
                raise ValueError(f"segment {name} has bad span ({s0}, {e0})")

    @classmethod
    def from_spans(cls, cx, a, s, r, cn, sample_rate: int) -> "SyllableSegmentation":
        return cls(cx=cx, a=a, s=s, r=r, cn=cn, t_v=a[0] / sample_rate)

    def present(self) -> list[tuple[str, tuple[int, int]]]:
        out = []
        for name in ("cx", "a", "s", "r", "cn"):
            span = getattr(self, name)
            if span is not None:
                out.append((name, span))
        return out

    @property
    def start(self) -> int:
        return self.present()[0][1][0]

    @property
    def end(self) -> int:
        return self.present()[-1][1][1]

    def total_samples(self) -> int:
        return self.end - self.start


def parse_labels(text: str) -> SegmentLabels:
    """Parse tab-separated label lines ``start<TAB>end<TAB>kind<TAB>text``.

    ``#`` lines are comments.  Entries come back sorted; syllables must
    not overlap and every sub-entry must nest inside a syllable span.
    """
    entries = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise BadLine(line_no, f"expected 4 tab-separated fields, got {len(parts)}")
        try:
            start, end = int(parts[0]), int(parts[1])
        except ValueError:
            raise BadLine(line_no, "start/end must be integers") from None
        kind, label_text = parts[2].strip(), parts[3].strip()
        if kind not in LABEL_KINDS:
            raise BadLine(line_no, f"unknown kind {kind!r}")
        if end <= start:
            raise BadLine(line_no, f"end {end} <= start {start}")
        entries.append(LabelEntry(start, end, kind, label_text))

    entries.sort(key=_entry_order)
    syllables = [e for e in entries if e.kind == "syllable"]
    for prev, cur in zip(syllables, syllables[1:]):
        if cur.start < prev.end:
            raise OverlappingSyllables(f"{prev} overlaps {cur}")
    for e in entries:
        if e.kind == "syllable":
            continue
        if not any(s.start <= e.start and e.end <= s.end for s in syllables):
            raise OrphanSubSegment(f"{e} lies outside every syllable span")
    return SegmentLabels(tuple(entries))


def serialize_labels(labels: SegmentLabels) -> str:
    lines = [
        f"{e.start}\t{e.end}\t{e.kind}\t{e.text}"
        for e in sorted(labels.entries, key=_entry_order)
    ]
    return "\n".join(lines) + "\n"


def _entry_order(e: LabelEntry):
    # containers before their contents when starts tie
    return (e.start, e.kind != "syllable", e.end * -1)


def classify_initial(pinyin: str) -> InitialCategory:
    """Category of the pinyin initial by its leading letter (total function)."""
    if not pinyin:
        return InitialCategory.NULL
    first = pinyin[0].lower()
    for category, letters in _INITIAL_SETS.items():
        if first in letters:
            return category
    return InitialCategory.NULL


def asr_segment(
    vowel: Signal,
    envelope: EnergyCurve,
    threshold_factor: float = ASR_THRESHOLD_FACTOR,
    edge_cap: float = ASR_EDGE_CAP,
) -> tuple[tuple[int, int], tuple[int, int], tuple[int, int]]:
    """Split a vowel into attack / sustain / release sample spans.

    The adaptive threshold is ``threshold_factor`` times the median
    envelope over the vowel's central third; attack and release are the
    below-threshold prefix and suffix, each capped so the sustain can
    never vanish.  Returns spans relative to the vowel start.
    """
    values = envelope.values
    n = len(values)
    if n < 3:
        raise SpanTooShort(f"vowel spans only {n} envelope frames, need >= 3")
    central = values[n // 3 : max(2 * n // 3, n // 3 + 1)]
    threshold = threshold_factor * float(np.median(central))

    below = values < threshold
    n_attack = 0
    while n_attack < n and below[n_attack]:
        n_attack += 1
    n_release = 0
    while n_release < n and below[n - 1 - n_release]:
        n_release += 1

    total = len(vowel)
    cap = int(edge_cap * total)
    b1 = min(n_attack * envelope.hop_samples, cap)
    b2 = total - min(n_release * envelope.hop_samples, cap)
    return (0, b1), (b1, b2), (b2, total)


def refine_boundary(signal: Signal, approx: int, category: InitialCategory) -> int:
    """Refine an initial/vowel boundary inside a +/-30 ms window.

    Stops snap to the spectral-flux peak, fricatives to the end of the
    widest above-median zero-crossing-rate run, nasals to the spectral
    variance valley.  Glide and null boundaries are trusted as labeled.
    """
    if category in (InitialCategory.GLIDE, InitialCategory.NULL):
        return approx
    half = int(REFINE_WINDOW_S * signal.sample_rate)
    lo, hi = approx - half, approx + half
    if not 0 <= approx < len(signal) or lo < 0 or hi > len(signal):
        raise WindowOutOfBounds(
            f"window [{lo}, {hi}) leaves signal of {len(signal)} samples"
        )
    window = signal.samples[lo:hi]
    frames = frame_view(window, FRAME_LEN, HOP)
    if len(frames) < 2:
        return approx

    if category == InitialCategory.STOP:
        spectra = np.abs(np.fft.rfft(frames * np.hamming(FRAME_LEN), axis=1))
        flux = np.maximum(np.diff(spectra, axis=0), 0.0).sum(axis=1)
        # flux between frames j and j+1 is attributed to frame j+1's center
        j = int(np.argmax(flux)) + 1
        return lo + j * HOP + FRAME_LEN // 2
    if category == InitialCategory.FRICATIVE:
        zcr = np.sum(frames[:, :-1] * frames[:, 1:] < 0, axis=1)
        runs = _runs_above(zcr > np.median(zcr))
        if not runs:
            return approx
        start, stop = max(runs, key=lambda r: (r[1] - r[0], -r[0]))
        # the boundary sits where the high-ZCR run ends
        return min(lo + stop * HOP + FRAME_LEN // 2, hi - 1)
    # nasal: valley of per-frame spectral variance
    spectra = np.abs(np.fft.rfft(frames * np.hamming(FRAME_LEN), axis=1))
    variance = np.var(spectra, axis=1)
    j = int(np.argmin(variance))
    return lo + j * HOP + FRAME_LEN // 2


def _runs_above(mask: np.ndarray) -> list[tuple[int, int]]:
    runs = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(mask)))
    return runs


def onset_deviation(t_v: float, t_m: float) -> float:
    """Signed gap between the sung vowel onset and the score note-on."""
    return t_v - t_m


def segment_syllable(
    signal: Signal,
    labels: SegmentLabels,
    index: int,
    refine: bool = True,
    threshold_factor: float = ASR_THRESHOLD_FACTOR,
    edge_cap: float = ASR_EDGE_CAP,
) -> SyllableSegmentation:
    """Resolve the full cx/A/S/R/cn segmentation of one labeled syllable.

    Explicit attack/sustain/release label entries are trusted verbatim.
    Otherwise the initial boundary is refined acoustically (when the
    search window fits inside the signal) and A-S-R is computed from the
    vowel's amplitude envelope.  Spans come back relative to the
    syllable start.
    """
    syllable = labels.syllables()[index]
    subs = labels.sub_entries(syllable)
    by_kind = {kind: [e for e in subs if e.kind == kind] for kind in LABEL_KINDS}
    base = syllable.start
    sr = signal.sample_rate

    initial = by_kind["initial"][0] if by_kind["initial"] else None
    nasal = by_kind["nasal_end"][0] if by_kind["nasal_end"] else None
    vowel_end = nasal.start if nasal else syllable.end

    explicit = by_kind["attack"] and by_kind["sustain"] and by_kind["release"]
    if explicit:
        attack, sustain, release = (
            by_kind["attack"][0],
            by_kind["sustain"][0],
            by_kind["release"][0],
        )
        cx_span = (0, attack.start - base) if attack.start > base else None
        a = (attack.start - base, attack.end - base)
        s = (sustain.start - base, sustain.end - base)
        r = (release.start - base, release.end - base)
    else:
        vowel_start = initial.end if initial else syllable.start
        if initial and refine:
            half = int(REFINE_WINDOW_S * sr)
            if vowel_start - half >= 0 and vowel_start + half <= len(signal):
                category = classify_initial(syllable.text.lstrip("+"))
                refined = refine_boundary(signal, vowel_start, category)
                vowel_start = min(max(refined, base + 1), vowel_end - 1)
        vowel = Signal(signal.samples[vowel_start:vowel_end], sr)
        envelope = max_amp_envelope(vowel)
        (a0, a1), (s0, s1), (r0, r1) = asr_segment(
            vowel, envelope, threshold_factor, edge_cap
        )
        offset = vowel_start - base
        cx_span = (0, offset) if offset > 0 else None
        a = (offset + a0, offset + a1)
        s = (offset + s0, offset + s1)
        r = (offset + r0, offset + r1)
    cn_span = (nasal.start - base, nasal.end - base) if nasal else None
    return SyllableSegmentation.from_spans(cx_span, a, s, r, cn_span, sr)
