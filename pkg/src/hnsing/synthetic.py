"""Synthetic corpus and score builders for tests and demos.

The real 408-syllable recorded corpus is not distributable, so these
helpers fabricate harmonic "syllables" with known envelopes, matching
label files, and small format-0 MIDI scores.  Everything is seeded and
deterministic.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .score_model import ScoredSyllable, key_to_hz
from .segmentation import InitialCategory, classify_initial
from .signal_io import PIPELINE_RATE, Signal, write_wav

DEFAULT_VOWEL_AMPS = (0.40, 0.20, 0.10, 0.06, 0.04)


def formant_envelope(freq_hz):
    """Smooth analytic spectral envelope with two broad formants."""
    f = np.asarray(freq_hz, dtype=np.float64)
    return (
        0.55 * np.exp(-(((f - 600.0) / 500.0) ** 2))
        + 0.35 * np.exp(-(((f - 2400.0) / 900.0) ** 2))
        + 0.10
    )


def harmonic_tone(
    f0,
    n_samples: int,
    sample_rate: int = PIPELINE_RATE,
    amps=DEFAULT_VOWEL_AMPS,
    phases=None,
    gain=None,
) -> np.ndarray:
    """Sum of harmonics; ``f0`` may be a scalar or a per-sample array."""
    f0_arr = np.broadcast_to(np.asarray(f0, dtype=np.float64), (n_samples,))
    base_phase = 2.0 * np.pi * np.concatenate(([0.0], np.cumsum(f0_arr[:-1]))) / sample_rate
    if phases is None:
        phases = np.zeros(len(amps))
    out = np.zeros(n_samples)
    for k, (a, ph) in enumerate(zip(amps, phases), start=1):
        out += a * np.cos(k * base_phase + ph)
    if gain is not None:
        out *= gain
    return out


def adsr_gain(n_samples: int, attack: int, release: int, floor: float = 0.25) -> np.ndarray:
    """Linear rise over ``attack`` samples, flat sustain, fall to ``floor``."""
    gain = np.ones(n_samples)
    attack = min(attack, n_samples)
    gain[:attack] = np.linspace(floor, 1.0, attack, endpoint=False)
    release = min(release, n_samples)
    if release:
        gain[n_samples - release :] = np.linspace(1.0, floor, release)
    return gain


def make_unit_recording(
    pinyin: str,
    key: int,
    duration_s: float = 0.6,
    sample_rate: int = PIPELINE_RATE,
    seed: int = 0,
) -> tuple[Signal, str]:
    """One flat-pitch corpus syllable and its label-file text.

    Stop/fricative initials get a noise burst, nasal/glide initials a
    quiet hum; vowels are steady harmonics under an attack/sustain/
    release gain.  Attack, sustain, and release are labeled explicitly.
    """
    rng = np.random.default_rng(seed)
    n_total = round(duration_s * sample_rate)
    category = classify_initial(pinyin)
    f0 = key_to_hz(key)
    amps = DEFAULT_VOWEL_AMPS * formant_envelope(np.arange(1, 6) * f0) / formant_envelope(f0)

    if category in (InitialCategory.STOP, InitialCategory.FRICATIVE):
        n_initial = round((0.03 if category is InitialCategory.STOP else 0.09) * sample_rate)
        initial = rng.uniform(-0.25, 0.25, n_initial)
    elif category in (InitialCategory.NASAL, InitialCategory.GLIDE):
        n_initial = round(0.06 * sample_rate)
        initial = harmonic_tone(f0, n_initial, sample_rate, amps=(0.12, 0.04))
    else:
        n_initial = 0
        initial = np.empty(0)

    n_vowel = n_total - n_initial
    n_attack = round(0.08 * sample_rate)
    n_release = round(0.08 * sample_rate)
    phases = rng.uniform(-np.pi, np.pi, len(amps))
    vowel = harmonic_tone(
        f0,
        n_vowel,
        sample_rate,
        amps=amps,
        phases=phases,
        gain=adsr_gain(n_vowel, n_attack, n_release),
    )
    samples = np.concatenate([initial, vowel])
    peak = np.max(np.abs(samples))
    if peak > 0.95:
        samples *= 0.95 / peak

    b0 = n_initial
    b1 = b0 + n_attack
    b2 = n_total - n_release
    lines = [f"0\t{n_total}\tsyllable\t{pinyin}"]
    if n_initial:
        lines.append(f"0\t{n_initial}\tinitial\t{pinyin[0]}")
    lines.append(f"{b0}\t{b1}\tattack\t")
    lines.append(f"{b1}\t{b2}\tsustain\t")
    lines.append(f"{b2}\t{n_total}\trelease\t")
    return Signal(samples, sample_rate), "\n".join(lines) + "\n"


def write_corpus_inputs(
    directory,
    entries: list[tuple[str, int]],
    duration_s: float = 0.6,
    sample_rate: int = PIPELINE_RATE,
) -> Path:
    """Write WAV + label pairs plus the analyze-corpus manifest; returns
    the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"entries": []}
    for i, (pinyin, key) in enumerate(entries):
        signal, labels = make_unit_recording(
            pinyin, key, duration_s, sample_rate, seed=i
        )
        wav_path = directory / f"{pinyin}.wav"
        lab_path = directory / f"{pinyin}.lab"
        write_wav(signal, wav_path)
        lab_path.write_text(labels)
        manifest["entries"].append(
            {"pinyin": pinyin, "wav": wav_path.name, "labels": lab_path.name}
        )
    manifest_path = directory / "corpus_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest_path


def _varlen(value: int) -> bytes:
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def build_smf(
    notes: list[tuple[int, int, int]],
    ticks_per_quarter: int = 480,
    tempo_us: int = 500_000,
    channel: int = 0,
) -> bytes:
    """Minimal format-0 SMF from (key, onset_tick, offset_tick) triples."""
    events = [(0, 0, bytes([0xFF, 0x51, 0x03]) + tempo_us.to_bytes(3, "big"))]
    for key, onset, offset in notes:
        events.append((onset, 2, bytes([0x90 | channel, key, 0x40])))
        events.append((offset, 1, bytes([0x80 | channel, key, 0x40])))
    events.sort(key=lambda e: (e[0], e[1]))

    body = bytearray()
    tick = 0
    for when, _, payload in events:
        body += _varlen(when - tick)
        body += payload
        tick = when
    body += _varlen(0) + bytes([0xFF, 0x2F, 0x00])

    header = b"MThd" + (6).to_bytes(4, "big") + (0).to_bytes(2, "big")
    header += (1).to_bytes(2, "big") + ticks_per_quarter.to_bytes(2, "big")
    return header + b"MTrk" + len(body).to_bytes(4, "big") + bytes(body)


def toy_score(
    sample_rate: int = PIPELINE_RATE,
) -> tuple[bytes, str, list[tuple[str, int]]]:
    """A four-lyric score with one portamento pair, plus lyrics and the
    corpus entries it needs.  480 ticks per quarter at 120 bpm.  Keys
    are chosen so the lag-domain pitch detector reads them cleanly on
    harmonic-rich material (Eq.-style AMDF estimators sub-octave on some
    fundamentals, e.g. middle C)."""
    notes = [
        (57, 0, 480),        # "ma"   220 Hz
        (62, 720, 1200),     # "sha"  (after a rest)
        (64, 1200, 1680),    # "an"   (voiced transition)
        (65, 1680, 2040),    # "deng" portamento pair ...
        (69, 1920, 2400),    # ... overlapping note
    ]
    lyrics = "ma sha an deng\n"
    corpus_entries = [("ma", 57), ("sha", 62), ("an", 64), ("deng", 65)]
    return build_smf(notes), lyrics, corpus_entries


def make_song_recording(
    score: list[ScoredSyllable],
    sample_rate: int = PIPELINE_RATE,
    onset_dev_s: float = -0.02,
    vibrato_cents: float = 40.0,
    vibrato_hz: float = 5.5,
    seed: int = 7,
) -> tuple[Signal, str]:
    """A fake "sung" rendition of a score with known expression.

    Vowels start ``onset_dev_s`` after/before their note-on, carry a
    vibrato around the score key, and ramp their amplitude; initials are
    synthesized per category like the corpus units.  Returns the signal
    and its label-file text.
    """
    rng = np.random.default_rng(seed)
    end_s = max(s.note.t_off for s in score) + 0.3
    out = np.zeros(round(end_s * sample_rate))
    lines = []

    n_initials = []
    vowel_starts = []
    for syllable in score:
        category = classify_initial(syllable.lyric)
        n_initial = 0 if category is InitialCategory.NULL else round(0.05 * sample_rate)
        n_initials.append(n_initial)
        start = round((syllable.note.t_on + onset_dev_s) * sample_rate)
        vowel_starts.append(max(start, n_initial))  # keep the initial inside the file

    for i, syllable in enumerate(score):
        note = syllable.note
        category = classify_initial(syllable.lyric)
        n_initial = n_initials[i]
        vowel_start = vowel_starts[i]
        t_v = vowel_start / sample_rate
        # a sung syllable ends where the next one begins
        vowel_end_sample = round(note.t_off * sample_rate)
        if i + 1 < len(score):
            vowel_end_sample = min(
                vowel_end_sample, vowel_starts[i + 1] - n_initials[i + 1]
            )
        n_vowel = vowel_end_sample - vowel_start
        vowel_end = vowel_end_sample / sample_rate

        if category in (InitialCategory.STOP, InitialCategory.FRICATIVE):
            initial = rng.uniform(-0.22, 0.22, n_initial)
        elif category in (InitialCategory.NASAL, InitialCategory.GLIDE):
            initial = harmonic_tone(
                key_to_hz(note.sub_notes[0][0]), n_initial, sample_rate, amps=(0.1, 0.03)
            )
        else:
            initial = np.empty(0)

        t = np.arange(n_vowel) / sample_rate
        hz_points_t = [0.0]
        hz_points = [key_to_hz(note.sub_notes[0][0])]
        for (k0, _, off0), (k1, on1, _) in zip(note.sub_notes, note.sub_notes[1:]):
            hz_points_t += [max(on1 - t_v, 0.0), max(off0 - t_v, 0.0)]
            hz_points += [key_to_hz(k0), key_to_hz(k1)]
        hz_points_t.append(vowel_end - t_v)
        hz_points.append(key_to_hz(note.sub_notes[-1][0]))
        f0 = np.interp(t, hz_points_t, hz_points)
        f0 = f0 * 2.0 ** (
            vibrato_cents / 1200.0 * np.sin(2.0 * np.pi * vibrato_hz * t)
        )
        amps = DEFAULT_VOWEL_AMPS * formant_envelope(
            np.arange(1, 6) * float(f0[0])
        ) / formant_envelope(float(f0[0]))
        vowel = harmonic_tone(
            f0,
            n_vowel,
            sample_rate,
            amps=amps,
            phases=rng.uniform(-np.pi, np.pi, len(amps)),
            gain=adsr_gain(n_vowel, round(0.06 * sample_rate), round(0.07 * sample_rate)),
        )

        start = vowel_start - n_initial
        out[start : start + n_initial] += initial
        out[vowel_start : vowel_start + n_vowel] += vowel

        syl_end = vowel_start + n_vowel
        lines.append(f"{start}\t{syl_end}\tsyllable\t{syllable.lyric}")
        if n_initial:
            lines.append(f"{start}\t{vowel_start}\tinitial\t{syllable.lyric[0]}")
        a_end = vowel_start + round(0.06 * sample_rate)
        r_start = syl_end - round(0.07 * sample_rate)
        lines.append(f"{vowel_start}\t{a_end}\tattack\t")
        lines.append(f"{a_end}\t{r_start}\tsustain\t")
        lines.append(f"{r_start}\t{syl_end}\trelease\t")

    peak = np.max(np.abs(out))
    if peak > 0.98:
        out *= 0.98 / peak
    return Signal(out, sample_rate), "\n".join(lines) + "\n"
