import numpy as np
import pytest

from hnsing import (
    Signal,
    analyze_syllable,
    attach_lyrics,
    extract_pitch_curve,
    merge_portamento,
    parse_labels,
    parse_lyrics,
    parse_smf,
)
from hnsing.signal_io import PIPELINE_RATE
from hnsing.synthetic import make_unit_recording, toy_score


def sine(freq_hz, duration_s=1.0, amplitude=0.5, sample_rate=PIPELINE_RATE, phase=0.0):
    t = np.arange(round(duration_s * sample_rate)) / sample_rate
    return Signal(amplitude * np.sin(2 * np.pi * freq_hz * t + phase), sample_rate)


def three_harmonic(duration_s=1.0, sample_rate=PIPELINE_RATE):
    """The codec round-trip fixture: 220 Hz with amplitudes 0.4/0.2/0.1."""
    t = np.arange(round(duration_s * sample_rate)) / sample_rate
    x = (
        0.4 * np.cos(2 * np.pi * 220 * t + 0.1)
        + 0.2 * np.cos(2 * np.pi * 440 * t + 1.0)
        + 0.1 * np.cos(2 * np.pi * 660 * t - 0.5)
    )
    return Signal(x, sample_rate)


@pytest.fixture(scope="session")
def toy_units():
    """Corpus units analyzed from the synthetic syllable recordings."""
    _, _, corpus_entries = toy_score()
    units = {}
    for i, (pinyin, key) in enumerate(corpus_entries):
        sig, lab = make_unit_recording(pinyin, key, seed=i)
        labels = parse_labels(lab)
        pitch = extract_pitch_curve(sig)
        units[pinyin] = analyze_syllable(sig, labels, 0, pitch)
    return units


@pytest.fixture(scope="session")
def toy_scored():
    smf, lyrics_text, _ = toy_score()
    tempo, notes = parse_smf(smf, 0)
    merged = merge_portamento(notes, tempo)
    return attach_lyrics(merged, parse_lyrics(lyrics_text))


def sliding_fixture():
    """One long note sung as deng-an: the '+'-marked label entry declares
    a sliding repetition of the stressed vowel."""
    from hnsing.score_model import MergedNote, ScoredSyllable

    sr = PIPELINE_RATE
    note = MergedNote.from_sub_notes([(57, 0.1, 1.3)])
    score = [ScoredSyllable("deng", note)]
    n1, n2, n3 = round(0.1 * sr), round(0.7 * sr), round(1.3 * sr)
    t = np.arange(n3 - n1) / sr
    x = np.zeros(round(1.5 * sr))
    x[n1:n3] = 0.4 * np.sin(2 * np.pi * 220 * t)
    a_end1, r1 = n1 + round(0.06 * sr), n2 - round(0.06 * sr)
    a_end2, r2 = n2 + round(0.06 * sr), n3 - round(0.06 * sr)
    lines = [
        f"{n1}\t{n2}\tsyllable\tdeng",
        f"{n1}\t{n1 + 1100}\tinitial\td",
        f"{n1 + 1100}\t{a_end1}\tattack\t",
        f"{a_end1}\t{r1}\tsustain\t",
        f"{r1}\t{n2}\trelease\t",
        f"{n2}\t{n3}\tsyllable\t+an",
        f"{n2}\t{a_end2}\tattack\t",
        f"{a_end2}\t{r2}\tsustain\t",
        f"{r2}\t{n3}\trelease\t",
    ]
    return Signal(x, sr), score, parse_labels("\n".join(lines) + "\n")
