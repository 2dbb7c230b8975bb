import json

import numpy as np
import pytest

from hnsing.errors import (
    LabelScoreMismatch,
    SchemaViolation,
    UnknownVersion,
    UnlabeledSyllable,
)
from hnsing.expression import (
    extract_expression,
    load_expression,
    save_expression,
    score_guide,
)
from hnsing.score_model import MergedNote, ScoredSyllable, key_to_hz
from hnsing.segmentation import parse_labels
from hnsing.signal_io import PIPELINE_RATE, Signal
from hnsing.synthetic import make_song_recording

SR = PIPELINE_RATE


def two_syllable_fixture():
    """A synthetic 'song' of two vowel-only syllables at known keys."""
    score = [
        ScoredSyllable("an", MergedNote.from_sub_notes([(57, 0.1, 0.6)])),
        ScoredSyllable("e", MergedNote.from_sub_notes([(64, 0.8, 1.3)])),
    ]
    n = round(1.5 * SR)
    x = np.zeros(n)
    lines = []
    for syllable in score:
        key, on, off = syllable.note.sub_notes[0]
        a, b = round(on * SR), round(off * SR)
        t = np.arange(b - a) / SR
        hz = key_to_hz(key)
        x[a:b] = 0.4 * np.sin(2 * np.pi * hz * t) + 0.12 * np.sin(2 * np.pi * 2 * hz * t)
        a_end = a + round(0.06 * SR)
        r_start = b - round(0.06 * SR)
        lines += [
            f"{a}\t{b}\tsyllable\t{syllable.lyric}",
            f"{a}\t{a_end}\tattack\t",
            f"{a_end}\t{r_start}\tsustain\t",
            f"{r_start}\t{b}\trelease\t",
        ]
    return Signal(x, SR), score, parse_labels("\n".join(lines) + "\n")


@pytest.fixture(scope="module")
def extracted():
    signal, score, labels = two_syllable_fixture()
    return extract_expression(signal, score, labels), score


class TestExtractExpression:
    def test_pitch_matches_construction(self, extracted):
        doc, score = extracted
        for params, scored in zip(doc.syllables, score):
            hz = key_to_hz(scored.note.sub_notes[0][0])
            voiced = params.pitch_curve.f0[np.isfinite(params.pitch_curve.f0)]
            # interior frames only: edge frames straddle the silence
            assert np.median(np.abs(voiced - hz)) <= 2.5
            core = voiced[2:-2]
            assert np.all(np.abs(core - hz) <= 2.5)

    def test_null_initial_unvoiced_peak_zero(self, extracted):
        doc, _ = extracted
        assert doc.syllables[0].unvoiced_peak == 0.0
        assert doc.syllables[1].unvoiced_peak == 0.0

    def test_onset_dev_consistency(self, extracted):
        doc, score = extracted
        for params, scored in zip(doc.syllables, score):
            assert params.onset_dev == pytest.approx(
                params.t_v - scored.note.t_on, abs=1 / SR
            )

    def test_count_mismatch(self):
        signal, score, labels = two_syllable_fixture()
        with pytest.raises(LabelScoreMismatch):
            extract_expression(signal, score[:1], labels)

    def test_lyric_mismatch(self):
        signal, score, labels = two_syllable_fixture()
        bad = [ScoredSyllable("wu", score[0].note), score[1]]
        with pytest.raises(UnlabeledSyllable):
            extract_expression(signal, bad, labels)

    def test_fricative_initial_has_unvoiced_peak(self, toy_scored):
        song, labels_text = make_song_recording(toy_scored)
        doc = extract_expression(song, toy_scored, parse_labels(labels_text))
        by_lyric = {p.lyric: p for p in doc.syllables}
        assert by_lyric["sha"].unvoiced_peak > 0.05
        assert by_lyric["an"].unvoiced_peak == 0.0

    def test_syllables_sorted_by_onset(self, extracted):
        doc, _ = extracted
        onsets = [p.t_m for p in doc.syllables]
        assert onsets == sorted(onsets)
        assert all(b > a for a, b in zip(onsets, onsets[1:]))

    def test_sliding_repetition_from_plus_labels(self):
        from conftest import sliding_fixture

        signal, score, labels = sliding_fixture()
        doc = extract_expression(signal, score, labels)
        assert len(doc.syllables) == 1
        params = doc.syllables[0]
        assert params.sliding is not None and len(params.sliding) == 1
        sub = params.sliding[0]
        assert sub.lyric == "an"
        assert sub.offset_samples == round(0.6 * SR)
        # curves cover the whole musical syllable, base plus repetition
        assert params.span_samples() == round(1.2 * SR)
        assert sub.t_v > params.t_v


class TestScoreGuide:
    def test_active_key_lookup(self):
        score = [
            ScoredSyllable("a", MergedNote.from_sub_notes([(69, 0.0, 1.0)])),
            ScoredSyllable("b", MergedNote.from_sub_notes([(57, 1.5, 2.0)])),
        ]
        guide = score_guide(score, np.array([0.5, 1.2, 1.7]))
        assert guide[0] == pytest.approx(440.0)
        assert np.isnan(guide[1])  # score gap
        assert guide[2] == pytest.approx(220.0)

    def test_portamento_later_sub_note_wins(self):
        note = MergedNote.from_sub_notes([(57, 0.0, 1.0), (69, 0.5, 1.5)])
        guide = score_guide([ScoredSyllable("a", note)], np.array([0.25, 0.75, 1.25]))
        assert guide[0] == pytest.approx(220.0)
        assert guide[1] == pytest.approx(440.0)
        assert guide[2] == pytest.approx(440.0)


class TestSerialization:
    def test_round_trip_identity(self, extracted, tmp_path):
        doc, _ = extracted
        path = tmp_path / "e.json"
        save_expression(doc, path)
        assert load_expression(path) == doc

    def test_round_trip_whole_song(self, toy_scored, tmp_path):
        song, labels_text = make_song_recording(toy_scored)
        doc = extract_expression(song, toy_scored, parse_labels(labels_text))
        path = tmp_path / "song.json"
        save_expression(doc, path)
        assert load_expression(path) == doc

    def test_round_trip_with_sliding(self, tmp_path):
        from conftest import sliding_fixture

        signal, score, labels = sliding_fixture()
        doc = extract_expression(signal, score, labels)
        path = tmp_path / "sliding.json"
        save_expression(doc, path)
        assert load_expression(path) == doc

    def test_empty_document(self, tmp_path):
        from hnsing.expression import ExpressionDocument

        doc = ExpressionDocument("1", {"audio": "", "score": "", "sample_rate": SR}, ())
        path = tmp_path / "empty.json"
        save_expression(doc, path)
        loaded = load_expression(path)
        assert loaded.syllables == ()

    def test_missing_version(self, extracted, tmp_path):
        doc, _ = extracted
        path = tmp_path / "e.json"
        save_expression(doc, path)
        raw = json.loads(path.read_text())
        del raw["format_version"]
        path.write_text(json.dumps(raw))
        with pytest.raises(SchemaViolation) as err:
            load_expression(path)
        assert err.value.pointer == "/format_version"

    def test_unknown_version(self, extracted, tmp_path):
        doc, _ = extracted
        path = tmp_path / "e.json"
        save_expression(doc, path)
        raw = json.loads(path.read_text())
        raw["format_version"] = "99"
        path.write_text(json.dumps(raw))
        with pytest.raises(UnknownVersion):
            load_expression(path)

    def test_curve_length_inconsistent(self, extracted, tmp_path):
        doc, _ = extracted
        path = tmp_path / "e.json"
        save_expression(doc, path)
        raw = json.loads(path.read_text())
        raw["syllables"][0]["pitch"]["f0"].append(123.0)
        path.write_text(json.dumps(raw))
        with pytest.raises(SchemaViolation) as err:
            load_expression(path)
        assert err.value.pointer == "/syllables/0/pitch/f0"

    def test_onset_dev_checked(self, extracted, tmp_path):
        doc, _ = extracted
        path = tmp_path / "e.json"
        save_expression(doc, path)
        raw = json.loads(path.read_text())
        raw["syllables"][0]["onset_dev"] += 0.5
        path.write_text(json.dumps(raw))
        with pytest.raises(SchemaViolation) as err:
            load_expression(path)
        assert "onset_dev" in err.value.pointer

    def test_not_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(SchemaViolation):
            load_expression(path)

    def test_unwritable_path_raises_os_error(self, extracted, tmp_path):
        doc, _ = extracted
        with pytest.raises(OSError):
            save_expression(doc, tmp_path)  # a directory, not a file

    def test_float_precision_round_trip(self, extracted, tmp_path):
        doc, _ = extracted
        path = tmp_path / "e.json"
        save_expression(doc, path)
        loaded = load_expression(path)
        for a, b in zip(doc.syllables, loaded.syllables):
            va = a.pitch_curve.f0[np.isfinite(a.pitch_curve.f0)]
            vb = b.pitch_curve.f0[np.isfinite(b.pitch_curve.f0)]
            assert np.array_equal(va, vb)  # repr round-trips float64 exactly
            assert np.array_equal(a.energy_curve.values, b.energy_curve.values)
