"""The two core synthesis moves on one corpus unit: time mapping
(sustain absorbs duration changes) and envelope-preserving retuning."""
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from hnsing import (
    MergedNote,
    ScoredSyllable,
    analyze_syllable,
    extract_pitch_curve,
    parse_labels,
    plan_plain_targets,
    render_syllable,
    retune_frame,
    write_wav,
)
from hnsing.synth_engine import plain_expression
from hnsing.synthetic import make_unit_recording

out_dir = pathlib.Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

signal, label_text = make_unit_recording("ma", key=57, duration_s=0.6)
unit = analyze_syllable(signal, parse_labels(label_text), 0, extract_pitch_curve(signal))
src = unit.segmentation
print("source segments (samples):", src.present())

# stretch the note to 1.4 s: only the sustain grows
long_note = ScoredSyllable("ma", MergedNote.from_sub_notes([(57, 0.0, 1.4)]))
plan = plan_plain_targets(long_note, unit)
print("stretched to 1.4 s:      ", plan.present(), " (sustain absorbed the change)")

# retune a mid-sustain frame up a fifth; the envelope stays put
voiced = [f for f in unit.frames if f.voiced]
frame = voiced[len(voiced) // 2]
up = retune_frame(frame, frame.f0 * 1.5)
print(
    f"\nretune {frame.f0:.1f} -> {up.f0:.1f} Hz: "
    f"{frame.amps.size} harmonics -> {up.amps.size}, MVF unchanged at {up.mvf:.0f} Hz"
)

rendered = render_syllable(unit, plain_expression(long_note, unit), "plain", 0)
write_wav(rendered.samples, out_dir / "ma_stretched.wav")
print(f"\nwrote {out_dir}/ma_stretched.wav ({rendered.samples.duration_s:.2f} s)")

high_note = ScoredSyllable("ma", MergedNote.from_sub_notes([(64, 0.0, 0.8)]))
rendered_high = render_syllable(unit, plain_expression(high_note, unit), "plain", 0)
write_wav(rendered_high.samples, out_dir / "ma_retuned.wav")
print(f"wrote {out_dir}/ma_retuned.wav (pitched to key 64 with the same timbre)")
