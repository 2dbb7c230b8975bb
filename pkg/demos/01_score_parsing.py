"""Walk through MIDI score parsing and musical-syllable construction.

Builds a small format-0 score in memory, parses it back, merges the
overlapping note pair into one portamento syllable, and binds lyrics.
"""
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from hnsing import attach_lyrics, key_to_hz, merge_portamento, parse_lyrics, parse_smf
from hnsing.synthetic import toy_score

smf_bytes, lyrics_text, _ = toy_score()
print(f"score: {len(smf_bytes)} bytes of SMF, lyrics: {lyrics_text.strip()!r}")

tempo, notes = parse_smf(smf_bytes, melody_channel=0)
print(f"\nraw note events ({len(notes)}):")
for n in notes:
    print(
        f"  key {n.key:3d}  ticks {n.onset_tick:5d}..{n.offset_tick:5d}"
        f"  = {tempo.tick_to_seconds(n.onset_tick):.3f}..{tempo.tick_to_seconds(n.offset_tick):.3f} s"
    )

merged = merge_portamento(notes, tempo)
print(f"\nmerged musical notes ({len(merged)}):")
for m in merged:
    marker = " <- portamento (overlapping note-on)" if m.portamento else ""
    print(f"  keys {m.keys}  {m.t_on:.3f}..{m.t_off:.3f} s{marker}")

scored = attach_lyrics(merged, parse_lyrics(lyrics_text))
print("\nmusical syllables:")
for s in scored:
    hz = " / ".join(f"{key_to_hz(k):.1f} Hz" for k in s.note.keys)
    print(f"  {s.lyric!r}: {hz}")
