"""Standard MIDI File parsing and musical-syllable construction.

A melody track is reduced to timed note events; overlapping notes (the
score's portamento sign: the next note-on arrives before the current
note-off) are merged transitively into single musical notes, and lyric
syllables are bound to merged notes one-to-one.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import (
    CountMismatch,
    KeyOutOfRange,
    MalformedHeader,
    TruncatedTrack,
    UnmatchedNoteOn,
    UnsortedInput,
    UnsupportedFormat,
)

DEFAULT_TEMPO_US = 500_000  # 120 bpm


@dataclass(frozen=True)
class TempoMap:
    """Tick-to-seconds conversion from Set Tempo meta events."""

    ticks_per_quarter: int
    changes: tuple[tuple[int, int], ...]  # (tick, microseconds per quarter)

    def __post_init__(self):
        changes = tuple(sorted(self.changes))
        if not changes or changes[0][0] != 0:
            changes = ((0, DEFAULT_TEMPO_US),) + changes
        object.__setattr__(self, "changes", changes)

    def tick_to_seconds(self, tick: int) -> float:
        total_us = 0.0
        for i, (start, tempo) in enumerate(self.changes):
            if tick <= start:
                break
            end = self.changes[i + 1][0] if i + 1 < len(self.changes) else tick
            span = min(tick, end) - start
            if span > 0:
                total_us += span * tempo / self.ticks_per_quarter
        return total_us / 1e6


@dataclass(frozen=True)
class NoteEvent:
    key: int
    onset_tick: int
    offset_tick: int
    channel: int

    def __post_init__(self):
        if self.offset_tick <= self.onset_tick:
            raise ValueError(
                f"note key={self.key} has offset {self.offset_tick} "
                f"<= onset {self.onset_tick}"
            )


@dataclass(frozen=True)
class MergedNote:
    """One musical note: a single score note or an overlap-merged group."""

    sub_notes: tuple[tuple[int, float, float], ...]  # (key, onset_s, offset_s)
    t_on: float
    t_off: float
    portamento: bool

    @classmethod
    def from_sub_notes(cls, sub_notes) -> "MergedNote":
        subs = tuple(sub_notes)
        return cls(
            sub_notes=subs,
            t_on=subs[0][1],
            t_off=subs[-1][2],
            portamento=len(subs) > 1,
        )

    @property
    def keys(self) -> tuple[int, ...]:
        return tuple(k for k, _, _ in self.sub_notes)


@dataclass(frozen=True)
class ScoredSyllable:
    lyric: str
    note: MergedNote


class _ByteReader:
    def __init__(self, data: bytes, base: int = 0):
        self.data = data
        self.pos = base

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedTrack(f"needed {n} bytes at offset {self.pos}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def byte(self) -> int:
        return self.take(1)[0]

    def varlen(self) -> int:
        value = 0
        for _ in range(4):
            b = self.byte()
            value = (value << 7) | (b & 0x7F)
            if not b & 0x80:
                return value
        raise TruncatedTrack("variable-length quantity longer than 4 bytes")


def parse_smf(data: bytes, melody_channel: int = 0) -> tuple[TempoMap, list[NoteEvent]]:
    """Parse an SMF (format 0 or 1) into a tempo map and melody note events.

    Note-on with velocity 0 counts as note-off.  Running status is
    honored; meta and sysex events are consumed and, apart from Set
    Tempo, ignored.  Only events on ``melody_channel`` become notes.
    """
    if len(data) < 14 or data[0:4] != b"MThd":
        raise MalformedHeader("missing MThd chunk")
    (header_len,) = struct.unpack_from(">I", data, 4)
    if header_len < 6 or 8 + header_len > len(data):
        raise MalformedHeader(f"bad MThd length {header_len}")
    smf_format, n_tracks, division = struct.unpack_from(">HHH", data, 8)
    if smf_format not in (0, 1):
        raise UnsupportedFormat(f"SMF format {smf_format} not supported")
    if division & 0x8000:
        raise UnsupportedFormat("SMPTE time division not supported")

    tempo_changes: list[tuple[int, int]] = []
    notes: list[NoteEvent] = []
    pos = 8 + header_len
    tracks_seen = 0
    while tracks_seen < n_tracks:
        if pos + 8 > len(data):
            raise TruncatedTrack(f"expected {n_tracks} tracks, found {tracks_seen}")
        chunk_id = data[pos : pos + 4]
        (chunk_len,) = struct.unpack_from(">I", data, pos + 4)
        if pos + 8 + chunk_len > len(data):
            raise TruncatedTrack(f"chunk at offset {pos} overruns file")
        if chunk_id != b"MTrk":
            pos += 8 + chunk_len  # alien chunks are skipped per the SMF spec
            continue
        _parse_track(
            data[pos + 8 : pos + 8 + chunk_len], melody_channel, tempo_changes, notes
        )
        tracks_seen += 1
        pos += 8 + chunk_len

    notes.sort(key=lambda n: (n.onset_tick, n.key))
    return TempoMap(division, tuple(tempo_changes)), notes


def _parse_track(track: bytes, melody_channel, tempo_changes, notes) -> None:
    reader = _ByteReader(track)
    tick = 0
    running_status = None
    pending: dict[int, list[int]] = {}  # key -> onset ticks (FIFO)
    while reader.pos < len(track):
        tick += reader.varlen()
        status = reader.byte()
        if status < 0x80:
            if running_status is None:
                raise TruncatedTrack("data byte with no running status")
            reader.pos -= 1
            status = running_status
        if status == 0xFF:
            meta_type = reader.byte()
            body = reader.take(reader.varlen())
            if meta_type == 0x51:
                if len(body) != 3:
                    raise TruncatedTrack("Set Tempo event must carry 3 bytes")
                tempo_changes.append((tick, int.from_bytes(body, "big")))
            if meta_type == 0x2F:
                break
            continue
        if status in (0xF0, 0xF7):
            reader.take(reader.varlen())
            running_status = None
            continue
        running_status = status
        kind = status & 0xF0
        channel = status & 0x0F
        n_data = 1 if kind in (0xC0, 0xD0) else 2
        payload = reader.take(n_data)
        if channel != melody_channel or kind not in (0x80, 0x90):
            continue
        key, velocity = payload[0], payload[1]
        is_on = kind == 0x90 and velocity > 0
        if is_on:
            pending.setdefault(key, []).append(tick)
        elif pending.get(key):
            onset = pending[key].pop(0)
            if tick > onset:
                notes.append(NoteEvent(key, onset, tick, channel))
    leftover = sum(len(v) for v in pending.values())
    if leftover:
        raise UnmatchedNoteOn(f"{leftover} note-on event(s) never released")


def merge_portamento(notes: list[NoteEvent], tempo: TempoMap) -> list[MergedNote]:
    """Merge transitively-overlapping notes into single musical notes.

    A note whose onset precedes the running group's latest offset joins
    the group; anything else starts a new group.  For sorted inputs this
    equals the connected components of the pairwise-overlap graph.
    """
    for prev, cur in zip(notes, notes[1:]):
        if cur.onset_tick < prev.onset_tick:
            raise UnsortedInput("notes must be sorted by onset tick")
    ordered = sorted(notes, key=lambda n: (n.onset_tick, n.key))

    merged: list[MergedNote] = []
    group: list[NoteEvent] = []
    group_end = None
    for note in ordered:
        if group and note.onset_tick < group_end:
            group.append(note)
            group_end = max(group_end, note.offset_tick)
        else:
            if group:
                merged.append(_finish_group(group, tempo))
            group = [note]
            group_end = note.offset_tick
    if group:
        merged.append(_finish_group(group, tempo))
    return merged


def _finish_group(group: list[NoteEvent], tempo: TempoMap) -> MergedNote:
    subs = [
        (n.key, tempo.tick_to_seconds(n.onset_tick), tempo.tick_to_seconds(n.offset_tick))
        for n in group
    ]
    return MergedNote.from_sub_notes(subs)


def attach_lyrics(merged: list[MergedNote], syllables: list[str]) -> list[ScoredSyllable]:
    """Pair lyric syllables with merged notes positionally, one-to-one."""
    if len(merged) != len(syllables):
        raise CountMismatch(len(merged), len(syllables))
    return [ScoredSyllable(lyric, note) for lyric, note in zip(syllables, merged)]


def parse_lyrics(text: str) -> list[str]:
    """Whitespace-separated pinyin syllables; ``#`` lines are comments."""
    syllables = []
    for line in text.splitlines():
        if line.lstrip().startswith("#"):
            continue
        syllables.extend(line.split())
    return syllables


def key_to_hz(key: int) -> float:
    """Equal-temperament frequency of a MIDI key (A4 = 69 = 440 Hz)."""
    if not 0 <= key <= 127:
        raise KeyOutOfRange(f"MIDI key {key} outside 0..127")
    return 440.0 * 2.0 ** ((key - 69) / 12.0)
