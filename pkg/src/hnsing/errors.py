"""Exception taxonomy shared across the toolkit.

Two families exist so the command-line front end can map every failure to
a stable exit code: problems with the *content* of user-supplied files
(malformed headers, unsupported encodings, schema violations) and
problems raised while *processing* otherwise well-formed data.
"""


class HnsingError(Exception):
    """Base class for every error raised by this package."""


class InputFormatError(HnsingError):
    """A source file or byte stream is malformed, unsupported, or inconsistent."""


class PipelineError(HnsingError):
    """A processing contract was violated (bad spans, ranges, mismatches)."""


# --- waveform I/O ---------------------------------------------------------

class MalformedRiff(InputFormatError):
    """RIFF/WAVE container is structurally broken."""


class UnsupportedFormat(InputFormatError):
    """File encoding is recognized but outside the supported subset."""


class UnsupportedRate(InputFormatError):
    """Pipeline stages only accept 22,050 Hz audio; no silent resampling."""


class EmptySignal(PipelineError):
    pass


class AmplitudeOutOfRange(PipelineError):
    pass


class FrameLongerThanSignal(PipelineError):
    pass


# --- score parsing --------------------------------------------------------

class MalformedHeader(InputFormatError):
    pass


class TruncatedTrack(InputFormatError):
    pass


class UnmatchedNoteOn(InputFormatError):
    """A note-on had no matching note-off before the end of its track."""


class UnsortedInput(PipelineError):
    pass


class CountMismatch(InputFormatError):
    """Lyric syllable count does not match the merged-note count."""

    def __init__(self, notes: int, syllables: int):
        super().__init__(f"{notes} notes vs {syllables} syllables")
        self.notes = notes
        self.syllables = syllables


class KeyOutOfRange(PipelineError):
    pass


# --- pitch analysis -------------------------------------------------------

class BadFrameLength(PipelineError):
    pass


class NonPositiveInput(PipelineError):
    pass


# --- segmentation ---------------------------------------------------------

class BadLine(InputFormatError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class OverlappingSyllables(InputFormatError):
    pass


class OrphanSubSegment(InputFormatError):
    pass


class SpanTooShort(PipelineError):
    pass


class WindowOutOfBounds(PipelineError):
    pass


# --- harmonic-plus-noise core ---------------------------------------------

class F0OutOfRange(PipelineError):
    pass


class EmptyGrid(PipelineError):
    pass


class FreqOutOfRange(PipelineError):
    pass


class EmptyFrames(PipelineError):
    pass


class NonuniformSpacing(PipelineError):
    pass


class SpanOutOfBounds(PipelineError):
    pass


# --- expression documents ---------------------------------------------------

class LabelScoreMismatch(InputFormatError):
    pass


class UnlabeledSyllable(InputFormatError):
    pass


class SchemaViolation(InputFormatError):
    """Carries a JSON pointer to the offending field."""

    def __init__(self, pointer: str, reason: str):
        super().__init__(f"{pointer}: {reason}")
        self.pointer = pointer


class UnknownVersion(InputFormatError):
    pass


# --- synthesis engine -------------------------------------------------------

class NonPositiveTargetDuration(PipelineError):
    pass


class SegmentSetMismatch(PipelineError):
    pass


class OutOfSpan(PipelineError):
    pass


class UnvoicedFrame(PipelineError):
    pass


class TargetF0OutOfRange(PipelineError):
    pass


class RetuneCollapse(PipelineError):
    """The target pitch leaves no harmonic below the maximum voiced frequency."""


class LyricMismatch(PipelineError):
    pass


class AlignmentMismatch(PipelineError):
    pass


class NonMonotoneOnsets(PipelineError):
    pass


# --- command line -----------------------------------------------------------

class Usage(HnsingError):
    """Bad command-line invocation; maps to exit code 1."""
