"""Expressive singing-voice analysis and synthesis on a harmonic-plus-noise model.

The toolkit extracts expression parameters (pitch curves, dynamics,
segment timing, onset deviations) from a recording aligned to a MIDI
score, and renders expressive singing phrases from a labeled syllable
corpus.
"""

from .signal_io import (
    FRAME_LEN,
    HOP,
    PIPELINE_RATE,
    EnergyCurve,
    Signal,
    frame_energy_curve,
    max_amp_envelope,
    read_wav,
    write_wav,
)
from .score_model import (
    MergedNote,
    NoteEvent,
    ScoredSyllable,
    TempoMap,
    attach_lyrics,
    key_to_hz,
    merge_portamento,
    parse_lyrics,
    parse_smf,
)
from .pitch_analysis import (
    LagScores,
    PitchCurve,
    correct_octave,
    detect_pitch_frame,
    extract_pitch_curve,
    lag_scores,
)
from .segmentation import (
    InitialCategory,
    SegmentLabels,
    SyllableSegmentation,
    asr_segment,
    classify_initial,
    onset_deviation,
    parse_labels,
    refine_boundary,
    segment_syllable,
    serialize_labels,
)
from .hnm_core import (
    HnmFrame,
    SyllableUnit,
    analyze_frame,
    analyze_signal,
    analyze_syllable,
    estimate_mvf,
    eval_noise_envelope,
    fit_noise_cepstrum,
    load_corpus,
    noise_grid,
    save_corpus,
    snr_db,
    synthesize_stream,
)
from .expression import (
    ExpressionDocument,
    ExpressionParams,
    SlidingSub,
    extract_expression,
    load_expression,
    save_expression,
)
from .synth_engine import (
    RenderedSyllable,
    TimeMap,
    apply_dynamics,
    build_time_map,
    join_syllables,
    pitch_shift_curve,
    place_control_points,
    plain_expression,
    plan_plain_targets,
    render_phrase,
    render_syllable,
    retune_frame,
    sample_hnm_at,
    transpose_expression,
)

__version__ = "0.1.0"
