"""Command-line front end wiring the analysis/synthesis pipeline.

Commands: score-dump, analyze-corpus, extract-expression, synthesize,
resynth, dump-curves.  Exit codes: 0 success, 1 usage error, 2
input-format error, 3 pipeline error.  Diagnostics go to stderr; equal
inputs and equal seeds give bit-identical outputs.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import expression as expression_mod
from . import hnm_core, pitch_analysis, score_model, segmentation, signal_io, synth_engine
from .errors import HnsingError, InputFormatError, LabelScoreMismatch, PipelineError, Usage

CORPUS_ENV_VAR = "HNSING_CORPUS"
EDGE_SKIP_S = 0.02  # resynth SNR ignores 20 ms at each edge


@dataclass
class RunPlan:
    """A validated invocation: the command plus its resolved paths/options."""

    command: str
    score: str | None = None
    lyrics: str | None = None
    corpus: str | None = None
    out: str | None = None
    expression: str | None = None
    input: str | None = None
    labels: str | None = None
    manifest: str | None = None
    out_dir: str | None = None
    out_prefix: str | None = None
    debug_dir: str | None = None
    melody_channel: int = 0
    mode: str = "plain"
    transpose: int = 0
    noise_seed: int = 0
    jobs: int = 1
    hop: int = signal_io.HOP
    refine: bool = True
    proportional: bool = False
    crossfade_ratio: float = synth_engine.CROSSFADE_RATIO
    crossfade_cap_ms: float = synth_engine.CROSSFADE_CAP_S * 1000.0
    fricative_overlap_ms: float = synth_engine.FRICATIVE_OVERLAP_S * 1000.0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise Usage(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="hnsing", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--noise-seed", type=int, default=0)
        p.add_argument("--hop", type=int, default=signal_io.HOP,
                       help="analysis hop in samples (default 220 = 10 ms)")

    p = sub.add_parser("score-dump", help="print merged musical notes as CSV")
    p.add_argument("--score", required=True)
    p.add_argument("--lyrics")
    p.add_argument("--melody-channel", type=int, default=0)

    p = sub.add_parser("analyze-corpus", help="build unit database from WAV+label pairs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-refine", action="store_true")
    common(p)

    p = sub.add_parser("extract-expression", help="extract expression parameters")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--score", required=True)
    p.add_argument("--lyrics", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--melody-channel", type=int, default=0)
    p.add_argument("--no-refine", action="store_true")
    common(p)

    p = sub.add_parser("synthesize", help="render a phrase from score + corpus")
    p.add_argument("--score", required=True)
    p.add_argument("--lyrics", required=True)
    p.add_argument("--corpus", default=os.environ.get(CORPUS_ENV_VAR))
    p.add_argument("--out", required=True)
    p.add_argument("--expression", help="expression JSON; enables Type II synthesis")
    p.add_argument("--mode", choices=("expressive", "plain"))
    p.add_argument("--melody-channel", type=int, default=0)
    p.add_argument("--transpose", type=int, default=0,
                   help="whole-song key shift in semitones")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--proportional", action="store_true",
                   help="compress all segments proportionally in plain mode")
    p.add_argument("--crossfade-ratio", type=float, default=synth_engine.CROSSFADE_RATIO)
    p.add_argument("--crossfade-cap-ms", type=float,
                   default=synth_engine.CROSSFADE_CAP_S * 1000.0)
    p.add_argument("--fricative-overlap-ms", type=float,
                   default=synth_engine.FRICATIVE_OVERLAP_S * 1000.0)
    p.add_argument("--debug-dir", help="write per-syllable control-point CSVs here")
    common(p)

    p = sub.add_parser("resynth", help="HNM analyze + resynthesize a WAV (codec check)")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    common(p)

    p = sub.add_parser("dump-curves", help="write pitch/energy CSVs for a WAV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-prefix", required=True)
    common(p)
    return parser


def parse_args(argv: list[str]) -> RunPlan:
    """Validate argv into a RunPlan; bad usage raises Usage (exit 1)."""
    ns = _build_parser().parse_args(argv)
    plan = RunPlan(command=ns.command)
    for name, value in vars(ns).items():
        attr = name.replace("-", "_")
        if hasattr(plan, attr) and value is not None:
            setattr(plan, attr, value)
    if getattr(ns, "no_refine", False):
        plan.refine = False

    if plan.command == "synthesize":
        if plan.corpus is None:
            raise Usage(f"--corpus is required (or set {CORPUS_ENV_VAR})")
        if ns.mode is None:
            plan.mode = "expressive" if plan.expression else "plain"
        elif ns.mode == "expressive" and not plan.expression:
            raise Usage("--mode expressive requires --expression")
        else:
            plan.mode = ns.mode
    return plan


def execute(plan: RunPlan) -> int:
    """Run a validated plan; raises on failure (main maps to exit codes)."""
    handler = {
        "score-dump": _cmd_score_dump,
        "analyze-corpus": _cmd_analyze_corpus,
        "extract-expression": _cmd_extract_expression,
        "synthesize": _cmd_synthesize,
        "resynth": _cmd_resynth,
        "dump-curves": _cmd_dump_curves,
    }[plan.command]
    handler(plan)
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        return execute(parse_args(argv))
    except Usage as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (InputFormatError, FileNotFoundError) as exc:
        print(f"input error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (PipelineError, HnsingError, OSError) as exc:
        print(f"pipeline error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def _load_score(plan: RunPlan):
    data = Path(plan.score).read_bytes()
    tempo, notes = score_model.parse_smf(data, plan.melody_channel)
    merged = score_model.merge_portamento(notes, tempo)
    if plan.lyrics is None:
        return merged, None
    syllables = score_model.parse_lyrics(Path(plan.lyrics).read_text())
    return merged, score_model.attach_lyrics(merged, syllables)


def _atomic_write_wav(signal, path) -> None:
    tmp = str(path) + ".tmp"
    try:
        signal_io.write_wav(signal, tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(text: str, path) -> None:
    tmp = str(path) + ".tmp"
    try:
        Path(tmp).write_text(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cmd_score_dump(plan: RunPlan) -> None:
    merged, scored = _load_score(plan)
    lyrics = [s.lyric for s in scored] if scored else [""] * len(merged)
    print("index,t_on,t_off,keys,portamento,lyric")
    for i, (note, lyric) in enumerate(zip(merged, lyrics)):
        keys = "+".join(str(k) for k in note.keys)
        print(f"{i},{note.t_on:.6f},{note.t_off:.6f},{keys},{int(note.portamento)},{lyric}")


def _cmd_analyze_corpus(plan: RunPlan) -> None:
    manifest_path = Path(plan.manifest)
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    units = []
    for entry in manifest["entries"]:
        signal = signal_io.read_wav(base / entry["wav"])
        signal_io.ensure_pipeline_rate(signal)
        labels = segmentation.parse_labels(Path(base / entry["labels"]).read_text())
        pitch = pitch_analysis.extract_pitch_curve(signal, hop=plan.hop)
        for index, entry_label in enumerate(labels.syllables()):
            if entry_label.text.startswith("+"):
                continue
            units.append(
                hnm_core.analyze_syllable(
                    signal, labels, index, pitch, refine_boundaries=plan.refine
                )
            )
    hnm_core.save_corpus(units, plan.out_dir)
    print(f"analyzed {len(units)} unit(s) into {plan.out_dir}")


def _cmd_extract_expression(plan: RunPlan) -> None:
    signal = signal_io.read_wav(plan.input)
    signal_io.ensure_pipeline_rate(signal)
    _, scored = _load_score(plan)
    labels = segmentation.parse_labels(Path(plan.labels).read_text())
    doc = expression_mod.extract_expression(
        signal,
        scored,
        labels,
        audio_path=str(plan.input),
        score_path=str(plan.score),
        refine=plan.refine,
    )
    tmp = str(plan.out) + ".tmp"
    try:
        expression_mod.save_expression(doc, tmp)
        os.replace(tmp, plan.out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    print(f"extracted expression for {len(doc.syllables)} syllable(s)")


def _cmd_synthesize(plan: RunPlan) -> None:
    _, scored = _load_score(plan)
    units = hnm_core.load_corpus(plan.corpus)

    if plan.transpose:
        scored = [
            score_model.ScoredSyllable(
                s.lyric,
                score_model.MergedNote.from_sub_notes(
                    (k + plan.transpose, on, off) for k, on, off in s.note.sub_notes
                ),
            )
            for s in scored
        ]
        for s in scored:
            for k in s.note.keys:
                score_model.key_to_hz(k)  # validates the shifted range

    if plan.mode == "expressive":
        doc = expression_mod.load_expression(plan.expression)
        if len(doc.syllables) != len(scored):
            raise LabelScoreMismatch(
                f"expression has {len(doc.syllables)} syllables, score has {len(scored)}"
            )
        exprs = [
            synth_engine.transpose_expression(p, plan.transpose) for p in doc.syllables
        ]
    else:
        exprs = [
            synth_engine.plain_expression(s, units[s.lyric], plan.proportional)
            if s.lyric in units
            else _missing_unit(s.lyric)
            for s in scored
        ]

    debug_sink = [] if plan.debug_dir else None
    phrase = synth_engine.render_phrase(
        units,
        exprs,
        plan.mode,
        plan.noise_seed,
        signal_io.PIPELINE_RATE,
        crossfade_ratio=plan.crossfade_ratio,
        crossfade_cap_s=plan.crossfade_cap_ms / 1000.0,
        fricative_overlap_s=plan.fricative_overlap_ms / 1000.0,
        debug_sink=debug_sink,
        jobs=plan.jobs,
    )
    _atomic_write_wav(phrase, plan.out)
    if debug_sink is not None:
        debug_dir = Path(plan.debug_dir)
        debug_dir.mkdir(parents=True, exist_ok=True)
        for i, item in enumerate(debug_sink):
            rows = "\n".join(
                f"{j},{pos},{f0:.6f},{gain:.6f}" for j, pos, f0, gain in item["rows"]
            )
            _atomic_write_text(
                "cp_index,target_sample,f0_hz,gain\n" + rows + "\n",
                debug_dir / f"syllable_{i:03d}_{item['lyric']}.csv",
            )
    print(f"wrote {plan.out} ({plan.mode} mode, {len(exprs)} syllable(s))")


def _missing_unit(lyric: str):
    from .errors import LyricMismatch

    raise LyricMismatch(f"no corpus unit for syllable {lyric!r}")


def _cmd_resynth(plan: RunPlan) -> None:
    signal = signal_io.read_wav(plan.input)
    signal_io.ensure_pipeline_rate(signal)
    rebuilt, snr = resynthesize(signal, plan.noise_seed, hop=plan.hop)
    clipped = np.clip(rebuilt.samples, -1.0, 1.0)
    _atomic_write_wav(signal_io.Signal(clipped, rebuilt.sample_rate), plan.out)
    print(f"SNR: {snr:.1f} dB")


def resynthesize(signal, noise_seed: int, hop: int = signal_io.HOP):
    """Analyze a signal and rebuild it; returns (signal, SNR in dB).

    Frames start half a window into the signal, so the rebuilt stream is
    placed at that offset and the edges stay silent.
    """
    pitch = pitch_analysis.extract_pitch_curve(signal, hop=hop)
    frames = hnm_core.analyze_signal(signal, pitch, hop=hop)
    offset = signal_io.FRAME_LEN // 2
    stream = hnm_core.synthesize_stream(
        frames, len(signal) - offset, noise_seed, signal.sample_rate
    )
    rebuilt = np.zeros(len(signal))
    rebuilt[offset:] = stream.samples
    skip = round(EDGE_SKIP_S * signal.sample_rate)
    snr = hnm_core.snr_db(signal.samples, rebuilt, skip=skip)
    return signal_io.Signal(rebuilt, signal.sample_rate), snr


def _cmd_dump_curves(plan: RunPlan) -> None:
    signal = signal_io.read_wav(plan.input)
    signal_io.ensure_pipeline_rate(signal)
    pitch = pitch_analysis.extract_pitch_curve(signal, hop=plan.hop)
    energy = signal_io.frame_energy_curve(signal, hop=plan.hop)

    times = pitch.times()
    pitch_rows = [
        f"{t:.6f},{'' if np.isnan(v) else f'{v:.4f}'}" for t, v in zip(times, pitch.f0)
    ]
    _atomic_write_text(
        "time_s,f0_hz\n" + "\n".join(pitch_rows) + "\n", f"{plan.out_prefix}_pitch.csv"
    )
    centers = energy.frame_centers() / signal.sample_rate
    energy_rows = [f"{t:.6f},{v:.8f}" for t, v in zip(centers, energy.values)]
    _atomic_write_text(
        "time_s,value\n" + "\n".join(energy_rows) + "\n", f"{plan.out_prefix}_energy.csv"
    )
    print(f"wrote {plan.out_prefix}_pitch.csv and {plan.out_prefix}_energy.csv")


if __name__ == "__main__":
    sys.exit(main())
