"""Command-line orchestration.

Subcommands: eval, analyze, sweep, fad, ratings-qc, anchor, fragment.
Every command is deterministic: given fixed inputs and flags it writes
byte-identical outputs, regardless of worker count.  Errors are
reported as one JSON object on stderr; exit code 1 marks input or
validation problems, 2 a numerical failure.

Corpus layout for eval/sweep (overridable with --manifest):

    <root>/<track_id>/references/<stem>.wav
    <root>/<track_id>/systems/<condition>/<stem>.wav
    <root>/<track_id>/embeddings/references/<stem>.emb
    <root>/<track_id>/embeddings/<condition>/<stem>.emb
"""

import argparse
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .audio import (
    AudioBuffer,
    StemKind,
    downmix_mono,
    extract_fragment,
    load_wav,
    make_anchor,
    require_same_rate,
    save_wav,
)
from .bsseval import BSS_METRIC_NAMES, bsseval
from .correlation import (
    MetricScoreRecord,
    aggregate_tau,
    index_scores,
    per_unit_tau,
    read_scores_csv,
    weight_sweep,
    write_scores_csv,
)
from .errors import (
    DegenerateReferenceError,
    InputError,
    NumericalFailureError,
    ParameterError,
    StemevalError,
)
from .fad import fad_score
from .ratings import (
    QcThresholds,
    filter_ratings,
    parse_ratings_csv,
    qc_summary,
    run_quality_checks,
    write_violations_csv,
)
from .si import reweighted_db, si_decompose, si_metrics

SI_METRIC_NAMES = ("SI-SDR", "SI-SIR", "SI-SAR", "SD-SDR")
DEFAULT_METRICS = ",".join(SI_METRIC_NAMES + BSS_METRIC_NAMES)
_RW_PATTERN = re.compile(r"^RW-SISDR\(([-+0-9.eE]+)\)$")

STEM_ORDER = (StemKind.VOCALS, StemKind.DRUMS, StemKind.BASS, StemKind.OTHER)


def _warn(message: str):
    print(json.dumps({"warning": message}), file=sys.stderr)


def _write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


@dataclass(frozen=True)
class TrackFiles:
    track_id: str
    references: dict[str, Path]          # stem name -> wav
    systems: dict[str, dict[str, Path]]  # condition -> stem -> wav
    embeddings: dict[str, dict[str, Path]]  # condition|"references" -> stem -> emb


def _discover_tracks(root: Path) -> list[TrackFiles]:
    if not root.is_dir():
        raise InputError(f"{root}: not a directory")
    tracks = []
    for track_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        ref_dir = track_dir / "references"
        if not ref_dir.is_dir():
            continue
        stems = {
            kind.value: ref_dir / f"{kind.value}.wav"
            for kind in STEM_ORDER
            if (ref_dir / f"{kind.value}.wav").is_file()
        }
        systems = {}
        systems_dir = track_dir / "systems"
        if systems_dir.is_dir():
            for cond_dir in sorted(p for p in systems_dir.iterdir() if p.is_dir()):
                systems[cond_dir.name] = {
                    stem: cond_dir / f"{stem}.wav" for stem in stems
                }
        embeddings = {}
        emb_dir = track_dir / "embeddings"
        if emb_dir.is_dir():
            for cond_dir in sorted(p for p in emb_dir.iterdir() if p.is_dir()):
                embeddings[cond_dir.name] = {
                    stem: cond_dir / f"{stem}.emb" for stem in stems
                }
        tracks.append(TrackFiles(track_dir.name, stems, systems, embeddings))
    if not tracks:
        raise InputError(f"{root}: no track directories with a references/ subdir")
    return tracks


def _load_manifest(path: Path) -> list[TrackFiles]:
    base = path.parent
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    tracks = []
    for entry in manifest.get("tracks", []):
        tracks.append(TrackFiles(
            track_id=entry["track_id"],
            references={s: base / p for s, p in entry.get("references", {}).items()},
            systems={c: {s: base / p for s, p in stems.items()}
                     for c, stems in entry.get("systems", {}).items()},
            embeddings={c: {s: base / p for s, p in stems.items()}
                        for c, stems in entry.get("embeddings", {}).items()},
        ))
    if not tracks:
        raise InputError(f"{path}: manifest lists no tracks")
    return sorted(tracks, key=lambda t: t.track_id)


def _parse_metrics(text: str) -> list[str]:
    metrics = []
    for token in text.split(","):
        name = token.strip()
        if not name:
            continue
        if name in SI_METRIC_NAMES or name in BSS_METRIC_NAMES or name == "FAD":
            metrics.append(name)
            continue
        match = _RW_PATTERN.match(name)
        if match:
            w = float(match.group(1))
            if not 0.0 <= w <= 1.0:
                raise ParameterError(f"reweight metric weight {w} outside [0, 1]")
            metrics.append(name)
            continue
        raise ParameterError(
            f"unknown metric {name!r}; known: "
            f"{', '.join(SI_METRIC_NAMES + BSS_METRIC_NAMES)}, FAD, RW-SISDR(w)"
        )
    if not metrics:
        raise ParameterError("empty metric list")
    return metrics


def _check_missing_files(tracks, metrics) -> None:
    need_audio = any(m != "FAD" for m in metrics)
    need_emb = "FAD" in metrics
    missing = []
    for track in tracks:
        for stem, path in sorted(track.references.items()):
            if need_audio and not Path(path).is_file():
                missing.append(str(path))
        for cond, stems in sorted(track.systems.items()):
            for stem, path in sorted(stems.items()):
                if need_audio and not Path(path).is_file():
                    missing.append(str(path))
            if need_emb:
                for stem in sorted(track.references):
                    for owner in ("references", cond):
                        path = track.embeddings.get(owner, {}).get(stem)
                        if path is None or not Path(path).is_file():
                            label = path or f"{track.track_id}/embeddings/{owner}/{stem}.emb"
                            missing.append(str(label))
    if missing:
        unique = sorted(set(missing))
        raise InputError(
            f"{len(unique)} required file(s) missing:\n  " + "\n  ".join(unique)
        )


def _rw_weights(metrics) -> dict[str, float]:
    return {
        name: float(_RW_PATTERN.match(name).group(1))
        for name in metrics if _RW_PATTERN.match(name)
    }


def _eval_track(track: TrackFiles, metrics, args) -> list[MetricScoreRecord]:
    rows = []
    rw = _rw_weights(metrics)
    si_wanted = [m for m in metrics if m in SI_METRIC_NAMES] or rw
    bss_wanted = [m for m in metrics if m in BSS_METRIC_NAMES]
    stems = sorted(track.references)

    refs = {}
    if si_wanted or bss_wanted:
        refs = {stem: load_wav(track.references[stem]) for stem in stems}
        require_same_rate(*refs.values())

    for condition in sorted(track.systems):
        est_paths = track.systems[condition]
        ests = {}
        if si_wanted or bss_wanted:
            ests = {stem: load_wav(est_paths[stem]) for stem in stems}
            require_same_rate(*refs.values(), *ests.values())

        if si_wanted:
            ref_mono = {s: downmix_mono(refs[s]).samples[0] for s in stems}
            est_mono = {s: downmix_mono(ests[s]).samples[0] for s in stems}
            for stem in stems:
                active = [s for s in stems
                          if s == stem or float(np.dot(ref_mono[s], ref_mono[s])) > 0.0]
                try:
                    d = si_decompose(est_mono[stem],
                                     [ref_mono[s] for s in active],
                                     active.index(stem))
                except DegenerateReferenceError:
                    _warn(f"{track.track_id}/{stem}: silent reference, "
                          "scale-invariant metrics skipped")
                    continue
                values = si_metrics(d, est_mono[stem], ref_mono[stem]).as_dict()
                for name in metrics:
                    if name in values:
                        rows.append(MetricScoreRecord(
                            track.track_id, StemKind(stem), condition, name,
                            values[name]))
                    elif name in rw:
                        rows.append(MetricScoreRecord(
                            track.track_id, StemKind(stem), condition, name,
                            reweighted_db(d.target_energy, d.interference_energy,
                                          d.artifact_energy, rw[name])))

        if bss_wanted:
            rate = refs[stems[0]].sample_rate
            window_s = None if args.whole_track else args.window_s
            hop_s = None if args.whole_track else args.hop_s
            frame_scores = bsseval(
                [ests[s].samples for s in stems],
                [refs[s].samples for s in stems],
                sample_rate=rate, window_s=window_s, hop_s=hop_s,
                filter_len=args.filter_len,
            )
            for stem, scores in zip(stems, frame_scores):
                aggregate = scores.aggregate()
                for name in bss_wanted:
                    value = aggregate[name]
                    if math.isnan(value):
                        _warn(f"{track.track_id}/{stem}/{condition}: every frame "
                              f"undefined, {name} skipped")
                        continue
                    rows.append(MetricScoreRecord(
                        track.track_id, StemKind(stem), condition, name, value))

        if "FAD" in metrics:
            for stem in stems:
                result = fad_score(track.embeddings["references"][stem],
                                   track.embeddings[condition][stem])
                rows.append(MetricScoreRecord(
                    track.track_id, StemKind(stem), condition, "FAD",
                    result.inverted))
    return rows


def _run_tracks(tracks, worker, workers: int):
    if workers <= 1:
        return [worker(t) for t in tracks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, tracks))


def cmd_eval(args) -> int:
    tracks = (_load_manifest(Path(args.manifest)) if args.manifest
              else _discover_tracks(Path(args.root)))
    metrics = _parse_metrics(args.metrics)
    _check_missing_files(tracks, metrics)
    per_track = _run_tracks(tracks, lambda t: _eval_track(t, metrics, args),
                            args.workers)
    rows = [row for rows in per_track for row in rows]
    rows.sort(key=lambda r: (r.track_id, r.stem.value, r.condition, r.metric))
    write_scores_csv(rows, args.out)
    return 0


def _ratings_pipeline(args):
    thresholds = QcThresholds(
        ref_anchor_gap=args.qc_gap,
        reference_floor=args.qc_ref_floor,
        user_stddev_floor=args.qc_stddev_floor,
        time_min_s=args.qc_time_min,
        time_max_s=args.qc_time_max,
    )
    parsed = parse_ratings_csv(args.ratings, strict=args.strict)
    if parsed.skipped:
        _warn(f"{len(parsed.skipped)} rating row(s) skipped in lenient mode")
    reports = run_quality_checks(parsed.records, thresholds)
    filtered = filter_ratings(parsed.records, reports, args.max_violations)
    return parsed, thresholds, reports, filtered


def cmd_analyze(args) -> int:
    parsed, thresholds, reports, filtered = _ratings_pipeline(args)
    scores = read_scores_csv(args.scores)
    metrics = sorted({s.metric for s in scores})
    if not metrics:
        raise InputError(f"{args.scores}: no metric scores")

    report = {"metrics": {}, "qc": qc_summary(reports, args.max_violations, thresholds)}
    report["metadata"] = {
        "tie_mode": args.tie_mode,
        "exclude_hidden_conditions": not args.include_hidden,
        "max_violations": args.max_violations,
        "page_weighting": "each page counts once",
        "parse_skipped_rows": len(parsed.skipped),
    }
    for metric in metrics:
        taus = per_unit_tau(filtered.kept, scores, metric,
                            tie_mode=args.tie_mode,
                            exclude_hidden=not args.include_hidden)
        aggregate = aggregate_tau(taus.records)
        report["metrics"][metric] = {
            "per_stem": {s.value: aggregate.per_stem[s]
                         for s in STEM_ORDER if s in aggregate.per_stem},
            "counts": {s.value: aggregate.counts[s]
                       for s in STEM_ORDER if s in aggregate.counts},
            "average": aggregate.average,
            "skipped_pages": len(taus.skipped),
        }

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(report, out_dir / "report.json")
    _write_json(report["qc"], out_dir / "qc_summary.json")
    write_violations_csv(reports, out_dir / "violations.csv")

    with open(out_dir / "table.csv", "w", encoding="utf-8", newline="") as handle:
        handle.write("stem," + ",".join(metrics) + "\n")
        for stem in STEM_ORDER:
            cells = []
            for metric in metrics:
                value = report["metrics"][metric]["per_stem"].get(stem.value)
                cells.append("" if value is None else f"{value:.6f}")
            handle.write(stem.value + "," + ",".join(cells) + "\n")
        averages = [f"{report['metrics'][m]['average']:.6f}" for m in metrics]
        handle.write("average," + ",".join(averages) + "\n")
    return 0


def cmd_sweep(args) -> int:
    _, _, _, filtered = _ratings_pipeline(args)
    tracks = (_load_manifest(Path(args.manifest)) if args.manifest
              else _discover_tracks(Path(args.root)))
    _check_missing_files(tracks, ["SI-SDR"])

    def decompose_track(track):
        stems = sorted(track.references)
        refs = {s: load_wav(track.references[s]) for s in stems}
        require_same_rate(*refs.values())
        ref_mono = {s: downmix_mono(refs[s]).samples[0] for s in stems}
        energies = {}
        for condition in sorted(track.systems):
            for stem in stems:
                est = downmix_mono(load_wav(track.systems[condition][stem]))
                active = [s for s in stems
                          if s == stem or float(np.dot(ref_mono[s], ref_mono[s])) > 0.0]
                try:
                    d = si_decompose(est.samples[0], [ref_mono[s] for s in active],
                                     active.index(stem))
                except DegenerateReferenceError:
                    _warn(f"{track.track_id}/{stem}: silent reference, skipped")
                    continue
                energies[(track.track_id, StemKind(stem), condition)] = (
                    d.target_energy, d.interference_energy, d.artifact_energy)
        return energies

    per_track = _run_tracks(tracks, decompose_track, args.workers)
    energies = {k: v for chunk in per_track for k, v in chunk.items()}
    curve = weight_sweep(energies, filtered.kept, grid_step=args.grid_step,
                         tie_mode=args.tie_mode,
                         exclude_hidden=not args.include_hidden)

    with open(args.out, "w", encoding="utf-8", newline="") as handle:
        handle.write("w,stem,mean_tau\n")
        for i, w in enumerate(curve.grid):
            for stem in STEM_ORDER:
                if stem in curve.mean_tau_per_stem:
                    tau = curve.mean_tau_per_stem[stem][i]
                    handle.write(f"{w:g},{stem.value},{tau!r}\n")
    return 0


def cmd_fad(args) -> int:
    result = fad_score(args.reference, args.estimate)
    payload = {"distance": result.distance, "inverted": result.inverted,
               "metadata": result.metadata}
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_ratings_qc(args) -> int:
    _, thresholds, reports, _ = _ratings_pipeline(args)
    write_violations_csv(reports, args.out_violations)
    _write_json(qc_summary(reports, args.max_violations, thresholds),
                args.out_summary)
    return 0


def cmd_anchor(args) -> int:
    buffer = load_wav(args.input)
    save_wav(make_anchor(buffer, StemKind.parse(args.stem)), args.output,
             sample_format=args.sample_format)
    return 0


def cmd_fragment(args) -> int:
    buffer = load_wav(args.input)
    save_wav(extract_fragment(buffer, args.start, args.duration), args.output,
             sample_format=args.sample_format)
    return 0


def _add_qc_flags(parser):
    parser.add_argument("--max-violations", type=int, default=2,
                        help="drop pages failing more than this many checks")
    parser.add_argument("--qc-gap", type=float, default=10.0,
                        help="minimum reference-minus-anchor score gap")
    parser.add_argument("--qc-ref-floor", type=float, default=90.0,
                        help="minimum hidden-reference score")
    parser.add_argument("--qc-stddev-floor", type=float, default=20.0,
                        help="minimum per-user score standard deviation")
    parser.add_argument("--qc-time-min", type=float, default=20.0,
                        help="minimum plausible page time, seconds")
    parser.add_argument("--qc-time-max", type=float, default=213.0,
                        help="maximum plausible page time, seconds")


def _add_tau_flags(parser):
    parser.add_argument("--tie-mode", choices=("tau-b", "tau-a"), default="tau-b")
    parser.add_argument("--include-hidden", action="store_true",
                        help="keep reference/anchor conditions in correlation pages")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stemeval",
        description="Source-separation evaluation toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel track workers (output is order-independent)")
    parser.add_argument("--strict", action=argparse.BooleanOptionalAction,
                        default=True,
                        help="abort on the first bad CSV row (--no-strict skips them)")
    parser.add_argument("--seed", type=int, default=None,
                        help="reserved; all computation is deterministic")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="score estimate directories against references")
    p.add_argument("--root", help="corpus root directory")
    p.add_argument("--manifest", help="JSON manifest overriding the layout")
    p.add_argument("--metrics", default=DEFAULT_METRICS,
                   help="comma list; also FAD and RW-SISDR(w)")
    p.add_argument("--out", required=True, help="output metric-score CSV")
    p.add_argument("--window-s", type=float, default=1.0)
    p.add_argument("--hop-s", type=float, default=1.0)
    p.add_argument("--filter-len", type=int, default=512)
    p.add_argument("--whole-track", action="store_true",
                   help="single-frame evaluation instead of framewise median")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="QC-filter ratings and correlate with scores")
    p.add_argument("--ratings", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--out-dir", default=".")
    _add_qc_flags(p)
    _add_tau_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="interference/artifact weight sweep")
    p.add_argument("--root")
    p.add_argument("--manifest")
    p.add_argument("--ratings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid-step", type=float, default=0.05)
    _add_qc_flags(p)
    _add_tau_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fad", help="Frechet audio distance between two EMB1 files")
    p.add_argument("--reference", required=True)
    p.add_argument("--estimate", required=True)
    p.add_argument("--out", help="also write the JSON result here")
    p.set_defaults(func=cmd_fad)

    p = sub.add_parser("ratings-qc", help="quality-check listener ratings")
    p.add_argument("--ratings", required=True)
    p.add_argument("--out-violations", required=True)
    p.add_argument("--out-summary", required=True)
    _add_qc_flags(p)
    p.set_defaults(func=cmd_ratings_qc)

    p = sub.add_parser("anchor", help="synthesize a low-pass anchor")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--stem", required=True, help="vocals|drums|bass|other")
    p.add_argument("--sample-format", default="float32",
                   choices=("float32", "int16", "int24", "int32"))
    p.set_defaults(func=cmd_anchor)

    p = sub.add_parser("fragment", help="cut a fragment out of a WAV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--start", type=float, required=True, help="seconds")
    p.add_argument("--duration", type=float, required=True, help="seconds")
    p.add_argument("--sample-format", default="float32",
                   choices=("float32", "int16", "int24", "int32"))
    p.set_defaults(func=cmd_fragment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command in ("eval", "sweep") and not (args.root or args.manifest):
        print(json.dumps({"error": "InputError",
                          "message": "need --root or --manifest"}), file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except NumericalFailureError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except StemevalError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(json.dumps({"error": "InputError", "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
