#!/usr/bin/env python3
"""Full-corpus reproduction run (hours-scale; needs the real data).

Expected layout under <data-dir>:

    tracks/<track_id>/references/<stem>.wav     full-length or pre-cut stems
    tracks/<track_id>/systems/<condition>/<stem>.wav
    tracks/<track_id>/embeddings/...            optional, enables FAD
    ratings.csv                                 listener ratings (toolkit schema)
    fragments.csv                               optional: track_id,start_s
                                                (cut 10 s fragments before scoring)
    published_taus.csv                          optional: metric,stem,tau to
                                                compare against

Produces scores.csv, report.json, table.csv, qc_summary.json,
violations.csv and sweep.csv under <data-dir>/results (or --out-dir),
and prints per-stem deltas against any published values.
"""

import argparse
import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from stemeval import StemKind, extract_fragment, load_wav, save_wav
from stemeval.cli import main as stemeval_main

ENERGY_METRICS = "SDR,ISR,SIR,SAR,SI-SDR,SI-SIR,SI-SAR,SD-SDR"
FRAGMENT_SECONDS = 10.0


@dataclass
class StudyOutcome:
    taus: dict = field(default_factory=dict)       # metric -> {stem: tau}
    sweep: dict = field(default_factory=dict)      # stem -> [tau per w]
    published: dict = field(default_factory=dict)  # (metric, stem) -> tau
    out_dir: Path | None = None


def _run(*argv):
    code = stemeval_main([str(a) for a in argv])
    if code != 0:
        raise SystemExit(code)


def _stage_fragments(tracks_dir: Path, cuts: dict, staged: Path) -> Path:
    """Cut every wav to its track's 10 s window into a parallel tree."""
    for wav in sorted(tracks_dir.rglob("*.wav")):
        rel = wav.relative_to(tracks_dir)
        track_id = rel.parts[0]
        start = cuts.get(track_id, 0.0)
        target = staged / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        save_wav(extract_fragment(load_wav(wav), start, FRAGMENT_SECONDS), target)
    for emb in sorted(tracks_dir.rglob("*.emb")):
        rel = emb.relative_to(tracks_dir)
        target = staged / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(emb.read_bytes())
    return staged


def run_full_study(data_dir, out_dir=None, grid_step=0.05, workers=4,
                   max_violations=2) -> StudyOutcome:
    data_dir = Path(data_dir)
    tracks = data_dir / "tracks"
    if not tracks.is_dir():
        tracks = data_dir
    out = Path(out_dir) if out_dir else data_dir / "results"
    out.mkdir(parents=True, exist_ok=True)

    cuts_file = data_dir / "fragments.csv"
    if cuts_file.is_file():
        with open(cuts_file, newline="", encoding="utf-8") as handle:
            cuts = {row["track_id"]: float(row["start_s"])
                    for row in csv.DictReader(handle)}
        tracks = _stage_fragments(tracks, cuts, out / "fragments")

    has_embeddings = any(tracks.rglob("*.emb"))
    metrics = ENERGY_METRICS + (",FAD" if has_embeddings else "")

    _run("--workers", workers, "eval", "--root", tracks,
         "--metrics", metrics, "--out", out / "scores.csv")
    _run("analyze", "--ratings", data_dir / "ratings.csv",
         "--scores", out / "scores.csv", "--out-dir", out,
         "--max-violations", max_violations)
    _run("--workers", workers, "sweep", "--root", tracks,
         "--ratings", data_dir / "ratings.csv", "--grid-step", grid_step,
         "--max-violations", max_violations, "--out", out / "sweep.csv")

    outcome = StudyOutcome(out_dir=out)
    report = json.loads((out / "report.json").read_text())
    for metric, entry in report["metrics"].items():
        outcome.taus[metric] = {
            StemKind(stem): tau for stem, tau in entry["per_stem"].items()
        }
    with open(out / "sweep.csv", newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            outcome.sweep.setdefault(StemKind(row["stem"]), []).append(
                float(row["mean_tau"]))

    published_file = data_dir / "published_taus.csv"
    if published_file.is_file():
        with open(published_file, newline="", encoding="utf-8") as handle:
            for row in csv.DictReader(handle):
                key = (row["metric"], StemKind(row["stem"].strip().lower()))
                outcome.published[key] = float(row["tau"])
    return outcome


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("data_dir", type=Path)
    parser.add_argument("--out-dir", type=Path, default=None)
    parser.add_argument("--grid-step", type=float, default=0.05)
    parser.add_argument("--workers", type=int, default=4)
    parser.add_argument("--max-violations", type=int, default=2)
    args = parser.parse_args()

    outcome = run_full_study(args.data_dir, args.out_dir,
                             grid_step=args.grid_step, workers=args.workers,
                             max_violations=args.max_violations)
    print((outcome.out_dir / "table.csv").read_text())
    if outcome.published:
        print("metric,stem,ours,published,delta")
        for (metric, stem), published in sorted(
            outcome.published.items(), key=lambda kv: (kv[0][0], kv[0][1].value)
        ):
            ours = outcome.taus.get(metric, {}).get(stem)
            if ours is None:
                print(f"{metric},{stem.value},missing,{published},-")
            else:
                print(f"{metric},{stem.value},{ours:.3f},{published:.3f},"
                      f"{ours - published:+.3f}")


if __name__ == "__main__":
    main()
