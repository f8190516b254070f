#!/usr/bin/env python3
"""Build a synthetic demo corpus in the layout `stemeval eval` expects.

Three "systems" of decreasing quality are derived from four synthetic
stems per track, listener ratings are generated from the same quality
ordering (with a couple of deliberately sloppy participants so the QC
stage has something to drop), and per-clip EMB1 embeddings are faked
with spreads that track the degradation level.

Usage: python scripts/make_demo_corpus.py <output-dir> [--tracks N]
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from stemeval import AudioBuffer, EmbeddingMatrix, save_wav, write_embeddings

RATE = 16000
SECONDS = 3.0
STEMS = ("vocals", "drums", "bass", "other")

# (bleed gain, noise gain, listener score center)
SYSTEMS = {
    "oracle": (0.02, 0.01, 85),
    "neural": (0.10, 0.08, 65),
    "legacy": (0.40, 0.30, 30),
}


def synth_stem(rng, stem, n):
    t = np.arange(n) / RATE
    if stem == "bass":
        base = np.sin(2 * np.pi * 80 * t) + 0.3 * np.sin(2 * np.pi * 160 * t)
    elif stem == "vocals":
        base = np.sin(2 * np.pi * (300 + 40 * np.sin(2 * np.pi * 3 * t)) * t)
    elif stem == "drums":
        base = rng.standard_normal(n) * (np.sin(2 * np.pi * 2 * t) > 0.7)
    else:
        base = np.sin(2 * np.pi * 440 * t) + 0.5 * np.sin(2 * np.pi * 660 * t)
    stereo = np.stack([base, np.roll(base, 7)]) * 0.2
    return stereo + 0.01 * rng.standard_normal((2, n))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("output", type=Path)
    parser.add_argument("--tracks", type=int, default=3)
    parser.add_argument("--seed", type=int, default=2024)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    root = args.output / "tracks"
    n = int(RATE * SECONDS)

    for index in range(args.tracks):
        track = f"track{index:02d}"
        refs = {stem: synth_stem(rng, stem, n) for stem in STEMS}
        ref_dir = root / track / "references"
        ref_dir.mkdir(parents=True, exist_ok=True)
        for stem, samples in refs.items():
            save_wav(AudioBuffer(samples.astype(np.float32), RATE),
                     ref_dir / f"{stem}.wav")
        mix_others = {
            stem: sum(refs[o] for o in STEMS if o != stem) for stem in STEMS
        }
        for system, (bleed, noise, _) in SYSTEMS.items():
            cond_dir = root / track / "systems" / system
            cond_dir.mkdir(parents=True, exist_ok=True)
            for stem in STEMS:
                est = (refs[stem] + bleed * mix_others[stem]
                       + noise * 0.2 * rng.standard_normal((2, n)))
                save_wav(AudioBuffer(est.astype(np.float32), RATE),
                         cond_dir / f"{stem}.wav")
        for owner, spread in [("references", 0.0)] + [
            (name, params[0] + params[1]) for name, params in SYSTEMS.items()
        ]:
            emb_dir = root / track / "embeddings" / owner
            emb_dir.mkdir(parents=True, exist_ok=True)
            for stem in STEMS:
                rows = rng.standard_normal((16, 8)) * (1.0 + spread) + 3 * spread
                write_embeddings(EmbeddingMatrix(rows.astype(np.float32)),
                                 emb_dir / f"{stem}.emb")

    ratings_path = args.output / "ratings.csv"
    with open(ratings_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["participant_id", "batch", "track_id", "stem",
                         "condition", "score", "page_time_s"])
        for p, participant in enumerate(["p01", "p02", "p03", "p04"]):
            sloppy = participant == "p04"  # fails the reference check
            for index in range(args.tracks):
                track = f"track{index:02d}"
                for stem in STEMS:
                    jitter = rng.integers(-8, 9)
                    ref_score = 70 if sloppy else 97
                    writer.writerow([participant, f"batch{p % 2}", track, stem,
                                     "reference", ref_score, 55 + 5 * p])
                    writer.writerow([participant, f"batch{p % 2}", track, stem,
                                     "anchor", 12, 55 + 5 * p])
                    for system, (_, _, center) in SYSTEMS.items():
                        score = int(np.clip(center + jitter + rng.integers(-6, 7),
                                            0, 100))
                        writer.writerow([participant, f"batch{p % 2}", track,
                                         stem, system, score, 55 + 5 * p])

    print(f"corpus: {root}")
    print(f"ratings: {ratings_path}")


if __name__ == "__main__":
    main()
