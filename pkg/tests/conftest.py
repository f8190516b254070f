"""Shared fixtures: a tiny synthetic corpus in the eval directory layout."""

import csv

import numpy as np
import pytest

from stemeval import AudioBuffer, EmbeddingMatrix, save_wav, write_embeddings

RATE = 8000
SECONDS = 2.0
STEMS = ("vocals", "drums")
# sysGood tracks the reference closely, sysBad adds heavy noise and bleed
CONDITIONS = ("sysGood", "sysBad")


def synth_corpus(root, rng=None, tracks=("track01", "track02")):
    """Write a references/systems/embeddings tree; returns condition map."""
    rng = rng or np.random.default_rng(20_240_501)
    n = int(RATE * SECONDS)
    for track in tracks:
        refs = {stem: rng.standard_normal((2, n)) * 0.1 for stem in STEMS}
        ref_dir = root / track / "references"
        ref_dir.mkdir(parents=True)
        for stem, samples in refs.items():
            save_wav(AudioBuffer(samples.astype(np.float32), RATE),
                     ref_dir / f"{stem}.wav")
        others = {stem: [refs[o] for o in STEMS if o != stem] for stem in STEMS}
        for condition in CONDITIONS:
            cond_dir = root / track / "systems" / condition
            cond_dir.mkdir(parents=True)
            for stem in STEMS:
                bleed = others[stem][0]
                if condition == "sysGood":
                    est = refs[stem] + 0.01 * bleed \
                        + 0.01 * rng.standard_normal((2, n)) * 0.1
                else:
                    est = 0.8 * refs[stem] + 0.3 * bleed \
                        + 0.3 * rng.standard_normal((2, n)) * 0.1
                save_wav(AudioBuffer(est.astype(np.float32), RATE),
                         cond_dir / f"{stem}.wav")
        for owner in ("references",) + CONDITIONS:
            emb_dir = root / track / "embeddings" / owner
            emb_dir.mkdir(parents=True)
            for stem in STEMS:
                shift = {"references": 0.0, "sysGood": 0.2, "sysBad": 1.5}[owner]
                rows = rng.standard_normal((12, 4)).astype(np.float32) + shift
                write_embeddings(EmbeddingMatrix(rows), emb_dir / f"{stem}.emb")
    return tracks


def synth_ratings(path, tracks=("track01", "track02"),
                  participants=("p1", "p2")):
    """Ratings where every listener prefers sysGood, with valid QC pages."""
    rows = []
    for participant in participants:
        for track in tracks:
            for stem in STEMS:
                rows.append([participant, "b1", track, stem, "reference", 98, 60])
                rows.append([participant, "b1", track, stem, "anchor", 15, 60])
                rows.append([participant, "b1", track, stem, "sysGood", 80, 60])
                rows.append([participant, "b1", track, stem, "sysBad", 35, 60])
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["participant_id", "batch", "track_id", "stem",
                         "condition", "score", "page_time_s"])
        writer.writerows(rows)
    return path


@pytest.fixture
def corpus(tmp_path):
    root = tmp_path / "corpus"
    root.mkdir()
    synth_corpus(root)
    ratings = synth_ratings(tmp_path / "ratings.csv")
    return {"root": root, "ratings": ratings, "tmp": tmp_path}
