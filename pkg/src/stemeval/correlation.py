"""Rank correlation between listener scores and objective metrics.

Correlation is computed per (participant, track, stem) page: the
listener's 0-100 scores over the systems on that page are compared
with the objective metric's values for the same systems using
Kendall's tau, then the per-page taus are averaged within each stem
class and across the four classes.  Scoring pages this way cancels
mix bias and per-listener scale idiosyncrasies.

The hidden reference and anchor are excluded from correlation pages by
default: references have unbounded energy-ratio scores, so exclusion
is the only treatment that works uniformly across metrics.
"""

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .audio import StemKind
from .errors import (
    JoinError,
    ParameterError,
    ParseError,
    StructuralError,
    UndefinedCorrelationError,
)
from .ratings import ANCHOR_CONDITION, REFERENCE_CONDITION, RatingRecord, group_pages
from .si import SIDecomposition, reweighted_db

SCORES_COLUMNS = ("track_id", "stem", "condition", "metric", "value")

DEFAULT_GRID_STEP = 0.05


def _dense_ranks(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    # ranks via unique: order- and tie-preserving, and safe for +-inf
    return np.searchsorted(np.unique(arr), arr)


def kendall_tau(x, y, tie_mode: str = "tau-b") -> float:
    """Kendall rank correlation of two equally long sequences.

    tau-b (default) corrects the denominator for tied pairs:
    (C - D) / sqrt((n0 - Tx) * (n0 - Ty)) with n0 = n(n-1)/2.  tau-a
    divides by n0 regardless of ties.  Values of +inf are legal and
    rank above every finite value (ties between infs are ties).

    Raises UndefinedCorrelationError when either sequence is entirely
    tied.
    """
    if tie_mode not in ("tau-b", "tau-a"):
        raise ParameterError(f"tie_mode must be 'tau-b' or 'tau-a', got {tie_mode!r}")
    rx = _dense_ranks(x)
    ry = _dense_ranks(y)
    n = rx.size
    if ry.size != n:
        raise ParameterError(f"length mismatch: {n} vs {ry.size}")
    if n < 2:
        raise ParameterError(f"need at least 2 observations, got {n}")

    iu = np.triu_indices(n, 1)
    sx = np.sign(rx[:, None] - rx[None, :])[iu].astype(np.int64)
    sy = np.sign(ry[:, None] - ry[None, :])[iu].astype(np.int64)
    con_minus_dis = int(np.sum(sx * sy))
    tied_x = int(np.sum(sx == 0))
    tied_y = int(np.sum(sy == 0))
    n0 = n * (n - 1) // 2

    if tied_x == n0 or tied_y == n0:
        raise UndefinedCorrelationError(
            "all values tied on one side; ranking carries no information"
        )
    if tie_mode == "tau-a":
        return con_minus_dis / n0
    return con_minus_dis / math.sqrt((n0 - tied_x) * (n0 - tied_y))


@dataclass(frozen=True)
class MetricScoreRecord:
    """One objective metric value for one (track, stem, condition)."""

    track_id: str
    stem: StemKind
    condition: str
    metric: str
    value: float


@dataclass(frozen=True)
class TauRecord:
    """One per-user per-stem rank correlation."""

    participant_id: str
    track_id: str
    stem: StemKind
    metric: str
    tau: float
    n: int


@dataclass
class PerUnitTaus:
    records: list[TauRecord]
    skipped: list[tuple[tuple[str, str, StemKind], str]] = field(default_factory=list)


@dataclass(frozen=True)
class TauAggregate:
    """Mean tau per stem plus the mean of the per-stem means."""

    per_stem: dict[StemKind, float]
    counts: dict[StemKind, int]
    average: float


@dataclass(frozen=True)
class SweepCurve:
    grid: list[float]
    mean_tau_per_stem: dict[StemKind, list[float]]


def read_scores_csv(path) -> list[MetricScoreRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: empty file")
        missing = [c for c in SCORES_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ParseError(f"{path}: header is missing column(s) {missing}")
        for row in reader:
            try:
                value = float(row["value"])
            except ValueError:
                raise ParseError(
                    f"line {reader.line_num}: unparsable value {row['value']!r}"
                ) from None
            records.append(MetricScoreRecord(
                track_id=row["track_id"].strip(),
                stem=StemKind.parse(row["stem"]),
                condition=row["condition"].strip(),
                metric=row["metric"].strip(),
                value=value,
            ))
    return records


def write_scores_csv(records, path):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(SCORES_COLUMNS)
        for r in records:
            writer.writerow([r.track_id, r.stem.value, r.condition, r.metric, repr(r.value)])


def index_scores(records, metric: str) -> dict[tuple[str, StemKind, str], float]:
    """Map (track, stem, condition) -> value for one metric."""
    index = {}
    for r in records:
        if r.metric != metric:
            continue
        key = (r.track_id, r.stem, r.condition)
        if key in index:
            raise ParseError(f"duplicate metric score for {key} / {metric}")
        index[key] = r.value
    return index


def _page_taus(pages, lookup, metric: str, tie_mode: str,
               exclude_hidden: bool) -> PerUnitTaus:
    hidden = {REFERENCE_CONDITION, ANCHOR_CONDITION} if exclude_hidden else set()
    prepared = []
    missing = []
    for key in sorted(pages, key=lambda k: (k[0], k[1], k[2].value)):
        participant, track, stem = key
        page_records = [r for r in pages[key] if r.condition not in hidden]
        conditions = [r.condition for r in page_records]
        if len(set(conditions)) != len(conditions):
            raise StructuralError(
                f"page ({participant}, {track}, {stem.value}) has duplicate conditions"
            )
        page_records.sort(key=lambda r: r.condition)
        for r in page_records:
            if (track, stem, r.condition) not in lookup:
                missing.append((track, stem.value, r.condition))
        prepared.append((key, page_records))
    if missing:
        unique = sorted(set(missing))
        raise JoinError(
            f"{len(unique)} (track, stem, condition) key(s) have no {metric} "
            f"score: {unique[:20]}"
        )

    result = PerUnitTaus(records=[])
    for key, page_records in prepared:
        participant, track, stem = key
        if len(page_records) < 2:
            result.skipped.append((key, "fewer than 2 scoreable conditions"))
            continue
        listener = [r.score for r in page_records]
        objective = [lookup[(track, stem, r.condition)] for r in page_records]
        try:
            tau = kendall_tau(listener, objective, tie_mode=tie_mode)
        except UndefinedCorrelationError as exc:
            result.skipped.append((key, str(exc)))
            continue
        result.records.append(TauRecord(
            participant_id=participant, track_id=track, stem=stem,
            metric=metric, tau=tau, n=len(page_records),
        ))
    return result


def per_unit_tau(ratings, scores, metric: str, tie_mode: str = "tau-b",
                 exclude_hidden: bool = True) -> PerUnitTaus:
    """Kendall's tau per (participant, track, stem) page for one metric.

    ``ratings`` are the quality-filtered records; ``scores`` the
    objective MetricScoreRecords.  Pages with an undefined correlation
    (or fewer than two scoreable conditions) are skipped and counted,
    never silently dropped.

    Raises JoinError (listing the keys) if any rated condition lacks a
    metric score.
    """
    lookup = scores if isinstance(scores, dict) else index_scores(scores, metric)
    return _page_taus(group_pages(ratings), lookup, metric, tie_mode, exclude_hidden)


def aggregate_tau(records) -> TauAggregate:
    """Unweighted mean tau per stem; overall = mean of per-stem means.

    Stems without records are absent from the result, not zero.
    """
    records = list(records)
    if not records:
        raise ParameterError("no tau records to aggregate")
    by_stem = defaultdict(list)
    for r in records:
        by_stem[r.stem].append(r.tau)
    per_stem = {stem: float(np.mean(taus)) for stem, taus in by_stem.items()}
    return TauAggregate(
        per_stem=per_stem,
        counts={stem: len(by_stem[stem]) for stem in per_stem},
        average=float(np.mean(list(per_stem.values()))),
    )


def make_weight_grid(grid_step: float) -> list[float]:
    if not 0.0 < grid_step <= 0.5:
        raise ParameterError(f"grid_step must be in (0, 0.5], got {grid_step}")
    grid = []
    i = 0
    while i * grid_step < 1.0 - 1e-12:
        grid.append(i * grid_step)
        i += 1
    grid.append(1.0)
    return grid


def weight_sweep(decompositions: Mapping, ratings,
                 grid_step: float = DEFAULT_GRID_STEP,
                 tie_mode: str = "tau-b",
                 exclude_hidden: bool = True) -> SweepCurve:
    """Sweep the interference/artifact weight and correlate each point.

    ``decompositions`` maps (track_id, stem, condition) to an
    SIDecomposition (or to a precomputed (target, interference,
    artifact) energy triple).  For each weight w on the grid, every
    decomposition is scored with the reweighted ratio, correlated
    against the filtered ratings page by page, and averaged per stem.
    At w=1 the curve equals the SI-SIR aggregate exactly; at w=0 the
    SI-SAR aggregate.
    """
    energies = {}
    for key, d in decompositions.items():
        if isinstance(d, SIDecomposition):
            energies[key] = (d.target_energy, d.interference_energy, d.artifact_energy)
        else:
            energies[key] = tuple(map(float, d))

    grid = make_weight_grid(grid_step)
    pages = group_pages(ratings)
    per_stem_curves = defaultdict(list)
    stems_seen = []
    for w in grid:
        lookup = {key: reweighted_db(*triple, w) for key, triple in energies.items()}
        taus = _page_taus(pages, lookup, f"RW-SISDR({w:g})", tie_mode, exclude_hidden)
        if not taus.records:
            raise UndefinedCorrelationError(
                f"no page produced a defined correlation at w={w:g}"
            )
        aggregate = aggregate_tau(taus.records)
        if not stems_seen:
            stems_seen = sorted(aggregate.per_stem, key=lambda s: s.value)
        for stem in stems_seen:
            per_stem_curves[stem].append(aggregate.per_stem.get(stem, math.nan))
    return SweepCurve(grid=grid, mean_tau_per_stem=dict(per_stem_curves))
