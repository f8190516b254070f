"""Listener-study rating ingestion, quality checks, and filtering.

A *page* is one (participant, track, stem) screen: the listener rated
every condition of that stem side by side, including a hidden
reference and a hidden low-pass anchor.  Four quality checks flag
inattentive pages:

  c1  reference minus anchor score must exceed the gap threshold
  c2  reference score must reach the reference floor
  c3  the standard deviation of *all* of a participant's scores must
      reach the spread floor (population estimator; one flag per
      participant, repeated on each of their pages)
  c4  the page rating time must fall inside the plausible time range

Pages failing more than ``max_violations`` checks are dropped.
"""

import csv
from collections import Counter, defaultdict
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .audio import StemKind
from .errors import ParseError, StructuralError

REFERENCE_CONDITION = "reference"
ANCHOR_CONDITION = "anchor"

RATINGS_COLUMNS = (
    "participant_id", "batch", "track_id", "stem", "condition", "score", "page_time_s",
)


@dataclass(frozen=True)
class RatingRecord:
    """One listener rating of one condition on one page."""

    participant_id: str
    batch: str
    track_id: str
    stem: StemKind
    condition: str
    score: int
    page_time_s: float

    @property
    def page(self) -> tuple[str, str, StemKind]:
        return (self.participant_id, self.track_id, self.stem)


@dataclass(frozen=True)
class QcThresholds:
    ref_anchor_gap: float = 10.0
    reference_floor: float = 90.0
    user_stddev_floor: float = 20.0
    time_min_s: float = 20.0
    time_max_s: float = 213.0


@dataclass(frozen=True)
class ViolationReport:
    """Quality-check flags for one page; True means violated."""

    participant_id: str
    track_id: str
    stem: StemKind
    batch: str
    c1_ref_anchor_gap: bool
    c2_reference_floor: bool
    c3_user_stddev: bool
    c4_page_time: bool
    page_time_s: float

    @property
    def page(self) -> tuple[str, str, StemKind]:
        return (self.participant_id, self.track_id, self.stem)

    @property
    def violation_count(self) -> int:
        return sum((self.c1_ref_anchor_gap, self.c2_reference_floor,
                    self.c3_user_stddev, self.c4_page_time))


@dataclass
class RatingsParse:
    records: list[RatingRecord]
    skipped: list[tuple[int, str]] = field(default_factory=list)


@dataclass
class FilterResult:
    kept: list[RatingRecord]
    dropped_pages: int
    total_pages: int
    histogram: dict[int, int]

    @property
    def dropped_fraction(self) -> float:
        return self.dropped_pages / self.total_pages if self.total_pages else 0.0


def _parse_row(row: dict, line: int) -> RatingRecord:
    missing = [c for c in RATINGS_COLUMNS if row.get(c) is None]
    if missing:
        raise ParseError(f"line {line}: missing column(s) {missing}")
    try:
        score = int(row["score"])
    except ValueError:
        raise ParseError(f"line {line}: unparsable score {row['score']!r}") from None
    if not 0 <= score <= 100:
        raise ParseError(f"line {line}: score {score} outside 0-100")
    try:
        page_time = float(row["page_time_s"])
    except ValueError:
        raise ParseError(
            f"line {line}: unparsable page_time_s {row['page_time_s']!r}"
        ) from None
    if page_time < 0:
        raise ParseError(f"line {line}: negative page_time_s {page_time}")
    condition = row["condition"].strip()
    if not condition:
        raise ParseError(f"line {line}: empty condition")
    try:
        stem = StemKind.parse(row["stem"])
    except Exception:
        raise ParseError(f"line {line}: unknown stem {row['stem']!r}") from None
    return RatingRecord(
        participant_id=row["participant_id"].strip(),
        batch=row["batch"].strip(),
        track_id=row["track_id"].strip(),
        stem=stem,
        condition=condition,
        score=score,
        page_time_s=page_time,
    )


def parse_ratings_csv(path, strict: bool = True) -> RatingsParse:
    """Read rating records from CSV.

    In strict mode the first bad row aborts with a ParseError naming
    the line; in lenient mode bad rows are skipped and returned with
    their line numbers and reasons.
    """
    result = RatingsParse(records=[])
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: empty file")
        missing = [c for c in RATINGS_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ParseError(f"{path}: header is missing column(s) {missing}")
        for row in reader:
            try:
                result.records.append(_parse_row(row, reader.line_num))
            except ParseError as exc:
                if strict:
                    raise
                result.skipped.append((reader.line_num, str(exc)))
    return result


def write_ratings_csv(records, path):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(RATINGS_COLUMNS)
        for r in records:
            writer.writerow([
                r.participant_id, r.batch, r.track_id, r.stem.value,
                r.condition, r.score, f"{r.page_time_s:g}",
            ])


def group_pages(records) -> dict[tuple[str, str, StemKind], list[RatingRecord]]:
    pages = defaultdict(list)
    for record in records:
        pages[record.page].append(record)
    return dict(pages)


def run_quality_checks(records, thresholds: QcThresholds = QcThresholds()) -> list[ViolationReport]:
    """Evaluate the four quality checks for every page.

    Raises StructuralError if a page lacks the hidden reference or
    anchor condition (or has duplicates of either).
    """
    pages = group_pages(records)

    spread_violated = {}
    by_participant = defaultdict(list)
    for record in records:
        by_participant[record.participant_id].append(record.score)
    for participant, scores in by_participant.items():
        # population standard deviation over every score the user gave
        spread_violated[participant] = (
            float(np.std(scores)) < thresholds.user_stddev_floor
        )

    reports = []
    for key in sorted(pages, key=lambda k: (k[0], k[1], k[2].value)):
        participant, track, stem = key
        page_records = pages[key]
        refs = [r for r in page_records if r.condition == REFERENCE_CONDITION]
        anchors = [r for r in page_records if r.condition == ANCHOR_CONDITION]
        if len(refs) != 1 or len(anchors) != 1:
            raise StructuralError(
                f"page ({participant}, {track}, {stem.value}) must have exactly one "
                f"reference and one anchor; found {len(refs)} and {len(anchors)}"
            )
        page_time = max(r.page_time_s for r in page_records)
        reports.append(ViolationReport(
            participant_id=participant,
            track_id=track,
            stem=stem,
            batch=page_records[0].batch,
            c1_ref_anchor_gap=(refs[0].score - anchors[0].score) <= thresholds.ref_anchor_gap,
            c2_reference_floor=refs[0].score < thresholds.reference_floor,
            c3_user_stddev=spread_violated[participant],
            c4_page_time=not (thresholds.time_min_s <= page_time <= thresholds.time_max_s),
            page_time_s=page_time,
        ))
    return reports


def filter_ratings(records, reports, max_violations: int = 2) -> FilterResult:
    """Keep records on pages with at most ``max_violations`` failures."""
    counts = {report.page: report.violation_count for report in reports}
    missing = {r.page for r in records if r.page not in counts}
    if missing:
        raise StructuralError(
            f"{len(missing)} page(s) have no violation report, e.g. {sorted(missing)[0]}"
        )
    histogram = Counter(counts.values())
    kept = [r for r in records if counts[r.page] <= max_violations]
    dropped_pages = sum(n for count, n in histogram.items() if count > max_violations)
    return FilterResult(
        kept=kept,
        dropped_pages=dropped_pages,
        total_pages=len(counts),
        histogram={k: histogram.get(k, 0) for k in range(5)},
    )


def write_violations_csv(reports, path):
    flag_names = [f.name for f in fields(ViolationReport) if f.name.startswith("c")]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["participant_id", "track_id", "stem", "batch"]
            + flag_names + ["violation_count", "page_time_s"]
        )
        for r in reports:
            writer.writerow(
                [r.participant_id, r.track_id, r.stem.value, r.batch]
                + [int(getattr(r, name)) for name in flag_names]
                + [r.violation_count, f"{r.page_time_s:g}"]
            )


def qc_summary(reports, max_violations: int, thresholds: QcThresholds = QcThresholds()) -> dict:
    histogram = Counter(r.violation_count for r in reports)
    total = len(reports)
    dropped = sum(n for count, n in histogram.items() if count > max_violations)
    return {
        "pages": total,
        "histogram": {str(k): histogram.get(k, 0) for k in range(5)},
        "dropped_pages": dropped,
        "dropped_fraction": dropped / total if total else 0.0,
        "max_violations": max_violations,
        "metadata": {
            "stddev_estimator": "population",
            "ref_anchor_gap": thresholds.ref_anchor_gap,
            "reference_floor": thresholds.reference_floor,
            "user_stddev_floor": thresholds.user_stddev_floor,
            "time_bounds_s": [thresholds.time_min_s, thresholds.time_max_s],
        },
    }
