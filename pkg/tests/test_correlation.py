import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stemeval import (
    JoinError,
    MetricScoreRecord,
    PERFECT_FIT,
    ParameterError,
    StemKind,
    UndefinedCorrelationError,
    aggregate_tau,
    kendall_tau,
    per_unit_tau,
    read_scores_csv,
    si_decompose,
    weight_sweep,
    write_scores_csv,
)
from stemeval.correlation import TauRecord, make_weight_grid
from tests.test_ratings import make_page


def tau_oracle(x, y, tie_mode="tau-b"):
    """Literal pair enumeration, independent of the production path."""
    n = len(x)
    concordant = discordant = tied_x = tied_y = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            if x[i] == x[j]:
                tied_x += 1
            if y[i] == y[j]:
                tied_y += 1
            if x[i] == x[j] or y[i] == y[j]:
                continue
            agree = (x[i] < x[j]) == (y[i] < y[j])
            if agree:
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2
    if tie_mode == "tau-a":
        return (concordant - discordant) / n0
    return (concordant - discordant) / math.sqrt((n0 - tied_x) * (n0 - tied_y))


class TestKendallTau:
    def test_identical_ordering(self):
        assert kendall_tau([1, 2, 3], [10, 20, 30]) == 1.0

    def test_reversed_ordering(self):
        assert kendall_tau([1, 2, 3], [30, 20, 10]) == -1.0

    def test_one_discordant_pair(self):
        # 2 concordant, 1 discordant over 3 pairs
        assert kendall_tau([1, 2, 3], [10, 30, 20]) == 1 / 3

    def test_tie_corrected_value(self):
        # one tied pair in x: (C-D)/sqrt((3-1)*(3-0)) = 2/sqrt(6)
        assert kendall_tau([1, 1, 2], [1, 2, 3]) == 2 / math.sqrt(6)

    def test_tau_a_mode(self):
        assert kendall_tau([1, 1, 2], [1, 2, 3], tie_mode="tau-a") == 2 / 3

    def test_all_tied_undefined(self):
        with pytest.raises(UndefinedCorrelationError):
            kendall_tau([5, 5, 5], [1, 2, 3])
        with pytest.raises(UndefinedCorrelationError):
            kendall_tau([1, 2, 3], [7, 7, 7], tie_mode="tau-a")

    def test_perfect_fit_ranks_top(self):
        x = [1.0, 2.0, PERFECT_FIT]
        assert kendall_tau(x, [10, 20, 30]) == 1.0
        assert kendall_tau([PERFECT_FIT, 1.0, PERFECT_FIT], [5, 1, 5]) == 1.0

    @settings(max_examples=300)
    @given(
        st.integers(2, 6).flatmap(
            lambda n: st.tuples(
                st.lists(st.integers(0, 4), min_size=n, max_size=n),
                st.lists(st.integers(0, 4), min_size=n, max_size=n),
            )
        ),
        st.sampled_from(["tau-b", "tau-a"]),
    )
    def test_matches_enumeration_oracle_exactly(self, xy, tie_mode):
        x, y = xy
        if len(set(x)) < 2 or len(set(y)) < 2:
            with pytest.raises(UndefinedCorrelationError):
                kendall_tau(x, y, tie_mode=tie_mode)
            return
        assert kendall_tau(x, y, tie_mode=tie_mode) == tau_oracle(x, y, tie_mode)

    @settings(max_examples=100)
    @given(st.lists(st.tuples(st.integers(1, 50), st.integers(1, 50)),
                    min_size=2, max_size=8))
    def test_monotone_transform_invariance(self, pairs):
        x = [p[0] for p in pairs]
        y = [p[1] for p in pairs]
        if len(set(x)) < 2 or len(set(y)) < 2:
            return
        base = kendall_tau(x, y)
        assert kendall_tau([2 * v + 7 for v in x], [v**3 for v in y]) == base

    def test_symmetry_and_sign_flip(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = rng.permutation(6).tolist()
            y = rng.permutation(6).tolist()
            assert kendall_tau(x, y) == kendall_tau(y, x)
            assert kendall_tau(x, [-v for v in y]) == -kendall_tau(x, y)

    def test_length_checks(self):
        with pytest.raises(ParameterError):
            kendall_tau([1], [2])
        with pytest.raises(ParameterError):
            kendall_tau([1, 2], [1, 2, 3])


def scores_for(track="t1", stem=StemKind.VOCALS, metric="SI-SDR", **values):
    return [MetricScoreRecord(track, stem, cond, metric, value)
            for cond, value in values.items()]


class TestPerUnitTau:
    def test_agreeing_page(self):
        ratings = make_page("p1", "t1", StemKind.VOCALS,
                            systems=(("sysA", 20), ("sysB", 50), ("sysC", 80),
                                     ("sysD", 90)))
        scores = scores_for(sysA=1.0, sysB=2.0, sysC=3.0, sysD=4.0)
        result = per_unit_tau(ratings, scores, "SI-SDR")
        assert len(result.records) == 1
        assert result.records[0].tau == 1.0
        assert result.records[0].n == 4

    def test_opposite_users_both_emitted(self):
        ratings = make_page("p1", "t1", StemKind.VOCALS,
                            systems=(("sysA", 20), ("sysB", 80)))
        ratings += make_page("p2", "t1", StemKind.VOCALS,
                             systems=(("sysA", 80), ("sysB", 20)))
        scores = scores_for(sysA=1.0, sysB=2.0)
        result = per_unit_tau(ratings, scores, "SI-SDR")
        taus = {r.participant_id: r.tau for r in result.records}
        assert taus == {"p1": 1.0, "p2": -1.0}

    def test_reference_and_anchor_excluded(self):
        ratings = make_page("p1", "t1", StemKind.VOCALS,
                            systems=(("sysA", 20), ("sysB", 80)))
        scores = scores_for(sysA=1.0, sysB=2.0)
        result = per_unit_tau(ratings, scores, "SI-SDR")
        assert result.records[0].n == 2

    def test_shuffle_invariance(self):
        rng = np.random.default_rng(4)
        ratings = make_page("p1", "t1", StemKind.VOCALS,
                            systems=(("sysA", 20), ("sysB", 50), ("sysC", 80)))
        scores = scores_for(sysA=3.0, sysB=1.0, sysC=2.0)
        base = per_unit_tau(ratings, scores, "SI-SDR").records[0].tau
        for _ in range(5):
            shuffled = list(ratings)
            rng.shuffle(shuffled)
            assert per_unit_tau(shuffled, scores, "SI-SDR").records[0].tau == base

    def test_missing_score_join_error(self):
        ratings = make_page("p1", "t1", StemKind.VOCALS,
                            systems=(("sysA", 20), ("sysB", 80)))
        scores = scores_for(sysA=1.0)
        with pytest.raises(JoinError, match="sysB"):
            per_unit_tau(ratings, scores, "SI-SDR")

    def test_undefined_pages_skipped_and_counted(self):
        ratings = make_page("p1", "t1", StemKind.VOCALS,
                            systems=(("sysA", 50), ("sysB", 50)))
        scores = scores_for(sysA=1.0, sysB=2.0)
        result = per_unit_tau(ratings, scores, "SI-SDR")
        assert result.records == []
        assert len(result.skipped) == 1


class TestAggregate:
    def rec(self, stem, tau, participant="p1"):
        return TauRecord(participant, "t1", stem, "M", tau, 4)

    def test_single_record(self):
        agg = aggregate_tau([self.rec(StemKind.DRUMS, 0.5)])
        assert agg.per_stem == {StemKind.DRUMS: 0.5}
        assert agg.average == 0.5

    def test_average_is_mean_of_stem_means(self):
        records = [
            self.rec(StemKind.VOCALS, 0.316),
            self.rec(StemKind.DRUMS, 0.165),
            self.rec(StemKind.BASS, 0.086),
            self.rec(StemKind.OTHER, 0.273),
        ]
        agg = aggregate_tau(records)
        assert abs(agg.average - 0.210) <= 0.0006

    def test_opposite_records_cancel(self):
        agg = aggregate_tau([self.rec(StemKind.BASS, 1.0, "p1"),
                             self.rec(StemKind.BASS, -1.0, "p2")])
        assert agg.per_stem[StemKind.BASS] == 0.0

    def test_absent_stem_not_zero(self):
        agg = aggregate_tau([self.rec(StemKind.VOCALS, 0.4)])
        assert StemKind.BASS not in agg.per_stem
        assert agg.counts == {StemKind.VOCALS: 1}

    def test_empty_rejected(self):
        with pytest.raises(ParameterError):
            aggregate_tau([])


class TestWeightSweep:
    def build_inputs(self, seed=0):
        rng = np.random.default_rng(seed)
        ratings = []
        decomps = {}
        n = 128
        for track in ("t1", "t2"):
            refs = list(rng.standard_normal((2, n)))
            systems = []
            for i, cond in enumerate(("sysA", "sysB", "sysC")):
                est = refs[0] + (0.1 + 0.3 * i) * refs[1] \
                    + (0.05 + 0.2 * i) * rng.standard_normal(n)
                decomps[(track, StemKind.VOCALS, cond)] = si_decompose(est, refs, 0)
                systems.append((cond, 90 - 30 * i))
            ratings += make_page("p1", track, StemKind.VOCALS,
                                 systems=tuple(systems))
        return decomps, ratings

    def test_endpoints_equal_si_sir_and_si_sar(self):
        decomps, ratings = self.build_inputs()
        curve = weight_sweep(decomps, ratings, grid_step=0.5)
        assert curve.grid == [0.0, 0.5, 1.0]

        from stemeval import si_metrics

        sar_scores = []
        sir_scores = []
        for (track, stem, cond), d in decomps.items():
            est = d.estimate
            m = si_metrics(d, est, d.e_target / d.alpha)
            sar_scores.append(MetricScoreRecord(track, stem, cond, "SI-SAR", m.si_sar))
            sir_scores.append(MetricScoreRecord(track, stem, cond, "SI-SIR", m.si_sir))
        sar_agg = aggregate_tau(per_unit_tau(ratings, sar_scores, "SI-SAR").records)
        sir_agg = aggregate_tau(per_unit_tau(ratings, sir_scores, "SI-SIR").records)
        assert curve.mean_tau_per_stem[StemKind.VOCALS][0] == \
            sar_agg.per_stem[StemKind.VOCALS]
        assert curve.mean_tau_per_stem[StemKind.VOCALS][2] == \
            sir_agg.per_stem[StemKind.VOCALS]

    def test_grid_arithmetic(self):
        assert make_weight_grid(0.5) == [0.0, 0.5, 1.0]
        grid = make_weight_grid(0.05)
        assert len(grid) == 21
        assert grid[0] == 0.0 and grid[-1] == 1.0
        assert all(b > a for a, b in zip(grid, grid[1:]))
        # non-divisor steps still hit both endpoints
        grid = make_weight_grid(0.3)
        assert grid[0] == 0.0 and grid[-1] == 1.0

    def test_curve_rows_align_with_grid(self):
        decomps, ratings = self.build_inputs()
        curve = weight_sweep(decomps, ratings, grid_step=0.25)
        assert len(curve.grid) == 5
        for taus in curve.mean_tau_per_stem.values():
            assert len(taus) == 5

    def test_bad_grid_step(self):
        decomps, ratings = self.build_inputs()
        for step in (0.0, 0.6, -0.1):
            with pytest.raises(ParameterError):
                weight_sweep(decomps, ratings, grid_step=step)


class TestScoresCsv:
    def test_round_trip_with_perfect_fit(self, tmp_path):
        rows = [
            MetricScoreRecord("t1", StemKind.VOCALS, "sysA", "SI-SDR", 3.25),
            MetricScoreRecord("t1", StemKind.VOCALS, "sysB", "SI-SDR", PERFECT_FIT),
            MetricScoreRecord("t1", StemKind.DRUMS, "sysA", "FAD", -0.125),
        ]
        path = tmp_path / "scores.csv"
        write_scores_csv(rows, path)
        text = path.read_text()
        assert "inf" in text
        assert read_scores_csv(path) == rows
