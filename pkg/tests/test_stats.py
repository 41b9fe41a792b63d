from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from glitchtriage.aggregate import (
    CANDIDATE_STATS,
    FEATURE_NAMES,
    EmptySequence,
    SequenceStats,
    WINDOW_SIZES,
    compute_stats,
    correlation_filter,
    feature_vector,
    write_features_csv,
)
from glitchtriage.core import FrameLabel
from glitchtriage.lr import apply_scaler, fit_scaler


def naive_stats(bits: list[int]) -> dict:
    """Independent O(T*W) enumeration oracle for every statistic."""
    T = len(bits)
    glitch_count = sum(bits)
    max_run = 0
    for start in range(T):
        for end in range(start, T):
            if all(bits[start : end + 1]):
                max_run = max(max_run, end - start + 1)
    runs = 0
    for i, b in enumerate(bits):
        if b and (i == 0 or not bits[i - 1]):
            runs += 1
    max_win = {}
    for window in WINDOW_SIZES:
        w = min(window, T)
        max_win[window] = max(sum(bits[i : i + w]) for i in range(T - w + 1))
    return {
        "T": T,
        "glitch_count": glitch_count,
        "frac": glitch_count / T,
        "max_run": max_run,
        "max_win": max_win,
        "run_count": runs,
        "run_density": runs / T,
    }


def assert_matches_oracle(bits: list[int]):
    stats = compute_stats(bits)
    oracle = naive_stats(bits)
    assert stats.T == oracle["T"]
    assert stats.glitch_count == oracle["glitch_count"]
    assert stats.frac == oracle["frac"]
    assert stats.max_run == oracle["max_run"]
    assert dict(stats.max_win) == oracle["max_win"]
    assert stats.run_count == oracle["run_count"]
    assert stats.run_density == oracle["run_density"]


class TestComputeStats:
    def test_worked_example(self):
        stats = compute_stats([0, 1, 1, 0, 1, 1, 1, 0])
        assert stats.T == 8
        assert stats.frac == 0.625
        assert stats.max_run == 3
        assert stats.max_win[5] == 4
        assert stats.run_count == 2
        assert stats.run_density == 0.25

    def test_all_clean(self):
        stats = compute_stats([0] * 10)
        assert stats.glitch_count == 0
        assert stats.max_run == 0
        assert all(v == 0 for v in stats.max_win.values())
        assert stats.run_density == 0

    def test_all_glitchy_short_sequence_clips_windows(self):
        stats = compute_stats([1, 1, 1])
        assert stats.frac == 1.0
        assert stats.max_run == 3
        assert stats.max_win[5] == 3
        assert stats.max_win[20] == 3

    def test_accepts_frame_labels(self):
        stats = compute_stats([FrameLabel.CLEAN, FrameLabel.GLITCHY, FrameLabel.GLITCHY])
        assert stats.glitch_count == 2 and stats.max_run == 2

    def test_empty_sequence(self):
        with pytest.raises(EmptySequence):
            compute_stats([])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(0, 1), min_size=1, max_size=60))
    def test_matches_naive_oracle(self, bits):
        assert_matches_oracle(bits)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(0, 1), min_size=1, max_size=200))
    def test_invariant_inequalities(self, bits):
        s = compute_stats(bits)
        assert 0 <= s.max_run <= s.glitch_count <= s.T
        assert s.frac == s.glitch_count / s.T
        assert s.run_count <= (s.T + 1) // 2
        assert s.run_density == s.run_count / s.T
        for w, value in s.max_win.items():
            assert min(s.max_run, w) <= value <= min(w, s.glitch_count)


def test_feature_vector_order():
    stats = compute_stats([0, 1, 1, 0, 1, 1, 1, 0])
    assert FEATURE_NAMES == ("T", "frac", "max_run", "max_win_5", "run_density")
    assert list(feature_vector(stats)) == [8, 0.625, 3, 4, 0.25]


class TestCorrelationFilter:
    def _stats_rows(self, sequences):
        return [compute_stats(bits) for bits in sequences]

    def test_identical_pair_keeps_only_the_earlier_candidate(self):
        # Handcrafted rows: every column independent noise except
        # max_win_10 == max_win_5 exactly, so precisely that pair trips the
        # threshold and the later name is dropped.
        rng = np.random.default_rng(0)
        rows = []
        for _ in range(60):
            w5 = int(rng.integers(0, 40))
            rows.append(
                SequenceStats(
                    T=int(rng.integers(1, 100)),
                    glitch_count=int(rng.integers(0, 100)),
                    frac=float(rng.random()),
                    max_run=int(rng.integers(0, 100)),
                    max_win={5: w5, 10: w5, 15: int(rng.integers(0, 100)), 20: int(rng.integers(0, 100))},
                    run_count=int(rng.integers(0, 50)),
                    run_density=float(rng.random()),
                )
            )
        selected = correlation_filter(rows, threshold=0.9)
        assert "max_win_5" in selected
        assert "max_win_10" not in selected
        assert set(CANDIDATE_STATS) - set(selected) == {"max_win_10"}

    def test_degenerate_short_sequences_collapse_windows(self):
        # With T = 5 every window statistic equals the glitchy count, which in
        # turn is frac * 5; the whole redundant family folds into frac.
        rng = np.random.default_rng(0)
        rows = self._stats_rows([rng.integers(0, 2, size=5).tolist() for _ in range(40)])
        with pytest.warns(UserWarning):  # T is constant
            selected = correlation_filter(rows, threshold=0.9)
        assert "frac" in selected
        assert not any(name.startswith("max_win") for name in selected)
        assert "glitch_count" not in selected

    def test_requires_three_rows(self):
        rows = self._stats_rows([[0, 1], [1, 0]])
        with pytest.raises(ValueError, match="at least 3 rows"):
            correlation_filter(rows)

    def test_constant_feature_warns_and_survives(self):
        rows = self._stats_rows([[0, 1, 0], [1, 0, 1], [0, 0, 1], [1, 1, 0]])  # T constant = 3
        with pytest.warns(UserWarning, match="constant statistics"):
            selected = correlation_filter(rows, threshold=0.9)
        assert "T" in selected

    def test_drop_rule_prefers_earlier_candidate(self):
        assert CANDIDATE_STATS.index("frac") < CANDIDATE_STATS.index("glitch_count")
        assert CANDIDATE_STATS.index("max_win_5") < CANDIDATE_STATS.index("max_win_10")

    def test_default_corpus_fixture(self):
        # Screening predictions simulated over the default synthetic corpus.
        # The window family collapses onto max_win_5 as expected, but this
        # corpus's raw glitchy count is not redundant with frac at |r| > 0.9,
        # so six candidates survive instead of the five-feature set the
        # screening produced on real-world prediction data.
        from glitchtriage.backends import SimulatedBackend
        from glitchtriage.evaluation import frame_labels_by_video
        from glitchtriage.prompting import REALWORLD9
        from glitchtriage.sequencer import ReferencePolicy, process_video
        from glitchtriage.synth import PatternSpec, gen_corpus

        corpus = gen_corpus(150, 150, PatternSpec(seed=0))
        backend = SimulatedBackend(0.76, 0.2956, seed=1, truth=corpus.truth)
        policy = ReferencePolicy.last_clean_frame()
        preds = []
        for manifest in corpus.manifests:
            preds.extend(process_video(manifest, policy, backend, REALWORLD9))
        rows = [compute_stats(seq) for seq in frame_labels_by_video(preds).values()]
        assert correlation_filter(rows, threshold=0.9) == [
            "T",
            "frac",
            "max_run",
            "max_win_5",
            "run_density",
            "glitch_count",
        ]


class TestScaler:
    def test_population_variance_example(self):
        scaler = fit_scaler(np.array([[1.0], [2.0], [3.0]]))
        assert scaler.means[0] == pytest.approx(2.0)
        assert scaler.stds[0] == pytest.approx(0.816496580927726)  # sqrt(2/3)
        assert scaler.degenerate == ()

    def test_constant_column_forced_to_unit_std_and_flagged(self):
        scaler = fit_scaler(np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]))
        assert scaler.stds[0] == 1.0
        assert scaler.degenerate == (0,)

    def test_apply_after_fit_standardizes(self):
        rng = np.random.default_rng(3)
        X = rng.normal(5, 3, size=(200, 4))
        scaled = apply_scaler(X, fit_scaler(X))
        assert np.allclose(scaled.mean(axis=0), 0, atol=1e-9)
        assert np.allclose(scaled.std(axis=0), 1, atol=1e-9)


def test_features_csv(tmp_path):
    stats = compute_stats([0, 1, 1, 0, 1, 1, 1, 0])
    path = tmp_path / "features.csv"
    write_features_csv(
        path,
        [("vid_a", stats, FrameLabel.GLITCHY), ("vid_b", stats, FrameLabel.CLEAN), ("vid_c", stats, None)],
    )
    lines = path.read_text().splitlines()
    assert lines[0] == "video_id,T,frac,max_run,max_win_5,run_density,label"
    assert lines[1] == "vid_a,8,0.625,3,4,0.25,1"
    assert lines[2].endswith(",0")
    assert lines[3].endswith(",")
