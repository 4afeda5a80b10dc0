import math

import numpy as np
import pytest

from singqa import FusionModel, LevelMetrics, MetricReport, ScoreCombiner, fuse_forward, rank_predictors


def report_with(system_srcc, system_mse):
    level = LevelMetrics(mse=0.4, lcc=0.6, srcc=0.6, ktau=0.4)
    system = LevelMetrics(mse=system_mse, lcc=0.9, srcc=system_srcc, ktau=0.7)
    return MetricReport(utterance=level, system=system, n_utterances=100, n_systems=10)


class TestRanking:
    def test_srcc_tie_broken_by_mse(self):
        reports = [
            ("A", report_with(0.939, 0.036)),
            ("B", report_with(0.939, 0.241)),
            ("C", report_with(0.931, 0.020)),
        ]
        assert rank_predictors(reports, 2) == ["A", "B"]

    def test_full_sort(self):
        reports = [
            ("x", report_with(0.5, 0.1)),
            ("y", report_with(0.9, 0.1)),
            ("z", report_with(0.7, 0.1)),
        ]
        assert rank_predictors(reports, 3) == ["y", "z", "x"]

    def test_single_report(self):
        assert rank_predictors([("only", report_with(0.5, 0.1))], 1) == ["only"]

    def test_k_too_large(self):
        with pytest.raises(ValueError, match="exceeds"):
            rank_predictors([("a", report_with(0.5, 0.1))], 2)

    def test_lexicographic_final_tiebreak(self):
        reports = [
            ("beta", report_with(0.9, 0.1)),
            ("alpha", report_with(0.9, 0.1)),
        ]
        assert rank_predictors(reports, 2) == ["alpha", "beta"]

    def test_nan_srcc_sorts_last(self):
        reports = [
            ("bad", report_with(math.nan, 0.01)),
            ("good", report_with(0.2, 0.5)),
        ]
        assert rank_predictors(reports, 2) == ["good", "bad"]

    def test_deterministic(self, rng):
        reports = [(f"p{i}", report_with(float(rng.choice([0.7, 0.8])), float(rng.choice([0.1, 0.2]))))
                   for i in range(12)]
        assert rank_predictors(reports, 12) == rank_predictors(list(reversed(reports)), 12)


class TestFuseForward:
    def test_uniform_weights_average(self):
        model = FusionModel(member_ids=("a", "b", "c"), weights=np.full(3, 1 / 3), bias=0.0)
        assert fuse_forward([3.0, 4.0, 5.0], model) == pytest.approx(4.0)

    def test_one_hot_selects_member(self):
        model = FusionModel(member_ids=("a", "b"), weights=np.array([0.0, 1.0]), bias=0.0)
        assert fuse_forward([3.0, 4.25], model) == 4.25

    def test_matches_dot_oracle(self, rng):
        for _ in range(20):
            k = int(rng.integers(1, 8))
            w = rng.normal(size=k)
            b = float(rng.normal())
            scores = rng.uniform(1, 5, k)
            model = FusionModel(member_ids=tuple(f"m{i}" for i in range(k)), weights=w, bias=b)
            expected = sum(w[i] * scores[i] for i in range(k)) + b
            assert fuse_forward(scores, model) == pytest.approx(expected, rel=1e-12)

    def test_length_mismatch(self):
        model = FusionModel(member_ids=("a", "b"), weights=np.ones(2), bias=0.0)
        with pytest.raises(ValueError):
            fuse_forward([1.0, 2.0, 3.0], model)

    def test_monotone_when_weights_nonnegative(self, rng):
        model = FusionModel(member_ids=("a", "b", "c"), weights=rng.uniform(0, 1, 3), bias=0.2)
        scores = rng.uniform(1, 5, 3)
        base = fuse_forward(scores, model)
        for j in range(3):
            bumped = scores.copy()
            bumped[j] += 0.5
            assert fuse_forward(bumped, model) >= base


def systems_for(n, k=8):
    return [f"s{i % k}" for i in range(n)]


class TestCombinerTraining:
    def test_exact_member_dominates(self, rng):
        y = rng.uniform(1, 5, 300)
        S = np.column_stack([y, y + rng.normal(0, 0.5, 300)])
        yv = rng.uniform(1, 5, 150)
        Sv = np.column_stack([yv, yv + rng.normal(0, 0.5, 150)])
        comb = ScoreCombiner(learning_rate=1e-3, max_epochs=400, patience=400, seed=0)
        comb.fit(S, y, Sv, yv, systems_for(150))
        assert np.mean(np.abs(comb.predict(Sv) - yv)) < 0.05
        assert comb.weights_[0] > comb.weights_[1]

    def test_single_unbiased_member_stays_near_identity(self, rng):
        y = rng.uniform(1, 5, 200)
        S = y[:, None] + rng.normal(0, 0.05, (200, 1))
        yv = rng.uniform(1, 5, 100)
        Sv = yv[:, None] + rng.normal(0, 0.05, (100, 1))
        comb = ScoreCombiner(max_epochs=100, patience=100, seed=0)
        comb.fit(S, y, Sv, yv, systems_for(100))
        assert comb.weights_[0] == pytest.approx(1.0, abs=0.05)
        assert comb.bias_ == pytest.approx(0.0, abs=0.05)

    def test_identical_members_bounded_by_single_member(self, rng):
        y = rng.uniform(1, 5, 240)
        member = y + 0.1  # identical members, constant offset
        S = np.column_stack([member, member, member])
        yv = rng.uniform(1, 5, 120)
        member_v = yv + 0.1
        Sv = np.column_stack([member_v, member_v, member_v])
        comb = ScoreCombiner(learning_rate=1e-3, max_epochs=300, patience=300, seed=1)
        comb.fit(S, y, Sv, yv, systems_for(120))
        fused = np.mean(np.abs(comb.predict(Sv) - yv))
        single = np.mean(np.abs(member_v - yv))
        assert fused <= single + 1e-6

    def test_initialization_is_uniform_average(self, rng):
        # with zero learning pressure (perfect members) weights stay uniform
        y = rng.uniform(1, 5, 60)
        S = np.column_stack([y, y])
        comb = ScoreCombiner(max_epochs=3, patience=3, seed=0)
        comb.fit(S, y, S, y, systems_for(60))
        assert comb.weights_ == pytest.approx([0.5, 0.5], abs=1e-12)
        assert comb.bias_ == pytest.approx(0.0, abs=1e-12)

    def test_same_seed_bit_identical(self, rng):
        y = rng.uniform(1, 5, 80)
        S = np.column_stack([y + rng.normal(0, s, 80) for s in (0.1, 0.3)])
        kwargs = dict(max_epochs=20, patience=20, seed=9)
        a = ScoreCombiner(**kwargs).fit(S, y, S, y, systems_for(80))
        b = ScoreCombiner(**kwargs).fit(S, y, S, y, systems_for(80))
        assert np.array_equal(a.weights_, b.weights_)
        assert a.history_ == b.history_

    def test_empty_members_rejected(self):
        with pytest.raises(ValueError):
            ScoreCombiner().fit(np.zeros((10, 0)), np.full(10, 3.0), np.zeros((4, 0)), np.full(4, 3.0), systems_for(4))

    def test_validation_required(self, rng):
        y = rng.uniform(1, 5, 10)
        with pytest.raises(ValueError, match="S_val"):
            ScoreCombiner().fit(y[:, None], y)


def test_fusion_model_validation():
    with pytest.raises(ValueError):
        FusionModel(member_ids=("a",), weights=np.ones(2), bias=0.0)
    with pytest.raises(ValueError):
        FusionModel(member_ids=("a", "b"), weights=np.ones(2), bias=0.0, member_digests=("x",))
