"""Stump search, both boosting flavors, and their serialization."""

import math

import numpy as np
import pytest

from phoneboost import boost
from phoneboost.boost import SampleMatrix, StrongClassifier, Stump


def candidate_thresholds(column: np.ndarray) -> list[float]:
    xs = np.unique(column)
    mids = [(a + b) / 2.0 for a, b in zip(xs, xs[1:])]
    return [float(xs[0] - 1.0)] + mids


def best_discrete_oracle(column, labels, weights):
    """Exhaustive weighted 0/1 error minimization."""
    best = math.inf
    for t in candidate_thresholds(column):
        for polarity in (1, -1):
            pred = np.where(column > t, polarity, -polarity)
            err = float(weights[pred != labels].sum())
            best = min(best, err)
    return best


def best_gentle_oracle(column, labels, weights):
    """Exhaustive weighted squared-residual minimization."""
    best = math.inf
    for t in candidate_thresholds(column):
        above = column > t
        fit = np.zeros_like(labels)
        for side in (above, ~above):
            if weights[side].sum() > 0:
                fit[side] = (weights[side] * labels[side]).sum() \
                    / weights[side].sum()
        best = min(best, float((weights * (labels - fit) ** 2).sum()))
    return best


class TestSampleMatrix:
    def test_default_weights_uniform(self):
        data = SampleMatrix(np.zeros((4, 2)), [1, -1, 1, -1])
        assert np.array_equal(data.weights, np.full(4, 0.25))
        assert data.sample_count == 4
        assert data.feature_count == 2

    def test_weights_normalized(self):
        data = SampleMatrix(np.zeros((2, 1)), [1, -1], weights=[3.0, 1.0])
        assert np.array_equal(data.weights, [0.75, 0.25])

    def test_validation(self):
        with pytest.raises(ValueError, match="-1 or \\+1"):
            SampleMatrix(np.zeros((2, 1)), [1, 0])
        with pytest.raises(ValueError, match="at least one"):
            SampleMatrix(np.zeros((0, 1)), [])
        with pytest.raises(ValueError, match="labels shape"):
            SampleMatrix(np.zeros((2, 1)), [1, -1, 1])
        with pytest.raises(ValueError, match="nonnegative"):
            SampleMatrix(np.zeros((2, 1)), [1, -1], weights=[1.0, -1.0])
        with pytest.raises(ValueError, match="sum to zero"):
            SampleMatrix(np.zeros((2, 1)), [1, -1], weights=[0.0, 0.0])


class TestStumpSearch:
    def test_discrete_hand_case(self):
        data = SampleMatrix(np.array([[1.0], [2.0], [3.0], [4.0]]),
                            [1, -1, 1, -1],
                            weights=[0.4, 0.3, 0.2, 0.1])
        stump, err = boost.fit_stump_discrete(data, 0)
        assert err == pytest.approx(0.2, abs=1e-12)
        assert stump.threshold == 1.5
        assert stump.polarity == -1

    def test_discrete_matches_oracle(self, rng):
        for _ in range(30):
            n = int(rng.integers(3, 15))
            column = rng.integers(0, 6, size=n).astype(np.float64)
            labels = rng.choice([-1.0, 1.0], size=n)
            weights = rng.random(n) + 0.05
            data = SampleMatrix(column[:, None], labels, weights=weights)
            _, err = boost.fit_stump_discrete(data, 0)
            assert err == pytest.approx(
                best_discrete_oracle(column, data.labels, data.weights),
                abs=1e-12)

    def test_discrete_perfect_separation(self):
        data = SampleMatrix(np.array([[0.0], [1.0], [5.0], [6.0]]),
                            [-1, -1, 1, 1])
        stump, err = boost.fit_stump_discrete(data, 0)
        assert err == 0.0
        assert np.array_equal(stump.evaluate(data.values[:, 0]), data.labels)

    def test_discrete_constant_feature_is_hopeless(self):
        data = SampleMatrix(np.ones((4, 1)), [1, -1, 1, -1])
        _, err = boost.fit_stump_discrete(data, 0)
        assert err == pytest.approx(0.5, abs=1e-12)

    def test_gentle_matches_oracle(self, rng):
        for _ in range(30):
            n = int(rng.integers(3, 15))
            column = rng.integers(0, 6, size=n).astype(np.float64)
            labels = rng.choice([-1.0, 1.0], size=n)
            weights = rng.random(n) + 0.05
            data = SampleMatrix(column[:, None], labels, weights=weights)
            _, residual = boost.fit_stump_gentle(data, 0)
            assert residual == pytest.approx(
                best_gentle_oracle(column, data.labels, data.weights),
                abs=1e-9)

    def test_gentle_branch_value_is_weighted_mean(self):
        # single branch holding +1 at weight 0.75 and -1 at 0.25 fits 0.5
        data = SampleMatrix(np.zeros((2, 1)), [1, -1], weights=[0.75, 0.25])
        stump, residual = boost.fit_stump_gentle(data, 0)
        assert stump.above == pytest.approx(0.5, abs=1e-12)
        assert stump.below == 0.0
        assert residual == pytest.approx(0.75, abs=1e-12)

    def test_feature_index_validated(self):
        data = SampleMatrix(np.zeros((2, 1)), [1, -1])
        with pytest.raises(ValueError, match="out of range"):
            boost.fit_stump_discrete(data, 1)
        with pytest.raises(ValueError, match="out of range"):
            boost.fit_stump_gentle(data, -1)

    def test_monotone_transform_keeps_partition(self, rng):
        column = rng.standard_normal(20)
        labels = rng.choice([-1.0, 1.0], size=20)
        plain = SampleMatrix(column[:, None], labels)
        warped = SampleMatrix((column ** 3)[:, None], labels)
        s1, e1 = boost.fit_stump_discrete(plain, 0)
        s2, e2 = boost.fit_stump_discrete(warped, 0)
        assert e1 == e2
        assert np.array_equal(column > s1.threshold,
                              column ** 3 > s2.threshold)
        assert s1.polarity == s2.polarity


class TestDiscreteTraining:
    def _quarter_error_data(self):
        return SampleMatrix(np.array([[1.0], [2.0], [3.0], [4.0]]),
                            [1, -1, 1, -1])

    def test_quarter_error_vote_is_log_three(self):
        clf = boost.train_discrete(self._quarter_error_data(), 1)
        stump, vote = clf.rounds[0]
        assert vote == pytest.approx(math.log(3.0), abs=1e-12)
        assert stump.threshold == 1.5

    def test_reweighting_triples_missed_sample(self):
        captured = []
        boost.train_discrete(self._quarter_error_data(), 1,
                             trace=lambda r, s, v, w: captured.append(w.copy()))
        assert np.allclose(captured[0], [1 / 6, 1 / 6, 1 / 2, 1 / 6],
                           atol=1e-12)

    def test_separable_data_reaches_zero_error(self, rng):
        values = rng.standard_normal((40, 5))
        labels = np.where(values[:, 2] > 0.3, 1.0, -1.0)
        data = SampleMatrix(values, labels)
        clf = boost.train_discrete(data, 10)
        preds = [boost.classify(clf, row) for row in values]
        assert np.array_equal(preds, labels)

    def test_hopeless_data_terminates_early(self):
        data = SampleMatrix(np.ones((4, 2)), [1, -1, 1, -1])
        clf = boost.train_discrete(data, 5)
        assert clf.terminated_early
        assert len(clf) == 0

    def test_weight_invariants_every_round(self, rng):
        values = rng.standard_normal((60, 6))
        labels = np.where(values[:, 0] + 0.5 * rng.standard_normal(60) > 0,
                          1.0, -1.0)
        data = SampleMatrix(values, labels)
        captured = []
        boost.train_discrete(
            data, 20,
            trace=lambda r, s, v, w: captured.append((s, w.copy())))
        assert captured
        for stump, weights in captured:
            assert abs(weights.sum() - 1.0) <= 1e-12
            pred = stump.evaluate(values[:, stump.feature_index])
            missed_mass = weights[pred != labels].sum()
            assert abs(missed_mass - 0.5) <= 1e-9

    def test_round_count_validated(self):
        with pytest.raises(ValueError, match="n_rounds"):
            boost.train_discrete(self._quarter_error_data(), 0)


class TestGentleTraining:
    def test_weight_update_formula(self):
        # outputs are 0.5 for both samples: weights scale by exp(-y/2)
        data = SampleMatrix(np.zeros((2, 1)), [1, -1], weights=[0.75, 0.25])
        captured = []
        boost.train_gentle(data, 1,
                           trace=lambda r, s, v, w: captured.append(w.copy()))
        up = 0.75 * math.exp(-0.5)
        down = 0.25 * math.exp(0.5)
        expect = np.array([up, down]) / (up + down)
        assert np.allclose(captured[0], expect, atol=1e-12)

    def test_weights_stay_normalized(self, rng):
        values = rng.standard_normal((50, 4))
        labels = rng.choice([-1.0, 1.0], size=50)
        captured = []
        boost.train_gentle(SampleMatrix(values, labels), 25,
                           trace=lambda r, s, v, w: captured.append(w.sum()))
        assert len(captured) == 25
        for total in captured:
            assert abs(total - 1.0) <= 1e-12

    def test_exponential_loss_decreases_on_separable(self, rng):
        values = rng.standard_normal((40, 5))
        labels = np.where(values[:, 1] > 0, 1.0, -1.0)
        data = SampleMatrix(values, labels)
        clf = boost.train_gentle(data, 30)
        scores = np.cumsum(boost.round_outputs(clf, values), axis=1)
        losses = np.exp(-labels[:, None] * scores).mean(axis=0)
        assert np.all(np.diff(losses) <= 1e-12)
        assert losses[-1] < losses[0]

    def test_all_votes_are_one(self, rng):
        values = rng.standard_normal((20, 3))
        labels = rng.choice([-1.0, 1.0], size=20)
        clf = boost.train_gentle(SampleMatrix(values, labels), 8)
        assert [vote for _, vote in clf.rounds] == [1.0] * 8

    def test_deterministic(self, rng):
        values = rng.standard_normal((30, 4))
        labels = rng.choice([-1.0, 1.0], size=30)
        data = SampleMatrix(values, labels)
        one = boost.format_classifier(boost.train_gentle(data, 12))
        two = boost.format_classifier(boost.train_gentle(data, 12))
        assert one == two


class TestScoring:
    def _toy_classifier(self):
        return StrongClassifier("discrete", [
            (Stump(0, 0.5, "discrete", polarity=1), 2.0),
            (Stump(1, 0.0, "discrete", polarity=-1), 1.0),
        ], labels=("aa", "iy"))

    def test_single_stump_score(self):
        clf = StrongClassifier("discrete",
                               [(Stump(0, 1.0, "discrete", polarity=1), 2.0)])
        assert boost.score(clf, [3.0]) == 2.0
        assert boost.score(clf, [0.0]) == -2.0

    def test_prefix_scoring(self):
        clf = self._toy_classifier()
        sample = np.array([1.0, 1.0])
        assert boost.score(clf, sample, n_rounds=1) == 2.0
        assert boost.score(clf, sample, n_rounds=2) == 1.0
        assert boost.score(clf, sample) == boost.score(clf, sample, n_rounds=2)

    def test_zero_score_classifies_negative(self):
        clf = StrongClassifier("discrete", [
            (Stump(0, 0.5, "discrete", polarity=1), 1.0),
            (Stump(0, 0.5, "discrete", polarity=-1), 1.0),
        ])
        assert boost.score(clf, [2.0]) == 0.0
        assert boost.classify(clf, [2.0]) == -1

    def test_empty_classifier(self):
        clf = StrongClassifier("gentle", [])
        assert boost.score(clf, [1.0]) == 0.0
        assert boost.classify(clf, [1.0]) == -1

    def test_round_outputs_consistent_with_score(self, rng):
        values = rng.standard_normal((10, 3))
        labels = rng.choice([-1.0, 1.0], size=10)
        clf = boost.train_gentle(SampleMatrix(values, labels), 7)
        outputs = boost.round_outputs(clf, values)
        assert outputs.shape == (10, 7)
        totals = outputs.sum(axis=1)
        for i in range(10):
            assert totals[i] == pytest.approx(boost.score(clf, values[i]),
                                              abs=1e-12)


class TestSerialization:
    def test_round_trip_exact(self, rng):
        values = rng.standard_normal((20, 4))
        labels = rng.choice([-1.0, 1.0], size=20)
        for train in (boost.train_discrete, boost.train_gentle):
            clf = train(SampleMatrix(values, labels), 6, labels=("k", "t"))
            lines = boost.format_classifier(clf)
            back = boost.parse_classifier(lines)
            assert boost.format_classifier(back) == lines
            assert back.labels == ("k", "t")
            assert back.mode == clf.mode

    def test_terminated_flag_round_trips(self):
        clf = boost.train_discrete(SampleMatrix(np.ones((2, 1)), [1, -1]), 3)
        back = boost.parse_classifier(boost.format_classifier(clf))
        assert back.terminated_early

    def test_parse_validation(self):
        with pytest.raises(ValueError, match="header"):
            boost.parse_classifier(["something-else 1", "mode discrete",
                                    "rounds 0"])
        with pytest.raises(ValueError, match="version"):
            boost.parse_classifier(["phoneboost-classifier 9",
                                    "mode discrete", "rounds 0"])
        with pytest.raises(ValueError, match="missing"):
            boost.parse_classifier(["phoneboost-classifier 1",
                                    "mode discrete"])
        with pytest.raises(ValueError, match="ends early"):
            boost.parse_classifier(["phoneboost-classifier 1",
                                    "mode discrete", "rounds 2",
                                    "0 0.5 1 1.0"])
        with pytest.raises(ValueError, match="unexpected"):
            boost.parse_classifier(["phoneboost-classifier 1", "shape 4",
                                    "rounds 0"])

    def test_stump_validation(self):
        with pytest.raises(ValueError, match="mode"):
            Stump(0, 0.0, "soft")
        with pytest.raises(ValueError, match="polarity"):
            Stump(0, 0.0, "discrete", polarity=2)
        with pytest.raises(ValueError, match="mode"):
            StrongClassifier("soft", [])
