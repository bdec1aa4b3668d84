"""Rectangle-contrast features and the integral image behind them."""

import numpy as np
import pytest

from phoneboost import haar
from phoneboost.haar import HaarFeature, IntegralImage, KINDS


def count_positions(bands: int, columns: int) -> int:
    """Brute-force enumeration size: every kind, every footprint multiple,
    every in-bounds origin. Written as bare loops so it shares nothing with
    the production enumerator."""
    total = 0
    for cw, ch in KINDS.values():
        for width in range(cw, columns + 1, cw):
            for height in range(ch, bands + 1, ch):
                total += (bands - height + 1) * (columns - width + 1)
    return total


def count_positions_scaled(bands: int, columns: int, scales) -> int:
    total = 0
    for cw, ch in KINDS.values():
        for s in scales:
            width, height = cw * s, ch * s
            if width <= columns and height <= bands:
                total += (bands - height + 1) * (columns - width + 1)
    return total


def direct_response(feature: HaarFeature, values: np.ndarray) -> float:
    """Weighted plain-python pixel sums, no integral table."""
    total = 0.0
    for b0, c0, b1, c1, weight in feature.rects():
        total += weight * float(values[b0:b1, c0:c1].sum())
    return total


class TestIntegralImage:
    def test_rect_sums_match_slices(self, rng):
        values = rng.random((10, 10))
        image = haar.integral(values)
        for _ in range(200):
            b0, b1 = sorted(rng.integers(0, 11, size=2))
            c0, c1 = sorted(rng.integers(0, 11, size=2))
            want = float(values[b0:b1, c0:c1].sum())
            assert image.rect_sum(int(b0), int(c0), int(b1), int(c1)) == \
                pytest.approx(want, abs=1e-9)

    def test_ones_block(self):
        image = haar.integral(np.ones((3, 3)))
        assert image.rect_sum(0, 0, 3, 3) == 9.0

    def test_empty_rectangle_is_zero(self, rng):
        image = haar.integral(rng.random((4, 4)))
        assert image.rect_sum(2, 1, 2, 3) == 0.0
        assert image.rect_sum(1, 2, 3, 2) == 0.0

    def test_out_of_bounds_rejected(self):
        image = haar.integral(np.ones((4, 4)))
        with pytest.raises(ValueError, match="leaves"):
            image.rect_sum(0, 0, 5, 2)
        with pytest.raises(ValueError, match="leaves"):
            image.rect_sum(-1, 0, 2, 2)

    def test_entries_are_cumulative_sums(self, rng):
        values = rng.random((5, 6))
        entries = haar.integral(values).entries
        padded = np.zeros((6, 7))
        padded[1:, 1:] = values.cumsum(axis=0).cumsum(axis=1)
        assert np.allclose(entries, padded, atol=1e-12)

    def test_accepts_spectrogram_duck_type(self, rng):
        from phoneboost.dsp import Spectrogram
        values = rng.random((4, 5))
        image = haar.integral(Spectrogram(values, "normalized"))
        assert image.shape == (4, 5)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            haar.integral(np.zeros((0, 4)))
        with pytest.raises(ValueError):
            haar.integral(np.zeros(9))


HAND_IMAGE = np.array([[1.0, 5.0, 2.0],
                       [0.0, 3.0, 1.0],
                       [4.0, 2.0, 6.0]])

# responses computed by hand from the kind definitions
HAND_CASES = [
    (HaarFeature("edge_vertical", 0, 0, 2, 2), -7.0),   # (1+0) - (5+3)
    (HaarFeature("edge_horizontal", 0, 0, 2, 2), 3.0),  # (1+5) - (0+3)
    (HaarFeature("line_vertical", 0, 0, 3, 1), 7.0),    # -1 + 2*5 - 2
    (HaarFeature("line_horizontal", 0, 0, 1, 3), -5.0),  # -1 + 2*0 - 4
    (HaarFeature("center_surround", 0, 0, 3, 3), 3.0),  # 9*3 - 24
    (HaarFeature("diagonal", 0, 0, 2, 2), -1.0),        # +1 -5 -0 +3
]


class TestEvalHaar:
    @pytest.mark.parametrize("feature,expected", HAND_CASES,
                             ids=[f.kind for f, _ in HAND_CASES])
    def test_hand_computed_responses(self, feature, expected):
        image = haar.integral(HAND_IMAGE)
        assert haar.eval_haar(feature, image) == pytest.approx(expected,
                                                               abs=1e-12)

    def test_matches_direct_summation(self, rng):
        values = rng.random((14, 15))
        image = haar.integral(values)
        bank = haar.enumerate_haar(14, 15, scales=[1, 2, (3, 2)])
        for feature in bank:
            assert haar.eval_haar(feature, image) == pytest.approx(
                direct_response(feature, values), abs=1e-9)

    def test_bank_evaluate_matches_scalar_path(self, rng):
        values = rng.random((8, 9))
        image = haar.integral(values)
        bank = haar.enumerate_haar(8, 9, scales=[1, 2])
        vector = bank.evaluate(image)
        assert vector.shape == (len(bank),)
        for i, feature in enumerate(bank):
            assert vector[i] == pytest.approx(haar.eval_haar(feature, image),
                                              abs=1e-12)

    def test_constant_image_gives_exact_zero(self, rng):
        for level in (0.0, 0.3, 1.0, -2.5):
            image = haar.integral(np.full((14, 15), level))
            bank = haar.enumerate_haar(14, 15, scales=[1, 2, 3])
            assert np.all(bank.evaluate(image) == 0.0)
            for feature, _ in HAND_CASES:
                assert haar.eval_haar(feature, image) == 0.0

    def test_offset_invariance_is_exact(self, rng):
        # integer-valued cells keep the shift exact, so the anchor-relative
        # table must be bitwise identical
        values = rng.integers(0, 100, size=(14, 15)).astype(np.float64)
        bank = haar.enumerate_haar(14, 15, scales=[1, 3])
        base = bank.evaluate(haar.integral(values))
        shifted = bank.evaluate(haar.integral(values + 17.0))
        assert np.array_equal(base, shifted)

    def test_edge_on_step_image_gives_half_area(self):
        values = np.zeros((3, 4))
        values[:, :2] = 1.0
        feature = HaarFeature("edge_vertical", 0, 0, 4, 3)
        assert haar.eval_haar(feature, haar.integral(values)) == 6.0

    def test_weights_cancel_for_every_kind(self):
        for kind, (cw, ch) in KINDS.items():
            for s in (1, 2, 3):
                feature = HaarFeature(kind, 0, 0, cw * s, ch * s)
                assert sum(w * (b1 - b0) * (c1 - c0)
                           for b0, c0, b1, c1, w in feature.rects()) == 0.0

    def test_out_of_bounds_feature_rejected(self):
        image = haar.integral(np.zeros((4, 4)))
        with pytest.raises(ValueError, match="leaves"):
            haar.eval_haar(HaarFeature("edge_vertical", 0, 3, 2, 1), image)

    def test_bank_geometry_mismatch_rejected(self, rng):
        bank = haar.enumerate_haar(4, 4, scales=[1])
        with pytest.raises(ValueError, match="4x4"):
            bank.evaluate(haar.integral(rng.random((4, 5))))


class TestEnumeration:
    def test_two_by_two_minimal_bank(self):
        bank = haar.enumerate_haar(2, 2, scales=[1])
        assert len(bank) == 5
        kinds = sorted(f.kind for f in bank)
        assert kinds == ["diagonal", "edge_horizontal", "edge_horizontal",
                         "edge_vertical", "edge_vertical"]

    def test_standard_image_full_bank_size(self):
        bank = haar.enumerate_haar(14, 15)
        assert len(bank) == 22829
        assert len(bank) == count_positions(14, 15)

    def test_standard_image_three_scale_bank_size(self):
        bank = haar.enumerate_haar(14, 15, scales=[1, 2, 3])
        assert len(bank) == 2410
        assert len(bank) == count_positions_scaled(14, 15, [1, 2, 3])

    def test_full_bank_matches_loop_on_odd_geometry(self):
        for bands, columns in ((3, 3), (5, 8), (7, 4)):
            bank = haar.enumerate_haar(bands, columns)
            assert len(bank) == count_positions(bands, columns)

    def test_every_feature_in_bounds(self):
        bank = haar.enumerate_haar(6, 7)
        for f in bank:
            assert f.band + f.height <= 6
            assert f.column + f.width <= 7

    def test_deterministic_and_duplicate_free(self):
        first = haar.enumerate_haar(6, 7, scales=[1, 2])
        second = haar.enumerate_haar(6, 7, scales=[1, 2])
        assert list(first) == list(second)
        serialized = [haar.format_feature(f) for f in first]
        assert len(set(serialized)) == len(serialized)

    def test_int_scale_means_square(self):
        square = haar.enumerate_haar(6, 6, scales=[2])
        pair = haar.enumerate_haar(6, 6, scales=[(2, 2)])
        assert list(square) == list(pair)

    def test_scale_validation(self):
        with pytest.raises(ValueError, match="scales"):
            haar.enumerate_haar(4, 4, scales=[0])
        with pytest.raises(ValueError, match="positive"):
            haar.enumerate_haar(0, 4)


class TestFeatureValidation:
    def test_footprint_multiples_enforced(self):
        with pytest.raises(ValueError, match="multiple of 2"):
            HaarFeature("edge_vertical", 0, 0, 3, 1)
        with pytest.raises(ValueError, match="multiple of 3"):
            HaarFeature("line_horizontal", 0, 0, 1, 4)
        with pytest.raises(ValueError, match=">= 0"):
            HaarFeature("diagonal", -1, 0, 2, 2)
        with pytest.raises(ValueError, match="kind"):
            HaarFeature("blob", 0, 0, 2, 2)

    def test_format_parse_round_trip(self):
        for feature, _ in HAND_CASES:
            line = haar.format_feature(feature)
            assert haar.parse_feature(line) == feature

    def test_parse_rejects_malformed(self):
        with pytest.raises(ValueError, match="expected"):
            haar.parse_feature("edge_vertical 0 0 2")
        with pytest.raises(ValueError, match="kind"):
            haar.parse_feature("blob 0 0 2 2")
