"""Fusion operators: per-op oracles plus pipeline-level properties."""

import numpy as np
import pytest

from fusilli import fusion, twoscale

from conftest import synth_image


class TestFusionConfig:
    def test_defaults(self):
        config = fusion.FusionConfig()
        assert config.lam == 5.0
        assert config.block_radius == 1
        assert config.alpha == (0.5, 0.5)
        assert config.taps == (1, 2, 3, 4)
        assert config.epsilon == 1e-12

    def test_taps_are_sorted_and_deduplicated(self):
        assert fusion.FusionConfig(taps=(4, 2, 2, 1)).taps == (1, 2, 4)

    @pytest.mark.parametrize("kwargs", [
        {"lam": -0.5},
        {"block_radius": -1},
        {"alpha": (0.5,)},
        {"alpha": (-0.1, 0.5)},
        {"taps": ()},
        {"taps": (0, 1)},
        {"taps": (5,)},
        {"epsilon": 0.0},
        {"epsilon": -1e-9},
        {"pad_policy": "zero"},
    ])
    def test_rejects_bad_settings(self, kwargs):
        with pytest.raises(ValueError):
            fusion.FusionConfig(**kwargs)


class TestFuseBase:
    def test_weighted_average(self):
        rs = np.random.RandomState(60)
        b1, b2 = rs.rand(6, 7), rs.rand(6, 7)
        got = fusion.fuse_base(b1, b2, alpha=(0.3, 0.6))
        assert np.abs(got - (0.3 * b1 + 0.6 * b2)).max() == 0.0

    def test_equal_weights_preserve_shared_signal(self):
        b = np.random.RandomState(61).rand(5, 5)
        assert np.array_equal(fusion.fuse_base(b, b), b)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            fusion.fuse_base(np.zeros((4, 4)), np.zeros((4, 5)))


class TestActivityMap:
    def test_matches_naive_l1(self):
        stack = np.random.RandomState(62).normal(0, 1, (7, 5, 6)).astype(np.float32)
        want = np.zeros((5, 6))
        for c in range(7):
            want += np.abs(stack[c].astype(np.float64))
        got = fusion.activity_map(stack)
        assert got.dtype == np.float64
        assert np.abs(got - want).max() <= 1e-12

    def test_nonnegative(self):
        stack = np.random.RandomState(63).normal(0, 1, (4, 8, 8)).astype(np.float32)
        assert fusion.activity_map(stack).min() >= 0.0

    def test_rejects_non_3d(self):
        with pytest.raises(ValueError, match="stack"):
            fusion.activity_map(np.zeros((4, 4)))


class TestBlockAverage:
    def test_radius_zero_is_identity(self):
        m = np.random.RandomState(64).rand(5, 9)
        got = fusion.block_average(m, 0)
        assert np.array_equal(got, m)
        assert got is not m

    @pytest.mark.parametrize("radius", [1, 2])
    def test_matches_loop_oracle(self, radius):
        m = np.random.RandomState(65 + radius).rand(6, 8)
        h, w = m.shape
        want = np.zeros_like(m)
        for y in range(h):
            for x in range(w):
                acc = 0.0
                for dy in range(-radius, radius + 1):
                    for dx in range(-radius, radius + 1):
                        yy, xx = y + dy, x + dx
                        if 0 <= yy < h and 0 <= xx < w:
                            acc += m[yy, xx]
                want[y, x] = acc / (2 * radius + 1) ** 2
        assert np.abs(fusion.block_average(m, radius) - want).max() <= 1e-12

    def test_border_divisor_stays_full(self):
        # corner of a constant map averages below the plateau value
        got = fusion.block_average(np.ones((4, 4)), 1)
        assert got[0, 0] == pytest.approx(4.0 / 9.0)
        assert got[1, 1] == pytest.approx(1.0)

    def test_rejects_negative_radius(self):
        with pytest.raises(ValueError, match=">= 0"):
            fusion.block_average(np.ones((3, 3)), -1)


class TestSoftmaxWeights:
    def test_normalization_and_range(self):
        rs = np.random.RandomState(66)
        m1, m2 = rs.rand(9, 11) * 10, rs.rand(9, 11) * 10
        w1, w2 = fusion.softmax_weights(m1, m2)
        assert np.abs(w1 + w2 - 1.0).max() <= 1e-9
        assert w1.min() >= 0.0 and w1.max() <= 1.0
        assert w2.min() >= 0.0 and w2.max() <= 1.0

    def test_flat_fallback(self):
        zero = np.zeros((3, 3))
        w1, w2 = fusion.softmax_weights(zero, zero)
        assert np.all(w1 == 0.5) and np.all(w2 == 0.5)

    def test_epsilon_threshold(self):
        tiny = np.full((2, 2), 1e-13)
        w1, w2 = fusion.softmax_weights(tiny, tiny, epsilon=1e-12)
        assert np.all(w1 == 0.5)
        live = np.full((2, 2), 1.0)
        w1, w2 = fusion.softmax_weights(live, 3 * live, epsilon=1e-12)
        assert np.abs(w1 - 0.25).max() <= 1e-12

    def test_swap_symmetry_is_exact(self):
        rs = np.random.RandomState(67)
        m1, m2 = rs.rand(6, 6), rs.rand(6, 6)
        w1, w2 = fusion.softmax_weights(m1, m2)
        v2, v1 = fusion.softmax_weights(m2, m1)
        assert np.array_equal(w1, v1)
        assert np.array_equal(w2, v2)

    def test_scale_invariance(self):
        rs = np.random.RandomState(68)
        m1, m2 = rs.rand(6, 6) + 0.1, rs.rand(6, 6) + 0.1
        w1, _ = fusion.softmax_weights(m1, m2)
        s1, _ = fusion.softmax_weights(137.0 * m1, 137.0 * m2)
        assert np.abs(w1 - s1).max() <= 1e-12


class TestUpsampleWeights:
    @pytest.mark.parametrize("factor", [1, 2, 4, 8])
    def test_matches_kron_oracle(self, factor):
        m = np.random.RandomState(69).rand(3, 4)
        got = fusion.upsample_weights(m, factor)
        assert np.array_equal(got, np.kron(m, np.ones((factor, factor))))

    def test_nearest_neighbor_semantics(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        up = fusion.upsample_weights(m, 2)
        for y in range(4):
            for x in range(4):
                assert up[y, x] == m[y // 2, x // 2]

    @pytest.mark.parametrize("factor", [0, 3, 16, -2])
    def test_rejects_bad_factor(self, factor):
        with pytest.raises(ValueError, match="factor"):
            fusion.upsample_weights(np.ones((2, 2)), factor)


class TestDetailCombination:
    def test_fuse_detail_layer(self):
        rs = np.random.RandomState(70)
        w1 = rs.rand(4, 5)
        w2 = 1.0 - w1
        d1, d2 = rs.normal(0, 1, (4, 5)), rs.normal(0, 1, (4, 5))
        got = fusion.fuse_detail_layer(w1, w2, d1, d2)
        assert np.abs(got - (w1 * d1 + w2 * d2)).max() == 0.0

    def test_fuse_detail_layer_shape_check(self):
        with pytest.raises(ValueError, match="dimensions differ"):
            fusion.fuse_detail_layer(np.ones((2, 2)), np.ones((2, 2)),
                                     np.ones((2, 2)), np.ones((2, 3)))

    def test_max_select_is_pixelwise_signed_max(self):
        rs = np.random.RandomState(71)
        candidates = [rs.normal(0, 1, (5, 6)) for _ in range(4)]
        got = fusion.max_select(candidates)
        assert np.array_equal(got, np.max(np.stack(candidates), axis=0))

    def test_max_select_keeps_sign(self):
        got = fusion.max_select([np.array([[-3.0]]), np.array([[-1.5]])])
        assert got[0, 0] == -1.5

    def test_max_select_rejects_empty_and_ragged(self):
        with pytest.raises(ValueError, match="at least one"):
            fusion.max_select([])
        with pytest.raises(ValueError, match="dimensions differ"):
            fusion.max_select([np.ones((2, 2)), np.ones((3, 2))])


class TestFuseDetail:
    def test_identical_details_pass_through(self, backbone):
        _, detail = twoscale.decompose(synth_image(72, (24, 32)), 5.0)
        fused = fusion.fuse_detail(detail, detail, backbone)
        assert np.array_equal(fused, detail)

    def test_output_matches_input_shape(self, backbone):
        for shape in [(16, 16), (17, 19), (33, 47)]:
            d1 = synth_image(73, shape) - 0.5
            d2 = synth_image(74, shape) - 0.5
            assert fusion.fuse_detail(d1, d2, backbone).shape == shape

    def test_pixelwise_convexity_bounds(self, backbone):
        # every candidate is a convex mix, so the max stays within the envelope
        d1 = synth_image(75, (24, 24)) - 0.5
        d2 = synth_image(76, (24, 24)) - 0.5
        fused = fusion.fuse_detail(d1, d2, backbone)
        lo = np.minimum(d1, d2) - 1e-12
        hi = np.maximum(d1, d2) + 1e-12
        assert np.all(fused >= lo) and np.all(fused <= hi)

    def test_weight_map_intermediates(self, backbone):
        d1 = synth_image(77, (16, 24)) - 0.5
        d2 = synth_image(78, (16, 24)) - 0.5
        config = fusion.FusionConfig(taps=(1, 3))
        grabbed = {}
        fusion.fuse_detail(d1, d2, backbone, config, intermediates=grabbed)
        assert set(grabbed) == {("weights", 1), ("weights", 3)}
        for tap in (1, 3):
            w1, w2 = grabbed[("weights", tap)]
            assert w1.shape == d1.shape and w2.shape == d1.shape
            assert np.abs(w1 + w2 - 1.0).max() <= 1e-9

    def test_single_tap_equals_its_candidate(self, backbone):
        # with one tap the max is over one candidate
        d1 = synth_image(79, (16, 16)) - 0.5
        d2 = synth_image(80, (16, 16)) - 0.5
        config = fusion.FusionConfig(taps=(2,))
        grabbed = {}
        fused = fusion.fuse_detail(d1, d2, backbone, config, intermediates=grabbed)
        w1, w2 = grabbed[("weights", 2)]
        assert np.abs(fused - (w1 * d1 + w2 * d2)).max() <= 1e-12


class TestFusePair:
    def test_dimension_mismatch_names_both_sizes(self, backbone):
        with pytest.raises(ValueError, match=r"64x48 vs 32x32"):
            fusion.fuse_pair(np.zeros((48, 64)), np.zeros((32, 32)), backbone)

    def test_intermediates_are_complete(self, backbone):
        i1 = synth_image(81, (16, 16))
        i2 = synth_image(82, (16, 16))
        grabbed = {}
        fused = fusion.fuse_pair(i1, i2, backbone, intermediates=grabbed)
        for key in ("base_1", "detail_1", "base_2", "detail_2",
                    "fused_base", "fused_detail"):
            assert grabbed[key].shape == (16, 16)
        for tap in (1, 2, 3, 4):
            assert ("weights", tap) in grabbed
        recombined = grabbed["fused_base"] + grabbed["fused_detail"]
        assert np.abs(fused - recombined).max() == 0.0

    def test_respects_config(self, backbone):
        i1 = synth_image(83, (16, 16))
        i2 = synth_image(84, (16, 16))
        stock = fusion.fuse_pair(i1, i2, backbone)
        tweaked = fusion.fuse_pair(
            i1, i2, backbone,
            fusion.FusionConfig(lam=1.0, block_radius=0, taps=(1, 2)))
        assert not np.array_equal(stock, tweaked)

    def test_base_weights_shift_output(self, backbone):
        i1 = synth_image(85, (16, 16))
        i2 = synth_image(86, (16, 16))
        favor_1 = fusion.fuse_pair(i1, i2, backbone, fusion.FusionConfig(alpha=(1.0, 0.0)))
        favor_2 = fusion.fuse_pair(i1, i2, backbone, fusion.FusionConfig(alpha=(0.0, 1.0)))
        assert not np.array_equal(favor_1, favor_2)

    def test_repeat_runs_are_bitwise_identical(self, backbone):
        i1 = synth_image(87, (17, 19))
        i2 = synth_image(88, (17, 19))
        a = fusion.fuse_pair(i1, i2, backbone)
        b = fusion.fuse_pair(i1, i2, backbone)
        assert np.array_equal(a, b)
