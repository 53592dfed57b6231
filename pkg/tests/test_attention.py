import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alfie.attention import (
    AttentionRecord,
    AttentionTrace,
    GlobalMaps,
    adjust_opacity,
    aggregate,
    estimate_alpha,
    foreground_cross_map,
    fuse_self_attention,
    minmax_normalize,
)
from alfie.prompts import NounSpans


def make_trace(records, token_strings=("a", "cat"), grid=(4, 4)):
    keyed = {}
    for i, rec in enumerate(records):
        keyed[(100 - i, rec.layer, rec.head)] = rec
    return AttentionTrace(
        token_strings=list(token_strings),
        token_grid=grid,
        sigma_schedule=np.array([1.0, 0.0]),
        steps_recorded=sorted({k[0] for k in keyed}, reverse=True),
        layers=1,
        heads=1,
        records=keyed,
    )


def random_record(rng, gh=4, gw=4, n=2, layer=0, head=0):
    cross = rng.uniform(size=(gh, gw, n))
    cross /= cross.sum(axis=2, keepdims=True)
    self_ = rng.uniform(size=(gh * gw, gh, gw))
    self_ /= self_.sum(axis=(1, 2), keepdims=True)
    return AttentionRecord(layer=layer, head=head, cross=cross, self_=self_)


def spans(*triples, prompt=""):
    return NounSpans(spans=tuple(triples), source_prompt=prompt)


class TestAggregate:
    def test_single_record_is_identity(self):
        rec = random_record(np.random.default_rng(0))
        maps = aggregate(make_trace([rec]))
        np.testing.assert_array_equal(maps.cross, rec.cross)
        np.testing.assert_array_equal(maps.self_, rec.self_)

    def test_symmetric_pair_averages_to_half(self):
        rng = np.random.default_rng(1)
        v = rng.uniform(size=(4, 4, 2))
        a = AttentionRecord(0, 0, v, np.full((16, 4, 4), 0.5))
        b = AttentionRecord(0, 1, -v + 1.0, np.full((16, 4, 4), 0.5))
        maps = aggregate(make_trace([a, b]))
        np.testing.assert_allclose(maps.cross, 0.5)

    def test_mean_matches_brute_force_over_160_records(self):
        rng = np.random.default_rng(2)
        records = [random_record(rng, layer=i % 4, head=i // 4 % 4) for i in range(160)]
        maps = aggregate(make_trace(records))
        cross_sum = sum(r.cross for r in records)
        self_sum = sum(r.self_ for r in records)
        np.testing.assert_allclose(maps.cross, cross_sum / 160.0, atol=1e-6)
        np.testing.assert_allclose(maps.self_, self_sum / 160.0, atol=1e-6)

    def test_record_order_invariance(self):
        rng = np.random.default_rng(3)
        records = [random_record(rng, layer=i) for i in range(6)]
        fwd = aggregate(make_trace(records))
        rev = aggregate(make_trace(records[::-1]))
        np.testing.assert_allclose(fwd.cross, rev.cross, atol=1e-12)

    def test_empty_trace_rejected(self):
        with pytest.raises(ValueError):
            aggregate(make_trace([]))

    def test_preaveraged_passthrough(self):
        rng = np.random.default_rng(4)
        rec = random_record(rng)
        trace = make_trace([rec])
        trace.preaveraged = True
        trace.cross_mean = rec.cross
        trace.self_mean = rec.self_
        trace.records = {}
        maps = aggregate(trace)
        np.testing.assert_array_equal(maps.cross, rec.cross)


class TestForegroundCrossMap:
    def test_constant_map_normalizes_to_zeros(self):
        maps = GlobalMaps(cross=np.full((4, 4, 1), 0.25), self_=np.zeros((16, 4, 4)))
        fg = foreground_cross_map(maps, spans((0, 1, "cat")), 4, 4)
        np.testing.assert_array_equal(fg, np.zeros((4, 4)))

    def test_two_disjoint_one_hot_nouns(self):
        cross = np.zeros((4, 4, 2))
        cross[0, 0, 0] = 1.0
        cross[3, 3, 1] = 1.0
        maps = GlobalMaps(cross=cross, self_=np.zeros((16, 4, 4)))
        fg = foreground_cross_map(maps, spans((0, 1, "a"), (1, 2, "b")), 4, 4)
        # each hot pixel carries mean 0.5 before normalization -> exactly 1 after
        assert fg[0, 0] == 1.0 and fg[3, 3] == 1.0
        assert fg.sum() == 2.0

    def test_multitoken_span_averaged_before_cross_noun_mean(self):
        cross = np.zeros((2, 2, 3))
        cross[0, 0, 0] = 1.0
        cross[0, 0, 1] = 0.5
        cross[1, 1, 2] = 1.0
        maps = GlobalMaps(cross=cross, self_=np.zeros((4, 2, 2)))
        fg = foreground_cross_map(maps, spans((0, 2, "a b"), (2, 3, "c")), 2, 2)
        manual = (cross[:, :, :2].mean(axis=2) + cross[:, :, 2]) / 2.0
        np.testing.assert_allclose(fg, minmax_normalize(manual))

    def test_no_spans_errors_with_override_hint(self):
        maps = GlobalMaps(cross=np.zeros((2, 2, 1)), self_=np.zeros((4, 2, 2)))
        with pytest.raises(ValueError, match="override"):
            foreground_cross_map(maps, spans(), 2, 2)

    def test_span_outside_tokens_rejected(self):
        maps = GlobalMaps(cross=np.zeros((2, 2, 1)), self_=np.zeros((4, 2, 2)))
        with pytest.raises(ValueError):
            foreground_cross_map(maps, spans((0, 2, "x")), 2, 2)

    def test_upsampling_and_range(self):
        rng = np.random.default_rng(5)
        cross = rng.uniform(size=(4, 4, 2))
        maps = GlobalMaps(cross=cross, self_=np.zeros((16, 4, 4)))
        fg = foreground_cross_map(maps, spans((0, 1, "a")), 16, 16)
        assert fg.shape == (16, 16)
        assert fg.min() == 0.0 and fg.max() == 1.0


class TestFuseSelfAttention:
    def test_one_hot_weight_selects_single_source_map(self):
        rng = np.random.default_rng(6)
        self_ = rng.uniform(size=(16, 4, 4))
        maps = GlobalMaps(cross=np.zeros((4, 4, 1)), self_=self_)
        fg = np.zeros((4, 4))
        fg[1, 2] = 1.0  # flat index 6
        out = fuse_self_attention(maps, fg)
        np.testing.assert_allclose(out, minmax_normalize(self_[6]))

    def test_uniform_weights_take_plain_mean(self):
        rng = np.random.default_rng(7)
        self_ = rng.uniform(size=(16, 4, 4))
        maps = GlobalMaps(cross=np.zeros((4, 4, 1)), self_=self_)
        out = fuse_self_attention(maps, np.ones((4, 4)))
        np.testing.assert_allclose(out, minmax_normalize(self_.mean(axis=0)), atol=1e-12)

    def test_matches_brute_force_weighted_sum_8x8(self):
        rng = np.random.default_rng(8)
        self_ = rng.uniform(size=(64, 8, 8))
        weights = rng.uniform(size=(8, 8))
        maps = GlobalMaps(cross=np.zeros((8, 8, 1)), self_=self_)
        out = fuse_self_attention(maps, weights)
        brute = np.zeros((8, 8))
        for p in range(64):
            brute += weights.reshape(-1)[p] * self_[p]
        brute /= weights.sum()
        np.testing.assert_allclose(out, minmax_normalize(brute), atol=1e-6)

    def test_zero_weights_error(self):
        maps = GlobalMaps(cross=np.zeros((4, 4, 1)), self_=np.ones((16, 4, 4)) / 16)
        with pytest.raises(ValueError, match="foreground"):
            fuse_self_attention(maps, np.zeros((4, 4)))

    def test_weight_rescaling_invariance(self):
        rng = np.random.default_rng(9)
        self_ = rng.uniform(size=(16, 4, 4))
        maps = GlobalMaps(cross=np.zeros((4, 4, 1)), self_=self_)
        w = rng.uniform(size=(4, 4))
        np.testing.assert_allclose(fuse_self_attention(maps, w),
                                   fuse_self_attention(maps, 3.7 * w), atol=1e-9)


class TestEstimateAlpha:
    def test_ff_equals_fg_is_identity_on_normalized_maps(self):
        rng = np.random.default_rng(10)
        fg = minmax_normalize(rng.uniform(size=(8, 8)))
        np.testing.assert_array_equal(estimate_alpha(fg, fg), fg)

    def test_zero_fg_reduces_to_minmax_ff(self):
        rng = np.random.default_rng(11)
        ff = rng.uniform(size=(8, 8))
        np.testing.assert_array_equal(estimate_alpha(np.zeros((8, 8)), ff),
                                      minmax_normalize(ff))

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(12)
        a, b = rng.uniform(size=(2, 6, 6))
        s = a + b
        expected = (s - s.min()) / (s.max() - s.min())
        np.testing.assert_allclose(estimate_alpha(a, b), expected, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            estimate_alpha(np.zeros((2, 2)), np.zeros((3, 2)))


class TestAdjustOpacity:
    def test_k_zero_identity(self):
        rng = np.random.default_rng(13)
        alpha = rng.uniform(size=(8, 8))
        np.testing.assert_array_equal(adjust_opacity(alpha, 0.0), alpha)

    def test_clipping(self):
        assert adjust_opacity(np.array([[0.8]]), 0.5)[0, 0] == 1.0

    def test_scalar_value(self):
        assert adjust_opacity(np.array([[0.5]]), 0.5)[0, 0] == pytest.approx(0.75)

    def test_rejects_k_below_minus_one(self):
        with pytest.raises(ValueError):
            adjust_opacity(np.zeros((2, 2)), -1.5)

    @settings(max_examples=30)
    @given(st.integers(0, 2**31 - 1), st.floats(0, 3), st.floats(0, 3))
    def test_monotone_in_k(self, seed, k1, k2):
        k_lo, k_hi = sorted((k1, k2))
        alpha = np.random.default_rng(seed).uniform(size=(16,))
        assert np.all(adjust_opacity(alpha, k_hi) >= adjust_opacity(alpha, k_lo))

    def test_output_in_unit_interval(self):
        alpha = np.random.default_rng(14).uniform(size=(100,))
        out = adjust_opacity(alpha, 2.5)
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestMinmaxNormalize:
    def test_constant_returns_zeros(self):
        np.testing.assert_array_equal(minmax_normalize(np.full((3, 3), 5.0)),
                                      np.zeros((3, 3)))

    def test_nonconstant_hits_exact_bounds(self):
        rng = np.random.default_rng(15)
        out = minmax_normalize(rng.normal(size=(5, 5)))
        assert out.min() == 0.0 and out.max() == 1.0
