import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alfie.trimap import PROB_BG, PROB_FG, SURE_BG, SURE_FG, quantize_trimap, trimap_to_gray

LABEL_ORDER = {SURE_BG: 0, PROB_BG: 1, PROB_FG: 2, SURE_FG: 3}


def sort_oracle_fractions(values, q_sure_fg=0.8, q_prob_fg=0.3, q_prob_bg=0.1):
    """Independent nearest-rank oracle: fraction of pixels per label."""
    flat = sorted(values.ravel().tolist())
    n = len(flat)

    def thresh(q):
        return flat[max(int(np.ceil(q * n)), 1) - 1]

    t_sf, t_pf, t_pb = thresh(q_sure_fg), thresh(q_prob_fg), thresh(q_prob_bg)
    counts = {SURE_BG: 0, PROB_BG: 0, PROB_FG: 0, SURE_FG: 0}
    for v in flat:
        if v >= t_sf:
            counts[SURE_FG] += 1
        elif v >= t_pf:
            counts[PROB_FG] += 1
        elif v >= t_pb:
            counts[PROB_BG] += 1
        else:
            counts[SURE_BG] += 1
    return {k: c / n for k, c in counts.items()}


class TestQuantizeTrimap:
    def test_ramp_fractions_match_sort_oracle(self):
        ramp = np.linspace(0.0, 1.0, 1000).reshape(25, 40)
        oracle = sort_oracle_fractions(ramp)
        tri = quantize_trimap(ramp)
        for label, expect in ((SURE_BG, 0.10), (PROB_BG, 0.20), (PROB_FG, 0.50),
                              (SURE_FG, 0.20)):
            frac = float(np.mean(tri == label))
            assert frac == pytest.approx(oracle[label], abs=1e-12)
            assert abs(frac - expect) <= 1e-3 + 1e-12

    def test_constant_map_all_sure_bg_with_warning(self):
        with pytest.warns(UserWarning):
            tri = quantize_trimap(np.full((8, 8), 0.4))
        assert np.all(tri == SURE_BG)

    def test_one_hot_hot_pixel_is_sure_fg(self):
        fg = np.zeros((8, 8))
        fg[3, 5] = 1.0
        tri = quantize_trimap(fg)
        assert tri[3, 5] == SURE_FG

    def test_rejects_bad_levels(self):
        with pytest.raises(ValueError):
            quantize_trimap(np.zeros((2, 2)), q_sure_fg=0.3, q_prob_fg=0.8)
        with pytest.raises(ValueError):
            quantize_trimap(np.zeros((2, 2)), q_prob_bg=-0.1)
        with pytest.raises(ValueError):
            quantize_trimap(np.zeros((2, 2)), mode="nope")

    def test_absolute_mode(self):
        fg = np.array([[0.05, 0.2], [0.5, 0.9]])
        tri = quantize_trimap(fg, mode="absolute")
        assert tri[0, 0] == SURE_BG
        assert tri[0, 1] == PROB_BG
        assert tri[1, 0] == PROB_FG
        assert tri[1, 1] == SURE_FG

    @settings(max_examples=60)
    @given(st.integers(0, 2**31 - 1))
    def test_fractions_within_one_over_n_for_distinct_values(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(10, 400))
        values = rng.permutation(np.linspace(0.0, 1.0, n)).reshape(1, n)
        tri = quantize_trimap(values)
        for label, level in ((SURE_FG, 0.2), (PROB_FG, 0.5), (PROB_BG, 0.2),
                             (SURE_BG, 0.1)):
            assert abs(float(np.mean(tri == label)) - level) <= 1.0 / n + 1e-12

    @settings(max_examples=60)
    @given(st.integers(0, 2**31 - 1))
    def test_raising_a_value_never_moves_label_toward_background(self, seed):
        rng = np.random.default_rng(seed)
        values = rng.uniform(size=(4, 4))
        tri_before = quantize_trimap(values)
        i, j = int(rng.integers(4)), int(rng.integers(4))
        bumped = values.copy()
        bumped[i, j] = min(1.5, bumped[i, j] + float(rng.uniform(0, 1)))
        tri_after = quantize_trimap(bumped)
        assert LABEL_ORDER[int(tri_after[i, j])] >= LABEL_ORDER[int(tri_before[i, j])]


class TestTrimapToGray:
    def test_display_coding(self):
        tri = np.array([[SURE_BG, PROB_BG], [PROB_FG, SURE_FG]], dtype=np.uint8)
        np.testing.assert_array_equal(trimap_to_gray(tri),
                                      np.array([[0, 192], [255, 64]], dtype=np.uint8))
