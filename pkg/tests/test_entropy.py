import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from entrocache.errors import (
    DimensionMismatch,
    EmptyHistogram,
    NotADistribution,
)
from entrocache.frames import Frame, GrayHistogram, partition, patch_histogram
from entrocache.entropy import (
    AttentionTensor,
    EntropyScores,
    attention_distribution,
    attention_entropy,
    attention_information,
    mean_attention,
    normalize_visual_entropy,
    score_frame,
    visual_entropy,
)

mpmath.mp.dps = 60


def entropy_oracle(counts) -> float:
    """Extended-precision -sum(p log2 p), independent of the implementation."""
    total = sum(counts)
    acc = mpmath.mpf(0)
    for c in counts:
        if c:
            p = mpmath.mpf(c) / total
            acc -= p * mpmath.log(p) / mpmath.log(2)
    return float(acc)


def softmax_oracle(values) -> list[float]:
    exps = [mpmath.exp(mpmath.mpf(v)) for v in values]
    denom = sum(exps)
    return [float(e / denom) for e in exps]


def hist(counts) -> GrayHistogram:
    return GrayHistogram(counts=np.asarray(counts, dtype=np.int64), total=int(sum(counts)))


class TestVisualEntropy:
    def test_constant_patch_is_zero(self):
        assert visual_entropy(hist([64] + [0] * 255)) == 0.0

    def test_fair_coin_is_one_bit(self):
        assert visual_entropy(hist([32, 32])) == 1.0

    def test_uniform_256_levels_is_eight_bits(self):
        assert visual_entropy(hist([4] * 256)) == 8.0

    def test_empty_histogram_rejected(self):
        with pytest.raises(EmptyHistogram):
            visual_entropy(hist([0, 0, 0]))

    def test_matches_extended_precision_oracle(self, rng):
        for _ in range(50):
            counts = rng.integers(0, 40, size=rng.integers(2, 64)).tolist()
            if sum(counts) == 0:
                counts[0] = 1
            expected = entropy_oracle(counts)
            got = visual_entropy(hist(counts))
            assert got == pytest.approx(expected, rel=1e-12, abs=1e-12)

    @given(
        counts=st.lists(st.integers(min_value=0, max_value=30), min_size=2, max_size=16)
    )
    def test_bounds_and_zero_iff_single_bin(self, counts):
        if sum(counts) == 0:
            counts[0] = 1
        h = visual_entropy(hist(counts))
        assert -1e-12 <= h <= math.log2(len(counts)) + 1e-9
        nonzero_bins = sum(1 for c in counts if c)
        if nonzero_bins == 1:
            assert h == 0.0
        else:
            assert h > 0.0


class TestNormalizeVisualEntropy:
    def test_zero(self):
        assert normalize_visual_entropy(0.0, 256) == 0.0

    def test_maximum(self):
        assert normalize_visual_entropy(8.0, 256) == 1.0

    def test_one_bit_over_256_levels(self):
        assert normalize_visual_entropy(1.0, 256) == 0.125

    def test_tiny_g_rejected(self):
        with pytest.raises(ValueError):
            normalize_visual_entropy(0.5, 1)


class TestMeanAttention:
    def test_single_layer_head_is_identity(self, rng):
        scores = rng.random((1, 1, 3, 5))
        tensor = AttentionTensor(scores=scores)
        assert np.array_equal(mean_attention(tensor), scores[0, 0])

    def test_arithmetic_mean_of_two_layers(self, rng):
        base = rng.random((1, 3, 4))
        scores = np.concatenate([base, 3.0 * base], axis=0)[:, np.newaxis]
        tensor = AttentionTensor(scores=scores.reshape(2, 1, 3, 4))
        assert np.allclose(mean_attention(tensor), 2.0 * base[0], rtol=0, atol=1e-15)

    def test_matches_quadruple_loop_oracle(self, rng):
        scores = rng.random((3, 2, 4, 6))
        tensor = AttentionTensor(scores=scores)
        averaged = mean_attention(tensor)
        for w in range(4):
            for i in range(6):
                acc = 0.0
                for l in range(3):
                    for h in range(2):
                        acc += scores[l, h, w, i]
                assert averaged[w, i] == pytest.approx(acc / 6, rel=1e-14)

    def test_flat_constructor_checks_size(self):
        with pytest.raises(DimensionMismatch):
            AttentionTensor.from_flat(2, 2, 2, 2, np.zeros(15))

    def test_negative_scores_rejected(self):
        with pytest.raises(ValueError):
            AttentionTensor(scores=np.full((1, 1, 2, 2), -0.5))


class TestAttentionDistribution:
    def test_constant_column_gives_uniform(self):
        m = np.full((8, 3), 0.25)
        q = attention_distribution(m, 1)
        assert np.allclose(q, 1.0 / 8, rtol=0, atol=1e-15)

    def test_single_text_token(self):
        m = np.array([[2.5, 0.1]])
        assert attention_distribution(m, 0).tolist() == [1.0]

    def test_matches_extended_precision_softmax(self):
        m = np.array([[10.0], [0.0], [0.0], [0.0]])
        q = attention_distribution(m, 0)
        expected = softmax_oracle([10.0, 0.0, 0.0, 0.0])
        assert q == pytest.approx(expected, rel=1e-12)

    def test_sums_to_one(self, rng):
        m = rng.normal(size=(12, 4))
        for i in range(4):
            assert abs(attention_distribution(m, i).sum() - 1.0) <= 1e-9

    @given(
        column=st.lists(
            st.floats(min_value=-30, max_value=30, allow_nan=False),
            min_size=2,
            max_size=10,
        ),
        shift=st.floats(min_value=-100, max_value=100, allow_nan=False),
    )
    def test_shift_invariance(self, column, shift):
        m = np.array(column)[:, np.newaxis]
        q_base = attention_distribution(m, 0)
        q_shifted = attention_distribution(m + shift, 0)
        assert np.abs(q_base - q_shifted).max() <= 1e-9


class TestAttentionEntropy:
    def test_uniform_eight_tokens_is_three_bits(self):
        assert attention_entropy(np.full(8, 0.125)) == 3.0

    def test_one_hot_is_zero(self):
        q = np.zeros(6)
        q[2] = 1.0
        assert attention_entropy(q) == 0.0

    def test_matches_extended_precision_oracle(self, rng):
        for _ in range(30):
            raw = rng.random(rng.integers(2, 12))
            q = raw / raw.sum()
            expected = entropy_oracle_q(q)
            assert attention_entropy(q) == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_not_a_distribution_rejected(self):
        with pytest.raises(NotADistribution):
            attention_entropy(np.array([0.5, 0.6]))

    def test_negative_entry_rejected(self):
        with pytest.raises(NotADistribution):
            attention_entropy(np.array([1.2, -0.2]))


def entropy_oracle_q(q) -> float:
    acc = mpmath.mpf(0)
    for p in q:
        if p > 0:
            mp = mpmath.mpf(float(p))
            acc -= mp * mpmath.log(mp) / mpmath.log(2)
    return float(acc)


class TestAttentionInformation:
    def test_uniform_attention_has_no_information(self):
        assert attention_information(3.0, 8) == 0.0

    def test_one_hot_is_maximal(self):
        assert attention_information(0.0, 8) == 1.0

    def test_midpoint(self):
        assert attention_information(1.5, 8) == 0.5

    def test_single_text_token_defined_as_one(self):
        assert attention_information(0.0, 1) == 1.0

    @given(
        lam=st.floats(min_value=0.0, max_value=20.0, allow_nan=False),
        lam2=st.floats(min_value=0.0, max_value=20.0, allow_nan=False),
    )
    def test_monotone_concentration(self, lam, lam2):
        # sharpening a fixed non-constant logit vector never loses information
        v = np.array([1.0, 0.2, -0.4, 0.0])
        lo, hi = sorted((lam, lam2))
        m_lo = (lo * v)[:, np.newaxis]
        m_hi = (hi * v)[:, np.newaxis]
        info_lo = attention_information(
            attention_entropy(attention_distribution(m_lo, 0)), 4
        )
        info_hi = attention_information(
            attention_entropy(attention_distribution(m_hi, 0)), 4
        )
        assert info_hi >= info_lo - 1e-12


class TestScoreFrame:
    def test_constant_frame_uniform_attention_all_zero(self):
        frame = Frame(pixels=np.full((8, 8), 7, dtype=np.uint8))
        grid = partition(frame, 2, 2)
        tensor = AttentionTensor(scores=np.full((1, 1, 4, 4), 0.25))
        scores = score_frame(frame, grid, tensor, 256)
        assert np.array_equal(scores.visual, np.zeros(4))
        assert np.array_equal(scores.attention_info, np.zeros(4))

    def test_componentwise_composition_toy_case(self, rng):
        pixels = rng.integers(0, 256, size=(8, 8), dtype=np.uint8)
        frame = Frame(pixels=pixels)
        grid = partition(frame, 2, 2)
        tensor = AttentionTensor(scores=rng.random((2, 3, 5, 4)))
        scores = score_frame(frame, grid, tensor, 256)
        averaged = mean_attention(tensor)
        for token in range(4):
            h = visual_entropy(patch_histogram(frame, grid, token, 256))
            assert scores.visual[token] == normalize_visual_entropy(h, 256)
            q = attention_distribution(averaged, token)
            expected = attention_information(attention_entropy(q), 5)
            assert scores.attention_info[token] == expected

    def test_permutation_equivariance(self, rng):
        # permuting patch contents and tensor columns together permutes scores
        perm = np.array([2, 0, 3, 1])
        pixels = rng.integers(0, 256, size=(4, 8), dtype=np.uint8)
        frame = Frame(pixels=pixels)
        grid = partition(frame, 2, 2)
        scores_base = rng.random((1, 2, 3, 4))
        permuted_pixels = np.empty_like(pixels)
        for token in range(4):
            src = grid.region_bounds(int(perm[token]))
            dst = grid.region_bounds(token)
            permuted_pixels[dst[0] : dst[1], dst[2] : dst[3]] = pixels[
                src[0] : src[1], src[2] : src[3]
            ]
        frame_perm = Frame(pixels=permuted_pixels)
        tensor = AttentionTensor(scores=scores_base)
        tensor_perm = AttentionTensor(scores=scores_base[:, :, :, perm])
        scores = score_frame(frame, grid, tensor, 256)
        scores_perm = score_frame(frame_perm, grid, tensor_perm, 256)
        assert np.array_equal(scores_perm.visual, scores.visual[perm])
        assert np.array_equal(scores_perm.attention_info, scores.attention_info[perm])

    def test_token_count_mismatch_rejected(self):
        frame = Frame(pixels=np.zeros((8, 8), dtype=np.uint8))
        grid = partition(frame, 2, 2)
        tensor = AttentionTensor(scores=np.full((1, 1, 2, 9), 0.5))
        with pytest.raises(DimensionMismatch):
            score_frame(frame, grid, tensor, 256)

    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_scores_bounded(self, seed):
        gen = np.random.default_rng(seed)
        pixels = gen.integers(0, 256, size=(8, 8), dtype=np.uint8)
        frame = Frame(pixels=pixels)
        grid = partition(frame, 2, 2)
        tensor = AttentionTensor(scores=gen.random((2, 2, 5, 4)) * 3.0)
        scores = score_frame(frame, grid, tensor, 256)
        assert (scores.visual >= -1e-9).all() and (scores.visual <= 1 + 1e-9).all()
        assert (scores.attention_info >= -1e-9).all()
        assert (scores.attention_info <= 1 + 1e-9).all()


class TestEntropyScores:
    def test_length_mismatch_rejected(self):
        with pytest.raises(DimensionMismatch):
            EntropyScores(visual=np.zeros(3), attention_info=np.zeros(4))
