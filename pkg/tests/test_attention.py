import numpy as np
import pytest

from cone_attention.attention import AttentionBatch, SimilarityMatrix, attend, multi_head, pairwise_logits, softmax_rows
from cone_attention.errors import NumericRangeError
from cone_attention.kernels import KINDS, KernelConfig, cone_logit, dot_logit, laplacian_logit
from cone_attention.projections import xi


def batch(rng, n, m, d, dv=3, scale=0.5, mask=None):
    return AttentionBatch(scale * rng.normal(size=(n, d)), scale * rng.normal(size=(m, d)), rng.normal(size=(m, dv)), mask)


def naive_attention(q, k, v):
    out = np.zeros((q.shape[0], v.shape[1]))
    for i in range(q.shape[0]):
        s = np.array([q[i] @ k[j] / np.sqrt(q.shape[1]) for j in range(k.shape[0])])
        w = np.exp(s - s.max())
        w /= w.sum()
        out[i] = sum(w[j] * v[j] for j in range(k.shape[0]))
    return out


class TestBatch:
    def test_shape_checks(self, rng):
        with pytest.raises(ValueError):
            AttentionBatch(np.zeros((2, 3)), np.zeros((2, 4)), np.zeros((2, 1)))
        with pytest.raises(ValueError):
            AttentionBatch(np.zeros((2, 3)), np.zeros((2, 3)), np.zeros((3, 1)))
        with pytest.raises(ValueError):
            AttentionBatch(np.zeros(3), np.zeros((2, 3)), np.zeros((2, 1)))
        with pytest.raises(ValueError):
            AttentionBatch(np.full((1, 2), np.nan), np.zeros((2, 2)), np.zeros((2, 1)))

    def test_mask_checks(self):
        q = np.zeros((2, 2))
        with pytest.raises(ValueError, match="row 1"):
            AttentionBatch(q, q, q, np.array([[True, False], [False, False]]))
        with pytest.raises(TypeError):
            AttentionBatch(q, q, q, np.ones((2, 2)))
        with pytest.raises(ValueError):
            AttentionBatch(q, q, q, np.ones((2, 3), dtype=bool))

    def test_similarity_matrix(self):
        SimilarityMatrix(np.array([[0.0, -np.inf]]))
        with pytest.raises(NumericRangeError):
            SimilarityMatrix(np.array([[np.nan]]))


class TestLogits:
    @pytest.mark.parametrize("kind", KINDS)
    def test_single_pair(self, kind, rng):
        b = batch(rng, 1, 1, 3)
        L = pairwise_logits(b, KernelConfig(kind=kind)).logits
        assert L.shape == (1, 1)
        assert np.isfinite(L[0, 0])

    def test_dot_matches_definition(self, rng):
        q = np.eye(4)[:3] + 0.1
        k = np.eye(4) * 2.0
        b = AttentionBatch(q, k, np.zeros((4, 1)))
        np.testing.assert_allclose(pairwise_logits(b, KernelConfig(kind="dot")).logits, q @ k.T / 2.0, rtol=1e-15)

    def test_penumbral_matches_scalar(self, rng):
        cfg = KernelConfig(gamma=1.3, light_height=1.5)
        b = batch(rng, 3, 3, 3)
        L = pairwise_logits(b, cfg).logits
        for i in range(3):
            for j in range(3):
                ref = cone_logit(xi(b.queries[i], 1.5), xi(b.keys[j], 1.5), cfg)
                assert abs(L[i, j] - ref) <= 1e-12

    def test_baselines_match_scalar(self, rng):
        b = batch(rng, 4, 5, 3)
        L = pairwise_logits(b, KernelConfig(kind="laplacian", gamma=0.7)).logits
        D = pairwise_logits(b, KernelConfig(kind="dot")).logits
        for i in range(4):
            for j in range(5):
                assert abs(L[i, j] - laplacian_logit(b.queries[i], b.keys[j], 0.7)) <= 1e-12
                assert abs(D[i, j] - dot_logit(b.queries[i], b.keys[j])) <= 1e-12

    def test_mask_sentinel(self, rng):
        mask = np.array([[True, False, True], [False, True, False]])
        L = pairwise_logits(batch(rng, 2, 3, 2, mask=mask), KernelConfig(kind="umbral")).logits
        assert np.all(L[~mask] == -np.inf)
        assert np.all(np.isfinite(L[mask]))

    def test_needs_height_coordinate(self, rng):
        with pytest.raises(ValueError, match="d >= 2"):
            pairwise_logits(batch(rng, 2, 2, 1), KernelConfig(kind="umbral"))
        pairwise_logits(batch(rng, 2, 2, 1), KernelConfig(kind="dot"))

    def test_projection_error_context(self):
        b = AttentionBatch(np.zeros((2, 2)), np.array([[0.0, 0.0], [0.0, 900.0]]), np.zeros((2, 1)))
        with pytest.raises(NumericRangeError, match="keys: .*row 1"):
            pairwise_logits(b, KernelConfig(kind="umbral"))

    def test_light_violation_context(self):
        b = AttentionBatch(np.array([[0.0, -1.0], [0.0, 5.0]]), np.full((1, 2), -1.0), np.zeros((1, 1)))
        with pytest.raises(ValueError, match="query row 1"):
            pairwise_logits(b, KernelConfig(kind="penumbral", projection="psi"))


class TestSoftmax:
    def test_examples(self):
        np.testing.assert_array_equal(softmax_rows(np.zeros((1, 4))), [[0.25] * 4])
        np.testing.assert_array_equal(softmax_rows(np.array([[0.0, -np.inf]])), [[1.0, 0.0]])
        got = softmax_rows(np.array([[1000.0, 1001.0]]))
        e = np.exp(-1.0)
        np.testing.assert_allclose(got, [[e / (1 + e), 1 / (1 + e)]], rtol=1e-15)

    def test_all_masked_row(self):
        with pytest.raises(ValueError, match="row 1"):
            softmax_rows(np.array([[0.0, 1.0], [-np.inf, -np.inf]]))

    def test_rows_sum_to_one(self, rng):
        W = softmax_rows(50 * rng.normal(size=(40, 30)))
        assert np.max(np.abs(W.sum(axis=1) - 1.0)) <= 1e-12


class TestAttend:
    def test_single_key(self, rng):
        b = batch(rng, 5, 1, 3)
        out = attend(b, KernelConfig())
        np.testing.assert_array_equal(out, np.repeat(b.values, 5, axis=0))

    def test_identical_keys(self, rng):
        k = np.tile(rng.normal(size=(1, 3)), (2, 1))
        b = AttentionBatch(rng.normal(size=(4, 3)), k, np.eye(3)[:2])
        np.testing.assert_allclose(attend(b, KernelConfig(kind="umbral")), [[0.5, 0.5, 0.0]] * 4, rtol=1e-15)

    def test_dot_matches_naive(self, rng):
        b = batch(rng, 4, 4, 4)
        np.testing.assert_allclose(attend(b, KernelConfig(kind="dot")), naive_attention(b.queries, b.keys, b.values), atol=1e-12)

    @pytest.mark.parametrize("kind", KINDS)
    def test_convex_combination(self, kind, rng):
        mask = rng.random((6, 8)) < 0.6
        mask[:, 0] = True
        b = batch(rng, 6, 8, 3, mask=mask)
        out = attend(b, KernelConfig(kind=kind))
        for i in range(6):
            vals = b.values[mask[i]]
            assert np.all(out[i] >= vals.min(axis=0) - 1e-12)
            assert np.all(out[i] <= vals.max(axis=0) + 1e-12)

    def test_shift_invariance(self, rng):
        b = batch(rng, 7, 9, 3)
        base = attend(b, KernelConfig(kind="dist_halfspace"))
        shifted = attend(b, KernelConfig(kind="dist_halfspace", c=37.0))
        assert np.max(np.abs(base - shifted)) <= 1e-12

    @pytest.mark.parametrize("kind", KINDS)
    def test_deterministic_across_threads(self, kind, rng):
        b = batch(rng, 300, 300, 64, dv=8, scale=0.2)
        cfg = KernelConfig(kind=kind)
        ref = attend(b, cfg)
        for threads in (1, 2, 4):
            assert np.array_equal(attend(b, cfg, threads=threads), ref)

    @pytest.mark.parametrize("kind", ["penumbral", "umbral"])
    def test_key_permutation_equivariance(self, kind, rng):
        b = batch(rng, 5, 7, 3)
        perm = rng.permutation(7)
        cfg = KernelConfig(kind=kind)
        W = softmax_rows(pairwise_logits(b, cfg))
        Wp = softmax_rows(pairwise_logits(AttentionBatch(b.queries, b.keys[perm], b.values[perm]), cfg))
        np.testing.assert_array_equal(Wp, W[:, perm])

    def test_bad_threads(self, rng):
        with pytest.raises(ValueError):
            attend(batch(rng, 2, 2, 2), KernelConfig(), threads=0)


class TestMultiHead:
    def test_one_head_is_attend(self, rng):
        b = batch(rng, 5, 6, 4)
        cfg = KernelConfig(kind="umbral")
        np.testing.assert_array_equal(multi_head(b, cfg, 1), attend(b, cfg))

    def test_block_structure(self, rng):
        cfg = KernelConfig(kind="penumbral")
        b1, b2 = batch(rng, 3, 4, 2, dv=2), batch(rng, 3, 4, 2, dv=2)
        joint = AttentionBatch(
            np.hstack([b1.queries, b2.queries]), np.hstack([b1.keys, b2.keys]), np.hstack([b1.values, b2.values])
        )
        np.testing.assert_array_equal(multi_head(joint, cfg, 2), np.hstack([attend(b1, cfg), attend(b2, cfg)]))

    def test_four_heads_slice_and_stitch(self, rng):
        cfg = KernelConfig(kind="dist_hyperboloid")
        b = batch(rng, 6, 5, 12, dv=8)
        manual = []
        for h in range(4):
            sub = AttentionBatch(b.queries[:, 3 * h:3 * h + 3], b.keys[:, 3 * h:3 * h + 3], b.values[:, 2 * h:2 * h + 2])
            manual.append(naive_like(sub, cfg))
        np.testing.assert_allclose(multi_head(b, cfg, 4), np.hstack(manual), atol=1e-12)

    def test_divisibility(self, rng):
        with pytest.raises(ValueError, match="divisible"):
            multi_head(batch(rng, 2, 2, 4, dv=3), KernelConfig(), 2)
        with pytest.raises(ValueError):
            multi_head(batch(rng, 2, 2, 4, dv=4), KernelConfig(), 0)


def naive_like(b, cfg):
    W = softmax_rows(pairwise_logits(b, cfg))
    return W @ b.values
