import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchattack.errors import ShapeMismatch, ZeroGradient, ZeroVector
from switchattack.tensors import (
    ImageTensor,
    box_clamp,
    clip_epsilon,
    cosine_similarity,
    l2_norm,
    lp_distance,
    lp_normalize,
)

INF = math.inf


class TestImageTensor:
    def test_dim_matches_shape(self):
        t = ImageTensor(np.zeros(12, dtype=np.float32), (3, 2, 2))
        assert t.dim == 12

    def test_length_mismatch_rejected(self):
        with pytest.raises(ShapeMismatch):
            ImageTensor(np.zeros(5, dtype=np.float32), (2, 3))

    def test_defaults_to_flat_shape(self):
        t = ImageTensor([0.1, 0.2])
        assert t.shape == (2,)
        assert t.data.dtype == np.float32


class TestLpNormalize:
    def test_pythagorean(self):
        np.testing.assert_allclose(lp_normalize([3.0, 4.0], 2), [0.6, 0.8],
                                   atol=1e-6)

    def test_sign(self):
        np.testing.assert_array_equal(lp_normalize([0.5, -2.0, 0.0], INF),
                                      [1.0, -1.0, 0.0])

    def test_zero_gradient_l2(self):
        with pytest.raises(ZeroGradient):
            lp_normalize([0.0, 0.0], 2)

    @given(st.integers(1, 30), st.floats(0.1, 1e4), st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_l2_scale_invariance(self, d, k, seed):
        g = np.random.default_rng(seed).standard_normal(d)
        if l2_norm(g) == 0:
            return
        np.testing.assert_allclose(lp_normalize(k * g, 2), lp_normalize(g, 2),
                                   atol=1e-6)

    @given(st.integers(1, 30), st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_sign_idempotence(self, d, seed):
        g = np.random.default_rng(seed).standard_normal(d)
        once = lp_normalize(g, INF)
        np.testing.assert_array_equal(lp_normalize(once, INF), once)

    def test_unit_norm_within_tolerance(self):
        g = np.random.default_rng(7).standard_normal(100)
        assert abs(l2_norm(lp_normalize(g, 2)) - 1.0) < 1e-5


class TestClipEpsilon:
    def test_linf_coordinate_clamp(self):
        out = clip_epsilon([0.9], [0.5], 8 / 255, INF)
        np.testing.assert_allclose(out, [0.5 + 8 / 255], atol=1e-6)

    def test_l2_radial_rescale(self):
        out = clip_epsilon([3.0, 4.0], [0.0, 0.0], 1.0, 2)
        np.testing.assert_allclose(out, [0.6, 0.8], atol=1e-6)

    def test_identity_inside_ball(self):
        c = np.array([0.5, 0.5], dtype=np.float32)
        out = clip_epsilon(c, [0.5, 0.5], 0.3, 2)
        np.testing.assert_array_equal(out, c)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            clip_epsilon([0.5, 0.5], [0.5], 0.1, 2)

    @given(
        st.integers(2, 20),
        st.sampled_from([2.0, INF]),
        st.floats(0.01, 2.0),
        st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=200, deadline=None)
    def test_feasibility_and_idempotence(self, d, p, eps, seed):
        rng = np.random.default_rng(seed)
        origin = rng.uniform(0, 1, d).astype(np.float32)
        candidate = (origin + rng.normal(0, 1.0, d)).astype(np.float32)
        out = clip_epsilon(candidate, origin, eps, p)
        assert lp_distance(out, origin, p) <= eps + 1e-6
        assert np.all(out >= 0.0) and np.all(out <= 1.0)
        np.testing.assert_array_equal(clip_epsilon(out, origin, eps, p), out)


class TestBoxClamp:
    def test_clamps(self):
        np.testing.assert_allclose(box_clamp([-0.1, 0.5, 1.2]), [0.0, 0.5, 1.0])

    def test_idempotent(self):
        x = np.array([0.0, 1.0], dtype=np.float32)
        np.testing.assert_array_equal(box_clamp(x), x)

    def test_already_clamped_bit_exact(self):
        x = np.array([0.25, 0.75], dtype=np.float32)
        np.testing.assert_array_equal(box_clamp(x), x)


class TestCosineSimilarity:
    @pytest.mark.parametrize("a, b, expected", [
        ([1, 0], [0, 1], 0.0),
        ([2, 0], [5, 0], 1.0),
        ([1, 1], [1, -1], 0.0),
    ])
    def test_examples(self, a, b, expected):
        assert cosine_similarity(a, b) == pytest.approx(expected, abs=1e-12)

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            cosine_similarity([0, 0], [1, 0])

    def test_range(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a, b = rng.standard_normal((2, 16))
            assert -1.0 <= cosine_similarity(a, b) <= 1.0
