import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edge_inpaint import losses as L
from edge_inpaint.errors import DegenerateInputWarning, ParameterError, ShapeError
from oracles import adversarial_d_loop, adversarial_g_loop, gram_loop, l1_mean_loop


def stack(rng, shapes):
    return [(f"l{i}", rng.random(s)) for i, s in enumerate(shapes)]


SHAPES = [(2, 4, 8, 8), (2, 8, 4, 4), (2, 16, 2, 2)]


class TestAdversarial:
    def test_half(self):
        assert L.adversarial_d(np.full(9, 0.5), np.full(9, 0.5)) == pytest.approx(2 * math.log(2))

    def test_generator_at_inverse_e(self):
        assert L.adversarial_g(np.full((1, 1, 3, 3), math.exp(-1))) == pytest.approx(1.0)

    def test_clamped_extremes_finite(self):
        assert np.isfinite(L.adversarial_d(np.zeros(4), np.ones(4)))
        assert L.adversarial_g(np.ones(4)) == pytest.approx(-math.log(1 - 1e-7))

    def test_oracles(self, rng):
        for _ in range(10):
            real, fake = rng.random((2, 1, 6, 6)), rng.random((2, 1, 6, 6))
            assert L.adversarial_d(real, fake) == pytest.approx(adversarial_d_loop(real, fake), abs=1e-6)
            assert L.adversarial_g(fake) == pytest.approx(adversarial_g_loop(fake), abs=1e-6)


class TestFeatureLosses:
    def test_feature_matching_unit(self):
        real = [np.ones((1, 2, 4, 4))]
        fake = [np.zeros((1, 2, 4, 4))]
        assert L.feature_matching(real, fake) == 1.0

    def test_perceptual_constant_difference(self, rng):
        a = stack(rng, SHAPES)
        b = [(n, t + 2.0) for n, t in a]
        assert L.perceptual(a, b) == pytest.approx(2.0 * len(SHAPES))
        one = [a[0]]
        assert L.perceptual(one, [b[0]]) == pytest.approx(2.0)

    def test_style_scaled_prediction(self, rng):
        gt = [rng.random((1, 3, 5, 5))]
        pred = [2 * gt[0]]
        g = gram_loop(gt[0])[0]
        assert L.style(gt, pred) == pytest.approx(3 * np.abs(g).sum(), rel=1e-9)

    def test_oracles(self, rng):
        a, b = stack(rng, SHAPES), stack(rng, SHAPES)
        fm = sum(l1_mean_loop(x, y) for (_, x), (_, y) in zip(a, b))
        assert L.feature_matching(a, b) == pytest.approx(fm, abs=1e-6)
        sty = np.mean([np.abs(gram_loop(y) - gram_loop(x)).sum(axis=(1, 2)).mean()
                       for (_, x), (_, y) in zip(a, b)])
        assert L.style(a, b) == pytest.approx(sty, abs=1e-6)

    def test_bare_arrays_accepted(self, rng):
        a, b = stack(rng, SHAPES), stack(rng, SHAPES)
        bare = lambda s: [t for _, t in s]
        assert L.feature_matching(bare(a), bare(b)) == L.feature_matching(a, b)

    def test_permutation_invariance(self, rng):
        a, b = stack(rng, SHAPES), stack(rng, SHAPES)
        order = [2, 0, 1]
        pa, pb = [a[i] for i in order], [b[i] for i in order]
        assert L.feature_matching(pa, pb) == pytest.approx(L.feature_matching(a, b), rel=1e-12)
        assert L.style(pa, pb) == pytest.approx(L.style(a, b), rel=1e-12)

    def test_symmetry(self, rng):
        a, b = stack(rng, SHAPES), stack(rng, SHAPES)
        assert L.feature_matching(a, b) == pytest.approx(L.feature_matching(b, a))
        assert L.style(a, b) == pytest.approx(L.style(b, a))

    def test_layer_mismatch(self, rng):
        a = stack(rng, SHAPES)
        with pytest.raises(ShapeError):
            L.feature_matching(a, a[:2])
        with pytest.raises(ShapeError, match="l1"):
            L.style(a, [a[0], ("l1", np.zeros((2, 8, 2, 2))), a[2]])

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.1, 10.0), st.integers(0, 2**31 - 1))
    def test_homogeneity(self, k, seed):
        rng = np.random.default_rng(seed)
        a, b = stack(rng, SHAPES), stack(rng, SHAPES)
        scale = lambda s, f: [(n, f * t) for n, t in s]
        assert L.feature_matching(scale(a, k), scale(b, k)) == pytest.approx(
            k * L.feature_matching(a, b), rel=1e-9)
        # Gram matrices are quadratic in the features
        assert L.style(scale(a, k), scale(b, k)) == pytest.approx(k * k * L.style(a, b), rel=1e-9)


class TestL1Masked:
    def test_known_value(self):
        gt = np.zeros((1, 3, 8, 8))
        m = np.zeros((8, 8), np.uint8)
        m.flat[:10] = 1
        pred = gt + 0.5 * m
        assert L.l1_masked(pred, gt, m) == pytest.approx(0.5)

    def test_oracle(self, rng):
        pred, gt = rng.random((2, 3, 6, 6)), rng.random((2, 3, 6, 6))
        m = (rng.random((6, 6)) < 0.4).astype(np.uint8)
        direct = l1_mean_loop(pred, gt) * pred.size / (m.sum() * 3 * 2)
        assert L.l1_masked(pred, gt, m) == pytest.approx(direct, abs=1e-6)

    def test_empty_mask_warns(self):
        with pytest.warns(DegenerateInputWarning):
            assert L.l1_masked(np.ones((1, 3, 4, 4)), np.zeros((1, 3, 4, 4)), np.zeros((4, 4))) == 0.0

    def test_shape_errors(self):
        with pytest.raises(ShapeError):
            L.l1_masked(np.ones((1, 3, 4, 4)), np.ones((1, 3, 4, 5)), np.ones((4, 4)))
        with pytest.raises(ShapeError):
            L.l1_masked(np.ones((1, 3, 4, 4)), np.ones((1, 3, 4, 4)), np.ones((3, 3)))


def test_zero_on_identical(rng):
    a = stack(rng, SHAPES)
    x = rng.random((1, 3, 8, 8))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert L.feature_matching(a, a) == 0
        assert L.perceptual(a, a) == 0
        assert L.style(a, a) == 0
        assert L.l1_masked(x, x, np.ones((8, 8))) == 0


class TestJoint:
    def test_worked_examples(self):
        assert L.joint_g1(0.7, 0.03) == pytest.approx(1.0)
        assert L.joint_g2(0.2, 0.5, 0.3, 0.001) == pytest.approx(0.53)

    def test_linear_in_each_term(self, rng):
        w = L.LossWeights()
        base = rng.random(4)
        for i, lam in enumerate((w.l1, w.adv2, w.perc, w.style)):
            bumped = base.copy()
            bumped[i] += 1.0
            assert L.joint_g2(*bumped) - L.joint_g2(*base) == pytest.approx(lam)

    def test_custom_weights(self):
        w = L.LossWeights(adv1=2, fm=0)
        assert L.joint_g1(1.5, 99.0, w) == 3.0

    def test_negative_weight_rejected(self):
        with pytest.raises(ParameterError):
            L.LossWeights(style=-1)
