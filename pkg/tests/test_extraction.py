from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gadsearch.classifiers import Prediction
from gadsearch.data import FeatureRanges
from gadsearch.errors import DimensionMismatch
from gadsearch.extraction import (
    DenseNet,
    fit_pseudo,
    forward,
    input_gradient,
    lhs_design,
)


def bin_counts(column, lo, hi, n):
    """Independent stratum-occupancy oracle."""
    edges = np.linspace(lo, hi, n + 1)
    idx = np.searchsorted(edges, column, side="right") - 1
    idx[column == hi] = n - 1  # top stratum closed on the right
    return np.bincount(idx, minlength=n)


class TestLhsDesign:
    def test_four_strata_one_dim(self):
        design = lhs_design(FeatureRanges(low=[0.0], high=[8.0]), 4, seed=0)
        assert bin_counts(design.points[:, 0], 0.0, 8.0, 4).tolist() == [1, 1, 1, 1]

    def test_single_point_inside_box(self):
        design = lhs_design(FeatureRanges(low=[-1.0, 2.0], high=[1.0, 3.0]), 1, seed=1)
        p = design.points[0]
        assert -1.0 <= p[0] <= 1.0 and 2.0 <= p[1] <= 3.0

    def test_degenerate_column_is_constant(self):
        design = lhs_design(FeatureRanges(low=[0.0, 5.0], high=[1.0, 5.0]), 10, seed=2)
        assert np.all(design.points[:, 1] == 5.0)

    def test_determinism(self):
        r = FeatureRanges(low=[0.0, -3.0], high=[2.0, 7.0])
        a = lhs_design(r, 50, seed=3)
        b = lhs_design(r, 50, seed=3)
        assert np.array_equal(a.points, b.points)

    @given(
        n=st.integers(1, 60),
        m=st.integers(1, 5),
        seed=st.integers(0, 2**31 - 1),
        lo=st.floats(-100, 100),
        width=st.floats(1e-3, 50),
    )
    @settings(max_examples=60, deadline=None)
    def test_stratification_property(self, n, m, seed, lo, width):
        ranges = FeatureRanges(low=[lo] * m, high=[lo + width] * m)
        design = lhs_design(ranges, n, seed=seed)
        for j in range(m):
            assert np.all(bin_counts(design.points[:, j], lo, lo + width, n) == 1)

    def test_stratification_random_boxes(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            m = int(rng.integers(1, 8))
            n = int(rng.integers(2, 150))
            lo = rng.standard_normal(m) * 10
            hi = lo + rng.random(m) * 5 + 1e-3
            design = lhs_design(FeatureRanges(low=lo, high=hi), n, seed=int(rng.integers(0, 10_000)))
            for j in range(m):
                counts = bin_counts(design.points[:, j], lo[j], hi[j], n)
                assert np.all(counts == 1)


class ConstantStub:
    """Black box that always reports the class of interest at a fixed confidence."""

    def __init__(self, confidence=0.7, label=1):
        self._p = Prediction(label, confidence)

    def predict(self, x):
        return self._p


def random_net(rng, n_in, widths):
    layers = []
    fan = n_in
    for w in widths:
        layers.append((rng.standard_normal((w, fan)) * 0.7, rng.standard_normal(w) * 0.2))
        fan = w
    layers.append((rng.standard_normal((1, fan)) * 0.7, rng.standard_normal(1) * 0.2))
    return DenseNet(layers)


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


class TestForward:
    def test_zero_net_is_half(self):
        net = DenseNet([(np.zeros((1, 3)), np.zeros(1))])
        assert forward(net, np.array([4.0, -2.0, 0.1])) == 0.5

    def test_bias_only(self):
        net = DenseNet([(np.zeros((1, 2)), np.array([0.7]))])
        assert forward(net, np.array([1.0, 1.0])) == pytest.approx(sigmoid(0.7), abs=1e-15)

    def test_matches_straight_line_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            net = random_net(rng, 3, [5, 4])
            x = rng.standard_normal(3)
            # independent re-implementation with explicit loops
            a = x.copy()
            for w, b in net.layers[:-1]:
                nxt = np.zeros(w.shape[0])
                for i in range(w.shape[0]):
                    s = b[i]
                    for j in range(w.shape[1]):
                        s += w[i, j] * a[j]
                    nxt[i] = max(s, 0.0)
                a = nxt
            w, b = net.layers[-1]
            z = b[0] + sum(w[0, j] * a[j] for j in range(len(a)))
            assert forward(net, x) == pytest.approx(sigmoid(z), abs=1e-12)

    def test_output_strictly_open(self):
        rng = np.random.default_rng(22)
        net = DenseNet([(np.array([[100.0]]), np.array([500.0]))])  # saturating
        v = forward(net, np.array([10.0]))
        assert 0.0 < v < 1.0

    def test_dimension_mismatch(self):
        net = DenseNet([(np.zeros((1, 2)), np.zeros(1))])
        with pytest.raises(DimensionMismatch):
            forward(net, np.array([1.0, 2.0, 3.0]))


class TestInputGradient:
    def test_zero_at_own_output(self):
        rng = np.random.default_rng(30)
        net = random_net(rng, 4, [6])
        x = rng.standard_normal(4)
        g = input_gradient(net, x, forward(net, x))
        assert np.all(g == 0.0)

    def test_single_layer_chain_rule(self):
        w = np.array([[1.2, -0.7]])
        b = np.array([0.4])
        net = DenseNet([(w, b)])
        x = np.array([0.3, 0.9])
        t = 0.2
        f = sigmoid(w[0] @ x + b[0])
        expected = 2.0 * (f - t) * f * (1.0 - f) * w[0]
        assert np.allclose(input_gradient(net, x, t), expected, atol=1e-15)

    def test_finite_differences(self):
        rng = np.random.default_rng(31)
        h = 1e-5
        worst = 0.0
        for _ in range(30):
            net = random_net(rng, 3, [8, 8])
            x = rng.standard_normal(3)
            t = rng.random()
            g = input_gradient(net, x, t)
            for j in range(3):
                e = np.zeros(3)
                e[j] = h
                num = ((forward(net, x + e) - t) ** 2 - (forward(net, x - e) - t) ** 2) / (2 * h)
                denom = max(abs(num), 1e-8)
                worst = max(worst, abs(g[j] - num) / denom)
        assert worst < 1e-4


class TestFitPseudo:
    def test_constant_target_reached(self):
        stub = ConstantStub(0.7)
        design = lhs_design(FeatureRanges(low=[0.0, 0.0], high=[1.0, 1.0]), 1500, seed=5)
        net, report = fit_pseudo(stub, design, class_of_interest=1, hidden_widths=[8], epochs=40, learning_rate=0.5, seed=6)
        hold = design.points[-150:]
        assert np.mean(np.abs(net.forward_batch(hold) - 0.7)) < 0.01
        assert report.r_squared <= 1.0

    def test_zero_epochs_rejected(self):
        stub = ConstantStub()
        design = lhs_design(FeatureRanges(low=[0.0], high=[1.0]), 10, seed=7)
        with pytest.raises(ValueError):
            fit_pseudo(stub, design, 1, epochs=0)

    def test_training_determinism_bit_identical(self):
        stub = ConstantStub(0.6)
        design = lhs_design(FeatureRanges(low=[0.0], high=[1.0]), 300, seed=8)
        a, _ = fit_pseudo(stub, design, 1, hidden_widths=[6], epochs=5, learning_rate=0.1, seed=9)
        b, _ = fit_pseudo(stub, design, 1, hidden_widths=[6], epochs=5, learning_rate=0.1, seed=9)
        for (w1, b1), (w2, b2) in zip(a.layers, b.layers):
            assert np.array_equal(w1, w2) and np.array_equal(b1, b2)

    def test_dimension_mismatch_against_black_box(self):
        from gadsearch.classifiers import train_logistic
        from gadsearch.data import Dataset

        d = Dataset(features=np.array([[-1.0, 0.0], [1.0, 0.0]]), labels=np.array([0, 1]))
        m = train_logistic(d, epochs=10, learning_rate=0.1)
        design = lhs_design(FeatureRanges(low=[0.0, 0.0, 0.0], high=[1.0, 1.0, 1.0]), 50, seed=0)
        with pytest.raises(DimensionMismatch):
            fit_pseudo(m, design, 1, hidden_widths=[4], epochs=1)

    def test_input_gradient_dimension_mismatch(self):
        net = DenseNet([(np.zeros((1, 2)), np.zeros(1))])
        with pytest.raises(DimensionMismatch):
            input_gradient(net, np.array([1.0, 2.0, 3.0]), 0.5)

    def test_json_round_trip_lossless(self):
        rng = np.random.default_rng(33)
        net = random_net(rng, 2, [4])
        back = DenseNet.from_json(net.to_json())
        for (w1, b1), (w2, b2) in zip(net.layers, back.layers):
            assert np.array_equal(w1, w2) and np.array_equal(b1, b2)
        rng_x = rng.standard_normal((20, 2))
        assert np.array_equal(net.forward_batch(rng_x), back.forward_batch(rng_x))
