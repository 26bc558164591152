import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from crave.errors import BatchTooSmall, ConstantTarget
from crave.objective import LossConfig, plcc_loss, rank_loss, total_loss


def pearson(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sx = math.sqrt(sum((a - mx) ** 2 for a in x))
    sy = math.sqrt(sum((b - my) ** 2 for b in y))
    return cov / (sx * sy)


def t(x):
    return torch.tensor(x, dtype=torch.float64)


class TestPlccLoss:
    def test_perfect(self):
        assert float(plcc_loss(t([1, 2, 3]), t([1, 2, 3]))) == pytest.approx(0.0, abs=1e-12)

    def test_anti(self):
        y = t([0.3, -1.0, 2.0, 0.5])
        assert float(plcc_loss(-y, y)) == pytest.approx(1.0, abs=1e-12)

    def test_worked_example(self):
        pred, target = [0.1, 0.9, 0.5, 0.7], [1, 4, 2, 3]
        want = (1 - pearson(pred, target)) / 2
        assert float(plcc_loss(t(pred), t(target))) == pytest.approx(want, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=3, max_size=10), st.floats(0.1, 10), st.floats(-10, 10),
           st.integers(0, 2 ** 31))
    def test_affine_invariant_and_bounded(self, pred, a, b, seed):
        pred = t(pred)
        target = t(np.random.default_rng(seed).normal(size=len(pred)))
        if float(pred.std()) < 1e-3:
            return
        base = float(plcc_loss(pred, target))
        assert -1e-12 <= base <= 1 + 1e-12
        assert float(plcc_loss(a * pred + b, target)) == pytest.approx(base, abs=1e-9)

    def test_errors(self):
        with pytest.raises(ConstantTarget):
            plcc_loss(t([1, 2, 3]), t([2, 2, 2]))
        with pytest.raises(BatchTooSmall):
            plcc_loss(t([1.0]), t([2.0]))
        with pytest.raises(ValueError):
            plcc_loss(t([1, 2]), t([1, 2, 3]))

    def test_collapsed_prediction_is_finite(self):
        loss = plcc_loss(t([0.5, 0.5, 0.5]), t([1, 2, 3]))
        assert math.isfinite(float(loss))


class TestRankLoss:
    def test_swapped_pair(self):
        assert float(rank_loss(t([0.0, 1.0]), t([2.0, 1.0]))) == 1.0

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=10, unique=True))
    def test_co_ordered_stays_zero_under_increasing_maps(self, xs):
        target = t(xs)
        for f in (lambda v: v, lambda v: v + 3.0, lambda v: 0.2 * v, torch.exp, lambda v: v ** 3):
            assert float(rank_loss(f(target), target)) == 0.0

    def test_margin_oracle(self):
        pred, target = [0.2, 0.5, 0.1, 0.9], [3, 1, 2, 4]
        cfg = LossConfig(rank_margin=0.25)
        terms = [max(0.0, 0.25 - (pred[i] - pred[j]))
                 for i in range(4) for j in range(4) if target[i] > target[j]]
        assert float(rank_loss(t(pred), t(target), cfg)) == pytest.approx(sum(terms) / len(terms), abs=1e-12)

    def test_ordered_predictions_zero(self):
        assert float(rank_loss(t([1, 2, 3]), t([10, 20, 30]))) == 0.0

    def test_all_ties_zero_with_grad(self):
        pred = t([0.3, 0.1]).requires_grad_()
        loss = rank_loss(pred, t([1.0, 1.0]))
        loss.backward()
        assert float(loss.detach()) == 0.0 and pred.grad is not None


class TestTotal:
    def test_weighted_sum(self):
        pred, target = t([0.1, 0.9, 0.5, 0.7]), t([1, 4, 2, 3])
        cfg = LossConfig(gamma=0.3)
        want = float(plcc_loss(pred, target)) + 0.3 * float(rank_loss(pred, target))
        assert float(total_loss(pred, target, cfg)) == pytest.approx(want, abs=1e-12)

    def test_gamma_zero_is_plcc(self):
        pred, target = t([0.3, 0.2, 0.8, 0.1]), t([2, 1, 3, 4])
        assert float(total_loss(pred, target, LossConfig(gamma=0))) == float(plcc_loss(pred, target))

    def test_perfect_prediction_is_zero(self):
        assert float(total_loss(t([1, 2, 3, 4]), t([2, 4, 6, 8]))) == pytest.approx(0.0, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 31))
    def test_non_negative(self, seed):
        rng = np.random.default_rng(seed)
        assert float(total_loss(t(rng.normal(size=8)), t(rng.normal(size=8)))) >= -1e-12

    def test_finite_difference_gradient(self):
        rng = np.random.default_rng(0)
        # predictions spread on a grid with jitter so no pairwise difference sits within h of a kink
        pred0 = rng.permutation(np.arange(8)) * 0.1 + rng.uniform(-0.02, 0.02, 8)
        target = t(rng.normal(size=8))
        cfg = LossConfig(gamma=0.3, rank_margin=0.0)
        pred = t(pred0).requires_grad_()
        total_loss(pred, target, cfg).backward()
        analytic = pred.grad.numpy()
        h = 1e-3
        numeric = np.empty(8)
        for i in range(8):
            up, dn = pred0.copy(), pred0.copy()
            up[i] += h
            dn[i] -= h
            numeric[i] = (float(total_loss(t(up), target, cfg)) - float(total_loss(t(dn), target, cfg))) / (2 * h)
        assert np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric) < 1e-4

    def test_bad_config(self):
        with pytest.raises(ValueError):
            LossConfig(gamma=-1)
