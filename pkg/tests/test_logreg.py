"""Coordinate-descent logistic regression against brute-force oracles."""

import math

import numpy as np
import pytest

from ppgscreen.errors import (
    EmptyClassError,
    LengthMismatchError,
    NonFiniteError,
    SchemaError,
    SingleClassError,
)
from ppgscreen.models import (
    ClassWeights,
    LogRegModel,
    balanced_weights,
    load_model,
    logreg_objective,
    predict_logreg,
    save_model,
    train_logreg,
)

TWO_POINTS = (np.array([[-1.0], [1.0]]), np.array([0, 1]))


def penalized_loss(w, b, Xs, y, s, lam):
    """Independent objective: weighted logloss + L1, standardized space."""
    z = Xs @ np.atleast_1d(w) + b
    loss = sum(si * math.log1p(math.exp(-abs(zi)))
               + si * max((1 - 2 * yi) * zi, 0.0)
               for zi, yi, si in zip(z, y, s))
    return loss + lam * np.abs(w).sum()


def grid_minimum(f, spans, points=41, zooms=8):
    """Iteratively zoomed grid search; spans is a list of (lo, hi)."""
    spans = [list(sp) for sp in spans]
    best_args = None
    for _ in range(zooms):
        axes = [np.linspace(lo, hi, points) for lo, hi in spans]
        mesh = np.meshgrid(*axes, indexing="ij")
        vals = np.vectorize(f)(*mesh)
        flat = int(np.argmin(vals))
        idx = np.unravel_index(flat, vals.shape)
        best_args = [float(ax[i]) for ax, i in zip(axes, idx)]
        spans = [[a - (hi - lo) * 2.0 / points, a + (hi - lo) * 2.0 / points]
                 for a, (lo, hi) in zip(best_args, spans)]
    return f(*best_args), best_args


class TestBalancedWeights:
    def test_formula_examples(self):
        cw = balanced_weights(75, 25)
        assert cw.w0 == pytest.approx(0.6667, abs=1e-4)
        assert cw.w1 == pytest.approx(2.0, abs=1e-12)

    def test_equal_counts_are_unit(self):
        cw = balanced_weights(40, 40)
        assert cw.w0 == 1.0 and cw.w1 == 1.0

    def test_cohort_counts(self):
        cw = balanced_weights(281, 172)
        assert cw.w0 == pytest.approx(0.8060, abs=5e-5)
        assert cw.w1 == pytest.approx(1.3169, abs=5e-5)

    def test_empty_class_rejected(self):
        with pytest.raises(EmptyClassError):
            balanced_weights(0, 10)

    def test_per_sample_expansion(self):
        cw = ClassWeights(0.5, 2.0)
        out = cw.per_sample(np.array([0.0, 1.0, 0.0]))
        assert out.tolist() == [0.5, 2.0, 0.5]


class TestTrainLogreg:
    def test_huge_penalty_kills_weight(self):
        X, y = TWO_POINTS
        model = train_logreg(X, y, penalty=100.0)
        assert model.weights[0] == 0.0
        assert model.intercept == pytest.approx(0.0, abs=1e-12)
        p = predict_logreg(model, X)
        assert np.allclose(p, 0.5, atol=1e-12)
        assert model.converged

    def test_small_penalty_matches_grid_oracle(self):
        X, y = TWO_POINTS
        lam = 0.01
        model = train_logreg(X, y, penalty=lam, tol=1e-10)
        assert predict_logreg(model, np.array([1.0])) > 0.9
        assert predict_logreg(model, np.array([-1.0])) < 0.1

        s = np.ones(2)
        Xs = (X - model.mean) / model.std
        fitted = penalized_loss(model.weights[0], model.intercept, Xs, y, s, lam)
        oracle, _ = grid_minimum(
            lambda w, b: penalized_loss(w, b, Xs, y, s, lam),
            [(-10.0, 10.0), (-10.0, 10.0)])
        assert fitted == pytest.approx(oracle, abs=1e-4)
        assert fitted >= oracle - 1e-9
        assert logreg_objective(model, X, y) == pytest.approx(fitted, abs=1e-9)

    def test_weighting_equals_duplication(self):
        rng = np.random.default_rng(11)
        X0 = rng.normal(size=(4, 3))
        X1 = rng.normal(loc=1.0, size=(4, 3))
        X = np.vstack([X0, X1])
        y = np.array([0] * 4 + [1] * 4)
        Xdup = np.vstack([np.repeat(X0, 2, axis=0), X1])
        ydup = np.array([0] * 8 + [1] * 4)

        a = train_logreg(X, y, ClassWeights(2.0, 1.0), penalty=0.5, tol=1e-10)
        b = train_logreg(Xdup, ydup, ClassWeights(1.0, 1.0), penalty=0.5,
                         tol=1e-10)
        assert np.allclose(a.weights, b.weights, atol=1e-6)
        assert a.intercept == pytest.approx(b.intercept, abs=1e-6)
        assert np.allclose(a.mean, b.mean, atol=1e-12)
        assert np.allclose(a.std, b.std, atol=1e-12)

    def test_kkt_conditions_at_convergence(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(40, 5))
        logit = X @ np.array([1.5, -2.0, 0.0, 0.0, 0.3]) - 0.2
        y = (rng.random(40) < 1.0 / (1.0 + np.exp(-logit))).astype(int)
        cw = balanced_weights(int((y == 0).sum()), int((y == 1).sum()))
        lam = 0.8
        model = train_logreg(X, y, cw, penalty=lam, tol=1e-9)
        assert model.converged

        s = cw.per_sample(y.astype(float))
        Xs = (X - model.mean) / model.std
        z = Xs @ model.weights + model.intercept
        p = 1.0 / (1.0 + np.exp(-z))
        grad = (s * (p - y)) @ Xs
        for j, wj in enumerate(model.weights):
            if wj != 0.0:
                assert abs(grad[j] + lam * np.sign(wj)) <= 1e-5
            else:
                assert abs(grad[j]) <= lam + 1e-5
        assert abs(float(s @ (p - y))) <= 1e-5

    def test_l1_path_is_monotone(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(60, 4))
        y = (X[:, 0] - 0.5 * X[:, 2] + 0.3 * rng.normal(size=60) > 0).astype(int)
        lams = [10.0, 3.0, 1.0, 0.3, 0.1, 0.03]
        norms = [np.abs(train_logreg(X, y, penalty=lam, tol=1e-9).weights).sum()
                 for lam in lams]
        for hi, lo in zip(norms, norms[1:]):
            assert hi <= lo + 1e-8

    def test_rescaling_a_feature_changes_nothing(self):
        rng = np.random.default_rng(19)
        X = rng.normal(size=(50, 4))
        y = (X[:, 1] + 0.2 * rng.normal(size=50) > 0).astype(int)
        Xalt = X.copy()
        Xalt[:, 2] = X[:, 2] * 350.0 - 40.0
        a = train_logreg(X, y, penalty=0.5, tol=1e-10)
        b = train_logreg(Xalt, y, penalty=0.5, tol=1e-10)
        probe = rng.normal(size=(20, 4))
        probe_alt = probe.copy()
        probe_alt[:, 2] = probe[:, 2] * 350.0 - 40.0
        assert np.allclose(predict_logreg(a, probe),
                           predict_logreg(b, probe_alt), atol=1e-9)

    def test_constant_column_pinned_to_zero(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 3))
        X[:, 1] = 7.25
        y = (X[:, 0] > 0).astype(int)
        model = train_logreg(X, y, penalty=0.1)
        assert model.weights[1] == 0.0
        assert model.std[1] == 1.0

    def test_single_class_rejected(self):
        with pytest.raises(SingleClassError):
            train_logreg(np.zeros((4, 2)), np.ones(4))

    def test_non_finite_rejected(self):
        X = np.array([[0.0], [np.nan]])
        with pytest.raises(NonFiniteError):
            train_logreg(X, np.array([0, 1]))

    def test_bad_labels_rejected(self):
        with pytest.raises(SchemaError):
            train_logreg(np.array([[0.0], [1.0]]), np.array([1, 2]))

    def test_length_mismatch_rejected(self):
        with pytest.raises(LengthMismatchError):
            train_logreg(np.zeros((4, 2)), np.array([0, 1, 0]))


class TestPredictLogreg:
    def flat_model(self, d=3, intercept=0.0):
        return LogRegModel(weights=np.zeros(d), intercept=intercept,
                           mean=np.zeros(d), std=np.ones(d), penalty=1.0,
                           n_sweeps=1, converged=True)

    def test_zero_model_is_half(self):
        assert predict_logreg(self.flat_model(), np.zeros(3)) == 0.5

    def test_intercept_ln3_gives_three_quarters(self):
        model = self.flat_model(intercept=math.log(3.0))
        assert predict_logreg(model, np.zeros(3)) == pytest.approx(0.75,
                                                                   abs=1e-12)

    def test_batch_and_single_agree(self):
        model = LogRegModel(weights=np.array([0.7, -0.2]), intercept=0.1,
                            mean=np.array([1.0, 2.0]), std=np.array([2.0, 3.0]),
                            penalty=1.0, n_sweeps=1, converged=True)
        X = np.array([[0.3, 1.1], [4.0, -2.0]])
        batch = predict_logreg(model, X)
        assert batch[0] == predict_logreg(model, X[0])
        assert batch[1] == predict_logreg(model, X[1])

    def test_wrong_length_rejected(self):
        with pytest.raises(LengthMismatchError):
            predict_logreg(self.flat_model(3), np.zeros(4))

    def test_model_is_immutable(self):
        model = self.flat_model()
        with pytest.raises(ValueError):
            model.weights[0] = 1.0


class TestSerialization:
    def test_round_trip_is_lossless(self, tmp_path):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(30, 4))
        y = (X[:, 0] > 0.2).astype(int)
        model = train_logreg(X, y, penalty=0.3)
        path = tmp_path / "lr.json"
        save_model(model, path)
        back = load_model(path)
        assert isinstance(back, LogRegModel)
        assert np.array_equal(back.weights, model.weights)
        assert np.array_equal(back.mean, model.mean)
        assert np.array_equal(back.std, model.std)
        assert back.intercept == model.intercept
        probe = rng.normal(size=(10, 4))
        assert np.array_equal(predict_logreg(back, probe),
                              predict_logreg(model, probe))
