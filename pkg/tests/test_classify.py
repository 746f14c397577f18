"""Linear discriminant classification and threshold placement."""

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.stats import norm

from wingsense import classify as cls
from wingsense.fields import GridField, N_SENSORS


def gaussian_problem(rng, n_feat=5, n_per_class=200, sep=2.0):
    cov = rng.normal(size=(n_feat, n_feat))
    cov = cov @ cov.T + n_feat * np.eye(n_feat)
    mu = rng.normal(size=n_feat) * sep
    x0 = rng.multivariate_normal(np.zeros(n_feat), cov, n_per_class).T
    x1 = rng.multivariate_normal(mu, cov, n_per_class).T
    X = np.hstack([x0, x1])
    y = np.concatenate([np.zeros(n_per_class), np.ones(n_per_class)]).astype(int)
    return X, y, mu, cov


class TestScatterAndDirection:
    def test_direction_matches_closed_form(self):
        """Fisher direction equals S_W^{-1} (mu1 - mu0) up to sign."""
        rng = np.random.default_rng(0)
        worst = 1.0
        for _ in range(100):
            X, y, _, _ = gaussian_problem(rng)
            S_w, _ = cls.scatter_matrices(X, y)
            delta = X[:, y == 1].mean(axis=1) - X[:, y == 0].mean(axis=1)
            ref = np.linalg.solve(S_w, delta)
            ref /= np.linalg.norm(ref)
            parts = cls.SplitData(X_train=X, y_train=y, X_test=X, y_test=y)
            w = cls.fit_lda(parts).w
            worst = min(worst, abs(float(w @ ref)))
        assert worst > 0.999

    def test_scatter_shapes(self):
        rng = np.random.default_rng(1)
        X, y, _, _ = gaussian_problem(rng, n_feat=4)
        S_w, S_b = cls.scatter_matrices(X, y)
        assert S_w.shape == (4, 4)
        assert S_b.shape == (4, 4)
        assert np.allclose(S_w, S_w.T)
        assert np.linalg.matrix_rank(S_b) == 1


class TestThreshold:
    def test_matches_numeric_pdf_intersection(self):
        """The threshold solves equal class likelihoods between the means."""
        rng = np.random.default_rng(2)
        for _ in range(100):
            m0, m1 = np.sort(rng.normal(size=2) * 3)
            s0, s1 = 0.5 + rng.random(2) * 2
            if abs(s0 - s1) < 1e-3:
                continue
            eta = np.concatenate([rng.normal(m0, s0, 4000), rng.normal(m1, s1, 4000)])
            y = np.concatenate([np.zeros(4000), np.ones(4000)]).astype(int)
            thr = cls.gaussian_threshold(eta, y)
            e0 = eta[y == 0]
            e1 = eta[y == 1]
            mm0, ss0 = e0.mean(), e0.std()
            mm1, ss1 = e1.mean(), e1.std()
            f = lambda x: norm.pdf(x, mm0, ss0) - norm.pdf(x, mm1, ss1)
            if f(mm0) * f(mm1) > 0:
                continue                 # no root between the means
            ref = brentq(f, mm0, mm1, xtol=1e-12)
            assert thr == pytest.approx(ref, abs=1e-6)

    def test_equal_spread_midpoint(self):
        eta = np.concatenate([np.full(50, -1.0), np.full(50, 3.0)])
        y = np.concatenate([np.zeros(50), np.ones(50)]).astype(int)
        assert cls.gaussian_threshold(eta, y) == pytest.approx(1.0)


class TestSplitAndEvaluate:
    def make_data(self, n=400, n_feat=20):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(n_feat, 2 * n))
        labels = np.concatenate([np.zeros(n), np.ones(n)]).astype(int)
        return cls.LabeledDataMatrix(X=X, labels=labels,
                                     sensor_ids=np.arange(n_feat))

    def test_split_is_chronological_per_class(self):
        data = self.make_data(100)
        parts = cls.split(data)
        assert parts.X_train.shape[1] == 180
        assert parts.X_test.shape[1] == 20
        assert np.array_equal(parts.X_train[:, :90], data.X[:, :90])
        assert np.array_equal(parts.X_test[:, :10], data.X[:, 90:100])

    def test_assemble_orders_classes(self):
        rng = np.random.default_rng(4)
        a = GridField(values=rng.normal(size=(N_SENSORS, 30)), t_start_ms=0.0)
        b = GridField(values=rng.normal(size=(N_SENSORS, 40)), t_start_ms=0.0)
        data = cls.assemble(a, b)
        assert np.array_equal(np.unique(data.labels, return_counts=True)[1], [30, 40])
        assert np.array_equal(data.X[:, :30], a.values)

    def test_restrict(self):
        data = self.make_data(50)
        sub = data.restrict(np.array([5, 9]))
        assert sub.X.shape[0] == 2
        assert np.array_equal(sub.sensor_ids, [5, 9])

    def test_separable_problem_classified_perfectly(self):
        n = 200
        rng = np.random.default_rng(5)
        X = rng.normal(size=(3, 2 * n)) * 0.1
        X[0, n:] += 5.0
        y = np.concatenate([np.zeros(n), np.ones(n)]).astype(int)
        data = cls.LabeledDataMatrix(X=X, labels=y, sensor_ids=np.arange(3))
        parts = cls.split(data)
        model = cls.fit_lda(parts)
        assert cls.evaluate(model, parts.X_test, parts.y_test) == 1.0

    def test_chance_on_identical_classes(self):
        n = 300
        rng = np.random.default_rng(6)
        X = rng.normal(size=(4, 2 * n))
        y = np.concatenate([np.zeros(n), np.ones(n)]).astype(int)
        data = cls.LabeledDataMatrix(X=X, labels=y, sensor_ids=np.arange(4))
        parts = cls.split(data)
        acc = cls.evaluate(cls.fit_lda(parts), parts.X_test, parts.y_test)
        assert 0.3 < acc < 0.7

    def test_model_round_trip(self, tmp_path):
        data = self.make_data(50)
        parts = cls.split(data)
        model = cls.fit_lda(parts)
        path = str(tmp_path / "model.txt")
        cls.save_model(model, data.sensor_ids, path)
        loaded, ids = cls.load_model(path)
        assert np.allclose(loaded.w, model.w)
        assert loaded.threshold == pytest.approx(model.threshold)
        assert loaded.class_above == model.class_above
        assert np.array_equal(ids, data.sensor_ids)
