import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tactile_dome import krr
from tactile_dome.geometry import DomeSpec, build_case, make_training_grid
from tactile_dome.krr import FittedModel, GridSearchReport, Hyperparams, SolveError
from tactile_dome.surrogate import Dataset, generate_dataset

from oracles import dense_krr_oracle

DOME = DomeSpec()


@pytest.fixture(scope="module")
def small_dataset():
    return generate_dataset(
        build_case(8), DOME, make_training_grid(DOME, 8), np.arange(0, 3.01, 0.5), seed=3,
    )


class TestKernel:
    def test_examples(self):
        assert krr.laplacian_kernel([[0, 0, 0, 0, 0]], [[1, 2, 0, 0, 0]], 0.5)[0, 0] == pytest.approx(
            math.exp(-1.5)
        )
        assert krr.laplacian_kernel([[3, 1, 4, 1, 5]], [[3, 1, 4, 1, 5]], 7.0)[0, 0] == 1.0
        assert krr.laplacian_kernel([[0] * 5], [[9] * 5], 0.0)[0, 0] == 1.0

    def test_symmetric_positive_definite(self):
        X = np.random.default_rng(0).normal(size=(60, 5))
        K = krr.laplacian_kernel(X, X, 0.3)
        np.testing.assert_array_equal(K, K.T)
        assert np.linalg.eigvalsh(K).min() > 0

    def test_negative_gamma(self):
        with pytest.raises(ValueError):
            krr.laplacian_kernel(np.zeros((1, 5)), np.zeros((1, 5)), -1.0)


class TestFit:
    def test_matches_dense_krr_oracle(self):
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(100):
            n = int(rng.integers(1, 25))
            X = rng.normal(scale=3, size=(n, 5))
            T = rng.uniform(-15, 15, size=(n, 2))
            alpha = 10 ** rng.uniform(-3, 1)
            gamma = 10 ** rng.uniform(-3, 0)
            Xq = rng.normal(scale=3, size=(7, 5))
            got = krr.predict(krr.fit(X, T, Hyperparams(alpha, gamma)), Xq)
            want = dense_krr_oracle(X, T, alpha, gamma, Xq)
            worst = max(worst, np.abs(got - want).max())
        assert worst < 1e-8

    def test_single_row(self):
        t = np.array([[4.0, -2.0]])
        m = krr.fit(np.ones((1, 5)), t, Hyperparams(0.25, 1.0))
        np.testing.assert_allclose(krr.predict(m, np.ones((1, 5))), t / 1.25, rtol=1e-14)

    def test_tiny_alpha_interpolates(self):
        rng = np.random.default_rng(2)
        X = rng.normal(scale=5, size=(40, 5))
        T = rng.uniform(-15, 15, size=(40, 2))
        m = krr.fit(X, T, Hyperparams(1e-12, 0.5))
        np.testing.assert_allclose(krr.predict(m, X), T, atol=1e-6)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_row_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(15, 5))
        T = rng.normal(size=(15, 2))
        Xq = rng.normal(size=(4, 5))
        perm = rng.permutation(15)
        h = Hyperparams(0.1, 0.4)
        a = krr.predict(krr.fit(X, T, h), Xq)
        b = krr.predict(krr.fit(X[perm], T[perm], h), Xq)
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_empty_query(self):
        m = krr.fit(np.eye(5), np.zeros((5, 2)), Hyperparams(1.0, 1.0))
        assert krr.predict(m, np.zeros((0, 5))).shape == (0, 2)

    def test_shrinkage_grows_with_alpha(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(30, 5))
        T = rng.uniform(-10, 10, size=(30, 2))
        norms = [
            np.linalg.norm(krr.predict(krr.fit(X, T, Hyperparams(a, 0.5)), X))
            for a in (1e-3, 1e-2, 1e-1, 1, 10)
        ]
        assert all(b < a for a, b in zip(norms, norms[1:]))

    def test_ill_conditioned_rejected(self):
        X = np.zeros((20, 5))  # duplicate rows -> rank one kernel
        with pytest.raises(SolveError) as info:
            krr.fit(X, np.zeros((20, 2)), Hyperparams(1e-14, 0.1))
        assert info.value.condition > 1e13
        assert "ill-conditioned" in str(info.value)

    def test_non_finite_input(self):
        X = np.ones((2, 5))
        X[0, 0] = np.nan
        with pytest.raises(ValueError):
            krr.fit(X, np.zeros((2, 2)), Hyperparams(1, 1))

    @pytest.mark.parametrize("alpha,gamma", [(0, 1), (-1, 1), (1, -1)])
    def test_hyperparams_validated(self, alpha, gamma):
        with pytest.raises(ValueError):
            Hyperparams(alpha, gamma)

    def test_scaling_matches_manual(self):
        rng = np.random.default_rng(5)
        X = rng.normal(loc=50, scale=[1, 10, 100, 0.1, 5], size=(30, 5))
        T = rng.normal(size=(30, 2))
        h = Hyperparams(0.1, 0.3)
        m = krr.fit(X, T, h, scale_features=True)
        mean, sd = X.mean(0), X.std(0)
        manual = krr.fit((X - mean) / sd, T, h)
        np.testing.assert_allclose(krr.predict(m, X[:5]), krr.predict(manual, (X[:5] - mean) / sd),
                                   atol=1e-10)

    def test_json_round_trip(self):
        rng = np.random.default_rng(6)
        m = krr.fit(rng.normal(size=(10, 5)), rng.normal(size=(10, 2)), Hyperparams(0.5, 0.2),
                    scale_features=True, meta={"case": 8})
        back = FittedModel.from_json(json.loads(json.dumps(m.to_json())))
        Xq = rng.normal(size=(3, 5))
        np.testing.assert_array_equal(krr.predict(m, Xq), krr.predict(back, Xq))
        assert back.meta["case"] == 8


class TestCrossValidation:
    def test_folds_partition(self):
        folds = krr.kfold_indices(256, 5, 0)
        assert sorted(len(f) for f in folds) == [51, 51, 51, 51, 52]
        np.testing.assert_array_equal(np.sort(np.concatenate(folds)), np.arange(256))

    def test_folds_deterministic(self):
        a, b = krr.kfold_indices(100, 5, 7), krr.kfold_indices(100, 5, 7)
        c = krr.kfold_indices(100, 5, 8)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        assert not all(np.array_equal(x, y) for x, y in zip(a, c))

    @pytest.mark.parametrize("n,k", [(3, 5), (10, 1)])
    def test_bad_fold_count(self, n, k):
        with pytest.raises(ValueError):
            krr.kfold_indices(n, k, 0)

    def test_constant_target(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 5))
        T = np.tile([3.0, -4.0], (50, 1))
        s = krr.cv_error_surface(X, T, [1e-12], [0.0], k=5)
        assert s[0, 0] < 1e-4

    def test_kfold_cv_equals_grid_cell(self, small_dataset):
        report = krr.grid_search(small_dataset, alphas=[1e-3, 1e-1], gammas=[1e-3, 1e-2])
        for i, a in enumerate(report.alphas):
            for j, g in enumerate(report.gammas):
                v = krr.kfold_cv(small_dataset, Hyperparams(a, g))
                assert v == pytest.approx(report.scores[i, j], abs=1e-12)

    def test_grid_path_matches_direct_fit(self, small_dataset):
        rows = small_dataset.training_rows(0.5)
        X, T = rows.readings, rows.ab
        h = Hyperparams(1e-2, 1e-2)
        folds = krr.kfold_indices(len(X), 5, 0)
        errs = np.empty(len(X))
        for held in folds:
            train = np.setdiff1d(np.arange(len(X)), held)
            m = krr.fit(X[train], T[train], h)
            errs[held] = krr.cartesian_errors(T[held], krr.predict(m, X[held]), DOME)
        assert krr.kfold_cv(small_dataset, h) == pytest.approx(np.median(errs), abs=1e-8)


class TestGridSearch:
    def test_grid_axis(self):
        g = krr.log_grid()
        assert len(g) == 20 and g[0] == pytest.approx(1e-5) and g[-1] == pytest.approx(10)
        np.testing.assert_allclose(g[1:] / g[:-1], 10 ** (6 / 19), rtol=1e-12)

    def test_select_best_ties(self):
        alphas, gammas = np.array([1.0, 2.0]), np.array([1.0, 2.0])
        assert krr.select_best(alphas, gammas, np.array([[1.0, 1.0], [1.0, 1.0]])) == (0, 0)
        assert krr.select_best(alphas, gammas, np.array([[2.0, 1.0], [1.0, 1.0]])) == (1, 0)
        assert krr.select_best(alphas, gammas, np.array([[2.0, 0.5], [1.0, 1.0]])) == (0, 1)

    def test_full_grid(self, small_dataset):
        report = krr.grid_search(small_dataset, alphas=krr.log_grid(), gammas=krr.log_grid())
        assert len(report.entries()) == 400
        assert report.best_score == report.scores.min()
        i, j = np.unravel_index(np.argmin(report.scores), report.scores.shape)
        assert report.best == Hyperparams(report.alphas[i], report.gammas[j])
        back = GridSearchReport.from_json(json.loads(json.dumps(report.to_json())))
        np.testing.assert_array_equal(back.scores, report.scores)
        assert back.best == report.best

    def test_threads_do_not_change_result(self, small_dataset):
        kw = dict(alphas=krr.log_grid(count=5), gammas=krr.log_grid(count=6))
        a = krr.grid_search(small_dataset, n_jobs=1, **kw)
        b = krr.grid_search(small_dataset, n_jobs=4, **kw)
        assert a.scores.tobytes() == b.scores.tobytes()

    def test_beats_mean_predictor(self, small_dataset):
        report = krr.grid_search(small_dataset)
        rows = small_dataset.training_rows(0.5)
        mean = np.tile(rows.ab.mean(0), (len(rows), 1))
        assert report.best_score < 0.5 * np.median(krr.cartesian_errors(rows.ab, mean, DOME))

    def test_min_depth_filters(self):
        ds = Dataset(
            np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]]), [0.0, 0.25, 1.0], [False, True, True],
            np.zeros((3, 5)),
        )
        assert len(ds.training_rows(0.5)) == 1
