import numpy as np
import pytest

from sparsemtl.errors import ParameterError
from sparsemtl.model import (
    CLASSIFICATION,
    Factorization,
    HyperParams,
    MultiTaskDataset,
    TaskData,
    objective_value,
)
from sparsemtl.train import (
    fit,
    initialize,
    lasso_fit,
    ridge_init_coefficient,
)


def make_dataset(seed, D=10, T=6, K=3, n=40, noise=0.1, kind="regression"):
    rng = np.random.default_rng(seed)
    U = rng.normal(size=(D, K))
    U[D // 2 :] = 0.0
    V = rng.normal(size=(K, T))
    tasks = []
    for j in range(T):
        X = rng.normal(size=(n, D))
        s = X @ (U @ V[:, j])
        if kind == "regression":
            y = s + noise * rng.normal(size=n)
        else:
            y = np.where(s + noise * rng.normal(size=n) >= 0, 1.0, -1.0)
        tasks.append(TaskData(X=X, y=y))
    return MultiTaskDataset(tasks=tasks, problem_kind=(
        CLASSIFICATION if kind == "classification" else "regression"
    )), U @ V


class TestRidgeInit:
    def test_scalar_stationarity(self):
        # (1/1)*0.5*(1 - w)^2 + 1*w^2 has stationarity -(1-w) + 2w = 0
        task = TaskData(X=np.array([[1.0]]), y=np.array([1.0]))
        w = ridge_init_coefficient(task, 1.0)
        assert w[0] == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_huge_lam_shrinks_to_zero(self):
        task = TaskData(X=np.random.default_rng(0).normal(size=(20, 5)),
                        y=np.random.default_rng(1).normal(size=20))
        w = ridge_init_coefficient(task, 1e12)
        assert np.max(np.abs(w)) <= 1e-9

    def test_zero_lam_full_rank_is_least_squares(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 4))
        y = rng.normal(size=30)
        w = ridge_init_coefficient(task := TaskData(X=X, y=y), 0.0)
        expected, *_ = np.linalg.lstsq(X, y, rcond=None)
        assert np.allclose(w, expected, atol=1e-10)
        assert task.n == 30

    def test_negative_lam_rejected(self):
        task = TaskData(X=np.eye(2), y=np.ones(2))
        with pytest.raises(ParameterError):
            ridge_init_coefficient(task, -1.0)

    def test_classification_gradient_small_at_solution(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(40, 6))
        y = np.sign(X @ rng.normal(size=6))
        y[y == 0] = 1.0
        task = TaskData(X=X, y=y)
        lam = 0.05
        w = ridge_init_coefficient(task, lam, CLASSIFICATION)
        from scipy.special import expit
        p = expit(-y * (X @ w))
        grad = -(X.T @ (y * p)) / task.n + 2.0 * lam * w
        assert np.linalg.norm(grad) <= 1e-8


class TestInitialize:
    def test_diagonal_dominant_triple(self):
        data = MultiTaskDataset(tasks=[
            TaskData(X=np.eye(2), y=np.array([4.0, 0.0])),
            TaskData(X=np.eye(2), y=np.array([0.0, 1.0])),
        ])
        hp = HyperParams(K=1)
        fact = initialize(data, hp)
        # ridge lam = 0 here, so W_init = diag(4, 1); its top triple
        # splits as U = [2, 0]', V = [2, 0] with the sign fixed positive
        assert np.allclose(fact.U[:, 0], [2.0, 0.0], atol=1e-8)
        assert np.allclose(fact.V[0], [2.0, 0.0], atol=1e-8)

    def test_reconstructs_best_rank_k(self):
        data, _ = make_dataset(4, D=8, T=5, K=3, noise=0.0)
        hp = HyperParams(gamma1=1e-3, gamma2=1e-3, mu=1e-3, K=4, k=1)
        lam = float(np.sqrt(3) * 1e-3)
        W_init = np.column_stack(
            [ridge_init_coefficient(t, lam) for t in data.tasks]
        )
        P, S, Qt = np.linalg.svd(W_init, full_matrices=False)
        best = (P[:, :4] * S[:4]) @ Qt[:4]
        fact = initialize(data, hp)
        assert fact.U.shape == (8, 4)
        assert fact.V.shape == (4, 5)
        err = np.linalg.norm(fact.U @ fact.V - best)
        assert err <= 1e-8 * (1.0 + np.linalg.norm(W_init))

    def test_rank_deficit_pads_with_zeros(self):
        # one-task dataset: W_init is a single column, rank 1
        rng = np.random.default_rng(5)
        data = MultiTaskDataset(tasks=[
            TaskData(X=rng.normal(size=(20, 6)), y=rng.normal(size=20))
        ])
        fact = initialize(data, HyperParams(K=3))
        assert fact.U.shape == (6, 3)
        assert np.all(fact.U[:, 1:] == 0.0)
        assert np.all(fact.V[1:, :] == 0.0)

    def test_sign_fix_is_deterministic(self):
        data, _ = make_dataset(6)
        hp = HyperParams(gamma1=0.01, gamma2=0.01, mu=0.01, K=3, k=1)
        a = initialize(data, hp)
        b = initialize(data, hp)
        assert np.array_equal(a.U, b.U) and np.array_equal(a.V, b.V)
        for i in range(a.U.shape[1]):
            col = a.U[:, i]
            if col.any():
                assert col[np.argmax(np.abs(col))] > 0


class TestFit:
    def test_trace_monotone_within_slack(self):
        data, _ = make_dataset(7)
        hp = HyperParams(gamma1=0.02, gamma2=0.02, mu=0.02, K=3, k=2)
        _, rep = fit(data, hp)
        trace = np.asarray(rep.objective_trace)
        diffs = np.diff(trace)
        assert np.all(diffs <= 1e-6 * (1.0 + np.abs(trace[1:])))

    def test_report_consistency(self):
        data, _ = make_dataset(8)
        hp = HyperParams(gamma1=0.02, gamma2=0.02, mu=0.02, K=3, k=1)
        fact, rep = fit(data, hp)
        assert len(rep.objective_trace) == rep.outer_iterations + 1
        assert len(rep.admm_iterations) == rep.outer_iterations
        assert len(rep.fista_iterations) == rep.outer_iterations
        assert rep.objective_trace[-1] == pytest.approx(
            objective_value(data, fact, hp), rel=1e-12
        )
        assert rep.wall_time > 0.0

    def test_rerun_is_bitwise_identical(self):
        data, _ = make_dataset(9)
        hp = HyperParams(gamma1=0.05, gamma2=0.01, mu=0.05, K=2, k=1)
        f1, r1 = fit(data, hp)
        f2, r2 = fit(data, hp)
        assert np.array_equal(f1.U, f2.U)
        assert np.array_equal(f1.V, f2.V)
        assert r1.objective_trace == r2.objective_trace

    def test_huge_gamma1_zeroes_u(self):
        data, _ = make_dataset(10)
        hp = HyperParams(gamma1=1e9, gamma2=0.0, mu=1e-3, K=2, k=1)
        fact, _ = fit(data, hp)
        assert np.all(fact.U == 0.0)

    def test_task_permutation_preserves_u_column_space(self):
        data, _ = make_dataset(11)
        hp = HyperParams(gamma1=0.02, gamma2=0.02, mu=0.02, K=3, k=1)
        f1, _ = fit(data, hp)
        perm = [4, 2, 0, 5, 1, 3]
        pdata = MultiTaskDataset(tasks=[data.tasks[j] for j in perm])
        f2, _ = fit(pdata, hp)
        assert np.allclose(f2.V, f1.V[:, perm], atol=1e-9)
        # same U up to the shared column space: compare projectors
        def projector(U):
            q, _ = np.linalg.qr(U[:, np.any(U != 0, axis=0)])
            return q @ q.T
        assert np.linalg.norm(projector(f1.U) - projector(f2.U)) <= 1e-6

    def test_beats_single_task_ridge_on_recovery(self):
        data, W_true = make_dataset(12, noise=0.5)
        hp = HyperParams(gamma1=0.05, gamma2=0.05, mu=0.05, K=3, k=1)
        fact, _ = fit(data, hp)
        W_fit = fact.U @ fact.V
        lam = float(np.sqrt(3) * 0.05)
        W_ridge = np.column_stack(
            [ridge_init_coefficient(t, lam) for t in data.tasks]
        )
        err_fit = np.linalg.norm(W_true - W_fit)
        err_ridge = np.linalg.norm(W_true - W_ridge)
        assert err_fit < err_ridge

    def test_classification_fit_converges(self):
        data, _ = make_dataset(13, kind="classification")
        hp = HyperParams(gamma1=0.01, gamma2=0.01, mu=0.01, K=2, k=1)
        fact, rep = fit(data, hp)
        assert rep.converged
        trace = np.asarray(rep.objective_trace)
        assert np.all(np.diff(trace) <= 1e-6 * (1.0 + np.abs(trace[1:])))


class TestLassoFit:
    def test_zero_lam_matches_least_squares(self):
        rng = np.random.default_rng(14)
        X = rng.normal(size=(50, 6))
        y = rng.normal(size=50)
        w = lasso_fit(TaskData(X=X, y=y), 0.0, tol=1e-12)
        expected, *_ = np.linalg.lstsq(X, y, rcond=None)
        assert np.allclose(w, expected, atol=1e-6)

    def test_large_lam_gives_exact_zero(self):
        rng = np.random.default_rng(15)
        X = rng.normal(size=(30, 5))
        y = rng.normal(size=30)
        task = TaskData(X=X, y=y)
        lam = float(np.abs(X.T @ y).max()) / 30.0
        w = lasso_fit(task, lam * 1.001)
        assert np.all(w == 0.0)

    def test_orthonormal_design_soft_thresholds(self):
        rng = np.random.default_rng(16)
        M = rng.normal(size=(40, 40))
        Q, _ = np.linalg.qr(M)
        X = Q[:, :6] * np.sqrt(40.0)  # columns with X'X = n I
        w_true = np.array([2.0, -1.5, 0.8, 0.0, 0.0, 3.0])
        y = X @ w_true
        lam = 0.5
        w = lasso_fit(TaskData(X=X, y=y), lam, tol=1e-12)
        ols = X.T @ y / 40.0
        expected = np.sign(ols) * np.maximum(np.abs(ols) - lam, 0.0)
        assert np.allclose(w, expected, atol=1e-8)

    def test_negative_lam_rejected(self):
        with pytest.raises(ParameterError):
            lasso_fit(TaskData(X=np.eye(2), y=np.ones(2)), -0.5)

    def test_classification_path_decreases_loss(self):
        rng = np.random.default_rng(17)
        X = rng.normal(size=(60, 5))
        y = np.sign(X @ rng.normal(size=5))
        y[y == 0] = 1.0
        task = TaskData(X=X, y=y)
        w = lasso_fit(task, 0.01, problem_kind=CLASSIFICATION)
        loss_w = float(np.logaddexp(0.0, -y * (X @ w)).sum()) / 60.0
        loss_0 = float(np.logaddexp(0.0, np.zeros(60)).sum()) / 60.0
        assert loss_w + 0.01 * np.abs(w).sum() < loss_0
