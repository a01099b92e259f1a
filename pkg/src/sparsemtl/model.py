"""Core model types and the regularized multi-task objective.

The model is a sparse low-rank factorization W = U V of the stacked
coefficient matrix: U (D x K) maps input variables to K latent bases,
V (K x T) combines bases per task.  The training objective is

    sum_j (1/N_j) L(y_j, X_j U v_j)
        + gamma1 ||U||_1 + gamma2 sum_i ||U[i, :]||_inf
        + mu sum_j (||v_j||_ksp)^2

with L either squared error (1/2 ||.||^2) or the logistic loss on +/-1
labels, and ||.||_ksp the k-support norm.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import InvalidDataError, ParameterError, ShapeError
from .prox import ksupport_norm

REGRESSION = "regression"
CLASSIFICATION = "binary-classification"
PROBLEM_KINDS = (REGRESSION, CLASSIFICATION)


def check_finite(arr, name):
    if arr.size == 0:
        raise InvalidDataError("%s is empty" % name)
    if not np.all(np.isfinite(arr)):
        raise InvalidDataError("%s contains NaN or inf" % name)


@dataclass
class TaskData:
    """One task's design matrix X (N x D) and targets y (N,)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.X.ndim != 2:
            raise ShapeError("X must be 2-d, got ndim=%d" % self.X.ndim)
        if self.y.ndim != 1:
            raise ShapeError("y must be 1-d, got ndim=%d" % self.y.ndim)
        if self.X.shape[0] != self.y.shape[0]:
            raise ShapeError(
                "X has %d rows but y has %d entries"
                % (self.X.shape[0], self.y.shape[0])
            )
        check_finite(self.X, "X")
        check_finite(self.y, "y")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]


@dataclass
class MultiTaskDataset:
    """A list of tasks over a shared variable space, plus the problem kind."""

    tasks: list
    problem_kind: str = REGRESSION

    def __post_init__(self):
        if len(self.tasks) == 0:
            raise InvalidDataError("dataset has no tasks")
        if self.problem_kind not in PROBLEM_KINDS:
            raise ParameterError(
                "problem_kind must be one of %s, got %r"
                % (PROBLEM_KINDS, self.problem_kind)
            )
        d0 = self.tasks[0].d
        for j, t in enumerate(self.tasks):
            if t.d != d0:
                raise ShapeError(
                    "task %d has %d variables, task 0 has %d" % (j, t.d, d0)
                )
            if self.problem_kind == CLASSIFICATION:
                labs = np.unique(t.y)
                if not np.all(np.isin(labs, (-1.0, 1.0))):
                    raise InvalidDataError(
                        "task %d labels must be in {-1, +1}" % j
                    )

    @property
    def n_tasks(self):
        return len(self.tasks)

    @property
    def d(self):
        return self.tasks[0].d


@dataclass
class Factorization:
    """Model parameters U (D x K) and V (K x T)."""

    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=np.float64)
        self.V = np.asarray(self.V, dtype=np.float64)
        if self.U.ndim != 2 or self.V.ndim != 2:
            raise ShapeError("U and V must be 2-d")
        if self.U.shape[1] != self.V.shape[0]:
            raise ShapeError(
                "U has %d columns but V has %d rows"
                % (self.U.shape[1], self.V.shape[0])
            )
        check_finite(self.U, "U")
        check_finite(self.V, "V")

    @property
    def W(self):
        """Stacked per-task coefficients, D x T."""
        return self.U @ self.V


@dataclass
class HyperParams:
    """Solver hyperparameters with their valid ranges."""

    gamma1: float = 0.0
    gamma2: float = 0.0
    mu: float = 0.0
    K: int = 1
    k: int = 1
    rho: float = 2.0
    outer_tol: float = 1e-4
    admm_tol: float = 1e-2
    fista_tol: float = 1e-6
    outer_max_iter: int = 50
    admm_max_iter: int = 500
    fista_max_iter: int = 1000

    def __post_init__(self):
        for name in ("gamma1", "gamma2", "mu"):
            if getattr(self, name) < 0:
                raise ParameterError("%s must be >= 0" % name)
        if self.K < 1:
            raise ParameterError("K must be >= 1")
        if not 1 <= self.k <= self.K:
            raise ParameterError(
                "k must be in 1..K, got k=%d K=%d" % (self.k, self.K)
            )
        if self.rho <= 0:
            raise ParameterError("rho must be > 0")
        for name in ("outer_tol", "admm_tol", "fista_tol"):
            if getattr(self, name) <= 0:
                raise ParameterError("%s must be > 0" % name)
        for name in ("outer_max_iter", "admm_max_iter", "fista_max_iter"):
            if getattr(self, name) < 1:
                raise ParameterError("%s must be >= 1" % name)


def predict(fact, X, task_index):
    """Raw scores X @ U v_j for one task; callers threshold at 0 if needed."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != fact.U.shape[0]:
        raise ShapeError(
            "X has shape %r, expected (*, %d)" % (X.shape, fact.U.shape[0])
        )
    if not 0 <= task_index < fact.V.shape[1]:
        raise ParameterError("task_index %d out of range" % task_index)
    return X @ (fact.U @ fact.V[:, task_index])


def predict_labels(fact, X, task_index):
    """Thresholded +/-1 labels; score exactly 0 maps to +1."""
    s = predict(fact, X, task_index)
    return np.where(s >= 0, 1.0, -1.0)


def task_loss(y, scores, problem_kind):
    """Unnormalized loss: squared 0.5||s - y||^2 or sum of logistic terms."""
    if problem_kind == REGRESSION:
        r = scores - y
        return 0.5 * float(r @ r)
    if problem_kind == CLASSIFICATION:
        # log(1 + exp(-y s)) evaluated stably
        return float(np.logaddexp(0.0, -y * scores).sum())
    raise ParameterError("unknown problem_kind %r" % problem_kind)


def loss_and_gradient_v(task, A, v, problem_kind=REGRESSION):
    """Per-task loss (1/N) L(y, A v) and its gradient in v, A = X_j U."""
    n = task.n
    s = A @ v
    if problem_kind == REGRESSION:
        r = s - task.y
        loss = 0.5 * float(r @ r) / n
        grad = (A.T @ r) / n
    elif problem_kind == CLASSIFICATION:
        ys = task.y * s
        loss = float(np.logaddexp(0.0, -ys).sum()) / n
        # d/ds log(1+exp(-ys)) = -y * sigmoid(-ys)
        grad = -(A.T @ (task.y * expit(-ys))) / n
    else:
        raise ParameterError("unknown problem_kind %r" % problem_kind)
    return loss, grad


def objective_value(data, fact, hp):
    """Full training objective at (U, V); infinite inputs rejected upstream."""
    if fact.V.shape[1] != data.n_tasks:
        raise ShapeError(
            "V has %d columns for %d tasks" % (fact.V.shape[1], data.n_tasks)
        )
    total = 0.0
    for j, task in enumerate(data.tasks):
        s = task.X @ (fact.U @ fact.V[:, j])
        total += task_loss(task.y, s, data.problem_kind) / task.n
    total += hp.gamma1 * float(np.abs(fact.U).sum())
    total += hp.gamma2 * float(np.abs(fact.U).max(axis=1).sum())
    for j in range(data.n_tasks):
        total += hp.mu * ksupport_norm(fact.V[:, j], hp.k) ** 2
    return total
