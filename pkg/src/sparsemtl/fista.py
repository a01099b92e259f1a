"""Accelerated proximal gradient (FISTA) for the per-task V columns.

Each column v_j solves

    min_v (1/N_j) L(y_j, A v) + mu ||v||_ksp^2,   A = X_j U,

with backtracking line search on the smooth part, a monotone restart
when acceleration overshoots, and the squared-k-support prox as the
backward step.  For squared loss the iteration runs on the K x K Gram
form, so its cost does not grow with N_j.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ParameterError, ShapeError
from .model import CLASSIFICATION, REGRESSION


@dataclass
class FistaConfig:
    """Iteration budget, stopping tolerance and step-size policy."""

    max_iter: int = 1000
    tol: float = 1e-6
    backtrack_factor: float = 0.5
    initial_step: float = 1.0

    def __post_init__(self):
        if self.max_iter < 1:
            raise ParameterError("max_iter must be >= 1")
        if self.tol <= 0:
            raise ParameterError("tol must be > 0")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ParameterError("backtrack_factor must be in (0, 1)")
        if self.initial_step <= 0:
            raise ParameterError("initial_step must be > 0")


@dataclass
class VColumnResult:
    v: np.ndarray
    iterations: int
    converged: bool
    objective: float


def solve_v_column(task, U, v_init, mu, k, cfg, problem_kind=REGRESSION):
    """Solve one task's column to relative objective change under cfg.tol."""
    U = np.asarray(U, dtype=np.float64)
    v_init = np.ascontiguousarray(v_init, dtype=np.float64)
    K = U.shape[1]
    if v_init.shape != (K,):
        raise ShapeError(
            "v_init has shape %r, expected (%d,)" % (v_init.shape, K)
        )
    if task.d != U.shape[0]:
        raise ShapeError(
            "task has %d variables but U has %d rows" % (task.d, U.shape[0])
        )
    if mu < 0:
        raise ParameterError("mu must be >= 0")
    if not 1 <= k <= K:
        raise ParameterError("k must be in 1..%d, got %d" % (K, k))
    A = task.X @ U
    smax = float(np.linalg.svd(A, compute_uv=False)[0]) if A.any() else 0.0
    n = task.n
    if problem_kind == REGRESSION:
        lip = smax * smax / n
        s0 = cfg.initial_step / lip if lip > 0 else cfg.initial_step
        G = A.T @ A
        b = A.T @ task.y
        const = 0.5 * float(task.y @ task.y)
        v, its, conv, obj = kernels.fista_sq_kernel(
            G, b, const, n, v_init, mu, k, s0,
            cfg.max_iter, cfg.tol, cfg.backtrack_factor,
        )
    elif problem_kind == CLASSIFICATION:
        lip = smax * smax / (4.0 * n)
        s0 = cfg.initial_step / lip if lip > 0 else cfg.initial_step
        At = np.ascontiguousarray(A.T)
        v, its, conv, obj = kernels.fista_logistic_kernel(
            np.ascontiguousarray(A), At, task.y, v_init, mu, k, s0,
            cfg.max_iter, cfg.tol, cfg.backtrack_factor,
        )
    else:
        raise ParameterError("unknown problem_kind %r" % problem_kind)
    return VColumnResult(
        v=v, iterations=int(its), converged=bool(conv), objective=float(obj)
    )


def update_all_v(data, U, V_init, hp, cfg=None, threads=1):
    """Refresh every column of V, warm-started from V_init.

    Columns are independent; with threads > 1 they run on a thread pool
    and are written back in task order, so the result does not depend on
    scheduling.  Returns the new V and the per-column results.
    """
    V_init = np.asarray(V_init, dtype=np.float64)
    if V_init.shape != (U.shape[1], data.n_tasks):
        raise ShapeError(
            "V_init has shape %r, expected (%d, %d)"
            % (V_init.shape, U.shape[1], data.n_tasks)
        )
    if cfg is None:
        cfg = FistaConfig(max_iter=hp.fista_max_iter, tol=hp.fista_tol)

    def one(j):
        return solve_v_column(
            data.tasks[j], U, V_init[:, j], hp.mu, hp.k, cfg,
            data.problem_kind,
        )

    T = data.n_tasks
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(T)))
    else:
        results = [one(j) for j in range(T)]
    V = np.empty_like(V_init)
    for j, r in enumerate(results):
        V[:, j] = r.v
    return V, results
