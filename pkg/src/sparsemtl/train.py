"""Alternating trainer and the single-task baselines.

Training follows three stages: an independent ridge fit per task, a
truncated SVD of the stacked coefficients to split them into U and V,
then alternation between the ADMM U-solver and the per-column FISTA
V-solver until the relative objective change falls under outer_tol.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .admm import admm_solve_u
from .errors import ParameterError
from .fista import FistaConfig, update_all_v
from .model import (
    CLASSIFICATION,
    REGRESSION,
    Factorization,
    objective_value,
)
from .prox import prox_l1


def ridge_init_coefficient(task, lam, problem_kind=REGRESSION):
    """argmin (1/N) L(y, X w) + lam ||w||_2^2 for one task."""
    if lam < 0:
        raise ParameterError("lam must be >= 0")
    X, y, n, d = task.X, task.y, task.n, task.d
    if problem_kind == REGRESSION:
        A = X.T @ X / n
        A[np.diag_indices_from(A)] += 2.0 * lam
        return np.linalg.solve(A, X.T @ y / n)
    if problem_kind != CLASSIFICATION:
        raise ParameterError("unknown problem_kind %r" % problem_kind)
    # damped Newton on the regularized logistic loss
    w = np.zeros(d)
    s = X @ w
    val = float(np.logaddexp(0.0, -y * s).sum()) / n + lam * float(w @ w)
    for _ in range(100):
        p = expit(-y * s)
        grad = -(X.T @ (y * p)) / n + 2.0 * lam * w
        if np.linalg.norm(grad) <= 1e-8:
            break
        h = p * (1.0 - p)
        H = X.T @ (h[:, None] * X) / n
        H[np.diag_indices_from(H)] += 2.0 * lam
        step = np.linalg.solve(H, grad)
        t = 1.0
        while t > 1e-12:
            wn = w - t * step
            sn = X @ wn
            vn = float(np.logaddexp(0.0, -y * sn).sum()) / n + lam * float(wn @ wn)
            if vn <= val:
                w, s, val = wn, sn, vn
                break
            t *= 0.5
    return w


def initialize(data, hp):
    """Ridge-then-SVD warm start for the factorization.

    The per-task ridge weight is the l2 norm of (gamma1, gamma2, mu).
    W's top-K singular triples are split as U0 = P sqrt(S),
    V0 = sqrt(S) Q'; missing rank is padded with zero columns.  Each
    retained left vector is sign-fixed so its largest-magnitude entry is
    positive, which pins the factorization's sign ambiguity.
    """
    lam = float(np.sqrt(hp.gamma1**2 + hp.gamma2**2 + hp.mu**2))
    W = np.column_stack(
        [
            ridge_init_coefficient(t, lam, data.problem_kind)
            for t in data.tasks
        ]
    )
    P, S, Qt = np.linalg.svd(W, full_matrices=False)
    r = min(hp.K, S.size)
    P, S, Qt = P[:, :r], S[:r], Qt[:r, :]
    for i in range(r):
        pivot = np.argmax(np.abs(P[:, i]))
        if P[pivot, i] < 0:
            P[:, i] = -P[:, i]
            Qt[i, :] = -Qt[i, :]
    root = np.sqrt(S)
    U0 = P * root
    V0 = root[:, None] * Qt
    if r < hp.K:
        U0 = np.hstack([U0, np.zeros((U0.shape[0], hp.K - r))])
        V0 = np.vstack([V0, np.zeros((hp.K - r, V0.shape[1]))])
    return Factorization(U=U0, V=V0)


@dataclass
class FitReport:
    """Everything fit() observed, including the final factorization."""

    factorization: Factorization
    objective_trace: list
    outer_iterations: int
    converged: bool
    admm_iterations: list = field(default_factory=list)
    fista_iterations: list = field(default_factory=list)
    wall_time: float = 0.0


def fit(data, hp, threads=1):
    """Alternate U and V solves until the objective settles.

    ADMM consensus state is carried across outer iterations, so later U
    solves start near their fixed point.  Returns the factorization and
    a FitReport; the trace includes the value at the initialization.
    """
    t0 = time.perf_counter()
    fact = initialize(data, hp)
    U, V = fact.U, fact.V
    obj = objective_value(data, fact, hp)
    trace = [obj]
    admm_iters = []
    fista_iters = []
    admm_state = None
    cfg = FistaConfig(max_iter=hp.fista_max_iter, tol=hp.fista_tol)
    converged = False
    outer = 0
    for outer in range(1, hp.outer_max_iter + 1):
        res = admm_solve_u(data, V, U, hp, state=admm_state)
        U = res.U
        admm_state = res.state
        admm_iters.append(res.iterations)
        V, col_results = update_all_v(data, U, V, hp, cfg=cfg, threads=threads)
        fista_iters.append(sum(r.iterations for r in col_results))
        new_obj = objective_value(data, Factorization(U=U, V=V), hp)
        trace.append(new_obj)
        if abs(obj - new_obj) <= hp.outer_tol * (1.0 + abs(new_obj)):
            obj = new_obj
            converged = True
            break
        obj = new_obj
    fact = Factorization(U=U, V=V)
    report = FitReport(
        factorization=fact,
        objective_trace=trace,
        outer_iterations=outer,
        converged=converged,
        admm_iterations=admm_iters,
        fista_iterations=fista_iters,
        wall_time=time.perf_counter() - t0,
    )
    return fact, report


def lasso_fit(task, lam, problem_kind=REGRESSION, tol=1e-8, max_iter=5000):
    """Single-task l1 baseline: min (1/N) L(y, X w) + lam ||w||_1.

    FISTA with soft threshold and a monotone restart; stops when the
    relative objective change drops under tol.  With lam at or above
    ||X'y||_inf / N the zero vector is already stationary and is
    returned exactly.
    """
    if lam < 0:
        raise ParameterError("lam must be >= 0")
    X, y, n = task.X, task.y, task.n
    d = task.d

    if problem_kind == REGRESSION:
        def smooth(w):
            r = X @ w - y
            return 0.5 * float(r @ r) / n, (X.T @ r) / n
    elif problem_kind == CLASSIFICATION:
        def smooth(w):
            ys = y * (X @ w)
            val = float(np.logaddexp(0.0, -ys).sum()) / n
            return val, -(X.T @ (y * expit(-ys))) / n
    else:
        raise ParameterError("unknown problem_kind %r" % problem_kind)

    w = np.zeros(d)
    _, grad0 = smooth(w)
    if lam >= float(np.abs(grad0).max(initial=0.0)):
        return w

    smax = float(np.linalg.svd(X, compute_uv=False)[0]) if X.any() else 0.0
    lip = smax * smax / n
    if problem_kind == CLASSIFICATION:
        lip /= 4.0
    s = 1.0 / lip if lip > 0 else 1.0

    wp = w
    yv = w
    t = 1.0
    g0, _ = smooth(w)
    fw = g0 + lam * float(np.abs(w).sum())
    for _ in range(max_iter):
        g_y, grad = smooth(yv)
        while True:
            cand = prox_l1(yv - s * grad, s * lam)
            dvec = cand - yv
            g_c, _ = smooth(cand)
            if g_c <= g_y + grad @ dvec + (dvec @ dvec) / (2.0 * s) + 1e-12:
                break
            s *= 0.5
        f_c = g_c + lam * float(np.abs(cand).sum())
        if f_c > fw + 1e-15:
            yv = w
            t = 1.0
            g_y, grad = smooth(yv)
            while True:
                cand = prox_l1(yv - s * grad, s * lam)
                dvec = cand - yv
                g_c, _ = smooth(cand)
                if g_c <= g_y + grad @ dvec + (dvec @ dvec) / (2.0 * s) + 1e-12:
                    break
                s *= 0.5
            f_c = g_c + lam * float(np.abs(cand).sum())
        tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        wp = w
        w = cand
        yv = w + ((t - 1.0) / tn) * (w - wp)
        done = abs(fw - f_c) <= tol * (1.0 + abs(f_c))
        fw = f_c
        t = tn
        if done:
            break
    return w
