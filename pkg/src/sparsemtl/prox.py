"""The k-support norm and the proximal operators of the three penalties.

The squared k-support norm interpolates between the squared l1 norm
(k = 1) and the squared l2 norm (k = K).  Its value at w splits the
sorted magnitudes at an index p: the top k-p-1 entries contribute their
squares, the remaining tail contributes its mean times (p+1).  The same
split structure drives the closed-form prox used inside the solver.

numeric_prox_oracle is a derivative-free minimizer for prox objectives
(strongly convex, possibly kinked).  It exists so tests can check the
closed-form operators against an implementation-independent route.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidDataError, OracleFailure, ParameterError

_CMP_TOL = 1e-12


def _as_vector(w, name="w"):
    w = np.ascontiguousarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise InvalidDataError("%s must be 1-d" % name)
    if w.size == 0:
        raise InvalidDataError("%s is empty" % name)
    if not np.all(np.isfinite(w)):
        raise InvalidDataError("%s contains NaN or inf" % name)
    return w


def _check_k(k, n):
    if not isinstance(k, (int, np.integer)):
        raise ParameterError("k must be an integer, got %r" % (k,))
    if not 1 <= k <= n:
        raise ParameterError("k must be in 1..%d, got %d" % (n, k))


def _check_lam(lam):
    if not np.isfinite(lam) or lam < 0:
        raise ParameterError("penalty weight must be finite and >= 0")
    return float(lam)


@dataclass
class KSupportDecomposition:
    """Split index p, sorted magnitudes and the norm value at that split."""

    p: int
    sorted_abs: np.ndarray
    norm_value: float


def ksupport_norm(w, k):
    """k-support norm of w; equals ||w||_1 at k=1 and ||w||_2 at k=len(w)."""
    w = _as_vector(w)
    _check_k(k, w.size)
    return float(np.sqrt(kernels.ksupport_norm_sq(w, k)))


def ksupport_decomposition(w, k):
    """Norm value together with the split index p that realizes it.

    p is the smallest index in 0..k-1 whose sandwich condition
    z[k-p-1] >= tail_mean >= z[k-p] holds, comparisons taken with a
    1e-12 slack so exact ties on sorted magnitudes stay feasible.
    """
    w = _as_vector(w)
    _check_k(k, w.size)
    z = np.sort(np.abs(w))[::-1]
    tail = float(z[k - 1 :].sum())
    headsq = float((z[: k - 1] ** 2).sum())
    best_p = k - 1
    best_viol = np.inf
    for p in range(k):
        zl = z[k - p - 2] if k - p - 2 >= 0 else np.inf
        zr = z[k - p - 1]
        a = tail / (p + 1.0)
        if a - zl <= _CMP_TOL and zr - a <= _CMP_TOL:
            val = np.sqrt(headsq + tail * tail / (p + 1.0))
            return KSupportDecomposition(p=p, sorted_abs=z, norm_value=float(val))
        viol = max(a - zl, zr - a)
        if viol < best_viol:
            best_viol = viol
            best_p = p
        if p + 1 < k:
            zi = z[k - p - 2]
            headsq -= zi * zi
            tail += zi
    # rounding left no feasible split; recompute at the least-violating p
    p = best_p
    tail = float(z[k - 1 - p :].sum())
    headsq = float((z[: k - 1 - p] ** 2).sum())
    val = np.sqrt(headsq + tail * tail / (p + 1.0))
    return KSupportDecomposition(p=p, sorted_abs=z, norm_value=float(val))


def prox_l1(x, lam):
    """Soft threshold, elementwise on an array of any shape."""
    lam = _check_lam(lam)
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InvalidDataError("x contains NaN or inf")
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def project_l1_ball(v, radius):
    """Euclidean projection of v onto {x : ||x||_1 <= radius}."""
    v = _as_vector(v, "v")
    if not np.isfinite(radius) or radius < 0:
        raise ParameterError("radius must be finite and >= 0")
    return kernels.project_l1_ball_kernel(v, float(radius))


def prox_l1_inf_rows(X, lam):
    """Prox of lam * sum of row-wise l-inf norms, one projection per row."""
    lam = _check_lam(lam)
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidDataError("X must be 2-d")
    if X.size == 0:
        raise InvalidDataError("X is empty")
    if not np.all(np.isfinite(X)):
        raise InvalidDataError("X contains NaN or inf")
    return kernels.prox_l1_inf_rows_kernel(X, lam)


def prox_sq_ksupport(w, lam, k):
    """Prox of lam * (k-support norm)^2; exact zeros in the cut-off tail."""
    w = _as_vector(w)
    _check_k(k, w.size)
    lam = _check_lam(lam)
    return kernels.prox_sq_ksupport_kernel(w, lam, k)


def _fd_gradient(objective, x, h):
    g = np.empty_like(x)
    for i in range(x.size):
        step = h * (1.0 + abs(x[i]))
        xp = x.copy()
        xp[i] += step
        xm = x.copy()
        xm[i] -= step
        g[i] = (objective(xp) - objective(xm)) / (2.0 * step)
    return g


def _fd_descent(objective, x, max_iter=300):
    """Finite-difference gradient descent with Armijo backtracking."""
    fx = objective(x)
    for _ in range(max_iter):
        g = _fd_gradient(objective, x, 1e-7)
        gn = float(g @ g)
        if gn < 1e-18:
            break
        step = 1.0
        improved = False
        while step > 1e-14:
            xn = x - step * g
            fn = objective(xn)
            if fn < fx - 1e-4 * step * gn:
                x, fx = xn, fn
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return x, fx


def _pattern_directions(x, x0, radius, rng):
    """Coordinate, diagonal, tie-group, top-m-group and random directions.

    Tie groups (coordinates whose magnitudes agree to within a few radii)
    get a joint shrink/grow direction, and for each m the top-m
    magnitudes of the anchor x0 get a joint signed move; these are the
    kink manifolds of l-inf and k-support style penalties where
    single-coordinate moves stall.
    """
    n = x.size
    dirs = [np.eye(n)[i] for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            d = np.zeros(n)
            d[i] = d[j] = 1.0
            dirs.append(d / np.sqrt(2.0))
            d2 = np.zeros(n)
            d2[i], d2[j] = 1.0, -1.0
            dirs.append(d2 / np.sqrt(2.0))
    av = np.abs(x)
    tie_tol = 3.0 * radius + 1e-9
    seen = np.zeros(n, dtype=bool)
    for i in range(n):
        if seen[i] or av[i] < 1e-12:
            continue
        grp = np.abs(av - av[i]) < tie_tol
        grp &= av >= 1e-12
        if grp.sum() >= 2:
            d = np.where(grp, np.sign(x), 0.0)
            dirs.append(d / np.linalg.norm(d))
            seen |= grp
    signs = np.where(np.sign(x) != 0.0, np.sign(x), np.sign(x0))
    order0 = np.argsort(-np.abs(x0))
    for m in range(1, n + 1):
        d = np.zeros(n)
        d[order0[:m]] = signs[order0[:m]]
        nz = np.linalg.norm(d)
        if nz > 0:
            dirs.append(d / nz)
    gap = x0 - x
    nz = np.linalg.norm(gap)
    if nz > 1e-12:
        dirs.append(gap / nz)
    for _ in range(2 * n):
        d = rng.normal(size=n)
        dirs.append(d / np.linalg.norm(d))
    return dirs


def numeric_prox_oracle(objective, x0, tol=1e-6, max_evals=400000, seed=0):
    """Minimize a strongly convex, possibly kinked objective numerically.

    Finite-difference descent first, then pattern search over a rich
    direction set with geometrically shrinking radius.  Raises
    OracleFailure when the evaluation budget runs out before the radius
    floor is reached.  Intended for test-time cross-checking of the
    closed-form prox operators, not for production use.
    """
    x0 = _as_vector(np.asarray(x0, dtype=np.float64), "x0")
    rng = np.random.default_rng(seed)
    evals = [0]

    def f(x):
        evals[0] += 1
        if evals[0] > max_evals:
            raise OracleFailure(
                "oracle evaluation budget %d exhausted" % max_evals
            )
        return float(objective(x))

    best_x, best_f = None, np.inf
    for start in (x0.copy(), np.zeros_like(x0)):
        x, fx = _fd_descent(f, start)
        if fx < best_f:
            best_x, best_f = x, fx
    x, fx = best_x, best_f

    radius = 1.0 + float(np.abs(x0).max())
    floor = max(tol * 1e-3, 1e-9)
    while radius > floor:
        dirs = _pattern_directions(x, x0, radius, rng)
        for _sweep in range(40):
            moved = False
            for d in dirs:
                for sgn in (1.0, -1.0):
                    # greedy walk: keep stepping while the move improves
                    for _step in range(64):
                        xn = x + sgn * radius * d
                        fn = f(xn)
                        if fn < fx - 1e-15:
                            x, fx = xn, fn
                            moved = True
                        else:
                            break
            if not moved:
                break
        radius *= 0.35
    return x
