"""Hot inner-loop kernels with numba and pure-numpy paths.

Every kernel is written once as a plain function over float64 arrays,
using only numpy constructs numba can compile in nopython mode.  When
numba is available (and not disabled via SPARSEMTL_NUMBA=0) the same
source is compiled with @njit; otherwise the uncompiled function runs
as the numpy fallback.  Both variants stay importable so tests and
benchmarks can compare them directly.

Kernels here are deliberately low-level: argument validation lives in
the public wrappers (prox.py, fista.py).
"""

import os
import warnings

import numpy as np

_CMP_TOL = 1e-12  # slack on the sorted-magnitude breakpoint comparisons


def _env_wants_numba():
    val = os.environ.get("SPARSEMTL_NUMBA", "").strip().lower()
    return val not in ("0", "false", "off", "no")


try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False
    if _env_wants_numba():
        warnings.warn("numba not installed, falling back to numpy kernels")

NUMBA_ENABLED = _HAVE_NUMBA and _env_wants_numba()


def _ksupport_norm_sq_src(w, k):
    """Squared k-support norm of w via the sorted-magnitude breakpoint scan.

    Scans p = 0..k-1 for the split where the top k-p-1 magnitudes keep
    their l2 contribution and the rest are averaged into one group; the
    first p whose sandwich condition holds (with a small slack on both
    comparisons) is taken.  If rounding leaves no p feasible, the p with
    the smallest violation is used.
    """
    n = w.shape[0]
    z = np.sort(np.abs(w))[::-1]
    tail = 0.0
    for i in range(k - 1, n):
        tail += z[i]
    headsq = 0.0
    for i in range(k - 1):
        headsq += z[i] * z[i]
    best = 0.0
    best_viol = np.inf
    for p in range(k):
        zl = z[k - p - 2] if k - p - 2 >= 0 else np.inf
        zr = z[k - p - 1]
        a = tail / (p + 1.0)
        val = headsq + tail * tail / (p + 1.0)
        if a - zl <= _CMP_TOL and zr - a <= _CMP_TOL:
            return val
        viol = a - zl if a - zl > zr - a else zr - a
        if viol < best_viol:
            best_viol = viol
            best = val
        if p + 1 < k:
            zi = z[k - p - 2]
            headsq -= zi * zi
            tail += zi
    return best


def _prox_sq_ksupport_src(w, lam, k):
    """Prox of lam * (k-support norm)^2 at w.

    Works on sorted magnitudes: the minimizer scales the largest k-p-1
    entries by 1/(1+2 lam), soft-thresholds the next L-k+p+1 by tau and
    zeroes the rest.  (L, p) is found by scanning support sizes L and
    splits p for the pair whose four breakpoint inequalities hold, again
    with a small slack; ties at the breakpoints make the strict form
    infeasible, so the scan takes the first feasible pair and falls back
    to the least-violating one if rounding excludes all of them.
    """
    n = w.shape[0]
    q = np.zeros(n)
    if lam == 0.0:
        for i in range(n):
            q[i] = w[i]
        return q
    az = np.abs(w)
    order = np.argsort(-az)
    z = az[order]
    if z[0] == 0.0:
        return q
    shrink = 1.0 / (1.0 + 2.0 * lam)
    cs = np.zeros(n + 1)
    for i in range(n):
        cs[i + 1] = cs[i] + z[i]
    sel_L = -1
    sel_p = -1
    sel_tau = 0.0
    best_viol = np.inf
    best_L = k
    best_p = 0
    best_tau = 0.0
    for L in range(k, n + 1):
        for p in range(k):
            i0 = k - p
            tsum = cs[L] - cs[i0 - 1]
            denom = (p + 1.0) + 2.0 * lam * (L - k + p + 1.0)
            tau = 2.0 * lam * tsum / denom
            c = tau * (1.0 + 2.0 * lam) / (2.0 * lam)
            zl = z[i0 - 2] if i0 - 2 >= 0 else np.inf
            zr = z[i0 - 1]
            z_last = z[L - 1]
            z_next = z[L] if L < n else 0.0
            viol = c - zl
            if zr - c > viol:
                viol = zr - c
            if tau - z_last > viol:
                viol = tau - z_last
            if z_next - tau > viol:
                viol = z_next - tau
            if viol <= _CMP_TOL:
                sel_L = L
                sel_p = p
                sel_tau = tau
                break
            if viol < best_viol:
                best_viol = viol
                best_L = L
                best_p = p
                best_tau = tau
        if sel_L >= 0:
            break
    if sel_L < 0:
        sel_L = best_L
        sel_p = best_p
        sel_tau = best_tau
    i0 = k - sel_p
    for i in range(i0 - 1):
        q[order[i]] = z[i] * shrink
    for i in range(i0 - 1, sel_L):
        d = z[i] - sel_tau
        if d > 0.0:
            q[order[i]] = d
    for i in range(n):
        if w[i] < 0.0:
            q[i] = -q[i]
    return q


def _project_l1_ball_src(v, radius):
    """Euclidean projection onto the l1 ball by sort and threshold."""
    n = v.shape[0]
    out = np.zeros(n)
    if radius <= 0.0:
        return out
    av = np.abs(v)
    s = av.sum()
    if s <= radius:
        for i in range(n):
            out[i] = v[i]
        return out
    u = np.sort(av)[::-1]
    css = 0.0
    theta = 0.0
    for j in range(n):
        css += u[j]
        t = (css - radius) / (j + 1.0)
        if u[j] > t:
            theta = t
    for i in range(n):
        d = av[i] - theta
        if d > 0.0:
            out[i] = d if v[i] > 0.0 else -d
    return out


def _prox_l1_inf_rows_src(X, lam):
    """Row-wise prox of lam * ||row||_inf, i.e. clip each row at the
    l1-ball projection threshold (Moreau: x - proj_{lam B1}(x))."""
    m, n = X.shape
    out = np.empty((m, n))
    for r in range(m):
        if lam <= 0.0:
            for i in range(n):
                out[r, i] = X[r, i]
            continue
        s = 0.0
        for i in range(n):
            s += abs(X[r, i])
        if s <= lam:
            for i in range(n):
                out[r, i] = 0.0
            continue
        u = np.sort(np.abs(X[r]))[::-1]
        css = 0.0
        theta = 0.0
        for j in range(n):
            css += u[j]
            t = (css - lam) / (j + 1.0)
            if u[j] > t:
                theta = t
        for i in range(n):
            x = X[r, i]
            if x > theta:
                out[r, i] = theta
            elif x < -theta:
                out[r, i] = -theta
            else:
                out[r, i] = x
    return out


def _make_fista_sq(prox, norm_sq):
    """Build the FISTA loop for (1/2n)||A v - y||^2 + mu ||v||_ksp^2.

    The smooth part is carried as its Gram form: G = A'A, b = A'y,
    const = y'y / 2, so one iteration costs O(K^2) regardless of n.
    Monotone variant: if the accelerated step raises the objective, the
    iteration is redone as a plain prox step from the previous iterate.
    """

    def _fista_sq(G, b, const, n, v0, mu, k, s0, max_iter, tol, bt):
        x = v0.copy()
        xp = v0.copy()
        yv = v0.copy()
        t = 1.0
        s = s0
        fx = (0.5 * (x @ (G @ x)) - b @ x + const) / n + mu * norm_sq(x, k)
        it = 0
        conv = 0
        for it in range(1, max_iter + 1):
            gy = (G @ yv - b) / n
            g_y = (0.5 * (yv @ (G @ yv)) - b @ yv + const) / n
            cand = x
            g_c = g_y
            for _bt in range(200):
                cand = prox(yv - s * gy, s * mu, k)
                d = cand - yv
                g_c = (0.5 * (cand @ (G @ cand)) - b @ cand + const) / n
                if g_c <= g_y + gy @ d + (d @ d) / (2.0 * s) + 1e-12:
                    break
                s *= bt
            f_c = g_c + mu * norm_sq(cand, k)
            if f_c > fx + 1e-15:
                # accelerated step overshot; redo as plain step from x
                yv = x.copy()
                t = 1.0
                gy = (G @ yv - b) / n
                g_y = (0.5 * (yv @ (G @ yv)) - b @ yv + const) / n
                for _bt in range(200):
                    cand = prox(yv - s * gy, s * mu, k)
                    d = cand - yv
                    g_c = (0.5 * (cand @ (G @ cand)) - b @ cand + const) / n
                    if g_c <= g_y + gy @ d + (d @ d) / (2.0 * s) + 1e-12:
                        break
                    s *= bt
                f_c = g_c + mu * norm_sq(cand, k)
            tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            xp = x
            x = cand
            yv = x + ((t - 1.0) / tn) * (x - xp)
            done = abs(fx - f_c) <= tol * (1.0 + abs(f_c))
            fx = f_c
            t = tn
            if done:
                conv = 1
                break
        return x, it, conv, fx

    return _fista_sq


def _make_fista_logistic(prox, norm_sq):
    """FISTA loop for (1/n) sum log(1+exp(-y A v)) + mu ||v||_ksp^2.

    A and its transpose are passed separately so both matmuls hit
    contiguous memory.
    """

    def _fista_logistic(A, At, y, v0, mu, k, s0, max_iter, tol, bt):
        n = A.shape[0]
        x = v0.copy()
        yv = v0.copy()
        t = 1.0
        s = s0

        ys = y * (A @ x)
        fx = (
            np.maximum(0.0, -ys) + np.log1p(np.exp(-np.abs(ys)))
        ).sum() / n + mu * norm_sq(x, k)
        it = 0
        conv = 0
        for it in range(1, max_iter + 1):
            ys = y * (A @ yv)
            e = np.exp(-np.abs(ys))
            g_y = (np.maximum(0.0, -ys) + np.log1p(e)).sum() / n
            sig = np.where(ys >= 0.0, e / (1.0 + e), 1.0 / (1.0 + e))
            gy = -(At @ (y * sig)) / n
            cand = x
            g_c = g_y
            for _bt in range(200):
                cand = prox(yv - s * gy, s * mu, k)
                d = cand - yv
                cs_ = y * (A @ cand)
                g_c = (np.maximum(0.0, -cs_) + np.log1p(np.exp(-np.abs(cs_)))).sum() / n
                if g_c <= g_y + gy @ d + (d @ d) / (2.0 * s) + 1e-12:
                    break
                s *= bt
            f_c = g_c + mu * norm_sq(cand, k)
            if f_c > fx + 1e-15:
                yv = x.copy()
                t = 1.0
                ys = y * (A @ yv)
                e = np.exp(-np.abs(ys))
                g_y = (np.maximum(0.0, -ys) + np.log1p(e)).sum() / n
                sig = np.where(ys >= 0.0, e / (1.0 + e), 1.0 / (1.0 + e))
                gy = -(At @ (y * sig)) / n
                for _bt in range(200):
                    cand = prox(yv - s * gy, s * mu, k)
                    d = cand - yv
                    cs_ = y * (A @ cand)
                    g_c = (
                        np.maximum(0.0, -cs_) + np.log1p(np.exp(-np.abs(cs_)))
                    ).sum() / n
                    if g_c <= g_y + gy @ d + (d @ d) / (2.0 * s) + 1e-12:
                        break
                    s *= bt
                f_c = g_c + mu * norm_sq(cand, k)
            tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            xp = x
            x = cand
            yv = x + ((t - 1.0) / tn) * (x - xp)
            done = abs(fx - f_c) <= tol * (1.0 + abs(f_c))
            fx = f_c
            t = tn
            if done:
                conv = 1
                break
        return x, it, conv, fx

    return _fista_logistic


def _build_impls(use_jit):
    if use_jit:
        wrap = njit(cache=True, nogil=True)
    else:
        def wrap(f):
            return f
    norm_sq = wrap(_ksupport_norm_sq_src)
    prox_ks = wrap(_prox_sq_ksupport_src)
    impls = {
        "ksupport_norm_sq": norm_sq,
        "prox_sq_ksupport": prox_ks,
        "project_l1_ball": wrap(_project_l1_ball_src),
        "prox_l1_inf_rows": wrap(_prox_l1_inf_rows_src),
        "fista_sq": wrap(_make_fista_sq(prox_ks, norm_sq)),
        "fista_logistic": wrap(_make_fista_logistic(prox_ks, norm_sq)),
    }
    return impls


NUMPY_IMPLS = _build_impls(False)
NUMBA_IMPLS = _build_impls(True) if _HAVE_NUMBA else None
ACTIVE = NUMBA_IMPLS if NUMBA_ENABLED else NUMPY_IMPLS

ksupport_norm_sq = ACTIVE["ksupport_norm_sq"]
prox_sq_ksupport_kernel = ACTIVE["prox_sq_ksupport"]
project_l1_ball_kernel = ACTIVE["project_l1_ball"]
prox_l1_inf_rows_kernel = ACTIVE["prox_l1_inf_rows"]
fista_sq_kernel = ACTIVE["fista_sq"]
fista_logistic_kernel = ACTIVE["fista_logistic"]
