"""ADMM solver for the U subproblem at fixed V.

Minimizes, over the variable-by-basis matrix U,

    sum_j (1/N_j) L(y_j, X_j U v_j) + gamma1 ||U||_1
        + gamma2 sum_i ||U[i, :]||_inf

by consensus splitting over three copies Z1 (loss), Z2 (l1), Z3 (row
l-inf) with scaled multipliers.  The U update is the multiplier-corrected
mean of the copies; Z1 solves a regularized least-squares (regression,
via one Kronecker-structured Cholesky factorization per V) or a smooth
logistic problem (L-BFGS with an exact-Newton polish); Z2 and Z3 are the
closed-form proxes.  The returned matrix is the best Z2 iterate, so its
zeros are exact.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize
from scipy.special import expit

from .errors import ShapeError
from .model import CLASSIFICATION, REGRESSION
from .prox import prox_l1, prox_l1_inf_rows


def _vec_f(A):
    return A.reshape(-1, order="F")


def _unvec_f(v, shape):
    return v.reshape(shape, order="F")


def _check_dims(data, V, U):
    K, T = V.shape
    if T != data.n_tasks:
        raise ShapeError("V has %d columns for %d tasks" % (T, data.n_tasks))
    if U.shape != (data.d, K):
        raise ShapeError(
            "U has shape %r, expected (%d, %d)" % (U.shape, data.d, K)
        )


class Z1RegressionSystem:
    """Normal equations for the quadratic Z1 update, factored once.

    vec is taken column-major, so the system matrix is
    sum_j (1/N_j) (v_j v_j' kron X_j'X_j) + rho I, which stays fixed
    while (data, V, rho) do; only the rho * vec(U + L1) part of the
    right-hand side changes between inner iterations.
    """

    def __init__(self, data, V, rho):
        D = data.d
        K = V.shape[0]
        self.shape = (D, K)
        self.rho = rho
        M = np.zeros((D * K, D * K))
        rhs = np.zeros((D, K))
        for j, task in enumerate(data.tasks):
            v = V[:, j]
            gram = task.X.T @ task.X
            M += np.kron(np.outer(v, v), gram) / task.n
            rhs += np.outer(task.X.T @ task.y, v) / task.n
        M[np.diag_indices_from(M)] += rho
        self.matrix = M
        self.rhs_data = _vec_f(rhs)
        self.factor = cho_factor(M)
        # positive pivots certify the shifted system stayed PD
        assert np.all(np.diag(self.factor[0]) > 0)

    def rhs_for(self, target):
        """Full right-hand side for a given U + L1 matrix."""
        return self.rhs_data + self.rho * _vec_f(target)

    def solve(self, target):
        z = cho_solve(self.factor, self.rhs_for(target))
        return _unvec_f(z, self.shape)


def update_z1_regression(data, V, u_plus, l1, rho):
    """One-shot quadratic Z1 update; the solver keeps a cached system."""
    return Z1RegressionSystem(data, V, rho).solve(u_plus + l1)


def _logistic_value_grad(data, V, Z, B, rho):
    diff = Z - B
    val = 0.5 * rho * float((diff * diff).sum())
    grad = rho * diff
    for j, task in enumerate(data.tasks):
        v = V[:, j]
        s = task.X @ (Z @ v)
        ys = task.y * s
        val += float(np.logaddexp(0.0, -ys).sum()) / task.n
        r = -(task.y * expit(-ys)) / task.n
        grad += np.outer(task.X.T @ r, v)
    return val, grad


def update_z1_logistic(data, V, u_plus, l1, rho, tol=1e-6, max_iter=500):
    """Smooth logistic Z1 update to Frobenius gradient norm <= tol.

    L-BFGS does the bulk of the work; if its own stopping rule leaves the
    gradient above tol, damped exact-Newton steps finish the job (the
    rho-strongly-convex objective makes them globally safe).  Failing
    both caps raises no error, only a warning carrying the reached norm.
    """
    B = u_plus + l1
    D, K = B.shape

    def fun(zv):
        val, grad = _logistic_value_grad(data, V, _unvec_f(zv, (D, K)), B, rho)
        return val, _vec_f(grad)

    res = minimize(
        fun,
        _vec_f(B).copy(),
        jac=True,
        method="L-BFGS-B",
        options={
            "maxiter": max_iter,
            "gtol": tol / np.sqrt(D * K),
            "ftol": 1e-18,
        },
    )
    Z = _unvec_f(res.x, (D, K))
    val, grad = _logistic_value_grad(data, V, Z, B, rho)
    gnorm = float(np.linalg.norm(grad))
    for _ in range(50):
        if gnorm <= tol:
            break
        H = np.zeros((D * K, D * K))
        H[np.diag_indices_from(H)] = rho
        for j, task in enumerate(data.tasks):
            v = V[:, j]
            s = task.X @ (Z @ v)
            w = expit(s * task.y) * expit(-s * task.y)
            H += np.kron(np.outer(v, v), task.X.T @ (w[:, None] * task.X)) / task.n
        step = cho_solve(cho_factor(H), _vec_f(grad))
        t = 1.0
        while t > 1e-12:
            Zn = Z - t * _unvec_f(step, (D, K))
            vn, gn = _logistic_value_grad(data, V, Zn, B, rho)
            if vn <= val:
                Z, val, grad = Zn, vn, gn
                break
            t *= 0.5
        gnorm = float(np.linalg.norm(grad))
    if gnorm > tol:
        warnings.warn(
            "logistic Z1 update stopped at gradient norm %.3e > %.3e"
            % (gnorm, tol)
        )
    return Z


def update_z2(u_plus, l2, gamma1, rho):
    return prox_l1(u_plus + l2, gamma1 / rho)


def update_z3(u_plus, l3, gamma2, rho):
    return prox_l1_inf_rows(u_plus + l3, gamma2 / rho)


@dataclass
class AdmmState:
    """Consensus variables and scaled multipliers, resumable."""

    U: np.ndarray
    Z1: np.ndarray
    Z2: np.ndarray
    Z3: np.ndarray
    L1: np.ndarray
    L2: np.ndarray
    L3: np.ndarray
    rho: float = 2.0
    primal_res: float = np.inf
    dual_res: float = np.inf
    iterations: int = 0


@dataclass
class AdmmResult:
    U: np.ndarray
    state: AdmmState
    converged: bool
    iterations: int
    objective: float


def update_u(state):
    """Multiplier-corrected mean of the three consensus copies."""
    return (
        state.Z1 - state.L1 + state.Z2 - state.L2 + state.Z3 - state.L3
    ) / 3.0


def update_multipliers(state):
    """Scaled dual ascent L_h += U - Z_h; returns the three new arrays."""
    return (
        state.L1 + state.U - state.Z1,
        state.L2 + state.U - state.Z2,
        state.L3 + state.U - state.Z3,
    )


def residuals(state, z_prev):
    """Primal: stacked consensus gaps.  Dual: rho times the summed Z drift."""
    p = np.sqrt(
        float(((state.U - state.Z1) ** 2).sum())
        + float(((state.U - state.Z2) ** 2).sum())
        + float(((state.U - state.Z3) ** 2).sum())
    )
    drift = (state.Z1 - z_prev[0]) + (state.Z2 - z_prev[1]) + (state.Z3 - z_prev[2])
    return p, state.rho * float(np.linalg.norm(drift))


class _UObjective:
    """Loss + U penalties, vectorized over tasks when all N_j agree."""

    def __init__(self, data, V, gamma1, gamma2):
        self.data = data
        self.V = V
        self.gamma1 = gamma1
        self.gamma2 = gamma2
        ns = [t.n for t in data.tasks]
        self.stacked = len(set(ns)) == 1
        if self.stacked:
            self.X3 = np.stack([t.X for t in data.tasks])
            self.Y = np.stack([t.y for t in data.tasks])
            self.n = ns[0]

    def loss(self, U):
        if self.stacked:
            scores = np.einsum("tnd,dt->tn", self.X3, U @ self.V)
            if self.data.problem_kind == REGRESSION:
                r = scores - self.Y
                return 0.5 * float((r * r).sum()) / self.n
            ys = self.Y * scores
            return float(np.logaddexp(0.0, -ys).sum()) / self.n
        total = 0.0
        for j, task in enumerate(self.data.tasks):
            s = task.X @ (U @ self.V[:, j])
            if self.data.problem_kind == REGRESSION:
                r = s - task.y
                total += 0.5 * float(r @ r) / task.n
            else:
                total += float(np.logaddexp(0.0, -task.y * s).sum()) / task.n
        return total

    def value(self, U):
        return (
            self.loss(U)
            + self.gamma1 * float(np.abs(U).sum())
            + self.gamma2 * float(np.abs(U).max(axis=1).sum())
        )


def u_objective(data, V, U, gamma1, gamma2):
    """The U-subproblem objective: task losses plus the two U penalties."""
    return _UObjective(data, V, gamma1, gamma2).value(U)


def admm_solve_u(data, V, u_init, hp, state=None):
    """Run the consensus ADMM until both residual norms fall under
    hp.admm_tol or hp.admm_max_iter is hit; returns the best Z2 iterate.

    Passing the state of a previous result resumes its consensus copies
    and multipliers, so a solve restarted at convergence stops within a
    couple of iterations.
    """
    u_init = np.asarray(u_init, dtype=np.float64)
    _check_dims(data, V, u_init)
    rho = hp.rho
    if state is None:
        state = AdmmState(
            U=u_init.copy(),
            Z1=u_init.copy(),
            Z2=u_init.copy(),
            Z3=u_init.copy(),
            L1=np.zeros_like(u_init),
            L2=np.zeros_like(u_init),
            L3=np.zeros_like(u_init),
            rho=rho,
        )
    state.rho = rho
    system = None
    if data.problem_kind == REGRESSION:
        system = Z1RegressionSystem(data, V, rho)
    objective = _UObjective(data, V, hp.gamma1, hp.gamma2)
    # the init competes too, so the result never scores worse than u_init
    best_u = u_init.copy()
    best_obj = objective.value(u_init)
    converged = False
    it = 0
    for it in range(1, hp.admm_max_iter + 1):
        state.U = update_u(state)
        z_prev = (state.Z1, state.Z2, state.Z3)
        if system is not None:
            state.Z1 = system.solve(state.U + state.L1)
        else:
            state.Z1 = update_z1_logistic(
                data, V, state.U, state.L1, rho, tol=1e-6
            )
        state.Z2 = update_z2(state.U, state.L2, hp.gamma1, rho)
        state.Z3 = update_z3(state.U, state.L3, hp.gamma2, rho)
        state.L1, state.L2, state.L3 = update_multipliers(state)
        state.primal_res, state.dual_res = residuals(state, z_prev)
        obj = objective.value(state.Z2)
        if obj < best_obj:
            best_obj = obj
            best_u = state.Z2
        if state.primal_res <= hp.admm_tol and state.dual_res <= hp.admm_tol:
            converged = True
            break
    state.iterations = it
    return AdmmResult(
        U=best_u,
        state=state,
        converged=converged,
        iterations=it,
        objective=best_obj,
    )
