"""Metrics, grid search with inner cross-validation, and the empirical
covariance aggregates that appear in the excess-risk bound.

Test metrics are pooled (micro-averaged) across tasks: all held-out
residuals are concatenated before the mean is taken.  Per-task numbers
are available by calling the metric on one task's arrays.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError, UndefinedMetricError
from .model import (
    CLASSIFICATION,
    REGRESSION,
    HyperParams,
    MultiTaskDataset,
    TaskData,
)
from .train import fit

FULL_GAMMA_GRID = tuple(2.0**p for p in range(-10, 4))
FULL_K_GRID = (3, 5, 7, 9, 11, 13)
FULL_SMALL_K_GRID = (1, 3, 5, 7)


def rmse(y_true, y_pred):
    """Root mean squared error; pooled when the inputs are concatenated."""
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    if y_true.shape != y_pred.shape:
        raise ShapeError("length mismatch: %d vs %d" % (y_true.size, y_pred.size))
    if y_true.size == 0:
        raise UndefinedMetricError("rmse of empty input")
    d = y_true - y_pred
    return float(np.sqrt(np.mean(d * d)))


def error_rate(y_true, y_pred_labels):
    """Fraction of mismatched labels."""
    y_true = np.asarray(y_true).ravel()
    y_pred_labels = np.asarray(y_pred_labels).ravel()
    if y_true.shape != y_pred_labels.shape:
        raise ShapeError(
            "length mismatch: %d vs %d" % (y_true.size, y_pred_labels.size)
        )
    if y_true.size == 0:
        raise UndefinedMetricError("error rate of empty input")
    return float(np.mean(y_true != y_pred_labels))


def ree(W_true, W_hat):
    """Relative estimation error ||W_true - W_hat||_F / ||W_true||_F."""
    W_true = np.asarray(W_true, dtype=np.float64)
    W_hat = np.asarray(W_hat, dtype=np.float64)
    if W_true.shape != W_hat.shape:
        raise ShapeError(
            "shape mismatch: %s vs %s" % (W_true.shape, W_hat.shape)
        )
    denom = float(np.linalg.norm(W_true))
    if denom == 0.0:
        raise UndefinedMetricError("ree against a zero true matrix")
    return float(np.linalg.norm(W_true - W_hat)) / denom


def risk_bound_terms(data):
    """Data-dependent factors of the excess-risk bound.

    Returns (c_trace, c_lambda): the across-task averages of the trace
    and of the top eigenvalue of the uncentered second-moment matrix
    (1/N_j) X_j' X_j.  c_lambda <= c_trace always (PSD).
    """
    if not data.tasks:
        raise ParameterError("no tasks")
    traces = []
    tops = []
    for t in data.tasks:
        M = t.X.T @ t.X / t.n
        traces.append(float(np.trace(M)))
        tops.append(float(np.linalg.eigvalsh(M)[-1]) if M.size else 0.0)
    return float(np.mean(traces)), float(np.mean(tops))


@dataclass(frozen=True)
class GridSpec:
    """Search space and selection protocol for grid_search.

    gamma_grid covers gamma1 (and gamma2 unless gamma2_grid is given);
    mu is tied to gamma1 when tie_mu_to_gamma1, otherwise mu_grid (or
    gamma_grid) is searched.  selection is "kfold" or "holdout".
    """

    gamma_grid: tuple = FULL_GAMMA_GRID
    gamma2_grid: tuple = None
    mu_grid: tuple = None
    K_grid: tuple = FULL_K_GRID
    k_grid: tuple = FULL_SMALL_K_GRID
    tie_mu_to_gamma1: bool = True
    selection: str = "kfold"
    n_folds: int = 10
    holdout_fraction: float = 0.2

    def __post_init__(self):
        if not self.gamma_grid or not self.K_grid or not self.k_grid:
            raise ParameterError("grids must be nonempty")
        if self.selection not in ("kfold", "holdout"):
            raise ParameterError(
                "selection must be 'kfold' or 'holdout', got %r" % self.selection
            )
        if self.selection == "kfold" and self.n_folds < 2:
            raise ParameterError("n_folds must be >= 2")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ParameterError("holdout_fraction must be in (0, 1)")
        if all(k > max(self.K_grid) for k in self.k_grid):
            raise ParameterError("every k in k_grid exceeds max K")


def combinations(grid):
    """Deterministic (K, k, gamma1, gamma2, mu) tuples, k <= K enforced."""
    g2_grid = grid.gamma2_grid if grid.gamma2_grid is not None else grid.gamma_grid
    mus = (None,) if grid.tie_mu_to_gamma1 else (
        grid.mu_grid if grid.mu_grid is not None else grid.gamma_grid
    )
    seen = set()
    out = []
    for K in grid.K_grid:
        for k in grid.k_grid:
            if k > K:
                continue
            for g1 in grid.gamma_grid:
                for g2 in g2_grid:
                    for mu in mus:
                        combo = (K, k, float(g1), float(g2),
                                 float(g1) if mu is None else float(mu))
                        if combo not in seen:
                            seen.add(combo)
                            out.append(combo)
    if not out:
        raise ParameterError("grid produced no (K, k) combination with k <= K")
    return out


def kfold_indices(n, n_folds, rng):
    """Shuffled fold membership for one task.

    Returns n_folds index arrays.  A task with fewer rows than folds
    degrades to leave-one-out: its rows land one per fold in the first
    n folds and the remaining folds get no rows from it.
    """
    if n < 2:
        raise ParameterError(
            "a task with %d row(s) cannot be split into folds; "
            "use the holdout selection mode" % n
        )
    perm = rng.permutation(n)
    eff = min(n_folds, n)
    parts = np.array_split(perm, eff)
    return parts + [np.empty(0, dtype=np.intp)] * (n_folds - eff)


def _splits(data, grid, seed):
    """List of (train dataset, list of (X_val, y_val) per task) pairs."""
    rng = np.random.default_rng(seed)
    if grid.selection == "kfold":
        per_task = [kfold_indices(t.n, grid.n_folds, rng) for t in data.tasks]
        splits = []
        for f in range(grid.n_folds):
            tr, va = [], []
            for t, folds in zip(data.tasks, per_task):
                hold = folds[f]
                mask = np.ones(t.n, dtype=bool)
                mask[hold] = False
                tr.append(TaskData(X=t.X[mask], y=t.y[mask]))
                va.append((t.X[hold], t.y[hold]))
            splits.append((MultiTaskDataset(tasks=tr, problem_kind=data.problem_kind), va))
        return splits
    tr, va = [], []
    for t in data.tasks:
        n_hold = max(1, int(round(grid.holdout_fraction * t.n)))
        if n_hold >= t.n:
            raise ParameterError(
                "holdout would leave task with no training rows (n=%d)" % t.n
            )
        perm = rng.permutation(t.n)
        hold = perm[:n_hold]
        keep = perm[n_hold:]
        tr.append(TaskData(X=t.X[keep], y=t.y[keep]))
        va.append((t.X[hold], t.y[hold]))
    return [(MultiTaskDataset(tasks=tr, problem_kind=data.problem_kind), va)]


def _held_out_score(splits, hp, problem_kind):
    truth = []
    preds = []
    for fold_train, fold_val in splits:
        fact, _ = fit(fold_train, hp)
        W = fact.U @ fact.V
        for j, (Xv, yv) in enumerate(fold_val):
            if len(yv) == 0:
                continue
            truth.append(yv)
            preds.append(Xv @ W[:, j])
    truth = np.concatenate(truth)
    preds = np.concatenate(preds)
    if problem_kind == CLASSIFICATION:
        return error_rate(truth, np.where(preds >= 0, 1.0, -1.0))
    return rmse(truth, preds)


def grid_search(data, grid, seed=0, threads=1):
    """Exhaustive search; returns (best HyperParams, score table).

    The held-out metric is pooled RMSE (regression) or pooled error
    rate (classification) over every validation row of every fold.
    The winner is the lowest score; exact ties go to the combination
    with the smallest (K, k, gamma1, gamma2, mu) tuple, which makes the
    outcome independent of grid ordering.
    """
    combos = combinations(grid)
    splits = _splits(data, grid, seed)

    def score_one(combo):
        K, k, g1, g2, mu = combo
        hp = HyperParams(gamma1=g1, gamma2=g2, mu=mu, K=K, k=k)
        return _held_out_score(splits, hp, data.problem_kind)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = list(pool.map(score_one, combos))
    else:
        scores = [score_one(c) for c in combos]

    table = [
        {"K": K, "k": k, "gamma1": g1, "gamma2": g2, "mu": mu, "score": s}
        for (K, k, g1, g2, mu), s in zip(combos, scores)
    ]
    best = min(zip(scores, combos), key=lambda t: (t[0], t[1]))
    (_, (K, k, g1, g2, mu)) = best
    return HyperParams(gamma1=g1, gamma2=g2, mu=mu, K=K, k=k), table
