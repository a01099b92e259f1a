"""Command-line surface: generate, train, eval, benchmark.

Exit codes: 0 success, 1 runtime or numeric failure, 2 usage or
configuration error.  Every command is deterministic given its flags,
seed, and input files.
"""

import argparse
import json
import os
import sys

import numpy as np

from .errors import ParameterError, ShapeError, SparseMtlError
from .io import (
    apply_preprocessing,
    normalization_divisors,
    read_dataset,
    read_ground_truth,
    read_model,
    write_dataset,
    write_model,
)
from .metrics import (
    GridSpec,
    FULL_GAMMA_GRID,
    error_rate,
    grid_search,
    kfold_indices,
    ree,
    risk_bound_terms,
    rmse,
)
from .model import CLASSIFICATION, HyperParams, MultiTaskDataset, TaskData
from .synth import FAMILIES, SynSpec, family_group_structure, generate
from .train import fit, lasso_fit, ridge_init_coefficient

REDUCED_GAMMA1_GRID = tuple(2.0**p for p in range(-5, 0))
REDUCED_GAMMA2_GRID = (2.0**-7, 2.0**-3)
REDUCED_K_GRID = (5,)

BENCH_METHODS = ("vstg_k1", "vstg_k3", "ridge", "lasso")


class UsageError(Exception):
    """Configuration problem the user can fix; maps to exit code 2."""


def _fmt(x):
    return repr(float(x))


def _require_dir(path, what):
    if not os.path.isdir(path):
        raise UsageError("%s directory %r does not exist" % (what, path))


def _dump_json(obj, fh):
    json.dump(obj, fh, indent=1, sort_keys=True)
    fh.write("\n")


def cmd_generate(args):
    spec = SynSpec(family=args.family, seed=args.seed, noise_std=args.noise_std)
    train, test, W, U, V = generate(spec)
    u_mask, v_mask = family_group_structure(spec)
    ground_truth = {
        "family": spec.family,
        "seed": spec.seed,
        "noise_std": spec.noise_std,
        "W": W, "U": U, "V": V,
        "U_mask": u_mask, "V_mask": v_mask,
    }
    write_dataset(args.out, train, test=test, ground_truth=ground_truth)
    print("wrote %d train / %d test tasks to %s" % (len(train.tasks), len(test.tasks), args.out))
    return 0


def _train_hyperparams(args):
    mu = args.gamma1 if args.mu is None else args.mu
    return HyperParams(
        gamma1=args.gamma1, gamma2=args.gamma2, mu=mu,
        K=args.K, k=args.k, rho=args.rho,
    )


def cmd_train(args):
    _require_dir(args.data, "dataset")
    data = read_dataset(args.data, split="train")
    divisors = normalization_divisors(data) if args.normalize else None
    fit_data = apply_preprocessing(data, divisors=divisors, add_bias=args.add_bias)
    hp = _train_hyperparams(args)
    fact, report = fit(fit_data, hp, threads=args.threads)
    write_model(
        args.out, fact, hp, data.problem_kind, report=report,
        divisors=divisors, add_bias=args.add_bias,
    )
    summary = {
        "objective": report.objective_trace[-1],
        "outer_iterations": report.outer_iterations,
        "converged": report.converged,
        "nnz_u": int(np.count_nonzero(fact.U)),
        "model": args.out,
    }
    gt_path = os.path.join(args.data, "ground_truth.json")
    if os.path.exists(gt_path):
        truth = read_ground_truth(args.data)
        W_hat = fact.U @ fact.V
        if args.add_bias:
            W_hat = W_hat[:-1, :]
        if divisors is not None:
            W_hat = W_hat / divisors[:, None]
        summary["ree"] = ree(truth["W"], W_hat)
    _dump_json(summary, sys.stdout)
    return 0


def cmd_eval(args):
    _require_dir(args.model, "model")
    _require_dir(args.data, "dataset")
    fact, manifest = read_model(args.model)
    data = read_dataset(args.data, split=args.split)
    prepped = apply_preprocessing(
        data, divisors=manifest.get("divisors"), add_bias=manifest.get("add_bias", False)
    )
    W = fact.U @ fact.V
    if W.shape[1] != len(prepped.tasks):
        raise ParameterError(
            "model has %d tasks, dataset has %d" % (W.shape[1], len(prepped.tasks))
        )
    truth = []
    preds = []
    per_task = []
    classify = manifest["problem_kind"] == CLASSIFICATION
    for j, t in enumerate(prepped.tasks):
        if t.X.shape[1] != W.shape[0]:
            raise ShapeError(
                "model expects %d features, task %d has %d" % (W.shape[0], j + 1, t.X.shape[1])
            )
        s = t.X @ W[:, j]
        if classify:
            lab = np.where(s >= 0, 1.0, -1.0)
            per_task.append(error_rate(t.y, lab))
            preds.append(lab)
        else:
            per_task.append(rmse(t.y, s))
            preds.append(s)
        truth.append(t.y)
    truth = np.concatenate(truth)
    preds = np.concatenate(preds)
    c_trace, c_lambda = risk_bound_terms(data)
    out = {
        "metric": "error_rate" if classify else "rmse",
        "value": error_rate(truth, preds) if classify else rmse(truth, preds),
        "per_task": per_task,
        "risk_bound": {"c_trace": c_trace, "c_lambda": c_lambda},
        "split": args.split,
    }
    _dump_json(out, sys.stdout)
    if args.out:
        with open(args.out, "w") as fh:
            _dump_json(out, fh)
    return 0


def _bench_gridspec(mode, cv, k):
    if mode == "paper":
        return GridSpec(k_grid=(k,), selection=cv)
    return GridSpec(
        gamma_grid=REDUCED_GAMMA1_GRID,
        gamma2_grid=REDUCED_GAMMA2_GRID,
        K_grid=REDUCED_K_GRID,
        k_grid=(k,),
        selection=cv,
    )


def _per_task_lambda(task, fit_one, seed, cv, n_folds=10, holdout_fraction=0.2):
    """Pick lambda for one task over the full lambda grid.

    cv="kfold" scores each lambda by k-fold squared error, cv="holdout"
    by one seeded validation split, mirroring the protocol the MTL
    methods get.  The benchmark families are regression.  Ties go to
    the smaller lambda.
    """
    rng = np.random.default_rng(seed)
    if cv == "kfold":
        folds = [f for f in kfold_indices(task.n, min(n_folds, task.n), rng) if len(f)]
    else:
        perm = rng.permutation(task.n)
        folds = [perm[: max(1, int(round(holdout_fraction * task.n)))]]
    best = None
    for lam in FULL_GAMMA_GRID:
        se = 0.0
        n = 0
        for hold in folds:
            mask = np.ones(task.n, dtype=bool)
            mask[hold] = False
            w = fit_one(TaskData(X=task.X[mask], y=task.y[mask]), lam)
            r = task.X[hold] @ w - task.y[hold]
            se += float(r @ r)
            n += len(hold)
        score = se / n
        if best is None or score < best[0] - 1e-15 or (
            abs(score - best[0]) <= 1e-15 and lam < best[1]
        ):
            best = (score, lam)
    return best[1]


def _baseline_w(data, fit_one, seed, cv):
    cols = []
    for t in data.tasks:
        lam = _per_task_lambda(t, fit_one, seed, cv)
        cols.append(fit_one(t, lam))
    return np.column_stack(cols)


def _pooled_test_rmse(test, W_hat):
    truth = []
    preds = []
    for j, t in enumerate(test.tasks):
        truth.append(t.y)
        preds.append(t.X @ W_hat[:, j])
    return rmse(np.concatenate(truth), np.concatenate(preds))


def run_benchmark(families, n_seeds, grid_mode, cv, threads=1):
    """Per-seed rows and per-family/method aggregates.

    Returns (runs, summary): runs are dicts with family, method, seed,
    rmse, ree and the selected hyperparameters (grid-searched methods);
    summary holds mean and population std across seeds.
    """
    runs = []
    for family in families:
        for seed in range(1, n_seeds + 1):
            train, test, W_true, _, _ = generate(SynSpec(family=family, seed=seed))
            for method in BENCH_METHODS:
                selected = ""
                if method.startswith("vstg"):
                    k = int(method[-1])
                    grid = _bench_gridspec(grid_mode, cv, k)
                    hp, _ = grid_search(train, grid, seed=seed, threads=threads)
                    fact, _ = fit(train, hp)
                    W_hat = fact.U @ fact.V
                    selected = "gamma1=%s;gamma2=%s;mu=%s;K=%d;k=%d" % (
                        _fmt(hp.gamma1), _fmt(hp.gamma2), _fmt(hp.mu), hp.K, hp.k
                    )
                elif method == "ridge":
                    W_hat = _baseline_w(train, ridge_init_coefficient, seed, cv)
                else:
                    W_hat = _baseline_w(train, lasso_fit, seed, cv)
                runs.append({
                    "family": family,
                    "method": method,
                    "seed": seed,
                    "rmse": _pooled_test_rmse(test, W_hat),
                    "ree": ree(W_true, W_hat),
                    "selected": selected,
                })
    summary = []
    for family in families:
        for method in BENCH_METHODS:
            rs = [r for r in runs if r["family"] == family and r["method"] == method]
            rmses = np.array([r["rmse"] for r in rs])
            rees = np.array([r["ree"] for r in rs])
            summary.append({
                "family": family,
                "method": method,
                "rmse_mean": float(rmses.mean()),
                "rmse_std": float(rmses.std()),
                "ree_mean": float(rees.mean()),
                "ree_std": float(rees.std()),
                "seeds": len(rs),
            })
    return runs, summary


def _write_csv_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for h in header:
                v = row[h]
                cells.append(_fmt(v) if isinstance(v, float) else str(v))
            fh.write(",".join(cells) + "\n")


def cmd_benchmark(args):
    for family in args.families:
        if family not in FAMILIES:
            raise UsageError("unknown family %r" % family)
    if args.seeds < 1:
        raise UsageError("--seeds must be >= 1")
    os.makedirs(args.out, exist_ok=True)
    runs, summary = run_benchmark(
        args.families, args.seeds, args.grid, args.cv, threads=args.threads
    )
    _write_csv_rows(
        os.path.join(args.out, "benchmark_runs.csv"),
        ["family", "method", "seed", "rmse", "ree", "selected"],
        runs,
    )
    _write_csv_rows(
        os.path.join(args.out, "benchmark_summary.csv"),
        ["family", "method", "rmse_mean", "rmse_std", "ree_mean", "ree_std", "seeds"],
        summary,
    )
    print("%-6s %-8s %-17s %-17s %s" % ("family", "method", "rmse", "ree", "seeds"))
    for row in summary:
        print("%-6s %-8s %.4f +- %.4f  %.4f +- %.4f  %d" % (
            row["family"], row["method"], row["rmse_mean"], row["rmse_std"],
            row["ree_mean"], row["ree_std"], row["seeds"],
        ))
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="sparsemtl",
        description="Sparse low-rank multi-task learning: data generation, "
                    "training, evaluation, benchmarks.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write one synthetic dataset directory")
    g.add_argument("--family", required=True, choices=FAMILIES)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--noise-std", type=float, default=1.0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="fit a model on a dataset directory")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--gamma1", type=float, default=0.0)
    t.add_argument("--gamma2", type=float, default=0.0)
    t.add_argument("--mu", type=float, default=None,
                   help="defaults to the gamma1 value")
    t.add_argument("--K", type=int, default=5)
    t.add_argument("--k", type=int, default=1)
    t.add_argument("--rho", type=float, default=2.0)
    t.add_argument("--normalize", action="store_true",
                   help="divide features by train max-abs; divisors stored in the model")
    t.add_argument("--add-bias", action="store_true")
    t.add_argument("--threads", type=int, default=1)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a saved model on a dataset split")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--split", default="test")
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("benchmark", help="grid-searched comparison with baselines")
    b.add_argument("--families", nargs="+", default=list(FAMILIES))
    b.add_argument("--seeds", type=int, default=10)
    b.add_argument("--grid", choices=("paper", "reduced"), default="reduced")
    b.add_argument("--cv", choices=("kfold", "holdout"), default="kfold")
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print("error: %s" % e, file=sys.stderr)
        return 2
    except SparseMtlError as e:
        print("error: %s" % e, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
