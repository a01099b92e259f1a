"""Acceptance gate: nine checks with fixed tolerances, one printed
criterion line each (run with pytest -s to see every line; pytest shows
the lines of failing checks regardless).

Criteria 5 and 6 share two cached ten-seed benchmark sweeps on the
reduced grid, so this module takes a few minutes of wall time.  Every
check here recomputes what it claims from scratch; nothing is loaded
from fixtures on disk.
"""

import time

import numpy as np
import pytest

from sparsemtl.admm import (
    Z1RegressionSystem,
    _logistic_value_grad,
    admm_solve_u,
    u_objective,
)
from sparsemtl.cli import main, run_benchmark
from sparsemtl.metrics import ree
from sparsemtl.model import (
    CLASSIFICATION,
    HyperParams,
    MultiTaskDataset,
    TaskData,
    loss_and_gradient_v,
)
from sparsemtl.prox import (
    ksupport_norm,
    numeric_prox_oracle,
    prox_l1,
    prox_l1_inf_rows,
    prox_sq_ksupport,
)
from sparsemtl.synth import FAMILIES, SynSpec, family_group_structure, generate
from sparsemtl.train import fit


def report(num, ok, detail):
    print("criterion %d: %s  (%s)" % (num, "PASS" if ok else "FAIL", detail))


def central_diff(f, x, h=1e-6):
    g = np.empty_like(x)
    for i in range(x.size):
        step = h * (1.0 + abs(x[i]))
        xp = x.copy()
        xp[i] += step
        xm = x.copy()
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2.0 * step)
    return g


def rel_err(approx, exact):
    return float(np.linalg.norm(approx - exact) / max(np.linalg.norm(exact), 1e-12))


def test_criterion_1_prox_oracle_suite():
    t0 = time.monotonic()
    rng = np.random.default_rng(101)
    worst = 0.0
    for i in range(100):
        n = int(rng.integers(1, 11))
        w = rng.normal(scale=2.0, size=n)
        lam = float(rng.uniform(0.05, 2.0))
        obj = lambda x: 0.5 * np.sum((x - w) ** 2) + lam * np.abs(x).sum()
        xo = numeric_prox_oracle(obj, w, seed=i)
        worst = max(worst, float(np.abs(xo - prox_l1(w, lam)).max()))
    for i in range(100):
        n = int(rng.integers(1, 11))
        w = rng.normal(scale=2.0, size=n)
        lam = float(rng.uniform(0.05, 2.0))
        obj = lambda x: 0.5 * np.sum((x - w) ** 2) + lam * np.abs(x).max()
        xo = numeric_prox_oracle(obj, w, seed=i)
        worst = max(worst, float(np.abs(xo - prox_l1_inf_rows(w[None, :], lam)[0]).max()))
    endpoint = 0.0
    for i in range(100):
        n = int(rng.integers(2, 11))
        k = int(rng.integers(1, n + 1))
        w = rng.normal(scale=2.0, size=n)
        lam = float(rng.uniform(0.05, 2.0))
        obj = lambda x: 0.5 * np.sum((x - w) ** 2) + lam * ksupport_norm(x, k) ** 2
        xo = numeric_prox_oracle(obj, w, seed=i)
        worst = max(worst, float(np.abs(xo - prox_sq_ksupport(w, lam, k)).max()))
        endpoint = max(
            endpoint,
            abs(ksupport_norm(w, 1) - float(np.abs(w).sum())),
            abs(ksupport_norm(w, n) - float(np.linalg.norm(w))),
        )
    elapsed = time.monotonic() - t0
    ok = worst <= 1e-4 and endpoint <= 1e-12 and elapsed < 60.0
    report(1, ok, "max oracle dev %.2e, endpoint dev %.2e, %.1fs"
           % (worst, endpoint, elapsed))
    assert worst <= 1e-4
    assert endpoint <= 1e-12
    assert elapsed < 60.0


def test_criterion_2_gradient_checks():
    rng = np.random.default_rng(202)
    worst = 0.0
    for kind in ("regression", CLASSIFICATION):
        for _ in range(20):
            n, K = 15, 4
            A = rng.normal(size=(n, K))
            y = rng.normal(size=n)
            if kind == CLASSIFICATION:
                y = np.where(y >= 0, 1.0, -1.0)
            task = TaskData(X=rng.normal(size=(n, 3)), y=y)
            v = rng.normal(size=K)
            _, g = loss_and_gradient_v(task, A, v, kind)
            g_fd = central_diff(lambda z: loss_and_gradient_v(task, A, z, kind)[0], v)
            worst = max(worst, rel_err(g_fd, g))

    D, K, T, rho = 6, 3, 4, 2.0
    for _ in range(20):
        tasks = [TaskData(X=rng.normal(size=(12, D)), y=rng.normal(size=12))
                 for _ in range(T)]
        data = MultiTaskDataset(tasks=tasks)
        V = rng.normal(size=(K, T))
        B = rng.normal(size=(D, K))
        system = Z1RegressionSystem(data, V, rho)

        def quad(zv):
            Z = zv.reshape((D, K), order="F")
            val = 0.5 * rho * float(((Z - B) ** 2).sum())
            for j, t in enumerate(tasks):
                r = t.X @ (Z @ V[:, j]) - t.y
                val += 0.5 * float(r @ r) / t.n
            return val

        zv = rng.normal(size=D * K)
        g = system.matrix @ zv - system.rhs_for(B)
        worst = max(worst, rel_err(central_diff(quad, zv), g))

    for _ in range(20):
        tasks = [
            TaskData(X=rng.normal(size=(12, D)),
                     y=np.where(rng.normal(size=12) >= 0, 1.0, -1.0))
            for _ in range(T)
        ]
        data = MultiTaskDataset(tasks=tasks, problem_kind=CLASSIFICATION)
        V = rng.normal(size=(K, T))
        B = rng.normal(size=(D, K))
        Z = rng.normal(size=(D, K))
        _, g = _logistic_value_grad(data, V, Z, B, rho)

        def logval(zv):
            return _logistic_value_grad(
                data, V, zv.reshape((D, K), order="F"), B, rho
            )[0]

        worst = max(worst, rel_err(central_diff(logval, Z.ravel(order="F")),
                                   g.ravel(order="F")))
    ok = worst <= 1e-5
    report(2, ok, "max relative gradient error %.2e" % worst)
    assert ok


def test_criterion_3_admm_subproblem():
    rng = np.random.default_rng(303)
    D, K, T = 10, 3, 5
    worst_gap = -np.inf
    worst_res = 0.0
    for _ in range(20):
        tasks = [TaskData(X=rng.normal(size=(20, D)), y=rng.normal(size=20))
                 for _ in range(T)]
        data = MultiTaskDataset(tasks=tasks)
        V = rng.normal(size=(K, T))
        U0 = rng.normal(size=(D, K))
        hp = HyperParams(gamma1=0.1, gamma2=0.05, mu=0.1, K=K, k=1)
        res = admm_solve_u(data, V, U0, hp)
        gap = u_objective(data, V, res.U, 0.1, 0.05) - u_objective(data, V, U0, 0.1, 0.05)
        worst_gap = max(worst_gap, gap)

        system = Z1RegressionSystem(data, V, hp.rho)
        target = rng.normal(size=(D, K))
        z = system.solve(target)
        rhs = system.rhs_for(target)
        resid = np.linalg.norm(system.matrix @ z.ravel(order="F") - rhs)
        worst_res = max(worst_res, float(resid / np.linalg.norm(rhs)))
    ok = worst_gap <= 1e-6 and worst_res <= 1e-8
    report(3, ok, "worst objective gap %.2e, worst solve residual %.2e"
           % (worst_gap, worst_res))
    assert worst_gap <= 1e-6
    assert worst_res <= 1e-8


def test_criterion_4_monotone_outer_loop():
    worst = -np.inf
    for family in FAMILIES:
        train, _, _, _, _ = generate(SynSpec(family=family, seed=1))
        k = 3 if family in ("syn2", "syn4") else 1
        hp = HyperParams(gamma1=2.0**-3, gamma2=2.0**-7, mu=2.0**-3, K=5, k=k)
        _, rep = fit(train, hp)
        trace = rep.objective_trace
        for a, b in zip(trace, trace[1:]):
            worst = max(worst, b - a - 1e-6 * (1.0 + abs(a)))
    ok = worst <= 0.0
    report(4, ok, "worst slack-adjusted trace increase %.2e" % worst)
    assert ok


@pytest.fixture(scope="module")
def bench_syn1():
    runs, summary = run_benchmark(["syn1"], 10, "reduced", "kfold", threads=4)
    return runs, summary


@pytest.fixture(scope="module")
def bench_syn4():
    runs, summary = run_benchmark(["syn4"], 10, "reduced", "kfold", threads=4)
    return runs, summary


def _mean(summary, method, key):
    return next(r[key] for r in summary if r["method"] == method)


def test_criterion_5_benchmark_desk_scale(bench_syn1):
    _, summary = bench_syn1
    v_rmse = _mean(summary, "vstg_k1", "rmse_mean")
    v_ree = _mean(summary, "vstg_k1", "ree_mean")
    lasso_rmse = _mean(summary, "lasso", "rmse_mean")
    in_band = 1.00 <= v_rmse <= 1.20
    ree_ok = v_ree <= 0.20
    margin = lasso_rmse - v_rmse
    beats = margin >= 0.15
    ok = in_band and ree_ok and beats
    report(5, ok, "rmse %.4f in [1.00, 1.20]: %s; ree %.4f <= 0.20: %s; "
                  "lasso margin %.4f >= 0.15: %s"
           % (v_rmse, in_band, v_ree, ree_ok, margin, beats))
    assert in_band
    assert ree_ok
    assert beats


def test_criterion_6_k_support_direction(bench_syn1, bench_syn4):
    _, s1 = bench_syn1
    _, s4 = bench_syn4
    syn1_k1 = _mean(s1, "vstg_k1", "ree_mean")
    syn1_k3 = _mean(s1, "vstg_k3", "ree_mean")
    syn4_k1 = _mean(s4, "vstg_k1", "ree_mean")
    syn4_k3 = _mean(s4, "vstg_k3", "ree_mean")
    syn1_ok = syn1_k1 <= syn1_k3
    syn4_ok = syn4_k3 <= syn4_k1
    ok = syn1_ok and syn4_ok
    report(6, ok, "syn1 ree k=1 %.4f <= k=3 %.4f: %s; "
                  "syn4 ree k=3 %.4f <= k=1 %.4f: %s"
           % (syn1_k1, syn1_k3, syn1_ok, syn4_k3, syn4_k1, syn4_ok))
    assert syn1_ok
    assert syn4_ok


def test_criterion_7_noiseless_support_recovery():
    train, _, W_true, _, _ = generate(SynSpec(family="syn1", seed=1, noise_std=0.0))
    hp = HyperParams(gamma1=1e-3, gamma2=1e-3, mu=1e-3, K=5, k=1)
    fact, _ = fit(train, hp)
    # rows 21..25 carry no signal in this family
    tail = float(np.abs(fact.U[20:, :]).max())
    err = ree(W_true, fact.U @ fact.V)
    ok = tail <= 1e-3 and err <= 0.05
    report(7, ok, "irrelevant-row linf %.2e <= 1e-3, ree %.4f <= 0.05" % (tail, err))
    assert tail <= 1e-3
    assert err <= 0.05


def test_criterion_8_structure_masks():
    checked = 0
    for family in FAMILIES:
        u_mask, v_mask = family_group_structure(family)
        for seed in range(10):
            _, _, _, U, V = generate(SynSpec(family=family, seed=seed))
            assert np.array_equal(U != 0.0, u_mask)
            assert np.array_equal(V != 0.0, v_mask)
            checked += 1
    report(8, True, "%d family/seed draws matched bitwise" % checked)


def test_criterion_9_benchmark_determinism(tmp_path, capsys):
    argv = ["benchmark", "--families", "syn1", "--seeds", "1",
            "--grid", "reduced", "--cv", "kfold"]
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert main(argv + ["--out", str(out1)]) == 0
    assert main(argv + ["--out", str(out2)]) == 0
    capsys.readouterr()
    same = all(
        (out1 / name).read_bytes() == (out2 / name).read_bytes()
        for name in ("benchmark_runs.csv", "benchmark_summary.csv")
    )
    report(9, same, "runs and summary tables byte-identical across reruns")
    assert same
