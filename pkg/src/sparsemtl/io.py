"""On-disk formats: per-task CSV datasets, ground-truth manifests, and
serialized models.

A dataset directory holds task_<j>_train.csv (and optionally
task_<j>_test.csv) with header y,x1..xD, one manifest.json, and for
synthetic data a ground_truth.json.  A model directory holds U.csv,
V.csv and model.json.  All floats are written in shortest round-trip
decimal form, so reading back reproduces the arrays exactly.
"""

import csv
import json
import math
import os

import numpy as np

from .errors import InvalidDataError, ParameterError, ParseError, ShapeError
from .model import Factorization, MultiTaskDataset, TaskData

DATASET_MANIFEST = "manifest.json"
GROUND_TRUTH_FILE = "ground_truth.json"
MODEL_MANIFEST = "model.json"


def _fmt(x):
    return repr(float(x))


def _write_task_csv(path, X, y):
    d = X.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y"] + ["x%d" % (i + 1) for i in range(d)])
        for i in range(X.shape[0]):
            w.writerow([_fmt(y[i])] + [_fmt(v) for v in X[i]])


def _read_task_csv(path, expected_d=None):
    if not os.path.exists(path):
        raise ParseError("%s: file not found" % path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("%s:1: empty file, expected header y,x1,.." % path)
        d = len(header) - 1
        if d < 1 or header[0] != "y" or header[1:] != ["x%d" % (i + 1) for i in range(d)]:
            raise ParseError(
                "%s:1: bad header %r, expected y,x1,..,xD" % (path, ",".join(header))
            )
        if expected_d is not None and d != expected_d:
            raise ParseError(
                "%s:1: %d feature columns, manifest says %d" % (path, d, expected_d)
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise ParseError(
                    "%s:%d: %d fields, expected %d" % (path, lineno, len(row), d + 1)
                )
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise ParseError("%s:%d: non-numeric cell" % (path, lineno))
            if any(math.isnan(v) or math.isinf(v) for v in vals):
                raise InvalidDataError("%s:%d: NaN or infinite cell" % (path, lineno))
            rows.append(vals)
    if not rows:
        raise ParseError("%s: no data rows" % path)
    arr = np.asarray(rows, dtype=np.float64)
    return arr[:, 1:], arr[:, 0]


def write_dataset(out_dir, train, test=None, problem_kind=None, ground_truth=None):
    """Write one directory of task CSVs plus manifest.json.

    ground_truth, when given, is a dict with family/seed/noise_std and
    the true W, U, V; it lands in ground_truth.json with the masks.
    """
    os.makedirs(out_dir, exist_ok=True)
    kind = problem_kind if problem_kind is not None else train.problem_kind
    files = {"train": []}
    for j, t in enumerate(train.tasks, start=1):
        name = "task_%d_train.csv" % j
        _write_task_csv(os.path.join(out_dir, name), t.X, t.y)
        files["train"].append(name)
    if test is not None:
        if len(test.tasks) != len(train.tasks):
            raise ShapeError("train and test task counts differ")
        files["test"] = []
        for j, t in enumerate(test.tasks, start=1):
            name = "task_%d_test.csv" % j
            _write_task_csv(os.path.join(out_dir, name), t.X, t.y)
            files["test"].append(name)
    manifest = {
        "kind": "dataset",
        "problem_kind": kind,
        "D": train.d,
        "T": len(train.tasks),
        "files": files,
    }
    with open(os.path.join(out_dir, DATASET_MANIFEST), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    if ground_truth is not None:
        payload = dict(ground_truth)
        for key in ("W", "U", "V"):
            if key in payload:
                payload[key] = np.asarray(payload[key]).tolist()
        for key in ("U_mask", "V_mask"):
            if key in payload:
                payload[key] = np.asarray(payload[key]).astype(int).tolist()
        with open(os.path.join(out_dir, GROUND_TRUTH_FILE), "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")


def _load_manifest(path, want_kind):
    if not os.path.exists(path):
        raise ParseError("%s: file not found" % path)
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as e:
        raise ParseError("%s:%d: invalid JSON: %s" % (path, e.lineno, e.msg))
    if not isinstance(manifest, dict) or manifest.get("kind") != want_kind:
        raise ParseError("%s: not a %s manifest" % (path, want_kind))
    return manifest


def read_dataset(data_dir, split="train"):
    """Load one split of a dataset directory as a MultiTaskDataset."""
    manifest = _load_manifest(os.path.join(data_dir, DATASET_MANIFEST), "dataset")
    files = manifest.get("files", {})
    if split not in files:
        raise ParameterError(
            "split %r not in dataset (has %s)" % (split, sorted(files))
        )
    d = manifest.get("D")
    tasks = []
    for name in files[split]:
        X, y = _read_task_csv(os.path.join(data_dir, name), expected_d=d)
        tasks.append(TaskData(X=X, y=y))
    return MultiTaskDataset(tasks=tasks, problem_kind=manifest["problem_kind"])


def read_ground_truth(data_dir):
    """Ground-truth dict with W, U, V (arrays) and boolean masks."""
    path = os.path.join(data_dir, GROUND_TRUTH_FILE)
    if not os.path.exists(path):
        raise ParseError("%s: file not found" % path)
    with open(path) as fh:
        payload = json.load(fh)
    for key in ("W", "U", "V"):
        if key in payload:
            payload[key] = np.asarray(payload[key], dtype=np.float64)
    for key in ("U_mask", "V_mask"):
        if key in payload:
            payload[key] = np.asarray(payload[key], dtype=bool)
    return payload


def _write_matrix_csv(path, M):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in np.atleast_2d(M):
            w.writerow([_fmt(v) for v in row])


def _read_matrix_csv(path):
    if not os.path.exists(path):
        raise ParseError("%s: file not found" % path)
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise ParseError("%s:%d: non-numeric cell" % (path, lineno))
    if not rows:
        raise ParseError("%s: empty matrix" % path)
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ParseError("%s: ragged rows" % path)
    return np.asarray(rows, dtype=np.float64)


def write_model(model_dir, fact, hp, problem_kind, report=None,
                divisors=None, add_bias=False):
    """Write U.csv, V.csv and model.json into model_dir."""
    os.makedirs(model_dir, exist_ok=True)
    _write_matrix_csv(os.path.join(model_dir, "U.csv"), fact.U)
    _write_matrix_csv(os.path.join(model_dir, "V.csv"), fact.V)
    manifest = {
        "kind": "model",
        "problem_kind": problem_kind,
        "D": int(fact.U.shape[0]),
        "K": int(fact.U.shape[1]),
        "T": int(fact.V.shape[1]),
        "hyperparams": {
            "gamma1": hp.gamma1, "gamma2": hp.gamma2, "mu": hp.mu,
            "K": hp.K, "k": hp.k, "rho": hp.rho,
        },
        "divisors": None if divisors is None else [float(v) for v in divisors],
        "add_bias": bool(add_bias),
    }
    if report is not None:
        manifest["objective_trace"] = [float(v) for v in report.objective_trace]
        manifest["outer_iterations"] = int(report.outer_iterations)
        manifest["converged"] = bool(report.converged)
        manifest["wall_time"] = float(report.wall_time)
    with open(os.path.join(model_dir, MODEL_MANIFEST), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_model(model_dir):
    """Load (Factorization, manifest dict) from a model directory."""
    manifest = _load_manifest(os.path.join(model_dir, MODEL_MANIFEST), "model")
    U = _read_matrix_csv(os.path.join(model_dir, "U.csv"))
    V = _read_matrix_csv(os.path.join(model_dir, "V.csv"))
    if U.shape != (manifest["D"], manifest["K"]) or V.shape != (manifest["K"], manifest["T"]):
        raise ShapeError(
            "matrix files disagree with manifest: U %s, V %s, manifest D=%s K=%s T=%s"
            % (U.shape, V.shape, manifest["D"], manifest["K"], manifest["T"])
        )
    return Factorization(U=U, V=V), manifest


def normalization_divisors(data):
    """Per-feature max-abs over all training rows, pooled across tasks.

    Features that are identically zero get divisor 1 so the transform
    stays defined.
    """
    m = np.zeros(data.d)
    for t in data.tasks:
        m = np.maximum(m, np.abs(t.X).max(axis=0))
    m[m == 0.0] = 1.0
    return m


def apply_preprocessing(data, divisors=None, add_bias=False):
    """Divide features by stored divisors, then optionally append a
    constant 1 column.  The bias column is never scaled."""
    if divisors is None and not add_bias:
        return data
    tasks = []
    for t in data.tasks:
        X = t.X
        if divisors is not None:
            dv = np.asarray(divisors, dtype=np.float64)
            if dv.shape != (X.shape[1],):
                raise ShapeError(
                    "divisor length %d, data has %d features" % (dv.size, X.shape[1])
                )
            X = X / dv
        if add_bias:
            X = np.hstack([X, np.ones((X.shape[0], 1))])
        tasks.append(TaskData(X=X, y=t.y))
    return MultiTaskDataset(tasks=tasks, problem_kind=data.problem_kind)
