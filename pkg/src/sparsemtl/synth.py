"""Seeded generators for the four synthetic benchmark families.

All four share D=25 variables, T=20 tasks, rank 5, 50 train and 100
test rows per task, unit noise.  They differ only in the sparsity
patterns of the true factors:

  syn1  U basis r occupies rows 4r-3..4r; V column j loads only
        component ceil(j/4).  Groups are disjoint on both sides.
  syn2  U as syn1; V columns 4r-3..4r load components {r, r+1} for
        r < K, the last four load {K-1, K}.  Task groups overlap.
  syn3  U basis r occupies rows 3r-2..3r+3, so consecutive bases share
        three rows; V as syn1.
  syn4  U as syn3, V as syn2.

Draw order from a single seeded generator, frozen for reproducibility:
masked U entries row-major, masked V entries column-major, then per
task j the train X (row-major), train noise, test X, test noise.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .model import MultiTaskDataset, TaskData

FAMILIES = ("syn1", "syn2", "syn3", "syn4")

D = 25
T = 20
K = 5
N_TRAIN = 50
N_TEST = 100
NOISE_STD = 1.0


@dataclass(frozen=True)
class SynSpec:
    family: str
    seed: int = 0
    noise_std: float = NOISE_STD

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(
                "unknown family %r, expected one of %s" % (self.family, list(FAMILIES))
            )
        if self.noise_std < 0:
            raise ParameterError("noise_std must be >= 0")


def _u_mask_disjoint():
    # basis r covers rows 4r-3..4r (1-indexed), rows 21-25 stay empty
    m = np.zeros((D, K), dtype=bool)
    for r in range(K):
        m[4 * r : 4 * r + 4, r] = True
    return m


def _u_mask_overlapping():
    # basis r covers rows 3r-2..3r+3, six rows, sharing three with basis r+1
    m = np.zeros((D, K), dtype=bool)
    for r in range(K):
        m[3 * r : 3 * r + 6, r] = True
    return m


def _v_mask_disjoint():
    # column j loads only component ceil(j/4)
    m = np.zeros((K, T), dtype=bool)
    for j in range(T):
        m[j // 4, j] = True
    return m


def _v_mask_overlapping():
    # columns 4r-3..4r load {r, r+1}; the last four load {K-1, K}
    m = np.zeros((K, T), dtype=bool)
    for r in range(K - 1):
        m[r, 4 * r : 4 * r + 4] = True
        m[r + 1, 4 * r : 4 * r + 4] = True
    m[K - 2, 4 * (K - 1) :] = True
    m[K - 1, 4 * (K - 1) :] = True
    return m


def family_group_structure(spec):
    """Boolean (U_mask, V_mask) the generated factors must match exactly."""
    if isinstance(spec, SynSpec):
        family = spec.family
    else:
        family = spec
        if family not in FAMILIES:
            raise ParameterError(
                "unknown family %r, expected one of %s" % (family, list(FAMILIES))
            )
    u = _u_mask_disjoint() if family in ("syn1", "syn2") else _u_mask_overlapping()
    v = _v_mask_disjoint() if family in ("syn1", "syn3") else _v_mask_overlapping()
    return u, v


def generate(spec):
    """Draw one realization of a family.

    Returns (train, test, W_true, U_true, V_true) where the datasets
    are MultiTaskDataset instances and W_true = U_true @ V_true.
    """
    u_mask, v_mask = family_group_structure(spec)
    rng = np.random.default_rng(spec.seed)

    U = np.zeros((D, K))
    U[u_mask] = rng.normal(1.0, 0.25, size=int(u_mask.sum()))
    V = np.zeros((K, T))
    # fill column-major so each task's weights are drawn consecutively
    Vt = V.T
    Vt[v_mask.T] = rng.uniform(1.0, 1.5, size=int(v_mask.sum()))
    V = Vt.T
    W = U @ V

    train_tasks = []
    test_tasks = []
    for j in range(T):
        w = W[:, j]
        Xtr = rng.normal(size=(N_TRAIN, D))
        ytr = Xtr @ w + spec.noise_std * rng.normal(size=N_TRAIN)
        Xte = rng.normal(size=(N_TEST, D))
        yte = Xte @ w + spec.noise_std * rng.normal(size=N_TEST)
        train_tasks.append(TaskData(X=Xtr, y=ytr))
        test_tasks.append(TaskData(X=Xte, y=yte))

    train = MultiTaskDataset(tasks=train_tasks)
    test = MultiTaskDataset(tasks=test_tasks)
    return train, test, W, U, V
