"""Multi-task learning with joint variable selection and latent structure.

Fits W = U V across tasks: U (D x K) selects variables shared by latent
bases, V (K x T) combines bases per task under a squared k-support norm.
Training alternates an ADMM step in U with accelerated proximal steps in
the columns of V.
"""

from .admm import AdmmResult, AdmmState, admm_solve_u, u_objective
from .errors import (
    InvalidDataError,
    OracleFailure,
    ParameterError,
    ParseError,
    ShapeError,
    SparseMtlError,
    UndefinedMetricError,
)
from .fista import FistaConfig, VColumnResult, solve_v_column, update_all_v
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
    FULL_GAMMA_GRID,
    FULL_K_GRID,
    FULL_SMALL_K_GRID,
    GridSpec,
    error_rate,
    grid_search,
    kfold_indices,
    ree,
    risk_bound_terms,
    rmse,
)
from .model import (
    CLASSIFICATION,
    REGRESSION,
    Factorization,
    HyperParams,
    MultiTaskDataset,
    TaskData,
    loss_and_gradient_v,
    objective_value,
    predict,
    predict_labels,
)
from .prox import (
    KSupportDecomposition,
    ksupport_decomposition,
    ksupport_norm,
    numeric_prox_oracle,
    project_l1_ball,
    prox_l1,
    prox_l1_inf_rows,
    prox_sq_ksupport,
)
from .synth import FAMILIES, SynSpec, family_group_structure, generate
from .train import FitReport, fit, initialize, lasso_fit, ridge_init_coefficient

__version__ = "0.1.0"

__all__ = [
    "AdmmResult",
    "AdmmState",
    "CLASSIFICATION",
    "FAMILIES",
    "FULL_GAMMA_GRID",
    "FULL_K_GRID",
    "FULL_SMALL_K_GRID",
    "Factorization",
    "FistaConfig",
    "FitReport",
    "GridSpec",
    "HyperParams",
    "InvalidDataError",
    "KSupportDecomposition",
    "MultiTaskDataset",
    "OracleFailure",
    "ParameterError",
    "ParseError",
    "REGRESSION",
    "ShapeError",
    "SparseMtlError",
    "SynSpec",
    "TaskData",
    "UndefinedMetricError",
    "VColumnResult",
    "admm_solve_u",
    "apply_preprocessing",
    "error_rate",
    "family_group_structure",
    "fit",
    "generate",
    "grid_search",
    "initialize",
    "kfold_indices",
    "ksupport_decomposition",
    "ksupport_norm",
    "lasso_fit",
    "loss_and_gradient_v",
    "normalization_divisors",
    "numeric_prox_oracle",
    "objective_value",
    "predict",
    "predict_labels",
    "project_l1_ball",
    "prox_l1",
    "prox_l1_inf_rows",
    "prox_sq_ksupport",
    "read_dataset",
    "read_ground_truth",
    "read_model",
    "ree",
    "ridge_init_coefficient",
    "risk_bound_terms",
    "rmse",
    "solve_v_column",
    "u_objective",
    "update_all_v",
    "write_dataset",
    "write_model",
]
