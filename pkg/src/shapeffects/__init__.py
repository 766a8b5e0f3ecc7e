"""Shapley effects for models with dependent inputs.

Variance-based global sensitivity indices estimated either with exact
conditional sampling of the inputs (double Monte-Carlo / pick-and-freeze) or
from an observed i.i.d. sample only (nearest-neighbour variants), aggregated
over subsets or random permutations under a total evaluation budget.
"""

from .allocation import AllocationPlan, allocate_optimal_given_variances, allocate_subset_budget
from .core import (
    ALL_PERMUTATIONS,
    ConditionalElementTable,
    E_KIND,
    ElementKind,
    Permutation,
    V_KIND,
    convert_table,
    shapley_from_permutations,
    shapley_from_subsets,
    sobol_indices,
)
from .exact import (
    EvalBudget,
    InputModel,
    estimate_Eu_double_mc,
    estimate_moments,
    estimate_Vu_pick_freeze,
)
from .gaussian import LinearGaussianModel, load_gaussian_config, random_spd_covariance
from .givendata import (
    ColumnKind,
    DataSample,
    build_knn_index,
    estimate_Eu_mc_knn,
    estimate_Eu_mc_mix,
    estimate_Vu_pf_knn,
    estimate_Vu_pf_mix,
    explained_variance_ratio,
)
from .procedures import (
    EstimatorKind,
    ExactBackend,
    GivenDataBackend,
    OracleBackend,
    Procedure,
    ShapleyReport,
    run_exact_permutation_procedure,
    run_random_permutation_procedure,
    run_subset_procedure,
)
from .subsets import SubsetIndex

__all__ = [
    "ALL_PERMUTATIONS",
    "AllocationPlan",
    "ColumnKind",
    "ConditionalElementTable",
    "DataSample",
    "E_KIND",
    "ElementKind",
    "EstimatorKind",
    "EvalBudget",
    "ExactBackend",
    "GivenDataBackend",
    "InputModel",
    "LinearGaussianModel",
    "OracleBackend",
    "Permutation",
    "Procedure",
    "ShapleyReport",
    "SubsetIndex",
    "V_KIND",
    "allocate_optimal_given_variances",
    "allocate_subset_budget",
    "build_knn_index",
    "convert_table",
    "estimate_Eu_double_mc",
    "estimate_Eu_mc_knn",
    "estimate_Eu_mc_mix",
    "estimate_moments",
    "estimate_Vu_pf_knn",
    "estimate_Vu_pf_mix",
    "estimate_Vu_pick_freeze",
    "explained_variance_ratio",
    "load_gaussian_config",
    "random_spd_covariance",
    "run_exact_permutation_procedure",
    "run_random_permutation_procedure",
    "run_subset_procedure",
    "shapley_from_permutations",
    "shapley_from_subsets",
    "sobol_indices",
]
