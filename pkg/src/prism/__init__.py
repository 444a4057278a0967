"""Kernel nu-SVM with data-mined linear class rules as soft constraints.

Pipeline: parse libsvm data -> min-max scale -> mine one linear rule per
class over feature pairs -> train a kernel SVM whose dual objective is
penalized when the rules' implications are violated at the training points.
A benchmark harness reproduces the repeated-split comparison against the
unconstrained model, including the paired one-sided t-test.
"""

from .dataset import (
    Dataset,
    Sample,
    ScalingParams,
    apply_minmax,
    fit_minmax,
    kfold,
    kfold_indices,
    parse_libsvm,
    scale_dataset,
    serialize_libsvm,
    split,
    split_indices,
)
from .kernel import GramMatrix, KernelConfig, cross_gram, eval_kernel, gram
from .model_selection import (
    CvEntry,
    ExperimentReport,
    GridSpec,
    grid_search_cv,
    nu_grid,
    paired_t_test,
    run_experiment,
)
from .prior_miner import (
    LinearPrior,
    MiningReport,
    PairSearchResult,
    angle_grid,
    mine_pair,
    mine_prior,
    prior_satisfied,
)
from .prior_svm import (
    PriorConstraintSet,
    PriorSvmConfig,
    PriorSvmDiagnostics,
    decompose,
    reduced_objective,
    select_prior_points,
    train_prior_svm,
)
from .qp import (
    ConvexObjective,
    FeasibleSetA,
    SolveReport,
    SolverOptions,
    project_onto_A,
    solve_bruteforce,
    solve_projected_gradient,
)
from .stats import regularized_incomplete_beta, student_t_cdf, student_t_sf
from .svm import (
    SoftMarginDiagnostics,
    SvmModel,
    accuracy,
    decision_value,
    decision_values,
    dual_objective,
    make_dual_objective,
    make_soft_margin_objective,
    predict,
    predict_many,
    recover_bias,
    train_nu_svm,
)

__version__ = "0.1.0"
