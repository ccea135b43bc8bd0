"""Sparse balance-matrix estimation for networks governed by X = B* Y."""

from .errors import (
    BalanceNetError,
    InsufficientData,
    InvalidInput,
    MaxItersExceeded,
    NoEdges,
    NotPositiveDefinite,
    SingularBlock,
    UnsupportedSize,
)
from .linalg import IndexSet, kron_submatrix_infnorm_product, norms, sym_inv, sym_sqrt
from .network import GraphKind, GraphSpec, NetworkModel, build_chain, build_from_edge_list, build_grid
from .sampling import Distribution, SampleSet, SamplingSpec, draw_samples
from .solver import SolverConfig, SolverResult, default_lambda, kkt_residual, objective, solve
from .baselines import glasso, glasso_2hr_support, glasso_sr_support
from .metrics import TrialScore, bmin, score
from .diagnostics import (
    DiagnosticsReport,
    check_hessian_regularity,
    check_incoherence,
    lemma4_radius,
    pdw_dual_check,
    theorem1_constants,
)
from .harness import (
    Estimator,
    ExperimentResult,
    ExperimentSpec,
    ModelSpec,
    pilot_tune_lambda,
    rate_check,
    run_experiment,
)

__version__ = "0.1.0"
