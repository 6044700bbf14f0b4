"""Layer-by-layer learning of linear non-Gaussian DAGs."""
from .exceptions import (
    CycleError,
    DataFormatError,
    EmptyResultError,
    InsufficientDataError,
    InvalidParameterError,
    InvalidPrecisionError,
    LayerDagError,
    SingularMatrixError,
)
from .indep import all_independent, dcov_sq, indep_test
from .learner import LearnConfig, LearnedDag, learn, learn_population
from .metrics import compute_metrics, edge_confusion, shd
from .precision import PrecisionEstimate, empirical_covariance, glasso, lambda_schedule
from .sem_model import (
    Dag,
    Dataset,
    LayerDecomposition,
    SemModel,
    generate_ba,
    generate_hub,
    layer_decompose,
    make_model,
    simulate,
    toy_model,
)

__version__ = "0.1.0"
