"""Random-feature solvers for forced heat equations on R^d.

Features are built from Monte Carlo representations of the mild solution
(heat-kernel convolution of the initial condition plus the Duhamel integral
of the forcing); only the output weights are fitted, by linear least squares.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    HeatnetError,
    ModelFormatError,
    NonFiniteError,
    QuadratureError,
    SingularityError,
    SolverError,
)
from .problem import (
    BenchmarkParams,
    ProblemSpec,
    ScalarFieldBundle,
    constant_field,
    eval_bundle,
    make_benchmark,
    zero_field,
)
from .sampling import BlockSampler, RngState, SamplerKind, inverse_normal_cdf, sobol_unit, std_normal, uniform_box
from .kernels import KernelConsts, TemporalMap, heat_kernel, transformed_inner_integrand
from .mc import (
    McEstimate,
    estimate_I_is,
    estimate_I_transformed,
    estimate_J_is,
    estimate_J_transformed,
    estimate_solution,
    quad_reference_1d,
)
from .features import FeatureBank, FeatureEval, build_bank, eval_features, eval_heat_operator
from .trainer import LinearSystem, TrainConfig, TrainedModel, assemble_system, sample_training_points, solve_ridge, train
from .metrics import ErrorReport, evaluate_model, make_test_grid, percentile_bands, rel_errors
from .model_io import load_model, save_model
