"""Flows driven by fractional Brownian motion, with certified growth bounds.

The package is organised in layers that mirror the pipeline of a bound
verification experiment:

``grid`` / ``fbm``
    uniform time grids and exact sampling of multi-channel fractional
    Brownian motion (Cholesky or circulant embedding), plus grid Hölder
    norms.
``fraccalc``
    one-sided fractional integrals and derivatives of sampled functions,
    the generalized Stieltjes (fractional-by-parts) integral, and the
    weighted Hölder norm used by the bound machinery.
``fields`` / ``flow``
    smooth driving vector fields with analytic regularity constants, and
    the left-point Euler scheme for the flow and its tangent (Jacobian).
``bounds``
    the explicit constant chain (k1, c_alpha, M_alpha, ..., Delta, S, C_T),
    the interval-length solver, and pathwise growth bounds for tangent
    vectors and Hausdorff measures.
``manifolds``
    quadrature meshes for circles, spheres, tori and segments, Gram
    determinant volume densities, and pushforward measure estimates.
``experiment``
    the Monte Carlo harness that samples paths, runs flows, evaluates
    bounds, and writes delimited reports; also the self-test battery.

Command line access is provided by the ``fbmflow`` entry point; see
``fbmflow --help``.
"""

from __future__ import annotations

from .grid import GridError, TimeGrid
from .fbm import (
    FbmPath,
    FbmSamplingError,
    fbm_covariance,
    holder_norm,
    read_path_csv,
    sample_paths,
    write_path_csv,
)
from .fraccalc import (
    FracCalcError,
    SampledFunction,
    rl_integral,
    w_norm,
    weyl_derivative,
    zahle_integral,
)
from .fields import FieldError, VectorFieldSet, make_field
from .flow import (
    FlowStepError,
    FlowTrajectory,
    TangentTrajectory,
    estimate_convergence_order,
    integrate_flow,
    integrate_flow_with_tangent,
    integrate_tangent,
)
from .bounds import (
    BoundConstants,
    BoundError,
    HolderParams,
    compute_constants,
    default_params,
    hausdorff_growth_bound,
    solve_delta,
    tangent_growth_bound,
)
from .manifolds import (
    ManifoldError,
    ManifoldMesh,
    MeasureCurve,
    gram_hadamard_check,
    gram_volume,
    hausdorff_measure,
    make_manifold,
    measure_curve,
)
from .experiment import (
    ExperimentConfig,
    ExperimentResult,
    run_bound_experiment,
    selftest,
)

__version__ = "0.1.0"

__all__ = [
    "BoundConstants",
    "BoundError",
    "ExperimentConfig",
    "ExperimentResult",
    "FbmPath",
    "FbmSamplingError",
    "FieldError",
    "FlowStepError",
    "FlowTrajectory",
    "FracCalcError",
    "GridError",
    "HolderParams",
    "ManifoldError",
    "ManifoldMesh",
    "MeasureCurve",
    "SampledFunction",
    "TangentTrajectory",
    "TimeGrid",
    "VectorFieldSet",
    "compute_constants",
    "default_params",
    "estimate_convergence_order",
    "fbm_covariance",
    "gram_hadamard_check",
    "gram_volume",
    "hausdorff_growth_bound",
    "hausdorff_measure",
    "holder_norm",
    "integrate_flow",
    "integrate_flow_with_tangent",
    "integrate_tangent",
    "make_field",
    "make_manifold",
    "measure_curve",
    "read_path_csv",
    "rl_integral",
    "run_bound_experiment",
    "sample_paths",
    "selftest",
    "solve_delta",
    "tangent_growth_bound",
    "w_norm",
    "weyl_derivative",
    "write_path_csv",
    "zahle_integral",
]
