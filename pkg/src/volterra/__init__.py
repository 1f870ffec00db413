"""Numerical solver and hypothesis verifier for functional Volterra
integral inclusions of the second kind on open domains.

The package is organized bottom-up:

- expr: tiny expression language used everywhere user input appears
- grids: uniform grids, grid functions, trapezoid weights
- domain: open boxes, moving integration regions, delay maps, exhaustions
- convex: compact convex sets, Steiner point, Hausdorff distance
- problem: kernels, right-hand sides, outer terms, problem assembly
- operators: integral operator, selection step, hypothesis checks
- weights: exponential weight selection and per-member schedules
- solver: successive approximation, residuals, condensing diagnostics
- goursat: boundary-trace outer terms for product-domain problems
- config: INI-style problem configs and builtin examples
- service: FastAPI wrapper; the CLI is a thin client of it
"""

from __future__ import annotations

__version__ = "1.0.0"

from .expr import (
    DomainError,
    ExprError,
    ParseError,
    UnboundVariableError,
    UnknownFunctionError,
    evaluate,
    parse,
    render,
    variables,
)
from .grids import Grid, GridCoverage, GridFunction, GridMismatch
from .domain import (
    DomainContext,
    Exhaustion,
    InvalidSet,
    MovingRegion,
    NegativeWeightFunction,
    OpenBox,
    TauMap,
    check_lambda_invariance,
    check_tau_admissible,
)
from .convex import (
    Ball,
    Box,
    InvalidDirection,
    Polygon,
    Singleton,
    hausdorff,
    steiner,
    steiner_lipschitz_constant,
)
from .problem import (
    AdditiveOuter,
    Kernel,
    MultiMap,
    NestedOuter,
    OuterForm,
    ProblemSpec,
    SetValuedOuter,
)
from .operators import (
    H_apply,
    HypothesisReport,
    InvalidMultimap,
    check_hypotheses,
    nemytskii_select,
    sup_kernel_norm,
    volterra_apply,
    volterra_apply_grid,
)
from .weights import (
    LengthMismatch,
    ScheduleRow,
    WeightSchedule,
    WeightSelectionFailed,
    bielecki_norm,
    build_schedule,
    check_brzeg,
    phi,
    psi,
    select_L,
)
from .solver import (
    Certificate,
    FunctionFamily,
    NonContractive,
    SolveReport,
    condensing_certificate,
    condensing_check,
    equicontinuity_modulus,
    initial_guess,
    mnc_axiom_check,
    picard_solve,
    residual,
)
from .goursat import IncompatibleTraces, goursat_outer
from .config import (
    BUILTIN_EXAMPLES,
    Config,
    ConfigError,
    build_problem,
    builtin_config,
    load_config,
    parse_config,
)

__all__ = [
    "__version__",
    # expr
    "DomainError",
    "ExprError",
    "ParseError",
    "UnboundVariableError",
    "UnknownFunctionError",
    "evaluate",
    "parse",
    "render",
    "variables",
    # grids
    "Grid",
    "GridCoverage",
    "GridFunction",
    "GridMismatch",
    # domain
    "DomainContext",
    "Exhaustion",
    "InvalidSet",
    "MovingRegion",
    "NegativeWeightFunction",
    "OpenBox",
    "TauMap",
    "check_lambda_invariance",
    "check_tau_admissible",
    # convex
    "Ball",
    "Box",
    "InvalidDirection",
    "Polygon",
    "Singleton",
    "hausdorff",
    "steiner",
    "steiner_lipschitz_constant",
    # problem
    "AdditiveOuter",
    "Kernel",
    "MultiMap",
    "NestedOuter",
    "OuterForm",
    "ProblemSpec",
    "SetValuedOuter",
    # operators
    "H_apply",
    "HypothesisReport",
    "InvalidMultimap",
    "check_hypotheses",
    "nemytskii_select",
    "sup_kernel_norm",
    "volterra_apply",
    "volterra_apply_grid",
    # weights
    "LengthMismatch",
    "ScheduleRow",
    "WeightSchedule",
    "WeightSelectionFailed",
    "bielecki_norm",
    "build_schedule",
    "check_brzeg",
    "phi",
    "psi",
    "select_L",
    # solver
    "Certificate",
    "FunctionFamily",
    "NonContractive",
    "SolveReport",
    "condensing_certificate",
    "condensing_check",
    "equicontinuity_modulus",
    "initial_guess",
    "mnc_axiom_check",
    "picard_solve",
    "residual",
    # goursat
    "IncompatibleTraces",
    "goursat_outer",
    # config
    "BUILTIN_EXAMPLES",
    "Config",
    "ConfigError",
    "build_problem",
    "builtin_config",
    "load_config",
    "parse_config",
]
