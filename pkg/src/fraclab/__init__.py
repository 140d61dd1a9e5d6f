"""Variable-exponent Lebesgue norms, fractional seminorms with
variable exponents, trace-embedding diagnostics, and a strictly convex
nonlocal Neumann solver on uniform interval and rectangle meshes."""

from .errors import (
    ArityMismatchError,
    BoundViolationError,
    ConfigError,
    ConjugacyError,
    DomainError,
    ExpressionError,
    FamilyError,
    FieldError,
    FraclabError,
    GridFunctionError,
    MeshError,
    MeshInconsistencyError,
    ModularError,
    NumericError,
    ParameterRangeError,
    ParseError,
    PartitionError,
    ProblemError,
    SubcriticalityError,
    UnknownIdentifierError,
)
from .expressions import evaluate, parse_expression, to_source
from .geometry import (
    Domain,
    GridFunction,
    PairQuadrature,
    build_from_recipe,
    build_interval,
    build_rectangle,
    cells_in_box,
    facets_in_box,
    get_default_threads,
    pair_quadrature,
    refine,
    set_default_threads,
)
from .exponents import (
    BOUNDARY,
    PAIR,
    POINT,
    ExponentField,
    GapCertificate,
    PatchSpec,
    conjugate_field,
    constant_field,
    covering_partition,
    critical_trace_exponent,
    diagonal_field,
    extend_symmetric_mean,
    freeze_margin_ok,
    function_on_domain,
    parse_field,
    subcritical_gap,
    transpose_field,
    validate_bounds,
    verify_certificate,
)
from .modular import (
    BRACKET_FAILURE,
    CONVERGED,
    ZERO_FUNCTION,
    LuxemburgResult,
    boundary_gagliardo_seminorm,
    full_norm,
    gagliardo_seminorm,
    luxemburg_norm,
    luxemburg_weighted,
    modular_gagliardo,
    modular_lebesgue,
    solve_unit_modular,
)
from .embeddings import (
    ChainReport,
    ConcentrationFamily,
    EmbeddingReport,
    HolderReport,
    SweepRow,
    TraceReport,
    boundary_patch_norm,
    embedding_check,
    holder_check,
    mollifier_profile,
    proof_chain_check,
    sharpness_sweep,
    trace_check,
)
from .solver import (
    CoercivityTable,
    EnergyProblem,
    SolverOptions,
    SolverReport,
    boundary_pairing,
    coercivity_probe,
    el_residual,
    energy,
    gradient,
    minimize,
)

__version__ = "0.1.0"
