"""Dampened-metric laboratory for unbounded weighted-graph domains.

Builds finite weighted graphs that truncate unbounded uniform domains,
applies boundary-distance dampenings that pull the far end in to a single
point at infinity, and provides the machinery to study the result:
p-harmonic Dirichlet solvers, condenser capacity and path modulus engines,
boundary trace and embedding checks, and parabolic/hyperbolic
classification of the far end.
"""

from .analysis import (
    AnalysisError,
    DistInfinityReport,
    DoublingReport,
    ExponentFit,
    FatnessReport,
    ParabolicityReport,
    UniformityReport,
    boundary_fatness,
    classify_parabolicity,
    dist_infinity_check,
    doubling_constant,
    mass_exponents,
    q_beta,
    sample_boundary,
    sample_interior,
    sample_pairs,
    uniformity_spot_check,
)
from .dampening import (
    Dampening,
    DampeningError,
    PhiValidationReport,
    edge_weight,
    evaluate,
    log_power,
    power,
    tabulated,
    tail_integral,
    tail_integral_many,
)
from .dampening import validate as validate_dampening
from .domains import (
    GENERATORS,
    THETA_CANTOR_SLIT,
    THETA_CANTOR_SQUARE,
    DomainBundle,
    cantor_intervals,
    cantor_slit,
    generate,
    half_strip,
    plane_minus_cantor_square,
    slit_cone,
)
from .energy import (
    AdamsReport,
    EnergyError,
    PoincareReport,
    TraceReport,
    adams_check,
    adams_exponent,
    besov_norm,
    edge_mass,
    field_array,
    hardy_check,
    p_energy,
    poincare_check,
    random_smooth_fields,
    riesz_potential,
    trace,
    upper_gradient,
)
from .graphspace import (
    BandDecomposition,
    DomainFormatError,
    GraphSpace,
    band_of_distance,
    bands,
    boundary_distance,
    dump_domain,
    load_domain,
    metric_ball,
    path_distance,
    shortest_route,
)
from .solver import (
    CapacityResult,
    Condenser,
    DirichletProblem,
    ModulusResult,
    SolveOptions,
    SolveResult,
    SolverError,
    UnboundedSolveResult,
    capacity,
    capacity_of_infinity,
    modulus,
    solve_dirichlet_unbounded,
    solve_p_harmonic,
)
from .transform import (
    BoundaryMeasure,
    CodimReport,
    TransformedSpace,
    TransformError,
    attach_infinity,
    codimensional_measure,
    transform,
    verify_codimensionality,
)

__version__ = "0.1.0"

__all__ = [
    "AdamsReport",
    "AnalysisError",
    "BandDecomposition",
    "BoundaryMeasure",
    "CapacityResult",
    "CodimReport",
    "Condenser",
    "Dampening",
    "DampeningError",
    "DirichletProblem",
    "DistInfinityReport",
    "DomainBundle",
    "DomainFormatError",
    "DoublingReport",
    "EnergyError",
    "ExponentFit",
    "FatnessReport",
    "GENERATORS",
    "GraphSpace",
    "ModulusResult",
    "ParabolicityReport",
    "PhiValidationReport",
    "PoincareReport",
    "SolveOptions",
    "SolveResult",
    "SolverError",
    "THETA_CANTOR_SLIT",
    "THETA_CANTOR_SQUARE",
    "TraceReport",
    "TransformError",
    "TransformedSpace",
    "UniformityReport",
    "UnboundedSolveResult",
    "adams_check",
    "adams_exponent",
    "attach_infinity",
    "band_of_distance",
    "bands",
    "besov_norm",
    "boundary_distance",
    "boundary_fatness",
    "cantor_intervals",
    "cantor_slit",
    "capacity",
    "capacity_of_infinity",
    "classify_parabolicity",
    "codimensional_measure",
    "dist_infinity_check",
    "doubling_constant",
    "dump_domain",
    "edge_mass",
    "edge_weight",
    "evaluate",
    "field_array",
    "generate",
    "half_strip",
    "hardy_check",
    "load_domain",
    "log_power",
    "mass_exponents",
    "metric_ball",
    "modulus",
    "p_energy",
    "path_distance",
    "plane_minus_cantor_square",
    "poincare_check",
    "power",
    "q_beta",
    "random_smooth_fields",
    "riesz_potential",
    "sample_boundary",
    "sample_interior",
    "sample_pairs",
    "shortest_route",
    "slit_cone",
    "solve_dirichlet_unbounded",
    "solve_p_harmonic",
    "tabulated",
    "tail_integral",
    "tail_integral_many",
    "trace",
    "transform",
    "uniformity_spot_check",
    "upper_gradient",
    "validate_dampening",
    "verify_codimensionality",
]
