"""Asymptotically optimal cubature on bounded star-shaped domains.

The package builds lattice-based node sets, measures their max-norm
nearest-node cells to obtain cubature weights, evaluates the asymptotic
worst-case error constant, and ships a numerical verification lab for the
closed-form identities behind the construction.
"""

from .domain import (
    EXAMPLE_DOMAIN_NAMES,
    JordanBracket,
    StarDomain,
    diameter,
    example_domain,
    jordan_measure,
    load_domain,
    membership,
    parse_domain_config,
    validate_star_ball,
)
from .engine import (
    Exponent,
    TestFunction,
    cdp_constant,
    empirical_error,
    evaluate,
    fooling_function,
    mc_cdp_constant,
    named_test_function,
    reference_integral,
    theorem_bound,
)
from .errors import (
    ConfigError,
    DomainError,
    NodeConstructionError,
    PreconditionError,
    StarquadError,
)
from .lemmas import (
    AuxConfig,
    CollinearConfigError,
    det_identity,
    distance_bound_check,
    geometric_sense_check,
    jacobian_p,
    jacobian_phi,
    jacobian_psi,
    p_map,
    preimage_count,
    scan_preimage_count,
    segment_identity_residual,
    verify_lemmas,
    w_region_bounds,
)
from .nodes import (
    LatticeSpec,
    NodeSet,
    build_S1,
    build_nodeset,
    check_nodeset_invariants,
    classify_cubes,
    step_size,
)
from .partition import (
    CubatureRule,
    assign_cell,
    compute_weights,
    load_rule_csv,
    remainder_measure,
    save_rule_csv,
)
from .report import (
    ConvergenceReport,
    ConvergenceRow,
    build_rule,
    load_report_csv,
    run_convergence,
    save_report_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AuxConfig",
    "CollinearConfigError",
    "ConfigError",
    "ConvergenceReport",
    "ConvergenceRow",
    "CubatureRule",
    "DomainError",
    "EXAMPLE_DOMAIN_NAMES",
    "Exponent",
    "JordanBracket",
    "LatticeSpec",
    "NodeConstructionError",
    "NodeSet",
    "PreconditionError",
    "StarDomain",
    "StarquadError",
    "TestFunction",
    "assign_cell",
    "build_S1",
    "build_nodeset",
    "build_rule",
    "cdp_constant",
    "check_nodeset_invariants",
    "classify_cubes",
    "compute_weights",
    "det_identity",
    "diameter",
    "distance_bound_check",
    "empirical_error",
    "evaluate",
    "example_domain",
    "fooling_function",
    "geometric_sense_check",
    "jacobian_p",
    "jacobian_phi",
    "jacobian_psi",
    "jordan_measure",
    "load_domain",
    "load_report_csv",
    "load_rule_csv",
    "mc_cdp_constant",
    "membership",
    "named_test_function",
    "p_map",
    "parse_domain_config",
    "preimage_count",
    "reference_integral",
    "remainder_measure",
    "run_convergence",
    "save_report_csv",
    "save_rule_csv",
    "scan_preimage_count",
    "segment_identity_residual",
    "step_size",
    "theorem_bound",
    "validate_star_ball",
    "verify_lemmas",
    "w_region_bounds",
]
