"""Nonlocal Kirchhoff-type Dirichlet problems on intervals and rectangles."""

from ._core import (
    BuiltProblem,
    DomainSpec,
    Error,
    GreenOperator,
    Grid,
    RunConfig,
    SolveReport,
    apply_laplacian,
    build_example1,
    build_example2,
    build_example3,
    build_example4,
    check_G1,
    check_G2,
    cmd_oracle_compare,
    cmd_solve,
    cmd_sweep,
    cmd_verify,
    compute_r_M,
    fixed_point_solve,
    h1_seminorm,
    lp_norm,
    maximize_A,
    newton_solve,
    principal_eigenpair,
    verify_invariance,
)

__all__ = [name for name in dir() if not name.startswith("_")]
