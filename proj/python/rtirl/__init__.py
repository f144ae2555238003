"""Q-learning with real-time-iteration NMPC on the evaporator benchmark."""

from ._rtirl import (
    THETA_SIZE,
    ConfigError,
    NonFiniteError,
    OcpSpec,
    QpError,
    SqpIterationLimit,
    StrictComplementarityViolated,
    compare,
    economic_cost,
    evaluate,
    load_theta,
    naive_theta,
    plant_rhs,
    plant_step,
    project_theta,
    q_value,
    run_checks,
    save_theta,
    solve_qp,
    sqp_solve,
    steady_state_cost,
    td_error,
    theta_names,
    train,
    validate_theta,
    value,
)

__all__ = [
    "THETA_SIZE",
    "ConfigError",
    "NonFiniteError",
    "OcpSpec",
    "QpError",
    "SqpIterationLimit",
    "StrictComplementarityViolated",
    "compare",
    "economic_cost",
    "evaluate",
    "load_theta",
    "naive_theta",
    "plant_rhs",
    "plant_step",
    "project_theta",
    "q_value",
    "run_checks",
    "save_theta",
    "solve_qp",
    "sqp_solve",
    "steady_state_cost",
    "td_error",
    "theta_names",
    "train",
    "validate_theta",
    "value",
]
