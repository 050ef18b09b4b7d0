"""Heavy-traffic pricing and dispatch for ride-hailing networks."""

from ._core import (
    ConfigError,
    ModelError,
    NumericalError,
    load_model,
    nominal_plan,
    ewf_params,
    solve_bellman,
    run_replication,
    run_experiment,
)

__all__ = [
    "ConfigError",
    "ModelError",
    "NumericalError",
    "load_model",
    "nominal_plan",
    "ewf_params",
    "solve_bellman",
    "run_replication",
    "run_experiment",
]
