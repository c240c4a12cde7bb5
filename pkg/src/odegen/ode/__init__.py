from .solvers import (
    FIXED_STEP_METHODS,
    METHODS,
    DenseSolution,
    SolverConfig,
    Trajectory,
    VectorField,
    dopri5_dense,
    dopri5_step,
    euler_step,
    integrate,
    integrate_recorded,
    rk4_step,
    trajectory_from_csv,
    trajectory_to_csv,
)

__all__ = [
    "FIXED_STEP_METHODS",
    "METHODS",
    "DenseSolution",
    "SolverConfig",
    "Trajectory",
    "VectorField",
    "dopri5_dense",
    "dopri5_step",
    "euler_step",
    "integrate",
    "integrate_recorded",
    "rk4_step",
    "trajectory_from_csv",
    "trajectory_to_csv",
]
