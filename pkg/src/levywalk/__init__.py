"""Monte Carlo solver for parabolic integro-differential equations.

Solutions are represented as expectations of functionals of a jump-diffusion
whose small jumps are replaced by a matched diffusion; trajectories follow a
restricted jump-adapted weak Euler scheme, stopped at the first exit from
the space-time cylinder.  Includes an error/cost model for choosing the
cutoff and step cap, and an FX barrier basket option pricer built on the
same engine.
"""

from .levy import (
    CutoffQuantities,
    ExponentialTails,
    SingularTempered,
    TemperedStable,
    cutoff_quantities,
    drift_compensator,
    intensity,
    quadrature_oracle,
    sample_jump,
    small_jump_covariance,
    third_moment_tail,
)
from .mc import McEstimate, estimate, merge
from .model import (
    Ball,
    PideProblem,
    WholeSpace,
    constant_coefficient_problem,
    contains,
    nonsingular_problem,
    singular_problem,
)
from .theory import BiasProfile, bias_profile, cost, optimal_h, steps_bound
from .walk import AffineMonitor, ChainState, StepDraw, WalkOutcome, euler_step, run_chain, sample_step_time

__version__ = "0.1.0"

__all__ = [
    "AffineMonitor",
    "Ball",
    "BiasProfile",
    "ChainState",
    "CutoffQuantities",
    "ExponentialTails",
    "McEstimate",
    "PideProblem",
    "SingularTempered",
    "StepDraw",
    "TemperedStable",
    "WalkOutcome",
    "WholeSpace",
    "bias_profile",
    "constant_coefficient_problem",
    "contains",
    "cost",
    "cutoff_quantities",
    "drift_compensator",
    "estimate",
    "euler_step",
    "intensity",
    "merge",
    "nonsingular_problem",
    "optimal_h",
    "quadrature_oracle",
    "run_chain",
    "sample_jump",
    "sample_step_time",
    "singular_problem",
    "small_jump_covariance",
    "steps_bound",
    "third_moment_tail",
    "__version__",
]
