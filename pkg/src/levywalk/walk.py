"""Reference chain engine: one step and one full walk at a time.

This is the executable definition of the scheme: restricted jump-adapted
time stepping (each step is the minimum of the next exponential jump
waiting time and a fixed cap ``h``), a weak Euler update with ``+-1`` noise
between jumps, and exact sampling of the jump sizes above the cutoff.  The
walk stops when the chain leaves the space-time cylinder; on a time exit
the reported exit time is clamped to the horizon while the state is kept
as stepped.

The batch engine in ``_kernels`` reproduces these trajectories bit for bit;
this module favors clarity over speed and is the oracle in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import levy
from .levy import CutoffQuantities
from .model import Ball, PideProblem, WholeSpace, contains
from .rng import ChainStream

__all__ = [
    "StepDraw",
    "ChainState",
    "WalkOutcome",
    "AffineMonitor",
    "EXIT_TIME",
    "EXIT_SPACE",
    "sample_step_time",
    "euler_step",
    "run_chain",
]

EXIT_TIME = "time"
EXIT_SPACE = "space"


@dataclass(frozen=True)
class StepDraw:
    """Realized randomness of one step.

    ``theta`` equals the cap when no jump occurs and the truncated
    exponential waiting time otherwise; ``xi`` and ``eta`` are the ``+-1``
    Euler noises; ``jump_size`` is present exactly when ``jump_occurred``.
    """

    jump_occurred: bool
    theta: float
    xi: np.ndarray
    eta: float
    jump_size: Optional[float] = None

    def __post_init__(self):
        if self.jump_occurred and self.jump_size is None:
            raise ValueError("jump_size required when jump_occurred")
        if not self.jump_occurred and self.jump_size is not None:
            raise ValueError("jump_size must be None when no jump occurred")


@dataclass(frozen=True)
class ChainState:
    """Chain position after ``k`` transitions: time, state, and the two functionals."""

    time: float
    x: np.ndarray
    y: float
    z: float
    k: int


@dataclass(frozen=True)
class WalkOutcome:
    """Terminal data of one walk.

    ``steps`` counts transitions; ``exit_time`` is clamped to the horizon on
    a time exit.  ``coord_minima`` holds per-coordinate running minima of the
    monitored transform over all visited states (initial state included)
    when a monitor was supplied.
    """

    exit_time: float
    x_exit: np.ndarray
    y_exit: float
    z_exit: float
    steps: int
    exit_kind: str
    coord_minima: Optional[np.ndarray] = None


@dataclass(frozen=True)
class AffineMonitor:
    """Per-step monitor ``x -> slopes * (t - t0) + x``, tracked coordinatewise.

    This is the transform whose running minimum decides barrier events for
    exponential models: the log of the normalized spot is affine in the
    chain state.
    """

    slopes: np.ndarray
    t0: float

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.slopes) * (t - self.t0) + x


def sample_step_time(lambda_eps: float, h: float, u1: float, u2: float) -> tuple[bool, float]:
    """Draw one restricted jump-adapted step length from two uniforms.

    A jump happens within the cap with probability ``1 - exp(-lambda h)``;
    conditionally on that, the waiting time is the exponential law truncated
    to ``[0, h]``, inverted from ``u2``.  Without a jump the step is ``h``.
    """
    if lambda_eps <= 0 or h <= 0:
        raise ValueError("lambda_eps and h must be strictly positive")
    if not (0.0 < u1 < 1.0 and 0.0 < u2 < 1.0):
        raise ValueError("uniform variates must lie strictly inside (0, 1)")
    p_jump = -math.expm1(-lambda_eps * h)
    if u1 < p_jump:
        return True, -math.log1p(-u2 * p_jump) / lambda_eps
    return False, h


def euler_step(
    state: ChainState,
    draw: StepDraw,
    problem: PideProblem,
    cut: CutoffQuantities,
) -> ChainState:
    """One weak Euler transition from ``state`` under the realized ``draw``.

    All coefficients are evaluated at the pre-step point; the jump term, when
    present, is added on top of the diffusion update with the same
    pre-step jump scaling.
    """
    sc = problem.scalar_coeffs()
    t = state.time
    x = [float(v) for v in state.x]
    theta = draw.theta
    sqt = math.sqrt(theta)
    b = sc.drift(t, x)
    fv = sc.jump_vec(t, x)
    sxi = sc.sigma_xi(t, x, draw.xi)
    gamma = cut.gamma_eps
    beta = cut.beta_eps
    new_x = np.empty(problem.dim)
    for j in range(problem.dim):
        v = x[j] + theta * (b[j] - fv[j] * gamma) + sqt * (sxi[j] + (fv[j] * beta) * draw.eta)
        if draw.jump_occurred:
            v += fv[j] * draw.jump_size
        new_x[j] = v
    gval = sc.g(t, x)
    cval = sc.c(t, x)
    new_z = state.z + theta * gval * state.y
    new_y = state.y + theta * cval * state.y
    return ChainState(time=t + theta, x=new_x, y=new_y, z=new_z, k=state.k + 1)


def run_chain(
    problem: PideProblem,
    cut: CutoffQuantities,
    h: float,
    stream: ChainStream,
    x0,
    monitor: Optional[Callable] = None,
    max_steps: Optional[int] = None,
) -> WalkOutcome:
    """Simulate one walk until it leaves the space-time cylinder.

    Parameters
    ----------
    problem, cut : the problem and the cutoff quartet of its measure.
    h : step cap (need not divide the horizon).
    stream : per-chain random substream.
    x0 : starting point, must lie in the open domain.
    monitor : optional pure function ``(t, x) -> array(d)`` whose
        coordinatewise running minimum over visited states is reported.
    """
    if h <= 0:
        raise ValueError("h must be strictly positive")
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (problem.dim,):
        raise ValueError(f"x0 must have shape ({problem.dim},)")
    if not contains(problem.domain, x0):
        raise ValueError("x0 must lie inside the open domain")
    jtable = levy.jump_quantile_table(problem.measure, cut.eps)
    lam = cut.lambda_eps
    T = problem.T
    y_bound = math.exp(problem.c_max * (T - problem.t0 + h)) * (1.0 + 1e-12)
    cap = max_steps if max_steps is not None else _default_step_cap(lam, h, T - problem.t0)

    state = ChainState(time=problem.t0, x=x0, y=1.0, z=0.0, k=0)
    minima = None if monitor is None else np.asarray(monitor(problem.t0, x0), dtype=np.float64)

    while True:
        r = stream.step_draws(state.k, problem.dim)
        jump, theta = sample_step_time(lam, h, r.u_bernoulli, r.u_step)
        size = levy.quantile_scalar(jtable, r.u_jump) if jump else None
        draw = StepDraw(jump_occurred=jump, theta=theta, xi=r.xi, eta=r.eta, jump_size=size)
        state = euler_step(state, draw, problem, cut)
        if state.y > y_bound:
            raise RuntimeError("multiplicative functional exceeded its deterministic bound")

        timed_out = state.time >= T
        t_rep = T if timed_out else state.time
        if minima is not None:
            minima = np.minimum(minima, monitor(t_rep, state.x))
        if timed_out or not contains(problem.domain, state.x):
            return WalkOutcome(
                exit_time=t_rep,
                x_exit=state.x,
                y_exit=state.y,
                z_exit=state.z,
                steps=state.k,
                exit_kind=EXIT_TIME if timed_out else EXIT_SPACE,
                coord_minima=minima,
            )
        if state.k >= cap:
            raise RuntimeError(f"chain exceeded the step cap ({cap}); check the configuration")


def _default_step_cap(lam: float, h: float, horizon: float) -> int:
    expected = horizon * lam / -math.expm1(-lam * h) + 1.0
    return int(min(2**31 - 1, max(10_000.0, 64.0 * expected)))
