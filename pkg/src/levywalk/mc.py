"""Monte Carlo estimator over independent chains.

``estimate`` fans paths out in fixed-size shards, simulates each shard with
the compiled batch engine (or the reference engine), reduces per-path
payoffs with exact (error-free) summation, and reports the mean together
with its variance estimate and confidence half-width.

Determinism contract: the estimate is a pure function of
``(problem, eps, h, m_paths, seed)``.  Per-chain randomness is keyed by
``(seed, chain_index)``, shard sums are exact, and shards are merged in a
fixed order, so neither the worker count nor the shard partition can change
any output bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from . import levy, walk
from ._kernels import FLAG_STEP_CAP, FLAG_Y_BOUND, accumulate_expansion, simulate_chains
from .model import KERNEL_POLY, Ball, PideProblem, contains
from .rng import ChainStream
from .walk import AffineMonitor, _default_step_cap

__all__ = [
    "SHARD_SIZE",
    "McEstimate",
    "ShardOutcome",
    "ShardAccumulator",
    "estimate",
    "merge",
    "shard_outcomes",
]

# Fixed shard width. Part of the reproducibility spec: per-chain draws never
# depend on it, and shard sums are exact, so results are identical for any
# partition; a fixed width simply keeps memory use flat.
SHARD_SIZE = 1 << 15


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo estimate with its own error bars.

    ``var_hat`` is the population variance of the per-path payoff divided by
    the number of paths; ``half_width`` is twice its square root (a 95%
    confidence half-width).  ``steps_mean`` is the average trajectory length
    in states per path, the initial state included; its half-width is built
    the same way.
    """

    u_hat: float
    var_hat: float
    half_width: float
    m_paths: int
    steps_mean: float
    steps_half_width: float
    seed: int


@dataclass(frozen=True)
class ShardOutcome:
    """Raw terminal data of one contiguous block of chains."""

    start: int
    stop: int
    exit_time: np.ndarray
    x_exit: np.ndarray
    y_exit: np.ndarray
    z_exit: np.ndarray
    steps: np.ndarray
    coord_minima: Optional[np.ndarray]


class _ExactSum:
    """Error-free accumulator: a Shewchuk expansion of partial doubles."""

    __slots__ = ("partials", "count")

    def __init__(self, partials: Optional[np.ndarray] = None):
        self.partials = np.zeros(256)
        self.count = 0
        if partials is not None:
            self.add(np.asarray(partials, dtype=np.float64))

    def add(self, values: np.ndarray) -> None:
        values = np.ascontiguousarray(values, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise FloatingPointError("non-finite payoff encountered")
        count = accumulate_expansion(values, self.partials, self.count)
        if count < 0:
            raise RuntimeError("exact-sum expansion overflow")
        self.count = count

    def snapshot(self) -> np.ndarray:
        return self.partials[: self.count].copy()

    @property
    def value(self) -> float:
        # partials are non-overlapping, so fsum rounds the exact total once
        return math.fsum(self.partials[: self.count])


@dataclass(frozen=True)
class ShardAccumulator:
    """Mergeable reduction state for the path range ``[start, stop)``."""

    start: int
    stop: int
    seed: int
    payoff_partials: np.ndarray
    payoff_sq_partials: np.ndarray
    steps_sum: int
    steps_sq_sum: int


def shard_outcomes(
    problem: PideProblem,
    eps: float,
    h: float,
    m_paths: int,
    seed: int,
    x0,
    monitor: Optional[Callable] = None,
    workers: Optional[int] = None,
    engine: str = "auto",
) -> Iterator[ShardOutcome]:
    """Simulate ``m_paths`` chains and yield raw outcomes shard by shard.

    This is the layer below :func:`estimate`; consumers that need more than
    one statistic per path (several currencies, say) iterate it once and
    build their own reductions.
    """
    if h <= 0:
        raise ValueError("h must be strictly positive")
    if m_paths < 1:
        raise ValueError("m_paths must be at least 1")
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (problem.dim,):
        raise ValueError(f"x0 must have shape ({problem.dim},)")
    if not contains(problem.domain, x0):
        raise ValueError("x0 must lie inside the open domain")
    use_batch = _select_engine(problem, monitor, engine)
    cut = levy.cutoff_quantities(problem.measure, eps)
    runner = _BatchRunner(problem, cut, h, monitor, x0) if use_batch else None
    if use_batch and workers is not None:
        import numba

        prev = numba.get_num_threads()
        numba.set_num_threads(max(1, min(int(workers), numba.config.NUMBA_NUM_THREADS)))
    else:
        prev = None
    try:
        for start in range(0, m_paths, SHARD_SIZE):
            stop = min(start + SHARD_SIZE, m_paths)
            if use_batch:
                yield runner.run(seed, start, stop)
            else:
                yield _reference_shard(problem, cut, h, seed, start, stop, x0, monitor)
    finally:
        if prev is not None:
            import numba

            numba.set_num_threads(prev)


def _select_engine(problem: PideProblem, monitor, engine: str) -> bool:
    if engine not in ("auto", "batch", "reference"):
        raise ValueError("engine must be one of 'auto', 'batch', 'reference'")
    batch_capable = problem.kernel is not None and (
        monitor is None or isinstance(monitor, AffineMonitor)
    )
    if engine == "batch":
        if not batch_capable:
            raise ValueError("batch engine requires packed kernel coefficients and an affine monitor")
        return True
    if engine == "reference":
        return False
    return batch_capable


class _BatchRunner:
    """Prepares packed arguments for the compiled kernel once per estimate."""

    def __init__(self, problem: PideProblem, cut: levy.CutoffQuantities, h: float, monitor, x0):
        kc = problem.kernel
        d = problem.dim
        if kc.kind == KERNEL_POLY:
            b = np.zeros(3)
            fvec = np.full(3, kc.pack[1])
            self.kpack = np.ascontiguousarray(kc.pack[[0, 2, 3, 4, 5]])
        else:
            b = kc.pack[:d]
            sigma_flat = kc.pack[d : d + d * d]
            fvec = kc.pack[d + d * d : 2 * d + d * d].copy()
            self.kpack = np.ascontiguousarray(np.concatenate([sigma_flat, kc.pack[-2:]]))
        self.kind = kc.kind
        self.d = d
        self.problem = problem
        self.h = float(h)
        self.lam = cut.lambda_eps
        self.p_jump = -math.expm1(-cut.lambda_eps * h)
        self.drift = np.ascontiguousarray(b - fvec * cut.gamma_eps)
        self.fvec = np.ascontiguousarray(fvec)
        self.fbeta = np.ascontiguousarray(fvec * cut.beta_eps)
        self.jtable = levy.jump_quantile_table(problem.measure, cut.eps)
        dom = problem.domain
        self.dom_is_ball = isinstance(dom, Ball)
        self.dom_center = dom.center if self.dom_is_ball else np.zeros(d)
        self.dom_radius2 = dom.radius * dom.radius if self.dom_is_ball else 0.0
        self.monitor_on = monitor is not None
        self.monitor_slope = (
            np.ascontiguousarray(monitor.slopes, dtype=np.float64)
            if self.monitor_on
            else np.zeros(d)
        )
        self.y_bound_tol = math.exp(problem.c_max * (problem.T - problem.t0 + h)) * (1.0 + 1e-12)
        self.max_steps = _default_step_cap(cut.lambda_eps, h, problem.horizon)
        self.x0 = np.ascontiguousarray(x0, dtype=np.float64)

    def run(self, seed: int, start: int, stop: int) -> ShardOutcome:
        n = stop - start
        d = self.d
        out_time = np.empty(n)
        out_x = np.empty((n, d))
        out_y = np.empty(n)
        out_z = np.empty(n)
        out_steps = np.empty(n, dtype=np.int64)
        out_flag = np.empty(n, dtype=np.int64)
        out_min = np.empty((n, d))
        simulate_chains(
            np.uint64(seed),
            start,
            n,
            self.kind,
            self.kpack,
            d,
            self.x0,
            self.problem.t0,
            self.problem.T,
            self.h,
            self.lam,
            self.p_jump,
            self.drift,
            self.fvec,
            self.fbeta,
            self.jtable,
            self.dom_is_ball,
            self.dom_center,
            self.dom_radius2,
            self.monitor_on,
            self.monitor_slope,
            self.y_bound_tol,
            self.max_steps,
            out_time,
            out_x,
            out_y,
            out_z,
            out_steps,
            out_flag,
            out_min,
        )
        if np.any(out_flag == FLAG_STEP_CAP):
            raise RuntimeError(
                f"chains exceeded the step cap ({self.max_steps}); check the configuration"
            )
        if np.any(out_flag == FLAG_Y_BOUND):
            raise RuntimeError("multiplicative functional exceeded its deterministic bound")
        return ShardOutcome(
            start=start,
            stop=stop,
            exit_time=out_time,
            x_exit=out_x,
            y_exit=out_y,
            z_exit=out_z,
            steps=out_steps,
            coord_minima=out_min if self.monitor_on else None,
        )


def _reference_shard(problem, cut, h, seed, start, stop, x0, monitor) -> ShardOutcome:
    n = stop - start
    d = problem.dim
    out_time = np.empty(n)
    out_x = np.empty((n, d))
    out_y = np.empty(n)
    out_z = np.empty(n)
    out_steps = np.empty(n, dtype=np.int64)
    out_min = np.empty((n, d)) if monitor is not None else None
    for i in range(n):
        res = walk.run_chain(problem, cut, h, ChainStream(seed, start + i), x0, monitor=monitor)
        out_time[i] = res.exit_time
        out_x[i] = res.x_exit
        out_y[i] = res.y_exit
        out_z[i] = res.z_exit
        out_steps[i] = res.steps
        if monitor is not None:
            out_min[i] = res.coord_minima
    return ShardOutcome(
        start=start,
        stop=stop,
        exit_time=out_time,
        x_exit=out_x,
        y_exit=out_y,
        z_exit=out_z,
        steps=out_steps,
        coord_minima=out_min,
    )


def estimate(
    problem: PideProblem,
    eps: float,
    h: float,
    m_paths: int,
    seed: int,
    x0,
    monitor: Optional[Callable] = None,
    payoff: Optional[Callable[[ShardOutcome], np.ndarray]] = None,
    workers: Optional[int] = None,
    engine: str = "auto",
) -> McEstimate:
    """Monte Carlo value of the terminal functional over ``m_paths`` chains.

    The default payoff is the solution representation
    ``phi(exit_time, x_exit) * Y + Z``; a caller-supplied ``payoff`` receives
    each :class:`ShardOutcome` and returns one value per path (used by the
    option pricer).

    Raises
    ------
    ValueError
        If ``m_paths < 2`` (the variance estimate needs two paths), the
        start point is outside the domain, or the cutoff is invalid for the
        measure.
    """
    if m_paths < 2:
        raise ValueError("m_paths must be at least 2 for a variance estimate")
    if payoff is None:
        payoff = _solution_payoff(problem)
    shards = []
    for out in shard_outcomes(
        problem, eps, h, m_paths, seed, x0, monitor=monitor, workers=workers, engine=engine
    ):
        values = np.asarray(payoff(out), dtype=np.float64)
        if values.shape != (out.stop - out.start,):
            raise ValueError("payoff must return one value per path")
        acc = _ExactSum()
        acc_sq = _ExactSum()
        acc.add(values)
        acc_sq.add(values * values)
        steps = out.steps
        shards.append(
            ShardAccumulator(
                start=out.start,
                stop=out.stop,
                seed=int(seed),
                payoff_partials=acc.snapshot(),
                payoff_sq_partials=acc_sq.snapshot(),
                steps_sum=int(np.sum(steps)),
                steps_sq_sum=int(np.sum(steps * steps)),
            )
        )
    return merge(shards)


def _solution_payoff(problem: PideProblem) -> Callable[[ShardOutcome], np.ndarray]:
    def pay(out: ShardOutcome) -> np.ndarray:
        phi = np.asarray(problem.boundary_phi(out.exit_time, out.x_exit), dtype=np.float64)
        return phi * out.y_exit + out.z_exit

    return pay


def merge(partials: Sequence[ShardAccumulator]) -> McEstimate:
    """Combine disjoint shard accumulators covering ``0 .. M-1`` into an estimate.

    Because shard sums are exact expansions, the result does not depend on
    how the path range was partitioned.
    """
    if not partials:
        raise ValueError("no shard accumulators to merge")
    shards = sorted(partials, key=lambda s: s.start)
    seed = shards[0].seed
    expected = 0
    for s in shards:
        if s.seed != seed:
            raise ValueError("shards come from different seeds")
        if s.start != expected:
            raise ValueError(
                f"shard ranges must tile 0..M-1 without gaps or overlaps "
                f"(found start {s.start}, expected {expected})"
            )
        if s.stop <= s.start:
            raise ValueError("empty shard range")
        expected = s.stop
    m = expected

    total = _ExactSum()
    total_sq = _ExactSum()
    steps_sum = 0
    steps_sq_sum = 0
    for s in shards:
        total.add(s.payoff_partials)
        total_sq.add(s.payoff_sq_partials)
        steps_sum += s.steps_sum
        steps_sq_sum += s.steps_sq_sum

    mean = total.value / m
    mean_sq = total_sq.value / m
    var_hat = max(0.0, (mean_sq - mean * mean) / m)
    k_mean = steps_sum / m
    k_var = max(0.0, (steps_sq_sum / m - k_mean * k_mean) / m)
    return McEstimate(
        u_hat=mean,
        var_hat=var_hat,
        half_width=2.0 * math.sqrt(var_hat),
        m_paths=m,
        steps_mean=k_mean + 1.0,
        steps_half_width=2.0 * math.sqrt(k_var),
        seed=seed,
    )
