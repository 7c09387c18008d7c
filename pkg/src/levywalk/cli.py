"""Experiment runner: convergence sweeps and option pricing as CSV.

Subcommands
-----------
``nonsingular``  step-size sweep on the finite-activity benchmark problem.
``singular``     cutoff sweep on the singular-measure benchmark problem.
``sweep``        like ``singular`` but over several step-cap rules, with the
                 error/cost profile columns attached per row.
``fx``           barrier basket option prices across cutoffs, plus a
                 martingale diagnostic per currency.

Configuration is a flat ``key = value`` text file (``#`` starts a comment,
lists are comma-separated); every key has a built-in default, and the
``--seed/--paths/--out/--workers`` flags override the file.  Output is a
UTF-8 CSV with a header row, numbers serialized to 17 significant digits,
and ``#fit``/``#martingale`` footer records carrying diagnostics.  Re-running
a subcommand with the same configuration and seed writes a byte-identical
file.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import fx as fxmod
from . import mc, theory
from .levy import SingularTempered, cutoff_quantities
from .model import nonsingular_problem, singular_problem

__all__ = ["ConfigError", "DEFAULT_SEED", "parse_config", "fit_loglog", "main"]

#: Fixed default seed so published CSVs are reproducible without flags.
DEFAULT_SEED = 123456789

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(Exception):
    """Bad configuration file or option values."""


def parse_config(path: str | Path) -> dict:
    """Parse a flat ``key = value`` file into typed values.

    Scalars become int or float when they parse as such; comma-separated
    values become lists (elementwise typed); everything else stays a string.
    """
    cfg: dict = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        cfg[key] = _parse_value(value.strip())
    return cfg


def _parse_value(text: str):
    if "," in text:
        return [_parse_scalar(part.strip()) for part in text.split(",") if part.strip()]
    return _parse_scalar(text)


def _parse_scalar(text: str):
    for typ in (int, float):
        try:
            return typ(text)
        except ValueError:
            continue
    return text


def _as_list(value) -> list:
    return list(value) if isinstance(value, list) else [value]


def _as_floats(cfg: dict, key: str, default: list[float]) -> list[float]:
    try:
        return [float(v) for v in _as_list(cfg.get(key, default))]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r} must be numeric") from exc


def _as_float(cfg: dict, key: str, default: float) -> float:
    value = cfg.get(key, default)
    if isinstance(value, list):
        raise ConfigError(f"config key {key!r} must be a scalar")
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r} must be numeric") from exc


def _as_int(cfg: dict, key: str, default: int) -> int:
    value = _as_float(cfg, key, default)
    if value != int(value):
        raise ConfigError(f"config key {key!r} must be an integer")
    return int(value)


def fit_loglog(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope and intercept of ``log10 y`` against ``log10 x``.

    Pairs with a nonpositive coordinate are dropped; with fewer than two
    usable points both outputs are NaN.
    """
    pts = [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0]
    if len(pts) < 2:
        return math.nan, math.nan
    lx = np.log10([p[0] for p in pts])
    ly = np.log10([p[1] for p in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path: str | Path, header: Sequence[str], rows, footers) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    lines += list(footers)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _resolve_h(rule, eps: float, alpha: float, horizon: float) -> float:
    if isinstance(rule, str):
        if rule == "horizon":
            return horizon
        if rule == "optimal":
            return theory.optimal_h(eps, alpha, horizon)
        raise ConfigError(f"unknown h rule {rule!r} (use 'horizon', 'optimal', or a number)")
    value = float(rule)
    if value <= 0:
        raise ConfigError("numeric h rule must be strictly positive")
    return value


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def run_nonsingular(cfg: dict, workers: Optional[int] = None):
    problem = nonsingular_problem(
        f=_as_float(cfg, "f", 0.1),
        c_plus=_as_float(cfg, "c_plus", 30.0),
        c_minus=_as_float(cfg, "c_minus", 1.0),
        mu=_as_float(cfg, "mu", 3.0),
        T=_as_float(cfg, "T", 1.0),
        t0=_as_float(cfg, "t0", 0.0),
    )
    h_grid = _as_floats(cfg, "h_grid", [0.1, 0.05, 0.025, 0.01])
    m_paths = _as_int(cfg, "m_paths", 4_000_000)
    seed = _as_int(cfg, "seed", DEFAULT_SEED)
    x0 = np.asarray(_as_floats(cfg, "x0", [0.0, 0.0, 0.0]))
    reference = float(problem.exact_solution(problem.t0, x0))

    rows = []
    for h in h_grid:
        est = mc.estimate(problem, 0.0, h, m_paths, seed, x0, workers=workers)
        rows.append(
            (h, est.u_hat, est.half_width, abs(est.u_hat - reference), est.steps_mean, est.steps_half_width)
        )
    slope, intercept = fit_loglog([r[0] for r in rows], [r[3] for r in rows])
    header = ["h", "u_hat", "half_width", "error", "steps_mean", "steps_half_width"]
    footers = [f"#fit,error_vs_h_slope,{_fmt(slope)},{_fmt(intercept)}"]
    return header, rows, footers


def _singular_rows(problem, eps_grid, rule, m_paths, seed, x0, workers):
    alpha = problem.measure.alpha
    reference = float(problem.exact_solution(problem.t0, x0))
    rows = []
    for eps in eps_grid:
        h = _resolve_h(rule, eps, alpha, problem.horizon)
        cut = cutoff_quantities(problem.measure, eps)
        est = mc.estimate(problem, eps, h, m_paths, seed, x0, workers=workers)
        rows.append(
            (
                eps,
                h,
                est.u_hat,
                est.half_width,
                abs(est.u_hat - reference),
                cut.lambda_eps,
                cut.gamma_eps,
                est.steps_mean,
                theory.cost(cut.lambda_eps, h),
            )
        )
    return rows


def run_singular(cfg: dict, workers: Optional[int] = None):
    problem = singular_problem(
        f=_as_float(cfg, "f", 0.2),
        c_plus=_as_float(cfg, "c_plus", 0.1),
        c_minus=_as_float(cfg, "c_minus", 1.0),
        mu=_as_float(cfg, "mu", 3.0),
        alpha=_as_float(cfg, "alpha", 0.5),
        T=_as_float(cfg, "T", 1.0),
        t0=_as_float(cfg, "t0", 0.0),
    )
    eps_grid = _as_floats(
        cfg, "eps_grid", [0.0025, 0.001, 0.0005, 0.00025, 0.0001, 0.00005, 0.000025, 0.00001]
    )
    rule = cfg.get("h_rule", "horizon")
    m_paths = _as_int(cfg, "m_paths", 4_000_000)
    seed = _as_int(cfg, "seed", DEFAULT_SEED)
    x0 = np.asarray(_as_floats(cfg, "x0", [0.0, 0.0, 0.0]))
    rows = _singular_rows(problem, eps_grid, rule, m_paths, seed, x0, workers)
    header = [
        "eps", "h", "u_hat", "half_width", "error",
        "lambda_eps", "gamma_eps", "steps_mean", "cost",
    ]
    s_eps, i_eps = fit_loglog([r[0] for r in rows], [r[4] for r in rows])
    s_cost, i_cost = fit_loglog([r[8] for r in rows], [r[4] for r in rows])
    footers = [
        f"#fit,error_vs_eps_slope,{_fmt(s_eps)},{_fmt(i_eps)}",
        f"#fit,error_vs_cost_slope,{_fmt(s_cost)},{_fmt(i_cost)}",
    ]
    return header, rows, footers


def run_sweep(cfg: dict, workers: Optional[int] = None):
    problem = singular_problem(
        f=_as_float(cfg, "f", 1.0),
        c_plus=_as_float(cfg, "c_plus", 1.0),
        c_minus=_as_float(cfg, "c_minus", 25.0),
        mu=_as_float(cfg, "mu", 3.0),
        alpha=_as_float(cfg, "alpha", 1.5),
        T=_as_float(cfg, "T", 1.0),
        t0=_as_float(cfg, "t0", 0.0),
    )
    eps_grid = _as_floats(cfg, "eps_grid", [0.2, 0.12, 0.07, 0.04])
    rules_cfg = cfg.get("h_rules", ["horizon", "optimal"])
    rules = _as_list(rules_cfg)
    m_paths = _as_int(cfg, "m_paths", 400_000)
    seed = _as_int(cfg, "seed", DEFAULT_SEED)
    x0 = np.asarray(_as_floats(cfg, "x0", [0.0, 0.0, 0.0]))

    header = [
        "h_rule", "eps", "h", "u_hat", "half_width", "error", "lambda_eps", "gamma_eps",
        "steps_mean", "cost", "term_restricted", "term_boundary", "term_smalljump",
    ]
    rows = []
    footers = []
    for rule in rules:
        label = rule if isinstance(rule, str) else _fmt(float(rule))
        base = _singular_rows(problem, eps_grid, rule, m_paths, seed, x0, workers)
        for r in base:
            profile = theory.bias_profile(problem.measure, r[0], r[1])
            rows.append(
                (label, *r, profile.term_restricted, profile.term_boundary, profile.term_smalljump)
            )
        s_cost, i_cost = fit_loglog([r[8] for r in base], [r[4] for r in base])
        footers.append(f"#fit,{label},error_vs_cost_slope,{_fmt(s_cost)},{_fmt(i_cost)}")
    return header, rows, footers


def run_fx(cfg: dict, workers: Optional[int] = None):
    market_default = fxmod.gbp_basket_market()
    option_default = fxmod.gbp_basket_option()
    corr_cfg = cfg.get("corr")
    if corr_cfg is not None:
        corr = _corr_from_upper(np.asarray([float(v) for v in _as_list(corr_cfg)]))
    else:
        corr = market_default.corr
    market = fxmod.MarketData(
        spots=_as_floats(cfg, "spots", list(market_default.spots)),
        foreign_rates=_as_floats(cfg, "foreign_rates", list(market_default.foreign_rates)),
        domestic_rate=_as_float(cfg, "domestic_rate", market_default.domestic_rate),
        vols=_as_floats(cfg, "vols", list(market_default.vols)),
        corr=corr,
        pair_names=tuple(_as_list(cfg.get("pairs", list(market_default.pair_names)))),
    )
    option = fxmod.BasketOption(
        barriers=_as_floats(cfg, "barriers", list(option_default.barriers)),
        weights=_as_floats(cfg, "weights", list(option_default.weights)),
        strike=_as_float(cfg, "strike", option_default.strike),
        t0=_as_float(cfg, "t0", option_default.t0),
        T=_as_float(cfg, "T", option_default.T),
    )
    measure = SingularTempered(
        c_plus=_as_float(cfg, "c_plus", 0.3),
        c_minus=_as_float(cfg, "c_minus", 1.2),
        mu=_as_float(cfg, "mu", 3.0),
        alpha=_as_float(cfg, "alpha", 1.5),
    )
    eps_grid = _as_floats(cfg, "eps_grid", [0.2, 0.14, 0.1])
    rule = cfg.get("h_rule", "optimal")
    m_paths = _as_int(cfg, "m_paths", 200_000)
    seed = _as_int(cfg, "seed", DEFAULT_SEED)
    horizon = option.T - option.t0

    rows = []
    params = None
    for eps in eps_grid:
        h = _resolve_h(rule, eps, measure.alpha, horizon)
        params = fxmod.JumpModelParams(
            jump_factors=np.asarray(_as_floats(cfg, "jump_factors", [0.10, 0.15, 0.05, 0.12])),
            measure=measure,
            eps=eps,
            h=h,
        )
        est = fxmod.price_down_and_in_put(market, option, params, m_paths, seed, workers=workers)
        rows.append((eps, h, est.u_hat, est.half_width, est.steps_mean))

    mart_paths = _as_int(cfg, "martingale_paths", m_paths)
    mart_eps = _as_float(cfg, "martingale_eps", eps_grid[-1])
    mart_h = _resolve_h(rule, mart_eps, measure.alpha, horizon)
    mart_params = fxmod.JumpModelParams(
        jump_factors=params.jump_factors, measure=measure, eps=mart_eps, h=mart_h
    )
    diags = fxmod.martingale_diagnostic(
        market, mart_params, option.t0, option.T, mart_paths, seed, workers=workers
    )
    header = ["eps", "h", "price", "half_width", "steps_mean"]
    footers = [
        f"#martingale,{d.pair},{_fmt(d.mean_discounted)},{_fmt(d.spot)},{_fmt(d.half_width)}"
        for d in diags
    ]
    return header, rows, footers


def _corr_from_upper(upper: np.ndarray) -> np.ndarray:
    # strict upper triangle, row-major: (0,1),(0,2),(0,3),(1,2),(1,3),(2,3) for n=4
    m = upper.size
    n = int((1 + math.isqrt(1 + 8 * m)) // 2)
    if n * (n - 1) // 2 != m:
        raise ConfigError("corr must list the strict upper triangle row by row")
    corr = np.eye(n)
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            corr[i, j] = corr[j, i] = upper[k]
            k += 1
    return corr


_EXPERIMENTS = {
    "nonsingular": run_nonsingular,
    "singular": run_singular,
    "sweep": run_sweep,
    "fx": run_fx,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="levywalk",
        description="Monte Carlo experiments for jump-driven parabolic problems (CSV output).",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in _EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="flat key = value config file")
        p.add_argument("--out", type=str, default=None, help="output CSV path")
        p.add_argument("--seed", type=int, default=None, help="64-bit seed (overrides config)")
        p.add_argument("--paths", type=int, default=None, help="Monte Carlo paths (overrides config)")
        p.add_argument("--workers", type=int, default=None, help="worker thread cap")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config) if args.config else {}
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.paths is not None:
            cfg["m_paths"] = args.paths
        out_path = args.out or cfg.get("out") or f"{args.experiment}.csv"
        cfg_experiment = cfg.get("experiment", args.experiment)
        if cfg_experiment != args.experiment:
            raise ConfigError(
                f"config is for experiment {cfg_experiment!r}, invoked as {args.experiment!r}"
            )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        header, rows, footers = _EXPERIMENTS[args.experiment](cfg, workers=args.workers)
        write_csv(out_path, header, rows, footers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - surfaced as a runtime failure exit code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
