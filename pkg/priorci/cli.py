from __future__ import annotations

import argparse
import logging
import math
import sys
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from pydantic import ValidationError

from priorci.artifacts import (
    McReport,
    McRow,
    RunManifest,
    load_spline_artifact,
    write_json_artifact,
    write_table,
)
from priorci.config import ProblemConfig, check_artifact_agreement
from priorci.errors import (
    ArtifactError,
    ConfigMismatchError,
    ConvergenceError,
    DomainError,
    InsufficientGridError,
    InvalidShapeError,
    SplineConstructionError,
)
from priorci.known_variance import (
    build_family,
    confidence_set,
    efficiency_curve,
    expected_length,
    known_efficiency_curve,
    mu_interval,
    pratt_expected_length,
    pratt_interval,
    standard_interval,
)
from priorci.mc_oracle import (
    IntervalRule,
    mc_coverage,
    mc_expected_length,
    mixed_known_rule,
    pratt_rule,
    spline_rule,
    standard_known_rule,
    standard_t_rule,
)
from priorci.spline_b import MonotoneCubicB
from priorci.types import Interval
from priorci.unknown_variance import (
    bofinger_interval,
    compare_known_unknown,
    coverage,
    coverage_profile,
    efficiency_profile,
    interval_from_data,
    optimize_b,
    reverts_to_standard,
    scaled_expected_length,
    scaled_length_profile,
    standard_t_interval,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FAILURE = 3
EXIT_IO = 4

# Extra theta range a mixed family needs beyond |x| so the inverted set stays inside the grid.
_FAMILY_MARGIN = 8.0
_MC_ABS_TOL = 1e-9

_log = logging.getLogger(__name__)

KnownMethod = Literal["standard", "pratt", "mixed"]
UnknownMethod = Literal["spline", "standard", "bofinger"]
TableMode = Literal["known", "unknown", "compare"]
McRuleName = Literal["standard", "pratt", "mixed", "t", "spline"]


@dataclass(slots=True)
class KnownIntervalResult:
    theta_interval: Interval
    mu_interval: Interval


@dataclass(slots=True)
class UnknownIntervalResult:
    interval: Interval
    reverted: bool | None
    n: int


@dataclass(slots=True)
class OptimizeResult:
    spline_file: Path
    objective: float
    min_coverage: float
    e_at_zero: float
    e_max: float
    iterations: int
    converged: bool


@dataclass(slots=True)
class TableResult:
    csv_file: Path
    manifest_file: Path
    summaries: dict[str, tuple[float, float]]


def interval_known(
    config: ProblemConfig, xbar: float, sigma: float, method: KnownMethod
) -> KnownIntervalResult:
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma!r}.")
    x = xbar / (sigma / math.sqrt(config.n))

    if method == "standard":
        theta_interval = standard_interval(x, config.alpha)
    elif method == "pratt":
        theta_interval = pratt_interval(x, config.alpha)
    elif config.w == 0:
        theta_interval = pratt_interval(x, config.alpha)
    else:
        if abs(x) + _FAMILY_MARGIN > config.theta_grid_max:
            config = _with(config, theta_grid_max=abs(x) + _FAMILY_MARGIN)
        theta_interval = confidence_set(x, build_family(config))

    return KnownIntervalResult(
        theta_interval=theta_interval,
        mu_interval=mu_interval(theta_interval, sigma, config.n),
    )


def optimize_spline(
    config: ProblemConfig, out: Path, warm_start: Literal["standard", "known"] = "standard"
) -> OptimizeResult:
    result = optimize_b(config, warm_start=warm_start)
    curve = efficiency_profile(result.b, config)
    manifest = RunManifest(command="optimize-b", config=config.snapshot(), outputs=[str(out)])
    artifact = result.b.to_artifact(
        config.n,
        config.alpha,
        config.w,
        objective=result.objective,
        min_coverage=result.min_coverage,
        converged=result.converged,
        manifest=manifest,
    )
    write_json_artifact(artifact, out)
    return OptimizeResult(
        spline_file=out,
        objective=result.objective,
        min_coverage=result.min_coverage,
        e_at_zero=curve.e_at_zero,
        e_max=curve.e_max,
        iterations=result.iterations,
        converged=result.converged,
    )


def interval_unknown(
    config: ProblemConfig, xbar: float, s: float, method: UnknownMethod
) -> UnknownIntervalResult:
    if method == "standard":
        interval = standard_t_interval(xbar, s, config.n, config.alpha)
        return UnknownIntervalResult(interval=interval, reverted=None, n=config.n)
    if method == "bofinger":
        interval = bofinger_interval(xbar, s, config.n, config.alpha)
        return UnknownIntervalResult(interval=interval, reverted=None, n=config.n)

    b, _ = _load_spline(config)
    return UnknownIntervalResult(
        interval=interval_from_data(xbar, s, config.n, b),
        reverted=reverts_to_standard(xbar, s, config.n, b),
        n=config.n,
    )


def efficiency_table(
    config: ProblemConfig,
    mode: TableMode,
    theta_max: float,
    step: float,
    out: Path,
    w_values: Sequence[float] | None = None,
    family_out: Path | None = None,
) -> TableResult:
    thetas = _table_thetas(theta_max, step)
    inputs: dict[str, str] = {}
    summaries: dict[str, tuple[float, float]] = {}

    if mode == "known":
        if theta_max > config.theta_grid_max:
            config = _with(config, theta_grid_max=theta_max)
        weights = list(w_values) if w_values else [config.w]
        if family_out is not None and (len(weights) != 1 or weights[0] <= 0):
            raise DomainError("--family-out needs exactly one --w > 0.")
        frame = pd.DataFrame({"theta": thetas})
        for w in weights:
            column = "efficiency" if len(weights) == 1 else f"efficiency_w{w:g}"
            column_config = _with(config, w=w)
            if family_out is None:
                curve = known_efficiency_curve(column_config)
            else:
                family = build_family(column_config)
                curve = efficiency_curve(family)
                family_manifest = RunManifest(
                    command="efficiency-table --mode known",
                    config=column_config.snapshot(),
                    outputs=[str(family_out)],
                )
                family_file = write_table(family.to_frame(), family_out, family_manifest)
                _log.info("Wrote acceptance family to %s (manifest %s).", family_out, family_file)
            values = np.interp(thetas, curve.thetas, curve.values)
            frame[column] = values
            summaries[column] = (curve.e_at_zero, curve.e_max)
    else:
        b, digest = _load_spline(config)
        inputs[str(config.spline_path)] = digest
        if mode == "unknown":
            curve = efficiency_profile(b, config, thetas)
            frame = pd.DataFrame(
                {
                    "theta": thetas,
                    "coverage": coverage_profile(b, config, thetas).coverage,
                    "scaled_length": scaled_length_profile(b, config, thetas),
                    "efficiency": curve.values,
                }
            )
            summaries["efficiency"] = (curve.e_at_zero, curve.e_max)
        else:
            known, unknown = compare_known_unknown(config, b, thetas)
            frame = pd.DataFrame(
                {
                    "theta": thetas,
                    "known_efficiency": known.values,
                    "unknown_efficiency": unknown.values,
                }
            )
            summaries["known_efficiency"] = (known.e_at_zero, known.e_max)
            summaries["unknown_efficiency"] = (unknown.e_at_zero, unknown.e_max)

    manifest = RunManifest(
        command=f"efficiency-table --mode {mode}",
        config=config.snapshot(),
        inputs=inputs,
        outputs=[str(out)],
    )
    manifest_file = write_table(frame, out, manifest)
    return TableResult(csv_file=out, manifest_file=manifest_file, summaries=summaries)


def verify_mc(
    config: ProblemConfig,
    rule_name: McRuleName,
    thetas: Sequence[float],
    reps: int,
    seed: int,
    sigma: float = 1.0,
    raw_samples: bool = False,
) -> McReport:
    """Cross-check quadrature coverage and expected length against simulation at each theta."""
    root_n = math.sqrt(config.n)
    inputs: dict[str, str] = {}
    rule: IntervalRule

    if rule_name == "spline":
        b, digest = _load_spline(config)
        inputs[str(config.spline_path)] = digest
        rule = spline_rule(b, config.n)

        def expected(theta: float) -> tuple[float, float]:
            length = scaled_expected_length(
                theta, b, config.n, config.quadrature_panels, config.quadrature_order
            )
            cover = coverage(theta, b, config.n, config.quadrature_panels, config.quadrature_order)
            return cover, length * sigma / root_n

    elif rule_name == "t":
        rule = standard_t_rule(config.alpha, config.n)
        standard_b = MonotoneCubicB.standard(config.q, config.t_half, config.knot_step)

        def expected(theta: float) -> tuple[float, float]:
            length = scaled_expected_length(theta, standard_b, config.n)
            return 1.0 - config.alpha, length * sigma / root_n

    elif rule_name == "standard":
        rule = standard_known_rule(config.alpha, sigma, config.n)

        def expected(theta: float) -> tuple[float, float]:
            return 1.0 - config.alpha, 2.0 * config.z_half * sigma / root_n

    elif rule_name == "pratt":
        rule = pratt_rule(config.alpha, sigma, config.n)

        def expected(theta: float) -> tuple[float, float]:
            cover = 1.0 if theta == 0 else 1.0 - config.alpha
            return cover, float(pratt_expected_length(theta, config.alpha)) * sigma / root_n

    else:
        family = build_family(config)
        rule = mixed_known_rule(family, sigma, config.n)

        def expected(theta: float) -> tuple[float, float]:
            return 1.0 - config.alpha, expected_length(theta, family) * sigma / root_n

    rows: list[McRow] = []
    for theta in thetas:
        mu = theta * sigma / root_n
        quad_coverage, quad_length = expected(theta)
        estimates = {
            "coverage": (
                quad_coverage,
                mc_coverage(mu, sigma, config.n, rule, reps, seed, raw_samples=raw_samples),
            ),
            "length": (
                quad_length,
                mc_expected_length(mu, sigma, config.n, rule, reps, seed, raw_samples=raw_samples),
            ),
        }
        for quantity, (quadrature, estimate) in estimates.items():
            passed = abs(quadrature - estimate.mean) <= 3.0 * estimate.std_error + _MC_ABS_TOL
            rows.append(
                McRow(
                    theta=theta,
                    quantity=quantity,
                    quadrature=quadrature,
                    mc_mean=estimate.mean,
                    mc_std_error=estimate.std_error,
                    reps=estimate.reps,
                    seed=estimate.seed,
                    passed=passed,
                )
            )

    manifest = RunManifest(command=f"verify-mc --rule {rule_name}", config=config.snapshot(), inputs=inputs)
    return McReport(
        rule=rule_name, rows=rows, passed=all(row.passed for row in rows), manifest=manifest
    )


def cli(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)

    try:
        return args.handler(args)
    except (ValidationError, DomainError, ConfigMismatchError, InsufficientGridError) as exc:
        print(_one_line(exc), file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAILURE
    except (ArtifactError, SplineConstructionError, InvalidShapeError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"{exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    raise SystemExit(cli())


def _run_interval_known(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    result = interval_known(config, args.xbar, args.sigma, args.method)
    print(f"theta scale: {_format_interval(result.theta_interval)}")
    print(f"mu scale:    {_format_interval(result.mu_interval)}")
    return EXIT_OK


def _run_optimize_b(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    result = optimize_spline(config, args.out, warm_start=args.warm_start)
    print(f"objective:    {result.objective:.6g}")
    print(f"min coverage: {result.min_coverage:.6g}")
    print(f"e(0):         {result.e_at_zero:.6g}")
    print(f"e max:        {result.e_max:.6g}")
    print(f"Wrote spline to {result.spline_file}.")
    if not result.converged:
        print(
            f"Optimizer did not converge after {result.iterations} iteration(s); "
            "the best verified iterate was written.",
            file=sys.stderr,
        )
        return EXIT_FAILURE
    return EXIT_OK


def _run_interval_unknown(args: argparse.Namespace) -> int:
    overrides: dict[str, Any] = {}
    if args.data is not None:
        xbar, s, n = _summarize_data(args.data)
        if args.n is not None and args.n != n:
            raise ConfigMismatchError(f"--n {args.n} disagrees with {n} observations in {args.data}.")
        overrides["n"] = n
    else:
        if args.xbar is None or args.s is None:
            raise DomainError("Provide --xbar and --s, or --data.")
        xbar, s = args.xbar, args.s
    if args.method == "spline" and args.spline is None:
        raise DomainError("--method spline needs --spline.")

    config = _config_from_args(args, **overrides)
    result = interval_unknown(config, xbar, s, args.method)
    print(f"interval: {_format_interval(result.interval)}")
    if result.reverted is not None:
        print(f"reverted to standard: {'yes' if result.reverted else 'no'}")
    return EXIT_OK


def _run_efficiency_table(args: argparse.Namespace) -> int:
    w_values = args.w if args.mode == "known" else None
    if args.mode != "known" and args.spline is None:
        raise DomainError(f"--mode {args.mode} needs --spline.")
    config = _config_from_args(args)
    result = efficiency_table(
        config, args.mode, args.theta_max, args.step, args.out, w_values, args.family_out
    )
    for column, (e_at_zero, e_max) in result.summaries.items():
        print(f"{column}: e(0) = {e_at_zero:.6g}, e max = {e_max:.6g}")
    print(f"Wrote {result.csv_file} and {result.manifest_file}.")
    return EXIT_OK


def _run_verify_mc(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    rule_name = args.rule or _default_rule(config)
    report = verify_mc(
        config, rule_name, args.theta, args.reps, args.seed, raw_samples=args.raw_samples
    )
    if args.out is not None:
        write_json_artifact(report, args.out)
    else:
        print(report.model_dump_json(indent=2))
    failures = [row for row in report.rows if not row.passed]
    for row in failures:
        print(
            f"MC disagreement at theta={row.theta:.6g} ({row.quantity}): quadrature "
            f"{row.quadrature:.6g} vs MC {row.mc_mean:.6g} +- {row.mc_std_error:.2g}",
            file=sys.stderr,
        )
    return EXIT_OK if report.passed else EXIT_FAILURE


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="priorci",
        description=(
            "Confidence intervals for a normal mean that use uncertain prior information "
            "that the mean is 0."
        ),
    )
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="Log INFO (-v) or DEBUG (-vv)."
    )
    commands = parser.add_subparsers(dest="command", required=True)

    known = commands.add_parser("interval-known", help="Interval for mu with sigma known.")
    _add_problem_flags(known)
    known.add_argument("--xbar", type=float, required=True, help="Sample mean.")
    known.add_argument("--sigma", type=float, required=True, help="Known standard deviation.")
    known.add_argument("--method", choices=["standard", "pratt", "mixed"], default="mixed")
    known.set_defaults(handler=_run_interval_known)

    optimize = commands.add_parser("optimize-b", help="Optimize the unknown-variance spline b.")
    _add_problem_flags(optimize)
    optimize.add_argument("--out", type=Path, required=True, help="Spline JSON to write.")
    optimize.add_argument(
        "--warm-start",
        choices=["standard", "known"],
        default="standard",
        help="Start from the standard interval or the known-variance mixed interval.",
    )
    optimize.set_defaults(handler=_run_optimize_b)

    unknown = commands.add_parser("interval-unknown", help="Interval for mu with sigma unknown.")
    _add_problem_flags(unknown)
    unknown.add_argument("--xbar", type=float, help="Sample mean.")
    unknown.add_argument("--s", type=float, help="Sample standard deviation.")
    unknown.add_argument(
        "--data", type=Path, help="Whitespace-separated observations; replaces --xbar/--s/--n."
    )
    unknown.add_argument("--method", choices=["spline", "standard", "bofinger"], default="spline")
    unknown.set_defaults(handler=_run_interval_unknown)

    table = commands.add_parser("efficiency-table", help="Write an efficiency table as CSV.")
    _add_problem_flags(table, multiple_w=True)
    table.add_argument("--mode", choices=["known", "unknown", "compare"], default="known")
    table.add_argument("--theta-max", type=float, default=12.0, help="Largest theta in the table.")
    table.add_argument("--step", type=float, default=0.05, help="Theta spacing of the table.")
    table.add_argument("--out", type=Path, required=True, help="CSV file to write.")
    table.add_argument(
        "--family-out",
        type=Path,
        help="Also write the acceptance family (theta, lower, upper, c) as CSV; one --w > 0 only.",
    )
    table.set_defaults(handler=_run_efficiency_table)

    verify = commands.add_parser("verify-mc", help="Cross-check quadrature against Monte Carlo.")
    _add_problem_flags(verify)
    verify.add_argument(
        "--rule",
        choices=["standard", "pratt", "mixed", "t", "spline"],
        help="Interval rule (default: spline with --spline, else mixed, or pratt when w = 0).",
    )
    verify.add_argument(
        "--theta", type=float, nargs="+", default=[0.0, 1.0, 2.0, 5.0], help="Theta values."
    )
    verify.add_argument("--reps", type=int, default=1_000_000, help="Replications per theta.")
    verify.add_argument("--seed", type=int, default=0, help="Seed of the RNG substreams.")
    verify.add_argument(
        "--raw-samples", action="store_true", help="Simulate raw observations, not (xbar, s)."
    )
    verify.add_argument("--out", type=Path, help="Report JSON to write (default: stdout).")
    verify.set_defaults(handler=_run_verify_mc)
    return parser


def _add_problem_flags(parser: argparse.ArgumentParser, multiple_w: bool = False) -> None:
    parser.add_argument("--n", type=int, help="Sample size.")
    parser.add_argument("--alpha", type=float, help="Miscoverage level (default 0.05).")
    if multiple_w:
        parser.add_argument(
            "--w", type=float, nargs="+", help="Weight(s) of the mixed interval; 0 means Pratt's."
        )
    else:
        parser.add_argument("--w", type=float, help="Weight of the mixed interval (default 0.1).")
    parser.add_argument("--q", type=float, help="Half-width of the spline region (default 8).")
    parser.add_argument("--knot-step", type=float, help="Spline knot spacing (default 1).")
    parser.add_argument("--spline", type=Path, help="Spline JSON written by optimize-b.")
    parser.add_argument("--env-file", type=Path, help="Optional .env file with PRIORCI_* settings.")


def _config_from_args(args: argparse.Namespace, **overrides: Any) -> ProblemConfig:
    w = args.w[0] if isinstance(args.w, list) else args.w
    flags = {
        "n": args.n,
        "alpha": args.alpha,
        "w": w,
        "q": args.q,
        "knot_step": args.knot_step,
        "spline_path": args.spline,
    }
    kwargs: dict[str, Any] = {key: value for key, value in flags.items() if value is not None}
    kwargs.update(overrides)
    if args.env_file is not None:
        kwargs["_env_file"] = args.env_file
    return ProblemConfig(**kwargs)


def _with(config: ProblemConfig, **updates: Any) -> ProblemConfig:
    values = {**config.snapshot(), **updates}
    if config.spline_path is not None:
        values["spline_path"] = config.spline_path
    return ProblemConfig(**values)


def _default_rule(config: ProblemConfig) -> McRuleName:
    if config.spline_path is not None:
        return "spline"
    return "mixed" if config.w > 0 else "pratt"


def _load_spline(config: ProblemConfig) -> tuple[MonotoneCubicB, str]:
    if config.spline_path is None:
        raise DomainError("A spline artifact is required (--spline).")
    artifact, digest = load_spline_artifact(config.spline_path)
    check_artifact_agreement(config, artifact)
    return MonotoneCubicB.from_artifact(artifact), digest


def _summarize_data(path: Path) -> tuple[float, float, int]:
    observations = np.loadtxt(path, ndmin=1).ravel()
    if observations.size < 2:
        raise DomainError(f"{path} must contain at least two observations.")
    return float(observations.mean()), float(observations.std(ddof=1)), int(observations.size)


def _table_thetas(theta_max: float, step: float) -> NDArray[np.float64]:
    if theta_max <= 0 or step <= 0:
        raise DomainError("--theta-max and --step must be positive.")
    count = round(theta_max / step)
    return np.arange(count + 1) * step


def _format_interval(interval: Interval) -> str:
    return f"[{interval.lower:.6g}, {interval.upper:.6g}]"


def _one_line(exc: Exception) -> str:
    return " ".join(str(exc).split())


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
