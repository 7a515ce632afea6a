"""
Batch front door: one subcommand per experiment, one report per run.

    python app/main.py <subcommand> [options]

Exit codes: 0 on success, 2 on invalid input or an unwritable output, 3 when a
numerical routine does not converge or an exact check fails. The report file
is written only on success.
"""

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional

import pandas as pd
from pydantic import BaseModel, Field, ValidationError

sys.path.append(os.path.dirname(os.path.abspath(__file__)) + "/../src")

from certify import certify_report, certify_well_spread  # noqa: E402
from config import configure_logging, settings  # noqa: E402
from errors import NoConvergence, ScreeningFailed, SpreadLabError  # noqa: E402
from fano import calibrate_sigma, lower_bound_pipeline  # noqa: E402
from instances import (  # noqa: E402
    CONSTRUCTION_TAGS,
    BundleMeta,
    build_construction,
    gen_counterexamples,
    gen_gaussian_null,
    gen_planted,
    inconsistency_sigma,
)
from lowdeg import (  # noqa: E402
    LowDegParams,
    degree4_distinguish_experiment,
    lowdeg_norm,
    theorem_scaled_params,
)
from matrix_io import (  # noqa: E402
    read_dense_matrix,
    read_rational_matrix,
    write_bundle,
    write_matrix,
)
from noise import NBRParams, SymGeomParams, kl_shift  # noqa: E402
from numerics import orthonormal_basis  # noqa: E402
from regression import ESTIMATORS, gaussian_design_experiment, hardness_experiment  # noqa: E402
from reporting import (  # noqa: E402
    build_envelope,
    lowdeg_frame,
    plot_lowdeg_contributions,
    plot_regression_errors,
    regression_frame,
    write_csv,
    write_json_report,
    write_plot,
)
from spark import (  # noqa: E402
    ConsistencyReport,
    SparkResult,
    compute_spark,
    reduction_consistency_check,
    reduction_delta,
)
from spreadness import SpreadSpec, spread_witness_search, subspace_spread_exact  # noqa: E402

logger = logging.getLogger("spreadlab")

Subcommand = Literal[
    "gen", "spread-check", "certify", "kl", "fano", "lowdeg", "distinguish", "regress", "spark"
]
SUBCOMMANDS = (
    "gen",
    "spread-check",
    "certify",
    "kl",
    "fano",
    "lowdeg",
    "distinguish",
    "regress",
    "spark",
)
GEN_KINDS = ("gaussian", "planted", *CONSTRUCTION_TAGS, "rip-not-spread", "spread-not-rip")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NO_CONVERGENCE = 3


class RunConfig(BaseModel):
    """Everything needed to replay a run."""

    subcommand: Subcommand
    params: Dict[str, Any] = Field(default_factory=dict, description="Subcommand options")
    seed: int = Field(default=0, ge=0, lt=2**64, description="Run seed")
    output: Optional[str] = Field(default=None, description="Report path (directory for gen)")
    format: Literal["json", "csv"] = "json"
    plot: Optional[str] = Field(default=None, description="PNG path for lowdeg and regress")


class GenReport(BaseModel):
    """Files written by the gen subcommand."""

    kind: str
    n: int
    d: int
    seed: int
    files: List[str]
    meta: Optional[BundleMeta] = None


class SparkReport(BaseModel):
    spark: SparkResult
    delta: str = Field(description="Reduction threshold δ as an exact fraction")
    delta_float: float
    consistency: Optional[ConsistencyReport] = None


@dataclass
class RunResult:
    report: BaseModel
    summary: str
    table: Optional[pd.DataFrame] = None
    plot: Optional[Callable[[pd.DataFrame], bytes]] = field(default=None, repr=False)


def _require(params: Dict[str, Any], *names: str) -> None:
    missing = [n for n in names if params.get(n) is None]
    if missing:
        raise ValueError("missing required option(s): " + ", ".join("--" + n for n in missing))


def run_gen(p: Dict[str, Any], seed: int, output: Path) -> RunResult:
    kind = p["kind"]
    _require(p, "n", "d")
    n, d = p["n"], p["d"]
    files: List[str] = []
    meta = None
    if kind == "gaussian":
        files.append(str(write_matrix(output / "design.sprd", gen_gaussian_null(n, d, seed))))
    elif kind == "planted":
        _require(p, "rho", "sigma")
        inst = gen_planted(n, d, NBRParams(rho=p["rho"], sigma=p["sigma"]), seed)
        files.append(str(write_matrix(output / "design.sprd", inst.observed)))
        files.append(str(write_matrix(output / "hidden.sprd", inst.hidden)))
    elif kind in CONSTRUCTION_TAGS:
        _require(p, "alpha")
        sigma = p.get("sigma")
        if sigma is None:
            _require(p, "gamma")
            sigma = calibrate_sigma(kind, p["gamma"], n, d, p["alpha"])
        bundle = build_construction(kind, n, d, p["alpha"], sigma, seed, p["dense_rotation"])
        write_bundle(output, bundle.design, bundle.meta)
        files += [str(output / "design.sprd"), str(output / "meta.json")]
        meta = bundle.meta
    else:
        M = gen_counterexamples(kind, n, d, seed)
        files.append(str(write_matrix(output / "design.sprd", M)))
    report = GenReport(kind=kind, n=n, d=d, seed=seed, files=files, meta=meta)
    return RunResult(report=report, summary=f"gen {kind}: {n}x{d} written to {output}")


def run_spread_check(p: Dict[str, Any], seed: int, output: Path) -> RunResult:
    _require(p, "input", "delta")
    A = read_dense_matrix(p["input"])
    method = p["method"]
    if method == "certificate":
        verdict = certify_well_spread(A, p["delta"], p["threshold"], seed=seed)
    else:
        _require(p, "m")
        B = orthonormal_basis(A)
        spec = SpreadSpec(m=p["m"], delta=p["delta"])
        if method == "exact":
            verdict = subspace_spread_exact(B, spec)
        else:
            verdict = spread_witness_search(B, spec, restarts=p["restarts"], seed=seed)
    summary = (
        f"spread-check {verdict.method}: is_spread={verdict.is_spread} "
        f"m={verdict.m} ratio={verdict.achieved_ratio:.6g}"
    )
    return RunResult(report=verdict, summary=summary)


def run_certify(p: Dict[str, Any], seed: int, output: Path) -> RunResult:
    _require(p, "input", "delta")
    report = certify_report(read_dense_matrix(p["input"]), p["delta"], p["threshold"], seed=seed)
    summary = (
        f"certify: {report.verdict} distortion<={report.distortion_upper:.6g} "
        f"guaranteed_m={report.guaranteed_m}"
    )
    return RunResult(report=report, summary=summary)


def run_kl(p: Dict[str, Any], seed: int, output: Path) -> RunResult:
    _require(p, "alpha", "lam", "shift")
    result = kl_shift(SymGeomParams(lam=p["lam"], alpha=p["alpha"]), p["shift"])
    summary = f"kl: {result.kl:.10g} (D={result.D:.6g}, D'={result.Dprime:.6g})"
    return RunResult(report=result, summary=summary)


def run_fano(p: Dict[str, Any], seed: int, output: Path) -> RunResult:
    _require(p, "construction", "n", "d", "alpha", "gamma")
    sigma = p.get("sigma")
    if p["inconsistency"]:
        sigma = inconsistency_sigma(p["construction"], p["n"], p["d"], p["alpha"])
    report = lower_bound_pipeline(
        p["construction"],
        p["n"],
        p["d"],
        p["alpha"],
        p["gamma"],
        pairs_to_sample=p["pairs"],
        seed=seed,
        sigma=sigma,
    )
    summary = (
        f"fano {report.construction}: bound={report.bound:.6g} "
        f"gamma={report.gamma_target:g} meets={report.meets_gamma}"
    )
    return RunResult(report=report, summary=summary)


def run_lowdeg(p: Dict[str, Any], seed: int, output: Path) -> RunResult:
    _require(p, "n", "rho")
    scaled = theorem_scaled_params(p["n"], p["rho"])
    params = LowDegParams(
        n=p["n"],
        d=scaled.d if p.get("d") is None else p["d"],
        rho=p["rho"],
        sigma=scaled.sigma if p.get("sigma") is None else p["sigma"],
        D=scaled.D if p.get("degree") is None else p["degree"],
    )
    report = lowdeg_norm(params, mode=p["mode"])
    return RunResult(
        report=report,
        summary=f"lowdeg {report.method}: total={report.total:.10g} D={params.D}",
        table=lowdeg_frame(report),
        plot=plot_lowdeg_contributions,
    )


def run_distinguish(p: Dict[str, Any], seed: int, output: Path) -> RunResult:
    _require(p, "n", "d", "rho", "sigma")
    report = degree4_distinguish_experiment(
        p["n"],
        p["d"],
        NBRParams(rho=p["rho"], sigma=p["sigma"]),
        p["trials"],
        seed,
        alternative=p["alternative"],
    )
    separation = "undefined" if report.separation is None else f"{report.separation:.4f}"
    return RunResult(report=report, summary=f"distinguish: separation={separation}")


def run_regress(p: Dict[str, Any], seed: int, output: Path) -> RunResult:
    _require(p, "n", "d", "alpha")
    if p["design"] == "gaussian":
        _require(p, "lam")
        noise = SymGeomParams(lam=p["lam"], alpha=p["alpha"], sigma=p.get("sigma") or 1.0)
        report = gaussian_design_experiment(
            p["n"], p["d"], noise, p["estimator"], p["seeds"], seed, p.get("tuning")
        )
    else:
        _require(p, "gamma")
        report = hardness_experiment(
            p["design"],
            p["n"],
            p["d"],
            p["alpha"],
            p["gamma"],
            estimator=p["estimator"],
            seeds=p["seeds"],
            seed=seed,
            control=p["control"],
            tuning=p.get("tuning"),
        )
    summary = (
        f"regress {report.design}: mean={report.mean_error:.6g} "
        f"median={report.median_error:.6g} over {report.seeds} seeds"
    )
    return RunResult(
        report=report, summary=summary, table=regression_frame(report), plot=plot_regression_errors
    )


def run_spark(p: Dict[str, Any], seed: int, output: Path) -> RunResult:
    _require(p, "input")
    A = read_rational_matrix(p["input"])
    result = compute_spark(A)
    delta = reduction_delta(A)
    consistency = None if p.get("m") is None else reduction_consistency_check(A, p["m"])
    report = SparkReport(
        spark=result, delta=str(delta), delta_float=float(delta), consistency=consistency
    )
    spark_text = "inf" if result.spark is None else str(result.spark)
    summary = f"spark: {spark_text} delta={float(delta):.12g}"
    if consistency is not None:
        summary += f" consistent={consistency.passed}"
    return RunResult(report=report, summary=summary)


HANDLERS: Dict[str, Callable[[Dict[str, Any], int, Path], RunResult]] = {
    "gen": run_gen,
    "spread-check": run_spread_check,
    "certify": run_certify,
    "kl": run_kl,
    "fano": run_fano,
    "lowdeg": run_lowdeg,
    "distinguish": run_distinguish,
    "regress": run_regress,
    "spark": run_spark,
}


def default_output(config: RunConfig) -> Path:
    if config.subcommand == "gen":
        return Path(settings.REPORT_DIR) / f"gen-{config.params['kind']}-seed{config.seed}"
    return Path(settings.REPORT_DIR) / f"{config.subcommand}-seed{config.seed}.{config.format}"


def run(config: RunConfig) -> int:
    """
    Execute one run and write its report.

    Args:
        config: Validated run configuration

    Returns:
        Process exit code
    """
    output = Path(config.output) if config.output else default_output(config)
    try:
        result = HANDLERS[config.subcommand](config.params, config.seed, output)
        envelope = build_envelope(
            config.subcommand, config.model_dump(mode="json"), config.seed, result.report
        )
        report_path = output / "report.json" if config.subcommand == "gen" else output
        if config.format == "csv" and config.subcommand != "gen":
            table = result.table
            if table is None:
                table = pd.json_normalize(envelope["report"])
            write_csv(report_path, table)
        else:
            write_json_report(report_path, envelope)
        if config.plot and result.plot is not None and result.table is not None:
            write_plot(config.plot, result.plot(result.table))
    except (NoConvergence, ScreeningFailed, ArithmeticError) as e:
        logger.error("%s did not converge: %s", config.subcommand, e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (ValidationError, ValueError, SpreadLabError) as e:
        logger.error("%s rejected its input: %s", config.subcommand, e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        logger.error("%s could not write its output: %s", config.subcommand, e)
        print(f"error: cannot write {e.filename or output}: {e.strerror or e}", file=sys.stderr)
        return EXIT_INVALID

    print(result.summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spreadlab", description=__doc__.splitlines()[1])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="Run seed")
    common.add_argument("--output", help="Report path (directory for gen)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--log-level", help="Override LOG_LEVEL")
    common.add_argument("--plot", help="Write a PNG figure (lowdeg, regress)")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    gen = sub.add_parser("gen", parents=[common], help="Generate a matrix or construction")
    gen.add_argument("--kind", choices=GEN_KINDS, required=True)
    gen.add_argument("--n", type=int)
    gen.add_argument("--d", type=int)
    gen.add_argument("--alpha", type=float)
    gen.add_argument("--sigma", type=float)
    gen.add_argument("--gamma", type=float)
    gen.add_argument("--rho", type=float)
    gen.add_argument("--dense-rotation", action="store_true")

    spread = sub.add_parser("spread-check", parents=[common], help="Decide spreadness of a span")
    spread.add_argument("--input", required=True)
    spread.add_argument("--m", type=int)
    spread.add_argument("--delta", type=float, required=True)
    spread.add_argument(
        "--method", choices=("exact", "heuristic", "certificate"), default="heuristic"
    )
    spread.add_argument("--restarts", type=int)
    spread.add_argument("--threshold", type=float)

    cert = sub.add_parser("certify", parents=[common], help="Certify spreadness via 2->4 norm")
    cert.add_argument("--input", required=True)
    cert.add_argument("--delta", type=float, required=True)
    cert.add_argument("--threshold", type=float)

    kl = sub.add_parser("kl", parents=[common], help="KL divergence of a shifted noise law")
    kl.add_argument("--alpha", type=float, required=True)
    kl.add_argument("--lambda", dest="lam", type=float, required=True)
    kl.add_argument("--shift", type=int, default=1)

    fano = sub.add_parser("fano", parents=[common], help="Fano lower bound of a construction")
    fano.add_argument("--construction", choices=CONSTRUCTION_TAGS, required=True)
    fano.add_argument("--n", type=int, required=True)
    fano.add_argument("--d", type=int, required=True)
    fano.add_argument("--alpha", type=float, required=True)
    fano.add_argument("--gamma", type=float, required=True)
    fano.add_argument("--pairs", type=int, default=100)
    fano.add_argument("--sigma", type=float)
    fano.add_argument(
        "--inconsistency", action="store_true", help="Use the inconsistency amplitude"
    )

    low = sub.add_parser("lowdeg", parents=[common], help="Low-degree likelihood ratio norm")
    low.add_argument("--n", type=int, required=True)
    low.add_argument("--rho", type=float, required=True)
    low.add_argument("--d", type=int)
    low.add_argument("--sigma", type=float)
    low.add_argument("--degree", type=int)
    low.add_argument("--mode", choices=("exact-dp", "paper-bound"), default="exact-dp")

    dist = sub.add_parser(
        "distinguish", parents=[common], help="Degree-4 distinguishing experiment"
    )
    dist.add_argument("--n", type=int, required=True)
    dist.add_argument("--d", type=int, required=True)
    dist.add_argument("--rho", type=float, required=True)
    dist.add_argument("--sigma", type=float, required=True)
    dist.add_argument("--trials", type=int, default=200)
    dist.add_argument("--alternative", choices=("planted", "null"), default="planted")

    reg = sub.add_parser("regress", parents=[common], help="Oblivious regression simulation")
    reg.add_argument("--design", choices=(*CONSTRUCTION_TAGS, "gaussian"), required=True)
    reg.add_argument("--n", type=int, required=True)
    reg.add_argument("--d", type=int, required=True)
    reg.add_argument("--alpha", type=float, required=True)
    reg.add_argument("--gamma", type=float)
    reg.add_argument("--lambda", dest="lam", type=float)
    reg.add_argument("--sigma", type=float)
    reg.add_argument("--estimator", choices=ESTIMATORS, default="huber-irls")
    reg.add_argument("--seeds", type=int, default=100)
    reg.add_argument("--tuning", type=float)
    reg.add_argument(
        "--control", action="store_true", help="Gaussian design, same noise and parameters"
    )

    spark = sub.add_parser("spark", parents=[common], help="Exact spark of a rational matrix")
    spark.add_argument("--input", required=True)
    spark.add_argument("--m", type=int, help="Also check kernel spreadness at this m")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    globals_ = {"subcommand", "seed", "output", "format", "log_level", "plot"}
    params = {k: v for k, v in vars(args).items() if k not in globals_}
    try:
        config = RunConfig(
            subcommand=args.subcommand,
            params=params,
            seed=args.seed,
            output=args.output,
            format=args.format,
            plot=args.plot,
        )
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
