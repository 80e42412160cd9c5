"""Command-line interface.

Subcommands: fit (two-step estimation on CSV data), simulate (synthetic
datasets with ground truth), evaluate (support-recovery scoring and sweep
curves), study (replicated simulate-fit-evaluate with aggregation).

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 partial failure
(a report was still written). Outputs are fully determined by the inputs and
the seed; timing is reported on stderr only so files stay byte-reproducible.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._io import (
    format_value,
    read_edges,
    read_matrix,
    write_edges,
    write_manifest,
    write_matrix,
)
from .adjust import Dataset
from .edges import EdgePair
from .errors import AntacError, DimensionMismatch, DomainError
from .inference import SupportMask
from .metrics import (
    compute_metrics,
    confusion,
    curve,
    default_pvalue_grid,
    default_xi0_grid,
)
from .pipeline import (
    FitOptions,
    fit_dataset,
    run_study,
    study_config_from_mapping,
)
from .simgen import ModelSpec, make_truth, simulate_dataset
from .numerics import RngStream

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4

THREADS_ENV = "ANTAC_THREADS"


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(value, 1)


def _parse_edge_spec(spec: str, p: int) -> list[EdgePair]:
    """Parse '1-2,1-3' (1-based, inclusive) into pairs."""
    pairs = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        parts = token.split("-")
        if len(parts) != 2:
            raise DomainError(f"malformed edge token {token!r}; expected I-J")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise DomainError(f"malformed edge token {token!r}") from None
        if not (1 <= i < j <= p):
            raise DomainError(f"edge {token!r} outside 1..{p}")
        pairs.append(EdgePair(i - 1, j - 1))
    if not pairs:
        raise DomainError(f"edge spec {spec!r} selects no pairs")
    return pairs


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="antac",
        description="Covariate-adjusted Gaussian graphical model estimation",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="two-step estimation on CSV data")
    fit.add_argument("--x", help="covariate CSV (omit for no covariates)")
    fit.add_argument("--y", required=True, help="response CSV")
    fit.add_argument("--out", required=True, help="output directory")
    fit.add_argument("--edges", help="edge subset, e.g. '1-2,1-3' (1-based)")
    fit.add_argument("--xi0", type=float, default=2.0)
    fit.add_argument("--lambda1", type=float, default=None, dest="lambda1")
    fit.add_argument("--lambda2", type=float, default=None, dest="lambda2")
    fit.add_argument(
        "--lambda1-mode", default="finite_sample", choices=["finite_sample", "asymptotic"]
    )
    fit.add_argument(
        "--lambda2-mode",
        default="support_recovery",
        choices=["estimation", "support_recovery", "asymptotic"],
    )
    fit.add_argument("--s-max1", type=float, default=None)
    fit.add_argument("--s-max2", type=float, default=None)
    fit.add_argument("--fdr", type=float, default=0.05)
    fit.add_argument("--threads", type=int, default=None)
    fit.add_argument("--center", action="store_true")

    sim = sub.add_parser("simulate", help="generate synthetic data with ground truth")
    sim.add_argument(
        "--family",
        required=True,
        choices=["table_one", "homogeneous", "magnified_block", "hetero_product", "custom"],
    )
    sim.add_argument("--out", required=True)
    sim.add_argument("--p", type=int, default=None)
    sim.add_argument("--q", type=int, default=None)
    sim.add_argument("--n", type=int, default=None)
    sim.add_argument("--pi", type=float, default=None, help="off-diagonal density")
    sim.add_argument("--gamma-prob", type=float, default=None)
    sim.add_argument("--diag", type=float, default=None)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--replicates", type=int, default=1)

    ev = sub.add_parser("evaluate", help="score an edge table against a truth")
    ev.add_argument("--edges", required=True, help="edges.csv from fit")
    ev.add_argument("--truth", required=True, help="signed support matrix CSV")
    ev.add_argument("--out", required=True)
    ev.add_argument("--sweep", choices=["pvalue", "xi0"], default=None)
    ev.add_argument("--curve", choices=["roc", "pr"], default=None)
    ev.add_argument("--grid-points", type=int, default=50)

    study = sub.add_parser("study", help="replicated simulate-fit-evaluate")
    study.add_argument("--config", required=True, help="JSON study config")
    study.add_argument("--out", default=None, help="output directory override")
    study.add_argument("--threads", type=int, default=None)
    return parser


def _resolve_threads(flag) -> int:
    return flag if flag is not None and flag >= 1 else _default_threads()


def _cmd_fit(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    y = read_matrix(Path(args.y))
    x = read_matrix(Path(args.x)) if args.x else np.zeros((y.shape[0], 0))
    dataset = Dataset(x=x, y=y)
    pairs = _parse_edge_spec(args.edges, dataset.p) if args.edges else None
    threads = _resolve_threads(args.threads)
    options = FitOptions(
        lambda1_mode=args.lambda1_mode,
        lambda1_value=args.lambda1,
        lambda2_mode=args.lambda2_mode,
        lambda2_value=args.lambda2,
        s_max1=args.s_max1,
        s_max2=args.s_max2,
        xi0=args.xi0,
        pairs=pairs,
        parallelism=threads,
        center=args.center,
        keep_beta=False,
    )
    started = time.perf_counter()
    fit = fit_dataset(dataset, options)
    elapsed = time.perf_counter() - started

    rows = []
    n = fit.precision.n
    for edge, qvalue in zip(fit.precision.edges, fit.qvalues):
        pr = (edge.pair.i, edge.pair.j)
        rows.append(
            {
                "i": edge.pair.i + 1,
                "j": edge.pair.j + 1,
                "omega_ij": edge.omega_ij,
                "omega_ii": edge.omega_ii,
                "omega_jj": edge.omega_jj,
                "se": math.sqrt(edge.fisher_var_inv / n),
                "z": edge.z_score,
                "pvalue": edge.p_value,
                "qvalue": float(qvalue),
                "partial_corr": edge.partial_corr,
                "selected": pr in fit.mask.selected,
            }
        )
    write_edges(out_dir / "edges.csv", rows)
    write_matrix(out_dir / "omega_assembled.csv", fit.precision.assembled)
    write_matrix(out_dir / "omega_thresholded.csv", fit.thresholded.matrix)

    failed_cols = list(fit.adjustment.failed_columns)
    pair_errors = {
        f"{pr.i + 1}-{pr.j + 1}": msg for pr, msg in fit.precision.errors.items()
    }
    if args.s_max1 is not None:
        s_max1 = float(args.s_max1)
    elif dataset.q >= 2:
        s_max1 = min(math.sqrt(dataset.n) / math.log(dataset.q), dataset.q / 2.0)
    else:
        s_max1 = float("nan")
    s_max2 = (
        float(args.s_max2)
        if args.s_max2 is not None
        else min(math.sqrt(dataset.n) / math.log(dataset.p), dataset.p / 2.0)
    )
    manifest = {
        "command": "fit",
        "version": __version__,
        "n": dataset.n,
        "p": dataset.p,
        "q": dataset.q,
        "x": args.x or "",
        "y": args.y,
        "edges_requested": args.edges or "all",
        "center": int(args.center),
        "lambda1": format_value(fit.lambda1_value),
        "lambda1_source": fit.lambda1_source,
        "lambda2": format_value(fit.lambda2_value),
        "lambda2_source": fit.lambda2_source,
        "s_max1": format_value(s_max1) if dataset.q else "not_applicable",
        "s_max1_source": "override" if args.s_max1 is not None else "default",
        "s_max2": format_value(s_max2),
        "s_max2_source": "override" if args.s_max2 is not None else "default",
        "xi0": format_value(args.xi0),
        "fdr_alpha": format_value(args.fdr),
        "failed_columns": ",".join(str(c + 1) for c in failed_cols),
        "pair_errors": len(pair_errors),
    }
    write_manifest(out_dir / "manifest.txt", manifest)
    print(f"fit: {len(rows)} edges in {elapsed:.2f}s", file=sys.stderr)
    for key, msg in pair_errors.items():
        print(f"fit: pair {key} failed: {msg}", file=sys.stderr)
    if failed_cols or pair_errors:
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_simulate(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    kwargs = {"family": args.family, "seed": args.seed}
    for key, value in (
        ("p", args.p),
        ("q", args.q),
        ("n", args.n),
        ("omega_prob", args.pi),
        ("gamma_prob", args.gamma_prob),
        ("diag_value", args.diag),
    ):
        if value is not None:
            kwargs[key] = value
    if args.family in ("magnified_block", "hetero_product"):
        dims = {"magnified_block": (150, 100), "hetero_product": (200, 100)}[args.family]
        kwargs.setdefault("p", dims[0])
        kwargs.setdefault("q", dims[1])
        kwargs.setdefault("n", 300)
    spec = ModelSpec(**kwargs)
    truth = make_truth(spec, RngStream(spec.seed, 0))

    sign_matrix = np.zeros_like(truth.omega)
    for (i, j), sign in truth.support.signs.items():
        sign_matrix[i, j] = sign
        sign_matrix[j, i] = sign
    for rep in range(1, args.replicates + 1):
        rep_dir = out_dir / f"replicate_{rep:03d}"
        rep_dir.mkdir(parents=True, exist_ok=True)
        dataset = simulate_dataset(truth, spec.n, RngStream(spec.seed, rep))
        write_matrix(rep_dir / "X.csv", dataset.x, prefix="x")
        write_matrix(rep_dir / "Y.csv", dataset.y, prefix="y")
        write_matrix(rep_dir / "gamma_true.csv", truth.gamma, prefix="g")
        write_matrix(rep_dir / "omega_true.csv", truth.omega)
        write_matrix(rep_dir / "support_true.csv", sign_matrix, prefix="s")
    manifest = {
        "command": "simulate",
        "version": __version__,
        "family": spec.family,
        "p": spec.p,
        "q": spec.q,
        "n": spec.n,
        "omega_prob": format_value(spec.omega_prob),
        "gamma_prob": format_value(spec.gamma_prob),
        "diag_value": format_value(spec.diag_value),
        "seed": spec.seed,
        "replicates": args.replicates,
        "true_edges": len(truth.support.selected),
    }
    write_manifest(out_dir / "manifest.txt", manifest)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    edge_rows = read_edges(Path(args.edges))
    truth_matrix = read_matrix(Path(args.truth))
    if truth_matrix.ndim != 2 or truth_matrix.shape[0] != truth_matrix.shape[1]:
        raise DimensionMismatch(
            f"truth matrix must be square, got {truth_matrix.shape}"
        )
    p = truth_matrix.shape[0]
    truth = SupportMask.from_matrix(truth_matrix)
    for row in edge_rows:
        if not (1 <= row["i"] < row["j"] <= p):
            raise DimensionMismatch(
                f"edge ({row['i']}, {row['j']}) outside truth dimension p={p}"
            )

    selected = frozenset(
        (row["i"] - 1, row["j"] - 1) for row in edge_rows if row["selected"]
    )
    signs = {
        (row["i"] - 1, row["j"] - 1): (1 if row["omega_ij"] > 0 else -1)
        for row in edge_rows
        if row["selected"]
    }
    estimated = SupportMask(p=p, selected=selected, signs=signs)
    counts = confusion(estimated, truth)
    report = compute_metrics(counts, p)
    with open(out_dir / "metrics.csv", "w") as fh:
        fh.write("misr,spe,sen,pre,mcc,tp,tn,fp,fn\n")
        fh.write(
            ",".join(
                [format_value(getattr(report, k)) for k in ("misr", "spe", "sen", "pre", "mcc")]
                + [str(counts.tp), str(counts.tn), str(counts.fp), str(counts.fn)]
            )
            + "\n"
        )

    if args.sweep:
        # Minimal edge records: with fisher_var_inv = se^2 and n = 1 the
        # adaptive threshold se * sqrt(2 xi0 log p) is reproduced exactly.
        from .edges import EdgeEstimate

        records = [
            EdgeEstimate(
                pair=EdgePair(row["i"] - 1, row["j"] - 1),
                psi_hat=np.eye(2),
                omega_hat=np.array(
                    [
                        [row["omega_ii"], row["omega_ij"]],
                        [row["omega_ij"], row["omega_jj"]],
                    ]
                ),
                omega_ij=row["omega_ij"],
                omega_ii=row["omega_ii"],
                omega_jj=row["omega_jj"],
                fisher_var_inv=row["se"] ** 2,
                z_score=row["z"],
                p_value=row["pvalue"],
                partial_corr=row["partial_corr"],
                lambda2=0.0,
            )
            for row in edge_rows
        ]
        kind = args.curve or ("roc" if args.sweep == "pvalue" else "pr")
        grid = (
            default_pvalue_grid(args.grid_points)
            if args.sweep == "pvalue"
            else default_xi0_grid(args.grid_points)
        )
        points = curve(records, truth, grid, sweep=args.sweep, kind=kind, n=1)
        second_name = "one_minus_specificity" if kind == "roc" else "precision"
        with open(out_dir / "curve.csv", "w") as fh:
            fh.write(f"parameter,sensitivity,{second_name}\n")
            for pt in points:
                fh.write(
                    f"{format_value(pt.parameter)},{format_value(pt.sensitivity)},"
                    f"{format_value(pt.second)}\n"
                )
    return EXIT_OK


def _cmd_study(args) -> int:
    with open(args.config) as fh:
        raw = json.load(fh)
    out_value = args.out or raw.get("out")
    if not out_value:
        raise DomainError("study output directory missing (config 'out' or --out)")
    out_dir = Path(out_value)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = study_config_from_mapping(raw)
    threads = args.threads if args.threads else raw.get("parallelism") or _default_threads()
    config = dataclasses.replace(config, parallelism=int(threads))
    started = time.perf_counter()
    result = run_study(config)
    elapsed = time.perf_counter() - started

    with open(out_dir / "study.csv", "w") as fh:
        fh.write("kind,name,i,j,true_value,mean,sd,coverage95,replicates_used\n")
        for entry in result.entries:
            fh.write(
                ",".join(
                    [
                        "entry",
                        f"v{format_value(entry.true_value)}",
                        str(entry.pair.i + 1),
                        str(entry.pair.j + 1),
                        format_value(entry.true_value),
                        format_value(entry.mean),
                        format_value(entry.sd),
                        format_value(entry.coverage95),
                        str(entry.replicates_used),
                    ]
                )
                + "\n"
            )
        for summary in result.metric_summaries:
            fh.write(
                ",".join(
                    [
                        "metric",
                        summary.name,
                        "",
                        "",
                        "",
                        format_value(summary.mean),
                        format_value(summary.sd),
                        "",
                        str(summary.defined_replicates),
                    ]
                )
                + "\n"
            )

    spec = config.spec
    manifest = {
        "command": "study",
        "version": __version__,
        "family": spec.family,
        "p": spec.p,
        "q": spec.q,
        "n": spec.n,
        "omega_prob": format_value(spec.omega_prob),
        "gamma_prob": format_value(spec.gamma_prob),
        "diag_value": format_value(spec.diag_value),
        "seed": spec.seed,
        "replicates": config.replicates,
        "mode": config.mode,
        "tracked_values": ",".join(format_value(v) for v in config.tracked_values)
        if config.mode == "tracked"
        else "",
        "xi0": format_value(config.xi0),
        "lambda1_mode": config.lambda1_mode,
        "lambda1": format_value(result.lambda1_value),
        "lambda2_mode": config.resolved_lambda2_mode,
        "lambda2": format_value(result.lambda2_value),
        "s_max1": format_value(
            config.s_max1
            if config.s_max1 is not None
            else min(math.sqrt(spec.n) / math.log(spec.q), spec.q / 2.0)
        )
        if spec.q >= 2
        else "not_applicable",
        "s_max2": format_value(
            config.s_max2
            if config.s_max2 is not None
            else min(math.sqrt(spec.n) / math.log(spec.p), spec.p / 2.0)
        ),
        "failed_replicates": len(result.failures),
    }
    write_manifest(out_dir / "manifest.txt", manifest)
    print(
        f"study: {config.replicates} replicates in {elapsed:.1f}s "
        f"({len(result.failures)} failed)",
        file=sys.stderr,
    )
    for rep, msg in result.failures:
        print(f"study: replicate {rep} failed: {msg}", file=sys.stderr)
    return EXIT_PARTIAL if result.failures else EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = {
        "fit": _cmd_fit,
        "simulate": _cmd_simulate,
        "evaluate": _cmd_evaluate,
        "study": _cmd_study,
    }[args.command]
    try:
        return handler(args)
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"antac: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DomainError, DimensionMismatch) as exc:
        print(f"antac: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AntacError as exc:
        print(f"antac: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
