"""Per-edge precision estimation on the adjusted residual matrix.

For a node pair {i, j} both remaining columns act as predictors: each of the
two target columns is regressed on them by the scaled lasso, the residual
cross-product matrix Psi (2x2) is inverted, and the off-diagonal of the
inverse is the edge estimate. Its asymptotic variance (omega_ii omega_jj +
omega_ij^2) / n yields a z-score, a two-sided P-value and a partial
correlation for every edge. Pairs are independent work items, so any subgraph
can be estimated in isolation and in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from . import _kernels, _pool
from ._kernels import (
    COL_CONV_I,
    COL_CONV_J,
    COL_DF,
    COL_FISHER,
    COL_ITERS_I,
    COL_ITERS_J,
    COL_KKT_I,
    COL_KKT_J,
    COL_OMEGA_II,
    COL_OMEGA_IJ,
    COL_OMEGA_JJ,
    COL_PARTIAL,
    COL_PSI_II,
    COL_PSI_IJ,
    COL_PSI_JJ,
    COL_PVALUE,
    COL_REFIT,
    COL_STATUS,
    COL_THETA_I,
    COL_THETA_J,
    COL_Z,
    PAIR_NCOLS,
    PAIR_OK,
    PAIR_SINGULAR_PSI,
)
from .errors import AntacError, DimensionMismatch, DomainError, SingularPsi
from .numerics import std_normal_cdf, student_t_quantile
from .scaled_lasso import SolverOptions

#: A 2x2 residual cross-product determinant at or below this is treated as
#: numerically rank-deficient.
PSI_DET_TOL = 1e-14


@dataclass(frozen=True, order=True)
class EdgePair:
    """Unordered node pair stored as 0 <= i < j."""

    i: int
    j: int

    def __post_init__(self):
        if not (0 <= self.i < self.j):
            raise DomainError(f"pair requires 0 <= i < j, got ({self.i}, {self.j})")


@dataclass(frozen=True)
class EdgeEstimate:
    """Estimate and inference for one edge."""

    pair: EdgePair
    psi_hat: np.ndarray
    omega_hat: np.ndarray
    omega_ij: float
    omega_ii: float
    omega_jj: float
    fisher_var_inv: float
    z_score: float
    p_value: float
    partial_corr: float
    lambda2: float
    beta_hat: np.ndarray | None = None
    noise_levels: tuple[float, float] = (0.0, 0.0)
    kkt_residuals: tuple[float, float] = (0.0, 0.0)
    converged: bool = True
    support_size: int = 0
    refitted: bool = False


@dataclass(frozen=True)
class PrecisionEstimate:
    """Assembled symmetric estimate plus the per-edge table.

    assembled[i, j] carries each estimated pair's off-diagonal value;
    assembled[i, i] is the mean of the pair-level diagonal estimates over all
    estimated pairs containing i (pairs never estimated leave zeros).
    """

    p: int
    n: int
    edges: tuple[EdgeEstimate, ...]
    assembled: np.ndarray
    diagonal_source: str = "pair_average"
    errors: dict[EdgePair, str] = field(default_factory=dict)


def lambda2(
    n: int, p: int, s_max2: float | None = None, mode: str = "support_recovery"
) -> float:
    """Universal penalty level for the per-edge regressions.

    asymptotic:        sqrt(2 log p / n)
    estimation:        B / sqrt(n - 1 + B^2), B = t-quantile(1 - s_max2 / (2p), n-1)
    support_recovery:  same with B = t-quantile(1 - (s_max2 / p)^3 / 2, n-1),
                       the default: with the refit estimator the penalty only
                       drives support selection, and this more conservative
                       level measures better-calibrated estimates.
    s_max2 defaults to sqrt(n) / log(p), clamped at p/2 so the quantile
    argument stays inside (0, 1) at desk-scale dimensions.
    """
    if n < 3:
        raise DomainError(f"n must be >= 3, got {n}")
    if p < 3:
        raise DomainError(f"p must be >= 3, got {p}")
    if mode == "asymptotic":
        return math.sqrt(2.0 * math.log(p) / n)
    if s_max2 is None:
        s_max2 = min(math.sqrt(n) / math.log(p), p / 2.0)
    if s_max2 <= 0:
        raise DomainError(f"s_max2 must be positive, got {s_max2}")
    if mode == "estimation":
        prob = 1.0 - s_max2 / (2.0 * p)
    elif mode == "support_recovery":
        prob = 1.0 - (s_max2 / p) ** 3 / 2.0
    else:
        raise DomainError(f"unknown lambda2 mode {mode!r}")
    if not (0.0 < prob < 1.0):
        raise DomainError(
            f"quantile argument {prob} left (0, 1); check s_max2={s_max2} against p={p}"
        )
    b = student_t_quantile(prob, n - 1)
    return b / math.sqrt(n - 1 + b * b)


def fisher_variance(omega_hat: np.ndarray) -> float:
    """Inverse Fisher information of the edge: omega_ii omega_jj + omega_ij^2."""
    return float(
        omega_hat[0, 0] * omega_hat[1, 1] + omega_hat[0, 1] * omega_hat[0, 1]
    )


def edge_pvalue(
    omega_ij: float, fisher_var_inv: float, n: int
) -> tuple[float, float]:
    """Z-score and two-sided P-value against omega_ij = 0."""
    if not fisher_var_inv > 0:
        raise DomainError(f"fisher_var_inv must be positive, got {fisher_var_inv}")
    z = omega_ij * math.sqrt(n / fisher_var_inv)
    p = 2.0 * std_normal_cdf(-abs(z))
    return z, p


def partial_correlation(omega_hat: np.ndarray) -> float:
    """Partial correlation -omega_ij / sqrt(omega_ii omega_jj), in (-1, 1)."""
    return float(
        -omega_hat[0, 1] / math.sqrt(omega_hat[0, 0] * omega_hat[1, 1])
    )


def all_pairs(p: int) -> list[EdgePair]:
    """Every unordered pair on p nodes in lexicographic order."""
    return [EdgePair(i, j) for i, j in combinations(range(p), 2)]


def _normalize_pairs(pairs, p: int) -> list[EdgePair]:
    if pairs is None or (isinstance(pairs, str) and pairs == "all"):
        return all_pairs(p)
    out = []
    for pr in pairs:
        if not isinstance(pr, EdgePair):
            pr = EdgePair(int(pr[0]), int(pr[1]))
        if pr.j >= p:
            raise DimensionMismatch(f"pair {pr} exceeds p={p}")
        out.append(pr)
    if len(set(out)) != len(out):
        raise DomainError("duplicate pairs requested")
    return sorted(out)


def estimate_graph(
    z_hat: np.ndarray,
    pairs: "Iterable | str | None" = None,
    lam2: float = 0.0,
    parallelism: int = 1,
    excluded_columns: Sequence[int] = (),
    keep_beta: bool = True,
    options: SolverOptions | None = None,
    refit: bool = True,
) -> PrecisionEstimate:
    """Estimate a set of edges (default: the full graph) on shared residuals.

    Each pair is an independent work item over a worker pool; results merge
    by lexicographic pair order so the output is identical for any worker
    count. Pairs touching excluded columns are dropped up front; per-pair
    numerical failures are collected in ``errors`` instead of aborting.

    With ``refit`` (default) the per-pair coefficients are the joint
    least-squares refit on the union of the two scaled-lasso supports and
    the residual cross products divide by n minus the support size; this
    removes the penalization-induced bias of the raw cross products, which
    otherwise inflates strong entries noticeably at moderate sample sizes.
    ``refit=False`` keeps the raw penalized residuals and the 1/n scaling.
    """
    opts = options or SolverOptions()
    z = np.ascontiguousarray(z_hat, dtype=np.float64)
    if z.ndim != 2:
        raise DimensionMismatch("z_hat must be 2-d")
    n, p = z.shape
    if p < 2:
        raise DomainError("edge estimation requires p >= 2")
    if n <= 2:
        raise DomainError("edge estimation requires n > 2")
    if not lam2 > 0:
        raise DomainError(f"lambda2 must be positive, got {lam2}")

    excluded = set(int(c) for c in excluded_columns)
    requested = _normalize_pairs(pairs, p)
    kept = [pr for pr in requested if pr.i not in excluded and pr.j not in excluded]
    errors: dict[EdgePair, str] = {
        pr: "column excluded by adjustment step"
        for pr in requested
        if pr not in set(kept)
    }

    gram = np.ascontiguousarray(z.T @ z / n)
    zf = np.asfortranarray(z)
    active_col = np.ones(p, dtype=np.uint8)
    for c in excluded:
        if 0 <= c < p:
            active_col[c] = 0

    npairs = len(kept)
    pair_arr = np.array([[pr.i, pr.j] for pr in kept], dtype=np.int64).reshape(
        npairs, 2
    )
    out = np.zeros((npairs, PAIR_NCOLS))
    out[:, COL_STATUS] = -1.0  # sentinel: every requested pair must be visited
    m = p - 2
    beta_store = np.zeros((npairs, m, 2)) if keep_beta else None

    def work(start: int, end: int) -> None:
        beta_slice = (
            beta_store[start:end] if keep_beta else np.zeros((0, max(m, 1), 2))
        )
        _kernels.estimate_pair_block(
            gram,
            zf,
            active_col,
            pair_arr,
            lam2,
            opts.theta_tol,
            opts.max_outer,
            opts.cd_tol,
            opts.max_sweeps,
            PSI_DET_TOL,
            1 if refit else 0,
            start,
            end,
            out,
            beta_slice,
            1 if keep_beta else 0,
        )

    _pool.run_chunked(npairs, work, parallelism)
    if npairs and not np.all(out[:, COL_STATUS] >= 0):
        raise AntacError("worker pool skipped requested pairs")  # pragma: no cover

    edges = []
    assembled = np.zeros((p, p))
    diag_sum = np.zeros(p)
    diag_count = np.zeros(p, dtype=np.int64)
    for idx, pr in enumerate(kept):
        row = out[idx]
        status = int(row[COL_STATUS])
        if status == PAIR_SINGULAR_PSI:
            errors[pr] = (
                f"singular residual cross-product (det <= {PSI_DET_TOL:g})"
            )
            continue
        if status != PAIR_OK:
            errors[pr] = "non-finite residual cross-product"
            continue
        psi = np.array(
            [
                [row[COL_PSI_II], row[COL_PSI_IJ]],
                [row[COL_PSI_IJ], row[COL_PSI_JJ]],
            ]
        )
        omega = np.array(
            [
                [row[COL_OMEGA_II], row[COL_OMEGA_IJ]],
                [row[COL_OMEGA_IJ], row[COL_OMEGA_JJ]],
            ]
        )
        edge = EdgeEstimate(
            pair=pr,
            psi_hat=psi,
            omega_hat=omega,
            omega_ij=float(row[COL_OMEGA_IJ]),
            omega_ii=float(row[COL_OMEGA_II]),
            omega_jj=float(row[COL_OMEGA_JJ]),
            fisher_var_inv=float(row[COL_FISHER]),
            z_score=float(row[COL_Z]),
            p_value=float(row[COL_PVALUE]),
            partial_corr=float(row[COL_PARTIAL]),
            lambda2=lam2,
            beta_hat=beta_store[idx].copy() if keep_beta else None,
            noise_levels=(float(row[COL_THETA_I]), float(row[COL_THETA_J])),
            kkt_residuals=(float(row[COL_KKT_I]), float(row[COL_KKT_J])),
            converged=bool(row[COL_CONV_I] == 1.0 and row[COL_CONV_J] == 1.0),
            support_size=int(row[COL_DF]),
            refitted=bool(row[COL_REFIT] == 1.0),
        )
        edges.append(edge)
        assembled[pr.i, pr.j] = edge.omega_ij
        assembled[pr.j, pr.i] = edge.omega_ij
        diag_sum[pr.i] += edge.omega_ii
        diag_sum[pr.j] += edge.omega_jj
        diag_count[pr.i] += 1
        diag_count[pr.j] += 1

    has_diag = diag_count > 0
    assembled[np.diag_indices(p)] = np.where(
        has_diag, diag_sum / np.where(has_diag, diag_count, 1), 0.0
    )
    return PrecisionEstimate(
        p=p, n=n, edges=tuple(edges), assembled=assembled, errors=errors
    )


def estimate_edge(
    z_hat: np.ndarray,
    pair: EdgePair,
    lam2: float,
    options: SolverOptions | None = None,
    refit: bool = True,
) -> EdgeEstimate:
    """Estimate a single edge; raises SingularPsi on degenerate residuals."""
    result = estimate_graph(
        z_hat, pairs=[pair], lam2=lam2, parallelism=1, options=options, refit=refit
    )
    if result.edges:
        return result.edges[0]
    message = result.errors.get(pair, "edge estimation failed")
    raise SingularPsi(f"pair ({pair.i}, {pair.j}): {message}")
