"""Covariate adjustment: column-wise scaled-lasso regression of Y on X.

Each response column Y_j is regressed on the covariate matrix X with the
scaled lasso at a universal penalty level, producing the coefficient matrix
estimate and the residual matrix that all downstream edge estimation runs on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels, _pool
from .errors import DimensionMismatch, DomainError
from .numerics import student_t_quantile
from .scaled_lasso import ZERO_COLUMN_TOL, SolverOptions


@dataclass(frozen=True)
class Dataset:
    """Row-aligned covariates x (n, q) and responses y (n, p)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if x.ndim != 2 or y.ndim != 2:
            raise DimensionMismatch("x and y must be 2-d arrays")
        if x.shape[0] != y.shape[0]:
            raise DimensionMismatch(
                f"x has {x.shape[0]} rows but y has {y.shape[0]}"
            )
        if y.shape[0] < 2:
            raise DomainError("at least 2 samples are required")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def q(self) -> int:
        return self.x.shape[1]

    @property
    def p(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True)
class AdjustmentResult:
    """Output of the adjustment step.

    z_hat = y - x @ gamma_hat.T holds exactly as stored; sigma_hat carries
    the per-column noise-level estimates. Columns whose solve failed are
    listed in failed_columns and must be excluded from downstream edges.
    """

    gamma_hat: np.ndarray
    z_hat: np.ndarray
    sigma_hat: np.ndarray
    lambda1: float
    failed_columns: tuple[int, ...] = ()
    iterations: np.ndarray | None = None
    kkt_residuals: np.ndarray | None = None
    converged: np.ndarray | None = None
    refitted: np.ndarray | None = None


def center_columns(dataset: Dataset) -> Dataset:
    """Subtract column means from x and y.

    The generating model assumes zero-mean covariates; centering is an
    opt-in preprocessing step for real data that do not satisfy it.
    """
    x = dataset.x - dataset.x.mean(axis=0, keepdims=True) if dataset.q else dataset.x
    y = dataset.y - dataset.y.mean(axis=0, keepdims=True)
    return Dataset(x=x, y=y)


def lambda1(
    n: int,
    p: int,
    q: int,
    s_max1: float | None = None,
    mode: str = "finite_sample",
) -> float:
    """Universal penalty level for the adjustment regressions.

    asymptotic:     sqrt(2 (1 + log p / log q) / n)
    finite_sample:  B / sqrt(n - 1 + B^2) with
                    B = t-quantile(1 - (s_max1/q)^(1 + log p / log q) / 2, n - 1)
    The finite-sample form (default) tracks the tail of the correlation
    statistic at exactly n - 1 degrees of freedom; s_max1 defaults to
    sqrt(n) / log(q), clamped at q/2 so the quantile argument stays inside
    (0, 1) at desk-scale dimensions (the clamp never binds when q is large
    relative to sqrt(n)).
    """
    if n < 3:
        raise DomainError(f"n must be >= 3, got {n}")
    if p < 2 or q < 2:
        raise DomainError(f"p and q must be >= 2, got p={p}, q={q}")
    exponent = 1.0 + math.log(p) / math.log(q)
    if mode == "asymptotic":
        return math.sqrt(2.0 * exponent / n)
    if mode != "finite_sample":
        raise DomainError(f"unknown lambda1 mode {mode!r}")
    if s_max1 is None:
        s_max1 = min(math.sqrt(n) / math.log(q), q / 2.0)
    if s_max1 <= 0:
        raise DomainError(f"s_max1 must be positive, got {s_max1}")
    prob = 1.0 - 0.5 * (s_max1 / q) ** exponent
    if not (0.0 < prob < 1.0):
        raise DomainError(
            f"finite-sample quantile argument {prob} left (0, 1); "
            f"check s_max1={s_max1} against q={q}"
        )
    b = student_t_quantile(prob, n - 1)
    return b / math.sqrt(n - 1 + b * b)


def adjust(
    dataset: Dataset,
    lam1: float,
    parallelism: int = 1,
    options: SolverOptions | None = None,
    refit: bool = True,
) -> AdjustmentResult:
    """Regress every response column on the covariates with the scaled lasso.

    The p column problems share one standardized design Gram and run as
    independent work items; the result is identical for any parallelism
    level. With ``refit`` (default) each column's coefficients are replaced
    by their least-squares refit on the selected support, which removes the
    shrinkage bias that would otherwise leak covariate signal into the
    residual matrix; sigma_hat always reports the penalized noise estimate.
    With q = 0 the step is a pass-through: empty coefficient matrix and
    z_hat = y.
    """
    opts = options or SolverOptions()
    x, y = dataset.x, dataset.y
    n, q = x.shape
    p = y.shape[1]

    if q == 0:
        sigma = np.linalg.norm(y, axis=0) / math.sqrt(n)
        return AdjustmentResult(
            gamma_hat=np.zeros((p, 0)),
            z_hat=y.copy(),
            sigma_hat=sigma,
            lambda1=lam1,
            iterations=np.zeros(p, dtype=np.int64),
            kkt_residuals=np.zeros(p),
            converged=np.ones(p, dtype=bool),
            refitted=np.zeros(p, dtype=bool),
        )
    if not lam1 > 0:
        raise DomainError(f"lambda1 must be positive, got {lam1}")

    colnorm_sq = np.einsum("ij,ij->j", x, x) / n
    active = (colnorm_sq > ZERO_COLUMN_TOL**2).astype(np.uint8)
    scale = np.where(active == 1, 1.0 / np.sqrt(np.where(active == 1, colnorm_sq, 1.0)), 0.0)
    gram = (x.T @ x) / n
    gram *= scale[:, None]
    gram *= scale[None, :]
    np.fill_diagonal(gram, np.where(active == 1, gram.diagonal(), 1.0))
    gram = np.ascontiguousarray(gram)
    cross = np.asfortranarray((x.T @ y) / n * scale[:, None])
    resp_sq = np.einsum("ij,ij->j", y, y) / n

    dcoef = np.zeros((q, p), order="F")
    theta = np.empty(p)
    kkt = np.empty(p)
    iters = np.empty(p, dtype=np.int64)
    conv = np.empty(p, dtype=np.int64)
    sweeps = np.empty(p, dtype=np.int64)
    refitted = np.empty(p, dtype=np.int64)

    def work(start: int, end: int) -> None:
        _kernels.solve_columns_block(
            gram,
            cross,
            resp_sq,
            active,
            lam1,
            opts.theta_tol,
            opts.max_outer,
            opts.cd_tol,
            opts.max_sweeps,
            n,
            1 if refit else 0,
            start,
            end,
            dcoef,
            theta,
            kkt,
            iters,
            conv,
            sweeps,
            refitted,
        )

    _pool.run_chunked(p, work, parallelism)

    gamma = np.ascontiguousarray((dcoef * scale[:, None]).T)
    z_hat = y - x @ gamma.T
    converged = conv == 1
    finite = np.isfinite(gamma).all(axis=1) & np.isfinite(theta)
    failed = tuple(int(j) for j in np.nonzero(~(converged & finite))[0])
    return AdjustmentResult(
        gamma_hat=gamma,
        z_hat=z_hat,
        sigma_hat=theta,
        lambda1=lam1,
        failed_columns=failed,
        iterations=iters,
        kkt_residuals=kkt,
        converged=converged,
        refitted=refitted == 1,
    )
