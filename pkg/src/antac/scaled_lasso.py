"""Scaled (square-root-type) lasso solver with KKT verification.

The program jointly minimizes over coefficients b and noise level theta

    ||R - D b||^2 / (2 n theta) + theta / 2 + lam * sum_k (||D_k|| / sqrt(n)) |b_k|,

which is jointly convex. The solver alternates an inner lasso in the
standardized coordinates d_k = b_k ||D_k|| / sqrt(n) (design columns rescaled
to norm sqrt(n)) at penalty lam * theta with the exact stationarity update
theta = ||R - D b|| / sqrt(n). The same routine serves both the covariate
adjustment step and the per-edge regressions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, DomainError

#: Columns with ||D_k|| <= ZERO_COLUMN_TOL * sqrt(n) are excluded from the
#: penalized problem and their coefficients fixed at zero; their penalty
#: weight would vanish and the standardization would be undefined.
ZERO_COLUMN_TOL = 1e-12


def theta_floor_for(response: np.ndarray) -> float:
    """Lower clamp for the noise level: 1e-12 * (1 + ||R|| / sqrt(n))."""
    n = response.shape[0]
    return 1e-12 * (1.0 + float(np.linalg.norm(response)) / np.sqrt(n))


@dataclass(frozen=True)
class SolverOptions:
    """Convergence controls for the alternating solver."""

    theta_tol: float = 1e-8  # relative change in theta between outer iterations
    max_outer: int = 100
    cd_tol: float = 1e-10  # max coordinate update declaring the inner lasso done
    max_sweeps: int = 10_000


@dataclass(frozen=True)
class ScaledLassoProblem:
    """One scaled-lasso regression: response R (n,), design D (n, m), penalty lam."""

    response: np.ndarray
    design: np.ndarray
    lam: float

    def __post_init__(self):
        r = np.ascontiguousarray(self.response, dtype=np.float64).reshape(-1)
        d = np.ascontiguousarray(self.design, dtype=np.float64)
        if d.ndim != 2:
            raise DimensionMismatch(f"design must be 2-d, got shape {d.shape}")
        if r.shape[0] != d.shape[0]:
            raise DimensionMismatch(
                f"response has {r.shape[0]} rows, design has {d.shape[0]}"
            )
        if r.shape[0] < 2:
            raise DomainError("scaled lasso requires n >= 2")
        if not self.lam > 0.0:
            raise DomainError(f"penalty must be positive, got {self.lam}")
        object.__setattr__(self, "response", r)
        object.__setattr__(self, "design", d)


@dataclass(frozen=True)
class ScaledLassoFit:
    """Solution of one scaled-lasso program, reported in the original scale."""

    coefficients: np.ndarray
    noise_level: float
    iterations: int
    kkt_residual: float
    objective: float
    converged: bool
    theta_floor: float
    sweeps: int = 0
    objective_history: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass(frozen=True)
class KktReport:
    """Per-coordinate first-order optimality check for a fit."""

    passed: bool
    worst_violation: float
    coordinate_ok: np.ndarray
    theta_ok: bool
    theta_gap: float
    penalty: float


def _standardize(design: np.ndarray):
    """Column scales 1/sqrt(||D_k||^2/n) and the active-column mask."""
    n = design.shape[0]
    colnorm_sq = np.einsum("ij,ij->j", design, design) / n
    active = colnorm_sq > (ZERO_COLUMN_TOL**2)
    scale = np.where(active, 1.0 / np.sqrt(np.where(active, colnorm_sq, 1.0)), 0.0)
    return colnorm_sq, scale, active.astype(np.uint8)


def solve_scaled_lasso(
    problem: ScaledLassoProblem, options: SolverOptions | None = None
) -> ScaledLassoFit:
    """Solve one scaled-lasso program.

    The returned noise level satisfies theta = ||R - D b|| / sqrt(n) at the
    solution (clamped from below at the degenerate-response floor) and the
    coefficients satisfy the lasso KKT conditions at penalty lam * theta up
    to the reported residual. A fit that exhausts max_outer iterations is
    still returned, flagged with converged=False.
    """
    opts = options or SolverOptions()
    r = problem.response
    d = problem.design
    n, m = d.shape
    floor = theta_floor_for(r)
    resp_sq = float(r @ r) / n

    if m == 0:
        theta = max(np.sqrt(resp_sq), floor)
        return ScaledLassoFit(
            coefficients=np.zeros(0),
            noise_level=theta,
            iterations=0,
            kkt_residual=0.0,
            objective=resp_sq / (2 * theta) + theta / 2,
            converged=True,
            theta_floor=floor,
            objective_history=np.empty(0),
        )

    _, scale, active = _standardize(d)
    gram = (d.T @ d) / n
    gram *= scale[:, None]
    gram *= scale[None, :]
    np.fill_diagonal(gram, np.where(active, gram.diagonal(), 1.0))
    cross = (d.T @ r) / n * scale

    coef = np.zeros(m)
    obj_hist = np.empty(opts.max_outer)
    theta, outer, sweeps, converged, kkt = _kernels.scaled_lasso_gram(
        np.ascontiguousarray(gram),
        cross,
        resp_sq,
        problem.lam,
        floor,
        active,
        coef,
        obj_hist,
        opts.theta_tol,
        opts.max_outer,
        opts.cd_tol,
        opts.max_sweeps,
    )
    return ScaledLassoFit(
        coefficients=coef * scale,
        noise_level=theta,
        iterations=outer,
        kkt_residual=kkt,
        objective=obj_hist[outer - 1] if outer > 0 else np.nan,
        converged=bool(converged),
        theta_floor=floor,
        sweeps=sweeps,
        objective_history=obj_hist[:outer].copy(),
    )


def lasso_inner(
    response: np.ndarray,
    design_standardized: np.ndarray,
    penalty: float,
    options: SolverOptions | None = None,
) -> np.ndarray:
    """Ordinary lasso by cyclic coordinate descent on a standardized design.

    Expects every design column to have norm sqrt(n); each coordinate of the
    returned vector is a fixed point of the soft-threshold update
    d_k = S(d_k + W_k'(R - W d)/n, penalty).
    """
    if penalty < 0.0:
        raise DomainError(f"penalty must be >= 0, got {penalty}")
    opts = options or SolverOptions()
    w = np.ascontiguousarray(design_standardized, dtype=np.float64)
    r = np.ascontiguousarray(response, dtype=np.float64).reshape(-1)
    if w.shape[0] != r.shape[0]:
        raise DimensionMismatch("response and design row counts differ")
    n, m = w.shape
    gram = np.ascontiguousarray(w.T @ w / n)
    cross = w.T @ r / n
    coef = np.zeros(m)
    resid_corr = cross.copy()
    active = np.ones(m, dtype=np.uint8)
    _kernels.cd_lasso(
        gram, cross, coef, resid_corr, active, penalty, opts.cd_tol, opts.max_sweeps
    )
    return coef


def kkt_check(
    problem: ScaledLassoProblem, fit: ScaledLassoFit, tol: float
) -> KktReport:
    """Verify first-order optimality of a fit directly from the raw arrays.

    Recomputes the standardized residual correlations W'(R - W d)/n with
    dense matrix products (independently of the solver's incremental
    bookkeeping) and checks, at penalty mu = lam * theta:

      active coordinates:   |corr_k - mu * sgn(d_k)| <= tol
      inactive coordinates: |corr_k| <= mu + tol

    plus the noise-level stationarity theta = ||R - D b|| / sqrt(n) within
    1e-8 relative. When the fit interpolates (residual at rounding scale,
    which happens for m > n designs), both the reported and the recomputed
    noise level sit in the floating-point noise band and the relative
    comparison is meaningless; the check then only requires both to be
    negligible against the response scale.
    """
    r = problem.response
    d = problem.design
    n, m = d.shape
    if fit.coefficients.shape[0] != m:
        raise DimensionMismatch("fit does not match problem dimensions")

    resid = r - d @ fit.coefficients
    resid_norm = float(np.linalg.norm(resid)) / np.sqrt(n)
    theta_gap = abs(fit.noise_level - resid_norm)
    noise_scale = 1e-7 * (1.0 + float(np.linalg.norm(r)) / np.sqrt(n))
    theta_ok = (
        theta_gap <= 1e-8 * max(fit.noise_level, fit.theta_floor)
        or (fit.noise_level == fit.theta_floor and resid_norm <= fit.theta_floor)
        or (resid_norm <= noise_scale and fit.noise_level <= noise_scale)
    )

    if m == 0:
        return KktReport(
            passed=theta_ok,
            worst_violation=0.0,
            coordinate_ok=np.zeros(0, dtype=bool),
            theta_ok=theta_ok,
            theta_gap=theta_gap,
            penalty=problem.lam * fit.noise_level,
        )

    _, scale, active = _standardize(d)
    # Standardized coefficients and correlations: d_k = b_k ||D_k||/sqrt(n).
    corr = (d.T @ resid) / n * scale
    mu = problem.lam * fit.noise_level
    dcoef = np.divide(fit.coefficients, scale, out=np.zeros(m), where=scale > 0)

    violation = np.where(
        dcoef != 0.0,
        np.abs(corr - mu * np.sign(dcoef)),
        np.maximum(np.abs(corr) - mu, 0.0),
    )
    violation = np.where(active.astype(bool), violation, 0.0)
    coordinate_ok = violation <= tol
    worst = float(violation.max()) if m else 0.0
    return KktReport(
        passed=bool(coordinate_ok.all()) and theta_ok,
        worst_violation=worst,
        coordinate_ok=coordinate_ok,
        theta_ok=theta_ok,
        theta_gap=theta_gap,
        penalty=mu,
    )
