"""Synthetic model generators for replication studies.

Four built-in families produce sparse (gamma, omega) ground truths:

  table_one      four-point off-diagonals {0, 0.3, 0.6, 1} with a constant
                 diagonal (4 or 5 depending on size)
  homogeneous    standard-normal off-diagonals thinned by a Bernoulli mask,
                 diagonal lifted above the spectrum to force definiteness
  magnified_block   three diagonal blocks equal to a common sparse base
                 scaled by 1, 5 and 10 (150 nodes total)
  hetero_product 200 nodes, bottom-right quarter overwritten by twice the
                 top-left quarter, mixing many diagonal products
  custom         scaled-down magnified-block for desk tests

A truth is fixed once per study seed; replicates redraw only the data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjust import Dataset
from .errors import DomainError, GenerationFailed, NotPositiveDefinite
from .inference import SupportMask
from .numerics import RngStream, as_generator, cholesky, mvn_sample

MAX_GENERATION_ATTEMPTS = 100

_FIXED_DIMS = {"magnified_block": (150, 100, 300), "hetero_product": (200, 100, 300)}


@dataclass(frozen=True)
class GroundTruth:
    """True (gamma, omega) with omega's exact off-diagonal support."""

    gamma: np.ndarray
    omega: np.ndarray
    support: SupportMask

    def __post_init__(self):
        cholesky(self.omega)  # positive-definiteness certificate
        if self.support != SupportMask.from_matrix(self.omega):
            raise DomainError("support mask does not match omega's nonzero pattern")

    @property
    def p(self) -> int:
        return self.omega.shape[0]

    @property
    def q(self) -> int:
        return self.gamma.shape[1]


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of one synthetic model family."""

    family: str
    p: int = 200
    q: int = 100
    n: int = 400
    gamma_prob: float = 0.025
    omega_prob: float = 0.025
    diag_value: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in (
            "table_one",
            "homogeneous",
            "magnified_block",
            "hetero_product",
            "custom",
        ):
            raise DomainError(f"unknown family {self.family!r}")
        if not (0.0 <= self.gamma_prob <= 1.0 and 0.0 <= self.omega_prob <= 1.0):
            raise DomainError("probabilities must lie in [0, 1]")
        if min(self.p, self.n) < 2 or self.q < 0:
            raise DomainError("dimensions must be positive (q may be 0)")
        fixed = _FIXED_DIMS.get(self.family)
        if fixed is not None and (self.p, self.q) != fixed[:2]:
            raise DomainError(
                f"family {self.family!r} has fixed dimensions p={fixed[0]}, q={fixed[1]}"
            )
        if self.family == "custom" and self.p % 3 != 0:
            raise DomainError("custom family requires p divisible by 3")


def _sparse_normal(shape, prob, gen) -> np.ndarray:
    """N(0,1) entries kept with independent probability ``prob``, else 0."""
    values = gen.standard_normal(shape)
    keep = gen.random(shape) < prob
    return values * keep


def gen_gamma(p: int, q: int, prob: float, rng) -> np.ndarray:
    """Sparse coefficient matrix: each entry N(0,1) * Bernoulli(prob)."""
    if not (0.0 <= prob <= 1.0):
        raise DomainError(f"prob must lie in [0, 1], got {prob}")
    gen = as_generator(rng)
    return _sparse_normal((p, q), prob, gen)


def _mirror_upper(upper_values: np.ndarray, p: int) -> np.ndarray:
    """Symmetric matrix from a length p(p-1)/2 vector of upper-triangle values."""
    m = np.zeros((p, p))
    iu = np.triu_indices(p, k=1)
    m[iu] = upper_values
    m += m.T
    return m


def _is_positive_definite(m: np.ndarray) -> bool:
    try:
        cholesky(m)
        return True
    except NotPositiveDefinite:
        return False


def _truth_from_omega(omega: np.ndarray, gamma: np.ndarray | None = None) -> GroundTruth:
    p = omega.shape[0]
    if gamma is None:
        gamma = np.zeros((p, 0))
    return GroundTruth(
        gamma=gamma, omega=omega, support=SupportMask.from_matrix(omega)
    )


def gen_omega_table1(p: int, pi: float, diag_value: float, rng) -> GroundTruth:
    """Four-point model: off-diagonals 0.3 / 0.6 / 1 each with probability pi/3.

    The upper triangle is sampled i.i.d. and mirrored; draws failing the
    positive-definiteness certificate are resampled (at most
    MAX_GENERATION_ATTEMPTS times). The covariate loading is left empty;
    compose with gen_gamma via make_truth.
    """
    if not (0.0 <= pi <= 1.0):
        raise DomainError(f"pi must lie in [0, 1], got {pi}")
    if not diag_value > 0:
        raise DomainError(f"diag_value must be positive, got {diag_value}")
    gen = as_generator(rng)
    npairs = p * (p - 1) // 2
    for _ in range(MAX_GENERATION_ATTEMPTS):
        u = gen.random(npairs)
        values = np.select(
            [u < pi / 3.0, u < 2.0 * pi / 3.0, u < pi], [0.3, 0.6, 1.0], default=0.0
        )
        omega = _mirror_upper(values, p)
        np.fill_diagonal(omega, diag_value)
        if _is_positive_definite(omega):
            return _truth_from_omega(omega)
    raise GenerationFailed(
        f"no positive-definite draw in {MAX_GENERATION_ATTEMPTS} attempts "
        f"(p={p}, pi={pi}, diag={diag_value})"
    )


def gen_omega_homogeneous(p: int, pi: float, rng) -> GroundTruth:
    """Off-diagonals N(0,1) * Bernoulli(pi); constant diagonal
    max(1, 0.05 + |min eigenvalue of the off-diagonal part|).

    The eigenvalue shift makes the construction positive definite without
    resampling (smallest eigenvalue 0.05 once any shift is needed, exactly 1
    for an empty off-diagonal), following the usual sparse-precision
    simulation convention of padding the spectrum by a small constant rather
    than a full unit, which would drown the standard-normal signals under
    variance-adaptive thresholds.
    """
    if not (0.0 <= pi <= 1.0):
        raise DomainError(f"pi must lie in [0, 1], got {pi}")
    gen = as_generator(rng)
    npairs = p * (p - 1) // 2
    values = _sparse_normal(npairs, pi, gen)
    off = _mirror_upper(values, p)
    min_eig = float(np.linalg.eigvalsh(off).min()) if p > 1 else 0.0
    omega = off + max(1.0, 0.05 + max(0.0, -min_eig)) * np.eye(p)
    return _truth_from_omega(omega)


def _gen_block_magnified(
    block_size: int, pi: float, gen, multipliers=(1.0, 5.0, 10.0)
) -> np.ndarray:
    """Block-diagonal matrix of one sparse base block at increasing scales."""
    npairs = block_size * (block_size - 1) // 2
    for _ in range(MAX_GENERATION_ATTEMPTS):
        u = gen.random(npairs)
        pick = gen.random(npairs)
        values = np.where(u < pi, np.where(pick < 0.5, 0.4, 0.5), 0.0)
        base = _mirror_upper(values, block_size)
        np.fill_diagonal(base, 1.0)
        if not _is_positive_definite(base):
            continue
        p = block_size * len(multipliers)
        omega = np.zeros((p, p))
        for k, mult in enumerate(multipliers):
            lo = k * block_size
            omega[lo : lo + block_size, lo : lo + block_size] = mult * base
        return omega
    raise GenerationFailed(
        f"no positive-definite base block in {MAX_GENERATION_ATTEMPTS} attempts"
    )


def gen_magnified_block(rng) -> GroundTruth:
    """150-node block model: a 50x50 base (unit diagonal, entries from
    {0.4, 0.5} with probability 0.02) repeated at scales 1, 5 and 10, with a
    150x100 sparse loading matrix at density 0.05."""
    gen = as_generator(rng)
    omega = _gen_block_magnified(50, 0.02, gen)
    gamma = _sparse_normal((150, 100), 0.05, gen)
    return _truth_from_omega(omega, gamma)


def gen_hetero_product(rng) -> GroundTruth:
    """200-node model with heterogeneous diagonal products: unit diagonal,
    entries from {0.4, 0.5} with probability 0.005, bottom-right 100x100
    block overwritten by twice the top-left block; 200x100 loading matrix at
    density 0.05."""
    gen = as_generator(rng)
    p, half = 200, 100
    npairs = p * (p - 1) // 2
    for _ in range(MAX_GENERATION_ATTEMPTS):
        u = gen.random(npairs)
        pick = gen.random(npairs)
        values = np.where(u < 0.005, np.where(pick < 0.5, 0.4, 0.5), 0.0)
        omega = _mirror_upper(values, p)
        np.fill_diagonal(omega, 1.0)
        omega[half:, half:] = 2.0 * omega[:half, :half]
        if _is_positive_definite(omega):
            gamma = _sparse_normal((p, 100), 0.05, gen)
            return _truth_from_omega(omega, gamma)
    raise GenerationFailed(
        f"no positive-definite draw in {MAX_GENERATION_ATTEMPTS} attempts"
    )


def make_truth(spec: ModelSpec, rng: "RngStream | np.random.Generator") -> GroundTruth:
    """Generate the fixed ground truth of a study.

    Consumes omega draws first, then (for families without a built-in
    loading matrix) the gamma draws, from a single stream.
    """
    gen = as_generator(rng)
    if spec.family == "table_one":
        truth = gen_omega_table1(spec.p, spec.omega_prob, spec.diag_value, gen)
    elif spec.family == "homogeneous":
        truth = gen_omega_homogeneous(spec.p, spec.omega_prob, gen)
    elif spec.family == "magnified_block":
        return gen_magnified_block(gen)
    elif spec.family == "hetero_product":
        return gen_hetero_product(gen)
    elif spec.family == "custom":
        omega = _gen_block_magnified(spec.p // 3, spec.omega_prob, gen)
        gamma = gen_gamma(spec.p, spec.q, spec.gamma_prob, gen)
        return _truth_from_omega(omega, gamma)
    else:  # pragma: no cover - ModelSpec already validates
        raise DomainError(f"unknown family {spec.family!r}")
    gamma = gen_gamma(spec.p, spec.q, spec.gamma_prob, gen)
    return GroundTruth(gamma=gamma, omega=truth.omega, support=truth.support)


def simulate_dataset(
    truth: GroundTruth, n: int, rng: "RngStream | np.random.Generator"
) -> Dataset:
    """Draw one dataset: x standard normal, y = x gamma' + z with z ~ N(0, omega^{-1}).

    Draw order is x then z from the same stream, so the noise realization is
    recoverable as y - x @ gamma.T up to one rounding of the sum.
    """
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    gen = as_generator(rng)
    x = gen.standard_normal((n, truth.q))
    z = mvn_sample(truth.omega, n, gen)
    y = x @ truth.gamma.T + z
    return Dataset(x=x, y=y)
