"""Graph-level decisions on top of edge estimates.

Adaptive thresholding selects edge (i, j) when |omega_ij| reaches

    tau_ij = sqrt(2 xi0 (omega_ii omega_jj + omega_ij^2) log(p) / n),

computed from that edge's own pair-level diagonals, so the cut adapts to the
per-entry asymptotic variance instead of applying one global level. A capped
variant additionally zeroes implausibly large entries, and Benjamini-Hochberg
adjustment turns per-edge P-values into q-values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .edges import EdgeEstimate
from .errors import DimensionMismatch, DomainError

#: Theory requires xi0 > 2; the experiments run at exactly 2, which is kept
#: as the default and flagged via ThresholdedPrecision.within_theory.
DEFAULT_XI0 = 2.0


@dataclass(frozen=True)
class SupportMask:
    """Selected unordered pairs and their signs on p nodes."""

    p: int
    selected: frozenset
    signs: Mapping

    def __post_init__(self):
        for (i, j) in self.selected:
            if not (0 <= i < j < self.p):
                raise DomainError(f"pair ({i}, {j}) outside [0, {self.p})")
        if set(self.signs.keys()) != set(self.selected):
            raise DomainError("signs must be defined exactly on selected pairs")

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "SupportMask":
        """Exact nonzero pattern (and signs) of a symmetric matrix's off-diagonal."""
        m = np.asarray(matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got {m.shape}")
        p = m.shape[0]
        iu, ju = np.nonzero(np.triu(m, k=1))
        selected = frozenset((int(i), int(j)) for i, j in zip(iu, ju))
        signs = {
            (int(i), int(j)): (1 if m[i, j] > 0 else -1) for i, j in zip(iu, ju)
        }
        return cls(p=p, selected=selected, signs=signs)


@dataclass(frozen=True)
class ThresholdedPrecision:
    """Thresholded symmetric estimate; off-diagonals are 0 or the raw value."""

    matrix: np.ndarray
    xi0: float
    capped: bool = False
    within_theory: bool = True


def threshold_level(edge: EdgeEstimate, n: int, p: int, xi0: float) -> float:
    """tau_ij for one edge from its pair-local diagonals."""
    return math.sqrt(2.0 * xi0 * edge.fisher_var_inv * math.log(p) / n)


def antac_threshold(
    edges: Sequence[EdgeEstimate], n: int, p: int, xi0: float = DEFAULT_XI0
) -> tuple[SupportMask, ThresholdedPrecision]:
    """Adaptive entry-wise thresholding of an edge table.

    Values xi0 <= 2 are permitted (ROC sweeps go well below 2) but flagged
    as outside the supported regime via ``within_theory``.
    """
    if not xi0 > 0:
        raise DomainError(f"xi0 must be positive, got {xi0}")
    matrix = np.zeros((p, p))
    diag_sum = np.zeros(p)
    diag_count = np.zeros(p, dtype=np.int64)
    selected = set()
    signs = {}
    for edge in edges:
        i, j = edge.pair.i, edge.pair.j
        diag_sum[i] += edge.omega_ii
        diag_sum[j] += edge.omega_jj
        diag_count[i] += 1
        diag_count[j] += 1
        if abs(edge.omega_ij) >= threshold_level(edge, n, p, xi0):
            selected.add((i, j))
            signs[(i, j)] = 1 if edge.omega_ij > 0 else -1
            matrix[i, j] = edge.omega_ij
            matrix[j, i] = edge.omega_ij
    has_diag = diag_count > 0
    matrix[np.diag_indices(p)] = np.where(
        has_diag, diag_sum / np.where(has_diag, diag_count, 1), 0.0
    )
    mask = SupportMask(p=p, selected=frozenset(selected), signs=signs)
    thresholded = ThresholdedPrecision(
        matrix=matrix, xi0=xi0, capped=False, within_theory=xi0 > 2.0
    )
    return mask, thresholded


def cap_estimator(
    thresholded: ThresholdedPrecision, p: int
) -> ThresholdedPrecision:
    """Zero off-diagonal entries with magnitude above log(p); sets the cap flag."""
    matrix = thresholded.matrix.copy()
    cap = math.log(p)
    off = ~np.eye(matrix.shape[0], dtype=bool)
    matrix[off & (np.abs(matrix) > cap)] = 0.0
    return ThresholdedPrecision(
        matrix=matrix,
        xi0=thresholded.xi0,
        capped=True,
        within_theory=thresholded.within_theory,
    )


def fdr_adjust(p_values) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted P-values (q-values).

    q_(k) = min_{r >= k} m p_(r) / r, clipped at 1. A function of the
    multiset of inputs: reordering the inputs permutes the outputs
    identically.
    """
    p = np.asarray(p_values, dtype=np.float64)
    if p.ndim != 1:
        p = p.reshape(-1)
    if p.size == 0:
        return np.zeros(0)
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise DomainError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    ranked = p[order] * m / np.arange(1, m + 1)
    ranked = np.minimum.accumulate(ranked[::-1])[::-1]
    ranked = np.minimum(ranked, 1.0)
    q = np.empty(m)
    q[order] = ranked
    return q
