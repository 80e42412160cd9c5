"""Support-recovery scoring and ROC / precision-recall sweeps.

Counts are taken over unordered off-diagonal pairs; every reported ratio is
identical to the ordered-pair convention because numerator and denominator
halve together. Ratios with a zero denominator are reported as NaN, never
silently as 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .edges import EdgeEstimate
from .errors import DimensionMismatch, DomainError
from .inference import SupportMask


@dataclass(frozen=True)
class ConfusionCounts:
    """Edge classification counts over unordered off-diagonal pairs."""

    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricReport:
    """MISR, specificity, sensitivity, precision and Matthews coefficient.

    Undefined ratios (zero denominator) are NaN.
    """

    misr: float
    spe: float
    sen: float
    pre: float
    mcc: float


@dataclass(frozen=True)
class CurvePoint:
    """One sweep point: the grid parameter, sensitivity, and the x-coordinate
    (1 - specificity for ROC, precision for PR)."""

    parameter: float
    sensitivity: float
    second: float
    kind: str


def confusion(estimated: SupportMask, truth: SupportMask) -> ConfusionCounts:
    """Classify every unordered pair against the true support."""
    if estimated.p != truth.p:
        raise DimensionMismatch(
            f"masks disagree on p: {estimated.p} vs {truth.p}"
        )
    p = truth.p
    total = p * (p - 1) // 2
    tp = len(estimated.selected & truth.selected)
    fp = len(estimated.selected - truth.selected)
    fn = len(truth.selected - estimated.selected)
    tn = total - tp - fp - fn
    return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else math.nan


def compute_metrics(c: ConfusionCounts, p: int) -> MetricReport:
    """Score one confusion table on p nodes."""
    total = p * (p - 1) // 2
    if c.total != total:
        raise DimensionMismatch(
            f"counts sum to {c.total}, expected p(p-1)/2 = {total}"
        )
    misr = _ratio(c.fn + c.fp, total)
    spe = _ratio(c.tn, c.tn + c.fp)
    sen = _ratio(c.tp, c.tp + c.fn)
    pre = _ratio(c.tp, c.tp + c.fp)
    denom = (
        float(c.tp + c.fp) * float(c.tp + c.fn) * float(c.tn + c.fp) * float(c.tn + c.fn)
    )
    if denom > 0:
        mcc = (float(c.tp) * c.tn - float(c.fp) * c.fn) / math.sqrt(denom)
    else:
        mcc = math.nan
    return MetricReport(misr=misr, spe=spe, sen=sen, pre=pre, mcc=mcc)


def _mask_from_selection(selected_edges, p: int) -> SupportMask:
    pairs = frozenset((e.pair.i, e.pair.j) for e in selected_edges)
    signs = {
        (e.pair.i, e.pair.j): (1 if e.omega_ij > 0 else -1) for e in selected_edges
    }
    return SupportMask(p=p, selected=pairs, signs=signs)


def curve(
    edges: Sequence[EdgeEstimate],
    truth: SupportMask,
    grid: Sequence[float],
    sweep: str = "pvalue",
    kind: str = "roc",
    n: int = 1,
) -> list[CurvePoint]:
    """Sweep a selection rule over a sorted grid and score each point.

    sweep="pvalue" selects edges with p_value strictly below the cutoff;
    sweep="xi0" applies the adaptive threshold at each grid value. The
    xi0 thresholds are computed as se * sqrt(2 xi0 log p) with
    se = sqrt(fisher_var_inv / n), which is invariant to the (fisher, n)
    factorization, so callers reconstructing edges from standard errors may
    pass n=1 with fisher_var_inv = se**2.
    """
    if len(grid) == 0:
        raise DomainError("sweep grid must be nonempty")
    if any(grid[k] > grid[k + 1] for k in range(len(grid) - 1)):
        raise DomainError("sweep grid must be sorted ascending")
    if sweep not in ("pvalue", "xi0"):
        raise DomainError(f"unknown sweep {sweep!r}")
    if kind not in ("roc", "pr"):
        raise DomainError(f"unknown curve kind {kind!r}")
    p = truth.p
    log_p = math.log(p)
    points = []
    for value in grid:
        if sweep == "pvalue":
            chosen = [e for e in edges if e.p_value < value]
        else:
            if not value > 0:
                raise DomainError(f"xi0 grid values must be positive, got {value}")
            chosen = [
                e
                for e in edges
                if abs(e.omega_ij)
                >= math.sqrt(e.fisher_var_inv / n) * math.sqrt(2.0 * value * log_p)
            ]
        report = compute_metrics(confusion(_mask_from_selection(chosen, p), truth), p)
        second = (1.0 - report.spe) if kind == "roc" else report.pre
        points.append(
            CurvePoint(
                parameter=float(value),
                sensitivity=report.sen,
                second=second,
                kind=kind,
            )
        )
    return points


def default_xi0_grid(num: int = 50) -> np.ndarray:
    """Log-spaced xi0 sweep grid on [0.1, 50]."""
    return np.logspace(math.log10(0.1), math.log10(50.0), num)


def default_pvalue_grid(num: int = 50) -> np.ndarray:
    """Log-spaced P-value cutoff grid on [1e-10, 1]."""
    return np.logspace(-10.0, 0.0, num)
