"""Unbiased risk estimates and one-dimensional selection of the shrinkage level.

Risk functions accept ``omega`` as a scalar or a 1-D array of candidates and
return a matching shape, so a whole grid is scored in one call.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ppas.data import AggregatedStats, SecondMoments
from ppas.errors import DataError, NumericError
from ppas.estimators import PTContext, classical_variance, shrinkage_weights

DEFAULT_GRID_SIZE = 512
GRID_DECADES = 6.0


def cure_single(x: float, y: float, c: float, sigma2: float, gamma: float) -> float:
    """Correlation-aware unbiased risk of ``c * x + (1 - c) * y`` as an estimate of ``E[x]``.

    ``sigma2`` is ``Var(x)`` and ``gamma`` is ``Cov(x, y)``.
    """
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"c must lie in [0, 1], got {c}")
    if c == 1.0:
        return float(sigma2)
    return (2 * c - 1) * sigma2 + 2 * (1 - c) * gamma + ((1 - c) * (x - y)) ** 2


def _squeeze(out: np.ndarray, omega):
    return float(out) if np.ndim(omega) == 0 else out


def _cure_terms(source, target, var, cov, weight_var, omega):
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    var = np.asarray(var, dtype=float)
    cov = np.asarray(cov, dtype=float)
    sizes = {source.size, target.size, var.size, cov.size, np.size(weight_var)}
    if len(sizes) != 1:
        raise DataError(f"length mismatch: {sorted(sizes)}")
    w = shrinkage_weights(omega, weight_var)
    r = 1.0 - w
    d = source - target
    terms = (2 * w - 1) * var + 2 * r * cov + (r * d) ** 2
    return _squeeze(terms.mean(axis=-1), omega)


def cure_compound(pt_vals, z_tildes, ctx: PTContext, omega):
    """Average CURE of the PAS family at shrinkage level ``omega``.

    ``omega = inf`` gives the mean PT variance exactly.
    """
    return _cure_terms(pt_vals, z_tildes, ctx.sigma_tilde2, ctx.gamma_tilde, ctx.sigma_tilde2, omega)


def cure_shrink_classical(y_bars, z_tildes, stats: AggregatedStats, mom: SecondMoments, omega):
    """CURE for shrinking the classical mean; the covariance term vanishes."""
    var = classical_variance(stats, mom)
    return _cure_terms(y_bars, z_tildes, var, np.zeros_like(var), var, omega)


def sure_grand_mean(pt_vals, ctx: PTContext, omega):
    """Unbiased risk of shrinking PT estimates toward their group mean.

    At ``omega = inf`` this is the limit value, the mean PT variance.
    """
    pt_vals = np.asarray(pt_vals, dtype=float)
    var = np.asarray(ctx.sigma_tilde2, dtype=float)
    m = pt_vals.size
    if m < 2:
        raise DataError("grand-mean SURE needs at least two problems")
    if var.size != m:
        raise DataError(f"length mismatch: {m} vs {var.size}")
    d = pt_vals - math.fsum(pt_vals) / m
    om = np.asarray(omega, dtype=float)
    om_b = om.reshape(om.shape + (1,))
    w = shrinkage_weights(om, var)
    r = 1.0 - w
    with np.errstate(invalid="ignore"):
        # r * omega = var * omega / (omega + var) -> var as omega -> inf
        r_omega = np.where(np.isinf(om_b), var, var * om_b / (om_b + var))
    terms = (r * d) ** 2 + r_omega + r * (2.0 / m - 1.0) * var
    return _squeeze(terms.mean(axis=-1), omega)


# ------------------------------------------------------------------ minimization


@dataclass(frozen=True)
class RiskCurve:
    """Objective values on the scanned ``omega`` grid (ascending, ending in ``inf``)."""

    omegas: np.ndarray
    risks: np.ndarray
    argmin_index: int

    @property
    def omega_hat(self) -> float:
        return float(self.omegas[self.argmin_index])

    @property
    def min_risk(self) -> float:
        return float(self.risks[self.argmin_index])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["omega", "risk"])
            for om, r in zip(self.omegas, self.risks):
                w.writerow(["inf" if math.isinf(om) else repr(float(om)), repr(float(r))])


def omega_grid(scale: float, grid_size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """``{0} ∪ scale * logspace(-6, 6, grid_size) ∪ {inf}``."""
    if not scale > 0 or not math.isfinite(scale):
        raise ValueError(f"scale must be positive and finite, got {scale}")
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    k = np.arange(grid_size)
    exps = -GRID_DECADES + (2 * GRID_DECADES) * k / (grid_size - 1)
    return np.concatenate([[0.0], scale * 10.0**exps, [math.inf]])


def grid_scale(variances) -> float:
    """Median of the per-problem variances, or 1 when that is not positive."""
    med = float(np.median(np.asarray(variances, dtype=float)))
    return med if med > 0 and math.isfinite(med) else 1.0


def minimize_omega(
    objective: Callable,
    scale: float,
    grid_size: int = DEFAULT_GRID_SIZE,
    vectorized: bool = True,
) -> RiskCurve:
    """Grid-search the global shrinkage level.

    Args:
        objective: Risk as a function of ``omega``. When ``vectorized`` it is
            called once with the whole grid and must return one value per
            point; otherwise it is called point by point.
        scale: Centre of the log-spaced grid, normally the median variance.
        grid_size: Number of finite positive grid points.
        vectorized: See ``objective``.

    Returns:
        The scanned curve; ties resolve to the smallest ``omega``.

    Raises:
        NumericError: if the objective is non-finite anywhere on the grid.
    """
    omegas = omega_grid(scale, grid_size)
    if vectorized:
        risks = np.asarray(objective(omegas), dtype=float)
    else:
        risks = np.array([objective(float(om)) for om in omegas], dtype=float)
    if risks.shape != omegas.shape:
        raise ValueError(f"objective returned shape {risks.shape}, expected {omegas.shape}")
    bad = ~np.isfinite(risks)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise NumericError(f"risk objective is non-finite at omega={omegas[i]!r}")
    return RiskCurve(omegas=omegas, risks=risks, argmin_index=int(np.argmin(risks)))
