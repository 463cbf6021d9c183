"""Point estimators built from aggregated statistics.

All functions broadcast: pass scalar-valued stats for one problem or
array-valued stats (see :func:`ppas.data.stack_means`) for many.
``math.inf`` is the shrinkage sentinel meaning "no shrinkage".
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ppas.data import AggregatedStats, SecondMoments
from ppas.errors import DataError

INF = math.inf


def variance_floor(raw_var):
    """Smallest admissible estimator variance: ``1e-12 * max(1, raw_var)``."""
    return 1e-12 * np.maximum(1.0, raw_var)


@dataclass(frozen=True)
class PTContext:
    """Power-tuning quantities per problem.

    Attributes:
        lambda_star: Variance-minimizing power-tuning parameter.
        sigma_tilde2: Variance of the power-tuned estimate (floored).
        gamma_tilde: Covariance between the power-tuned estimate and the
            unlabeled prediction mean.
    """

    lambda_star: float | np.ndarray
    sigma_tilde2: float | np.ndarray
    gamma_tilde: float | np.ndarray


@dataclass(frozen=True)
class ShrinkageWeights:
    omega: float
    per_problem: np.ndarray


def shrinkage_weights(omega, var) -> np.ndarray:
    """``omega / (omega + var)``, with ``omega = inf`` mapping to exactly 1.

    ``omega`` may be an array of candidate values; the result then has shape
    ``omega.shape + var.shape``.
    """
    om = np.asarray(omega, dtype=float)
    var = np.asarray(var, dtype=float)
    if np.any(om < 0) or np.any(np.isnan(om)):
        raise ValueError("omega must be >= 0")
    om_b = om.reshape(om.shape + (1,) * var.ndim)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = om_b / (om_b + var)
    w = np.where(np.isinf(om_b), 1.0, w)
    # omega = 0 with zero variance: treat as full shrinkage
    return np.where(om_b == 0, 0.0, w)


def classical(stats: AggregatedStats):
    return stats.y_bar


def prediction_avg(stats: AggregatedStats):
    return stats.z_tilde


def ppi_lambda(stats: AggregatedStats, lam):
    """``y_bar + lam * (z_tilde - z_bar)``; ``lam=0`` is classical, ``lam=1`` vanilla PPI."""
    return stats.y_bar + lam * (stats.z_tilde - stats.z_bar)


def ppi(stats: AggregatedStats):
    return ppi_lambda(stats, 1.0)


def pt_context(stats: AggregatedStats, mom: SecondMoments) -> PTContext:
    """Optimal power tuning and the implied variance/covariance per problem.

    With ``tau2 == 0`` the predictor carries no signal and tuning collapses to
    the classical estimator (``lambda_star = 0``).
    """
    n = np.asarray(stats.n, dtype=float)
    N = np.asarray(stats.N, dtype=float)
    s2 = np.asarray(mom.sigma2, dtype=float)
    t2 = np.asarray(mom.tau2, dtype=float)
    g = np.asarray(mom.gamma, dtype=float)
    base = s2 / n
    ok = t2 > 0
    safe_t2 = np.where(ok, t2, 1.0)
    lam = np.where(ok, (N / (n + N)) * g / safe_t2, 0.0)
    var = np.where(ok, base - (N / (n * (n + N))) * g * g / safe_t2, base)
    var = np.maximum(var, variance_floor(base))
    gt = np.where(ok, g / (n + N), 0.0)
    if np.ndim(lam) == 0:
        lam, var, gt = float(lam), float(var), float(gt)
    return PTContext(lambda_star=lam, sigma_tilde2=var, gamma_tilde=gt)


def pt(stats: AggregatedStats, ctx: PTContext):
    return ppi_lambda(stats, ctx.lambda_star)


def _check_aligned(*arrays):
    sizes = {np.size(a) for a in arrays}
    if len(sizes) != 1:
        raise DataError(f"length mismatch: {sorted(sizes)}")


def pas_assemble(pt_vals, z_tildes, ctx: PTContext, omega_hat: float) -> np.ndarray:
    """Convex combination of PT estimates and unlabeled prediction means.

    Weight on problem ``j``'s PT estimate is ``omega_hat / (omega_hat + sigma_tilde2_j)``.
    The endpoints are exact: ``omega_hat = 0`` returns ``z_tildes`` and
    ``omega_hat = inf`` returns ``pt_vals``.
    """
    pt_vals = np.asarray(pt_vals, dtype=float)
    z_tildes = np.asarray(z_tildes, dtype=float)
    _check_aligned(pt_vals, z_tildes, ctx.sigma_tilde2)
    if omega_hat == 0:
        return z_tildes.copy()
    if math.isinf(omega_hat):
        return pt_vals.copy()
    w = shrinkage_weights(omega_hat, ctx.sigma_tilde2)
    return w * pt_vals + (1.0 - w) * z_tildes


def shrink_classical(stats: AggregatedStats, mom: SecondMoments, omega_hat: float) -> np.ndarray:
    """Shrink the classical mean toward the unlabeled prediction mean."""
    var = classical_variance(stats, mom)
    ctx = PTContext(lambda_star=np.zeros_like(var), sigma_tilde2=var, gamma_tilde=np.zeros_like(var))
    return pas_assemble(stats.y_bar, stats.z_tilde, ctx, omega_hat)


def classical_variance(stats: AggregatedStats, mom: SecondMoments) -> np.ndarray:
    raw = np.asarray(mom.sigma2, dtype=float) / np.asarray(stats.n, dtype=float)
    return np.maximum(raw, variance_floor(raw))


def shrink_average(pt_vals, ctx: PTContext, omega_hat: float) -> np.ndarray:
    """Shrink PT estimates toward their own group mean."""
    pt_vals = np.asarray(pt_vals, dtype=float)
    _check_aligned(pt_vals, ctx.sigma_tilde2)
    if pt_vals.size < 2:
        raise DataError("shrink-average needs at least two problems")
    target = math.fsum(pt_vals) / pt_vals.size
    if math.isinf(omega_hat):
        return pt_vals.copy()
    w = shrinkage_weights(omega_hat, ctx.sigma_tilde2)
    return w * pt_vals + (1.0 - w) * target
