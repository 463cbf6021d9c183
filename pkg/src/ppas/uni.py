"""Global power tuning and adaptive shrinkage when second moments are unknown.

A single clipped tuning parameter is shared by all problems and every moment
is replaced by its sample estimate; the shrinkage weights use moments
averaged across problems.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ppas.data import AggregatedStats, ProblemData, SecondMoments, get_means, sample_moments, stack_means, stack_moments
from ppas.errors import DataError, DegenerateWarning
from ppas.estimators import ppi_lambda, shrinkage_weights, variance_floor
from ppas.risk import RiskCurve, grid_scale, minimize_omega, DEFAULT_GRID_SIZE


@dataclass(frozen=True)
class UniContext:
    """Plug-in quantities shared by UniPT and UniPAS.

    Attributes:
        lambda_hat_clip: Global tuning parameter clipped to ``[0, 1]``.
        sigma_dot2: Per-problem sample variance of the UniPT estimate.
        gamma_dot: Per-problem sample covariance of UniPT with the
            unlabeled prediction mean.
        sigma_check2: Per-problem variance built from group-averaged moments;
            it sets the shrinkage weights.
        sigma_bar2, tau_bar2, gamma_bar: Group averages of the sample moments.
    """

    lambda_hat_clip: float
    sigma_dot2: np.ndarray
    gamma_dot: np.ndarray
    sigma_check2: np.ndarray
    sigma_bar2: float
    tau_bar2: float
    gamma_bar: float


def _sizes(sizes) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(sizes, dtype=float).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def _global_lambda(gamma, tau2, n, N) -> float:
    num = math.fsum(np.asarray(gamma, dtype=float) / n)
    den = math.fsum((n + N) / (n * N) * np.asarray(tau2, dtype=float))
    if den == 0:
        warnings.warn(
            "all prediction variances are zero; global power tuning falls back to 0",
            DegenerateWarning,
            stacklevel=3,
        )
        return 0.0
    return num / den


def lambda_hat_clip(moms: SecondMoments, sizes) -> float:
    """Shared tuning parameter from sample moments, clipped to ``[0, 1]``.

    ``sizes`` is a sequence of ``(n_j, N_j)`` pairs aligned with ``moms``.
    """
    n, N = _sizes(sizes)
    if n.size != np.size(moms.gamma):
        raise DataError("sizes and moments are not aligned")
    return float(np.clip(_global_lambda(moms.gamma, moms.tau2, n, N), 0.0, 1.0))


def _pt_variance(s2, t2, g, n, N, lam):
    return s2 / n + (N + n) / (N * n) * lam**2 * t2 - (2.0 / n) * lam * g


def uni_plugins(moms: SecondMoments, sizes, lam_clip: float) -> UniContext:
    n, N = _sizes(sizes)
    s2 = np.asarray(moms.sigma2, dtype=float).reshape(-1)
    t2 = np.asarray(moms.tau2, dtype=float).reshape(-1)
    g = np.asarray(moms.gamma, dtype=float).reshape(-1)
    sigma_dot2 = _pt_variance(s2, t2, g, n, N, lam_clip)
    gamma_dot = lam_clip * t2 / N
    s_bar = math.fsum(s2) / s2.size
    t_bar = math.fsum(t2) / t2.size
    g_bar = math.fsum(g) / g.size
    check = _pt_variance(s_bar, t_bar, g_bar, n, N, lam_clip)
    check = np.maximum(check, variance_floor(s_bar / n))
    return UniContext(
        lambda_hat_clip=float(lam_clip),
        sigma_dot2=sigma_dot2,
        gamma_dot=gamma_dot,
        sigma_check2=check,
        sigma_bar2=s_bar,
        tau_bar2=t_bar,
        gamma_bar=g_bar,
    )


def unipt(stats: AggregatedStats, uni: UniContext):
    # adds lambda * (z_tilde - z_bar), the variance-reducing orientation
    return ppi_lambda(stats, uni.lambda_hat_clip)


def cure_hat(upt_vals, z_tildes, uni: UniContext, omega):
    """Plug-in CURE for the UniPAS family.

    Weights use ``sigma_check2``; the risk terms use ``sigma_dot2`` and
    ``gamma_dot``.
    """
    upt_vals = np.asarray(upt_vals, dtype=float)
    z_tildes = np.asarray(z_tildes, dtype=float)
    if upt_vals.size != z_tildes.size or upt_vals.size != uni.sigma_dot2.size:
        raise DataError("length mismatch")
    w = shrinkage_weights(omega, uni.sigma_check2)
    r = 1.0 - w
    terms = (2 * w - 1) * uni.sigma_dot2 + 2 * r * uni.gamma_dot + (r * (upt_vals - z_tildes)) ** 2
    out = terms.mean(axis=-1)
    return float(out) if np.ndim(omega) == 0 else out


@dataclass(frozen=True)
class UniPASFit:
    estimates: np.ndarray
    unipt: np.ndarray
    context: UniContext
    curve: RiskCurve

    @property
    def omega_hat(self) -> float:
        return self.curve.omega_hat


def fit_unipas(stats: AggregatedStats, moms: SecondMoments, grid_size: int = DEFAULT_GRID_SIZE) -> UniPASFit:
    """UniPAS on array-valued stats and sample moments."""
    if moms.source != "sample":
        raise DataError("UniPAS expects sample moments")
    sizes = np.column_stack([np.asarray(stats.n), np.asarray(stats.N)])
    lam = lambda_hat_clip(moms, sizes)
    uni = uni_plugins(moms, sizes, lam)
    upt = np.asarray(unipt(stats, uni), dtype=float)
    z_t = np.asarray(stats.z_tilde, dtype=float)
    curve = minimize_omega(lambda om: cure_hat(upt, z_t, uni, om), grid_scale(uni.sigma_check2), grid_size)
    om = curve.omega_hat
    if om == 0:
        est = z_t.copy()
    elif math.isinf(om):
        est = upt.copy()
    else:
        w = shrinkage_weights(om, uni.sigma_check2)
        est = w * upt + (1 - w) * z_t
    return UniPASFit(estimates=est, unipt=upt, context=uni, curve=curve)


def unipas(problems: Sequence[ProblemData], grid_size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Fully data-driven UniPAS estimates, one per problem (all need ``n >= 2``)."""
    stats = stack_means([get_means(p) for p in problems])
    moms = stack_moments([sample_moments(p) for p in problems])
    return fit_unipas(stats, moms, grid_size).estimates
