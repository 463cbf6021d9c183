"""End-to-end compound estimators: PAS, shrink-classical, shrink-average.

Each ``fit_*`` takes array-valued stats and moments and returns the estimates
together with the scanned risk curve, so callers can inspect the selected
shrinkage level.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ppas import estimators as est
from ppas.data import AggregatedStats, ProblemData, SecondMoments, get_means, sample_moments, stack_means, stack_moments
from ppas.errors import DataError
from ppas.risk import (
    DEFAULT_GRID_SIZE,
    RiskCurve,
    cure_compound,
    cure_shrink_classical,
    grid_scale,
    minimize_omega,
    sure_grand_mean,
)
from ppas.uni import fit_unipas, lambda_hat_clip, uni_plugins, unipt

ESTIMATORS = (
    "classical",
    "prediction_avg",
    "ppi",
    "pt",
    "shrink_classical",
    "shrink_avg",
    "pas",
    "unipt",
    "unipas",
)
# estimators that only ever use sample moments
SAMPLE_ONLY = frozenset({"unipt", "unipas"})


@dataclass(frozen=True)
class ShrinkFit:
    estimates: np.ndarray
    curve: RiskCurve

    @property
    def omega_hat(self) -> float:
        return self.curve.omega_hat


def fit_pas(stats: AggregatedStats, moms: SecondMoments, grid_size: int = DEFAULT_GRID_SIZE) -> ShrinkFit:
    """Power-tune each problem, then shrink toward the unlabeled prediction mean."""
    ctx = est.pt_context(stats, moms)
    pt_vals = np.asarray(est.pt(stats, ctx), dtype=float)
    z_t = np.asarray(stats.z_tilde, dtype=float)
    curve = minimize_omega(
        lambda om: cure_compound(pt_vals, z_t, ctx, om), grid_scale(ctx.sigma_tilde2), grid_size
    )
    return ShrinkFit(est.pas_assemble(pt_vals, z_t, ctx, curve.omega_hat), curve)


def fit_shrink_classical(
    stats: AggregatedStats, moms: SecondMoments, grid_size: int = DEFAULT_GRID_SIZE
) -> ShrinkFit:
    y_bar = np.asarray(stats.y_bar, dtype=float)
    z_t = np.asarray(stats.z_tilde, dtype=float)
    var = est.classical_variance(stats, moms)
    curve = minimize_omega(
        lambda om: cure_shrink_classical(y_bar, z_t, stats, moms, om), grid_scale(var), grid_size
    )
    return ShrinkFit(est.shrink_classical(stats, moms, curve.omega_hat), curve)


def fit_shrink_average(
    stats: AggregatedStats, moms: SecondMoments, grid_size: int = DEFAULT_GRID_SIZE
) -> ShrinkFit:
    ctx = est.pt_context(stats, moms)
    pt_vals = np.asarray(est.pt(stats, ctx), dtype=float)
    curve = minimize_omega(
        lambda om: sure_grand_mean(pt_vals, ctx, om), grid_scale(ctx.sigma_tilde2), grid_size
    )
    return ShrinkFit(est.shrink_average(pt_vals, ctx, curve.omega_hat), curve)


def pas(problems: Sequence[ProblemData], moments: SecondMoments | None = None) -> np.ndarray:
    """PAS estimates for a list of problems.

    Without ``moments`` the per-problem sample moments are plugged in.
    """
    stats = stack_means([get_means(p) for p in problems])
    if moments is None:
        moments = stack_moments([sample_moments(p) for p in problems])
    return fit_pas(stats, moments).estimates


def run_estimators(
    names: Sequence[str],
    stats: AggregatedStats,
    moms: SecondMoments | None,
    sample_moms: SecondMoments | None = None,
    grid_size: int = DEFAULT_GRID_SIZE,
) -> dict[str, np.ndarray]:
    """Evaluate the named estimators on one compound dataset.

    Args:
        names: Subset of :data:`ESTIMATORS`.
        stats: Array-valued aggregated statistics.
        moms: Moments fed to the moment-based estimators (known or sample).
        sample_moms: Sample moments for UniPT/UniPAS; defaults to ``moms``
            when that already holds sample moments.
    """
    unknown = [n for n in names if n not in ESTIMATORS]
    if unknown:
        raise ValueError(f"unknown estimators {unknown}; choose from {ESTIMATORS}")
    if sample_moms is None and moms is not None and moms.source == "sample":
        sample_moms = moms
    if sample_moms is None and any(n in SAMPLE_ONLY for n in names):
        raise DataError("UniPT/UniPAS need sample moments")
    out: dict[str, np.ndarray] = {}
    ctx = None
    for name in names:
        if name == "classical":
            out[name] = np.asarray(est.classical(stats), dtype=float)
        elif name == "prediction_avg":
            out[name] = np.asarray(est.prediction_avg(stats), dtype=float)
        elif name == "ppi":
            out[name] = np.asarray(est.ppi(stats), dtype=float)
        elif name == "pt":
            ctx = ctx or est.pt_context(stats, moms)
            out[name] = np.asarray(est.pt(stats, ctx), dtype=float)
        elif name == "shrink_classical":
            out[name] = fit_shrink_classical(stats, moms, grid_size).estimates
        elif name == "shrink_avg":
            out[name] = fit_shrink_average(stats, moms, grid_size).estimates
        elif name == "pas":
            out[name] = fit_pas(stats, moms, grid_size).estimates
        elif name == "unipt":
            sizes = np.column_stack([np.asarray(stats.n), np.asarray(stats.N)])
            lam = lambda_hat_clip(sample_moms, sizes)
            out[name] = np.asarray(unipt(stats, uni_plugins(sample_moms, sizes, lam)), dtype=float)
        elif name == "unipas":
            out[name] = fit_unipas(stats, sample_moms, grid_size).estimates
    return out
