"""Monte-Carlo benchmark harness.

Synthetic runs redraw ``eta`` every replicate and score against the true
means (a Bayes-risk estimate). Real-data runs fix a pseudo-truth per problem
from all of its rows and only re-split labeled/unlabeled each replicate; all
estimators see the same split.

Replicates may run on a thread pool; results are reduced in replicate order
so reports do not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ppas.compound import ESTIMATORS, SAMPLE_ONLY, run_estimators
from ppas.data import ProblemData, get_means, sample_moments, stack_means, stack_moments
from ppas.errors import DataError
from ppas.synth import SynthConfig, draw_batch, synth_params

DEFAULT_ESTIMATORS = ("classical", "prediction_avg", "ppi", "pt", "shrink_classical", "shrink_avg", "pas")


@dataclass(frozen=True)
class SplitPlan:
    """``ratio`` is the unlabeled fraction ``r``: ``N = floor(r T)``, ``n = T - N``."""

    ratio: float = 0.8
    replicates: int = 200
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise ValueError(f"ratio must lie in (0, 1), got {self.ratio}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")

    def sizes(self, total: int) -> tuple[int, int]:
        # round first so 0.29 * 100 is not floored to 28
        N = math.floor(round(self.ratio * total, 9))
        return total - N, N


@dataclass(frozen=True)
class EstimatorRow:
    estimator: str
    mse: float
    se: float
    improved_pct: float | None  # None for the classical baseline
    improved_se: float | None


@dataclass
class BenchReport:
    rows: list[EstimatorRow]
    config: dict
    seed: int
    wall_time: float = field(default=0.0, compare=False)

    def row(self, name: str) -> EstimatorRow:
        for r in self.rows:
            if r.estimator == name:
                return r
        raise KeyError(name)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["estimator", "mse", "se", "improved_pct", "improved_se"])
        for r in self.rows:
            if r.improved_pct is None:
                imp, imp_se = "baseline", "baseline"
            else:
                imp, imp_se = repr(r.improved_pct), repr(r.improved_se)
            w.writerow([r.estimator, repr(r.mse), repr(r.se), imp, imp_se])
        return buf.getvalue()

    def to_json(self, include_timing: bool = False) -> str:
        # wall time is excluded by default so identical runs give identical bytes
        doc = {
            "config": self.config,
            "seed": self.seed,
            "results": [
                {
                    **asdict(r),
                    "improved_pct": "baseline" if r.improved_pct is None else r.improved_pct,
                    "improved_se": "baseline" if r.improved_pct is None else r.improved_se,
                }
                for r in self.rows
            ],
        }
        if include_timing:
            doc["wall_time"] = self.wall_time
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown format {fmt!r}")


def _sd_over_sqrt_k(values: np.ndarray) -> float:
    k = values.size
    if k < 2:
        raise DataError("standard errors need at least two replicates")
    return float(np.std(values, ddof=1) / math.sqrt(k))


def metrics(
    estimates: dict[str, np.ndarray],
    truths: np.ndarray,
    baseline: str = "classical",
) -> list[EstimatorRow]:
    """Score estimates collected over ``K`` replicates.

    Args:
        estimates: Estimator name to an array of shape ``(K, m)``. Must
            include ``baseline``.
        truths: Shape ``(K, m)`` or ``(m,)`` (the same truth every replicate).
        baseline: Reference estimator for the improved-percentage metric;
            its own row reports ``None`` there.

    MSE is the mean of per-replicate compound losses; SE is their sample
    standard deviation over ``sqrt(K)``. A problem counts as improved only if
    its squared error is strictly below the baseline's.
    """
    if baseline not in estimates:
        raise DataError(f"baseline estimator {baseline!r} missing")
    base_err = (np.asarray(estimates[baseline]) - truths) ** 2
    rows = []
    for name, vals in estimates.items():
        vals = np.asarray(vals, dtype=float)
        if vals.shape != base_err.shape:
            raise DataError(f"{name}: shape {vals.shape} does not match {base_err.shape}")
        err = (vals - truths) ** 2
        losses = err.mean(axis=1)
        mse, se = float(losses.mean()), _sd_over_sqrt_k(losses)
        if name == baseline:
            rows.append(EstimatorRow(name, mse, se, None, None))
            continue
        improved = 100.0 * (err < base_err).mean(axis=1)
        rows.append(EstimatorRow(name, mse, se, float(improved.mean()), _sd_over_sqrt_k(improved)))
    return rows


def _run_replicates(fn: Callable[[int], dict], replicates: int, workers: int) -> list[dict]:
    if workers <= 1:
        return [fn(k) for k in range(replicates)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(replicates)))


def _ordered_names(estimators: Sequence[str]) -> list[str]:
    names = list(dict.fromkeys(estimators))
    unknown = [n for n in names if n not in ESTIMATORS]
    if unknown:
        raise ValueError(f"unknown estimators {unknown}; choose from {ESTIMATORS}")
    if "classical" not in names:
        names.insert(0, "classical")
    return names


def _collect(results: list[dict], names: Sequence[str]):
    est = {name: np.stack([r["est"][name] for r in results]) for name in names}
    return est


# ------------------------------------------------------------------- synthetic


def run_synth_bench(
    cfg: SynthConfig,
    replicates: int = 200,
    moments_mode: str = "known",
    estimators: Sequence[str] = DEFAULT_ESTIMATORS,
    workers: int = 1,
    grid_size: int = 512,
) -> BenchReport:
    """Bayes-risk benchmark on the synthetic model (fresh ``eta`` each replicate)."""
    if moments_mode not in ("known", "sample"):
        raise ValueError("moments_mode must be 'known' or 'sample'")
    names = _ordered_names(estimators)
    need_sample = moments_mode == "sample" or any(n in SAMPLE_ONLY for n in names)
    if need_sample and cfg.n < 2:
        raise DataError("sample moments need n >= 2")

    def one(k: int) -> dict:
        batch = draw_batch(cfg, k)
        stats = batch.means()
        sample = batch.sample_moments() if need_sample else None
        moms = synth_params(batch.eta, cfg).moments() if moments_mode == "known" else sample
        out = run_estimators(names, stats, moms, sample, grid_size)
        return {"est": out, "theta": batch.eta**2}

    t0 = time.perf_counter()
    results = _run_replicates(one, replicates, workers)
    truths = np.stack([r["theta"] for r in results])
    rows = metrics(_collect(results, names), truths)
    config = {
        "mode": "synth",
        **{k: getattr(cfg, k) for k in ("m", "n", "N", "psi", "c", "predictor")},
        "replicates": replicates,
        "moments": moments_mode,
        "estimators": names,
        "grid_size": grid_size,
    }
    return BenchReport(rows=rows, config=config, seed=cfg.seed, wall_time=time.perf_counter() - t0)


# ------------------------------------------------------------------- real data


@dataclass(frozen=True)
class ProblemRows:
    """All rows of one problem with outcomes observed everywhere."""

    id: str
    y: np.ndarray
    f: np.ndarray

    @property
    def T(self) -> int:
        return self.y.size


def full_rows(problems: Sequence[ProblemData]) -> list[ProblemRows]:
    """Pool labeled and unlabeled rows; every row must carry an outcome."""
    out = []
    for p in problems:
        if p.y_unlabeled is None or np.any(np.isnan(p.y_unlabeled)):
            raise DataError(f"problem {p.id!r}: benchmark mode needs y on every row")
        out.append(
            ProblemRows(
                id=p.id, y=np.concatenate([p.y, p.y_unlabeled]), f=np.concatenate([p.z, p.z_unlabeled])
            )
        )
    return out


def pseudo_truth(rows: Sequence[ProblemRows]) -> np.ndarray:
    """Mean outcome over all rows of each problem."""
    vals = []
    for r in rows:
        if np.any(np.isnan(r.y)):
            raise DataError(f"problem {r.id!r}: missing y in benchmark mode")
        vals.append(math.fsum(r.y) / r.T)
    return np.array(vals)


def split_rng(seed: int, replicate: int, problem: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate), int(problem)))
    return np.random.Generator(np.random.Philox(ss))


def split_replicate(rows: ProblemRows, plan: SplitPlan, k: int, j: int) -> ProblemData:
    """Random labeled/unlabeled split of one problem for replicate ``k``.

    The permutation comes from the ``(seed, k, j)`` substream; the first ``n``
    permuted rows are labeled, the rest keep only their predictions.
    """
    n, N = plan.sizes(rows.T)
    if n < 2:
        raise DataError(f"problem {rows.id!r}: only n={n} labeled rows at ratio {plan.ratio} (T={rows.T})")
    if N < 1:
        raise DataError(f"problem {rows.id!r}: no unlabeled rows at ratio {plan.ratio} (T={rows.T})")
    perm = split_rng(plan.seed, k, j).permutation(rows.T)
    lab, unl = perm[:n], perm[n:]
    return ProblemData(id=rows.id, y=rows.y[lab], z=rows.f[lab], z_unlabeled=rows.f[unl])


def run_real_bench(
    problems: Sequence[ProblemData] | Sequence[ProblemRows],
    plan: SplitPlan,
    moments_mode: str = "sample",
    estimators: Sequence[str] = ESTIMATORS,
    workers: int = 1,
    grid_size: int = 512,
) -> BenchReport:
    """Split-resampling benchmark against full-data pseudo-truths."""
    if moments_mode != "sample":
        raise ValueError("real-data benchmarks only support sample moments")
    rows = list(problems)
    if rows and isinstance(rows[0], ProblemData):
        rows = full_rows(rows)
    if len(rows) < 2:
        raise DataError("a compound benchmark needs at least two problems")
    names = _ordered_names(estimators)
    truth = pseudo_truth(rows)

    def one(k: int) -> dict:
        split = [split_replicate(r, plan, k, j) for j, r in enumerate(rows)]
        stats = stack_means([get_means(p) for p in split])
        moms = stack_moments([sample_moments(p) for p in split])
        return {"est": run_estimators(names, stats, moms, moms, grid_size)}

    t0 = time.perf_counter()
    results = _run_replicates(one, plan.replicates, workers)
    report_rows = metrics(_collect(results, names), truth)
    config = {
        "mode": "bench",
        "m": len(rows),
        "ratio": plan.ratio,
        "replicates": plan.replicates,
        "moments": moments_mode,
        "estimators": names,
        "grid_size": grid_size,
    }
    return BenchReport(rows=report_rows, config=config, seed=plan.seed, wall_time=time.perf_counter() - t0)


def run_ratio_sweep(
    problems, ratios: Sequence[float], replicates: int, seed: int, **kw
) -> list[BenchReport]:
    return [run_real_bench(problems, SplitPlan(r, replicates, seed), **kw) for r in ratios]
