"""Domain types, CSV ingestion, aggregated statistics and sample moments.

Every estimator in the package consumes only outcomes ``y``, predictions on
labeled rows ``z`` and predictions on unlabeled rows. Covariates never enter.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, NamedTuple

import numpy as np

from ppas.errors import DataError, NumericError

__all__ = [
    "LabeledPair",
    "ProblemData",
    "AggregatedStats",
    "SecondMoments",
    "ingest_csv",
    "write_csv",
    "read_moments_csv",
    "get_means",
    "sample_moments",
    "stack_means",
    "stack_moments",
]

CSV_COLUMNS = ("problem_id", "split", "y", "f")
MOMENT_COLUMNS = ("problem_id", "sigma2", "tau2", "gamma")


class LabeledPair(NamedTuple):
    """One labeled observation: gold-standard outcome and model prediction."""

    y: float
    z: float


def _as_finite_1d(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class ProblemData:
    """Labeled pairs and unlabeled predictions for one estimation problem.

    Attributes:
        id: Problem identifier.
        y: Labeled outcomes, shape ``(n,)``.
        z: Predictions on the labeled rows, shape ``(n,)``.
        z_unlabeled: Predictions on the unlabeled rows, shape ``(N,)``.
        y_unlabeled: Outcomes attached to unlabeled rows, if the source file
            carried them. NaN marks a missing value. Never used by the
            estimators; only benchmark pseudo-truths read it.
    """

    id: str
    y: np.ndarray
    z: np.ndarray
    z_unlabeled: np.ndarray
    y_unlabeled: np.ndarray | None = field(default=None)

    def __post_init__(self):
        y = _as_finite_1d(self.y, f"problem {self.id!r}: y")
        z = _as_finite_1d(self.z, f"problem {self.id!r}: labeled predictions")
        zu = _as_finite_1d(self.z_unlabeled, f"problem {self.id!r}: unlabeled predictions")
        if y.shape != z.shape:
            raise DataError(f"problem {self.id!r}: {y.size} outcomes but {z.size} predictions")
        if y.size < 1:
            raise DataError(f"problem {self.id!r}: no labeled rows")
        if zu.size < 1:
            raise DataError(f"problem {self.id!r}: no unlabeled rows")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "z_unlabeled", zu)
        if self.y_unlabeled is not None:
            yu = np.asarray(self.y_unlabeled, dtype=float).reshape(-1)
            if yu.shape != zu.shape:
                raise DataError(f"problem {self.id!r}: y_unlabeled length mismatch")
            object.__setattr__(self, "y_unlabeled", yu)

    @classmethod
    def from_pairs(
        cls, id: str, labeled: Iterable[tuple[float, float]], unlabeled_preds: Iterable[float]
    ) -> ProblemData:
        pairs = [LabeledPair(*p) for p in labeled]
        return cls(
            id=id,
            y=[p.y for p in pairs],
            z=[p.z for p in pairs],
            z_unlabeled=list(unlabeled_preds),
        )

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def N(self) -> int:
        return self.z_unlabeled.size

    @property
    def labeled(self) -> list[LabeledPair]:
        return [LabeledPair(float(a), float(b)) for a, b in zip(self.y, self.z)]

    def __eq__(self, other):
        if not isinstance(other, ProblemData):
            return NotImplemented
        same_yu = (self.y_unlabeled is None and other.y_unlabeled is None) or (
            self.y_unlabeled is not None
            and other.y_unlabeled is not None
            and np.array_equal(self.y_unlabeled, other.y_unlabeled, equal_nan=True)
        )
        return (
            self.id == other.id
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.z, other.z)
            and np.array_equal(self.z_unlabeled, other.z_unlabeled)
            and same_yu
        )


@dataclass(frozen=True)
class AggregatedStats:
    """Per-problem means.

    Fields hold scalars for a single problem or 1-D arrays (one entry per
    problem) for a compound collection; every estimator broadcasts over both.
    """

    y_bar: float | np.ndarray
    z_bar: float | np.ndarray
    z_tilde: float | np.ndarray
    n: int | np.ndarray
    N: int | np.ndarray

    def __len__(self) -> int:
        return np.size(self.y_bar)


@dataclass(frozen=True)
class SecondMoments:
    """Variance of the outcome, variance of the prediction and their covariance.

    ``source="known"`` moments obey Cauchy-Schwarz; sample moments need not.
    Like :class:`AggregatedStats`, fields may be scalars or per-problem arrays.
    """

    sigma2: float | np.ndarray
    tau2: float | np.ndarray
    gamma: float | np.ndarray
    source: Literal["known", "sample"] = "known"

    def __post_init__(self):
        if self.source not in ("known", "sample"):
            raise ValueError(f"unknown moment source {self.source!r}")
        if np.any(np.asarray(self.sigma2) < 0) or np.any(np.asarray(self.tau2) < 0):
            raise DataError("variances must be non-negative")
        if self.source == "known":
            s2, t2, g = (np.asarray(v, dtype=float) for v in (self.sigma2, self.tau2, self.gamma))
            # relative slack for round-off in closed-form moments
            if np.any(g * g > s2 * t2 * (1 + 1e-9) + 1e-300):
                raise DataError("known moments violate Cauchy-Schwarz: gamma^2 > sigma2 * tau2")


def _mean(values: np.ndarray) -> float:
    return math.fsum(values) / len(values)


def get_means(p: ProblemData) -> AggregatedStats:
    """Means of labeled outcomes, labeled predictions and unlabeled predictions."""
    return AggregatedStats(
        y_bar=_mean(p.y), z_bar=_mean(p.z), z_tilde=_mean(p.z_unlabeled), n=p.n, N=p.N
    )


def sample_moments(p: ProblemData) -> SecondMoments:
    """Unbiased sample estimates of ``(sigma2, tau2, gamma)`` for one problem.

    The outcome variance uses divisor ``n - 1``. The prediction variance pools
    labeled and unlabeled predictions around their pooled mean with divisor
    ``n + N - 1``. The covariance centers outcomes at their labeled mean and
    predictions at the pooled mean, divisor ``n - 1``.

    Raises:
        DataError: if the problem has fewer than two labeled rows.
        NumericError: if a moment overflows.
    """
    n, N = p.n, p.N
    if n < 2:
        raise DataError(f"problem {p.id!r}: sample moments need n >= 2, got n={n}")
    y_bar = _mean(p.y)
    pooled = np.concatenate([p.z, p.z_unlabeled])
    z_pool = _mean(pooled)
    dy = p.y - y_bar
    dz = pooled - z_pool
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            sigma2 = math.fsum(dy * dy) / (n - 1)
            tau2 = math.fsum(dz * dz) / (n + N - 1)
            gamma = math.fsum(dy * (p.z - z_pool)) / (n - 1)
    except (OverflowError, ValueError):
        sigma2 = tau2 = gamma = math.nan
    if not all(map(math.isfinite, (sigma2, tau2, gamma))):
        raise NumericError(f"problem {p.id!r}: sample moments overflow")
    return SecondMoments(sigma2=sigma2, tau2=tau2, gamma=gamma, source="sample")


def stack_means(stats: Sequence[AggregatedStats]) -> AggregatedStats:
    """Turn a list of single-problem stats into one array-valued instance."""
    return AggregatedStats(
        y_bar=np.array([s.y_bar for s in stats], dtype=float),
        z_bar=np.array([s.z_bar for s in stats], dtype=float),
        z_tilde=np.array([s.z_tilde for s in stats], dtype=float),
        n=np.array([s.n for s in stats], dtype=int),
        N=np.array([s.N for s in stats], dtype=int),
    )


def stack_moments(moms: Sequence[SecondMoments]) -> SecondMoments:
    sources = {m.source for m in moms}
    if len(sources) != 1:
        raise ValueError("cannot stack moments of mixed provenance")
    return SecondMoments(
        sigma2=np.array([m.sigma2 for m in moms], dtype=float),
        tau2=np.array([m.tau2 for m in moms], dtype=float),
        gamma=np.array([m.gamma for m in moms], dtype=float),
        source=sources.pop(),
    )


# --------------------------------------------------------------------------- CSV


def _parse_float(text: str, col: str, rowno: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {rowno}: column {col!r} is not numeric: {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"row {rowno}: column {col!r} is not finite: {text!r}")
    return value


def _read_rows(path: str | Path):
    """Yield ``(rowno, problem_id, split, y_or_None, f)``; header is row 1."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file, header row required")
        missing = [c for c in CSV_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        for rowno, rec in enumerate(reader, start=2):
            pid = (rec["problem_id"] or "").strip()
            if not pid:
                raise DataError(f"row {rowno}: empty problem_id")
            split = (rec["split"] or "").strip()
            if split not in ("labeled", "unlabeled"):
                raise DataError(f"row {rowno}: split must be 'labeled' or 'unlabeled', got {split!r}")
            f = _parse_float((rec["f"] or "").strip(), "f", rowno)
            y_text = (rec["y"] or "").strip()
            if y_text == "":
                if split == "labeled":
                    raise DataError(f"row {rowno}: labeled row without y")
                y = None
            else:
                y = _parse_float(y_text, "y", rowno)
            yield rowno, pid, split, y, f


def ingest_csv(path: str | Path) -> list[ProblemData]:
    """Read the long-format problem CSV.

    Columns are ``problem_id, split, y, f``. ``split`` is ``labeled`` or
    ``unlabeled``; ``y`` may be empty on unlabeled rows. Problems appear in
    order of first occurrence.

    Raises:
        DataError: on schema violations, naming the offending row.
    """
    order: list[str] = []
    acc: dict[str, dict[str, list]] = {}
    first_row: dict[str, int] = {}
    for rowno, pid, split, y, f in _read_rows(path):
        if pid not in acc:
            order.append(pid)
            first_row[pid] = rowno
            acc[pid] = {"y": [], "z": [], "zu": [], "yu": []}
        slot = acc[pid]
        if split == "labeled":
            slot["y"].append(y)
            slot["z"].append(f)
        else:
            slot["zu"].append(f)
            slot["yu"].append(math.nan if y is None else y)
    problems = []
    for pid in order:
        slot = acc[pid]
        if not slot["y"]:
            raise DataError(f"problem {pid!r} (first seen row {first_row[pid]}): zero labeled rows")
        if not slot["zu"]:
            raise DataError(f"problem {pid!r} (first seen row {first_row[pid]}): zero unlabeled rows")
        yu = np.array(slot["yu"], dtype=float)
        problems.append(
            ProblemData(
                id=pid,
                y=slot["y"],
                z=slot["z"],
                z_unlabeled=slot["zu"],
                y_unlabeled=None if np.all(np.isnan(yu)) else yu,
            )
        )
    return problems


def write_csv(problems: Sequence[ProblemData], path: str | Path) -> None:
    """Write problems in the schema read by :func:`ingest_csv`.

    Floats are written with ``repr`` so a round trip is exact.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for p in problems:
            for y, z in zip(p.y, p.z):
                w.writerow([p.id, "labeled", repr(float(y)), repr(float(z))])
            yu = p.y_unlabeled if p.y_unlabeled is not None else np.full(p.N, np.nan)
            for y, z in zip(yu, p.z_unlabeled):
                w.writerow([p.id, "unlabeled", "" if np.isnan(y) else repr(float(y)), repr(float(z))])


def read_moments_csv(path: str | Path, ids: Sequence[str]) -> SecondMoments:
    """Load the known-moments sidecar and align it to ``ids``."""
    table: dict[str, tuple[float, float, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in MOMENT_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        for rowno, rec in enumerate(reader, start=2):
            table[rec["problem_id"].strip()] = tuple(
                _parse_float(rec[c].strip(), c, rowno) for c in MOMENT_COLUMNS[1:]
            )
    absent = [i for i in ids if i not in table]
    if absent:
        raise DataError(f"{path}: no moments for problems {absent[:5]}")
    rows = np.array([table[i] for i in ids], dtype=float).reshape(len(ids), 3)
    return SecondMoments(sigma2=rows[:, 0], tau2=rows[:, 1], gamma=rows[:, 2], source="known")
