"""Synthetic heterogeneous-means model and its closed-form moments.

For problem ``j`` the latent ``eta_j ~ U[-1, 1]`` drives

    X ~ N(eta, psi^2),    Y | X ~ N(2 eta X - eta^2, c),

so ``theta = eta^2`` and ``Var(Y) = 4 eta^2 psi^2 + c``. Two predictors are
supported: ``square`` (``f(x) = x^2``, well calibrated) and ``abs``
(``f(x) = |x|``, biased away from ``eta^2``).

Random streams
--------------
Generator: Philox-4x64 seeded through ``numpy.random.SeedSequence`` (stream
layout version ``RNG_VERSION``). Replicate ``k`` of a run with seed ``s``
reads from ``SeedSequence(s, spawn_key=(k,))``, so replicates are
independent of each other and of the order they are executed in. Within a
replicate the draws are taken in this fixed order, each as one array:

1. ``eta``, shape ``(m,)``, uniform on ``[-1, 1)`` (skipped when ``eta`` is supplied);
2. labeled covariates, ``(m, n)`` standard normals;
3. labeled outcome noise, ``(m, n)``;
4. unlabeled covariates, ``(m, N)``;
5. unlabeled outcome noise, ``(m, N)``.

Normal deviates come from numpy's ziggurat sampler. Row ``j`` of every array
belongs to problem ``j``; the predictor choice never touches the stream, so
both predictors see identical covariates and outcomes for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
from scipy import special

from ppas.data import AggregatedStats, ProblemData, SecondMoments

RNG_VERSION = "philox4x64-seedseq-v1"

Predictor = Literal["abs", "square"]


def norm_cdf(x):
    """Standard normal CDF via the complementary error function.

    ``Phi(x) = erfc(-x / sqrt(2)) / 2``; ``erfc`` is the Cephes rational
    approximation, accurate to a few ulp, and avoids cancellation in the
    lower tail. Accepts scalars or arrays.
    """
    out = 0.5 * special.erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SynthConfig:
    m: int = 200
    n: int = 20
    N: int = 80
    psi: float = 0.1
    c: float = 0.05
    predictor: Predictor = "square"
    seed: int = 0

    def __post_init__(self):
        if self.predictor not in ("abs", "square"):
            raise ValueError(f"predictor must be 'abs' or 'square', got {self.predictor!r}")
        if self.m < 1 or self.n < 1 or self.N < 1:
            raise ValueError("m, n and N must be positive")
        if not (self.psi > 0 and self.c > 0):
            raise ValueError("psi and c must be positive")

    def with_(self, **kw) -> SynthConfig:
        return replace(self, **kw)


@dataclass(frozen=True)
class SynthTruth:
    """Closed-form parameters for one problem (fields may be arrays)."""

    eta: float | np.ndarray
    theta: float | np.ndarray
    mu: float | np.ndarray
    sigma2: float | np.ndarray
    tau2: float | np.ndarray
    gamma: float | np.ndarray

    def moments(self) -> SecondMoments:
        return SecondMoments(sigma2=self.sigma2, tau2=self.tau2, gamma=self.gamma, source="known")


def predict(x, predictor: Predictor):
    return np.abs(x) if predictor == "abs" else np.square(x)


def folded_normal_mean(eta, psi):
    """``E|X|`` for ``X ~ N(eta, psi^2)``."""
    eta = np.asarray(eta, dtype=float)
    return psi * math.sqrt(2 / math.pi) * np.exp(-(eta**2) / (2 * psi**2)) + eta * (
        2 * norm_cdf(eta / psi) - 1
    )


def synth_params(eta, cfg: SynthConfig) -> SynthTruth:
    """Exact means and second moments of ``(f(X), Y)`` given ``eta``.

    ``abs`` branch: ``mu`` is the folded-normal mean,
    ``tau2 = eta^2 + psi^2 - mu^2`` and, by Stein's lemma,
    ``gamma = 2 eta Cov(|X|, X) = 2 eta psi^2 (2 Phi(eta/psi) - 1)``.
    """
    eta = np.asarray(eta, dtype=float)
    psi, c = cfg.psi, cfg.c
    theta = eta**2
    sigma2 = 4 * eta**2 * psi**2 + c
    if cfg.predictor == "square":
        mu = eta**2 + psi**2
        tau2 = 2 * psi**4 + 4 * eta**2 * psi**2
        gamma = 4 * eta**2 * psi**2
    else:
        mu = folded_normal_mean(eta, psi)
        tau2 = np.maximum(eta**2 + psi**2 - mu**2, 0.0)
        gamma = 2 * eta * psi**2 * (2 * norm_cdf(eta / psi) - 1)
    fields = dict(eta=eta, theta=theta, mu=mu, sigma2=sigma2, tau2=tau2, gamma=gamma)
    if eta.ndim == 0:
        fields = {k: float(v) for k, v in fields.items()}
    return SynthTruth(**fields)


def predictability_ratio(eta, cfg: SynthConfig):
    """``|Cov(X, Y)| / Var(Y) = 2|eta| psi^2 / (4 eta^2 psi^2 + c)``."""
    eta = np.asarray(eta, dtype=float)
    return 2 * np.abs(eta) * cfg.psi**2 / (4 * eta**2 * cfg.psi**2 + cfg.c)


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SynthBatch:
    """One replicate of the synthetic model as dense arrays (row = problem)."""

    eta: np.ndarray
    x: np.ndarray
    y: np.ndarray
    x_unlabeled: np.ndarray
    y_unlabeled: np.ndarray
    predictor: Predictor

    @property
    def z(self) -> np.ndarray:
        return predict(self.x, self.predictor)

    @property
    def z_unlabeled(self) -> np.ndarray:
        return predict(self.x_unlabeled, self.predictor)

    def with_predictor(self, predictor: Predictor) -> SynthBatch:
        return replace(self, predictor=predictor)

    def means(self) -> AggregatedStats:
        m, n = self.y.shape
        N = self.x_unlabeled.shape[1]
        return AggregatedStats(
            y_bar=self.y.mean(axis=1),
            z_bar=self.z.mean(axis=1),
            z_tilde=self.z_unlabeled.mean(axis=1),
            n=np.full(m, n),
            N=np.full(m, N),
        )

    def sample_moments(self) -> SecondMoments:
        """Row-wise version of :func:`ppas.data.sample_moments`."""
        z, zu, y = self.z, self.z_unlabeled, self.y
        n, N = y.shape[1], zu.shape[1]
        pooled = np.concatenate([z, zu], axis=1)
        z_pool = pooled.mean(axis=1, keepdims=True)
        dy = y - y.mean(axis=1, keepdims=True)
        sigma2 = (dy * dy).sum(axis=1) / (n - 1)
        tau2 = ((pooled - z_pool) ** 2).sum(axis=1) / (n + N - 1)
        gamma = (dy * (z - z_pool)).sum(axis=1) / (n - 1)
        return SecondMoments(sigma2=sigma2, tau2=tau2, gamma=gamma, source="sample")

    def to_problems(self, prefix: str = "p") -> list[ProblemData]:
        zl, zu = self.z, self.z_unlabeled
        return [
            ProblemData(
                id=f"{prefix}{j}", y=self.y[j], z=zl[j], z_unlabeled=zu[j], y_unlabeled=self.y_unlabeled[j]
            )
            for j in range(self.y.shape[0])
        ]


def draw_batch(cfg: SynthConfig, replicate: int = 0, eta=None) -> SynthBatch:
    """Draw replicate ``replicate`` of the model described by ``cfg``.

    Passing ``eta`` holds the latent means fixed (conditional draws); otherwise
    they are sampled from the uniform prior.
    """
    rng = replicate_rng(cfg.seed, replicate)
    if eta is None:
        eta = rng.uniform(-1.0, 1.0, size=cfg.m)
    else:
        eta = np.asarray(eta, dtype=float).reshape(-1)
        if eta.size != cfg.m:
            raise ValueError(f"eta has {eta.size} entries, config says m={cfg.m}")
    e = eta[:, None]
    sd_noise = math.sqrt(cfg.c)
    x = e + cfg.psi * rng.standard_normal((cfg.m, cfg.n))
    y = 2 * e * x - e**2 + sd_noise * rng.standard_normal((cfg.m, cfg.n))
    xu = e + cfg.psi * rng.standard_normal((cfg.m, cfg.N))
    yu = 2 * e * xu - e**2 + sd_noise * rng.standard_normal((cfg.m, cfg.N))
    return SynthBatch(eta=eta, x=x, y=y, x_unlabeled=xu, y_unlabeled=yu, predictor=cfg.predictor)


def synth_draw(cfg: SynthConfig, replicate: int = 0) -> tuple[list[ProblemData], list[SynthTruth]]:
    """Draw ``cfg.m`` problems and their closed-form truths (index-aligned)."""
    batch = draw_batch(cfg, replicate)
    truth = synth_params(batch.eta, cfg)
    truths = [
        SynthTruth(**{f: float(np.asarray(getattr(truth, f))[j]) for f in SynthTruth.__dataclass_fields__})
        for j in range(cfg.m)
    ]
    return batch.to_problems(), truths
