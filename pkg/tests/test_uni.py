import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import cure_hat_sup_gap, lambda_star_m
from ppas import estimators as est
from ppas.compound import fit_shrink_classical
from ppas.data import AggregatedStats, ProblemData, SecondMoments, get_means, sample_moments, stack_means, stack_moments
from ppas.errors import DataError, DegenerateWarning
from ppas.risk import cure_shrink_classical, grid_scale
from ppas.synth import SynthConfig, draw_batch, synth_params
from ppas.uni import cure_hat, fit_unipas, lambda_hat_clip, uni_plugins, unipas, unipt


def _sample(s2, t2, g):
    return SecondMoments(np.atleast_1d(np.asarray(s2, float)), np.atleast_1d(np.asarray(t2, float)),
                         np.atleast_1d(np.asarray(g, float)), "sample")


def test_lambda_hat_hand_example():
    assert lambda_hat_clip(_sample(1.0, 4.0, 2.0), [(10, 40)]) == pytest.approx(0.4)


def test_lambda_hat_clipping():
    assert lambda_hat_clip(_sample([1, 1], [4, 4], [-2, -1]), [(10, 40)] * 2) == 0.0
    assert lambda_hat_clip(_sample([1e6, 1e6], [1e-3, 1e-3], [50, 50]), [(10, 40)] * 2) == 1.0


def test_lambda_hat_degenerate_warns():
    with pytest.warns(DegenerateWarning):
        assert lambda_hat_clip(_sample([1, 2], [0, 0], [0, 0]), [(5, 5), (5, 5)]) == 0.0


def test_lambda_hat_alignment():
    with pytest.raises(DataError):
        lambda_hat_clip(_sample([1, 2], [1, 1], [0, 0]), [(5, 5)])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(1e-3, 10), st.floats(1e-3, 10), st.floats(-10, 10)), min_size=1, max_size=12))
def test_lambda_hat_in_unit_interval(rows):
    s2, t2, g = zip(*rows)
    lam = lambda_hat_clip(_sample(s2, t2, g), [(7, 13)] * len(rows))
    assert 0.0 <= lam <= 1.0


def test_uni_plugins_hand_example():
    uni = uni_plugins(_sample(1.0, 4.0, 2.0), [(10, 40)], 0.5)
    assert uni.sigma_dot2[0] == pytest.approx(0.025)
    assert uni.gamma_dot[0] == pytest.approx(0.05)
    # one problem: group means are the problem's own moments
    assert uni.sigma_check2[0] == pytest.approx(0.025)
    assert (uni.sigma_bar2, uni.tau_bar2, uni.gamma_bar) == (1.0, 4.0, 2.0)


def test_uni_plugins_zero_lambda_reduction():
    moms = _sample([1.0, 3.0], [4.0, 2.0], [2.0, -1.0])
    uni = uni_plugins(moms, [(10, 40), (20, 30)], 0.0)
    assert np.allclose(uni.sigma_dot2, [0.1, 0.15])
    assert np.all(uni.gamma_dot == 0)
    assert np.allclose(uni.sigma_check2, [2.0 / 10, 2.0 / 20])


def test_sigma_check_floor():
    uni = uni_plugins(_sample(0.01, 1.0, 5.0), [(10, 40)], 1.0)
    assert uni.sigma_check2[0] >= 1e-12
    assert uni.sigma_dot2[0] < 0  # raw plug-in may go negative; only the weight variance is floored


def test_unipt_values():
    stats = AggregatedStats(2.0, 3.0, 6.0, 10, 40)
    make = lambda lam: uni_plugins(_sample(1.0, 4.0, 2.0), [(10, 40)], lam)
    assert unipt(stats, make(0.4)) == pytest.approx(3.2)
    assert unipt(stats, make(0.0)) == est.classical(stats)
    assert unipt(stats, make(1.0)) == est.ppi(stats)


def test_cure_hat_hand_example():
    uni = uni_plugins(_sample(1.0, 4.0, 2.0), [(10, 40)], 0.5)
    om = float(uni.sigma_check2[0])
    # weight 1/2: 0 * 0.025 + 2 * 0.5 * 0.05 + (0.5 * 2)^2
    assert cure_hat([5.0], [3.0], uni, om) == pytest.approx(1.05)
    assert cure_hat([5.0], [3.0], uni, math.inf) == pytest.approx(0.025)


def test_cure_hat_zero_lambda_matches_shrink_classical():
    # equal sample variances so the group-averaged weights coincide with per-problem ones
    m, n = 4, 10
    moms = _sample([2.0] * m, [1.0, 2.0, 3.0, 4.0], [0.3, -0.2, 0.1, 0.0])
    uni = uni_plugins(moms, [(n, 30)] * m, 0.0)
    stats = AggregatedStats(np.array([0.1, 0.5, -0.3, 1.0]), np.zeros(m), np.array([0.0, 0.2, 0.1, 0.4]),
                            np.full(m, n), np.full(m, 30))
    for om in (0.0, 0.05, 0.7, math.inf):
        a = cure_hat(stats.y_bar, stats.z_tilde, uni, om)
        b = cure_shrink_classical(stats.y_bar, stats.z_tilde, stats, moms, om)
        assert a == pytest.approx(b, rel=1e-13)


def test_cure_hat_length_mismatch():
    uni = uni_plugins(_sample([1.0, 1.0], [1.0, 1.0], [0.0, 0.0]), [(5, 5)] * 2, 0.0)
    with pytest.raises(DataError):
        cure_hat([1.0], [1.0, 2.0], uni, 1.0)


def test_fit_unipas_requires_sample_moments():
    stats = draw_batch(SynthConfig(m=3, seed=1)).means()
    with pytest.raises(DataError):
        fit_unipas(stats, SecondMoments(np.ones(3), np.ones(3), np.zeros(3), "known"))


def test_unipas_between_unipt_and_z():
    batch = draw_batch(SynthConfig(m=60, predictor="abs", seed=3))
    fit = fit_unipas(batch.means(), batch.sample_moments())
    z = batch.means().z_tilde
    lo, hi = np.minimum(fit.unipt, z), np.maximum(fit.unipt, z)
    assert np.all(lo - 1e-12 <= fit.estimates) and np.all(fit.estimates <= hi + 1e-12)
    # list-of-problems entry point matches the array path
    assert np.allclose(unipas(batch.to_problems()), fit.estimates, rtol=1e-12, atol=1e-15)


def test_unipas_negative_covariance_reduces_to_shrink_classical():
    base = np.array([0.0, 1.0, 2.0, 3.0])
    problems = [
        ProblemData(id=f"p{j}", y=base + j, z=-(base + j), z_unlabeled=np.array([float(j), 2.0 - j]))
        for j in range(6)
    ]
    stats = stack_means([get_means(p) for p in problems])
    moms = stack_moments([sample_moments(p) for p in problems])
    assert np.all(moms.gamma < 0) and np.ptp(moms.sigma2) == 0
    fit = fit_unipas(stats, moms)
    assert fit.context.lambda_hat_clip == 0.0
    assert np.array_equal(fit.unipt, stats.y_bar)
    assert np.allclose(fit.estimates, fit_shrink_classical(stats, moms).estimates, rtol=1e-13)


def test_unipas_collapses_toward_perfect_predictions():
    """Predictions equal outcomes and the unlabeled mean equals theta: estimates move to z_tilde."""
    rng = np.random.default_rng(9)
    m, n, N = 40, 10, 200
    theta = rng.uniform(-1, 1, m)
    problems = []
    for j in range(m):
        y = theta[j] + rng.normal(0, 1, n)
        zu = theta[j] + rng.normal(0, 1, N)
        zu += theta[j] - zu.mean()
        problems.append(ProblemData(id=str(j), y=y, z=y.copy(), z_unlabeled=zu))
    stats = stack_means([get_means(p) for p in problems])
    moms = stack_moments([sample_moments(p) for p in problems])
    fit = fit_unipas(stats, moms)
    assert np.allclose(fit.estimates, stats.z_tilde, atol=1e-12)
    assert np.allclose(fit.estimates, theta, atol=1e-12)
    assert np.mean((stats.y_bar - theta) ** 2) > 1e-3
    # grid choice agrees with a dense sweep of the same objective
    dense = grid_scale(fit.context.sigma_check2) * np.logspace(-6, 6, 100_000)
    obj = lambda om: cure_hat(fit.unipt, stats.z_tilde, fit.context, om)
    dense_min = min(obj(dense).min(), obj(0.0), obj(math.inf))
    assert fit.curve.min_risk <= dense_min + 1e-3 * abs(dense_min)


def test_sigma_check_tracks_pt_variance_for_homogeneous_problems():
    cfg = SynthConfig(m=4000, n=20, N=80, predictor="square", seed=12)
    eta = np.full(cfg.m, 0.7)
    batch = draw_batch(cfg, eta=eta)
    moms = batch.sample_moments()
    sizes = np.tile([cfg.n, cfg.N], (cfg.m, 1))
    lam = lambda_hat_clip(moms, sizes)
    uni = uni_plugins(moms, sizes, lam)
    t = synth_params(0.7, cfg)
    true_var = t.sigma2 / cfg.n + (cfg.n + cfg.N) / (cfg.n * cfg.N) * lam**2 * t.tau2 - 2 / cfg.n * lam * t.gamma
    assert uni.sigma_check2[0] == pytest.approx(true_var, rel=0.02)
    assert np.mean(uni.sigma_dot2) == pytest.approx(true_var, rel=0.02)
    assert lam == pytest.approx(lambda_star_m(eta, cfg), abs=0.02)


@pytest.mark.slow
def test_lambda_hat_consistency_quick():
    def msd(m, draws):
        cfg = SynthConfig(m=m, predictor="square", seed=m)
        sizes = np.tile([cfg.n, cfg.N], (m, 1))
        d = []
        for k in range(draws):
            b = draw_batch(cfg, k)
            d.append((lambda_hat_clip(b.sample_moments(), sizes) - lambda_star_m(b.eta, cfg)) ** 2)
        return np.mean(d)

    assert msd(1600, 100) <= 0.5 * msd(100, 100)


@pytest.mark.slow
def test_cure_hat_uniform_consistency():
    def avg_gap(m, reps):
        cfg = SynthConfig(m=m, predictor="abs", seed=100 + m)
        return np.mean([cure_hat_sup_gap(cfg, k) for k in range(reps)])

    assert avg_gap(1600, 40) <= 0.75 * avg_gap(100, 40)


def test_degenerate_unipas_warns_and_runs():
    problems = [ProblemData(id=str(j), y=[j, j + 1.0, j + 3.0], z=[1.0] * 3, z_unlabeled=[1.0, 1.0]) for j in range(3)]
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        out = unipas(problems)
    assert any(issubclass(w.category, DegenerateWarning) for w in rec)
    assert np.all(np.isfinite(out))
