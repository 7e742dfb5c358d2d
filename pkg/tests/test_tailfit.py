import math
import warnings

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from gridrisk.synth import gen_powerlaw_costs
from gridrisk.tailfit import (
    InfiniteMeanError,
    InsufficientTailError,
    TailFit,
    candidate_indices,
    fit_alpha_given_xmin,
    ks_distance,
    model_ccdf,
    select_xmin,
    tail_mean,
)
from oracles import ks_brute


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def test_alpha_closed_form():
    assert fit_alpha_given_xmin([100 * math.e] * 12, 100.0) == pytest.approx(1.0, abs=1e-15)


def test_alpha_from_inverse_cdf_samples():
    x = gen_powerlaw_costs(0.789, 130251, 10_000, seed=5)
    assert abs(fit_alpha_given_xmin(x, 130251) - 0.789) <= 0.03


def test_alpha_scale_invariant():
    x = gen_powerlaw_costs(1.3, 10.0, 500, seed=1)
    assert fit_alpha_given_xmin(2 * x, 20.0) == pytest.approx(fit_alpha_given_xmin(x, 10.0), rel=1e-12)


def test_insufficient_tail():
    with pytest.raises(InsufficientTailError, match="insufficient tail"):
        fit_alpha_given_xmin([5.0, 6.0, 7.0], 1.0)
    with pytest.raises(InsufficientTailError):
        select_xmin([1.0, 2.0, 3.0])


def test_model_ccdf():
    assert model_ccdf(0.8, 50.0, 50.0) == 1.0
    assert model_ccdf(1.0, 50.0, 100.0) == 0.5
    xs = np.array([1e2, 1e3, 1e5])
    slopes = np.diff(np.log(model_ccdf(0.789, 100.0, xs))) / np.diff(np.log(xs))
    np.testing.assert_allclose(slopes, -0.789, rtol=1e-12)
    with pytest.raises(ValueError):
        model_ccdf(1.0, 50.0, 10.0)


def test_mle_consistency():
    est = np.array([fit_alpha_given_xmin(gen_powerlaw_costs(0.8, 1.0, 5000, seed=s), 1.0)
                    for s in range(50)])
    assert abs(est.mean() - 0.8) <= 0.02
    assert est.std(ddof=1) <= 2 * 0.8 / math.sqrt(5000)


def test_pdf_convention_is_alpha_plus_one():
    x = gen_powerlaw_costs(0.9, 3.0, 2000, seed=2)
    alpha = fit_alpha_given_xmin(x, 3.0)
    logs = np.log(x / 3.0)

    def nll(a):  # density (a - 1)/x_min * (x/x_min)**-a
        return -(len(x) * math.log(a - 1) - a * logs.sum())

    res = minimize_scalar(nll, bounds=(1.01, 6.0), method="bounded", options={"xatol": 1e-10})
    assert res.x == pytest.approx(alpha + 1, abs=1e-6)


def test_ks_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(20):
        tail = np.sort(rng.choice(np.round(gen_powerlaw_costs(0.7, 1.0, 60, seed=int(rng.integers(1e6))), 1), 40))
        tail = tail[tail >= 1.0]
        assert ks_distance(tail, 0.7, 1.0) == pytest.approx(ks_brute(tail, 0.7, 1.0), abs=1e-14)


def test_select_xmin_reported_ks_reproducible():
    x = gen_powerlaw_costs(0.8, 1000.0, 3000, seed=4)
    fit = select_xmin(x)
    tail = x[x >= fit.x_min]
    assert fit.n_tail == len(tail)
    assert fit.ks_distance == pytest.approx(ks_brute(tail, fit.alpha, fit.x_min), abs=1e-12)


def test_select_xmin_pure_power_law():
    x = gen_powerlaw_costs(1.2, 10.0, 5000, seed=8)
    fit = select_xmin(x)
    assert abs(fit.alpha - 1.2) < 0.1
    assert fit.x_min < 10.0 * 2


def _kinked_sample(seed):
    """Sparse uniform noise below 100, pure power law (alpha 1) above it."""
    rng = np.random.default_rng(seed)
    x = np.concatenate([rng.uniform(1.0, 100.0, 500),
                        gen_powerlaw_costs(1.0, 100.0, 3000, seed=1000 + seed)])
    xs = np.sort(x)
    cands = xs[candidate_indices(xs)]
    return x, cands, int(np.searchsorted(cands, 100.0))


def test_select_xmin_does_not_undershoot_kink():
    for seed in range(20):
        x, cands, true_idx = _kinked_sample(seed)
        fit = select_xmin(x)
        assert np.searchsorted(cands, fit.x_min) >= true_idx - 1
        assert abs(fit.alpha - 1.0) < 0.1


@pytest.mark.xfail(strict=True, reason="KS minimization overshoots on a pure tail; "
                   "about half of seeds land within one candidate step")
def test_select_xmin_within_one_candidate_step():
    hits = 0
    for seed in range(20):
        x, cands, true_idx = _kinked_sample(seed)
        hits += abs(int(np.searchsorted(cands, select_xmin(x).x_min)) - true_idx) <= 1
    assert hits >= 18


def test_scale_equivariance():
    x = gen_powerlaw_costs(0.9, 5.0, 4000, seed=21)
    x = np.concatenate([np.random.default_rng(3).uniform(0.5, 5.0, 1000), x])
    a, b = select_xmin(x), select_xmin(7.0 * x)
    assert b.x_min == pytest.approx(7.0 * a.x_min, rel=0.05)
    assert b.alpha == pytest.approx(a.alpha, abs=0.02)


def test_zero_costs_ignored_for_cutoff():
    x = np.concatenate([np.zeros(50), gen_powerlaw_costs(1.0, 1.0, 500, seed=2)])
    assert select_xmin(x).x_min > 0


def test_infinite_mean_guard():
    fit = TailFit(alpha=0.789, x_min=130251.0, n_tail=100, ks_distance=0.02)
    assert not fit.mean_is_finite
    with pytest.raises(InfiniteMeanError, match="infinite mean"):
        fit.tail_mean()
    assert tail_mean(2.0, 10.0) == 20.0
    assert fit.alpha_pdf == pytest.approx(1.789)
