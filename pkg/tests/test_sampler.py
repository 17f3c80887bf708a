import numpy as np
import pytest
from conftest import multiplicative_data

from resilience.errors import ConfigError, InsufficientDataError
from resilience.inference.diagnostics import ess, mcse_mean, split_rhat
from resilience.inference.models import Form, ModelSpec, RegressionTarget
from resilience.inference.sampler import MCMCConfig, run_mcmc, run_target

SINGLE = ModelSpec(Form.SINGLE_EXP, ("w",), "r")
MULT = ModelSpec(Form.MULTIPLICATIVE, ("w1", "w2"), "r")
QUICK = MCMCConfig(n_chains=4, n_warmup=500, n_draws=1000, seed=11)


def single_table(seed, n=60, a=0.5, b=0.08, c=0.2, noise=0.1):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0, 30, n)
    return {"w": w, "r": a * np.exp(b * w) + c + rng.normal(0, noise, n)}


def test_zero_rows_recovers_the_prior():
    target = RegressionTarget(SINGLE, np.empty((0, 1)), np.empty(0), sigma_scale=1.0)
    post = run_target(target, MCMCConfig(n_chains=4, n_warmup=500, n_draws=2000, seed=3))
    draws = post.samples
    for j, (mean, sd) in enumerate([(0.0, 10.0), (0.0, 1.0), (0.0, 10.0)]):
        x = draws[:, :, j]
        assert abs(x.mean() - mean) < 4 * mcse_mean(x)
        assert x.std() == pytest.approx(sd, rel=0.15)
    sigma = draws[:, :, 3]
    assert abs(sigma.mean() - np.sqrt(2 / np.pi)) < 4 * mcse_mean(sigma)


def test_same_seed_is_bitwise_identical():
    table = single_table(0)
    a = run_mcmc(SINGLE, table, QUICK)
    b = run_mcmc(SINGLE, table, QUICK)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert a.chain_acceptance == b.chain_acceptance


def test_different_seeds_agree_in_distribution():
    table = single_table(1)
    a = run_mcmc(SINGLE, table, QUICK)
    b = run_mcmc(SINGLE, table, QUICK.replace(seed=12))
    assert not np.array_equal(a.samples, b.samples)
    for name in ("b", "sigma"):
        xa, xb = a.samples[:, :, a.names.index(name)], b.samples[:, :, b.names.index(name)]
        tol = 4 * np.hypot(mcse_mean(xa), mcse_mean(xb))
        assert abs(xa.mean() - xb.mean()) < tol


def test_recovers_parameters_and_mixes():
    post = run_mcmc(SINGLE, single_table(2, n=150), QUICK)
    s = post.summaries()
    assert s["b"]["q2.5"] < 0.08 < s["b"]["q97.5"]
    assert post.converged and post.max_rhat < 1.05
    assert all(0.1 <= r <= 0.5 for r in post.chain_acceptance)
    assert post.n_rows == 150


def test_multiplicative_fit_runs():
    post = run_mcmc(MULT, multiplicative_data(0, n=120), QUICK)
    assert post.names == ("ln_a", "b1", "b2", "c", "sigma")
    assert post.column("b2").mean() == pytest.approx(0.07, rel=0.1)


def test_too_few_rows_needs_force():
    table = single_table(3, n=8)
    with pytest.raises(InsufficientDataError):
        run_mcmc(SINGLE, table, QUICK)
    post = run_mcmc(SINGLE, table, QUICK, force=True)
    assert post.n_rows == 8


@pytest.mark.parametrize("bad", [
    {"n_chains": 1}, {"n_draws": 2}, {"n_warmup": -1}, {"target_accept": 1.0},
    {"jump_prob": 1.0}, {"adapt": "dense"},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        MCMCConfig(**bad)


def test_credible_interval_is_ordered():
    post = run_mcmc(SINGLE, single_table(4), QUICK)
    lo, hi = post.credible_interval("b", 0.9)
    lo95, hi95 = post.credible_interval("b")
    assert lo95 <= lo < hi <= hi95


def test_rhat_near_one_for_iid_chains():
    rng = np.random.default_rng(0)
    assert split_rhat(rng.normal(size=(4, 1000))) == pytest.approx(1.0, abs=0.01)


def test_rhat_flags_shifted_chains():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(4, 1000))
    x[0] += 2.0
    assert split_rhat(x) > 1.1


def test_rhat_flags_drifting_chain():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(4, 1000))
    x[1] += np.linspace(0, 3, 1000)
    assert split_rhat(x) > 1.1


def test_ess_of_ar1_matches_theory():
    rng = np.random.default_rng(5)
    phi, n, m = 0.8, 20_000, 4
    x = np.zeros((m, n))
    e = rng.normal(size=(m, n))
    for t in range(1, n):
        x[:, t] = phi * x[:, t - 1] + e[:, t]
    theory = m * n * (1 - phi) / (1 + phi)
    assert ess(x) == pytest.approx(theory, rel=0.15)
    assert ess(rng.normal(size=(4, 2000))) == pytest.approx(8000, rel=0.15)
