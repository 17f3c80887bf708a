import numpy as np
import pytest
from conftest import NormalMean

from resilience.errors import ConfigError
from resilience.inference.evidence import SteppingStoneConfig, stepping_stone, temperature_ladder
from resilience.inference.models import Form, ModelSpec, RegressionTarget
from resilience.inference.sampler import MCMCConfig


@pytest.mark.parametrize("ladder", ["geometric", "power"])
@pytest.mark.parametrize("k", [1, 2, 8, 32])
def test_ladder_runs_from_zero_to_one(ladder, k):
    b = temperature_ladder(k, ladder)
    assert len(b) == k + 1 and b[0] == 0.0 and b[-1] == 1.0
    assert np.all(np.diff(b) > 0)


def test_geometric_ladder_is_even_in_log_beta():
    b = temperature_ladder(5, "geometric", beta_min=1e-4)
    np.testing.assert_allclose(np.diff(np.log10(b[1:])), 1.0, rtol=1e-12)


def test_bad_ladder_config():
    with pytest.raises(ConfigError):
        SteppingStoneConfig(n_rungs=0)
    with pytest.raises(ConfigError):
        SteppingStoneConfig(ladder="linear")
    with pytest.raises(ConfigError):
        SteppingStoneConfig(beta_min=0.0)


def test_no_data_has_zero_log_evidence():
    spec = ModelSpec(Form.SINGLE_EXP, ("w",), "r")
    target = RegressionTarget(spec, np.empty((0, 1)), np.empty(0), sigma_scale=1.0)
    est = stepping_stone(target)
    assert est.log_evidence == 0.0 and est.mc_error == 0.0


def conjugate(seed, n=20):
    rng = np.random.default_rng(seed)
    return NormalMean(rng.normal(1.5, 2.0, n), sigma=2.0, m0=0.0, s0=3.0)


FAST = MCMCConfig(n_chains=4, n_warmup=300, n_draws=1000, seed=5)


def test_conjugate_evidence_within_three_mc_errors():
    target = conjugate(0)
    est = stepping_stone(target, SteppingStoneConfig(n_rungs=16, mcmc=FAST))
    assert abs(est.log_evidence - target.exact_log_evidence()) < 3 * est.mc_error
    assert est.mc_error > 0
    assert np.all(est.rung_rhat < 1.1)


def test_rung_counts_agree():
    target = conjugate(1)
    a = stepping_stone(target, SteppingStoneConfig(n_rungs=32, mcmc=FAST))
    b = stepping_stone(target, SteppingStoneConfig(n_rungs=64, mcmc=FAST.replace(seed=6)))
    assert abs(a.log_evidence - b.log_evidence) < 3 * np.hypot(a.mc_error, b.mc_error)


def test_same_seed_same_estimate():
    target = conjugate(2)
    cfg = SteppingStoneConfig(n_rungs=8, mcmc=FAST)
    assert stepping_stone(target, cfg).log_evidence == stepping_stone(target, cfg).log_evidence
