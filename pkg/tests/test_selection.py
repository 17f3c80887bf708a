import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resilience.errors import DataError, InsufficientDataError
from resilience.inference.models import Form, ModelSpec
from resilience.inference.sampler import MCMCConfig, PosteriorResult
from resilience.selection import (
    EvalReport, ModelComparison, bayes_factor, errors, evaluate, interpret, largest_remainder,
    read_eval_csv, split_data, write_eval_csv,
)

SPEC = ModelSpec(Form.SINGLE_EXP, ("w",), "r")


def test_interpret_examples():
    assert interpret(math.log(0.178)) == "substantial evidence for Model 2"
    assert interpret(math.log(4.8178e-13)) == "decisive evidence for Model 2"
    assert interpret(0.0) == "inconclusive"
    assert interpret(math.log(20)) == "strong evidence for Model 1"
    assert interpret(math.log(2.9)) == "inconclusive"


def test_band_edges():
    assert interpret(math.log(3.0)).startswith("substantial")
    assert interpret(math.log(10.0)).startswith("strong")
    assert interpret(math.log(100.0)).startswith("decisive")


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_bayes_factor_is_antisymmetric(l1, l2):
    a, b = bayes_factor(l1, l2), bayes_factor(l2, l1)
    assert a.log_bf_12 == -b.log_bf_12
    assert a.interpretation.replace("Model 1", "X").replace("Model 2", "Model 1").replace("X", "Model 2") \
        == b.interpretation


def test_equal_evidence_is_inconclusive():
    c = bayes_factor(-12.5, -12.5)
    assert c.bf_12 == 1.0 and c.interpretation == "inconclusive"


def test_comparison_json_round_trip(tmp_path):
    c = bayes_factor(900.0, -10.0, 0.1, 0.2, "m1", "m2")
    assert math.isinf(c.bf_12)
    c.to_json(tmp_path / "c.json")
    back = ModelComparison.from_json(tmp_path / "c.json")
    assert back == c
    assert c.mc_error == pytest.approx(math.hypot(0.1, 0.2))


def test_largest_remainder():
    assert largest_remainder(100, [0.2, 0.16, 0.64]) == [20, 16, 64]
    assert sum(largest_remainder(7, [1, 1, 1])) == 7
    assert largest_remainder(7, [1, 1, 1]) == [3, 2, 2]


def table(n, seed=0, p=0.4):
    rng = np.random.default_rng(seed)
    return {"w": rng.uniform(0, 10, n), "r": rng.normal(size=n), "precip_flag": (rng.random(n) < p).astype(int)}


@pytest.mark.parametrize("n,sizes", [(100, (64, 16, 20)), (10, (6, 2, 2))])
def test_split_sizes(n, sizes):
    s = split_data(table(n), seed=1)
    assert (len(s.train), len(s.val), len(s.test)) == sizes


@settings(max_examples=30, deadline=None)
@given(st.integers(10, 300), st.integers(0, 1000))
def test_split_is_a_partition_and_reproducible(n, seed):
    t = table(n, seed)
    s = split_data(t, seed)
    allrows = np.concatenate([s.train, s.val, s.test])
    np.testing.assert_array_equal(np.sort(allrows), np.arange(n))
    again = split_data(t, seed)
    for a, b in zip((s.train, s.val, s.test), (again.train, again.val, again.test)):
        np.testing.assert_array_equal(a, b)


def test_stratified_split_puts_both_classes_everywhere():
    t = table(60, p=0.3)
    s = split_data(t, seed=3)
    assert s.stratified
    for part in (s.train, s.val, s.test):
        assert set(t["precip_flag"][part]) == {0, 1}


def test_tiny_stratum_disables_stratification():
    t = table(30)
    t["precip_flag"][:] = 0
    t["precip_flag"][0] = 1
    assert not split_data(t, seed=0).stratified


def test_too_few_rows_to_split():
    with pytest.raises(InsufficientDataError):
        split_data(table(9), seed=0)


def point_posterior(theta, n=10):
    samples = np.broadcast_to(np.asarray(theta, float), (2, n, len(theta))).copy()
    return PosteriorResult(SPEC.all_names, samples, np.zeros((2, n)), [0.2, 0.2], MCMCConfig(), SPEC)


def test_error_examples():
    # Prediction is a * exp(0) + c = 1 everywhere.
    post = point_posterior([1.0, 0.0, 0.0, 0.1])
    rmse, mae = errors(SPEC, post, {"w": np.zeros(2), "r": np.array([2.0, 0.0])})
    assert (rmse, mae) == (1.0, 1.0)
    rmse, mae = errors(SPEC, post, {"w": np.zeros(2), "r": np.array([3.0, 1.0])})
    assert rmse == pytest.approx(math.sqrt(2.0)) and mae == 1.0


def test_empty_split_is_data_error():
    with pytest.raises(DataError):
        errors(SPEC, point_posterior([1.0, 0.0, 0.0, 0.1]), {"w": np.zeros(0), "r": np.zeros(0)})


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30))
def test_rmse_is_never_below_mae(ys):
    post = point_posterior([0.3, 0.01, -0.2, 0.1])
    y = np.array(ys)
    rmse, mae = errors(SPEC, post, {"w": np.linspace(0, 5, len(y)), "r": y})
    assert rmse >= mae >= 0


def test_evaluate_and_csv_round_trip(tmp_path):
    t = table(50)
    s = split_data(t, seed=0)
    rep = evaluate(SPEC, point_posterior([0.0, 0.0, 0.0, 1.0]), t, s)
    assert rep.split_sizes == {"train": 32, "val": 8, "test": 10}
    assert rep.rmse_val == pytest.approx(math.sqrt(np.mean(t["r"][s.val] ** 2)))
    write_eval_csv(tmp_path / "e.csv", [rep, EvalReport("other", rep.split_sizes, 1.0, 0.5, 2.0, 1.5)])
    rows = read_eval_csv(tmp_path / "e.csv")
    assert [(r["model"], r["split"]) for r in rows] == [
        (SPEC.name, "val"), (SPEC.name, "test"), ("other", "val"), ("other", "test")]
    assert rows[0]["rmse"] == rep.rmse_val and rows[3]["mae"] == 1.5
