import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from automation_inequality.errors import ParameterError, UndefinedCorrelationError
from automation_inequality.oring import (
    Firms,
    PopulationParams,
    assortative_match,
    conditional_oracle,
    conditional_oracle_se,
    firm_output,
    firm_outputs,
    population_level_correlation,
    predicted_corr_firm,
    random_match,
    run_matching,
    sample_population,
    within_firm_correlation,
    within_firm_correlation_se,
)


def test_firm_output_examples():
    assert firm_output([2, 3]) == 6
    assert firm_output([5]) == 5
    assert firm_output([math.sqrt(2), math.sqrt(8)]) == pytest.approx(4, rel=1e-15)
    with pytest.raises(ParameterError):
        firm_output([])


def test_predicted_examples():
    assert predicted_corr_firm(0.5, 0.6) == pytest.approx(-0.951229424500714, rel=1e-12)
    assert predicted_corr_firm(2, 0) == pytest.approx(-0.1353352832366127, rel=1e-12)
    assert predicted_corr_firm(0.5, 0.999999) == pytest.approx(-1, abs=1e-6)
    with pytest.raises(ParameterError):
        predicted_corr_firm(0.5, 1.0)


@given(scale=st.floats(0.01, 5), corr=st.floats(-0.99, 0.99))
def test_predicted_always_negative(scale, corr):
    assert -1 < predicted_corr_firm(scale, corr) < 0


def test_population_params_validation():
    for kw in (dict(scale=0), dict(scale=-1), dict(corr_pop=1.0), dict(corr_pop=-1.0), dict(mu=math.nan)):
        with pytest.raises(ParameterError):
            PopulationParams(**kw)


def test_sampler_moments():
    pop = sample_population(PopulationParams(0.3, 0.5, 0.6), 200_000, seed=1)
    logs = np.log(pop)
    assert logs.mean(axis=0) == pytest.approx([0.3, 0.3], abs=0.005)
    assert logs.std(axis=0) == pytest.approx([0.5, 0.5], abs=0.005)
    assert np.corrcoef(logs.T)[0, 1] == pytest.approx(0.6, abs=0.01)


def test_sampler_thread_invariant():
    params = PopulationParams(0, 1, 0.2)
    a = sample_population(params, 200_001, seed=3, threads=1)
    b = sample_population(params, 200_001, seed=3, threads=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_population(params, 200_001, seed=4))


def test_assortative_match_blocks():
    workers = np.array([[1, 1], [4, 4], [2, 2], [3, 3], [0.5, 0.5]])
    with pytest.warns(UserWarning, match="dropped"):
        firms = assortative_match(workers, 2)
    assert firms.dropped == 1
    assert firms.skills[:, :, 0].tolist() == [[4, 3], [2, 1]]
    z = firm_outputs(firms)
    assert z.tolist() == [12, 2]


def test_assortative_ties_keep_input_order():
    workers = np.array([[1, 4], [4, 1], [2, 2], [9, 1]])
    firms = assortative_match(workers, 2)
    assert firms.skills.reshape(-1, 2).tolist() == [[9, 1], [1, 4], [4, 1], [2, 2]]


def test_match_rejects_bad_firm_size():
    with pytest.raises(ParameterError):
        assortative_match(np.ones((4, 2)), 0)
    with pytest.raises(ParameterError):
        run_matching(PopulationParams(), 100, 1, seed=1)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(2, 5), count=st.integers(10, 400))
def test_firm_outputs_non_increasing(seed, n, count):
    pop = sample_population(PopulationParams(0, 1, 0.3), count, seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        z = firm_outputs(assortative_match(pop, n))
    assert np.all(np.diff(z) <= 0)


def test_isoquant_firms_negative():
    # every firm: two workers with L1 * L2 constant
    skills = np.array([[[2, 0.5], [0.5, 2]], [[3, 3], [1, 9]]], dtype=float)
    assert within_firm_correlation(Firms(skills)) < 0
    assert within_firm_correlation(Firms(skills), normalize=False) < 0
    assert within_firm_correlation(Firms(skills), logs=True) == pytest.approx(-1)


def test_identical_members_undefined():
    skills = np.array([[[1, 2], [1, 2]], [[3, 1], [3, 1]]], dtype=float)
    with pytest.raises(UndefinedCorrelationError):
        within_firm_correlation(Firms(skills))
    with pytest.raises(UndefinedCorrelationError):
        within_firm_correlation(Firms(skills[:1]))


def test_within_firm_correlation_by_hand():
    skills = np.array([[[1, 2], [3, 1]], [[2, 2], [4, 5]]], dtype=float)
    # raw deviations: (-1, .5), (1, -.5), (-1, -1.5), (1, 1.5)
    d1 = np.array([-1, 1, -1, 1.0])
    d2 = np.array([0.5, -0.5, -1.5, 1.5])
    expect = (d1 @ d2) / math.sqrt((d1 @ d1) * (d2 @ d2))
    assert within_firm_correlation(Firms(skills), normalize=False) == pytest.approx(expect, rel=1e-15)


def test_random_matching_preserves_population_correlation():
    params = PopulationParams(0, 0.5, 0.0)
    pop = sample_population(params, 100_000, seed=21)
    firms = random_match(pop, 2, seed=22)
    for logs, target in ((True, 0.0), (False, population_level_correlation(0.5, 0.0))):
        est = within_firm_correlation(firms, logs=logs, normalize=False)
        se = within_firm_correlation_se(firms, logs=logs, normalize=False)
        assert abs(est - target) <= 3 * se


def test_jackknife_se_matches_normal_theory():
    pop = sample_population(PopulationParams(0, 1, 0.5), 100_000, seed=8)
    firms = random_match(pop, 2, seed=9)
    se = within_firm_correlation_se(firms, logs=True)
    # pairs give one independent difference per firm
    assert se == pytest.approx((1 - 0.25) / math.sqrt(50_000), rel=0.1)


def test_assortative_matching_near_prediction():
    params = PopulationParams(0, 0.5, 0.6)
    pop = sample_population(params, 100_000, seed=13)
    firms = assortative_match(pop, 2)
    assert within_firm_correlation(firms) == pytest.approx(predicted_corr_firm(0.5, 0.6), abs=0.02)


def test_oracle_example():
    r = conditional_oracle(1.0, 0.5, 0.6, 10**6, seed=3)
    assert r == pytest.approx(-0.951229, abs=0.001)
    assert conditional_oracle(1.0, 0.5, 0.999, 10**4, seed=3) == pytest.approx(-1, abs=1e-3)
    assert 0 < conditional_oracle_se(1.0, 0.5, 0.6, 10**5, seed=3) < 1e-3


def test_oracle_plain_monte_carlo_agrees():
    r = conditional_oracle(1.0, 1.0, 0.0, 10**6, seed=5, stratified=False)
    se = conditional_oracle_se(1.0, 1.0, 0.0, 10**6, seed=5, stratified=False)
    assert abs(r - predicted_corr_firm(1.0, 0.0)) <= 4 * se


@given(y=st.floats(1e-6, 1e6))
@settings(max_examples=20, deadline=None)
def test_oracle_independent_of_y(y):
    assert conditional_oracle(y, 0.7, 0.1, 1000, seed=9) == conditional_oracle(1.0, 0.7, 0.1, 1000, seed=9)


def test_oracle_validation():
    with pytest.raises(ParameterError):
        conditional_oracle(1.0, 0.5, 0.0, 1, seed=1)
    with pytest.raises(ParameterError):
        conditional_oracle(0.0, 0.5, 0.0, 10, seed=1)
    with pytest.raises(ParameterError):
        conditional_oracle(1.0, 0.5, 1.0, 10, seed=1)


def test_run_matching_deterministic_and_thread_invariant():
    params = PopulationParams(0, 1, 0.0)
    a = run_matching(params, 150_000, 3, seed=7, oracle_draws=200_000, threads=1)
    b = run_matching(params, 150_000, 3, seed=7, oracle_draws=200_000, threads=4)
    assert a.to_json() == b.to_json()
    doc = json.loads(a.to_json())
    for key in ("measured_corr", "predicted_corr", "abs_gap", "oracle_corr", "measured_se", "oracle_se", "dropped"):
        assert key in doc
    assert doc["firms"] == 50_000 and doc["dropped"] == 0
    assert doc["measured_corr"] < 0


def test_run_matching_reports_drop_and_skips_oracle():
    r = run_matching(PopulationParams(), 1001, 2, seed=1, oracle_draws=0)
    assert r.dropped == 1 and r.firms == 500 and r.oracle_corr is None
