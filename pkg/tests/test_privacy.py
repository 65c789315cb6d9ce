import math
import warnings

import pytest
from hypothesis import given, strategies as st

from fednormec.privacy import (InvalidBudgetError, PrivacyBudget, ScheduleInfeasibleError,
                               calibrate_sigma, experiment_sigma, schedule_from_corollary)
from fednormec.problems import SuiteSpec, make_suite
from fednormec.theory import ProblemConstants


def test_budget_validation():
    for kw in ({"epsilon": 0, "delta": 0.1}, {"epsilon": 1, "delta": 1.0}, {"epsilon": 1, "delta": 0.1, "c": 0}):
        with pytest.raises(InvalidBudgetError):
            PrivacyBudget(**kw)


def test_calibrate_examples():
    assert calibrate_sigma(PrivacyBudget(1.0, math.exp(-1)), 1.0, 0) == pytest.approx(1.0, rel=1e-15)
    assert calibrate_sigma(PrivacyBudget(1e9, 1e-5), 1.0, 1000) < 1e-6
    b = PrivacyBudget(2.0, 1e-5, 1.3)
    assert calibrate_sigma(b, 0.5, 40) == calibrate_sigma(b, 1.0, 40) / 2
    with pytest.raises(InvalidBudgetError):
        calibrate_sigma(b, 0.0, 3)


@given(st.floats(1e-3, 1.0), st.integers(0, 10_000), st.floats(0.1, 20))
def test_calibrate_linear_and_monotone(p, K, eps):
    b = PrivacyBudget(eps, 1e-5)
    assert calibrate_sigma(b, p, K) == p * calibrate_sigma(b, 1.0, K)
    assert calibrate_sigma(b, p, K + 1) > calibrate_sigma(b, p, K)
    assert calibrate_sigma(PrivacyBudget(2 * eps, 1e-5), p, K) < calibrate_sigma(b, p, K)


def test_experiment_sigma():
    b = PrivacyBudget(8.0, 1e-5)
    assert experiment_sigma(1.0, 0.01, 300, b) == pytest.approx(0.01 * math.sqrt(300 * math.log(1e5)) / 8,
                                                                rel=1e-14)
    assert experiment_sigma(1.0, 0.0, 300, b) == 0.0
    assert experiment_sigma(0.25, 0.1, 300, b) / experiment_sigma(1.0, 0.1, 300, b) == pytest.approx(0.25, rel=1e-15)


@pytest.fixture(scope="module")
def hetero():
    return ProblemConstants.from_problem(make_suite(SuiteSpec("quadratic-hetero", clients=10, dim=4, seed=0)))


@pytest.fixture(scope="module")
def homo():
    return ProblemConstants.from_problem(make_suite(SuiteSpec("quadratic-homo", clients=10, dim=4, seed=0)))


def test_nonprivate_schedule(hetero):
    s = schedule_from_corollary("corollary-nonprivate", hetero, 4095, D1=2.0, D2=0.5)
    assert s.R == pytest.approx(0.5, rel=1e-14)
    assert s.beta == pytest.approx(0.5 / 256, rel=1e-12)
    assert s.gamma == 1 / (2 * hetero.L)
    assert s.eta == pytest.approx(2 * 0.5 / (4 * hetero.L * 2.01) / 4096 ** (5 / 6), rel=1e-12)


def test_multi_gd_schedule(hetero, homo):
    s = schedule_from_corollary("corollary-multi-gd", hetero, 255, D1=1.0, D2=0.5, T=3)
    assert s.local_steps == 3 and s.gamma == pytest.approx(1 / (2 * hetero.L * 2), rel=1e-12)
    with pytest.raises(ScheduleInfeasibleError) as err:
        schedule_from_corollary("corollary-multi-gd", homo, 255)
    assert "Delta^inf" in str(err.value)


def test_ig_schedule(hetero):
    s = schedule_from_corollary("corollary-ig", hetero, 255)
    assert s.name == "corollary-ig" and s.eta > 0


def test_one_step_dp_full_participation_recovers_p1(homo):
    b = PrivacyBudget(8.0, 1e-5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        full = schedule_from_corollary("corollary-one-step-dp", homo, 500, budget=b, p=1.0, B_hat=homo.M)
        default = schedule_from_corollary("corollary-one-step-dp", homo, 500, budget=b, p=1.0)
    assert full.sigma_dp == calibrate_sigma(b, 1.0, 500)
    assert full == default
    assert full.alpha == full.R


def test_one_step_dp_formula(homo):
    b = PrivacyBudget(4.0, 1e-4, c=1.5)
    K, p = 800, 0.5
    with pytest.warns(UserWarning):
        s = schedule_from_corollary("corollary-one-step-dp", homo, K, budget=b, p=p, D1=1.0)
    B_hat, M = p * homo.M, homo.M
    B2 = 2 * 1.5**2 * (B_hat / M) * math.log(1e4) / 16
    beta_hat = math.sqrt(3 * homo.gap / s.gamma) * (M / B2) ** 0.25
    assert s.beta == pytest.approx(beta_hat / (K + 1), rel=1e-12)
    assert s.eta == pytest.approx(s.gamma / 2 * beta_hat / (K + 1) / 2, rel=1e-12)


def test_infeasible_schedule_names_condition(hetero):
    with pytest.raises(ScheduleInfeasibleError) as err:
        schedule_from_corollary("corollary-nonprivate", hetero, 0, D1=0.01, D2=10.0)
    assert err.value.condition == "beta/(alpha+R) < 1"
    with pytest.raises(ValueError):
        schedule_from_corollary("corollary-one-step-dp", hetero, 10)
    with pytest.raises(ValueError):
        schedule_from_corollary("nope", hetero, 10)
