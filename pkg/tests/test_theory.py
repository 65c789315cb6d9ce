import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fednormec.local_ops import LocalOpConfig
from fednormec.problems import SuiteSpec, make_suite, problem_from_pairs
from fednormec.theory import (ProblemConstants, TheoryParams, b_constant, b_constant_lemma, compute_R,
                              eta_max, noise_bound, theorem1_bound, theoremIG_bound, utility_bound)

C = ProblemConstants(f0=5.0, f_inf=1.0, L=2.0, delta_inf=0.3, M=10, d=1, delta_inf_clients=(0.2, 0.4))


def params(**kw):
    base = dict(eta=0.01, beta=0.1, alpha=0.5, R=0.5, gamma=0.25, p=1.0, sigma_dp=0.0, K=99, T=1)
    base.update(kw)
    return TheoryParams(**base)


def test_full_participation_has_no_noise_term():
    assert b_constant(1.0, 0.0) == 0.0
    assert theorem1_bound(C, params()).terms["noise_term"] == 0.0


def test_drift_indicator():
    assert theorem1_bound(C, params(T=1)).terms["drift_term"] == 0.0
    t = theorem1_bound(C, params(T=3)).terms["drift_term"]
    assert t == pytest.approx(0.25 * 8 * 2 * math.sqrt(4) * math.sqrt(0.3), rel=1e-14)


def test_sigma_doubling_quadruples_noise_part():
    p = 0.4
    base = b_constant(p, 0.0)
    assert b_constant(p, 4 * 1.3**2) - base == pytest.approx(4 * (b_constant(p, 1.3**2) - base), rel=1e-14)


def test_total_is_sum_and_spreadsheet_oracle():
    rep = theorem1_bound(C, params(p=0.5, sigma_dp=2.0, T=2))
    assert rep.total == pytest.approx(sum(rep.terms.values()), rel=1e-15)
    B = 2 * (0.5 - 1) ** 2 / 0.5 + 2 * 0.5 + 2 * 4.0 / 0.5
    manual = (3 * 4.0 / (0.01 * 100) + 1.0 + 2 * math.sqrt(0.01 * B * 100 / 10) + 0.01 * 2 / 2
              + 0.25 * 8 * 2 * 2 * math.sqrt(0.3))
    assert rep.total == pytest.approx(manual, rel=1e-12)


def test_ig_bound_extra_term():
    pb = make_suite(SuiteSpec("quadratic-hetero", clients=6, samples=3, dim=3, seed=4))
    consts = ProblemConstants.from_problem(pb)
    pr = params(gamma=0.5 / pb.L)
    rep = theoremIG_bound(consts, pr)
    c = pr.gamma * math.sqrt(2 * pb.L) * pb.L
    mean_i = max(np.mean([pb.delta_inf_i(i) for i in range(6)]), 0)
    expected = (3 * consts.gap / (pr.eta * 100) + 2 * pr.R + pr.eta * pb.L / 2
                + 8 * c * math.sqrt(consts.delta_inf) + 4 * c * math.sqrt(mean_i))
    assert rep.total == pytest.approx(expected, rel=1e-10)
    shared = ProblemConstants(5.0, 1.0, 2.0, 0.3, 10, delta_inf_clients=(0.0, 0.0))
    assert theoremIG_bound(shared, params()).terms["component_drift_term"] == 0.0
    a = theoremIG_bound(C, params(gamma=0.1)).terms["component_drift_term"]
    b = theoremIG_bound(C, params(gamma=0.2)).terms["component_drift_term"]
    assert b == pytest.approx(2 * a, rel=1e-14)


@given(st.floats(0.01, 1.0), st.floats(0.0, 5.0))
def test_b_forms_agree(p, noise):
    assert abs(b_constant(p, noise) - b_constant_lemma(p, noise)) <= 1e-12 * max(1, b_constant(p, noise))


@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.floats(0.0, 2.0))
def test_bound_monotone_in_sigma_and_R(s1, ds, dR):
    a = theorem1_bound(C, params(p=0.5, sigma_dp=s1, R=0.5)).total
    assert theorem1_bound(C, params(p=0.5, sigma_dp=s1 + ds, R=0.5)).total >= a
    assert theorem1_bound(C, params(p=0.5, sigma_dp=s1, R=0.5 + dR)).total >= a


def test_eta_max_branches():
    em = eta_max(C, params(alpha=0.5, R=0.5, gamma=1 / 4))
    assert em.branch == "memory" and em.value == pytest.approx(0.1 / (8 * 2), rel=1e-14)
    em = eta_max(C, params(T=2, gamma=1 / 4, K=10**9))
    assert em.branch == "heterogeneity" and em.value < 1e-9
    ig = eta_max(C, params(gamma=1 / 4), ig=True, literal=False)
    assert ig.branches["memory"] == pytest.approx(0.1 * 0.5 / (6 * 2 * 1.0), rel=1e-14)
    zero = ProblemConstants(5.0, 1.0, 2.0, 0.0, 10)
    with pytest.warns(UserWarning):
        em = eta_max(zero, params(T=3))
    assert em.branch == "memory" and em.warning


def test_eta_max_hand_trace():
    # L=1, gamma=1/2, beta=0.5, alpha=1, zero init at x0=2 gives R = max(1, 3) = 3
    pb = problem_from_pairs([1.0, 1.0], [1.0, -1.0], x0=[2.0])
    local = LocalOpConfig("gd", 1, 0.5)
    R = compute_R(np.zeros((2, 1)), pb, pb.x0, local)
    assert R == 3.0
    em = eta_max(ProblemConstants.from_problem(pb), TheoryParams(1.0, 0.5, 1.0, R, 0.5))
    assert em.value == pytest.approx(0.25 * 0.5 * 3 / 4, rel=1e-15)


def test_compute_R_matches_brute_force():
    pb = make_suite(SuiteSpec(clients=5, dim=3, seed=8))
    local = LocalOpConfig("gd", 2, 0.05)
    V = np.random.default_rng(0).standard_normal((5, 3))
    brute = 0.0
    for i, c in enumerate(pb.clients):
        y = pb.x0.copy()
        for _ in range(2):
            y = y - 0.025 * c.grad(y)
        brute = max(brute, np.linalg.norm(V[i] - (pb.x0 - y) / 0.05))
    assert compute_R(V, pb, pb.x0, local) == pytest.approx(brute, rel=1e-12)
    single = problem_from_pairs([2.0], [0.0], x0=[1.0])
    assert compute_R(np.zeros((1, 1)), single, single.x0, LocalOpConfig("gd", 1, 0.1)) == pytest.approx(2.0)


def test_noise_bound():
    assert noise_bound(0.0, 100, 3.0, 10, e0_norm=0.7) == 0.7
    assert noise_bound(0.1, 100, 3.0, 40) == pytest.approx(noise_bound(0.1, 100, 3.0, 10) / 2, rel=1e-15)


def test_side_conditions_reported():
    rep = theorem1_bound(C, params(beta=2.0, alpha=0.5, R=0.5))
    names = {c.name: c for c in rep.side_conditions}
    assert not names["beta/(alpha+R) < 1"].satisfied
    assert names["beta/(alpha+R) < 1"].margin == pytest.approx(-1.0)
    assert not rep.satisfied


def test_utility_bound_monotone_in_B_hat():
    vals = [utility_bound(C, 0.5, b, 8.0, 1e-5) for b in (10, 5, 2.5, 1)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_advisory_for_logistic():
    pb = make_suite(SuiteSpec("logistic-blobs", clients=3, samples=4, dim=2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert theorem1_bound(ProblemConstants.from_problem(pb), params()).advisory
