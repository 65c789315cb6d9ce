"""Property suites behind ``fednormec verify``.

Each suite returns a :class:`SuiteReport`; every check carries the measured
value and the threshold it was compared against so failures are readable.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import RunConfig, run_training, sample_participation
from .local_ops import local_gd, local_ig
from .problems import SuiteSpec, make_suite
from .theory import (ProblemConstants, TheoryParams, b_constant, b_constant_lemma,
                     eta_max, noise_second_moment, theorem1_bound)
from .vecmath import RngStream

SUITES = ("lemmas", "sampling", "convergence", "bounds", "all")


class UnknownSuiteError(ValueError):
    pass


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


@dataclass
class SuiteReport:
    suite: str
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, value, threshold, ok, detail=""):
        self.checks.append(Check(name, bool(ok), float(value), float(threshold), detail))

    def to_dict(self) -> dict:
        return {"suite": self.suite, "passed": self.passed, "checks": [asdict(c) for c in self.checks]}


# ---- lemma slacks ---------------------------------------------------------

def local_gd_slacks(client, x, x_next, gamma: float, steps: int, L: float, eta: float) -> dict:
    """Slack (rhs - lhs) of the local-GD recursion inequalities 2-5.

    Requires ``gamma <= 1/(2L)`` and ``||x_next - x|| <= eta``.
    """
    a = local_gd(client, x, gamma, steps, record=True)
    b = local_gd(client, x_next, gamma, steps, record=True)
    g_norm = np.linalg.norm(client.grad(x))
    inner_move = np.mean([np.linalg.norm(u - v) for u, v in zip(b.iterates, a.iterates)])
    drift = np.mean([np.linalg.norm(x - u) for u in a.iterates])
    one_step = np.asarray(x) - gamma * client.grad(x)
    return {
        "iterate_shift": 2 * eta - inner_move,
        "iterate_drift": 2 * gamma * g_norm - drift,
        "operator_lipschitz": 2 * eta - np.linalg.norm(b.result - a.result),
        "one_step_gap": 2 * L * gamma**2 * g_norm - np.linalg.norm(one_step - a.result),
    }


def local_ig_slacks(client, x, x_next, gamma: float, L: float, eta: float) -> dict:
    """Slack of the local-IG recursion inequalities 2-4 for one client."""
    a = local_ig(client, x, gamma, record=True)
    b = local_ig(client, x_next, gamma, record=True)
    inner_move = np.mean([np.linalg.norm(u - v) for u, v in zip(b.iterates, a.iterates)])
    drift = np.mean([np.linalg.norm(u - x) for u in a.iterates])
    one_step = np.asarray(x) - gamma * client.grad(x)
    return {
        "iterate_shift": 2 * eta - inner_move,
        "operator_lipschitz": 2 * eta - np.linalg.norm(b.result - a.result),
        "one_step_gap": gamma * L * drift - np.linalg.norm(a.result - one_step),
    }


def random_lemma_case(rng: np.random.Generator):
    """Random small federation, client, point pair and stepsizes."""
    family = ("quadratic-hetero", "quadratic-homo", "logistic-blobs")[rng.integers(3)]
    spec = SuiteSpec(family=family, clients=2, samples=int(rng.integers(1, 6)), dim=int(rng.integers(1, 5)),
                     heterogeneity=float(rng.uniform(0, 3)), seed=int(rng.integers(2**31)))
    problem = make_suite(spec)
    client = problem.clients[int(rng.integers(problem.M))]
    L = problem.L
    gamma = float(rng.uniform(0.01, 1.0)) / (2 * L)
    eta = float(rng.uniform(1e-3, 1.0))
    x = 3 * rng.standard_normal(problem.d)
    u = rng.standard_normal(problem.d)
    x_next = x + eta * rng.uniform(0, 1) * u / max(np.linalg.norm(u), 1e-300)
    return problem, client, x, x_next, gamma, eta, L


def lemma_min_slacks(trials: int = 1000, seed: int = 0) -> dict:
    """Smallest slack per inequality over random cases (keys prefixed gd_/ig_)."""
    rng = RngStream(seed, purpose="data-gen").generator()
    worst: dict = {}
    for _ in range(trials):
        problem, client, x, x_next, gamma, eta, L = random_lemma_case(rng)
        steps = int(rng.integers(1, 6))
        for key, val in local_gd_slacks(client, x, x_next, gamma, steps, L, eta).items():
            worst["gd_" + key] = min(worst.get("gd_" + key, math.inf), val)
        for key, val in local_ig_slacks(client, x, x_next, gamma, L, eta).items():
            worst["ig_" + key] = min(worst.get("ig_" + key, math.inf), val)
    return worst


# ---- suites ---------------------------------------------------------------

def suite_lemmas(trials: int = 300, seed: int = 0) -> SuiteReport:
    rep = SuiteReport("lemmas")
    for key, val in sorted(lemma_min_slacks(trials, seed).items()):
        rep.add(key, val, 0.0, val >= -1e-12, "minimum slack over random cases")
    return rep


def participation_stats(p: float, M: int, rounds: int, seed: int = 0, delta: float = 1.0):
    """Pooled participation frequency and mean of ``q_i * delta``."""
    hits, weighted = 0, 0.0
    for k in range(rounds):
        mask, q = sample_participation(RngStream(seed, k, 0, "participation"), p, M)
        hits += int(mask.sum())
        weighted += float(q.sum()) * delta
    n = rounds * M
    return hits / n, weighted / n


def suite_sampling(rounds: int = 100_000, seed: int = 0) -> SuiteReport:
    rep = SuiteReport("sampling")
    freq, mean = participation_stats(0.25, 20, rounds, seed, delta=0.7)
    rep.add("participation_frequency_p0.25", abs(freq - 0.25), 0.005, abs(freq - 0.25) <= 0.005)
    rel = abs(mean - 0.7) / 0.7
    rep.add("unbiased_weighting_rel_err", rel, 0.01, rel <= 0.01)
    mask, q = sample_participation(RngStream(seed, 0, 0, "participation"), 1.0, 7)
    rep.add("full_participation", float(mask.all() and np.all(q == 1)), 1.0, mask.all() and np.all(q == 1))
    return rep


def suite_convergence(seed: int = 0) -> SuiteReport:
    rep = SuiteReport("convergence")
    problem = make_suite(SuiteSpec("quadratic-hetero", clients=8, dim=5, seed=seed))
    gamma = 1 / (2 * problem.L)
    R0, alpha, beta = 0.5, 0.5, 0.2
    consts = ProblemConstants.from_problem(problem)
    eta = eta_max(consts, TheoryParams(1.0, beta, alpha, R0, gamma, K=400)).value
    cfg = RunConfig(gamma=gamma, beta=beta, eta=eta, alpha=alpha, K=400, init="residual-plus-offset",
                    init_offset=R0, seed=seed)
    worst, agg = -math.inf, 0.0

    def watch(rec, server, V):
        nonlocal worst, agg
        worst = max(worst, rec.R_k)
        agg = max(agg, float(np.abs(server.v_hat - V.mean(axis=0)).max()))

    traj = run_training(problem, cfg, on_round=watch)
    rep.add("memory_bounded", worst, R0 + 1e-9, worst <= R0 + 1e-9)
    rep.add("aggregation_identity", agg, 1e-12, agg <= 1e-12)
    mins = [r.min_grad_norm for r in traj.records]
    mono = all(b <= a for a, b in zip(mins, mins[1:]))
    rep.add("min_grad_monotone", float(mono), 1.0, mono)
    fixed = run_training(problem, cfg.replace(init="exact-residual", K=0))
    rep.add("ef21_fixed_point_R0", fixed.records[0].R_k, 0.0, fixed.records[0].R_k == 0.0)
    homo = make_suite(SuiteSpec("quadratic-homo", clients=4, dim=3, seed=seed))
    g = 1 / (2 * homo.L)
    short = run_training(homo, RunConfig(gamma=g, beta=0.05, eta=0.01, K=50, seed=seed)).min_grad_norm
    long = run_training(homo, RunConfig(gamma=g, beta=0.05, eta=0.01, K=800, seed=seed)).min_grad_norm
    rep.add("longer_budget_helps", long / short, 1.0, long < short)
    return rep


def noise_drift(p=0.5, sigma_dp=1.0, beta=0.05, M=20, K=500, replicates=200, seed=0, d=1):
    """Mean ``||(1/M) sum_i v_i - v_hat||`` after ``K+1`` rounds and its bound."""
    problem = make_suite(SuiteSpec("quadratic-hetero", clients=M, samples=2, dim=d, seed=seed))
    gamma = 1 / (2 * problem.L)
    drifts = []
    for r in range(replicates):
        cfg = RunConfig(gamma=gamma, beta=beta, eta=0.01, alpha=0.01, p=p, sigma_dp=sigma_dp, K=K,
                        private=True, seed=seed + r)
        traj = run_training(problem, cfg)
        drifts.append(float(np.linalg.norm(traj.memories.mean(axis=0) - traj.v_hat)))
    B = b_constant_lemma(p, noise_second_moment(sigma_dp, d))
    return float(np.mean(drifts)), math.sqrt(beta**2 * B * (K + 1) / M)


def bound_check_runs(replicates: int = 20, seed: int = 0, K: int = 300):
    """``(empirical mean of min_k grad norm, BoundReport)`` for a few satisfied configs."""
    out = []
    for family, p, sigma in (("quadratic-hetero", 1.0, 0.0), ("quadratic-homo", 0.5, 0.0),
                             ("quadratic-hetero", 0.5, 0.5)):
        problem = make_suite(SuiteSpec(family, clients=10, dim=5, seed=seed))
        gamma = 1 / (2 * problem.L)
        R0, alpha, beta = 0.5, 0.5, 0.2
        consts = ProblemConstants.from_problem(problem)
        eta = eta_max(consts, TheoryParams(1.0, beta, alpha, R0, gamma, p, sigma, K)).value
        mins = []
        for r in range(replicates):
            cfg = RunConfig(gamma=gamma, beta=beta, eta=eta, alpha=alpha, p=p, sigma_dp=sigma, K=K,
                            private=sigma > 0, init="residual-plus-offset", init_offset=R0, seed=seed + r)
            mins.append(run_training(problem, cfg).min_grad_norm)
        report = theorem1_bound(consts, TheoryParams(eta, beta, alpha, R0, gamma, p, sigma, K))
        out.append((f"{family}/p={p}/sigma={sigma}", float(np.mean(mins)), report))
    return out


def suite_bounds(seed: int = 0, replicates: int = 50) -> SuiteReport:
    rep = SuiteReport("bounds")
    gap = max(abs(b_constant(p, 0.3) - b_constant_lemma(p, 0.3)) for p in np.arange(1, 11) / 10)
    rep.add("B_identity", gap, 1e-12, gap <= 1e-12)
    mean, bound = noise_drift(replicates=replicates, seed=seed)
    rep.add("noise_drift_upper", mean, bound, mean <= bound)
    rep.add("noise_drift_nonvacuous", mean, 0.1 * bound, mean >= 0.1 * bound)
    for name, emp, report in bound_check_runs(replicates=5, seed=seed, K=200):
        if report.satisfied:
            rep.add(f"theorem1/{name}", emp, report.total, emp <= report.total)
    return rep


def run_suite(name: str, seed: int = 0) -> list:
    if name not in SUITES:
        raise UnknownSuiteError(f"unknown suite {name!r}; expected one of {SUITES}")
    table = {"lemmas": suite_lemmas, "sampling": suite_sampling,
             "convergence": suite_convergence, "bounds": suite_bounds}
    names = list(table) if name == "all" else [name]
    return [table[n](seed=seed) for n in names]
