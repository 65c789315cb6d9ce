"""Numeric evaluation of the convergence bounds and their side conditions.

Everything here is plain arithmetic on scalars; nothing is simulated. The
bounds are on ``min_k E||grad f(x^k)||`` and are compared against replicate
means of simulated runs elsewhere.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .local_ops import LocalOpConfig, apply_local


@dataclass(frozen=True)
class ProblemConstants:
    f0: float
    f_inf: float
    L: float
    delta_inf: float
    M: int
    d: int = 1
    delta_inf_clients: tuple = ()
    approximate: bool = False

    @classmethod
    def from_problem(cls, problem, x0=None):
        x0 = problem.x0 if x0 is None else x0
        return cls(
            f0=problem.value(x0),
            f_inf=problem.f_inf,
            L=problem.L,
            delta_inf=problem.delta_inf(),
            M=problem.M,
            d=problem.d,
            delta_inf_clients=tuple(problem.delta_inf_i(i) for i in range(problem.M)),
            approximate=problem.approximate,
        )

    @property
    def gap(self) -> float:
        return self.f0 - self.f_inf

    @property
    def mean_delta_inf_clients(self) -> float:
        if not self.delta_inf_clients:
            return 0.0
        return max(float(np.mean(self.delta_inf_clients)), 0.0)


@dataclass(frozen=True)
class TheoryParams:
    """Algorithm parameters as they enter the bounds (``R`` is the initial memory error)."""

    eta: float
    beta: float
    alpha: float
    R: float
    gamma: float
    p: float = 1.0
    sigma_dp: float = 0.0
    K: int = 0
    T: int = 1

    @classmethod
    def from_run(cls, cfg, R: float, N: int | None = None):
        T = cfg.local_steps if cfg.local_mode == "gd" else (N or cfg.local_steps)
        return cls(cfg.eta, cfg.beta, cfg.alpha, R, cfg.gamma, cfg.p,
                   cfg.sigma_dp if cfg.private else 0.0, cfg.K, T)


def noise_second_moment(sigma_dp: float, d: int) -> float:
    """``E||z||^2`` for ``z ~ N(0, sigma_dp^2 I_d)``."""
    return d * sigma_dp**2


def b_constant(p: float, noise_sq: float) -> float:
    """Per-client transmission variance constant ``B``."""
    return 2 * (p - 1) ** 2 / p + 2 * (1 - p) + 2 * noise_sq / p


def b_constant_lemma(p: float, noise_sq: float) -> float:
    """``B`` written as ``2p(1-1/p)^2 + 2(1-p) + 2 s/p``; algebraically equal."""
    return 2 * p * (1 - 1 / p) ** 2 + 2 * (1 - p) + 2 * noise_sq / p


def noise_bound(beta: float, K: int, sigma_sq: float, M: int, e0_norm: float = 0.0) -> float:
    """Upper bound on ``E||e^{K+1}||`` for ``e^{k+1} = e^k + beta * mean_i z_i^k``."""
    return e0_norm + math.sqrt(beta**2 * (K + 1) * sigma_sq / M)


@dataclass
class SideCondition:
    name: str
    satisfied: bool
    margin: float


@dataclass
class BoundReport:
    terms: dict
    total: float
    side_conditions: list = field(default_factory=list)
    advisory: bool = False

    @property
    def satisfied(self) -> bool:
        return all(c.satisfied for c in self.side_conditions)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["satisfied"] = self.satisfied
        return out


@dataclass(frozen=True)
class EtaMax:
    value: float
    branch: str
    branches: dict
    warning: str | None = None


def _drift_active(params: TheoryParams, ig: bool) -> bool:
    return ig or params.T != 1


def eta_max(constants: ProblemConstants, params: TheoryParams, *, ig: bool = False,
            literal: bool = False) -> EtaMax:
    """Largest server stepsize allowed by the convergence bound for these parameters.

    The memory branch is ``(gamma/2) beta R / (alpha + R)`` for local GD and
    ``(gamma/3) ...`` for IG, which at ``gamma = 1/(2L)`` equals
    ``beta R / (4L (alpha + R))`` (resp. ``6L``). The heterogeneity branch
    ``eta * gamma <= Delta^inf / (4 L sqrt(2L) (K+1))`` only matters
    when local drift is present (``T != 1`` or IG); pass ``literal=True`` to
    apply it regardless.
    """
    L, a, R, b, g = constants.L, params.alpha, params.R, params.beta, params.gamma
    mem_factor = 3.0 if ig else 2.0
    branches = {"memory": (g / mem_factor) * b * R / (a + R) if (a + R) > 0 else 0.0}
    warning = None
    if literal or _drift_active(params, ig):
        if constants.delta_inf > 0:
            branches["heterogeneity"] = constants.delta_inf / (4 * L * math.sqrt(2 * L) * (params.K + 1) * g)
        else:
            warning = "Delta^inf = 0: heterogeneity branch degenerates, using the memory branch only"
            warnings.warn(warning, stacklevel=2)
    branch = min(branches, key=branches.get)
    return EtaMax(branches[branch], branch, branches, warning)


def _side_conditions(constants, params, ig):
    L = constants.L
    conds = []
    ratio = params.beta / (params.alpha + params.R) if (params.alpha + params.R) > 0 else math.inf
    conds.append(SideCondition("beta/(alpha+R) < 1", ratio < 1, 1 - ratio))
    conds.append(SideCondition("gamma <= 1/(2L)", params.gamma <= 1 / (2 * L) * (1 + 1e-12),
                               1 / (2 * L) - params.gamma))
    mem_factor = 3.0 if ig else 2.0
    denom = params.alpha + params.R
    mem = (params.gamma / mem_factor) * params.beta * params.R / denom if denom > 0 else 0.0
    conds.append(SideCondition("eta <= memory branch", params.eta <= mem * (1 + 1e-12), mem - params.eta))
    if _drift_active(params, ig):
        het = constants.delta_inf / (4 * L * math.sqrt(2 * L) * (params.K + 1))
        ok = params.eta * params.gamma <= het * (1 + 1e-12) and constants.delta_inf > 0
        conds.append(SideCondition("eta*gamma <= Delta^inf/(4L sqrt(2L)(K+1))", ok,
                                   het - params.eta * params.gamma))
    return conds


def _common_terms(constants, params):
    noise_sq = noise_second_moment(params.sigma_dp, constants.d)
    B = b_constant(params.p, noise_sq)
    return {
        "init_term": 3 * constants.gap / (params.eta * (params.K + 1)),
        "R_term": 2 * params.R,
        "noise_term": 2 * math.sqrt(params.beta**2 * B * (params.K + 1) / constants.M),
        "eta_term": params.eta * constants.L / 2,
    }


def theorem1_bound(constants: ProblemConstants, params: TheoryParams) -> BoundReport:
    """Right-hand side of the local-GD convergence theorem."""
    L = constants.L
    terms = _common_terms(constants, params)
    drift = params.gamma * 8 * L * math.sqrt(2 * L) * math.sqrt(constants.delta_inf)
    terms["drift_term"] = drift if params.T != 1 else 0.0
    return BoundReport(terms, float(sum(terms.values())),
                       _side_conditions(constants, params, ig=False), constants.approximate)


def theoremIG_bound(constants: ProblemConstants, params: TheoryParams) -> BoundReport:
    """Right-hand side of the local-IG convergence theorem."""
    L = constants.L
    c = params.gamma * math.sqrt(2 * L) * L
    terms = _common_terms(constants, params)
    terms["drift_term"] = 8 * c * math.sqrt(constants.delta_inf)
    terms["component_drift_term"] = 4 * c * math.sqrt(constants.mean_delta_inf_clients)
    return BoundReport(terms, float(sum(terms.values())),
                       _side_conditions(constants, params, ig=True), constants.approximate)


def compute_R(memories, problem, x, local: LocalOpConfig) -> float:
    """``max_i ||v_i - (x - T_i(x)) / gamma||`` over all clients."""
    V = np.atleast_2d(np.asarray(memories, dtype=np.float64))
    X = np.broadcast_to(np.asarray(x, dtype=np.float64), V.shape)
    residual = (X - apply_local(problem.batch, X, local)) / local.gamma
    return float(np.linalg.norm(V - residual, axis=1).max())


def utility_bound(constants: ProblemConstants, alpha: float, B_hat: float, epsilon: float,
                  delta: float) -> float:
    """Evaluated order term of the private one-step utility corollary (constant 1)."""
    big_delta = max(alpha, 2.0) * math.sqrt(constants.L) * math.sqrt(constants.gap)
    inner = constants.d * B_hat / constants.M**2 * math.log(1 / delta) / epsilon**2
    return big_delta * inner**0.25
