"""Gaussian noise calibration and corollary parameter schedules.

Two noise formulas exist and are kept apart on purpose: ``calibrate_sigma``
(theory form, ``K+1`` rounds, no ``beta``) and ``experiment_sigma`` (empirical
form, ``K`` rounds, scaled by ``beta``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

SCHEDULES = (
    "corollary-nonprivate",
    "corollary-one-step-dp",
    "corollary-multi-gd",
    "corollary-multi-gd-dp",
    "corollary-ig",
    "manual",
)


class InvalidBudgetError(ValueError):
    pass


class ScheduleInfeasibleError(ValueError):
    """A schedule violates one of its own side conditions; ``condition`` names it."""

    def __init__(self, condition: str, message: str):
        super().__init__(f"{condition}: {message}")
        self.condition = condition


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float
    c: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidBudgetError(f"epsilon must be > 0, got {self.epsilon!r}")
        if not 0 < self.delta < 1:
            raise InvalidBudgetError(f"delta must lie in (0, 1), got {self.delta!r}")
        if not self.c > 0:
            raise InvalidBudgetError(f"c must be > 0, got {self.c!r}")

    @property
    def log_inv_delta(self) -> float:
        return math.log(1 / self.delta)


def calibrate_sigma(budget: PrivacyBudget, p: float, K: int) -> float:
    """``c p sqrt((K+1) log(1/delta)) / epsilon``; linear in ``p``."""
    if not 0 < p <= 1:
        raise InvalidBudgetError(f"p must lie in (0, 1], got {p!r}")
    if K < 0:
        raise InvalidBudgetError(f"K must be >= 0, got {K!r}")
    # p multiplies last so that sigma(p) == p * sigma(1) holds bit for bit
    return p * (budget.c * math.sqrt((K + 1) * budget.log_inv_delta) / budget.epsilon)


def experiment_sigma(p: float, beta: float, K: int, budget: PrivacyBudget) -> float:
    """``p beta sqrt(K log(1/delta)) / epsilon`` as used for the tuned experiments."""
    return p * beta * math.sqrt(K * budget.log_inv_delta) / budget.epsilon


@dataclass
class Schedule:
    name: str
    beta: float
    eta: float
    alpha: float
    R: float
    gamma: float
    sigma_dp: float = 0.0
    K: int = 0
    local_steps: int = 1
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def run_overrides(self) -> dict:
        """Fields to merge into a run config; ``R`` becomes the init offset."""
        return {
            "beta": self.beta, "eta": self.eta, "alpha": self.alpha, "gamma": self.gamma,
            "sigma_dp": self.sigma_dp, "K": self.K, "local_steps": self.local_steps,
            "init": "residual-plus-offset", "init_offset": self.R,
        }


def _require(cond: bool, name: str, detail: str):
    if not cond:
        raise ScheduleInfeasibleError(name, detail)


def _nonprivate(c, K, D1, D2, alpha):
    L = c.L
    n = K + 1
    eta_hat = D1 * D2 / (4 * L * (alpha + D1))
    return Schedule("corollary-nonprivate", beta=D2 / n ** (2 / 3), eta=eta_hat / n ** (5 / 6),
                    alpha=alpha, R=D1 / n ** (1 / 6), gamma=1 / (2 * L), K=K)


def _multi_gd(c, K, D1, D2, alpha, T, name="corollary-multi-gd", ig=False):
    L = c.L
    n = K + 1
    if not c.delta_inf > 0:
        raise ScheduleInfeasibleError(
            "Delta^inf > 0", "Delta^inf = 0 makes the heterogeneity branch of eta_hat vanish")
    mem = D1 * D2 / ((6 if ig else 4) * L * (alpha + D1))
    eta_hat = min(c.delta_inf / (2 * math.sqrt(2 * L)), mem)
    return Schedule(name, beta=D2 / n ** (5 / 8), eta=eta_hat / n ** (7 / 8), alpha=alpha,
                    R=D1 / n ** (1 / 8), gamma=1 / (2 * L * n ** (1 / 8)), K=K, local_steps=T)


def _b2(budget, B_hat, M):
    return 2 * budget.c**2 * (B_hat / M) * budget.log_inv_delta / budget.epsilon**2


def _one_step_dp(c, K, budget, B_hat, R, gamma, p):
    n = K + 1
    B2 = _b2(budget, B_hat, c.M)
    beta_hat = math.sqrt(3 * c.gap / gamma) * (c.M / B2) ** 0.25
    alpha = R
    eta = (1 / n) * (gamma / 2) * beta_hat * R / (alpha + R)
    sched = Schedule("corollary-one-step-dp", beta=beta_hat / n, eta=eta, alpha=alpha, R=R,
                     gamma=gamma, sigma_dp=calibrate_sigma(budget, p, K), K=K)
    if c.delta_inf > 0:
        bound = c.delta_inf * (alpha + R) / (math.sqrt(2 * c.L) * beta_hat * R)
        _require(gamma < bound, "gamma < Delta^inf (alpha+R) / (sqrt(2L) beta_hat R)",
                 f"gamma={gamma:.6g} but bound is {bound:.6g}")
    else:
        msg = "Delta^inf = 0: gamma condition is vacuous, keeping the explicit eta formula"
        warnings.warn(msg, stacklevel=3)
        sched.notes.append(msg)
    return sched


def _multi_gd_dp(c, K, budget, B_hat, R, gamma, p, T):
    sched = _one_step_dp(c, K, budget, B_hat, R, gamma, p)
    sched.name, sched.local_steps = "corollary-multi-gd-dp", T
    B2 = _b2(budget, B_hat, c.M)
    if c.gap > 0:
        bound = 2 * c.delta_inf**2 / (3 * c.L * c.gap * math.sqrt(c.M / B2))
        _require(gamma < bound, "gamma < 2 Delta^inf^2 / (3 L (f0 - f_inf) sqrt(M/B2))",
                 f"gamma={gamma:.6g} but bound is {bound:.6g}")
    return sched


def schedule_from_corollary(name: str, constants, K: int, *, D1: float = 1.0, D2: float = 0.5,
                            alpha: float = 0.01, budget: PrivacyBudget | None = None,
                            p: float = 1.0, B_hat: float | None = None, R: float | None = None,
                            gamma: float | None = None, T: int = 2, manual: dict | None = None) -> Schedule:
    """Turn problem constants and a round budget into concrete parameters.

    ``B_hat`` is the expected number of participants (``p M`` by default).
    For the DP schedules ``R`` and ``gamma`` default to ``D1`` and ``1/(2L)``.
    Every schedule is re-checked against its side conditions before return.
    """
    if name not in SCHEDULES:
        raise ValueError(f"unknown schedule {name!r}; expected one of {SCHEDULES}")
    if K < 0:
        raise ValueError(f"K must be >= 0, got {K}")
    if name == "manual":
        sched = Schedule("manual", K=K, **(manual or {}))
    elif name == "corollary-nonprivate":
        sched = _nonprivate(constants, K, D1, D2, alpha)
    elif name == "corollary-multi-gd":
        sched = _multi_gd(constants, K, D1, D2, alpha, T)
    elif name == "corollary-ig":
        sched = _multi_gd(constants, K, D1, D2, alpha, 1, name="corollary-ig", ig=True)
    else:
        if budget is None:
            raise ValueError(f"{name} needs a privacy budget")
        B_hat = p * constants.M if B_hat is None else B_hat
        R = D1 if R is None else R
        gamma = 1 / (2 * constants.L) if gamma is None else gamma
        if name == "corollary-one-step-dp":
            sched = _one_step_dp(constants, K, budget, B_hat, R, gamma, p)
        else:
            sched = _multi_gd_dp(constants, K, budget, B_hat, R, gamma, p, T)
    check_schedule(sched, constants)
    return sched


def check_schedule(sched: Schedule, constants) -> None:
    """Raise :class:`ScheduleInfeasibleError` if a side condition of the schedule fails."""
    for key in ("beta", "eta", "gamma"):
        val = getattr(sched, key)
        _require(math.isfinite(val) and val > 0, f"{key} > 0", f"got {val!r}")
    for key in ("alpha", "R", "sigma_dp"):
        val = getattr(sched, key)
        _require(math.isfinite(val) and val >= 0, f"{key} >= 0", f"got {val!r}")
    ratio = sched.beta / (sched.alpha + sched.R) if sched.alpha + sched.R > 0 else math.inf
    _require(ratio < 1, "beta/(alpha+R) < 1", f"ratio is {ratio:.6g}")
    L = constants.L
    _require(sched.gamma <= 1 / (2 * L) * (1 + 1e-12), "gamma <= 1/(2L)",
             f"gamma={sched.gamma:.6g}, 1/(2L)={1 / (2 * L):.6g}")
    if sched.name == "manual":
        return
    ig = sched.name == "corollary-ig"
    mem = (sched.gamma / (3 if ig else 2)) * sched.beta * sched.R / (sched.alpha + sched.R)
    _require(sched.eta <= mem * (1 + 1e-9), "eta <= memory branch",
             f"eta={sched.eta:.6g}, branch={mem:.6g}")
    if sched.name in ("corollary-multi-gd", "corollary-ig"):
        het = constants.delta_inf / (4 * L * math.sqrt(2 * L) * (sched.K + 1))
        _require(sched.eta * sched.gamma <= het * (1 + 1e-9), "eta*gamma <= heterogeneity branch",
                 f"eta*gamma={sched.eta * sched.gamma:.6g}, branch={het:.6g}")
