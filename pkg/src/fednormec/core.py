"""Round engine for Fed-alpha-NormEC.

Per-client primitives (``client_round``, ``transmit``...) mirror one line of
the algorithm each. ``run_training`` drives whole rounds on the federation's
batch view and reuses the same primitives for everything random, so a run is
a pure function of ``(problem, cfg)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .local_ops import LocalOpConfig, LocalUpdateDivergedError, apply_local, residual_to_update
from .vecmath import RngStream, norm, smoothed_normalize

INIT_STRATEGIES = ("zero", "exact-residual", "residual-plus-offset")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class RunConfig:
    gamma: float = 0.05
    beta: float = 0.01
    eta: float = 0.01
    alpha: float = 0.01
    p: float = 1.0
    sigma_dp: float = 0.0
    K: int = 100
    local_mode: str = "gd"
    local_steps: int = 1
    private: bool = False
    server_normalize: bool = True
    init: str = "exact-residual"
    init_offset: float = 0.0
    seed: int = 0
    theory_mode: bool = False
    degenerate_tol: float = 1e-12

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive = {"gamma": self.gamma, "beta": self.beta, "eta": self.eta}
        for key, val in positive.items():
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise ConfigError(key, f"must be a finite number > 0, got {val!r}")
        if not self.alpha >= 0:
            raise ConfigError("alpha", f"must be >= 0, got {self.alpha!r}")
        if not 0 < self.p <= 1:
            raise ConfigError("p", f"must lie in (0, 1], got {self.p!r}")
        if not self.sigma_dp >= 0:
            raise ConfigError("sigma_dp", f"must be >= 0, got {self.sigma_dp!r}")
        if not (isinstance(self.K, int) and self.K >= 0):
            raise ConfigError("K", f"must be an integer >= 0, got {self.K!r}")
        if self.local_mode not in ("gd", "ig"):
            raise ConfigError("local_mode", f"must be 'gd' or 'ig', got {self.local_mode!r}")
        if not (isinstance(self.local_steps, int) and self.local_steps >= 1):
            raise ConfigError("local_steps", f"must be an integer >= 1, got {self.local_steps!r}")
        if self.init not in INIT_STRATEGIES:
            raise ConfigError("init", f"must be one of {INIT_STRATEGIES}, got {self.init!r}")
        if not self.init_offset >= 0:
            raise ConfigError("init_offset", f"must be >= 0, got {self.init_offset!r}")
        if not self.degenerate_tol >= 0:
            raise ConfigError("degenerate_tol", f"must be >= 0, got {self.degenerate_tol!r}")

    @property
    def local(self) -> LocalOpConfig:
        return LocalOpConfig(self.local_mode, self.local_steps, self.gamma)

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)


@dataclass
class ClientState:
    id: int
    v: np.ndarray


@dataclass
class ServerState:
    x: np.ndarray
    v_hat: np.ndarray
    round: int = 0


@dataclass
class RoundRecord:
    k: int
    f_value: float
    grad_norm: float
    min_grad_norm: float
    R_k: float
    participants: int
    v_hat_norm: float
    step_norm: float
    degenerate: bool = False

    @classmethod
    def columns(cls) -> list:
        return [f.name for f in fields(cls)]


@dataclass
class Trajectory:
    records: list
    x: np.ndarray
    memories: np.ndarray | None = None
    v_hat: np.ndarray | None = None
    algorithm: str = "fed-alpha-normec"
    extra: dict = field(default_factory=dict)

    @property
    def min_grad_norm(self) -> float:
        return self.records[-1].min_grad_norm

    def rows(self) -> list:
        return [asdict(r) for r in self.records]


class TrainingDiverged(LocalUpdateDivergedError):
    """Divergence during a run; ``records`` holds the rounds completed so far."""

    def __init__(self, message, records):
        super().__init__(message)
        self.records = records


def init_memories(strategy: str, problem, x0, local: LocalOpConfig, offset: float = 0.0) -> np.ndarray:
    """Initial client memories ``v_i^0`` as an ``(M, d)`` array."""
    if strategy not in INIT_STRATEGIES:
        raise ConfigError("init", f"must be one of {INIT_STRATEGIES}, got {strategy!r}")
    M, d = problem.M, problem.d
    if strategy == "zero":
        return np.zeros((M, d))
    X = np.broadcast_to(np.asarray(x0, dtype=np.float64), (M, d))
    V = residual_to_update(X, apply_local(problem.batch, X, local), local.gamma)
    if strategy == "residual-plus-offset":
        V = V.copy()
        V[:, 0] += offset
    return V


def client_round(state: ClientState, client, x, cfg: RunConfig):
    """Normalized EF21 innovation for one client and its updated memory."""
    Tx = apply_local(client, x, cfg.local)
    delta = smoothed_normalize(residual_to_update(x, Tx, cfg.gamma) - state.v, cfg.alpha)
    return delta, ClientState(state.id, state.v + cfg.beta * delta)


def sample_participation(stream: RngStream, p: float, M: int):
    """Independent Bernoulli(p) participation; weights ``q_i = 1/p`` or 0."""
    if not 0 < p <= 1:
        raise ConfigError("p", f"must lie in (0, 1], got {p!r}")
    if p == 1:
        mask = np.ones(M, dtype=bool)
    else:
        mask = stream.generator().random(M) < p
    return mask, np.where(mask, 1.0 / p, 0.0)


def transmit(delta, q: float, cfg: RunConfig, stream: RngStream) -> np.ndarray:
    """Payload sent by one client; silent clients draw no noise."""
    delta = np.asarray(delta, dtype=np.float64)
    if q == 0:
        return np.zeros_like(delta)
    if cfg.private and cfg.sigma_dp > 0:
        z = cfg.sigma_dp * stream.generator().standard_normal(delta.shape)
        return q * (delta + z)
    return q * delta


def server_aggregate(server: ServerState, transmitted, beta: float, M: int) -> ServerState:
    total = np.sum(np.asarray(transmitted, dtype=np.float64), axis=0)
    return ServerState(server.x, server.v_hat + (beta / M) * total, server.round)


def server_step(server: ServerState, eta: float, normalize: bool = True, tol: float = 1e-12):
    """Global model step; returns ``(new_state, degenerate)``.

    With normalization on, a memory shorter than ``tol`` leaves ``x`` in place
    and flags the round instead of dividing by (near) zero.
    """
    if normalize:
        n = norm(server.v_hat)
        if n < tol:
            return ServerState(server.x, server.v_hat, server.round + 1), True
        x = server.x - (eta / n) * server.v_hat
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            x = server.x - eta * server.v_hat
    return ServerState(x, server.v_hat, server.round + 1), False


def _check_theory(problem, cfg, x0, memories):
    from .theory import ProblemConstants, TheoryParams, compute_R, eta_max

    R0 = compute_R(memories, problem, x0, cfg.local)
    if not cfg.beta / (cfg.alpha + R0) < 1:
        raise ConfigError("beta", f"theory mode needs beta/(alpha+R) < 1, got {cfg.beta / (cfg.alpha + R0):.6g}")
    consts = ProblemConstants.from_problem(problem, x0)
    params = TheoryParams.from_run(cfg, R0, problem.N)
    bound = eta_max(consts, params, ig=cfg.local_mode == "ig")
    if cfg.eta > bound.value * (1 + 1e-12):
        raise ConfigError("eta", f"theory mode needs eta <= {bound.value:.6g} ({bound.branch} branch)")


def run_training(problem, cfg: RunConfig, x0=None, on_round=None) -> Trajectory:
    """Run rounds ``k = 0..K`` and return one record per round."""
    cfg.validate()
    M, d = problem.M, problem.d
    x = np.array(problem.x0 if x0 is None else x0, dtype=np.float64)
    local = cfg.local
    try:
        V = init_memories(cfg.init, problem, x, local, cfg.init_offset)
    except LocalUpdateDivergedError as exc:
        raise TrainingDiverged(f"initialization: {exc}", []) from exc
    if cfg.theory_mode:
        _check_theory(problem, cfg, x, V)
    server = ServerState(x, V.mean(axis=0), 0)
    records, best = [], math.inf

    for k in range(cfg.K + 1):
        X = np.broadcast_to(server.x, (M, d))
        try:
            TX = apply_local(problem.batch, X, local)
        except LocalUpdateDivergedError as exc:
            raise TrainingDiverged(f"round {k}: {exc}", records) from exc
        err = residual_to_update(X, TX, cfg.gamma) - V
        R_k = float(np.linalg.norm(err, axis=1).max())
        deltas = smoothed_normalize(err, cfg.alpha)
        V = V + cfg.beta * deltas

        mask, q = sample_participation(RngStream(cfg.seed, k, 0, "participation"), cfg.p, M)
        if cfg.private and cfg.sigma_dp > 0:
            payload = np.zeros((M, d))
            for i in np.flatnonzero(mask):
                payload[i] = transmit(deltas[i], q[i], cfg, RngStream(cfg.seed, k, i, "dp-noise"))
        else:
            payload = q[:, None] * deltas
        server = server_aggregate(server, payload, cfg.beta, M)

        with np.errstate(over="ignore", invalid="ignore"):
            g = problem.grad(server.x)
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged(f"round {k}: gradient became non-finite", records)
        grad_norm = norm(g)
        best = min(best, grad_norm)
        x_prev = server.x
        server, degenerate = server_step(server, cfg.eta, cfg.server_normalize, cfg.degenerate_tol)
        if not np.all(np.isfinite(server.x)):
            raise TrainingDiverged(f"round {k}: server iterate became non-finite", records)
        rec = RoundRecord(k, problem.value(x_prev), grad_norm, best, R_k, int(mask.sum()),
                          norm(server.v_hat), norm(server.x - x_prev), degenerate)
        records.append(rec)
        if on_round is not None:
            on_round(rec, server, V)

    return Trajectory(records, server.x, V, server.v_hat)
