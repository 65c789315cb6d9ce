"""DP-FedAvg with smoothed normalization of the raw local update."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, RoundRecord, TrainingDiverged, Trajectory, sample_participation
from .local_ops import LocalOpConfig, LocalUpdateDivergedError, apply_local
from .vecmath import RngStream, norm, smoothed_normalize


@dataclass
class FedAvgConfig:
    eta: float = 0.05
    gamma: float = 0.05
    alpha: float = 0.01
    p: float = 1.0
    sigma_dp: float = 0.0
    K: int = 100
    local_mode: str = "gd"
    local_steps: int = 1
    private: bool = False
    seed: int = 0

    def __post_init__(self):
        for key in ("eta", "gamma"):
            val = getattr(self, key)
            if not (math.isfinite(val) and val > 0):
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

    @property
    def local(self) -> LocalOpConfig:
        return LocalOpConfig(self.local_mode, self.local_steps, self.gamma)

    @classmethod
    def matching(cls, run_cfg, **changes):
        """Baseline config sharing a Fed-alpha-NormEC run's knobs, with ``eta = gamma``."""
        kw = dict(eta=run_cfg.gamma, gamma=run_cfg.gamma, alpha=run_cfg.alpha, p=run_cfg.p,
                  sigma_dp=run_cfg.sigma_dp, K=run_cfg.K, local_mode=run_cfg.local_mode,
                  local_steps=run_cfg.local_steps, private=run_cfg.private, seed=run_cfg.seed)
        kw.update(changes)
        return cls(**kw)


def dp_fedavg_round(x, problem, cfg: FedAvgConfig, k: int = 0):
    """One round; returns ``(x_next, mask)``. An empty sample leaves ``x`` unchanged."""
    M, d = problem.M, problem.d
    x = np.asarray(x, dtype=np.float64)
    mask, _ = sample_participation(RngStream(cfg.seed, k, 0, "participation"), cfg.p, M)
    B = int(mask.sum())
    if B == 0:
        return x.copy(), mask
    X = np.broadcast_to(x, (M, d))
    payload = smoothed_normalize(X - apply_local(problem.batch, X, cfg.local), cfg.alpha)[mask]
    if cfg.private and cfg.sigma_dp > 0:
        noise = [cfg.sigma_dp * RngStream(cfg.seed, k, int(i), "dp-noise").generator().standard_normal(d)
                 for i in np.flatnonzero(mask)]
        payload = payload + np.array(noise)
    return x - (cfg.eta / B) * payload.sum(axis=0), mask


def run_fedavg(problem, cfg: FedAvgConfig, K: int | None = None, x0=None) -> Trajectory:
    """Rounds ``0..K`` of DP-FedAvg; records share the Fed-alpha-NormEC schema (``R_k`` is NaN)."""
    K = cfg.K if K is None else K
    x = np.array(problem.x0 if x0 is None else x0, dtype=np.float64)
    records, best = [], math.inf
    for k in range(K + 1):
        g = norm(problem.grad(x))
        best = min(best, g)
        try:
            x_next, mask = dp_fedavg_round(x, problem, cfg, k)
        except LocalUpdateDivergedError as exc:
            raise TrainingDiverged(f"round {k}: {exc}", records) from exc
        if not np.all(np.isfinite(x_next)):
            raise TrainingDiverged(f"round {k}: iterate became non-finite", records)
        B = int(mask.sum())
        records.append(RoundRecord(k, problem.value(x), g, best, math.nan, B, math.nan,
                                   norm(x_next - x), B == 0))
        x = x_next
    return Trajectory(records, x, algorithm="dp-fedavg")
