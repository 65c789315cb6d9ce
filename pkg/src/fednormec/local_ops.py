"""Local fixed-point operators run by a client starting from the server model.

Every operator accepts anything exposing ``grad(x)``, ``grad_component(j, x)``
and ``N``: a single :class:`ClientProblem` with ``x`` of shape ``(d,)``, or a
federation's batch view with ``x`` of shape ``(M, d)`` (one row per client).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MODES = ("gd", "ig")


class LocalUpdateDivergedError(FloatingPointError):
    """A local step produced a non-finite iterate."""


@dataclass(frozen=True)
class LocalOpConfig:
    mode: str = "gd"
    steps: int = 1
    gamma: float = 0.1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"local mode must be one of {MODES}, got {self.mode!r}")
        if self.steps < 1:
            raise ValueError(f"local steps must be >= 1, got {self.steps}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")


@dataclass
class LocalTrace:
    """Result of a local pass together with the inner iterates ``x^{0..S-1}``."""

    result: np.ndarray
    iterates: list


def _check(x, step):
    if not np.all(np.isfinite(x)):
        raise LocalUpdateDivergedError(f"local iterate became non-finite at inner step {step}")


def local_gd(client, x, gamma: float, steps: int = 1, record: bool = False):
    """``steps`` gradient steps of size ``gamma / steps`` on ``f_i``."""
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    y = np.array(x, dtype=np.float64)
    h = gamma / steps
    iterates = []
    for j in range(steps):
        if record:
            iterates.append(y.copy())
        with np.errstate(over="ignore", invalid="ignore"):
            y = y - h * client.grad(y)
        _check(y, j)
    return LocalTrace(y, iterates) if record else y


def local_ig(client, x, gamma: float, record: bool = False):
    """One cyclic pass over the ``N`` components in stored order, step ``gamma / N``."""
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    y = np.array(x, dtype=np.float64)
    h = gamma / client.N
    iterates = []
    for j in range(client.N):
        if record:
            iterates.append(y.copy())
        with np.errstate(over="ignore", invalid="ignore"):
            y = y - h * client.grad_component(j, y)
        _check(y, j)
    return LocalTrace(y, iterates) if record else y


def apply_local(client, x, cfg: LocalOpConfig, record: bool = False):
    if cfg.mode == "gd":
        return local_gd(client, x, cfg.gamma, cfg.steps, record=record)
    return local_ig(client, x, cfg.gamma, record=record)


def residual_to_update(x, Tx, gamma: float) -> np.ndarray:
    """Rescaled local model update ``(x - T(x)) / gamma``."""
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    return (np.asarray(x) - np.asarray(Tx)) / gamma
