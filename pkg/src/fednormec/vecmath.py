"""Dense vector helpers, smoothed normalization and keyed random streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PURPOSES = {"participation": 0, "dp-noise": 1, "data-gen": 2}


class InvalidInputError(ValueError):
    """Raised for non-finite vectors or out-of-domain scalar arguments."""


def as_vector(values, d: int | None = None) -> np.ndarray:
    """Copy ``values`` into a read-only float64 vector, checking finiteness."""
    v = np.array(values, dtype=np.float64).reshape(-1)
    if d is not None and v.shape[0] != d:
        raise InvalidInputError(f"expected dimension {d}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("vector has non-finite entries")
    v.flags.writeable = False
    return v


def norm(v) -> float:
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("vector has non-finite entries")
    return float(np.sqrt(np.dot(v.ravel(), v.ravel())))


def smoothed_normalize(v, alpha: float) -> np.ndarray:
    """Return ``v / (alpha + ||v||)`` along the last axis.

    Accepts a single vector or a stack of row vectors. Zero rows map to zero,
    including when ``alpha == 0``.
    """
    if alpha < 0 or not np.isfinite(alpha):
        raise InvalidInputError(f"alpha must be finite and >= 0, got {alpha}")
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("vector has non-finite entries")
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    denom = alpha + norms
    out = np.zeros_like(v)
    np.divide(v, denom, out=out, where=norms > 0)
    return out


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream addressed by ``(seed, round, client, purpose)``.

    Each address maps to its own ``SeedSequence`` spawn key, so draws for one
    client never depend on how many numbers another client consumed.
    """

    seed: int
    round: int = 0
    client: int = 0
    purpose: str = "data-gen"

    def __post_init__(self):
        if self.purpose not in PURPOSES:
            raise InvalidInputError(f"unknown stream purpose {self.purpose!r}")
        if self.round < 0 or self.client < 0:
            raise InvalidInputError("stream path entries must be non-negative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            int(self.seed) & 0xFFFFFFFFFFFFFFFF,
            spawn_key=(int(self.round), int(self.client), PURPOSES[self.purpose]),
        )
        return np.random.Generator(np.random.PCG64(ss))


def gaussian_vector(stream: RngStream, d: int, sigma: float) -> np.ndarray:
    if d <= 0:
        raise InvalidInputError(f"dimension must be positive, got {d}")
    if sigma < 0 or not np.isfinite(sigma):
        raise InvalidInputError(f"sigma must be finite and >= 0, got {sigma}")
    if sigma == 0:
        return np.zeros(d)
    return sigma * stream.generator().standard_normal(d)
