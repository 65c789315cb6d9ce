"""Synthetic federated objectives with exact gradients and known constants.

A federation holds ``M`` clients, each with ``N`` component losses. Component
families are stacked into dense arrays so that the same kernel evaluates one
client (leading shape ``()``) or every client at once (leading shape ``(M,)``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import expit

from .vecmath import InvalidInputError, RngStream, as_vector

FAMILIES = ("quadratic-hetero", "quadratic-homo", "logistic-blobs")

# relative floor under which a computed heterogeneity gap is roundoff
_DELTA_TOL = 1e-12


class InvalidProblemError(ValueError):
    """Raised for malformed problems (non-PSD curvature, unbounded objectives...)."""


@dataclass(frozen=True)
class QuadraticComponent:
    """``0.5 (x - center)^T A (x - center) + offset``."""

    A: np.ndarray
    center: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        A = np.array(self.A, dtype=np.float64)
        center = as_vector(self.center)
        if A.shape != (center.size, center.size):
            raise InvalidProblemError(f"curvature shape {A.shape} does not match center")
        if not np.allclose(A, A.T, atol=1e-12):
            raise InvalidProblemError("curvature matrix is not symmetric")
        A = 0.5 * (A + A.T)
        lam_min = np.linalg.eigvalsh(A)[0]
        if lam_min < -1e-10 * max(1.0, np.abs(A).max()):
            raise InvalidProblemError(f"curvature is not PSD (min eigenvalue {lam_min:.3g})")
        A.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def d(self) -> int:
        return self.center.size

    @cached_property
    def smoothness(self) -> float:
        return float(max(np.linalg.eigvalsh(self.A)[-1], 0.0))

    @property
    def infimum(self) -> float:
        return self.offset

    def value(self, x) -> float:
        r = np.asarray(x) - self.center
        return float(0.5 * r @ self.A @ r + self.offset)

    def grad(self, x) -> np.ndarray:
        return self.A @ (np.asarray(x) - self.center)


@dataclass(frozen=True)
class LogisticComponent:
    """``log(1 + exp(-label * <features, x>))`` with ``label`` in {-1, +1}."""

    features: np.ndarray
    label: float

    def __post_init__(self):
        if self.label not in (-1, 1):
            raise InvalidProblemError(f"label must be +1 or -1, got {self.label}")
        object.__setattr__(self, "features", as_vector(self.features))
        object.__setattr__(self, "label", float(self.label))

    @property
    def d(self) -> int:
        return self.features.size

    @property
    def smoothness(self) -> float:
        return float(self.features @ self.features) / 4.0

    @property
    def infimum(self) -> float:
        # valid lower bound; the true infimum is not available in closed form
        return 0.0

    def value(self, x) -> float:
        return float(np.logaddexp(0.0, -self.label * (self.features @ np.asarray(x))))

    def grad(self, x) -> np.ndarray:
        m = self.label * (self.features @ np.asarray(x))
        return -self.label * expit(-m) * self.features


class _QuadraticKernel:
    """Stacked quadratics: ``A`` is ``(..., N, d, d)``, ``C`` is ``(..., N, d)``."""

    family = "quadratic"

    def __init__(self, A, C, offsets):
        self.A, self.C, self.offsets = A, C, offsets
        self.AC = np.einsum("...nij,...nj->...ni", A, C)
        self.A_mean = A.mean(axis=-3)
        self.b_mean = self.AC.mean(axis=-2)
        cAc = np.einsum("...ni,...ni->...n", C, self.AC)
        self.const = (0.5 * cAc + offsets).mean(axis=-1)

    @property
    def N(self) -> int:
        return self.A.shape[-3]

    def grad(self, X):
        return np.einsum("...ij,...j->...i", self.A_mean, X) - self.b_mean

    def grad_component(self, j, X):
        return np.einsum("...ij,...j->...i", self.A[..., j, :, :], X - self.C[..., j, :])

    def value(self, X):
        AX = np.einsum("...ij,...j->...i", self.A_mean, X)
        return 0.5 * np.einsum("...i,...i->...", X, AX) - np.einsum("...i,...i->...", X, self.b_mean) + self.const


class _LogisticKernel:
    """Stacked logistic losses: ``F`` is ``(..., N, d)``, ``y`` is ``(..., N)``."""

    family = "logistic"

    def __init__(self, F, y):
        self.F, self.y = F, y

    @property
    def N(self) -> int:
        return self.F.shape[-2]

    def _margins(self, X):
        return self.y * np.einsum("...nd,...d->...n", self.F, X)

    def grad(self, X):
        w = -self.y * expit(-self._margins(X))
        return np.einsum("...n,...nd->...d", w, self.F) / self.N

    def grad_component(self, j, X):
        Fj = self.F[..., j, :]
        m = self.y[..., j] * np.einsum("...d,...d->...", Fj, X)
        return (-self.y[..., j] * expit(-m))[..., None] * Fj

    def value(self, X):
        return np.logaddexp(0.0, -self._margins(X)).mean(axis=-1)


def _build_kernel(components):
    """Stack a list (clients) of lists (components) into one kernel."""
    first = components[0][0]
    if all(isinstance(c, QuadraticComponent) for row in components for c in row):
        A = np.array([[c.A for c in row] for row in components])
        C = np.array([[c.center for c in row] for row in components])
        off = np.array([[c.offset for c in row] for row in components])
        return _QuadraticKernel(A, C, off)
    if all(isinstance(c, LogisticComponent) for row in components for c in row):
        F = np.array([[c.features for c in row] for row in components])
        y = np.array([[c.label for c in row] for row in components])
        return _LogisticKernel(F, y)
    raise InvalidProblemError(f"mixed or unsupported component families (first is {type(first).__name__})")


def _quadratic_infimum(A, b, const):
    """Infimum of ``0.5 x^T A x - b^T x + const`` for PSD ``A``."""
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.linalg.norm(A @ x - b) > 1e-8 * max(1.0, np.linalg.norm(b)):
        raise InvalidProblemError("quadratic objective is unbounded below")
    return float(0.5 * x @ A @ x - b @ x + const), x


class ClientProblem:
    """One client's objective ``f_i = (1/N) sum_j f_ij``."""

    def __init__(self, components, index: int = 0):
        components = tuple(components)
        if not components:
            raise InvalidProblemError("a client needs at least one component")
        d = components[0].d
        if any(c.d != d for c in components):
            raise InvalidProblemError("all components of a client must share the dimension")
        self.components = components
        self.index = index
        self._kernel = _build_kernel([components])

    @property
    def N(self) -> int:
        return len(self.components)

    @property
    def d(self) -> int:
        return self.components[0].d

    @property
    def smoothness(self) -> float:
        return max(c.smoothness for c in self.components)

    def _check_j(self, j):
        if not 0 <= j < self.N:
            raise IndexError(f"component index {j} out of range for N={self.N}")

    def value(self, x) -> float:
        return float(self._kernel.value(np.asarray(x, dtype=np.float64))[0])

    def grad(self, x) -> np.ndarray:
        return self._kernel.grad(np.asarray(x, dtype=np.float64)[None, :])[0]

    def grad_component(self, j: int, x) -> np.ndarray:
        self._check_j(j)
        return self._kernel.grad_component(j, np.asarray(x, dtype=np.float64)[None, :])[0]

    @cached_property
    def infimum(self) -> float:
        """Exact ``f_i^inf`` for quadratics, the lower bound 0 for logistic clients."""
        k = self._kernel
        if k.family != "quadratic":
            return 0.0
        return _quadratic_infimum(k.A_mean[0], k.b_mean[0], k.const[0])[0]


class _BatchView:
    """All clients at once: inputs and outputs are ``(M, d)`` arrays."""

    def __init__(self, kernel):
        self._kernel = kernel

    @property
    def N(self) -> int:
        return self._kernel.N

    def grad(self, X):
        return self._kernel.grad(X)

    def grad_component(self, j, X):
        return self._kernel.grad_component(j, X)

    def value(self, X):
        return self._kernel.value(X)


@dataclass
class FederationProblem:
    """``f = (1/M) sum_i f_i`` over a list of clients."""

    clients: list
    x0: np.ndarray | None = None
    family: str = "custom"
    L: float | None = None
    approximate: bool = field(default=False)

    def __post_init__(self):
        if not self.clients:
            raise InvalidProblemError("a federation needs at least one client")
        d, N = self.clients[0].d, self.clients[0].N
        if any(c.d != d for c in self.clients):
            raise InvalidProblemError("all clients must share the dimension")
        if any(c.N != N for c in self.clients):
            raise InvalidProblemError("all clients must hold the same number of components")
        for i, c in enumerate(self.clients):
            c.index = i
        self._kernel = _build_kernel([c.components for c in self.clients])
        self.batch = _BatchView(self._kernel)
        lmax = max(c.smoothness for c in self.clients)
        if self.L is None:
            self.L = lmax
        elif self.L < lmax - 1e-12:
            raise InvalidProblemError(f"L={self.L} below the component smoothness {lmax}")
        self.approximate = self._kernel.family != "quadratic"
        self.x0 = np.zeros(d) if self.x0 is None else as_vector(self.x0, d)

    @property
    def M(self) -> int:
        return len(self.clients)

    @property
    def N(self) -> int:
        return self.clients[0].N

    @property
    def d(self) -> int:
        return self.clients[0].d

    def value(self, x) -> float:
        return float(np.mean(self._kernel.value(np.broadcast_to(x, (self.M, self.d)))))

    def grad(self, x) -> np.ndarray:
        return self._kernel.grad(np.broadcast_to(x, (self.M, self.d))).mean(axis=0)

    @cached_property
    def minimizer(self) -> np.ndarray | None:
        if self._kernel.family != "quadratic":
            return None
        k = self._kernel
        return _quadratic_infimum(k.A_mean.mean(axis=0), k.b_mean.mean(axis=0), k.const.mean())[1]

    @cached_property
    def f_inf(self) -> float:
        """Exact global infimum for quadratics; the valid lower bound 0 otherwise."""
        k = self._kernel
        if k.family != "quadratic":
            return 0.0
        return _quadratic_infimum(k.A_mean.mean(axis=0), k.b_mean.mean(axis=0), k.const.mean())[0]

    @cached_property
    def _f_inf_upper(self) -> float:
        # numerical minimum: an upper estimate of f^inf for non-quadratic families
        from scipy.optimize import minimize

        res = minimize(self.value, np.zeros(self.d), jac=self.grad, method="L-BFGS-B")
        return float(min(res.fun, self.value(self.x0)))

    def delta_inf(self) -> float:
        """Heterogeneity gap ``f^inf - mean_i f_i^inf`` (never negative).

        For logistic federations this is an upper estimate: the numerical
        minimum of ``f`` minus the lower bound 0 for every client.
        """
        if self._kernel.family != "quadratic":
            return max(self._f_inf_upper, 0.0)
        gap = self.f_inf - float(np.mean([c.infimum for c in self.clients]))
        return _clean_gap(gap, self.f_inf)

    def delta_inf_i(self, i: int) -> float:
        """``f^inf - (1/N) sum_j f_ij^inf`` for client ``i``.

        Individual values may be negative when one client's components sit
        above the global infimum; their average over clients is not.
        """
        if not 0 <= i < self.M:
            raise IndexError(f"client index {i} out of range for M={self.M}")
        comps = self.clients[i].components
        f_inf = self.f_inf if self._kernel.family == "quadratic" else self._f_inf_upper
        gap = f_inf - float(np.mean([c.infimum for c in comps]))
        return _clean_gap(gap, f_inf, clamp=False)


def _clean_gap(gap, scale, clamp=True):
    if abs(gap) <= _DELTA_TOL * max(1.0, abs(scale)):
        return 0.0
    return max(gap, 0.0) if clamp else gap


def grad_component(problem: FederationProblem, i: int, j: int, x) -> np.ndarray:
    if not 0 <= i < problem.M:
        raise IndexError(f"client index {i} out of range for M={problem.M}")
    return problem.clients[i].grad_component(j, x)


def grad_local(problem: FederationProblem, i: int, x) -> np.ndarray:
    if not 0 <= i < problem.M:
        raise IndexError(f"client index {i} out of range for M={problem.M}")
    return problem.clients[i].grad(x)


def grad_global(problem: FederationProblem, x) -> np.ndarray:
    return problem.grad(x)


def eval_f(problem: FederationProblem, x) -> float:
    return problem.value(x)


def delta_inf(problem: FederationProblem) -> float:
    return problem.delta_inf()


def delta_inf_i(problem: FederationProblem, i: int) -> float:
    return problem.delta_inf_i(i)


@dataclass
class SuiteSpec:
    """Recipe for a synthetic federation.

    ``heterogeneity`` scales how far client minimizers (quadratics) or client
    feature means (logistic) spread apart.
    """

    family: str = "quadratic-hetero"
    clients: int = 20
    samples: int = 5
    dim: int = 10
    heterogeneity: float = 1.0
    curvature_floor: float = 0.1
    x0_scale: float = 1.0
    seed: int = 0


def make_suite(spec: SuiteSpec, seed: int | None = None) -> FederationProblem:
    if spec.family not in FAMILIES:
        raise InvalidProblemError(f"unknown suite family {spec.family!r}; expected one of {FAMILIES}")
    if spec.clients < 1 or spec.samples < 1 or spec.dim < 1:
        raise InvalidProblemError("clients, samples and dim must all be >= 1")
    if spec.curvature_floor < 0 or spec.heterogeneity < 0:
        raise InvalidProblemError("curvature_floor and heterogeneity must be >= 0")
    seed = spec.seed if seed is None else seed
    rng = RngStream(seed, purpose="data-gen").generator()
    M, N, d, s = spec.clients, spec.samples, spec.dim, spec.heterogeneity

    if spec.family.startswith("quadratic"):
        G = rng.standard_normal((M, N, d, d)) / np.sqrt(d)
        A = np.einsum("...ki,...kj->...ij", G, G) + spec.curvature_floor * np.eye(d)
        if spec.family == "quadratic-hetero":
            client_shift = rng.standard_normal((M, 1, d))
            within = 0.5 * rng.standard_normal((M, N, d))
            centers = s * (client_shift + within)
        else:
            centers = np.broadcast_to(s * rng.standard_normal(d), (M, N, d))
        clients = [
            ClientProblem([QuadraticComponent(A[i, j], centers[i, j]) for j in range(N)], i)
            for i in range(M)
        ]
    else:
        w_true = rng.standard_normal(d)
        means = s * rng.standard_normal((M, 1, d))
        F = means + rng.standard_normal((M, N, d))
        y = np.sign(F @ w_true + 0.5 * rng.standard_normal((M, N)))
        y[y == 0] = 1.0
        clients = [
            ClientProblem([LogisticComponent(F[i, j], y[i, j]) for j in range(N)], i)
            for i in range(M)
        ]
    x0 = spec.x0_scale * rng.standard_normal(d)
    return FederationProblem(clients, x0=x0, family=spec.family)


def problem_from_pairs(curvatures, centers, offsets=None, x0=None) -> FederationProblem:
    """One-component-per-client federation of 1-D or diagonal quadratics.

    Handy for hand-traceable examples: ``curvatures[i]`` and ``centers[i]`` may
    be scalars (d=1) or vectors (diagonal curvature).
    """
    clients = []
    for i, (a, c) in enumerate(zip(curvatures, centers)):
        c = np.atleast_1d(np.asarray(c, dtype=np.float64))
        A = np.diag(np.broadcast_to(np.asarray(a, dtype=np.float64), c.shape))
        off = 0.0 if offsets is None else offsets[i]
        clients.append(ClientProblem([QuadraticComponent(A, c, off)], i))
    return FederationProblem(clients, x0=x0)


__all__ = [
    "FAMILIES",
    "ClientProblem",
    "FederationProblem",
    "InvalidInputError",
    "InvalidProblemError",
    "LogisticComponent",
    "QuadraticComponent",
    "SuiteSpec",
    "delta_inf",
    "delta_inf_i",
    "eval_f",
    "grad_component",
    "grad_global",
    "grad_local",
    "make_suite",
    "problem_from_pairs",
]
