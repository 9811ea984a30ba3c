"""Cosine basis of L2(0, T), Hermite polynomials and Cameron-Martin functionals."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError
from .multiindex import MultiIndex


@dataclass(frozen=True)
class TimeInterval:
    """Uniform grid 0 = t_0 < ... < t_{n_t} = T."""

    T: float
    n_t: int

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError(f"T must be positive, got {self.T}")
        if self.n_t < 2:
            raise DomainError(f"n_t must be >= 2, got {self.n_t}")

    @classmethod
    def from_dt(cls, T: float, dt: float) -> "TimeInterval":
        n = int(round(T / dt))
        if n < 2 or not math.isclose(n * dt, T, rel_tol=1e-9):
            raise DomainError(f"dt={dt} does not divide T={T} into >= 2 steps")
        return cls(T, n)

    @property
    def dt(self) -> float:
        return self.T / self.n_t

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_t + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.n_t) + 0.5) * self.dt

    def step_index(self, t: float) -> int:
        """Grid index of time t; t must lie on the grid."""
        j = int(round(t / self.dt))
        if j < 0 or j > self.n_t or abs(j * self.dt - t) > 1e-9 * max(1.0, self.T):
            raise DomainError(f"t={t} is not a node of the time grid")
        return j


def _check_k_t(k, t, T):
    if np.any(np.asarray(k) < 1):
        raise DomainError(f"basis index must be >= 1, got {k}")
    t = np.asarray(t, dtype=float)
    tol = 1e-12 * T
    if np.any(t < -tol) or np.any(t > T + tol):
        raise DomainError(f"t must lie in [0, {T}]")
    return t


def cosine(k: int, t, T: float):
    """m_1 = 1/sqrt(T), m_k = sqrt(2/T) cos(pi (k-1) t / T)."""
    t = _check_k_t(k, t, T)
    if k == 1:
        return np.full_like(t, 1.0 / math.sqrt(T))[()]
    return (math.sqrt(2.0 / T) * np.cos(math.pi * (k - 1) * t / T))[()]


def cosine_antiderivative(k: int, t, T: float):
    """M_k(t) = int_0^t m_k(s) ds in closed form."""
    t = _check_k_t(k, t, T)
    if k == 1:
        return (t / math.sqrt(T))[()]
    w = math.pi * (k - 1) / T
    return (math.sqrt(2.0 / T) * np.sin(w * t) / w)[()]


def basis_matrix(K: int, t, T: float) -> np.ndarray:
    """Array of shape (len(t), K) with entries m_k(t_j)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.stack([np.atleast_1d(cosine(k, t, T)) for k in range(1, K + 1)], axis=-1)


def hermite(n: int, x):
    """Probabilists' Hermite polynomial He_n(x) via the three-term recurrence."""
    if n < 0:
        raise DomainError(f"degree must be >= 0, got {n}")
    x = np.asarray(x, dtype=float)
    h_prev, h = np.ones_like(x), x.copy()
    if n == 0:
        return h_prev[()]
    for m in range(1, n):
        h_prev, h = h, x * h - m * h_prev
    return h[()]


def xi_eval(alpha: MultiIndex, zeta) -> np.ndarray | float:
    """xi_alpha = prod_k He_{alpha_k}(zeta_k) / sqrt(alpha!).

    ``zeta`` has shape (K,) or (M, K); column k-1 holds int_0^T m_k dW.
    """
    zeta = np.asarray(zeta, dtype=float)
    if alpha.max_index > zeta.shape[-1]:
        raise DomainError(
            f"zeta has {zeta.shape[-1]} components, {alpha!r} needs {alpha.max_index}")
    out = np.ones(zeta.shape[:-1])
    for k, a in alpha.items():
        out = out * hermite(a, zeta[..., k - 1])
    return (out / math.sqrt(alpha.factorial()))[()]


def sample_zeta(M: int, K: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. standard Gaussian zeta of shape (M, K)."""
    return rng.standard_normal((M, K))


def zeta_from_increments(dW: np.ndarray, interval: TimeInterval, K: int) -> np.ndarray:
    """zeta_k = sum_j (m_k(t_j) + m_k(t_{j+1}))/2 * dW_j for paths dW of shape (M, n_t)."""
    m = basis_matrix(K, interval.times, interval.T)
    m_avg = 0.5 * (m[:-1] + m[1:])
    return dW @ m_avg


@dataclass(frozen=True)
class HFunction:
    """A test direction h(t) = sum_k h_k m_k(t) on (0, T)."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1 or c.size < 1:
            raise DomainError("h needs a non-empty coefficient vector")
        if not np.all(np.isfinite(c)):
            raise DomainError("h coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, K: int = 1) -> "HFunction":
        return cls(np.zeros(K))

    @property
    def K(self) -> int:
        return self.coeffs.size

    def __call__(self, t, T: float):
        t = np.asarray(t, dtype=float)
        return (basis_matrix(self.K, t, T) @ self.coeffs).reshape(t.shape)[()]

    def integral(self, t, T: float):
        """int_0^t h(s) ds."""
        return sum(c * cosine_antiderivative(k, t, T)
                   for k, c in enumerate(self.coeffs, start=1))

    def power(self, alpha: MultiIndex) -> float:
        """h^alpha = prod_k h_k^{alpha_k} (zero if alpha uses k > K)."""
        if alpha.max_index > self.K:
            return 0.0
        return math.prod(self.coeffs[k - 1] ** a for k, a in alpha.items())


def project(h: Callable, K: int, interval: TimeInterval) -> HFunction:
    """h_k = int_0^T h(t) m_k(t) dt by composite trapezoid on the interval grid."""
    t = interval.times
    values = np.asarray(h(t), dtype=float) * np.ones_like(t)
    m = basis_matrix(K, t, interval.T)
    return HFunction(np.trapezoid(values[:, None] * m, t, axis=0))
