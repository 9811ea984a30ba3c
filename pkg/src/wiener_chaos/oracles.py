"""Independent ground truth for the model equation du = u_xx dt + u_xx dW, u(0) = exp(-x^2/2).

Fourier convention: u_hat(y) = (2 pi)^{-1/2} int exp(-i x y) u(x) dx, so the
initial datum has u_hat(0, y) = exp(-y^2/2) and every mode is a geometric
Brownian motion

    d u_hat = -y^2 u_hat dt - y^2 u_hat dW,
    u_hat(t) = u_hat(0) exp(-y^2 t - y^4 t / 2 - y^2 W(t)).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .cm_basis import HFunction, TimeInterval, cosine_antiderivative
from .errors import DomainError, NumericalError
from .multiindex import MultiIndex


def initial_hat(y):
    """Fourier transform of exp(-x^2/2)."""
    return np.exp(-0.5 * np.asarray(y, dtype=float) ** 2)


def gbm_coeff(alpha: MultiIndex, t: float, y: float, interval: TimeInterval) -> float:
    """Chaos coefficient u_hat_alpha(t, y) of the geometric Brownian mode.

    Expanding exp(-y^2 W(t)) = exp(-y^2 sum_k M_k(t) zeta_k) in Hermite
    functionals gives u_hat(0) e^{-y^2 t} prod_k (-y^2 M_k(t))^{alpha_k} / sqrt(alpha!).
    """
    T = interval.T
    if not 0.0 <= t <= T * (1 + 1e-12):
        raise DomainError(f"need 0 <= t <= T={T}, got {t}")
    out = float(initial_hat(y)) * math.exp(-y * y * t)
    for k, a in alpha.items():
        out *= (-y * y * float(cosine_antiderivative(k, t, T))) ** a
    return out / math.sqrt(alpha.factorial())


def mean_exact(t: float, y: float) -> float:
    return float(initial_hat(y)) * math.exp(-y * y * t)


def second_moment_exact(t: float, y: float) -> float:
    """E|u_hat(t, y)|^2, from d E|u|^2 / dt = (-2 y^2 + y^4) E|u|^2."""
    return float(initial_hat(y)) ** 2 * math.exp((y ** 4 - 2 * y * y) * t)


@dataclass(frozen=True)
class GrowthValue:
    """Level-n norm t^n/n! ||D^{2n} Phi_t u0||^2 with its Stirling normalizations."""

    n: int
    t: float
    value: float
    ratio: float          # value / [(2 sqrt(t)/(1+2t))^{2n} n!]
    ratio_printed: float  # value / [(2 sqrt(t)/(1+t))^{2n} n!]


def _log_growth_integrand_peak(n, a):
    if n == 0:
        return 0.0, 0.0
    y = math.sqrt(2 * n / a)
    return y, 4 * n * math.log(y) - a * y * y


def growth_integral(n: int, t: float) -> float:
    """int_R y^{4n} exp(-(1+2t) y^2) dy by adaptive quadrature."""
    a = 1.0 + 2.0 * t
    y_star, log_peak = _log_growth_integrand_peak(n, a)

    def f(y):
        if y == 0.0:
            return 1.0 if n == 0 and log_peak == 0 else 0.0
        return math.exp(4 * n * math.log(y) - a * y * y - log_peak)

    width = 12.0 / math.sqrt(a)
    pieces = [(0.0, y_star), (y_star, y_star + width), (y_star + width, math.inf)]
    total, err = 0.0, 0.0
    for lo, hi in pieces:
        if hi <= lo:
            continue
        val, e = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)
        total += val
        err += e
    if not np.isfinite(total) or err > 1e-8 * abs(total):
        raise NumericalError("growth quadrature did not converge", n=n, t=t, estimate=total,
                             error=err)
    return 2.0 * total * math.exp(log_peak)


def growth_closed_form(n: int, t: float) -> float:
    """Gamma-function form of :func:`growth_integral` times t^n/n!."""
    a = 1.0 + 2.0 * t
    return math.exp(n * math.log(t) - math.lgamma(n + 1) + math.lgamma(2 * n + 0.5)
                    - (2 * n + 0.5) * math.log(a)) if t > 0 or n == 0 else 0.0


def growth_oracle(n: int, t: float, interval: TimeInterval | None = None) -> GrowthValue:
    """S_n(t) = t^n/n! int y^{4n} |exp(-y^2 t) u_hat(0, y)|^2 dy by quadrature."""
    if n < 0 or n > 12:
        raise DomainError(f"growth oracle supports 0 <= n <= 12, got {n}")
    if t < 0 or (interval is not None and t > interval.T * (1 + 1e-12)):
        raise DomainError(f"t={t} outside the interval")
    value = (t ** n / math.factorial(n)) * growth_integral(n, t)
    if t == 0:
        return GrowthValue(n, t, value, math.nan, math.nan)
    lf = math.lgamma(n + 1)
    ratio = value / math.exp(2 * n * math.log(2 * math.sqrt(t) / (1 + 2 * t)) + lf)
    printed = value / math.exp(2 * n * math.log(2 * math.sqrt(t) / (1 + t)) + lf)
    return GrowthValue(n, t, value, ratio, printed)


@dataclass(frozen=True)
class McConfig:
    M: int = 100_000
    steps: int = 1000
    seed: int = 20240601
    block: int = 10_000

    def __post_init__(self):
        if self.M < 1 or self.steps < 2 or self.block < 1:
            raise DomainError("need M >= 1, steps >= 2, block >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError("seed must be an unsigned 64-bit integer")

    def blocks(self):
        """(size, Generator) per path block; substreams are spawned from the seed."""
        n = -(-self.M // self.block)
        seqs = np.random.SeedSequence(self.seed).spawn(n)
        for i, ss in enumerate(seqs):
            yield min(self.block, self.M - i * self.block), np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class McEstimate:
    mean: float
    second_moment: float
    mean_se: float
    second_moment_se: float


def _brownian_blocks(t, cfg):
    """Increments on a uniform grid of cfg.steps steps over (0, t), per block."""
    dt = t / cfg.steps
    for size, rng in cfg.blocks():
        yield rng.standard_normal((size, cfg.steps)) * math.sqrt(dt)


class _Moments:
    def __init__(self):
        self.n, self.s1, self.s2, self.s4 = 0, 0.0, 0.0, 0.0

    def add(self, u):
        self.n += u.size
        self.s1 += float(u.sum())
        self.s2 += float((u * u).sum())
        self.s4 += float((u ** 4).sum())

    def estimate(self):
        n = self.n
        m1, m2, m4 = self.s1 / n, self.s2 / n, self.s4 / n
        d = max(n - 1, 1)
        return McEstimate(m1, m2, math.sqrt(max(m2 - m1 * m1, 0.0) * n / d / n),
                          math.sqrt(max(m4 - m2 * m2, 0.0) * n / d / n))


def mc_moments(t: float, y: float, cfg: McConfig) -> McEstimate:
    """Sample mean and second moment of the exact pathwise mode solution."""
    if y == 0:
        return McEstimate(1.0, 1.0, 0.0, 0.0)
    acc = _Moments()
    u0 = float(initial_hat(y))
    for dW in _brownian_blocks(t, cfg):
        W = dW.sum(axis=1)
        acc.add(u0 * np.exp(-y * y * t - 0.5 * y ** 4 * t - y * y * W))
    return acc.estimate()


def mc_s_transform(h: HFunction, t: float, y: float, cfg: McConfig,
                   T: float | None = None) -> tuple[float, float]:
    """(estimate, standard error) of E[u_hat(t, y) E_h(t)].

    E_h(t) = exp(sum_j h(t_j+1/2) dW_j - 1/2 int_0^t h^2) with the integral by
    the trapezoid rule on the path grid.  ``T`` is the horizon of the basis
    defining h (defaults to t).
    """
    T = t if T is None else T
    if y == 0:
        return 1.0, 0.0
    grid = np.linspace(0.0, t, cfg.steps + 1)
    mids = 0.5 * (grid[1:] + grid[:-1])
    h_mid = np.asarray(h(mids, T), dtype=float)
    h_nodes = np.asarray(h(grid, T), dtype=float)
    half_sq = 0.5 * np.trapezoid(h_nodes ** 2, grid)
    u0 = float(initial_hat(y))
    acc = _Moments()
    for dW in _brownian_blocks(t, cfg):
        W = dW.sum(axis=1)
        u = u0 * np.exp(-y * y * t - 0.5 * y ** 4 * t - y * y * W)
        acc.add(u * np.exp(dW @ h_mid - half_sq))
    est = acc.estimate()
    return est.mean, est.mean_se


def write_oracle_report(path, rows, header: str | None = None) -> None:
    """CSV with columns (quantity, computed, oracle, standard_error_or_tolerance, pass)."""
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quantity", "computed", "oracle", "standard_error_or_tolerance", "pass"])
        for q, c, o, tol, ok in rows:
            w.writerow([q, repr(float(c)), repr(float(o)), repr(float(tol)), str(bool(ok)).lower()])
