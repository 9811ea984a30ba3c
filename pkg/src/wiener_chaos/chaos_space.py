"""Chaos series and the weighted spaces (L)_{p,q}.

A :class:`ChaosSeries` maps multi-indices to coefficient values that all share
one shape: scalars, spatial fields ``(n_x,)``, or trajectories
``(n_times,)`` / ``(n_times, n_x)`` when ``times`` is set.  Norms take a
``spatial_norm`` callable returning the squared norm over the trailing axis
(see :meth:`SpatialGrid.norm_sq`); ``None`` means the plain sum of squares.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

from .cm_basis import HFunction
from .errors import DomainError
from .multiindex import MultiIndex

SpatialNorm = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class WeightPair:
    p: float
    q: float

    def __post_init__(self):
        if not (math.isfinite(self.p) and math.isfinite(self.q)):
            raise DomainError(f"weights must be finite, got ({self.p}, {self.q})")


class ChaosSeries:
    def __init__(self, coefficients: Mapping[MultiIndex, np.ndarray], N: int, K: int,
                 times: np.ndarray | None = None):
        shape = None
        coeffs = {}
        for alpha, value in coefficients.items():
            if alpha.order > N or alpha.max_index > K:
                raise DomainError(f"{alpha!r} lies outside the truncation (N={N}, K={K})")
            value = np.asarray(value)
            if shape is None:
                shape = value.shape
            elif value.shape != shape:
                raise DomainError(f"coefficient shape {value.shape} != {shape} at {alpha!r}")
            coeffs[alpha] = value
        if times is not None:
            times = np.asarray(times, dtype=float)
            if shape is not None and (len(shape) == 0 or shape[0] != times.size):
                raise DomainError("trajectory coefficients need a leading time axis")
        self._coeffs = coeffs
        self.N, self.K = N, K
        self.times = times

    def __len__(self):
        return len(self._coeffs)

    def __iter__(self):
        return iter(self._coeffs)

    def __contains__(self, alpha):
        return alpha in self._coeffs

    def __getitem__(self, alpha: MultiIndex) -> np.ndarray:
        return self._coeffs[alpha]

    def get(self, alpha, default=None):
        return self._coeffs.get(alpha, default)

    def items(self):
        return self._coeffs.items()

    def level(self, n: int):
        return [(a, v) for a, v in self._coeffs.items() if a.order == n]

    def at_time(self, t: float) -> "ChaosSeries":
        """Static series of the coefficient values at recorded time t."""
        if self.times is None:
            raise DomainError("series carries no time axis")
        j = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise DomainError(f"t={t} was not recorded")
        return ChaosSeries({a: v[j] for a, v in self._coeffs.items()}, self.N, self.K)

    def coefficient_norm_sq(self, alpha: MultiIndex, spatial_norm: SpatialNorm | None = None) -> float:
        """||eta_alpha||_X^2; trajectories integrate the spatial norm over time."""
        return float(_norm_sq(self._coeffs[alpha], spatial_norm, self.times))

    def norm_table(self, spatial_norm: SpatialNorm | None = None) -> dict[MultiIndex, float]:
        return {a: self.coefficient_norm_sq(a, spatial_norm) for a in self._coeffs}


def _norm_sq(value, spatial_norm, times):
    if spatial_norm is None:
        # plain sum of squares over the non-time axes
        sq = np.abs(value) ** 2
        lead = 1 if times is not None else 0
        if sq.ndim > lead:
            sq = sq.reshape(sq.shape[:lead] + (-1,)).sum(axis=-1)
    else:
        sq = spatial_norm(value)
    if times is not None:
        return np.trapezoid(sq, times, axis=0)
    return sq


def weighted_norm_sq(series: ChaosSeries, w: WeightPair,
                     spatial_norm: SpatialNorm | None = None) -> float:
    """sum_alpha 2^{p|alpha|} prod k^{2q alpha_k} / |alpha|! * ||eta_alpha||_X^2."""
    total = 0.0
    for alpha in series:
        total += math.exp(alpha.weight_log(w.p, w.q)) * series.coefficient_norm_sq(alpha, spatial_norm)
    return total


def expectation_norm_sq(series: ChaosSeries, spatial_norm: SpatialNorm | None = None) -> float:
    """E||eta||_X^2 = sum_alpha ||eta_alpha||_X^2."""
    return sum(series.coefficient_norm_sq(a, spatial_norm) for a in series)


def s_evaluate(series: ChaosSeries, h: HFunction):
    """u_h = sum_alpha u_alpha h^alpha / sqrt(alpha!), summed level by level."""
    if h.K > series.K and np.any(h.coeffs[series.K:] != 0):
        raise DomainError(f"h uses basis functions beyond K={series.K}")
    total = None
    for alpha in sorted(series):
        c = h.power(alpha) / math.sqrt(alpha.factorial())
        term = c * series[alpha]
        total = term if total is None else total + term
    return total


def hnorm_sq(h: HFunction, s: float) -> float:
    """||h||_s^2 = sum_k k^{2s} h_k^2."""
    k = np.arange(1, h.K + 1, dtype=float)
    return float(np.sum(k ** (2.0 * s) * h.coeffs ** 2))


def eh_member(h: HFunction, w: WeightPair) -> bool:
    """Whether the stochastic exponential of h lies in the dual space (L)^{p,q}."""
    return hnorm_sq(h, -w.q) < 2.0 ** w.p


def level_contributions(norms: Mapping[MultiIndex, float], w: WeightPair, N: int) -> np.ndarray:
    """Weighted level sums c_n = sum_{|alpha|=n} weight(alpha) * norms[alpha], n = 0..N."""
    out = np.zeros(N + 1)
    for alpha, value in norms.items():
        if alpha.order <= N:
            out[alpha.order] += math.exp(alpha.weight_log(w.p, w.q)) * value
    return out


def write_series_csv(path, norms: Mapping[MultiIndex, float], weights: Iterable[WeightPair],
                     header: str | None = None) -> None:
    """One row per index: characteristic set, order, weight_log per (p, q), squared norm."""
    weights = list(weights)
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "order"]
                        + [f"weight_log_p{w.p:g}_q{w.q:g}" for w in weights] + ["norm_sq"])
        for alpha in sorted(norms):
            writer.writerow([alpha.to_string(), alpha.order]
                            + [repr(alpha.weight_log(w.p, w.q) + 0.0) for w in weights]
                            + [repr(float(norms[alpha]))])


@dataclass(frozen=True)
class DecayReport:
    """Geometric-decay diagnostics of weighted level contributions at one (p, q)."""

    weights: WeightPair
    contributions: np.ndarray
    ratios: np.ndarray           # c_{n+1}/c_n for n = n_from .. N-1
    decays: bool                 # every ratio <= max_ratio
    weighted_norm: float         # sum of all contributions
    last_change: float           # relative change of the partial sum from N-1 to N


def decay_report(norms: Mapping[MultiIndex, float], N: int, weights: Iterable[WeightPair],
                 n_from: int = 4, max_ratio: float = 0.9) -> list[DecayReport]:
    """Report, per weight pair, whether level contributions decay geometrically from n_from."""
    out = []
    for w in weights:
        c = level_contributions(norms, w, N)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = c[n_from + 1:] / c[n_from:-1] if N > n_from else np.zeros(0)
        total = float(c.sum())
        change = float(c[-1] / total) if total > 0 else 0.0
        ok = bool(ratios.size and np.all(np.isfinite(ratios)) and np.all(ratios <= max_ratio))
        out.append(DecayReport(w, c, ratios, ok, total, change))
    return out
