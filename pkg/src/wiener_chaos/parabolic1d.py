"""Deterministic 1-D parabolic machinery.

The real line is truncated to [-L, L) with grid points x_j = -L + j*dx,
dx = 2L/n_x.  ``periodic`` grids use spectral derivatives; ``bounded`` grids
use central differences with zero Dirichlet ghost values.  Time stepping is
Crank-Nicolson with coefficients, h(t) and forcing taken at the step midpoint.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cm_basis import HFunction, TimeInterval
from .errors import DomainError, NumericalError, RegimeError

Coefficient = Union[float, Callable[[float, np.ndarray], np.ndarray]]
Forcing = Union[None, Callable[[float, np.ndarray], np.ndarray], "Trajectory"]

MODES = ("periodic", "bounded")
_FD_STENCILS = {
    # offsets, first-derivative weights (/dx), second-derivative weights (/dx^2)
    2: ((-1, 0, 1), (-0.5, 0.0, 0.5), (1.0, -2.0, 1.0)),
    4: ((-2, -1, 0, 1, 2),
        (1 / 12, -8 / 12, 0.0, 8 / 12, -1 / 12),
        (-1 / 12, 16 / 12, -30 / 12, 16 / 12, -1 / 12)),
}


@dataclass(frozen=True)
class SpatialGrid:
    half_width: float = 20.0
    n_x: int = 1024
    mode: str = "periodic"
    fd_order: int = 2

    def __post_init__(self):
        if not self.half_width > 0:
            raise DomainError(f"half_width must be positive, got {self.half_width}")
        if self.n_x < 16:
            raise DomainError(f"n_x must be >= 16, got {self.n_x}")
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.fd_order not in _FD_STENCILS:
            raise DomainError(f"fd_order must be 2 or 4, got {self.fd_order}")

    @property
    def periodic(self) -> bool:
        return self.mode == "periodic"

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.n_x

    @cached_property
    def x(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.n_x)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers of the rfft modes."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.n_x, d=self.dx)

    @cached_property
    def first_derivative_symbol(self) -> np.ndarray:
        s = 1j * self.wavenumbers
        if self.n_x % 2 == 0:
            s[-1] = 0.0
        return s

    @cached_property
    def parseval_weights(self) -> np.ndarray:
        """dx * sum_j |u_j|^2 == sum_m weights_m * |rfft(u)_m|^2."""
        w = np.full(self.wavenumbers.size, 2.0)
        w[0] = 1.0
        if self.n_x % 2 == 0:
            w[-1] = 1.0
        return w * self.dx / self.n_x

    def derivative(self, u: np.ndarray, order: int) -> np.ndarray:
        """First or second x-derivative along the last axis."""
        if order not in (1, 2):
            raise DomainError("only first and second derivatives are supported")
        if self.periodic:
            sym = self.first_derivative_symbol if order == 1 else -self.wavenumbers ** 2
            return np.fft.irfft(sym * np.fft.rfft(u, axis=-1), n=self.n_x, axis=-1)
        offsets, w1, w2 = _FD_STENCILS[self.fd_order]
        weights = (w1 if order == 1 else w2)
        pad = max(offsets)
        up = np.zeros(u.shape[:-1] + (self.n_x + 2 * pad,), dtype=u.dtype)
        up[..., pad:pad + self.n_x] = u
        out = np.zeros_like(u, dtype=np.result_type(u, float))
        for off, wt in zip(offsets, weights):
            if wt:
                out += wt * up[..., pad + off:pad + off + self.n_x]
        return out / self.dx ** order

    def derivative_matrix(self, order: int):
        """Dense (periodic) or sparse CSR (bounded) matrix of :meth:`derivative`."""
        return self._derivative_matrices[order - 1]

    @cached_property
    def _derivative_matrices(self):
        if self.periodic:
            eye = np.eye(self.n_x)
            return tuple(self.derivative(eye, o).T.copy() for o in (1, 2))
        offsets, w1, w2 = _FD_STENCILS[self.fd_order]
        mats = []
        for o, weights in ((1, w1), (2, w2)):
            diags = [np.full(self.n_x - abs(off), wt / self.dx ** o)
                     for off, wt in zip(offsets, weights)]
            mats.append(sp.diags(diags, offsets, shape=(self.n_x, self.n_x), format="csr"))
        return tuple(mats)

    def norm_sq(self, kind: str = "l2") -> Callable[[np.ndarray], np.ndarray]:
        """Squared discrete L2, H^1 or H^-1 norm over the last axis."""
        if kind not in ("l2", "h1", "h-1"):
            raise DomainError(f"unknown spatial norm {kind!r}")
        if kind == "l2":
            return lambda u: self.dx * np.sum(np.abs(u) ** 2, axis=-1)
        s = 1.0 if kind == "h1" else -1.0
        if self.periodic:
            weight = self.parseval_weights * (1.0 + self.wavenumbers ** 2) ** s
            return lambda u: np.sum(weight * np.abs(np.fft.rfft(u, axis=-1)) ** 2, axis=-1)
        if kind == "h1":
            def h1(u):
                pad = np.zeros(u.shape[:-1] + (1,))
                d = np.diff(np.concatenate([pad, u, pad], axis=-1), axis=-1) / self.dx
                return self.dx * (np.sum(np.abs(u) ** 2, axis=-1) + np.sum(np.abs(d) ** 2, axis=-1))
            return h1
        lap = sp.diags([np.ones(self.n_x - 1), -2.0 * np.ones(self.n_x), np.ones(self.n_x - 1)],
                       [-1, 0, 1], format="csc") / self.dx ** 2
        solve = spla.factorized((sp.identity(self.n_x, format="csc") - lap).tocsc())

        def hm1(u):
            flat = np.atleast_2d(u).reshape(-1, self.n_x)
            out = np.array([self.dx * np.real(np.vdot(r, solve(r))) for r in flat])
            return out.reshape(u.shape[:-1])[()]
        return hm1


def _is_uniform(coef) -> bool:
    return isinstance(coef, (int, float)) or getattr(coef, "uses_x", True) is False


def _is_static(coef) -> bool:
    return isinstance(coef, (int, float)) or getattr(coef, "uses_t", True) is False


def _eval(coef: Coefficient, t: float, x: np.ndarray) -> np.ndarray:
    if isinstance(coef, (int, float)):
        return np.full(x.shape, float(coef))
    return np.broadcast_to(np.asarray(coef(t, x), dtype=float), x.shape)


@dataclass(frozen=True)
class CoefficientSet:
    """Drift a u_xx + b u_x + c u and diffusion rho u_xx + sigma u_x + nu u.

    Each coefficient is a number or a callable ``f(t, x)``.  Callables may
    carry ``uses_x`` / ``uses_t`` attributes (False) to mark them as constant
    in that variable; unmarked callables are treated as varying.
    """

    a: Coefficient = 1.0
    b: Coefficient = 0.0
    c: Coefficient = 0.0
    rho: Coefficient = 0.0
    sigma: Coefficient = 0.0
    nu: Coefficient = 0.0
    delta: float | None = None
    C0: float | None = None

    NAMES = ("a", "b", "c", "rho", "sigma", "nu")

    @property
    def uniform_in_x(self) -> bool:
        return all(_is_uniform(getattr(self, n)) for n in self.NAMES)

    @property
    def time_independent(self) -> bool:
        return all(_is_static(getattr(self, n)) for n in self.NAMES)

    def value(self, name: str, t: float, x: np.ndarray) -> np.ndarray:
        return _eval(getattr(self, name), t, x)

    def drift(self, t, x):
        return tuple(self.value(n, t, x) for n in ("a", "b", "c"))

    def diffusion(self, t, x):
        return tuple(self.value(n, t, x) for n in ("rho", "sigma", "nu"))

    def has_diffusion(self) -> bool:
        return any(not (isinstance(getattr(self, n), (int, float)) and getattr(self, n) == 0)
                   for n in ("rho", "sigma", "nu"))

    def check(self, grid: SpatialGrid, interval: TimeInterval) -> tuple[float, float]:
        """Validate ellipticity and boundedness on the grid; return (delta, C0) in force."""
        x = grid.x
        a_min, bound = math.inf, 0.0
        for t in np.concatenate([interval.times, interval.midpoints]):
            vals = [self.value(n, t, x) for n in self.NAMES]
            if not all(np.all(np.isfinite(v)) for v in vals):
                raise DomainError(f"non-finite coefficient at t={t}")
            a_min = min(a_min, float(vals[0].min()))
            bound = max(bound, max(float(np.abs(v).max()) for v in vals))
        delta = self.delta if self.delta is not None else a_min
        if not delta > 0 or a_min < delta * (1 - 1e-12):
            raise DomainError(f"drift coefficient a is not uniformly positive (min a = {a_min})")
        if self.C0 is not None and bound > self.C0 * (1 + 1e-12):
            raise DomainError(f"coefficients exceed the bound C0={self.C0} (max {bound})")
        return delta, (self.C0 if self.C0 is not None else bound)

    # Fourier symbols for spatially uniform coefficients
    def drift_symbol(self, t: float, grid: SpatialGrid) -> np.ndarray:
        a, b, c = (float(v[0]) for v in self.drift(t, grid.x[:1]))
        return -a * grid.wavenumbers ** 2 + b * grid.first_derivative_symbol + c

    def diffusion_symbol(self, t: float, grid: SpatialGrid) -> np.ndarray:
        r, s, n = (float(v[0]) for v in self.diffusion(t, grid.x[:1]))
        return -r * grid.wavenumbers ** 2 + s * grid.first_derivative_symbol + n


def apply_operator(u: np.ndarray, which: str, coeffs: CoefficientSet, t: float,
                   grid: SpatialGrid) -> np.ndarray:
    """A u = a u_xx + b u_x + c u  (which='A') or B u = rho u_xx + sigma u_x + nu u."""
    u = np.asarray(u)
    if u.shape[-1] != grid.n_x:
        raise DomainError(f"field has {u.shape[-1]} points, grid has {grid.n_x}")
    if which == "A":
        p2, p1, p0 = coeffs.drift(t, grid.x)
    elif which == "B":
        p2, p1, p0 = coeffs.diffusion(t, grid.x)
    else:
        raise DomainError(f"operator must be 'A' or 'B', got {which!r}")
    out = p0 * u
    if np.any(p1):
        out = out + p1 * grid.derivative(u, 1)
    if np.any(p2):
        out = out + p2 * grid.derivative(u, 2)
    return out


def operator_matrix(which: str, coeffs: CoefficientSet, t: float, grid: SpatialGrid):
    """Matrix of :func:`apply_operator` (dense if periodic, sparse CSR if bounded)."""
    p2, p1, p0 = coeffs.drift(t, grid.x) if which == "A" else coeffs.diffusion(t, grid.x)
    d1, d2 = grid.derivative_matrix(1), grid.derivative_matrix(2)
    if grid.periodic:
        return p2[:, None] * d2 + p1[:, None] * d1 + np.diag(p0)
    return (sp.diags(p2) @ d2 + sp.diags(p1) @ d1 + sp.diags(p0)).tocsr()


class LinearSolve:
    """Factorization of I - dt/2 * M for repeated right-hand sides."""

    def __init__(self, M, dt: float, grid: SpatialGrid):
        self.periodic = grid.periodic
        n = grid.n_x
        if self.periodic:
            lhs = np.eye(n) - 0.5 * dt * M
            self.rhs_op = np.eye(n) + 0.5 * dt * M
            try:
                with np.errstate(all="raise"):
                    self._lu = scipy.linalg.lu_factor(lhs, check_finite=True)
            except (FloatingPointError, ValueError, scipy.linalg.LinAlgError) as exc:
                raise NumericalError("Crank-Nicolson system is singular", cause=str(exc)) from exc
            if np.min(np.abs(np.diag(self._lu[0]))) < 1e-14:
                raise NumericalError("Crank-Nicolson system is singular",
                                     min_pivot=float(np.min(np.abs(np.diag(self._lu[0])))))
        else:
            eye = sp.identity(n, format="csc")
            lhs = (eye - 0.5 * dt * M).tocsc()
            self.rhs_op = (eye + 0.5 * dt * M).tocsr()
            try:
                self._lu = spla.splu(lhs)
            except RuntimeError as exc:
                raise NumericalError("Crank-Nicolson system is singular", cause=str(exc)) from exc

    def explicit(self, U: np.ndarray) -> np.ndarray:
        """(I + dt/2 M) applied to rows of U."""
        return (self.rhs_op @ U.T).T

    def solve(self, R: np.ndarray) -> np.ndarray:
        """Solve (I - dt/2 M) X = R for the rows of R."""
        if self.periodic:
            out = scipy.linalg.lu_solve(self._lu, R.T).T
        else:
            out = self._lu.solve(np.ascontiguousarray(R.T)).T
        if not np.all(np.isfinite(out)):
            raise NumericalError("non-finite values after the implicit solve")
        return out


@dataclass
class Trajectory:
    """Fields sampled at ``times``; ``values`` has shape (len(times), n_x)."""

    times: np.ndarray
    values: np.ndarray
    grid: SpatialGrid = field(default_factory=SpatialGrid)

    def at(self, t: float) -> np.ndarray:
        j = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise DomainError(f"t={t} was not recorded")
        return self.values[j]

    def midpoint(self, j: int) -> np.ndarray:
        return 0.5 * (self.values[j] + self.values[j + 1])

    def to_csv(self, path, header: str | None = None) -> None:
        """Columns (t, x, value), row-major in t."""
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "x", "value"])
            for t, row in zip(self.times, self.values):
                for x, v in zip(self.grid.x, row):
                    w.writerow([repr(float(t)), repr(float(x)), repr(float(v))])


def forcing_at(forcing: Forcing, j: int, t_mid: float, grid: SpatialGrid):
    """Forcing at the midpoint of step j, or None."""
    if forcing is None:
        return None
    if isinstance(forcing, Trajectory):
        return forcing.midpoint(j)
    return np.broadcast_to(np.asarray(forcing(t_mid, grid.x), dtype=float), grid.x.shape)


def step(state: np.ndarray, forcing: np.ndarray | None, coeffs: CoefficientSet, h_value: float,
         t: float, dt: float, grid: SpatialGrid) -> np.ndarray:
    """One Crank-Nicolson step with M = A + h B evaluated at t + dt/2."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    tm = t + 0.5 * dt
    if grid.periodic and coeffs.uniform_in_x:
        m = coeffs.drift_symbol(tm, grid) + h_value * coeffs.diffusion_symbol(tm, grid)
        U = np.fft.rfft(state)
        rhs = (1 + 0.5 * dt * m) * U
        if forcing is not None:
            rhs = rhs + dt * np.fft.rfft(forcing)
        den = 1 - 0.5 * dt * m
        if np.min(np.abs(den)) < 1e-14:
            raise NumericalError("Crank-Nicolson system is singular", t=t)
        return np.fft.irfft(rhs / den, n=grid.n_x)
    M = operator_matrix("A", coeffs, tm, grid)
    if h_value:
        M = M + h_value * operator_matrix("B", coeffs, tm, grid)
    ls = LinearSolve(M, dt, grid)
    rhs = ls.explicit(state[None, :])[0]
    if forcing is not None:
        rhs = rhs + dt * forcing
    return ls.solve(rhs[None, :])[0]


def check_regime(h: HFunction | None, coeffs: CoefficientSet, interval: TimeInterval,
                 grid: SpatialGrid, floor_fraction: float = 0.5) -> float:
    """Require a + h(t) rho >= floor_fraction * delta at every grid time; return the floor."""
    delta, _ = coeffs.check(grid, interval)
    floor = floor_fraction * delta
    if h is None or not np.any(h.coeffs):
        return floor
    for t in np.concatenate([interval.times, interval.midpoints]):
        ht = float(h(t, interval.T))
        eff = coeffs.value("a", t, grid.x) + ht * coeffs.value("rho", t, grid.x)
        j = int(np.argmin(eff))
        if eff[j] < floor:
            raise RegimeError(
                f"effective diffusion a + h*rho = {eff[j]:.6g} at t={t:.6g}, x={grid.x[j]:.6g} "
                f"is below the admissible floor {floor:.6g}",
                t=float(t), x=float(grid.x[j]), value=float(eff[j]), floor=floor, h_t=ht)
    return floor


def _march(v, t0, n_steps, dt, coeffs, grid, h_of_t, forcing_of_step, record_every=1):
    """Crank-Nicolson from t0 over n_steps; returns recorded (times, values)."""
    uniform = grid.periodic and coeffs.uniform_in_x
    times, values = [t0], [np.array(v, dtype=float)]
    static_ops = coeffs.time_independent
    cached = {}
    if uniform:
        U = np.fft.rfft(v)
    else:
        u = np.array(v, dtype=float)
    for j in range(n_steps):
        tm = t0 + (j + 0.5) * dt
        hv = h_of_t(tm)
        F = forcing_of_step(j, tm)
        if uniform:
            m = coeffs.drift_symbol(tm, grid)
            if hv:
                m = m + hv * coeffs.diffusion_symbol(tm, grid)
            den = 1 - 0.5 * dt * m
            if np.min(np.abs(den)) < 1e-14:
                raise NumericalError("Crank-Nicolson system is singular", t=tm)
            rhs = (1 + 0.5 * dt * m) * U
            if F is not None:
                rhs = rhs + dt * np.fft.rfft(F)
            U = rhs / den
        else:
            key = hv if static_ops else None
            ls = cached.get(key) if key is not None else None
            if ls is None:
                M = operator_matrix("A", coeffs, tm, grid)
                if hv:
                    M = M + hv * operator_matrix("B", coeffs, tm, grid)
                ls = LinearSolve(M, dt, grid)
                if key is not None:
                    cached = {key: ls}
            rhs = ls.explicit(u[None, :])[0]
            if F is not None:
                rhs = rhs + dt * F
            u = ls.solve(rhs[None, :])[0]
        if (j + 1) % record_every == 0 or j + 1 == n_steps:
            times.append(t0 + (j + 1) * dt)
            values.append(np.fft.irfft(U, n=grid.n_x) if uniform else u.copy())
    return np.array(times), np.array(values)


def solve_h(v: np.ndarray, f: Forcing, g: Forcing, h: HFunction | None, coeffs: CoefficientSet,
            interval: TimeInterval, grid: SpatialGrid, floor_fraction: float = 0.5,
            record_every: int = 1) -> Trajectory:
    """Time-step du_h = (A + h B) u_h + f + h g, u_h(0) = v."""
    v = np.asarray(v, dtype=float)
    if v.shape != grid.x.shape:
        raise DomainError(f"initial field has shape {v.shape}, grid needs {grid.x.shape}")
    check_regime(h, coeffs, interval, grid, floor_fraction)
    T = interval.T
    if h is None or not np.any(h.coeffs):
        h_of_t = lambda t: 0.0
    else:
        h_of_t = lambda t: float(h(t, T))

    def forcing_of_step(j, tm):
        F = forcing_at(f, j, tm, grid)
        G = forcing_at(g, j, tm, grid)
        if G is not None:
            G = h_of_t(tm) * G
            F = G if F is None else F + G
        return F

    times, values = _march(v, 0.0, interval.n_t, interval.dt, coeffs, grid, h_of_t,
                           forcing_of_step, record_every)
    return Trajectory(times, values, grid)


def semigroup_apply(v: np.ndarray, s: float, t: float, coeffs: CoefficientSet,
                    grid: SpatialGrid, dt: float) -> np.ndarray:
    """Phi_{s,t} v: the drift equation du = A u run from time s to t."""
    if s > t:
        raise DomainError(f"need s <= t, got s={s}, t={t}")
    n = int(round((t - s) / dt))
    if n == 0:
        return np.array(v, dtype=float)
    _, values = _march(np.asarray(v, dtype=float), s, n, (t - s) / n, coeffs, grid,
                       lambda tm: 0.0, lambda j, tm: None, record_every=n)
    return values[-1]
