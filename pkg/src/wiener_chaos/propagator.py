"""Propagator system for the chaos coefficients u_alpha.

Level 0 solves du = A u + f with u(0) = v; every alpha with |alpha| >= 1
solves du_alpha = A u_alpha + sum_k sqrt(alpha_k) (B u_{alpha-e_k} + g_{alpha-e_k}) m_k(t)
with zero initial data.  Chaos-valued data (v_gamma, f_gamma, g_gamma) enter
row gamma directly.  All rows are marched together in time, so only the
current state is held; coefficients are kept at the requested record times.

Discretization matches :mod:`parabolic1d`: Crank-Nicolson with the parent
source averaged over the step and m_k, coefficients and forcing at the
midpoint.  With this choice the S-transform of the discrete chaos solution is
exactly the Crank-Nicolson solution of the h-equation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from . import _kernels
from .chaos_space import ChaosSeries, WeightPair, level_contributions
from .cm_basis import TimeInterval, basis_matrix
from .errors import DomainError, NumericalError
from .multiindex import MultiIndex, ZERO, enumerate_indices
from .parabolic1d import (CoefficientSet, Forcing, LinearSolve, SpatialGrid, forcing_at,
                          operator_matrix)

log = logging.getLogger(__name__)

Record = Union[str, Sequence[float]]

# steps per parent-trajectory buffer used by the top-level closure
TIME_BLOCK = 16


@dataclass
class PropagatorConfig:
    N: int
    K: int
    grid: SpatialGrid
    interval: TimeInterval
    coeffs: CoefficientSet
    v: Union[np.ndarray, Mapping[MultiIndex, np.ndarray]]
    f: Union[Forcing, Mapping[MultiIndex, Forcing]] = None
    g: Union[Forcing, Mapping[MultiIndex, Forcing]] = None
    record: Record = "final"
    store: bool = False
    spatial_norm: str = "l2"
    integrated: bool = False
    mode_cutoff: float = 1e-14
    block: int = 16

    def __post_init__(self):
        if self.N < 0 or self.K < 1:
            raise DomainError(f"need N >= 0 and K >= 1, got N={self.N}, K={self.K}")
        if self.block < 1:
            raise DomainError("block must be >= 1")

    def data(self) -> dict[MultiIndex, tuple]:
        """{gamma: (V, F, G)} with V an array (or None) and F, G forcings."""
        chaos = [isinstance(d, Mapping) for d in (self.v, self.f, self.g)]
        if not any(chaos):
            out = {ZERO: (np.asarray(self.v, dtype=float), self.f, self.g)}
        else:
            parts = [d if isinstance(d, Mapping) else ({ZERO: d} if d is not None else {})
                     for d in (self.v, self.f, self.g)]
            out = {}
            for slot, part in enumerate(parts):
                for gamma, value in part.items():
                    entry = list(out.get(gamma, (None, None, None)))
                    entry[slot] = np.asarray(value, dtype=float) if slot == 0 and value is not None else value
                    out[gamma] = tuple(entry)
        for gamma, (V, _, _) in out.items():
            if gamma.max_index > self.K:
                raise DomainError(f"data index {gamma!r} uses basis functions beyond K={self.K}")
            if V is not None and V.shape != self.grid.x.shape:
                raise DomainError(f"initial field for {gamma!r} has shape {V.shape}, "
                                  f"grid needs {self.grid.x.shape}")
        return {g: d for g, d in out.items() if g.order <= self.N}

    def record_steps(self) -> np.ndarray:
        n = self.interval.n_t
        if isinstance(self.record, str):
            if self.record == "final":
                return np.array([n])
            if self.record == "all":
                return np.arange(n + 1)
            raise DomainError(f"record must be 'final', 'all' or a list of times, got {self.record!r}")
        steps = sorted({self.interval.step_index(t) for t in self.record})
        return np.array(steps, dtype=int)


class IndexTable:
    """Truncated index set in level order with its parent links."""

    def __init__(self, N: int, K: int):
        import itertools
        self.N, self.K = N, K
        chars = [cs for n in range(N + 1)
                 for cs in itertools.combinations_with_replacement(range(1, K + 1), n)]
        row = {cs: i for i, cs in enumerate(chars)}
        ptr, pk, prow, pw = [0], [], [], []
        self.level_start = np.zeros(N + 2, dtype=np.int64)
        for i, cs in enumerate(chars):
            self.level_start[len(cs) + 1] = i + 1
            prev = None
            for pos, k in enumerate(cs):
                if k == prev:
                    continue
                prev = k
                pk.append(k - 1)
                prow.append(row[cs[:pos] + cs[pos + 1:]])
                pw.append(math.sqrt(cs.count(k)))
            ptr.append(len(pk))
        self.chars = chars
        self.row = row
        self.ptr = np.array(ptr, dtype=np.int64)
        self.pk = np.array(pk, dtype=np.int64)
        self.prow = np.array(prow, dtype=np.int64)
        self.pw = np.array(pw, dtype=float)
        self._indices = None

    def __len__(self):
        return len(self.chars)

    @property
    def indices(self) -> list[MultiIndex]:
        if self._indices is None:
            self._indices = [MultiIndex.from_characteristic(cs) for cs in self.chars]
        return self._indices

    def row_of(self, alpha: MultiIndex) -> int:
        return self.row[alpha.characteristic_set()]

    def level_rows(self, n: int) -> slice:
        return slice(int(self.level_start[n]), int(self.level_start[n + 1]))


@dataclass
class PropagatorResult:
    """Squared norms of every u_alpha at the record times (and optionally the fields)."""

    indices: list[MultiIndex]
    N: int
    K: int
    times: np.ndarray
    norms: np.ndarray
    spatial_norm: str
    integrated: np.ndarray | None = None
    series: ChaosSeries | None = None
    info: dict = field(default_factory=dict)

    def _slot(self, t):
        if t is None:
            return len(self.times) - 1
        j = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise DomainError(f"t={t} was not recorded")
        return j

    def level_norms(self, t: float | None = None) -> np.ndarray:
        """S_n(t) = sum_{|alpha|=n} ||u_alpha(t)||^2 for n = 0..N (default: last record)."""
        row = self.norms[self._slot(t)]
        orders = np.array([a.order for a in self.indices])
        return np.bincount(orders, weights=row, minlength=self.N + 1)

    def norm_table(self, t: float | None = None) -> dict[MultiIndex, float]:
        row = self.norms[self._slot(t)]
        return dict(zip(self.indices, row.tolist()))

    def integrated_table(self) -> dict[MultiIndex, float]:
        if self.integrated is None:
            raise DomainError("time-integrated norms were not accumulated")
        return dict(zip(self.indices, self.integrated.tolist()))

    def weighted_levels(self, w: WeightPair, integrated: bool = True,
                        t: float | None = None) -> np.ndarray:
        table = self.integrated_table() if integrated else self.norm_table(t)
        return level_contributions(table, w, self.N)


def _forcing_series(forcing, interval, grid):
    """Midpoint samples (n_t, n_x) of a forcing."""
    mids = interval.midpoints
    return np.array([forcing_at(forcing, j, tm, grid) for j, tm in enumerate(mids)])


def _coeff_symbols(coeffs, interval, grid):
    """Drift and diffusion symbols (n_t, n_modes) at the step midpoints."""
    if coeffs.time_independent:
        lam = np.broadcast_to(coeffs.drift_symbol(0.0, grid), (interval.n_t, grid.wavenumbers.size))
        mu = np.broadcast_to(coeffs.diffusion_symbol(0.0, grid), lam.shape)
        return lam, mu
    lam = np.array([coeffs.drift_symbol(t, grid) for t in interval.midpoints])
    mu = np.array([coeffs.diffusion_symbol(t, grid) for t in interval.midpoints])
    return lam, mu


def _run_modes(table: IndexTable, lam, mu, w, init, fdata_rows, gdata_rows, rec_steps,
               dt, integrated, closure, block):
    """March decoupled scalar systems, one per column of ``lam``.

    lam, mu: (n_t, M) symbols; init: {row: (M,)}; fdata_rows / gdata_rows:
    {row: (n_t, M)}.  Returns (rec (n_rec, n_rows, M), integ (n_rows, M) or None).
    """
    n_t, M = lam.shape
    n_rows = len(table)
    dtype = np.result_type(lam, mu, *init.values(), *fdata_rows.values(), *gdata_rows.values(),
                           np.float64)
    rec_slot = np.full(n_t + 1, -1, dtype=np.int64)
    for s, j in enumerate(rec_steps):
        rec_slot[j] = s
    rec = np.zeros((len(rec_steps), n_rows, M), dtype=dtype)
    integ = np.zeros((n_rows, M)) if integrated else None
    frow = np.full(n_rows, -1, dtype=np.int64)
    grow = np.full(n_rows, -1, dtype=np.int64)
    for i, r_ in enumerate(sorted(fdata_rows)):
        frow[r_] = i
    for i, r_ in enumerate(sorted(gdata_rows)):
        grow[r_] = i
    N = table.N
    top = table.level_rows(N)
    par = table.level_rows(N - 1) if N >= 1 else slice(0, 0)
    step_rows = top.start if closure else n_rows
    t_block = TIME_BLOCK

    den = 1.0 - 0.5 * dt * lam
    if np.min(np.abs(den)) < 1e-14:
        j, m = np.unravel_index(np.argmin(np.abs(den)), den.shape)
        raise NumericalError(f"Crank-Nicolson system is singular (step {j}, mode column {m}); "
                             "affects every index", step=int(j), index="")
    r_all = (1.0 + 0.5 * dt * lam) / den
    c_all = dt / den

    for m0 in range(0, M, block):
        cols = slice(m0, min(M, m0 + block))
        B = cols.stop - cols.start
        r = np.ascontiguousarray(r_all[:, cols], dtype=dtype)
        c = np.ascontiguousarray(c_all[:, cols], dtype=dtype)
        mu_b = np.ascontiguousarray(mu[:, cols], dtype=dtype)
        fdata = np.zeros((max(1, len(fdata_rows)), n_t, B), dtype=dtype)
        for i, r_ in enumerate(sorted(fdata_rows)):
            fdata[i] = fdata_rows[r_][:, cols]
        gdata = np.zeros((max(1, len(gdata_rows)), n_t, B), dtype=dtype)
        for i, r_ in enumerate(sorted(gdata_rows)):
            gdata[i] = gdata_rows[r_][:, cols]
        state = np.zeros((n_rows, 2, B), dtype=dtype)
        for r_, val in init.items():
            state[r_, 0, :] = val[cols]
        rec_b = np.zeros((len(rec_steps), n_rows, B), dtype=dtype)
        if rec_slot[0] >= 0:
            rec_b[rec_slot[0]] = state[:, 0, :]
        integ_b = np.zeros((n_rows, B)) if integrated else np.zeros((1, 1))
        if not closure:
            xbuf = np.zeros((1, 1, 1), dtype=dtype)
            _kernels.march_block(r, c, mu_b, w, table.ptr, table.pk, table.prow, table.pw,
                                 frow, fdata, grow, gdata, state, 0, n_t, step_rows, rec_slot,
                                 rec_b, integ_b, integrated, dt, xbuf, 0, 0)
        else:
            # top-level values at the final step are linear functionals of the
            # parents' trajectories: u^J = sum_j G_j mu_j w_jk avg_j(parent)
            G = np.empty((n_t, B), dtype=dtype)
            G[-1] = 1.0
            for j in range(n_t - 2, -1, -1):
                G[j] = G[j + 1] * r[j + 1]
            G *= c
            Y = (G * mu_b)[:, :, None] * w[:, None, :]
            Y = np.ascontiguousarray(np.transpose(Y, (1, 0, 2)))  # (B, n_t, K)
            n_par = par.stop - par.start
            acc = np.zeros((B, n_par, w.shape[1]), dtype=dtype)
            xbuf = np.zeros((B, n_par, t_block), dtype=dtype)
            for j0 in range(0, n_t, t_block):
                j1 = min(n_t, j0 + t_block)
                _kernels.march_block(r, c, mu_b, w, table.ptr, table.pk, table.prow, table.pw,
                                     frow, fdata, grow, gdata, state, j0, j1, step_rows,
                                     rec_slot, rec_b, integ_b, False, dt, xbuf, par.start, par.stop)
                acc += np.matmul(xbuf[:, :, :j1 - j0], Y[:, j0:j1, :])
            _kernels.gather_top(acc, table.ptr, table.pk, table.prow, table.pw,
                                top.start, top.stop, par.start, rec_b, len(rec_steps) - 1)
        if not np.all(np.isfinite(rec_b)):
            raise NumericalError("non-finite chaos coefficients", modes=(cols.start, cols.stop))
        rec[:, :, cols] = rec_b
        if integrated:
            integ[:, cols] = integ_b
    return rec, integ


def _can_close(table, data_rows, rec_steps, n_t, integrated):
    if table.N < 2 or integrated or list(rec_steps) != [n_t]:
        return False
    top = table.level_rows(table.N)
    par = table.level_rows(table.N - 1)
    return not any(top.start <= r < top.stop or par.start <= r < par.stop for r in data_rows)


def _solve_fourier(config: PropagatorConfig, table: IndexTable, data, rec_steps):
    grid, interval = config.grid, config.interval
    n_t, dt = interval.n_t, interval.dt
    lam, mu = _coeff_symbols(config.coeffs, interval, grid)
    w = np.ascontiguousarray(basis_matrix(config.K, interval.midpoints, interval.T))
    kappa = grid.wavenumbers
    s = {"l2": 0.0, "h1": 1.0, "h-1": -1.0}[config.spatial_norm]
    mode_weight = grid.parseval_weights * (1.0 + kappa ** 2) ** s

    V_hat, F_hat, G_hat = {}, {}, {}
    for gamma, (V, F, G) in data.items():
        r_ = table.row_of(gamma)
        if V is not None and np.any(V):
            V_hat[r_] = np.fft.rfft(V)
        if F is not None:
            F_hat[r_] = np.fft.rfft(_forcing_series(F, interval, grid), axis=-1)
        if G is not None:
            G_hat[r_] = np.fft.rfft(_forcing_series(G, interval, grid), axis=-1)

    env = np.zeros(kappa.size)
    for d in V_hat.values():
        env = np.maximum(env, np.abs(d))
    for d in list(F_hat.values()) + list(G_hat.values()):
        env = np.maximum(env, np.abs(d).max(axis=0))
    n_rows = len(table)
    n_rec = len(rec_steps)
    norms = np.zeros((n_rec, n_rows))
    integ = np.zeros(n_rows) if config.integrated else None
    hat = np.zeros((n_rec, n_rows, kappa.size), dtype=complex) if config.store else None
    info = {"path": "fourier", "modes_total": int(kappa.size)}
    if env.max() == 0:
        info["modes_kept"] = 0
        return norms, integ, hat, info
    keep = np.flatnonzero(env > config.mode_cutoff * env.max())
    info["modes_kept"] = int(keep.size)

    unit = not F_hat and not G_hat and list(V_hat) == [0]
    lam_k = np.ascontiguousarray(lam[:, keep])
    mu_k = np.ascontiguousarray(mu[:, keep])
    if unit:
        scale = V_hat[0][keep]
        if not np.any(lam_k.imag) and not np.any(mu_k.imag):
            lam_k, mu_k = lam_k.real.copy(), mu_k.real.copy()
        init = {0: np.ones(keep.size, dtype=lam_k.dtype)}
        f_rows, g_rows = {}, {}
    else:
        scale = np.ones(keep.size)
        init = {r_: d[keep] for r_, d in V_hat.items()}
        f_rows = {r_: d[:, keep] for r_, d in F_hat.items()}
        g_rows = {r_: d[:, keep] for r_, d in G_hat.items()}

    closure = _can_close(table, set(init) | set(f_rows) | set(g_rows), rec_steps, n_t,
                         config.integrated)
    info["top_level_closure"] = closure
    rec, integ_m = _run_modes(table, lam_k, mu_k, w, init, f_rows, g_rows, rec_steps, dt,
                              config.integrated, closure, config.block)
    weight = mode_weight[keep] * np.abs(scale) ** 2
    norms = np.einsum("srm,m->sr", (rec * np.conj(rec)).real, weight)
    if config.integrated:
        integ = integ_m @ weight
    if config.store:
        hat[:, :, keep] = rec * scale
    return norms, integ, hat, info


def _solve_physical(config: PropagatorConfig, table: IndexTable, data, rec_steps):
    grid, interval, coeffs = config.grid, config.interval, config.coeffs
    n_t, dt = interval.n_t, interval.dt
    n_rows, n_x = len(table), grid.n_x
    norm = grid.norm_sq(config.spatial_norm)
    w = basis_matrix(config.K, interval.midpoints, interval.T)
    rec_slot = {int(j): s for s, j in enumerate(rec_steps)}

    U = np.zeros((n_rows, n_x))
    f_rows, g_rows = {}, {}
    for gamma, (V, F, G) in data.items():
        r_ = table.row_of(gamma)
        if V is not None:
            U[r_] = V
        if F is not None:
            f_rows[r_] = F
        if G is not None:
            g_rows[r_] = G

    # per-level parent matrices P_n(j) = sum_k m_k(t_j) P_{n,k}
    import scipy.sparse as sp
    levels = []
    for n in range(1, table.N + 1):
        rows = table.level_rows(n)
        lo, hi = table.ptr[rows.start], table.ptr[rows.stop]
        par = table.level_rows(n - 1)
        P = sp.csr_matrix((table.pw[lo:hi], table.prow[lo:hi] - par.start,
                           table.ptr[rows.start:rows.stop + 1] - lo),
                          shape=(rows.stop - rows.start, par.stop - par.start))
        levels.append((rows, par, P, table.pk[lo:hi], table.pw[lo:hi]))

    n_rec = len(rec_steps)
    norms = np.zeros((n_rec, n_rows))
    hat = np.zeros((n_rec, n_rows, n_x)) if config.store else None
    integ = np.zeros(n_rows) if config.integrated else None

    def record(j, state):
        if j in rec_slot:
            s = rec_slot[j]
            norms[s] = norm(state)
            if hat is not None:
                hat[s] = state

    record(0, U)
    prev_norm = norm(U) if config.integrated else None
    static = coeffs.time_independent
    ls = Bm = None
    for j, tm in enumerate(interval.midpoints):
        if ls is None or not static:
            try:
                ls = LinearSolve(operator_matrix("A", coeffs, tm, grid), dt, grid)
            except NumericalError as exc:
                raise NumericalError(f"{exc} (level 0, index '', t={tm})", level=0, index="",
                                     t=float(tm)) from exc
            Bm = operator_matrix("B", coeffs, tm, grid)
        U_new = np.empty_like(U)
        for n in range(table.N + 1):
            if n == 0:
                rows = table.level_rows(0)
                R = ls.explicit(U[rows])
            else:
                rows, par, P, pk, pw = levels[n - 1]
                avg = 0.5 * (U[par] + U_new[par])
                BP = (Bm @ avg.T).T
                for r_, G in g_rows.items():
                    if par.start <= r_ < par.stop:
                        BP[r_ - par.start] += forcing_at(G, j, tm, grid)
                P.data = pw * w[j, pk]
                R = ls.explicit(U[rows]) + dt * (P @ BP)
            for r_, F in f_rows.items():
                if rows.start <= r_ < rows.stop:
                    R[r_ - rows.start] += dt * forcing_at(F, j, tm, grid)
            try:
                U_new[rows] = ls.solve(R)
            except NumericalError as exc:
                bad = table.indices[rows.start]
                raise NumericalError(f"{exc} (level {n}, first index {bad.to_string()!r}, t={tm})",
                                     level=n, index=bad.to_string(), t=float(tm)) from exc
        U = U_new
        record(j + 1, U)
        if config.integrated:
            cur = norm(U)
            integ += 0.5 * dt * (prev_norm + cur)
            prev_norm = cur
    return norms, integ, hat, {"path": "physical"}


def solve_system(config: PropagatorConfig, table: IndexTable | None = None) -> PropagatorResult:
    """Solve the propagator system for all alpha with |alpha| <= N, support in {1..K}."""
    table = table or IndexTable(config.N, config.K)
    data = config.data()
    rec_steps = config.record_steps()
    if config.grid.periodic and config.coeffs.uniform_in_x:
        norms, integ, hat, info = _solve_fourier(config, table, data, rec_steps)
        fields = None if hat is None else np.fft.irfft(hat, n=config.grid.n_x, axis=-1)
    else:
        norms, integ, hat, info = _solve_physical(config, table, data, rec_steps)
        fields = hat
    times = config.interval.times[rec_steps]
    series = None
    if fields is not None:
        series = ChaosSeries({a: fields[:, i, :] for i, a in enumerate(table.indices)},
                             config.N, config.K, times=times)
    log.debug("propagator solved: %s", info)
    return PropagatorResult(table.indices, config.N, config.K, times, norms,
                            config.spatial_norm, integ, series, info)


def level_norm_sq(series: ChaosSeries, n: int, t: float, spatial_norm=None) -> float:
    """sum_{|alpha|=n} ||u_alpha(t)||^2 for a series of trajectories."""
    if n > series.N:
        raise DomainError(f"level {n} exceeds the truncation N={series.N}")
    snap = series.at_time(t)
    return float(sum(snap.coefficient_norm_sq(a, spatial_norm) for a, _ in snap.level(n)))


def fourier_mode_solve(y: float, N: int, K: int, interval: TimeInterval,
                       initial: float | None = None) -> ChaosSeries:
    """Chaos coefficients of the Fourier mode y of the model equation.

    Each mode solves d u = -y^2 u dt - y^2 u dW, u(0) = exp(-y^2/2) (unless
    ``initial`` is given); returns scalar trajectories on the interval grid.
    """
    table = IndexTable(N, K)
    u0 = math.exp(-0.5 * y * y) if initial is None else float(initial)
    lam = np.full((interval.n_t, 1), -y * y)
    w = np.ascontiguousarray(basis_matrix(K, interval.midpoints, interval.T))
    rec_steps = np.arange(interval.n_t + 1)
    rec, _ = _run_modes(table, lam, lam.copy(), w, {0: np.array([u0])}, {}, {}, rec_steps,
                        interval.dt, False, False, 1)
    return ChaosSeries({a: rec[:, i, 0] for i, a in enumerate(table.indices)}, N, K,
                       times=interval.times)


def shift_solve(config: PropagatorConfig) -> PropagatorResult:
    """Solve with chaos-valued data by superposing shifted deterministic solves.

    For data (V, F, G) xi_gamma the coefficient at alpha + gamma equals
    sqrt((alpha+gamma)! / (alpha! gamma!)) times the coefficient at alpha of
    the deterministic problem with data (V, F, G).
    """
    data = config.data()
    table = IndexTable(config.N, config.K)
    rec_steps = config.record_steps()
    times = config.interval.times[rec_steps]
    n_x = config.grid.n_x
    fields = np.zeros((len(table), len(rec_steps), n_x))
    for gamma, (V, F, G) in data.items():
        sub = PropagatorConfig(
            N=config.N - gamma.order, K=config.K, grid=config.grid, interval=config.interval,
            coeffs=config.coeffs, v=V if V is not None else np.zeros(n_x), f=F, g=G,
            record=config.record, store=True, spatial_norm=config.spatial_norm,
            mode_cutoff=config.mode_cutoff, block=config.block)
        res = solve_system(sub)
        log_gf = gamma.log_factorial()
        for alpha, value in res.series.items():
            target = alpha + gamma
            c = math.exp(0.5 * (target.log_factorial() - alpha.log_factorial() - log_gf))
            fields[table.row_of(target)] += c * value
    series = ChaosSeries({a: fields[i] for i, a in enumerate(table.indices)},
                         config.N, config.K, times=times)
    norm = config.grid.norm_sq(config.spatial_norm)
    norms = norm(fields).T.copy()
    integ = None
    if config.integrated:
        if len(times) < 2 or not np.allclose(times, config.interval.times):
            raise DomainError("time-integrated norms need record='all'")
        integ = np.trapezoid(norm(fields), times, axis=1)
    return PropagatorResult(table.indices, config.N, config.K, times, norms,
                            config.spatial_norm, integ, series, {"path": "shift"})
