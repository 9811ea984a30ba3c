"""Acceptance checks against the independent oracles.

Each ``check_*`` function runs one criterion at its stated parameters and
returns a :class:`CheckResult`; ``SUITES`` groups them for the command line.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import oracles
from .chaos_space import WeightPair, decay_report, s_evaluate
from .cm_basis import HFunction, TimeInterval, sample_zeta, xi_eval
from .multiindex import MultiIndex, ZERO, enumerate_indices
from .parabolic1d import CoefficientSet, SpatialGrid, solve_h
from .presets import coefficient_set
from .propagator import (IndexTable, PropagatorConfig, fourier_mode_solve, shift_solve,
                         solve_system)


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""
    rows: list = field(default_factory=list)  # oracle-report rows

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: value={self.value:.4g} tol={self.tolerance:.4g} {self.detail}"


def _paper_example(grid: SpatialGrid):
    return CoefficientSet(a=1.0, rho=1.0), np.exp(-0.5 * grid.x ** 2)


def growth_levels(t: float, K: int, N: int = 6, n_x: int = 1024, L: float = 20.0,
                  dt: float = 1e-3, table: IndexTable | None = None) -> np.ndarray:
    """S_n(t), n = 0..N, for the `paper-example` preset on a horizon T = t."""
    grid = SpatialGrid(L, n_x, "periodic")
    coeffs, v = _paper_example(grid)
    cfg = PropagatorConfig(N=N, K=K, grid=grid, interval=TimeInterval.from_dt(t, dt),
                           coeffs=coeffs, v=v)
    return solve_system(cfg, table).level_norms()


def check_growth(times=(0.5, 1.0), N: int = 6, K: int = 16, K_ref: int = 24,
                 tol: float = 0.02, k_tol: float = 0.005) -> CheckResult:
    """Propagator level norms versus the quadrature growth oracle."""
    worst, worst_k, rows = 0.0, 0.0, []
    tables = {k: IndexTable(N, k) for k in (K, K_ref)}
    for t in times:
        S = growth_levels(t, K, N, table=tables[K])
        S_ref = growth_levels(t, K_ref, N, table=tables[K_ref])
        for n in range(N + 1):
            o = oracles.growth_oracle(n, t).value
            err = abs(S[n] - o) / o
            kerr = abs(S[n] - S_ref[n]) / abs(S_ref[n])
            worst, worst_k = max(worst, err), max(worst_k, kerr)
            rows.append((f"S_{n}(t={t:g}) K={K}", S[n], o, tol, err <= tol))
            rows.append((f"S_{n}(t={t:g}) K={K} vs K={K_ref}", S[n], S_ref[n], k_tol, kerr <= k_tol))
    ok = worst <= tol and worst_k <= k_tol
    return CheckResult("1 growth law", worst, tol, ok,
                       f"(max rel err vs oracle; K-agreement {worst_k:.2e} <= {k_tol})", rows)


def check_stirling(t: float = 1.0, n_max: int = 8, tol: float = 10.0) -> CheckResult:
    """Boundedness of the Stirling-normalized level norms C(n), n = 1..n_max."""
    g = [oracles.growth_oracle(n, t) for n in range(1, n_max + 1)]
    C = np.array([x.ratio for x in g])
    # the same ratios from the propagator (only m_1 matters at t = T)
    S = growth_levels(t, K=2, N=n_max)
    scale = np.array([math.exp(2 * n * math.log(2 * math.sqrt(t) / (1 + 2 * t)) + math.lgamma(n + 1))
                      for n in range(1, n_max + 1)])
    C_prop = S[1:] / scale
    spread = max(C.max() / C.min(), C_prop.max() / C_prop.min())
    printed = max(x.ratio_printed for x in g) / min(x.ratio_printed for x in g)
    rows = [(f"C({n})", cp, c, tol, True) for n, c, cp in zip(range(1, n_max + 1), C, C_prop)]
    return CheckResult("2 Stirling ratio", spread, tol, spread <= tol,
                       f"(max/min of C(n); printed base gives {printed:.3g})", rows)


def check_summability(t: float = 1.0, K: int = 4, N: int = 12, n_from: int = 4,
                      max_ratio: float = 0.9, tol: float = 1e-3) -> CheckResult:
    """1/|alpha|! weighted contributions decay and their partial sums settle."""
    S = growth_levels(t, K, N)
    c = S / np.array([math.factorial(n) for n in range(N + 1)])
    ratios = c[n_from + 1:] / c[n_from:-1]
    change = abs(c[:N + 1].sum() - c[:11].sum()) / c.sum()
    ok = bool(np.all(ratios <= max_ratio)) and change < tol
    rows = [(f"c_{n + 1}/c_{n}", r, max_ratio, max_ratio, r <= max_ratio)
            for n, r in zip(range(n_from, N), ratios)]
    rows.append(("partial sum change N=10..12", change, 0.0, tol, change < tol))
    return CheckResult("3 weighted summability", float(ratios.max()), max_ratio, ok,
                       f"(max ratio for n>={n_from}; partial-sum change {change:.2e} < {tol})", rows)


def check_stransform(N: int = 8, t: float = 1.0, dt: float = 1e-3, n_x: int = 1024,
                     tol: float = 1e-3, closed_tol: float = 1e-4) -> CheckResult:
    """S-transform of the chaos solution against the h-equation and its closed form."""
    grid = SpatialGrid(20.0, n_x, "periodic")
    coeffs, v = _paper_example(grid)
    interval = TimeInterval.from_dt(t, dt)
    h = HFunction(np.array([0.3, 0.2]))
    res = solve_system(PropagatorConfig(N=N, K=h.K, grid=grid, interval=interval,
                                        coeffs=coeffs, v=v, store=True))
    u_chaos = s_evaluate(res.series.at_time(t), h)
    u_h = solve_h(v, None, None, h, coeffs, interval, grid).at(t)
    d = float(np.linalg.norm(u_chaos - u_h) / np.linalg.norm(u_h))
    s2 = 2.0 * (t + float(h.integral(t, interval.T)))
    exact = np.exp(-grid.x ** 2 / (2 * (1 + s2))) / math.sqrt(1 + s2)
    e = float(np.linalg.norm(u_h - exact) / np.linalg.norm(exact))
    rows = [("||s_evaluate - solve_h|| / ||solve_h||", d, 0.0, tol, d <= tol),
            ("||solve_h - closed form|| / ||closed form||", e, 0.0, closed_tol, e <= closed_tol)]
    return CheckResult("4 S-transform consistency", d, tol, d <= tol and e <= closed_tol,
                       f"(closed-form error {e:.2e} <= {closed_tol})", rows)


def _mode_error(ys, N, K, interval, check_times):
    worst = 0.0
    for y in ys:
        series = fourier_mode_solve(y, N, K, interval)
        for t in check_times:
            j = interval.step_index(t)
            for alpha in enumerate_indices(N, K):
                o = oracles.gbm_coeff(alpha, t, y, interval)
                if abs(o) < 1e-14:
                    continue
                worst = max(worst, abs(series[alpha][j] - o) / abs(o))
    return worst


def check_modes(ys=(0.5, 1.0, 2.0), N: int = 4, K: int = 4, T: float = 1.0,
                dt: float = 1e-4, tol: float = 1e-6) -> CheckResult:
    """fourier_mode_solve against the closed-form geometric-BM coefficients.

    The Crank-Nicolson error grows like (dt (k-1))^2 with the basis index, so
    the breakdown by K is reported alongside the result at the requested K.
    """
    interval = TimeInterval.from_dt(T, dt)
    check_times = (0.25, 0.5, 0.75)
    by_K = {k: _mode_error(ys, N, k, interval, check_times) for k in range(1, K + 1)}
    worst = by_K[K]
    rows = [(f"max rel err K={k}", e, 0.0, tol, e <= tol) for k, e in by_K.items()]
    per_k = ", ".join(f"K={k}: {e:.1e}" for k, e in by_K.items())
    return CheckResult("5 per-mode oracle", worst, tol, worst <= tol,
                       f"(|alpha|<={N}, t in {check_times}; {per_k})", rows)


def check_parseval(y: float = 1.0, t: float = 0.5, N: int = 12, K: int = 4, dt: float = 1e-3,
                   mc: oracles.McConfig | None = None, n_se: float = 3.0) -> CheckResult:
    """Truncated Parseval sum and mean against Monte Carlo of the exact mode solution."""
    mc = mc or oracles.McConfig(M=100_000, steps=1000)
    series = fourier_mode_solve(y, N, K, TimeInterval.from_dt(t, dt))
    parseval = float(sum(v[-1] ** 2 for _, v in series.items()))
    mean = float(series[ZERO][-1])
    est = oracles.mc_moments(t, y, mc)
    z2 = abs(parseval - est.second_moment) / est.second_moment_se
    z1 = abs(mean - est.mean) / est.mean_se
    exact = oracles.second_moment_exact(t, y)
    rows = [("second moment (Parseval vs MC)", parseval, est.second_moment,
             n_se * est.second_moment_se, z2 <= n_se),
            ("mean (chaos vs MC)", mean, est.mean, n_se * est.mean_se, z1 <= n_se),
            ("second moment (Parseval vs exact)", parseval, exact, 1e-3,
             abs(parseval - exact) / exact <= 1e-3)]
    return CheckResult("6 Parseval vs Monte Carlo", max(z1, z2), n_se, z1 <= n_se and z2 <= n_se,
                       f"(standard errors; Parseval/exact - 1 = {parseval / exact - 1:.1e})", rows)


def check_orthonormality(K: int = 4, N: int = 3, M: int = 100_000, seed: int = 20240601,
                         tol: float = 0.02) -> CheckResult:
    """Monte Carlo Gram matrix of xi_alpha for |alpha| <= N, support in 1..K."""
    idx = list(enumerate_indices(N, K))
    zeta = sample_zeta(M, K, np.random.default_rng(seed))
    X = np.array([xi_eval(a, zeta) for a in idx])
    G = X @ X.T / M
    dev = np.abs(G - np.eye(len(idx)))
    i, j = np.unravel_index(np.argmax(dev), dev.shape)
    worst = float(dev[i, j])
    rows = [(f"E xi[{a.to_string()}] xi[{b.to_string()}]", G[p, q], float(p == q), tol,
             dev[p, q] <= tol) for (p, a), (q, b) in itertools.product(enumerate(idx), repeat=2)
            if q >= p]
    return CheckResult("7 orthonormality", worst, tol, worst <= tol,
                       f"(worst entry at ({idx[i].to_string()}|{idx[j].to_string()}), "
                       f"{len(idx)} indices, M={M})", rows)


def _shift_instances(seed: int = 7):
    """Small random problems with chaos data on one or two indices of order <= 2."""
    rng = np.random.default_rng(seed)
    grids = [SpatialGrid(8.0, 32, "periodic"), SpatialGrid(8.0, 32, "bounded")]
    coeff_sets = [CoefficientSet(a=1.0, b=0.2, rho=0.4, sigma=0.1, nu=-0.1),
                  CoefficientSet(a=lambda t, x: 1.0 + 0.2 * np.sin(x), rho=0.3,
                                 nu=lambda t, x: 0.1 * np.cos(x) * (1 + t))]
    pool = [MultiIndex.from_characteristic(c) for c in [(1,), (2,), (1, 1), (1, 3), (2, 2)]]
    for grid, coeffs in itertools.product(grids, coeff_sets):
        x = grid.x
        for trial in range(2):
            gammas = [pool[i] for i in rng.choice(len(pool), size=2, replace=False)]
            amp = rng.normal(size=(2, 3))
            v = {g_: a[0] * np.exp(-(x - a[1]) ** 2) for g_, a in zip(gammas, amp)}
            f = {gammas[0]: (lambda t, x, a=amp[0, 2]: a * np.exp(-x ** 2) * np.cos(t))}
            g = {gammas[1]: (lambda t, x, a=amp[1, 2]: a * np.exp(-(x - 1) ** 2))}
            N = int(rng.integers(2, 5))
            yield PropagatorConfig(N=N, K=3, grid=grid, interval=TimeInterval(0.5, 20),
                                   coeffs=coeffs, v=v, f=f, g=g, record="all", store=True)


def check_shift(tol: float = 1e-10) -> CheckResult:
    """shift_solve against the brute-force system with chaos-valued data."""
    worst, rows = 0.0, []
    for i, cfg in enumerate(_shift_instances()):
        direct = solve_system(cfg).series
        shifted = shift_solve(cfg).series
        scale = max(float(np.max(np.abs(v))) for _, v in direct.items())
        err = max(float(np.max(np.abs(direct[a] - shifted[a]))) for a in direct) / scale
        worst = max(worst, err)
        rows.append((f"instance {i} ({cfg.grid.mode}, N={cfg.N})", err, 0.0, tol, err <= tol))
    return CheckResult("8 shift identity", worst, tol, worst <= tol,
                       f"({len(rows)} random instances, max-abs error / max coefficient)", rows)


def variable_preset_norms(N: int = 8, K: int = 4, n_x: int = 512, L: float = 20.0,
                          dt: float = 1e-2, T: float = 1.0):
    """L2((0,T); H^1) norms of every u_alpha for the variable-coefficient preset."""
    grid = SpatialGrid(L, n_x, "bounded")
    coeffs = coefficient_set("variable-coefficient")
    v = np.exp(-0.5 * grid.x ** 2)
    res = solve_system(PropagatorConfig(N=N, K=K, grid=grid, interval=TimeInterval.from_dt(T, dt),
                                        coeffs=coeffs, v=v, record="final", spatial_norm="h1",
                                        integrated=True))
    return res.integrated_table()


WEIGHT_SCAN = [WeightPair(p, q) for p in (-2, -3, -4, -6) for q in (-2, -3, -4)]


def check_weights(N: int = 8, tol: float = 0.01, max_ratio: float = 0.9) -> CheckResult:
    """Existence of (r, l) <= -2 with geometric decay and a stable weighted norm."""
    reports = decay_report(variable_preset_norms(N=N), N, WEIGHT_SCAN, n_from=4,
                           max_ratio=max_ratio)
    good = [r for r in reports if r.decays and r.last_change < tol]
    rows = [(f"(r,l)=({r.weights.p:g},{r.weights.q:g}) max ratio", float(np.max(r.ratios)),
             max_ratio, max_ratio, r.decays and r.last_change < tol) for r in reports]
    # headline: the least negative pair in the scan, i.e. the weakest weights
    head = max(reports, key=lambda r: (r.weights.p + r.weights.q, r.weights.p))
    listed = ", ".join(f"({r.weights.p:g},{r.weights.q:g})" for r in good) or "none"
    return CheckResult("9 admissible weights", float(np.max(head.ratios)), max_ratio, bool(good),
                       f"(max ratio at (r,l)=({head.weights.p:g},{head.weights.q:g}), N=7->8 "
                       f"change {head.last_change:.1e}; admissible: {listed})", rows)


SUITES: dict[str, list[Callable[[], CheckResult]]] = {
    "growth": [check_growth, check_stirling, check_summability],
    "parseval": [check_modes, check_parseval],
    "stransform": [check_stransform],
    "orthonormality": [check_orthonormality],
    "shift": [check_shift],
    "weights": [check_weights],
}
SUITES["all"] = [c for name in ("growth", "stransform", "parseval", "orthonormality", "shift",
                                "weights") for c in SUITES[name]]
