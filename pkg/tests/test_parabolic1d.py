import math

import numpy as np
import pytest

from wiener_chaos.cm_basis import HFunction, TimeInterval
from wiener_chaos.errors import DomainError, RegimeError
from wiener_chaos.parabolic1d import (CoefficientSet, SpatialGrid, Trajectory, apply_operator,
                                      semigroup_apply, solve_h, step)

HEAT = CoefficientSet(a=1.0)
EXAMPLE = CoefficientSet(a=1.0, rho=1.0)


def gaussian_at(grid, t, h_int=0.0):
    s2 = 2.0 * (t + h_int)
    return np.exp(-grid.x ** 2 / (2 * (1 + s2))) / math.sqrt(1 + s2)


def rel_l2(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_grid_validation_and_layout():
    g = SpatialGrid(20.0, 64)
    assert g.dx == pytest.approx(40 / 64) and g.x[0] == -20.0
    for bad in (dict(n_x=8), dict(half_width=-1), dict(mode="ring"), dict(fd_order=3)):
        with pytest.raises(DomainError):
            SpatialGrid(**bad)


def test_parseval_weights():
    g = SpatialGrid(5.0, 64)
    u = np.random.default_rng(0).normal(size=64)
    assert np.sum(g.parseval_weights * np.abs(np.fft.rfft(u)) ** 2) == pytest.approx(
        g.dx * np.sum(u * u))


def test_laplacian_eigenfunction_periodic():
    g = SpatialGrid(10.0, 128)
    u = np.sin(np.pi * g.x / 10.0)
    np.testing.assert_allclose(apply_operator(u, "A", HEAT, 0.0, g), -(np.pi / 10) ** 2 * u,
                               atol=1e-12)


def test_multiplication_operator():
    g = SpatialGrid(10.0, 32)
    u = np.cos(g.x)
    np.testing.assert_allclose(apply_operator(u, "B", CoefficientSet(nu=2.0), 0.0, g), 2 * u)
    with pytest.raises(DomainError):
        apply_operator(np.zeros(5), "A", HEAT, 0.0, g)


def test_bounded_operator_matches_loop_oracle():
    g = SpatialGrid(6.0, 48, "bounded")
    coeffs = CoefficientSet(a=lambda t, x: 1 + 0.1 * np.sin(x), b=0.5, c=-1.0)
    u = np.exp(-g.x ** 2)
    ref = np.empty_like(u)
    dx = g.dx
    for j in range(g.n_x):
        left = u[j - 1] if j > 0 else 0.0
        right = u[j + 1] if j < g.n_x - 1 else 0.0
        a = 1 + 0.1 * math.sin(g.x[j])
        ref[j] = a * (left - 2 * u[j] + right) / dx ** 2 + 0.5 * (right - left) / (2 * dx) - u[j]
    np.testing.assert_allclose(apply_operator(u, "A", coeffs, 0.0, g), ref, rtol=0, atol=1e-12)


def test_periodic_operator_matrix_matches_apply():
    from wiener_chaos.parabolic1d import operator_matrix
    g = SpatialGrid(6.0, 32)
    coeffs = CoefficientSet(a=lambda t, x: 1 + 0.1 * np.sin(x), b=0.3, c=-0.2)
    u = np.exp(-g.x ** 2)
    np.testing.assert_allclose(operator_matrix("A", coeffs, 0.0, g) @ u,
                               apply_operator(u, "A", coeffs, 0.0, g), atol=1e-10)


def test_step_trivial_cases():
    g = SpatialGrid(10.0, 32)
    zero = CoefficientSet(a=0.0)
    f = np.cos(g.x)
    u = np.exp(-g.x ** 2)
    np.testing.assert_allclose(step(u, f, zero, 0.0, 0.0, 0.1, g), u + 0.1 * f, atol=1e-14)
    assert np.all(step(np.zeros(32), None, HEAT, 0.0, 0.0, 0.1, g) == 0)
    with pytest.raises(DomainError):
        step(u, None, HEAT, 0.0, 0.0, 0.0, g)


def test_step_amplification_factor():
    g = SpatialGrid(np.pi, 32)
    kappa, dt = 3.0, 0.05
    u = np.cos(kappa * g.x)
    out = step(u, None, HEAT, 0.0, 0.0, dt, g)
    factor = (1 - dt * kappa ** 2 / 2) / (1 + dt * kappa ** 2 / 2)
    np.testing.assert_allclose(out, factor * u, atol=1e-12)


def test_solve_h_heat_gaussian():
    g = SpatialGrid(20.0, 1024)
    v = np.exp(-g.x ** 2 / 2)
    tr = solve_h(v, None, None, None, HEAT, TimeInterval.from_dt(1.0, 1e-3), g)
    # heat a=1: variance grows by 2t
    assert rel_l2(tr.at(1.0), gaussian_at(g, 1.0)) <= 1e-4


def test_solve_h_example_with_small_h():
    g = SpatialGrid(20.0, 1024)
    I = TimeInterval.from_dt(1.0, 1e-3)
    h = HFunction(np.array([0.3, 0.2]))
    tr = solve_h(np.exp(-g.x ** 2 / 2), None, None, h, EXAMPLE, I, g)
    for t in (0.5, 1.0):
        assert rel_l2(tr.at(t), gaussian_at(g, t, float(h.integral(t, 1.0)))) <= 1e-4


def test_solve_h_zero_data():
    g = SpatialGrid(10.0, 64)
    tr = solve_h(np.zeros(64), None, None, HFunction(np.array([0.2])), EXAMPLE,
                 TimeInterval(0.5, 10), g)
    assert np.all(tr.values == 0)


def test_crank_nicolson_second_order():
    g = SpatialGrid(20.0, 512)
    v = np.exp(-g.x ** 2 / 2)
    exact = gaussian_at(g, 1.0)
    errs = [rel_l2(solve_h(v, None, None, None, HEAT, TimeInterval.from_dt(1.0, dt), g).at(1.0),
                   exact) for dt in (0.1, 0.05)]
    order = math.log2(errs[0] / errs[1])
    assert 1.8 <= order <= 2.2


def test_periodic_and_bounded_agree_with_fourth_order_stencil():
    I = TimeInterval.from_dt(1.0, 1e-3)
    per = SpatialGrid(20.0, 1024)
    bnd = SpatialGrid(20.0, 1024, "bounded", fd_order=4)
    v = np.exp(-per.x ** 2 / 2)
    a = solve_h(v, None, None, None, HEAT, I, per, record_every=1000).at(1.0)
    b = solve_h(v, None, None, None, HEAT, I, bnd, record_every=1000).at(1.0)
    assert rel_l2(b, a) <= 1e-5


def test_mass_conservation_periodic():
    g = SpatialGrid(20.0, 256)
    # non-divergence a(x) u_xx does not conserve mass, so a is constant here
    coeffs = CoefficientSet(a=1.3, rho=0.4)
    u = np.exp(-g.x ** 2)
    m0 = u.sum()
    for _ in range(5):
        u = step(u, None, coeffs, 0.0, 0.0, 0.01, g)
        assert abs(u.sum() - m0) <= 1e-12 * abs(m0)


@pytest.mark.parametrize("mode", ["periodic", "bounded"])
def test_solve_h_superposition(mode):
    rng = np.random.default_rng(5)
    g = SpatialGrid(8.0, 64, mode)
    I = TimeInterval(0.3, 30)
    coeffs = CoefficientSet(a=lambda t, x: 1 + 0.2 * np.sin(x), rho=0.3, nu=0.1)
    h = HFunction(np.array([0.2, -0.1]))
    v1, v2 = rng.normal(size=(2, 64))
    f1 = lambda t, x: np.cos(x) * t
    g2 = lambda t, x: np.exp(-x ** 2)
    a = solve_h(v1, f1, None, h, coeffs, I, g).values
    b = solve_h(v2, None, g2, h, coeffs, I, g).values
    ab = solve_h(v1 + v2, f1, g2, h, coeffs, I, g).values
    np.testing.assert_allclose(ab, a + b, atol=1e-12 * np.abs(ab).max())


def test_regime_violation_is_refused():
    g = SpatialGrid(10.0, 64)
    with pytest.raises(RegimeError) as info:
        solve_h(np.zeros(64), None, None, HFunction(np.array([-0.9])), EXAMPLE,
                TimeInterval(1.0, 10), g)
    assert info.value.diagnostics["value"] < info.value.diagnostics["floor"]


def test_coefficient_check():
    g = SpatialGrid(10.0, 32)
    I = TimeInterval(1.0, 4)
    assert CoefficientSet(a=lambda t, x: 1 + 0.2 * np.sin(x)).check(g, I)[0] == pytest.approx(
        (1 + 0.2 * np.sin(g.x)).min(), rel=1e-12)
    with pytest.raises(DomainError):
        CoefficientSet(a=lambda t, x: np.sin(x)).check(g, I)
    with pytest.raises(DomainError):
        CoefficientSet(a=1.0, b=5.0, C0=2.0).check(g, I)


def test_semigroup_identity_and_composition():
    g = SpatialGrid(20.0, 256)
    v = np.exp(-g.x ** 2 / 2)
    np.testing.assert_array_equal(semigroup_apply(v, 0.3, 0.3, HEAT, g, 0.01), v)
    direct = semigroup_apply(v, 0.0, 0.6, HEAT, g, 0.01)
    composed = semigroup_apply(semigroup_apply(v, 0.0, 0.2, HEAT, g, 0.01), 0.2, 0.6, HEAT, g, 0.01)
    assert rel_l2(composed, direct) <= 1e-6
    with pytest.raises(DomainError):
        semigroup_apply(v, 0.5, 0.1, HEAT, g, 0.01)


def test_trajectory_csv(tmp_path):
    g = SpatialGrid(1.0, 16)
    tr = Trajectory(np.array([0.0, 0.5]), np.zeros((2, 16)), g)
    tr.to_csv(tmp_path / "t.csv", header="x")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[:2] == ["# x", "t,x,value"] and len(lines) == 2 + 32


def test_discrete_norms():
    g = SpatialGrid(20.0, 512)
    u = np.exp(-g.x ** 2 / 2)
    # int e^{-x^2} = sqrt(pi); int (u')^2 = sqrt(pi)/2
    assert g.norm_sq("l2")(u) == pytest.approx(math.sqrt(math.pi), rel=1e-10)
    assert g.norm_sq("h1")(u) == pytest.approx(1.5 * math.sqrt(math.pi), rel=1e-10)
    b = SpatialGrid(20.0, 4096, "bounded")
    ub = np.exp(-b.x ** 2 / 2)
    assert b.norm_sq("h1")(ub) == pytest.approx(1.5 * math.sqrt(math.pi), rel=1e-4)
    assert g.norm_sq("h-1")(u) < g.norm_sq("l2")(u)
    assert b.norm_sq("h-1")(ub) == pytest.approx(g.norm_sq("h-1")(u), rel=1e-3)
