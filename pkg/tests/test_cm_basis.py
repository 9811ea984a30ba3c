import math

import numpy as np
import pytest
from numpy.polynomial import hermite_e

from wiener_chaos.cm_basis import (HFunction, TimeInterval, basis_matrix, cosine,
                                   cosine_antiderivative, hermite, project, sample_zeta,
                                   xi_eval, zeta_from_increments)
from wiener_chaos.errors import DomainError
from wiener_chaos.multiindex import MultiIndex, ZERO


def test_time_interval():
    I = TimeInterval.from_dt(1.0, 0.01)
    assert I.n_t == 100 and I.dt == pytest.approx(0.01)
    assert I.times[-1] == 1.0 and I.midpoints[0] == pytest.approx(0.005)
    assert I.step_index(0.5) == 50
    with pytest.raises(DomainError):
        TimeInterval(-1.0, 10)


def test_cosines_are_orthonormal():
    T = 0.7
    t = np.linspace(0, T, 20001)
    m = basis_matrix(6, t, T)
    G = np.trapezoid(m[:, :, None] * m[:, None, :], t, axis=0)
    np.testing.assert_allclose(G, np.eye(6), atol=1e-7)


def test_antiderivative_matches_quadrature_and_vanishes_at_T():
    T = 2.0
    for k in range(1, 6):
        s = np.linspace(0, 1.3, 4001)
        num = np.trapezoid(cosine(k, s, T), s)
        assert cosine_antiderivative(k, 1.3, T) == pytest.approx(num, abs=1e-7)
        if k >= 2:
            assert cosine_antiderivative(k, T, T) == pytest.approx(0.0, abs=1e-15)
    assert cosine_antiderivative(1, T, T) == pytest.approx(math.sqrt(T))


def test_hermite_matches_numpy_hermite_e():
    x = np.linspace(-3, 3, 13)
    for n in range(8):
        ref = hermite_e.hermeval(x, [0] * n + [1])
        np.testing.assert_allclose(hermite(n, x), ref, rtol=1e-12, atol=1e-12)


def test_xi_eval():
    zeta = np.array([0.5, -1.0, 2.0])
    assert xi_eval(ZERO, zeta) == 1.0
    a = MultiIndex.from_dense([2, 0, 1])
    expected = (0.5 ** 2 - 1) * 2.0 / math.sqrt(2)
    assert xi_eval(a, zeta) == pytest.approx(expected)
    with pytest.raises(DomainError):
        xi_eval(MultiIndex.unit(4), zeta)


def test_zeta_from_increments_has_unit_covariance():
    rng = np.random.default_rng(1)
    I = TimeInterval(1.0, 200)
    dW = rng.standard_normal((40000, I.n_t)) * math.sqrt(I.dt)
    z = zeta_from_increments(dW, I, 3)
    C = np.cov(z.T)
    np.testing.assert_allclose(C, np.eye(3), atol=0.03)
    assert sample_zeta(5, 3, rng).shape == (5, 3)


def test_hfunction_evaluation_integral_power():
    h = HFunction(np.array([0.3, 0.2]))
    T = 1.0
    t = np.array([0.0, 0.25, 1.0])
    np.testing.assert_allclose(h(t, T), 0.3 * cosine(1, t, T) + 0.2 * cosine(2, t, T))
    assert h.integral(T, T) == pytest.approx(0.3)
    assert h.power(MultiIndex.from_dense([2, 1])) == pytest.approx(0.3 ** 2 * 0.2)
    assert h.power(MultiIndex.unit(3)) == 0.0


def test_project_recovers_coefficients():
    I = TimeInterval(1.0, 2000)
    h = project(lambda t: 0.3 * cosine(1, t, 1.0) - 0.5 * cosine(3, t, 1.0), 4, I)
    np.testing.assert_allclose(h.coeffs, [0.3, 0.0, -0.5, 0.0], atol=1e-5)
