import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wiener_chaos import oracles
from wiener_chaos.chaos_space import (ChaosSeries, WeightPair, decay_report, eh_member,
                                      expectation_norm_sq, hnorm_sq, level_contributions,
                                      s_evaluate, weighted_norm_sq, write_series_csv)
from wiener_chaos.cm_basis import HFunction, TimeInterval
from wiener_chaos.errors import DomainError
from wiener_chaos.multiindex import MultiIndex, ZERO, enumerate_indices
from wiener_chaos.propagator import fourier_mode_solve

e1, e2 = MultiIndex.unit(1), MultiIndex.unit(2)


def test_series_validates_truncation_and_shapes():
    with pytest.raises(DomainError):
        ChaosSeries({MultiIndex.unit(3): 1.0}, N=1, K=2)
    with pytest.raises(DomainError):
        ChaosSeries({ZERO: np.zeros(2), e1: np.zeros(3)}, N=1, K=1)


@pytest.mark.parametrize("p,q", [(0, 0), (-2, -1), (1.5, 2)])
def test_weighted_norm_examples(p, q):
    f = np.array([1.0, 2.0])
    assert weighted_norm_sq(ChaosSeries({ZERO: f}, 1, 3), WeightPair(p, q)) == pytest.approx(5.0)
    k = 3
    s = ChaosSeries({MultiIndex.unit(k): f}, 1, 3)
    assert weighted_norm_sq(s, WeightPair(p, q)) == pytest.approx(2 ** p * k ** (2 * q) * 5.0)


def test_weighted_norm_two_unit_terms():
    s = ChaosSeries({ZERO: np.array([1.0]), e1: np.array([1.0])}, 1, 1)
    assert weighted_norm_sq(s, WeightPair(0, 0)) == pytest.approx(2.0)
    assert expectation_norm_sq(s) == pytest.approx(2.0)
    assert weighted_norm_sq(ChaosSeries({}, 2, 2), WeightPair(0, 0)) == 0.0


def test_weighted_norm_monotone_in_p_and_q():
    rng = np.random.default_rng(0)
    s = ChaosSeries({a: rng.normal(size=3) for a in enumerate_indices(3, 3)}, 3, 3)
    vals_p = [weighted_norm_sq(s, WeightPair(p, 0)) for p in (-2, -1, 0, 1)]
    vals_q = [weighted_norm_sq(s, WeightPair(0, q)) for q in (-2, -1, 0, 1)]
    assert np.all(np.diff(vals_p) >= 0) and np.all(np.diff(vals_q) >= 0)


def test_trajectory_norm_integrates_in_time():
    times = np.linspace(0, 2, 201)
    s = ChaosSeries({ZERO: np.outer(times, np.ones(4))}, 0, 1, times=times)
    # int_0^2 4 t^2 dt = 32/3
    assert expectation_norm_sq(s) == pytest.approx(32 / 3, rel=1e-4)


def test_s_evaluate_examples():
    u0, u1 = np.array([1.0, 2.0]), np.array([0.5, -1.0])
    s = ChaosSeries({ZERO: u0, e2: u1}, 1, 2)
    np.testing.assert_allclose(s_evaluate(s, HFunction(np.array([0.0, 0.7]))), u0 + 0.7 * u1)
    only = ChaosSeries({ZERO: u0}, 2, 2)
    np.testing.assert_allclose(s_evaluate(only, HFunction(np.array([3.0, -1.0]))), u0)
    with pytest.raises(DomainError):
        s_evaluate(s, HFunction(np.array([0.0, 0.0, 1.0])))


def test_s_evaluate_finite_differences_recover_coefficients():
    rng = np.random.default_rng(3)
    s = ChaosSeries({a: rng.normal() for a in enumerate_indices(3, 2)}, 3, 2)
    eps = 1e-3

    def u(h1, h2):
        return float(s_evaluate(s, HFunction(np.array([h1, h2]))))

    d1 = (u(eps, 0) - u(-eps, 0)) / (2 * eps)
    assert d1 == pytest.approx(float(s[e1]), rel=1e-4)
    d11 = (u(eps, 0) - 2 * u(0, 0) + u(-eps, 0)) / eps ** 2
    assert d11 == pytest.approx(float(s[MultiIndex.from_dense([2])]) * math.sqrt(2), rel=1e-4)
    d12 = (u(eps, eps) - u(eps, -eps) - u(-eps, eps) + u(-eps, -eps)) / (4 * eps ** 2)
    assert d12 == pytest.approx(float(s[MultiIndex.from_dense([1, 1])]), rel=1e-4)


def test_hnorm_and_eh_member_examples():
    assert hnorm_sq(HFunction(np.array([1.0])), 3.0) == 1.0
    assert hnorm_sq(HFunction(np.array([0.0, 1.0])), -1.0) == pytest.approx(0.25)
    assert eh_member(HFunction.zero(3), WeightPair(-5, 2))
    assert not eh_member(HFunction(np.array([1.0])), WeightPair(0, 0))  # strict boundary
    assert eh_member(HFunction(np.array([0.5])), WeightPair(0, 0))


@settings(max_examples=50)
@given(st.floats(-3, 3), st.floats(0.1, 3), st.integers(1, 5))
def test_hnorm_homogeneous_and_eh_monotone(c, s, k):
    coeffs = np.zeros(k)
    coeffs[-1] = 1.0
    h = HFunction(c * coeffs)
    assert hnorm_sq(h, -s) == pytest.approx(c * c * k ** (-2 * s))
    if eh_member(h, WeightPair(0, s)):
        assert eh_member(h, WeightPair(0.5, s))


def test_mode_series_parseval_matches_exact_second_moment():
    series = fourier_mode_solve(1.0, 12, 4, TimeInterval.from_dt(0.5, 1e-3))
    last = ChaosSeries({a: v[-1] for a, v in series.items()}, 12, 4)
    exact = oracles.second_moment_exact(0.5, 1.0)
    assert expectation_norm_sq(last) == pytest.approx(exact, rel=1e-3)


def test_level_contributions_and_decay_report(tmp_path):
    norms = {a: 0.5 ** a.order for a in enumerate_indices(6, 2)}
    c = level_contributions(norms, WeightPair(0, 0), 6)
    assert c[0] == 1.0 and c[1] == pytest.approx(2 * 0.5)
    (rep,) = decay_report(norms, 6, [WeightPair(0, 0)])
    assert rep.decays and rep.weighted_norm == pytest.approx(c.sum())
    write_series_csv(tmp_path / "s.csv", norms, [WeightPair(0, 0)], header="h")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "# h" and lines[1].startswith("index,order")
    assert len(lines) == 2 + len(norms)
