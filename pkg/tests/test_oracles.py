import math

import numpy as np
import pytest

from wiener_chaos import oracles
from wiener_chaos.cm_basis import HFunction, TimeInterval
from wiener_chaos.errors import DomainError
from wiener_chaos.multiindex import MultiIndex, ZERO, enumerate_indices
from wiener_chaos.propagator import fourier_mode_solve

I1 = TimeInterval(1.0, 100)


def test_gbm_coeff_trivial_cases():
    assert oracles.gbm_coeff(ZERO, 0.4, 1.3, I1) == pytest.approx(
        math.exp(-1.3 ** 2 / 2) * math.exp(-1.3 ** 2 * 0.4))
    assert oracles.gbm_coeff(ZERO, 0.7, 0.0, I1) == 1.0
    assert oracles.gbm_coeff(MultiIndex.unit(3), 0.7, 0.0, I1) == 0.0
    assert oracles.gbm_coeff(MultiIndex.unit(2), 1.0, 1.0, I1) == pytest.approx(0.0, abs=1e-16)
    with pytest.raises(DomainError):
        oracles.gbm_coeff(ZERO, 1.5, 1.0, I1)


def test_gbm_coefficients_sum_to_exact_second_moment():
    # at t = T only m_1 carries mass, so K = 1 already sums to the limit
    y, t = 1.0, 0.5
    I = TimeInterval(t, 10)
    total = sum(oracles.gbm_coeff(a, t, y, I) ** 2 for a in enumerate_indices(20, 1))
    assert total == pytest.approx(oracles.second_moment_exact(t, y), rel=1e-12)


def test_second_moment_trivial_cases():
    assert oracles.second_moment_exact(0.8, 0.0) == 1.0
    assert oracles.second_moment_exact(0.0, 1.5) == pytest.approx(math.exp(-1.5 ** 2))


def test_second_moment_against_monte_carlo():
    est = oracles.mc_moments(0.5, 1.0, oracles.McConfig(M=100_000, steps=100))
    assert abs(est.second_moment - oracles.second_moment_exact(0.5, 1.0)) <= 3 * est.second_moment_se
    assert abs(est.mean - oracles.mean_exact(0.5, 1.0)) <= 3 * est.mean_se


def test_mc_zero_frequency_is_exact():
    est = oracles.mc_moments(0.5, 0.0, oracles.McConfig(M=10, steps=4))
    assert (est.mean, est.second_moment, est.mean_se) == (1.0, 1.0, 0.0)
    assert oracles.mc_s_transform(HFunction(np.array([0.3])), 0.5, 0.0,
                                  oracles.McConfig(M=10, steps=4)) == (1.0, 0.0)


def test_mc_reproducible_and_block_independent():
    cfg = oracles.McConfig(M=5000, steps=20, seed=11, block=1000)
    a = oracles.mc_moments(0.5, 1.0, cfg)
    assert oracles.mc_moments(0.5, 1.0, cfg) == a
    assert oracles.mc_moments(0.5, 1.0, oracles.McConfig(M=5000, steps=20, seed=12)) != a
    blocks = [rng.standard_normal(3) for _, rng in cfg.blocks()]
    assert len(blocks) == 5 and len({tuple(b) for b in blocks}) == 5


def test_mc_config_validation():
    with pytest.raises(DomainError):
        oracles.McConfig(M=0)
    with pytest.raises(DomainError):
        oracles.McConfig(steps=1)
    with pytest.raises(DomainError):
        oracles.McConfig(seed=-1)


def test_mc_s_transform_zero_h_is_the_mean():
    cfg = oracles.McConfig(M=20_000, steps=50, seed=3)
    est, se = oracles.mc_s_transform(HFunction.zero(2), 0.5, 1.0, cfg)
    assert est == pytest.approx(oracles.mc_moments(0.5, 1.0, cfg).mean, rel=1e-12)


def test_mc_s_transform_against_chaos_evaluation():
    y, t = 1.0, 0.5
    I = TimeInterval.from_dt(t, 1e-3)
    h = HFunction(np.array([0.3]))
    series = fourier_mode_solve(y, 8, 1, I)
    chaos = sum(v[-1] * h.power(a) / math.sqrt(a.factorial()) for a, v in series.items())
    est, se = oracles.mc_s_transform(h, t, y, oracles.McConfig(M=100_000, steps=200))
    tail = abs(series[MultiIndex.from_dense([8])][-1]) * 0.3 ** 8
    assert abs(est - chaos) <= 3 * se + tail


def test_growth_oracle_level_zero_is_gaussian_norm():
    for t in (0.0, 0.5, 1.0):
        assert oracles.growth_oracle(0, t).value == pytest.approx(
            math.sqrt(math.pi / (1 + 2 * t)), rel=1e-12)


def test_growth_oracle_n1_by_independent_trapezoid():
    t = 1.0
    y = np.linspace(-12, 12, 200_001)
    trap = t * np.trapezoid(y ** 4 * np.exp(-(1 + 2 * t) * y ** 2), y)
    assert oracles.growth_oracle(1, t).value == pytest.approx(trap, rel=1e-8)


@pytest.mark.parametrize("n", range(13))
def test_growth_oracle_matches_gamma_closed_form(n):
    for t in (0.25, 1.0):
        assert oracles.growth_oracle(n, t).value == pytest.approx(
            oracles.growth_closed_form(n, t), rel=1e-10)


def test_growth_oracle_rejects_large_n():
    with pytest.raises(DomainError):
        oracles.growth_oracle(13, 1.0)


def test_stirling_ratio_bounded_and_printed_base_is_not():
    C = [oracles.growth_oracle(n, 1.0).ratio for n in range(1, 9)]
    P = [oracles.growth_oracle(n, 1.0).ratio_printed for n in range(1, 9)]
    assert max(C) / min(C) <= 10
    assert max(P) / min(P) > 100


def test_growth_oracle_equals_physical_level_zero():
    from wiener_chaos.verify import growth_levels
    S = growth_levels(1.0, K=1, N=0)
    assert S[0] == pytest.approx(oracles.growth_oracle(0, 1.0).value, abs=1e-4)


def test_oracle_report(tmp_path):
    oracles.write_oracle_report(tmp_path / "r.csv", [("q", 1.0, 1.1, 0.2, True)], header="h")
    assert (tmp_path / "r.csv").read_text().splitlines() == [
        "# h", "quantity,computed,oracle,standard_error_or_tolerance,pass", "q,1.0,1.1,0.2,true"]
