import math

import numpy as np
import pytest
from scipy import integrate

from fadingcap import DomainError, UsageError
from fadingcap.capacity import (
    SnrScenario,
    active_volume,
    capacity_no_csi,
    capacity_partial_csi,
    capacity_with_allocation,
    high_snr_approximation,
    high_snr_gap,
    partial_csi_crossover,
    snr_for_active_volume,
    waterfill,
)
from fadingcap.channel import GridVariance, OuVariance, UncorrelatedVariance
from fadingcap.rearrange import midpoints
from oracles import discretized_waterfill, mean_log_gain

# constant spectrum at rho = 10, W = 1: exp(0.1) E1(0.1) from mpmath
FLAT_RHO10 = 2.01464254470845
# (d, rho) -> statistical-CSI rate at W = 1, regression values whose agreement
# with the independent projected-gradient oracle is asserted below
FROZEN_PARTIAL = {
    (1.0, 0.1): 0.13547551, (1.0, 1.0): 0.59961149, (1.0, 10.0): 1.84550726,
    (5.0, 0.1): 0.09364769, (5.0, 1.0): 0.59622767, (5.0, 10.0): 2.01136533,
}
FROZEN_THETA_D1 = {1e-3: 0.090222, 1e-2: 0.189698, 0.1: 0.390046, 1.0: 0.802623}
HIGH_SNR_GAP_1_5 = -0.27320557


def no_csi_oracle(d, rho, W=1.0):
    sigma = OuVariance(d, W)
    val, _ = integrate.quad(lambda f: mean_log_gain(np.array([rho / W * sigma(f)]))[0],
                            0, 1, points=[0.5], epsabs=1e-13, epsrel=1e-13, limit=200)
    return W * val


def test_scenario_validation():
    with pytest.raises(DomainError):
        SnrScenario(-1.0)
    with pytest.raises(DomainError):
        SnrScenario(1.0, W=0.0)
    with pytest.raises(DomainError):
        SnrScenario(math.nan)


def test_flat_spectrum_frozen():
    assert capacity_no_csi(UncorrelatedVariance(1.0), SnrScenario(10.0)).value == pytest.approx(
        FLAT_RHO10, rel=1e-13)
    sol = waterfill(UncorrelatedVariance(1.0), SnrScenario(10.0))
    assert sol.capacity == pytest.approx(FLAT_RHO10, rel=1e-13)
    assert sol.theta == 1.0


@pytest.mark.parametrize("d, rho, W", [(1.0, 0.01, 1.0), (1.0, 10.0, 1.0), (5.0, 1.0, 1.0),
                                       (0.5, 1e3, 1.0), (2.0, 3.0, 2.5)])
def test_no_csi_matches_independent_quadrature(d, rho, W):
    got = capacity_no_csi(OuVariance(d, W), SnrScenario(rho, W)).value
    assert got == pytest.approx(no_csi_oracle(d, rho, W), abs=1e-10)


def test_no_csi_zero_snr_and_bandwidth_mismatch():
    assert capacity_no_csi(OuVariance(1.0, 1.0), SnrScenario(0.0)).value == 0.0
    with pytest.raises(UsageError):
        capacity_no_csi(OuVariance(1.0, 1.0), SnrScenario(1.0, W=2.0))


def test_no_csi_is_invariant_under_rearrangement():
    sigma = OuVariance(1.0, 1.0)
    scen = SnrScenario(5.0)
    grid = GridVariance(sigma.sample_rearranged(8192), 1.0)
    assert capacity_no_csi(grid, scen).value == pytest.approx(
        capacity_no_csi(sigma, scen).value, abs=1e-7)
    assert waterfill(grid, scen).capacity == pytest.approx(waterfill(sigma, scen).capacity,
                                                          abs=1e-6)


def test_no_csi_ordering_in_correlation():
    rhos = [0.01, 1.0, 100.0]
    for rho in rhos:
        values = [capacity_no_csi(OuVariance(d, 1.0), SnrScenario(rho)).value
                  for d in (0.5, 1.0, 5.0)]
        flat = capacity_no_csi(UncorrelatedVariance(1.0), SnrScenario(rho)).value
        assert values[0] <= values[1] <= values[2] <= flat


@pytest.mark.parametrize("key, expected", FROZEN_PARTIAL.items())
def test_partial_csi_frozen(key, expected):
    d, rho = key
    assert capacity_partial_csi(OuVariance(d, 1.0), SnrScenario(rho)).value == pytest.approx(
        expected, abs=1e-8)


@pytest.mark.parametrize("d, rho", [(1.0, 0.1), (5.0, 10.0), (0.5, 2.0)])
def test_partial_csi_matches_projected_gradient(d, rho):
    sigma = OuVariance(d, 1.0)
    ref, _ = discretized_waterfill(sigma.rearranged(midpoints(1024)), rho)
    assert waterfill(sigma, SnrScenario(rho)).capacity == pytest.approx(ref, abs=1e-6)


@pytest.mark.parametrize("d, rho", [(1.0, 1e-3), (1.0, 1.0), (5.0, 0.1), (0.5, 1e3)])
def test_waterfill_optimality_conditions(d, rho):
    sigma = OuVariance(d, 1.0)
    sol = waterfill(sigma, SnrScenario(rho))
    assert sol.power_residual <= 1e-8
    assert sol.kkt_residual <= 1e-7
    assert 0 < sol.theta <= 1
    # allocation nonincreasing on the rearranged domain, zero past theta
    f = np.linspace(0, 1, 2001)
    p = sol.allocation(f)
    assert np.all(np.diff(p) <= 1e-12)
    assert np.all(p[f > sol.theta + 1e-9] == 0)
    assert sol.capacity >= capacity_no_csi(sigma, SnrScenario(rho)).value - 1e-12


def test_allocation_in_original_order():
    sigma = OuVariance(1.0, 1.0)
    sol = waterfill(sigma, SnrScenario(0.1))
    f_hz = np.linspace(-0.5, 0.5, 101)
    p = sol.allocation.hz(f_hz)
    np.testing.assert_allclose(p, p[::-1], atol=1e-14)
    assert p[50] == p.max()
    mass = integrate.quad(lambda f: sol.allocation.hz(f), -0.5, 0.5,
                          points=[-sol.theta / 2, sol.theta / 2], epsabs=1e-12)[0]
    assert mass == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("rho, expected", FROZEN_THETA_D1.items())
def test_active_volume_frozen(rho, expected):
    assert active_volume(OuVariance(1.0, 1.0), SnrScenario(rho)) == pytest.approx(
        expected, abs=1e-6)


def test_active_volume_reaches_one_and_inverse_search():
    sigma = OuVariance(1.0, 1.0)
    assert active_volume(sigma, SnrScenario(10.0)) == 1.0
    rho = snr_for_active_volume(sigma, 0.5)
    assert active_volume(sigma, SnrScenario(rho)) == pytest.approx(0.5, abs=1e-9)
    with pytest.raises(DomainError):
        snr_for_active_volume(sigma, 1.5)


def test_zero_snr_is_degenerate():
    sol = waterfill(OuVariance(1.0, 1.0), SnrScenario(0.0))
    assert sol.degenerate and sol.capacity == 0.0 and sol.theta == 0.0
    assert waterfill(UncorrelatedVariance(1.0), SnrScenario(0.0)).theta == 1.0


def test_capacity_with_allocation():
    s = np.array([2.0, 1.0, 0.5, 0.5])
    scen = SnrScenario(3.0)
    flat = capacity_with_allocation(s, np.ones(4), scen)
    assert flat == pytest.approx(np.mean(mean_log_gain(3.0 * s)), rel=1e-12)
    with pytest.raises(DomainError):
        capacity_with_allocation(s, np.full(4, 1.1), scen)
    with pytest.raises(DomainError):
        capacity_with_allocation(s, np.array([2.0, 2.0, 0.0, -0.1]), scen)
    with pytest.raises(UsageError):
        capacity_with_allocation(s, np.ones(3), scen)


def test_high_snr_gap_against_direct_integral():
    s1, s5 = OuVariance(1.0, 1.0), OuVariance(5.0, 1.0)
    direct = integrate.quad(lambda f: math.log(s1(f)) - math.log(s5(f)), 0, 1, points=[0.5],
                            epsabs=1e-13)[0]
    assert high_snr_gap(s1, s5, 1.0) == pytest.approx(direct, abs=1e-10)
    assert high_snr_gap(s1, s5, 1.0) == pytest.approx(HIGH_SNR_GAP_1_5, abs=1e-8)


def test_high_snr_approximation_converges():
    sigma = OuVariance(2.0, 1.0)
    errs = [abs(capacity_no_csi(sigma, SnrScenario(r)).value
                - high_snr_approximation(sigma, SnrScenario(r)).value) for r in (1e2, 1e3, 1e4)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < errs[0] / 50
    with pytest.raises(DomainError):
        high_snr_approximation(sigma, SnrScenario(0.0))


def test_partial_csi_crossover_between_one_and_ten():
    rho_star, diffs = partial_csi_crossover(OuVariance(1.0, 1.0), OuVariance(5.0, 1.0),
                                            [0.01, 0.1, 1.0, 10.0, 100.0])
    assert 1.0 < rho_star < 10.0
    assert np.all(diffs[:3] > 0) and np.all(diffs[3:] < 0)
