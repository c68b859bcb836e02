"""Acceptance checks; each test records one PASS/FAIL line in the terminal summary."""

import itertools

import mpmath
import numpy as np
from scipy import optimize

from fadingcap.capacity import (
    SnrScenario,
    capacity_no_csi,
    capacity_with_allocation,
    high_snr_gap,
    partial_csi_crossover,
    waterfill,
)
from fadingcap.channel import (
    OuVariance,
    crossing_frequency,
    cumulative_rearranged,
    rearranged_variance_ou,
)
from fadingcap.mc_oracle import validate_ou
from fadingcap.rearrange import first_sample_dominates, majorizes, midpoints
from fadingcap.specfun import expected_log1p_exp, psi, psi_inverse
from oracles import discretized_waterfill

D_FAMILY = (0.5, 1.0, 2.0, 5.0, 10.0)
RHO_GRID = np.logspace(-2, 3, 25)

# tolerances
ROUND_TRIP_REL = 1e-8
E1_ABS = 1e-10
ORDER_TOL = 1e-9
CROSSING_ABS = 1e-9
POWER_TOL = 1e-8
KKT_TOL = 1e-7
ORACLE_ABS = 1e-5
Z_LIMIT = 4.0
HIGH_SNR_ABS = 1e-3


def test_special_functions(criterion):
    with criterion(1, "psi inverse round trip and E[log(1+z)]") as c:
        x = np.logspace(-8, 8, 4001)
        rel = np.max(np.abs(psi_inverse(psi(x)) / x - 1))
        mpmath.mp.dps = 30
        oracle = float(mpmath.quad(lambda z: mpmath.log(1 + z) * mpmath.exp(-z),
                                   [0, 1, 10, mpmath.inf]))
        value = expected_log1p_exp(1.0)
        c.note(f"max rel round trip {rel:.2e}; value {value:.15f}; oracle gap {abs(value - oracle):.1e}")
        assert rel <= ROUND_TRIP_REL
        assert abs(value - 0.596347362323194) <= E1_ABS
        assert abs(value - oracle) <= E1_ABS


def test_no_csi_rate_grows_as_correlation_drops(criterion):
    with criterion(2, "no-CSI rate nondecreasing in d on a 25-point SNR grid") as c:
        table = np.array([[capacity_no_csi(OuVariance(d, 1.0), SnrScenario(r)).value
                           for r in RHO_GRID] for d in D_FAMILY])
        worst = float(np.min(np.diff(table, axis=0)))
        c.note(f"smallest step in d {worst:.3e}")
        assert worst >= -ORDER_TOL


def test_statistical_csi_crossover(criterion):
    with criterion(3, "statistical-CSI rates of d=1 and d=5 cross once") as c:
        s1, s5 = OuVariance(1.0, 1.0), OuVariance(5.0, 1.0)
        rho_star, diffs = partial_csi_crossover(s1, s5, RHO_GRID)
        assert rho_star is not None
        c.note(f"crossover rho* = {rho_star:.6g}")
        low = RHO_GRID <= rho_star / 2
        high = RHO_GRID >= 2 * rho_star
        assert low.any() and high.any()
        assert np.all(diffs[low] >= 0)
        assert np.all(diffs[high] <= 0)


def test_correlation_order_of_family(criterion):
    with criterion(4, "majorization order of the OU family and crossing frequency") as c:
        n = 4096
        for d1, d2 in itertools.combinations(D_FAMILY, 2):
            x, y = OuVariance(d1, 1.0).sample(n), OuVariance(d2, 1.0).sample(n)
            assert majorizes(x, y) is True, (d1, d2)
            assert first_sample_dominates(x, y), (d1, d2)
        s = np.linspace(0.1, 0.9, 9)
        xi = np.array([cumulative_rearranged(d, 1.0, s) for d in D_FAMILY])
        assert np.all(np.diff(xi, axis=0) < 0)
        root = optimize.bisect(lambda f: rearranged_variance_ou(1.0, 1.0, f)
                               - rearranged_variance_ou(2.0, 1.0, f), 1e-6, 1.0, xtol=1e-15)
        closed = crossing_frequency(1.0, 2.0, 1.0)
        c.note(f"crossing {closed:.12f} vs bisection {root:.12f}")
        assert abs(closed - root) <= CROSSING_ABS
        assert abs(closed - 0.315041219590478) <= CROSSING_ABS


def test_waterfilling_optimality(criterion):
    with criterion(5, "water-filling KKT, random allocations and concave-program oracle") as c:
        rng = np.random.default_rng(2024)
        n = 1024
        worst_gap, worst_kkt, worst_power, min_margin = 0.0, 0.0, 0.0, np.inf
        for d, rho in itertools.product((1.0, 5.0), (0.01, 0.1, 1.0, 10.0, 100.0)):
            sigma = OuVariance(d, 1.0)
            scen = SnrScenario(rho)
            sol = waterfill(sigma, scen)
            worst_kkt = max(worst_kkt, sol.kkt_residual)
            worst_power = max(worst_power, sol.power_residual)
            assert sol.power_residual <= POWER_TOL, (d, rho)
            assert sol.kkt_residual <= KKT_TOL, (d, rho)

            cells = sigma.rearranged(midpoints(n))
            ref, _ = discretized_waterfill(cells, rho)
            worst_gap = max(worst_gap, abs(ref - sol.capacity))
            assert abs(ref - sol.capacity) <= ORACLE_ABS, (d, rho, ref, sol.capacity)

            p_opt = sol.allocation.grid_values(n)
            p_opt *= 1.0 / p_opt.mean()
            best = capacity_with_allocation(cells, p_opt, scen)
            rivals = [rng.dirichlet(np.ones(n)) * n for _ in range(20)]
            rivals += [rng.dirichlet(np.full(n, 0.2)) * n for _ in range(15)]
            rivals += [rng.permutation(p_opt) for _ in range(15)]
            rates = [capacity_with_allocation(cells, p, scen) for p in rivals]
            min_margin = min(min_margin, best - max(rates))
            assert best > max(rates), (d, rho)
        c.note(f"max |oracle gap| {worst_gap:.1e}, max KKT {worst_kkt:.1e}, "
               f"max power {worst_power:.1e}, min margin over 50 random {min_margin:.1e}")


def test_active_volume_grows_with_snr(criterion):
    with criterion(6, "active volume nondecreasing in SNR, strictly below 1") as c:
        sigma = OuVariance(1.0, 1.0)
        rhos = 10.0 ** np.arange(-3, 4)
        theta = np.array([waterfill(sigma, SnrScenario(r)).theta for r in rhos])
        c.note("theta " + " ".join(f"{t:.4f}" for t in theta))
        assert np.all(np.diff(theta) >= 0)
        below = theta[:-1] < 1
        assert np.all(np.diff(theta)[below] > 0)


def test_monte_carlo_consistency(criterion):
    with criterion(7, "Monte Carlo spectrum and rates within 4 standard errors") as c:
        checks = []
        for d in (1.0, 5.0):
            checks += validate_ou(d, 1.0, rhos=(0.1, 10.0), n=100_000, M=1024, seed=0,
                                  z_limit=Z_LIMIT)
        worst = max(abs(ch.z) for ch in checks)
        bad = [ch.line() for ch in checks if ch.status != "pass"]
        c.note(f"{len(checks)} checks, max |z| {worst:.2f}")
        assert len(checks) == 2 * (16 + 4)
        assert not bad, bad


def test_high_snr_gap(criterion):
    with criterion(8, "high-SNR rate gap between d=1 and d=5") as c:
        s1, s5 = OuVariance(1.0, 1.0), OuVariance(5.0, 1.0)
        scen = SnrScenario(1e4)
        actual = capacity_no_csi(s1, scen).value - capacity_no_csi(s5, scen).value
        predicted = high_snr_gap(s1, s5, 1.0)
        c.note(f"actual {actual:.6f}, predicted {predicted:.6f}, residual {abs(actual - predicted):.2e}")
        assert abs(actual - predicted) <= HIGH_SNR_ABS
