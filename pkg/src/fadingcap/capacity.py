"""Average capacity with uninformed and statistically informed transmitters.

Capacities are in nats/s. With ``z ~ Exp(1)`` and the normalized spectrum
``sigma`` on (0, 1),

* no CSI (equal power ``1/W``): ``W * int E[log(1 + rho/W sigma(f) z)] df``
* statistical CSI: the same with the water-filling allocation ``p_o``.

The optimal allocation is computed on the rearranged domain, where the
active set is a prefix ``(0, theta)``. On it the KKT condition
``rho sigma* psi(rho sigma* p) = nu`` gives ``rho sigma* p = psi^-1(nu / (rho sigma*))``,
so the capacity integrand only needs ``psi^-1`` and never ``p`` itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .channel import GridVariance, SpectralVariance
from .errors import DomainError, NumericalError, UsageError
from .quadrature import integrate
from .specfun import expected_log1p_exp, psi, psi_inverse

__all__ = [
    "SnrScenario",
    "PowerAllocation",
    "WaterfillingSolution",
    "CapacityResult",
    "capacity_no_csi",
    "high_snr_approximation",
    "high_snr_gap",
    "waterfill",
    "capacity_partial_csi",
    "active_volume",
    "capacity_with_allocation",
    "snr_for_active_volume",
    "partial_csi_crossover",
]

QUAD_TOL = 1e-11
KKT_CHECK_POINTS = 513


@dataclass(frozen=True)
class SnrScenario:
    """Average SNR ``rho = P / (N0 W)`` and bandwidth ``W`` in Hz."""

    rho: float
    W: float = 1.0

    def __post_init__(self):
        rho, W = float(self.rho), float(self.W)
        if not math.isfinite(rho) or rho < 0:
            raise DomainError(f"rho must be finite and >= 0, got {self.rho!r}")
        if not math.isfinite(W) or W <= 0:
            raise DomainError(f"W must be finite and > 0, got {self.W!r}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "W", W)


@dataclass(frozen=True)
class CapacityResult:
    value: float
    scenario: SnrScenario
    method: str  # "no-csi", "partial-csi", "high-snr", "monte-carlo"

    def __float__(self):
        return self.value


def _check_bandwidth(sigma, scen):
    if not math.isclose(sigma.W, scen.W, rel_tol=1e-12):
        raise UsageError(f"spectrum is normalized for W={sigma.W}, scenario has W={scen.W}")


def _check_finite(values):
    if not np.all(np.isfinite(values)):
        raise NumericalError("non-finite spectral variance samples")
    return values


def capacity_no_csi(sigma: SpectralVariance, scen: SnrScenario, *, abs_tol=QUAD_TOL):
    """Average rate with equal power allocation ``p = 1/W``."""
    _check_bandwidth(sigma, scen)
    W, rho = scen.W, scen.rho
    if rho == 0:
        value = 0.0
    elif sigma.is_constant:
        value = W * expected_log1p_exp(rho / W * float(sigma(0.5)))
    elif isinstance(sigma, GridVariance):
        value = W * float(np.mean(expected_log1p_exp(rho / W * _check_finite(sigma.values))))
    else:
        def integrand(f):
            return expected_log1p_exp(rho / W * _check_finite(sigma(f)))

        value = W * integrate(integrand, 0.0, 1.0, breakpoints=(0.5,), abs_tol=abs_tol / W)
    return CapacityResult(value, scen, "no-csi")


def high_snr_approximation(sigma: SpectralVariance, scen: SnrScenario):
    """No-CSI rate with the 1 dropped inside the logarithm.

    ``E[log(a z)] = log(a) - gamma`` for unit-mean exponential ``z``.
    """
    _check_bandwidth(sigma, scen)
    if scen.rho <= 0:
        raise DomainError("the high-SNR approximation needs rho > 0")
    W = scen.W
    mean_log = _mean_log(sigma)
    value = W * (math.log(scen.rho / W) + mean_log - np.euler_gamma)
    return CapacityResult(float(value), scen, "high-snr")


def _mean_log(sigma):
    if isinstance(sigma, GridVariance):
        vals = sigma.values
        if np.any(vals <= 0):
            raise DomainError("log of a nonpositive spectral variance")
        return float(np.mean(np.log(vals)))

    def integrand(f):
        vals = sigma(f)
        if np.any(vals <= 0):
            raise DomainError("log of a nonpositive spectral variance")
        return np.log(vals)

    return integrate(integrand, 0.0, 1.0, breakpoints=(0.5,), abs_tol=QUAD_TOL)


def high_snr_gap(sigma1: SpectralVariance, sigma2: SpectralVariance, W: float):
    """SNR-independent limit ``W * int log(sigma1/sigma2) df`` of the no-CSI rate gap.

    Nonpositive whenever ``sigma1`` majorizes ``sigma2``.
    """
    for s in (sigma1, sigma2):
        if not math.isclose(s.W, W, rel_tol=1e-12):
            raise UsageError(f"spectrum normalized for W={s.W}, gap requested for W={W}")
    grids = [s for s in (sigma1, sigma2) if isinstance(s, GridVariance)]
    if grids:
        n = grids[0].grid_size
        if any(g.grid_size != n for g in grids):
            raise UsageError("grid-backed spectra must share the grid size")
        a, b = sigma1.sample(n).values, sigma2.sample(n).values
        if np.any(a <= 0) or np.any(b <= 0):
            raise DomainError("high_snr_gap requires strictly positive spectra")
        return float(W * np.mean(np.log(a / b)))

    def integrand(f):
        a, b = sigma1(f), sigma2(f)
        if np.any(a <= 0) or np.any(b <= 0):
            raise DomainError("high_snr_gap requires strictly positive spectra")
        return np.log(a / b)

    return W * integrate(integrand, 0.0, 1.0, breakpoints=(0.5,), abs_tol=QUAD_TOL / W)


@dataclass(frozen=True)
class PowerAllocation:
    """Water-filling allocation ``p*`` on the rearranged domain.

    ``__call__`` evaluates ``p*``; :meth:`original` maps back to the
    original frequency order through the recovery map of ``sigma``, and
    :meth:`hz` gives the allocation on the physical band.
    """

    sigma: SpectralVariance
    rho: float
    nu: float
    uniform: bool = False

    def __call__(self, f):
        f = np.asarray(f, dtype=float)
        if self.uniform:
            out = np.full(f.shape, 1.0 / self.sigma.W)
        else:
            out = _allocation(self.sigma.rearranged(f), self.rho, self.nu)
        return float(out) if out.ndim == 0 else out

    def original(self, f):
        return self(self.sigma.recovery(f))

    def hz(self, f_hz):
        return self.original(np.asarray(f_hz, dtype=float) / self.sigma.W + 0.5)

    def grid_values(self, n):
        """Midpoint values on the ``n``-cell grid of the rearranged domain."""
        return self((np.arange(n) + 0.5) / n)


def _effective_snr(level, rho, nu):
    """``rho sigma* p*`` on the active set, 0 elsewhere."""
    gain = rho * np.asarray(level, dtype=float)
    out = np.zeros_like(gain)
    on = gain > nu
    if on.any():
        out[on] = psi_inverse(nu / gain[on])
    return out


def _allocation(level, rho, nu):
    gain = rho * np.asarray(level, dtype=float)
    x = _effective_snr(level, rho, nu)
    return np.where(x > 0, x / np.where(gain > 0, gain, 1.0), 0.0)


@dataclass(frozen=True)
class WaterfillingSolution:
    allocation: PowerAllocation
    nu: float
    theta: float
    kkt_residual: float
    power_residual: float
    capacity: float
    scenario: SnrScenario
    degenerate: bool = False
    diagnostics: dict = field(default_factory=dict, compare=False)


def _power(sigma, rho, nu, theta, rel_tol=1e-11):
    """Total allocated power ``int_0^theta p*(f) df``.

    The tolerance is relative to the budget, and widened at very low SNR:
    there the effective SNR ``x`` is tiny and ``p*`` carries rounding noise of
    relative size ``eps / x`` from inverting ``psi`` next to 1.
    """
    if isinstance(sigma, GridVariance):
        return float(np.mean(_allocation(sigma.sorted_values, rho, nu)))
    if theta <= 0:
        return 0.0
    x_peak = float(_effective_snr(sigma.peak, rho, nu))
    tol = max(rel_tol, 8 * np.finfo(float).eps / max(x_peak, 1e-300))
    # while bracketing the water level the power can be far above the budget
    magnitude = max(1.0 / sigma.W, theta * float(_allocation(sigma.peak, rho, nu)))
    return integrate(lambda f: _allocation(sigma.rearranged(f), rho, nu),
                     0.0, theta, abs_tol=tol * magnitude)


def _partial_capacity(sigma, rho, nu, theta, W, abs_tol=QUAD_TOL):
    if isinstance(sigma, GridVariance):
        x = _effective_snr(sigma.sorted_values, rho, nu)
        return W * float(np.mean(expected_log1p_exp(x)))
    if theta <= 0:
        return 0.0
    return W * integrate(lambda f: expected_log1p_exp(_effective_snr(sigma.rearranged(f), rho, nu)),
                         0.0, theta, abs_tol=abs_tol / W)


def _kkt_residual(sigma, rho, nu, W):
    if isinstance(sigma, GridVariance):
        level = sigma.sorted_values
    else:
        level = sigma.rearranged(np.linspace(0.0, 1.0, KKT_CHECK_POINTS))
    gain = rho * level
    x = _effective_snr(level, rho, nu)
    on = x > 0
    resid = 0.0
    if on.any():
        # stationarity on the active set: rho sigma* psi(rho sigma* p) = nu
        resid = float(np.max(np.abs(gain[on] * psi(x[on]) - nu)))
    if (~on).any():
        # slackness off it: marginal gain at p = 0 must not exceed nu
        resid = max(resid, float(np.max(np.maximum(gain[~on] - nu, 0.0))))
    return resid


def waterfill(sigma: SpectralVariance, scen: SnrScenario):
    """Optimal statistical-CSI power allocation.

    The water level ``nu`` is found by a bracketed root search on the total
    power, which is continuous and strictly decreasing in ``nu`` and
    vanishes at ``nu = rho sigma*(0+)``. ``theta`` is the exact measure of
    ``{f : rho sigma*(f) > nu}``, not a count of grid cells.

    At ``rho = 0`` every feasible allocation is optimal; a uniform one is
    returned with ``degenerate=True`` and zero capacity.
    """
    _check_bandwidth(sigma, scen)
    rho, W = scen.rho, scen.W
    target = 1.0 / W

    if rho == 0 or sigma.is_constant:
        level = sigma.peak
        if level <= 0:
            raise DomainError("spectral variance is identically zero")
        x = rho * level / W
        nu = rho * level * psi(x)
        degenerate = rho == 0
        # at rho = 0 report the small-SNR limit of theta: nothing is active
        # unless the spectrum is flat
        theta = 1.0 if sigma.is_constant else 0.0
        capacity = W * expected_log1p_exp(x)
        alloc = PowerAllocation(sigma, rho, nu, uniform=True)
        return WaterfillingSolution(alloc, nu, theta, 0.0, 0.0, capacity, scen,
                                    degenerate=degenerate)

    peak = sigma.peak
    if not math.isfinite(peak) or peak <= 0:
        raise DomainError("spectral variance must have a positive finite peak")
    nu_hi = rho * peak

    def excess(nu):
        return _power(sigma, rho, nu, sigma.level_volume(nu / rho)) - target

    nu_lo = 0.5 * nu_hi
    for _ in range(2000):
        if excess(nu_lo) >= 0:
            break
        nu_lo *= 0.5
    else:
        raise NumericalError("water level could not be bracketed")
    if excess(nu_lo) == 0:
        nu = nu_lo
    else:
        nu = brentq(excess, nu_lo, nu_hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                    maxiter=500)
    theta = sigma.level_volume(nu / rho)
    power = _power(sigma, rho, nu, theta)
    alloc = PowerAllocation(sigma, rho, nu)
    capacity = _partial_capacity(sigma, rho, nu, theta, W)
    return WaterfillingSolution(
        alloc, nu, theta,
        kkt_residual=_kkt_residual(sigma, rho, nu, W),
        power_residual=abs(power - target),
        capacity=capacity,
        scenario=scen,
    )


def capacity_partial_csi(sigma: SpectralVariance, scen: SnrScenario):
    """Average rate with the water-filling allocation; never below the no-CSI rate."""
    return CapacityResult(waterfill(sigma, scen).capacity, scen, "partial-csi")


def active_volume(sigma: SpectralVariance, scen: SnrScenario):
    """Measure of the frequencies receiving positive power."""
    return waterfill(sigma, scen).theta


def capacity_with_allocation(sigma_values, p_values, scen: SnrScenario):
    """Rate of an arbitrary allocation, both given as cell values on one grid.

    The allocation must satisfy ``p >= 0`` and ``mean(p) <= 1/W``.
    """
    s = np.asarray(sigma_values, dtype=float)
    p = np.asarray(p_values, dtype=float)
    if s.shape != p.shape:
        raise UsageError("spectrum and allocation grids differ")
    if np.any(p < 0):
        raise DomainError("allocation must be nonnegative")
    if p.mean() > 1.0 / scen.W * (1 + 1e-12):
        raise DomainError("allocation exceeds the power budget")
    return scen.W * float(np.mean(expected_log1p_exp(scen.rho * s * p)))


def snr_for_active_volume(sigma: SpectralVariance, eps, W=None, *, rho_max=1e12):
    """SNR at which the active volume reaches ``eps``; below it ``theta < eps``."""
    W = sigma.W if W is None else W
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")

    def gap(log_rho):
        return waterfill(sigma, SnrScenario(math.exp(log_rho), W)).theta - eps

    lo, hi = math.log(1e-12), math.log(rho_max)
    if gap(hi) < 0:
        raise NumericalError(f"active volume stays below {eps} up to rho={rho_max:g}")
    if gap(lo) >= 0:
        return math.exp(lo)
    return math.exp(brentq(gap, lo, hi, xtol=1e-13))


def partial_csi_crossover(sigma1, sigma2, rhos, W=None):
    """Locate the SNR where the statistical-CSI rates of two spectra cross.

    Returns ``(rho_star, diffs)`` where ``diffs[i] = C_part(sigma1) -
    C_part(sigma2)`` at ``rhos[i]`` and ``rho_star`` is the root of the
    difference between the last nonnegative and the first negative grid
    point (``None`` if the sign never flips).
    """
    W = sigma1.W if W is None else W
    rhos = np.asarray(rhos, dtype=float)

    def diff(rho):
        scen = SnrScenario(rho, W)
        return waterfill(sigma1, scen).capacity - waterfill(sigma2, scen).capacity

    diffs = np.array([diff(r) for r in rhos])
    flips = np.nonzero((diffs[:-1] >= 0) & (diffs[1:] < 0))[0]
    if flips.size == 0:
        return None, diffs
    i = int(flips[0])
    if diffs[i] == 0:
        return float(rhos[i]), diffs
    # log-SNR to 1e-9, i.e. rho_star to relative 1e-9
    root = brentq(lambda lr: diff(math.exp(lr)), math.log(rhos[i]), math.log(rhos[i + 1]),
                  xtol=1e-9)
    return math.exp(root), diffs
