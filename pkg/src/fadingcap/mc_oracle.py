"""Monte Carlo oracle for the closed-form spectrum and capacity pipeline.

Real and imaginary parts of the impulse response are sampled as independent
zero-mean Gaussian vectors on a midpoint time grid over ``[0, T]`` whose
covariance is the kernel evaluated pointwise. The frequency response is the
Riemann sum ``H(f) = sum_i h(t_i) exp(-j 2 pi f t_i) dt``.

Realizations come in blocks. Block ``k`` of a run draws from its own stream
``SeedSequence(seed, spawn_key=(k,))``, so results depend only on the seed
and block size, never on how many workers produced the blocks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .capacity import PowerAllocation, SnrScenario, capacity_no_csi, waterfill
from .channel import OuKernel, OuVariance
from .errors import NumericalError, UsageError
from .quadrature import composite_nodes

__all__ = [
    "ChannelRealization",
    "McEstimate",
    "ChannelSampler",
    "sample_realizations",
    "estimate_spectral_variance",
    "estimate_capacity",
    "estimate_capacities",
    "discretized_spectral_variance",
    "Check",
    "validate_ou",
]

MIN_GRID = 256
DEFAULT_GRID = 1024
DEFAULT_BLOCK = 1024


@dataclass(frozen=True)
class ChannelRealization:
    """A block of impulse responses sharing one time grid.

    ``h`` has shape ``(n, M)``; row ``i`` is ``X + jY`` at the times in
    ``tau_grid``.
    """

    tau_grid: np.ndarray
    h: np.ndarray

    @property
    def dtau(self):
        return float(self.tau_grid[1] - self.tau_grid[0])

    def __len__(self):
        return self.h.shape[0]

    def phase_matrix(self, f_hz):
        f = np.atleast_1d(np.asarray(f_hz, dtype=float))
        return np.exp(-2j * np.pi * np.outer(self.tau_grid, f)) * self.dtau

    def transform(self, f_hz, phase=None):
        """Frequency response at ``f_hz`` for every realization, shape ``(n, F)``.

        A precomputed :meth:`phase_matrix` for the same frequencies may be passed.
        """
        if phase is None:
            phase = self.phase_matrix(f_hz)
        return self.h @ phase


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with standard error ``std / sqrt(n)``; fields may be arrays."""

    value: float | np.ndarray
    std_error: float | np.ndarray
    n_realizations: int

    def z_score(self, target):
        return (self.value - target) / self.std_error


class _Moments:
    """Running count/mean/M2, merged block by block in a fixed order."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, samples):
        samples = np.asarray(samples, dtype=float)
        nb = samples.shape[0]
        if nb == 0:
            return
        mb = samples.mean(axis=0)
        m2b = ((samples - mb) ** 2).sum(axis=0)
        n = self.n + nb
        delta = mb - self.mean
        self.mean = self.mean + delta * nb / n
        self.m2 = self.m2 + m2b + delta * delta * self.n * nb / n
        self.n = n

    def estimate(self):
        if self.n < 2:
            raise UsageError("need at least two realizations for a standard error")
        std = np.sqrt(self.m2 / (self.n - 1))
        se = std / math.sqrt(self.n)
        if np.ndim(self.mean) == 0:
            return McEstimate(float(self.mean), float(se), self.n)
        return McEstimate(np.asarray(self.mean), np.asarray(se), self.n)


def _factor(cov):
    """Lower factor ``L`` with ``L L^T = cov``.

    Cholesky first, then with diagonal jitter ``1e-12 trace / M``, then a
    clipped eigendecomposition that tolerates round-off-level negative
    eigenvalues only.
    """
    m = cov.shape[0]
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-12 * np.trace(cov) / m
    try:
        return np.linalg.cholesky(cov + jitter * np.eye(m))
    except np.linalg.LinAlgError:
        pass
    lam, vec = np.linalg.eigh(cov)
    if lam.min() < -1e-10 * np.trace(cov):
        raise NumericalError(
            f"covariance matrix is not positive semidefinite (min eigenvalue {lam.min():.3e})"
        )
    return vec * np.sqrt(np.clip(lam, 0.0, None))


class ChannelSampler:
    """Draws impulse-response blocks for one kernel and time grid.

    The covariance factor is computed once and shared read-only.
    """

    def __init__(self, kernel, M=DEFAULT_GRID, T=None):
        M = int(M)
        if M < MIN_GRID:
            raise UsageError(f"time grid needs M >= {MIN_GRID}, got {M}")
        T = kernel.horizon if T is None else float(T)
        if T < kernel.horizon * (1 - 1e-12):
            raise UsageError(f"horizon T={T:g} is shorter than the kernel's {kernel.horizon:g}")
        self.kernel = kernel
        self.M = M
        self.T = T
        self.dtau = T / M
        self.tau_grid = (np.arange(M) + 0.5) * self.dtau
        self.covariance = kernel(self.tau_grid[:, None], self.tau_grid[None, :])
        self.factor = _factor(self.covariance)

    def block(self, seed, index, size):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
        xi = rng.standard_normal((2 * size, self.M))
        xy = xi @ self.factor.T
        h = xy[:size] + 1j * xy[size:]
        return ChannelRealization(self.tau_grid, h)

    def realizations(self, n, seed, block_size=DEFAULT_BLOCK, workers=1):
        """Yield ``n`` realizations in blocks, in block order."""
        n = int(n)
        if n < 1:
            raise UsageError("n must be positive")
        sizes = [block_size] * (n // block_size)
        if n % block_size:
            sizes.append(n % block_size)
        jobs = list(enumerate(sizes))
        if workers <= 1:
            for index, size in jobs:
                yield self.block(seed, index, size)
            return
        with ThreadPoolExecutor(max_workers=workers) as pool:
            yield from pool.map(lambda job: self.block(seed, *job), jobs)


def sample_realizations(kernel, M=DEFAULT_GRID, T=None, n=1000, seed=0, *,
                        block_size=DEFAULT_BLOCK, workers=1):
    """Stream of :class:`ChannelRealization` blocks totalling ``n`` draws."""
    sampler = ChannelSampler(kernel, M, T)
    return sampler.realizations(n, seed, block_size=block_size, workers=workers)


def estimate_spectral_variance(realizations, f_hz):
    """Mean and standard error of ``|H(f)|^2`` over the realizations."""
    acc = _Moments()
    scalar = np.ndim(f_hz) == 0
    phase = None
    for block in realizations:
        if phase is None:
            phase = block.phase_matrix(f_hz)
        resp = block.transform(f_hz, phase)
        power = np.abs(resp) ** 2
        acc.add(power[:, 0] if scalar else power)
    return acc.estimate()


def _band_nodes(W, breakpoints=(), panels=32, order=8):
    edges = set(np.linspace(-W / 2, W / 2, panels + 1).tolist())
    edges.update(b for b in breakpoints if -W / 2 < b < W / 2)
    return composite_nodes(np.array(sorted(edges)), order)


def _allocation_hz(allocation, W):
    """Return ``(p_hat, kinks)`` for an allocation spec on the band.

    ``None`` means equal power; a :class:`PowerAllocation` is mapped to the
    physical band; any other callable is used as ``p_hat`` directly. The
    normalized allocation ``p`` and the band one are the same function in
    different coordinates, so ``int p_hat df_hz = W int p df = 1``.
    """
    if allocation is None:
        return (lambda f: np.full(np.shape(f), 1.0 / W)), ()
    if isinstance(allocation, PowerAllocation):
        kinks = ()
        sigma = allocation.sigma
        if not allocation.uniform and allocation.rho > 0 and sigma.kind == "ou":
            theta = sigma.level_volume(allocation.nu / allocation.rho)
            kinks = (-theta * W / 2, theta * W / 2)
        return allocation.hz, kinks
    return allocation, ()


def estimate_capacities(realizations, cases, *, panels=32, order=8):
    """Monte Carlo average rate for several ``(allocation, scenario)`` pairs at once.

    Each realization's rate ``int log(1 + rho p_hat(f) |H(f)|^2) df`` over
    the band is computed by composite Gauss-Legendre quadrature in ``f``,
    with panel edges at the allocation's support boundary.
    """
    prepared = []
    all_nodes = []
    for allocation, scen in cases:
        p_hat, kinks = _allocation_hz(allocation, scen.W)
        nodes, weights = _band_nodes(scen.W, kinks, panels, order)
        prepared.append((p_hat(nodes), weights, scen.rho))
        all_nodes.append(nodes)
    # cases sharing quadrature nodes (e.g. equal power at several SNRs) share columns
    nodes, inverse = np.unique(np.concatenate(all_nodes), return_inverse=True)
    offsets = np.cumsum([0] + [len(n) for n in all_nodes])
    accs = [_Moments() for _ in cases]
    phase = None
    for block in realizations:
        if phase is None:
            phase = block.phase_matrix(nodes)
        gain = np.abs(block.transform(nodes, phase)) ** 2
        for k, (p_vals, weights, rho) in enumerate(prepared):
            g = gain[:, inverse[offsets[k]:offsets[k + 1]]]
            accs[k].add(np.log1p(rho * p_vals * g) @ weights)
    return [acc.estimate() for acc in accs]


def estimate_capacity(realizations, allocation, scen: SnrScenario, **kwargs):
    """Monte Carlo average rate for one allocation (``None`` = equal power)."""
    return estimate_capacities(realizations, [(allocation, scen)], **kwargs)[0]


def discretized_spectral_variance(kernel, M=DEFAULT_GRID, T=None, f_hz=0.0):
    """Exact ``E|H(f)|^2`` of the time-discretized model, no sampling involved."""
    T = kernel.horizon if T is None else float(T)
    dtau = T / M
    tau = (np.arange(M) + 0.5) * dtau
    cov = kernel(tau[:, None], tau[None, :])
    f = np.atleast_1d(np.asarray(f_hz, dtype=float))
    phase = np.exp(-2j * np.pi * np.outer(tau, f)) * dtau
    out = 2.0 * np.real(np.einsum("if,ij,jf->f", phase.conj(), cov, phase))
    return float(out[0]) if np.ndim(f_hz) == 0 else out


@dataclass(frozen=True)
class Check:
    """One Monte Carlo comparison against a closed-form target."""

    name: str
    estimate: McEstimate
    target: float
    z: float
    status: str  # "pass", "fail" or "insufficient"

    def line(self):
        e = self.estimate
        return (f"{self.status.upper():12s} {self.name}: mc={e.value:.6g} "
                f"se={e.std_error:.3g} closed={self.target:.6g} z={self.z:+.2f}")


def _judge(name, estimate, target, z_limit, max_rel_se):
    z = float(estimate.z_score(target))
    rel_se = estimate.std_error / max(abs(target), 1e-300)
    if rel_se > max_rel_se:
        # too noisy to trust either verdict; with few draws the standard error
        # itself is unreliable, so a large |z| is not taken as a failure
        status = "insufficient"
    elif abs(z) > z_limit:
        status = "fail"
    else:
        status = "pass"
    return Check(name, estimate, float(target), z, status)


def validate_ou(d, W=1.0, *, rhos=(0.1, 10.0), n=100_000, seed=0, M=DEFAULT_GRID, T=None,
                a=None, b=None, n_freqs=16, z_limit=4.0, max_rel_se=0.02,
                closed_form_scale=1.0, workers=1):
    """Compare the Monte Carlo oracle with the closed forms for one OU channel.

    Checks the spectrum at ``n_freqs`` frequencies and both the equal-power
    and water-filling rates at each SNR. ``closed_form_scale`` multiplies
    the closed-form spectrum targets only (a sensitivity knob; 1 for normal
    use).
    """
    kernel = OuKernel.normalized(d if a is None else None, W, a=a, b=b)
    sigma = OuVariance(kernel.d, W)
    sampler = ChannelSampler(kernel, M, T)
    checks = []

    freqs = np.linspace(-W / 2, W / 2, n_freqs + 1)[:-1] + W / (2 * n_freqs)
    est = estimate_spectral_variance(sampler.realizations(n, seed, workers=workers), freqs)
    closed = closed_form_scale * sigma.hz(freqs)
    for k, f in enumerate(freqs):
        single = McEstimate(float(est.value[k]), float(est.std_error[k]), est.n_realizations)
        checks.append(_judge(f"spectrum d={kernel.d:g} f={f:+.4f}", single, closed[k],
                             z_limit, max_rel_se))

    cases, targets, names = [], [], []
    for rho in rhos:
        scen = SnrScenario(rho, W)
        cases.append((None, scen))
        targets.append(capacity_no_csi(sigma, scen).value)
        names.append(f"capacity no-csi d={kernel.d:g} rho={rho:g}")
        sol = waterfill(sigma, scen)
        cases.append((sol.allocation, scen))
        targets.append(sol.capacity)
        names.append(f"capacity partial-csi d={kernel.d:g} rho={rho:g}")
    # an independent seed stream for the capacity pass
    estimates = estimate_capacities(sampler.realizations(n, seed + 1, workers=workers), cases)
    for name, e, target in zip(names, estimates, targets):
        checks.append(_judge(name, e, target, z_limit, max_rel_se))
    return checks
