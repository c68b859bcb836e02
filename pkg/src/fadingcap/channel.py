"""Covariance kernels and spectral fading variances.

Frequencies come in two flavours. ``f_hz`` lives in the physical band
``(-W/2, W/2)``; plain ``f`` lives in the normalized interval ``(0, 1)``
obtained by ``f = f_hz / W + 1/2``. A :class:`SpectralVariance` is a
callable on the normalized interval, which integrates to ``1/W`` when the
band-limited spectrum integrates to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError, UsageError
from .quadrature import composite_nodes
from .rearrange import SampledFunction, decreasing_rearrangement, midpoints

__all__ = [
    "OuKernel",
    "SpectralVariance",
    "OuVariance",
    "UncorrelatedVariance",
    "GridVariance",
    "normalization_constant",
    "spectral_variance_ou",
    "rearranged_variance_ou",
    "crossing_frequency",
    "cumulative_rearranged",
    "ou_variance",
    "uncorrelated_scattering_variance",
    "numeric_spectrum",
    "spectral_variance_numeric",
]

TAIL_TOLERANCE = 1e-12


def _positive(name, value):
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")
    return value


def normalization_constant(d, W):
    """Scale ``c`` making the OU spectrum integrate to one over the band."""
    d = _positive("d", d)
    W = _positive("W", W)
    return math.pi / (2.0 * math.atan(math.pi * W / d))


def _check_range(f, lo, hi, what):
    arr = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < lo) or np.any(arr > hi):
        raise DomainError(f"{what} must lie in [{lo:g}, {hi:g}]")
    return arr


def spectral_variance_ou(d, W, f_hz):
    """Lorentzian spectrum ``2 c d / (d^2 + (2 pi f)^2)`` on the physical band."""
    c = normalization_constant(d, W)
    f = _check_range(f_hz, -W / 2, W / 2, "frequency")
    out = 2.0 * c * d / (d * d + (2.0 * math.pi * f) ** 2)
    return float(out) if out.ndim == 0 else out


def rearranged_variance_ou(d, W, f):
    """Decreasing rearrangement of the normalized OU spectrum on [0, 1]."""
    d = _positive("d", d)
    W = _positive("W", W)
    f = _check_range(f, 0.0, 1.0, "normalized frequency")
    scale = math.pi * d / math.atan(math.pi * W / d)
    out = scale / (d * d + (math.pi * W * f) ** 2)
    return float(out) if out.ndim == 0 else out


def crossing_frequency(d1, d2, W):
    """Normalized frequency where the rearranged spectra for ``d1 < d2`` cross.

    Left of it the more correlated (smaller ``d``) spectrum is larger.
    """
    d1 = _positive("d1", d1)
    d2 = _positive("d2", d2)
    W = _positive("W", W)
    if not d1 < d2:
        raise UsageError(f"crossing_frequency needs d1 < d2, got d1={d1}, d2={d2}")
    a1 = math.atan(math.pi * W / d1)
    a2 = math.atan(math.pi * W / d2)
    ratio = (d2 * a2 - d1 * a1) / (d2 * a1 - d1 * a2)
    return math.sqrt(d1 * d2 * ratio) / (math.pi * W)


def cumulative_rearranged(d, W, s):
    """``integral_0^s`` of the rearranged OU spectrum; equals ``1/W`` at ``s = 1``."""
    d = _positive("d", d)
    W = _positive("W", W)
    s = _check_range(s, 0.0, 1.0, "s")
    out = np.arctan(math.pi * W * s / d) / (W * math.atan(math.pi * W / d))
    return float(out) if out.ndim == 0 else out


class SpectralVariance:
    """Spectral fading variance on the normalized band (0, 1).

    Subclasses supply the function, its decreasing rearrangement, the
    volume of its super-level sets and the recovery map from the original
    domain into the rearranged one.
    """

    kind = "abstract"

    def __init__(self, W):
        self.W = _positive("W", W)

    def __call__(self, f):
        raise NotImplementedError

    def rearranged(self, f):
        raise NotImplementedError

    def level_volume(self, level):
        """Measure of ``{f : sigma(f) > level}``."""
        raise NotImplementedError

    def recovery(self, f):
        """Point of the rearranged domain carrying the value ``sigma(f)``."""
        raise NotImplementedError

    @property
    def peak(self):
        """``sigma*(0+)``."""
        return float(self.rearranged(0.0))

    @property
    def is_constant(self):
        return False

    def hz(self, f_hz):
        """The unscaled spectrum on the physical band."""
        f = _check_range(f_hz, -self.W / 2, self.W / 2, "frequency")
        return self(f / self.W + 0.5)

    def _exact_mass(self, values):
        # the midpoint rule misses the integral by O(1/N^2); rescaling removes that
        # mismatch so sampled spectra with equal integrals have equal sums, which
        # majorization comparisons require
        total = self.integral()
        return values * (total / values.mean())

    def sample(self, n):
        """Midpoint samples on ``n`` cells, rescaled to carry the exact integral."""
        return SampledFunction(self._exact_mass(np.asarray(self(midpoints(n)), dtype=float)))

    def sample_rearranged(self, n):
        return SampledFunction(self._exact_mass(
            np.asarray(self.rearranged(midpoints(n)), dtype=float)))

    def integral(self):
        raise NotImplementedError


class OuVariance(SpectralVariance):
    """Normalized spectrum of the attenuated Ornstein-Uhlenbeck channel."""

    kind = "ou"

    def __init__(self, d, W):
        super().__init__(W)
        self.d = _positive("d", d)
        self.c = normalization_constant(self.d, self.W)
        self._scale = math.pi * self.d / math.atan(math.pi * self.W / self.d)

    def __repr__(self):
        return f"OuVariance(d={self.d!r}, W={self.W!r})"

    def __call__(self, f):
        f = np.asarray(f, dtype=float)
        w = 2.0 * math.pi * self.W * (f - 0.5)
        out = 2.0 * self.c * self.d / (self.d ** 2 + w * w)
        return float(out) if out.ndim == 0 else out

    def rearranged(self, f):
        f = np.asarray(f, dtype=float)
        out = self._scale / (self.d ** 2 + (math.pi * self.W * f) ** 2)
        return float(out) if out.ndim == 0 else out

    def level_volume(self, level):
        if level <= 0:
            return 1.0
        sq = self._scale / level - self.d ** 2
        if sq <= 0:
            return 0.0
        return min(1.0, math.sqrt(sq) / (math.pi * self.W))

    def recovery(self, f):
        return np.abs(2.0 * np.asarray(f, dtype=float) - 1.0)

    def integral(self):
        return float(cumulative_rearranged(self.d, self.W, 1.0))


class UncorrelatedVariance(SpectralVariance):
    """Flat spectrum of uncorrelated scattering, ``sigma = 1/W``."""

    kind = "uncorrelated"

    def __repr__(self):
        return f"UncorrelatedVariance(W={self.W!r})"

    @property
    def value(self):
        return 1.0 / self.W

    @property
    def is_constant(self):
        return True

    def __call__(self, f):
        f = np.asarray(f, dtype=float)
        out = np.full(f.shape, self.value)
        return float(out) if out.ndim == 0 else out

    rearranged = __call__

    def level_volume(self, level):
        return 1.0 if level < self.value else 0.0

    def recovery(self, f):
        # every value is tied, so the recovery map is the identity
        return np.asarray(f, dtype=float)

    def integral(self):
        return self.value


class GridVariance(SpectralVariance):
    """Piecewise-constant spectrum given by cell values on a uniform grid."""

    kind = "grid"

    def __init__(self, samples, W, normalize=False):
        super().__init__(W)
        if not isinstance(samples, SampledFunction):
            samples = SampledFunction(samples)
        if normalize:
            mean = samples.integral()
            if mean <= 0:
                raise DomainError("cannot normalize an identically zero spectrum")
            samples = SampledFunction(samples.values / (mean * self.W))
        self.samples = samples
        rearr = decreasing_rearrangement(samples)
        self.sorted_values = rearr.sorted_values
        self.ranks = rearr.permutation

    def __repr__(self):
        return f"GridVariance(N={self.grid_size}, W={self.W!r})"

    @property
    def values(self):
        return self.samples.values

    @property
    def grid_size(self):
        return self.samples.grid_size

    @property
    def is_constant(self):
        return bool(np.all(self.values == self.values[0]))

    def _cell(self, f):
        f = np.asarray(f, dtype=float)
        return np.clip((f * self.grid_size).astype(int), 0, self.grid_size - 1)

    def __call__(self, f):
        out = self.values[self._cell(f)]
        return float(out) if out.ndim == 0 else out

    def rearranged(self, f):
        out = self.sorted_values[self._cell(f)]
        return float(out) if out.ndim == 0 else out

    def level_volume(self, level):
        return float(np.count_nonzero(self.values > level)) / self.grid_size

    def recovery(self, f):
        f = np.asarray(f, dtype=float)
        cell = self._cell(f)
        return (self.ranks[cell] + (f * self.grid_size - cell)) / self.grid_size

    def integral(self):
        return self.samples.integral()

    def sample(self, n):
        if n == self.grid_size:
            return self.samples
        return super().sample(n)

    def sample_rearranged(self, n):
        if n == self.grid_size:
            return SampledFunction(self.sorted_values)
        return super().sample_rearranged(n)


def ou_variance(d, W=1.0):
    return OuVariance(d, W)


def uncorrelated_scattering_variance(W=1.0):
    """Constant spectrum ``1/W``; majorized by every normalized spectrum."""
    return UncorrelatedVariance(W)


@dataclass(frozen=True)
class OuKernel:
    """Covariance of an exponentially attenuated Ornstein-Uhlenbeck process.

    ``R(t, t') = c exp(-a |t - t'|) b exp(-b (t + t'))`` for ``t, t' >= 0``
    and zero otherwise. ``a`` sets the correlation decay with delay
    separation, ``b`` the power decay; spectrally only ``d = a + b`` matters.
    """

    a: float
    b: float
    c: float = 1.0

    def __post_init__(self):
        for name in ("a", "b", "c"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, val)
        if self.a < 0:
            raise DomainError("a must be nonnegative")
        if self.b <= 0:
            raise DomainError("b must be positive")
        if self.c <= 0:
            raise DomainError("c must be positive")

    @classmethod
    def normalized(cls, d=None, W=1.0, *, a=None, b=None):
        """Kernel whose spectrum integrates to one over the band of width ``W``.

        Give either ``d`` (split evenly, ``a = b = d/2``) or both ``a`` and ``b``.
        """
        if a is None and b is None:
            if d is None:
                raise UsageError("give d or both a and b")
            d = _positive("d", d)
            a = b = d / 2.0
        elif a is None or b is None:
            raise UsageError("a and b must be given together")
        elif d is not None and not math.isclose(a + b, d):
            raise UsageError(f"a + b = {a + b} does not match d = {d}")
        return cls(a, b, normalization_constant(a + b, W))

    @property
    def d(self):
        return self.a + self.b

    @property
    def horizon(self):
        """Default time truncation ``20/b``; the neglected tail is ``exp(-40)``."""
        return 20.0 / self.b

    @property
    def energy(self):
        """Mean energy ``2 * integral R(t, t) dt`` of the process (equals ``c``)."""
        return self.c

    def scaled(self, factor):
        return OuKernel(self.a, self.b, self.c * factor)

    def __call__(self, t, tp):
        t = np.asarray(t, dtype=float)
        tp = np.asarray(tp, dtype=float)
        support = (t >= 0) & (tp >= 0)
        tt = np.where(support, t, 0.0)
        ttp = np.where(support, tp, 0.0)
        val = self.c * self.b * np.exp(-self.a * np.abs(tt - ttp) - self.b * (tt + ttp))
        return np.where(support, val, 0.0)

    def spectrum(self, W):
        return OuVariance(self.d, W)


def _tail_fraction(kernel, horizon, order=16):
    """Share of the diagonal energy beyond ``horizon`` (estimated on [T, 3T])."""
    nodes, weights = composite_nodes(np.linspace(0.0, horizon, 65), order)
    head = np.sum(weights * kernel(nodes, nodes))
    nodes, weights = composite_nodes(np.linspace(horizon, 3 * horizon, 129), order)
    tail = np.sum(weights * kernel(nodes, nodes))
    return tail / (head + tail)


def numeric_spectrum(kernel, f_hz, *, horizon=None, order=10):
    """``2 * double integral of R(t,t') cos(2 pi (t - t') f)`` by quadrature.

    The integrand is symmetric in ``(t, t')`` so only ``t >= t'`` is
    integrated, writing ``t = t' + u``; this keeps the kink of ``|t - t'|``
    on the boundary of the domain. Both variables use composite
    Gauss-Legendre panels no wider than ``1 / max(d, 2 pi |f|)``.

    Raises
    ------
    NumericalError
        If the kernel energy beyond the truncation horizon is not negligible.
    """
    f = np.atleast_1d(np.asarray(f_hz, dtype=float))
    T = kernel.horizon if horizon is None else _positive("horizon", horizon)
    tail = _tail_fraction(kernel, T)
    if tail > TAIL_TOLERANCE:
        raise NumericalError(
            f"truncation at T={T:g} leaves tail energy fraction {tail:.3e} "
            f"(limit {TAIL_TOLERANCE:g}); increase the horizon"
        )
    width = 1.0 / max(kernel.d, 2.0 * math.pi * float(np.max(np.abs(f))))
    panels = max(1, math.ceil(T / width))
    edges = np.linspace(0.0, T, panels + 1)
    outer, w_outer = composite_nodes(edges, order)
    # inner variable u in [0, T - t'], mapped from a fixed grid on [0, 1]
    s, w_s = composite_nodes(edges / T, order)
    span = T - outer
    u = span[:, None] * s[None, :]
    weight = (w_outer * span)[:, None] * w_s[None, :]
    R = kernel(outer[:, None] + u, outer[:, None]) * weight
    out = np.array([4.0 * np.sum(R * np.cos(2.0 * math.pi * fk * u)) for fk in f])
    return float(out[0]) if np.ndim(f_hz) == 0 else out


def spectral_variance_numeric(kernel, W, grid_size=128, *, horizon=None):
    """Grid-backed spectrum from the time-domain kernel at cell midpoints."""
    W = _positive("W", W)
    f_hz = W * (midpoints(grid_size) - 0.5)
    return GridVariance(numeric_spectrum(kernel, f_hz, horizon=horizon), W)
