"""Decreasing rearrangements and majorization for functions on (0, 1).

A function is represented by midpoint samples on a uniform grid, so the
Lebesgue measure of a set is the fraction of cells it contains, integrals
are means, and the decreasing rearrangement is a (stable, descending) sort.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UsageError

__all__ = [
    "SampledFunction",
    "RearrangementResult",
    "distribution_function",
    "decreasing_rearrangement",
    "recovery_map",
    "default_tolerance",
    "majorizes",
    "first_sample_dominates",
    "schur_order_witness",
]

DEFAULT_GRID_SIZE = 4096


@dataclass(frozen=True)
class SampledFunction:
    """Nonnegative function on (0, 1) given by midpoint samples of a uniform grid."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).ravel()
        if vals.size < 2:
            raise DomainError("a sampled function needs at least 2 grid cells")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise DomainError("sampled values must be finite and nonnegative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, func, grid_size=DEFAULT_GRID_SIZE):
        return cls(func(midpoints(grid_size)))

    @property
    def grid_size(self):
        return self.values.size

    def integral(self):
        return float(self.values.mean())

    def __len__(self):
        return self.values.size


def midpoints(n):
    """Cell midpoints of the uniform ``n``-cell grid on (0, 1)."""
    return (np.arange(n) + 0.5) / n


@dataclass(frozen=True)
class RearrangementResult:
    """Sorted samples plus the recovery permutation.

    ``sorted_values[permutation]`` reproduces the original samples, i.e.
    ``permutation[i]`` is the position of cell ``i`` in the rearranged order.
    """

    sorted_values: np.ndarray
    permutation: np.ndarray

    def recover(self):
        return self.sorted_values[self.permutation]


def distribution_function(x, s):
    """Measure of ``{t : x(t) > s}``."""
    return float(np.count_nonzero(x.values > s)) / x.grid_size


def decreasing_rearrangement(x):
    # stable sort on the negated values keeps tied cells in their original order,
    # which is the left-to-right tie rule of the recovery map
    order = np.argsort(-x.values, kind="stable")
    ranks = np.empty_like(order)
    ranks[order] = np.arange(order.size)
    return RearrangementResult(x.values[order], ranks)


def recovery_map(x):
    """Discrete recovery map as fractions in [0, 1): cell ``i`` maps to rank/N.

    Rank counts the cells with strictly larger values plus the tied cells to
    the left, so ``x*`` evaluated at the mapped point returns ``x`` back.
    """
    return decreasing_rearrangement(x).permutation / x.grid_size


def default_tolerance(x, y):
    """Absolute tolerance on prefix sums: ``1e-9 * N * max`` over both inputs."""
    top = max(float(x.values.max()), float(y.values.max()))
    return 1e-9 * x.grid_size * top


def _dominates(xs, ys, tol):
    px = np.cumsum(xs)
    py = np.cumsum(ys)
    return bool(np.all(px[:-1] >= py[:-1] - tol) and abs(px[-1] - py[-1]) <= tol)


def majorizes(x, y, tol=None):
    """Compare two sampled functions in the majorization order.

    Returns ``True`` if ``x`` majorizes ``y`` (prefix sums of the sorted
    samples of ``x`` dominate those of ``y`` and the totals agree, both
    within ``tol``), ``False`` if instead ``y`` majorizes ``x``, and ``None``
    when the two are incomparable. Equal functions give ``True``.

    Raises
    ------
    UsageError
        If the grids differ in size.
    """
    if x.grid_size != y.grid_size:
        raise UsageError(f"grid sizes differ: {x.grid_size} vs {y.grid_size}")
    if tol is None:
        tol = default_tolerance(x, y)
    xs = decreasing_rearrangement(x).sorted_values
    ys = decreasing_rearrangement(y).sorted_values
    if _dominates(xs, ys, tol):
        return True
    if _dominates(ys, xs, tol):
        return False
    return None


def first_sample_dominates(x, y, tol=0.0):
    """Strict check ``x*(0+) > y*(0+) + tol`` on the leading sorted samples."""
    return float(x.values.max()) > float(y.values.max()) + tol


def schur_order_witness(x, y, g):
    """Means of ``g`` composed with ``x`` and with ``y``.

    For concave ``g`` and ``x`` majorizing ``y`` the first entry never
    exceeds the second.
    """
    return float(np.mean(g(x.values))), float(np.mean(g(y.values)))
