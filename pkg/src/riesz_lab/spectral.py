"""Partial generalized Riesz products on torus grids and their exact Fourier coefficients."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .construction import StageGeometry
from .trigpoly import SparseTrigPoly, build_pk, convolve, modulus_squared

MIN_GRID = 1 << 14
MAX_GRID = 1 << 22


@dataclass
class GridDensity:
    """Samples of prod |P_n|^2 (``squared``) or prod |P_n| (``root``) at z_j = exp(2*pi*i*(j + shift)/N)."""

    N: int
    values: np.ndarray
    kind: str
    stages: tuple[int, ...] = ()
    aliased: bool = False
    shift: Fraction = Fraction(0)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def sup(self) -> float:
        return float(np.max(self.values))

    def masked_mean(self, mask: np.ndarray) -> float:
        """Grid approximation of the integral over F of the density."""
        return float(np.sum(self.values * mask) / self.N)

    def summary(self) -> dict:
        return {"N": self.N, "kind": self.kind, "stages": list(self.stages), "mean": self.mean, "sup": self.sup, "aliased": self.aliased, "shift": str(self.shift)}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "value"])
            for j, v in enumerate(self.values):
                w.writerow([j, repr(float(v))])


@dataclass
class CorrelationSeq:
    """Fourier coefficients sigma-hat(n) for |n| <= window."""

    window: int
    values: dict[int, object]
    exact: bool
    provenance: str

    def __getitem__(self, n: int):
        if abs(n) > self.window:
            raise KeyError(n)
        return self.values.get(n, Fraction(0) if self.exact else 0.0)

    def lags(self) -> range:
        return range(-self.window, self.window + 1)

    def max_abs_diff(self, other: "CorrelationSeq") -> float:
        w = min(self.window, other.window)
        return max(abs(complex(self[n]) - complex(other[n])) for n in range(-w, w + 1))

    def to_json(self) -> dict:
        return {
            "window": self.window,
            "exact": self.exact,
            "provenance": self.provenance,
            "values": {str(n): str(self[n]) if self.exact else complex(self[n]).real for n in self.lags()},
        }


# Rational grid offset whose points have order ~2^31 N.  On it no sample sits
# on z = 1 or another low-order root of unity, where every |P_k| can peak at
# once; that matters when stage heights exceed N and the grid cannot resolve
# the peak widths.
GENERIC_SHIFT = Fraction(1327217884, 2147483647)


def grid_eval(p: SparseTrigPoly, N: int, shift: Fraction = Fraction(0)) -> np.ndarray:
    """Complex samples of ``p`` on the N-point grid (optionally rotated by shift/N)."""
    return p.on_grid(N, shift)


def factor_span(geometry: StageGeometry, k: int) -> int:
    """Frequency span of |P_k|^2: largest minus smallest exponent of P_k."""
    col = geometry.column_offsets(k)
    return col[-1] - col[0]


def total_span(geometry: StageGeometry, subsequence: Sequence[int]) -> int:
    return sum(factor_span(geometry, k) for k in subsequence)


def _next_pow2_above(x: int) -> int:
    n = 1
    while n <= x:
        n <<= 1
    return n


def default_grid_size(geometry: StageGeometry, subsequence: Sequence[int]) -> int:
    if not subsequence:
        return MIN_GRID
    smallest = min(subsequence)
    return min(max(MIN_GRID, _next_pow2_above(4 * factor_span(geometry, smallest))), MAX_GRID)


def riesz_partial(geometry: StageGeometry, subsequence: Sequence[int], N: int | None = None, shift: Fraction = Fraction(0)) -> tuple[GridDensity, GridDensity]:
    """Grid samples of prod |P_n| and prod |P_n|^2 over the stages in ``subsequence``.

    Returns ``(root, squared)``.  ``aliased`` is set when N <= 2 * span, in
    which case grid means are no longer exact for the squared product.
    """
    stages = tuple(sorted(subsequence))
    if N is None:
        N = default_grid_size(geometry, stages)
    root = np.ones(N)
    for k in stages:
        root *= np.abs(grid_eval(build_pk(geometry, k), N, shift))
    aliased = N <= 2 * total_span(geometry, stages)
    shift = Fraction(shift)
    return GridDensity(N, root, "root", stages, aliased, shift), GridDensity(N, root * root, "squared", stages, aliased, shift)


def root_mean_converged(geometry: StageGeometry, subsequence: Sequence[int], N: int | None = None, tol: float = 1e-6, N_max: int = MAX_GRID) -> tuple[float, int, bool]:
    """Integral of prod |P_n| by grid doubling until successive means differ by < tol.

    Returns (mean, final N, converged).
    """
    if N is None:
        N = default_grid_size(geometry, subsequence)
    prev = riesz_partial(geometry, subsequence, N)[0].mean
    while 2 * N <= N_max:
        N *= 2
        cur = riesz_partial(geometry, subsequence, N)[0].mean
        if abs(cur - prev) < tol:
            return cur, N, True
        prev = cur
    return prev, N, False


def product_fourier_coeffs(geometry: StageGeometry, subsequence: Sequence[int], window: int | None = None) -> CorrelationSeq:
    """Exact coefficients of prod |P_n|^2 for |n| <= window by sparse convolution.

    Factors are multiplied from the highest stage down; at each step only
    frequencies within ``window + (span still to come)`` are kept, which
    cannot change any coefficient inside the window.
    """
    stages = sorted(subsequence, reverse=True)
    if window is None:
        window = 2 * geometry.heights[min(stages)] if stages else 0
    spans = [factor_span(geometry, k) for k in stages]
    remaining = sum(spans)
    acc = SparseTrigPoly({0: 1})
    for k, span in zip(stages, spans):
        remaining -= span
        acc = convolve(acc, modulus_squared(build_pk(geometry, k)), window + remaining)
    values = {n: acc.terms.get(n, Fraction(0)) for n in range(-window, window + 1)}
    return CorrelationSeq(window, values, True, "convolution")


def dft_coeffs(density: GridDensity, window: int) -> CorrelationSeq:
    """Fourier coefficients of a grid density by FFT (exact only without aliasing)."""
    spec = np.fft.fft(density.values) / density.N
    d = float(density.shift) / density.N
    values = {n: complex(spec[n % density.N] * np.exp(-2j * np.pi * n * d)) for n in range(-window, window + 1)}
    return CorrelationSeq(window, values, False, "grid-dft")
