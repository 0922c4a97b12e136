"""Sparse trigonometric polynomials with arbitrary-precision integer frequencies.

A polynomial is stored as ``sqrt(scale) * sum_f c_f z^f``.  Keeping the
common factor under a square root lets ``P_k = p_k^{-1/2} sum z^{e_j}`` be
represented with integer coefficients and ``scale = 1/p_k``, so that
``|P_k|^2`` comes out with exact rational coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Union

import numpy as np

from .construction import StageGeometry
from .distributions import MAX_ENUMERABLE, Pmf
from .errors import ParamsError, RealizationError

Coeff = Union[Fraction, int, complex, float]


def _is_exact(c) -> bool:
    return isinstance(c, (Fraction, int))


def _conj(c):
    return c.conjugate() if isinstance(c, complex) else c


class SparseTrigPoly:
    """Finite map frequency -> coefficient, times ``sqrt(scale)``."""

    __slots__ = ("terms", "scale")

    def __init__(self, terms: Mapping[int, Coeff] | Iterable[tuple[int, Coeff]] = (), scale: Fraction | int = 1):
        items = terms.items() if isinstance(terms, Mapping) else terms
        clean: dict[int, Coeff] = {}
        for f, c in items:
            f = int(f)
            clean[f] = clean.get(f, 0) + c
        self.terms: dict[int, Coeff] = {f: c for f, c in sorted(clean.items()) if c != 0}
        self.scale = Fraction(scale)
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def __repr__(self) -> str:
        lead = "" if self.scale == 1 else f"sqrt({self.scale})*"
        return f"SparseTrigPoly({lead}{self.terms})"

    def __len__(self) -> int:
        return len(self.terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, SparseTrigPoly) and self.scale == other.scale and self.terms == other.terms

    @property
    def exact(self) -> bool:
        return all(_is_exact(c) for c in self.terms.values())

    @property
    def frequencies(self) -> tuple[int, ...]:
        return tuple(self.terms)

    @property
    def span(self) -> int:
        """max |frequency| (0 for the zero polynomial)."""
        return max((abs(f) for f in self.terms), default=0)

    def coeff(self, n: int):
        """Actual coefficient at ``n``; exact when ``scale == 1``."""
        c = self.terms.get(n, 0)
        if self.scale == 1:
            return c
        return complex(c) * math.sqrt(self.scale) if isinstance(c, complex) else float(c) * math.sqrt(self.scale)

    def abs2_coeff(self, n: int):
        """|coefficient at n|^2, exact for exact polynomials."""
        c = self.terms.get(n, 0)
        if isinstance(c, complex):
            return abs(c) ** 2 * float(self.scale)
        return self.scale * c * c

    def mirror(self) -> "SparseTrigPoly":
        """p(1/z) conjugated coefficient-wise, i.e. the complex conjugate on the torus."""
        return SparseTrigPoly({-f: _conj(c) for f, c in self.terms.items()}, self.scale)

    def dilate(self, M: int) -> "SparseTrigPoly":
        """z -> z^M."""
        if M < 1:
            raise ValueError("dilation factor must be >= 1")
        return SparseTrigPoly({M * f: c for f, c in self.terms.items()}, self.scale)

    def __mul__(self, other: "SparseTrigPoly") -> "SparseTrigPoly":
        return convolve(self, other)

    def modulus_squared(self) -> "SparseTrigPoly":
        return modulus_squared(self)

    def on_grid(self, N: int, shift: Fraction = Fraction(0)) -> np.ndarray:
        """Values at z_j = exp(2*pi*i*(j + shift)/N), j < N.

        Frequencies are reduced mod N exactly; a rational ``shift = a/b``
        contributes the exact phase exp(2*pi*i*((f*a) mod bN)/(bN)).
        """
        if N < 1:
            raise ValueError("grid size must be >= 1")
        shift = Fraction(shift)
        a, D = shift.numerator, shift.denominator * N
        A = np.zeros(N, dtype=complex)
        for f, c in self.terms.items():
            if a:
                A[f % N] += complex(c) * np.exp(2j * np.pi * ((f * a) % D) / D)
            else:
                A[f % N] += complex(c)
        values = np.fft.ifft(A) * N
        if self.scale != 1:
            values *= math.sqrt(self.scale)
        return values

    def to_json(self) -> list:
        rows = []
        for f in self.terms:
            c = complex(self.coeff(f))
            rows.append([str(f), c.real, c.imag])
        return rows

    @classmethod
    def from_json(cls, rows) -> "SparseTrigPoly":
        return cls({int(f): complex(re, im) for f, re, im in rows})


def convolve(a: SparseTrigPoly, b: SparseTrigPoly, window: int | None = None) -> SparseTrigPoly:
    """Product a*b, optionally dropping frequencies with |f| > window."""
    out: dict[int, Coeff] = {}
    for f, c in a.terms.items():
        for g, d in b.terms.items():
            n = f + g
            if window is not None and abs(n) > window:
                continue
            out[n] = out.get(n, 0) + c * d
    return SparseTrigPoly(out, a.scale * b.scale)


def modulus_squared(p: SparseTrigPoly) -> SparseTrigPoly:
    """|p|^2 as a polynomial: c(n) = sum_f coeff(f) * conj(coeff(f - n))."""
    out: dict[int, Coeff] = {}
    items = list(p.terms.items())
    for f, c in items:
        for g, d in items:
            n = f - g
            out[n] = out.get(n, 0) + c * _conj(d)
    if p.scale != 1:
        out = {n: v * p.scale if _is_exact(v) else v * float(p.scale) for n, v in out.items()}
    return SparseTrigPoly(out)


FORMS = ("ornstein", "spacer")


def build_pk(geometry: StageGeometry, k: int, form: str = "ornstein") -> SparseTrigPoly:
    """The stage-k polynomial P_k.

    ``ornstein``: ``p^{-1/2} sum_j z^{j(h_k+t_k) + x_{k,j}}``;
    ``spacer``:   ``p^{-1/2} sum_j z^{-(j h_k + s_k(j))}``.
    The two exponent sets are negatives of each other.
    """
    if not 0 <= k < geometry.stages:
        raise RealizationError(f"stage {k} out of range 0..{geometry.stages - 1}")
    pk = geometry.p(k)
    if form == "ornstein":
        step = geometry.heights[k] + geometry.t[k]
        x = geometry.offsets[k]
        exps = [j * step + x[j] for j in range(pk)]
    elif form == "spacer":
        exps = [-e for e in geometry.column_offsets(k)]
    else:
        raise ValueError(f"form must be one of {FORMS}")
    return SparseTrigPoly({e: 1 for e in exps}, Fraction(1, pk))


@dataclass
class PhiFunction:
    """Fourier coefficients of phi_m = |sum_s xi_m(s) z^s|^2 (or of a limit).

    ``complete`` says whether ``coeffs`` holds the whole support; wide uniform
    laws are only tabulated on a window.  When ``xi`` is set, grid values are
    computed from the characteristic sum directly rather than from ``coeffs``.
    """

    coeffs: dict[int, Fraction]
    source: Union[int, str]
    complete: bool = True
    xi: Pmf | None = None

    def coeff(self, n: int) -> Fraction:
        if self.xi is not None:
            return self.xi.autocorr(n)
        return self.coeffs.get(n, Fraction(0))

    def total(self) -> Fraction:
        return sum(self.coeffs.values(), Fraction(0))

    def at_one(self) -> Fraction:
        if self.xi is not None:
            return self.xi.total ** 2
        return self.total()

    def on_grid(self, N: int, shift: Fraction = Fraction(0)) -> np.ndarray:
        """Real grid values of phi at z_j = exp(2*pi*i*(j + shift)/N)."""
        if self.xi is not None:
            return np.abs(self.xi.characteristic(np.arange(N), N, shift)) ** 2
        return SparseTrigPoly(self.coeffs).on_grid(N, shift).real

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "complete": self.complete,
            "coeffs": {str(n): str(v) for n, v in sorted(self.coeffs.items())},
        }


def phi_of_distribution(xi: Pmf, source: Union[int, str] = "xi", window: int = 64) -> PhiFunction:
    """phi-hat(n) = sum_s xi(s) xi(s+n); tabulated fully when the support is small."""
    if xi.support_size <= MAX_ENUMERABLE // 64 or xi.kind == "table":
        return PhiFunction(xi.autocorr_all(), source, True, xi)
    coeffs = {n: xi.autocorr(n) for n in range(-window, window + 1)}
    return PhiFunction({n: v for n, v in coeffs.items() if v}, source, False, xi)


def split_polys(p: int, M: int = 1) -> tuple[SparseTrigPoly, SparseTrigPoly]:
    """(F_p(z^M), G_p(z^M)) with F_p = |p^{-1/2} sum_{k=1}^{p-1} z^k|^2 and G_p = p^{-1} sum_{k=1}^{p-1} z^k."""
    if p < 2:
        raise ParamsError("p must be >= 2")
    base = SparseTrigPoly({k: 1 for k in range(1, p)}, Fraction(1, p))
    F = modulus_squared(base).dilate(M)
    G = SparseTrigPoly({k: Fraction(1, p) for k in range(1, p)}).dilate(M)
    return F, G


def l2_norm_squared(p: SparseTrigPoly):
    """integral |p|^2 d(lambda) by Parseval."""
    return sum((p.abs2_coeff(f) for f in p.terms), Fraction(0) if p.exact else 0.0)
