"""Offset distributions xi_k on the symmetric integer windows X_k.

Two representations are supported: an explicit table of rational masses, and
the uniform law on ``{-half, ..., half}`` which is kept symbolic so that
windows far wider than memory (classic Ornstein takes t_k = h_{k-1}) remain
usable for sampling and for grid evaluation of the characteristic sum.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Union

import numpy as np

from .errors import ParamsError

# exact enumeration of a uniform law is only attempted below this support size
MAX_ENUMERABLE = 1 << 20

_INT64_SAFE = 1 << 62


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise ParamsError(f"pmf weight {value!r} must be given as an exact rational (int or 'a/b' string)")
    try:
        return Fraction(value)
    except (TypeError, ValueError) as exc:
        raise ParamsError(f"cannot read pmf weight {value!r}") from exc


def _randbelow(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    """Uniform integers in [0, n) for arbitrarily large n (object array when n is huge)."""
    if n <= _INT64_SAFE:
        return rng.integers(0, n, size=size, dtype=np.int64)
    nbytes = (n.bit_length() + 7) // 8
    excess = 8 * nbytes - n.bit_length()
    out = np.empty(size, dtype=object)
    for i in range(size):
        while True:
            v = int.from_bytes(rng.bytes(nbytes), "little") >> excess
            if v < n:
                out[i] = v
                break
    return out


def grid_points(j, N: int, shift: Fraction = Fraction(0)) -> tuple[np.ndarray, int]:
    """Integer numerators u_j and denominator D with z_j = exp(2*pi*i*u_j/D).

    The grid is z_j = exp(2*pi*i*(j + shift)/N), shift = a/b rational, so
    D = b*N and u_j = j*b + a.  Powers z_j^s then reduce exactly mod D.
    """
    shift = Fraction(shift)
    a, b = shift.numerator, shift.denominator
    return np.asarray(j, dtype=object) * b + a, b * N


def _phase(s: int, u: np.ndarray, D: int) -> np.ndarray:
    """z^s for z = exp(2*pi*i*u/D), with s*u reduced mod D in exact integers."""
    r = (u * (s % D)) % D
    return np.exp(2j * np.pi * r.astype(float) / D)


class TablePmf:
    """Explicit probability table ``{offset: rational mass}``."""

    kind = "table"

    def __init__(self, weights: Mapping[int, object]):
        atoms = {}
        for s, w in weights.items():
            w = _as_fraction(w)
            if w < 0:
                raise ParamsError(f"negative mass {w} at offset {s}")
            if w:
                atoms[int(s)] = atoms.get(int(s), Fraction(0)) + w
        if not atoms:
            raise ParamsError("pmf has no positive mass")
        self.atoms: tuple[tuple[int, Fraction], ...] = tuple(sorted(atoms.items()))

    @classmethod
    def point(cls, s: int = 0) -> "TablePmf":
        return cls({s: 1})

    def __repr__(self) -> str:
        body = ", ".join(f"{s}: {w}" for s, w in self.atoms)
        return f"TablePmf({{{body}}})"

    def __eq__(self, other) -> bool:
        return isinstance(other, TablePmf) and self.atoms == other.atoms

    def __hash__(self) -> int:
        return hash(self.atoms)

    @property
    def total(self) -> Fraction:
        return sum((w for _, w in self.atoms), Fraction(0))

    @property
    def support(self) -> tuple[int, int]:
        return self.atoms[0][0], self.atoms[-1][0]

    @property
    def support_size(self) -> int:
        return len(self.atoms)

    def max_mass(self) -> Fraction:
        return max(w for _, w in self.atoms)

    def sum_squares(self) -> Fraction:
        return sum((w * w for _, w in self.atoms), Fraction(0))

    def items(self):
        return iter(self.atoms)

    def autocorr(self, n: int) -> Fraction:
        table = dict(self.atoms)
        return sum((w * table.get(s + n, 0) for s, w in self.atoms), Fraction(0))

    def autocorr_all(self) -> dict[int, Fraction]:
        out: dict[int, Fraction] = {}
        for s, w in self.atoms:
            for u, v in self.atoms:
                out[u - s] = out.get(u - s, Fraction(0)) + w * v
        return dict(sorted(out.items()))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        values = np.array([s for s, _ in self.atoms], dtype=np.int64)
        probs = np.array([float(w) for _, w in self.atoms])
        probs /= probs.sum()
        idx = rng.choice(len(values), size=size, p=probs)
        return values[idx]

    def characteristic(self, j, N: int, shift: Fraction = Fraction(0)) -> np.ndarray:
        """sum_s xi(s) z^s at the grid points z_j = exp(2*pi*i*(j + shift)/N)."""
        u, D = grid_points(j, N, shift)
        out = np.zeros(u.shape, dtype=complex)
        for s, w in self.atoms:
            out += float(w) * _phase(s, u, D)
        return out

    def to_json(self):
        return {str(s): str(w) for s, w in self.atoms}


class UniformPmf:
    """Uniform law on ``{-half, ..., half}``; ``half`` may be any nonnegative int."""

    kind = "uniform"

    def __init__(self, half: int):
        if half < 0:
            raise ParamsError("uniform half-width must be >= 0")
        self.half = int(half)

    def __repr__(self) -> str:
        return f"UniformPmf(half={self.half})"

    def __eq__(self, other) -> bool:
        return isinstance(other, UniformPmf) and self.half == other.half

    def __hash__(self) -> int:
        return hash(("uniform", self.half))

    @property
    def size(self) -> int:
        return 2 * self.half + 1

    @property
    def total(self) -> Fraction:
        return Fraction(1)

    @property
    def support(self) -> tuple[int, int]:
        return -self.half, self.half

    @property
    def support_size(self) -> int:
        return self.size

    def max_mass(self) -> Fraction:
        return Fraction(1, self.size)

    def sum_squares(self) -> Fraction:
        return Fraction(1, self.size)

    def items(self):
        if self.size > MAX_ENUMERABLE:
            raise ParamsError(f"uniform law on {self.size} points is too wide to enumerate")
        w = Fraction(1, self.size)
        return ((s, w) for s in range(-self.half, self.half + 1))

    def autocorr(self, n: int) -> Fraction:
        n = abs(n)
        if n > 2 * self.half:
            return Fraction(0)
        return Fraction(self.size - n, self.size**2)

    def autocorr_all(self) -> dict[int, Fraction]:
        if self.size > MAX_ENUMERABLE:
            raise ParamsError(f"uniform law on {self.size} points is too wide to enumerate")
        return {n: self.autocorr(n) for n in range(-2 * self.half, 2 * self.half + 1)}

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        draws = _randbelow(rng, self.size, size)
        return draws - self.half

    def characteristic(self, j, N: int, shift: Fraction = Fraction(0)) -> np.ndarray:
        # normalized Dirichlet kernel sin(L*theta/2) / (L*sin(theta/2)), L = 2*half+1
        u, D = grid_points(j, N, shift)
        u = u % D
        L = self.size
        num = np.sin(np.pi * ((u * (L % (2 * D))) % (2 * D)).astype(float) / D)
        den = np.sin(np.pi * u.astype(float) / D) * float(L)
        out = np.ones(u.shape, dtype=complex)
        nz = u != 0
        out[nz] = num[nz] / den[nz]
        return out

    def to_json(self):
        return {"uniform": str(self.half)}


Pmf = Union[TablePmf, UniformPmf]
