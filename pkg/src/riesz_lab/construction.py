"""Ornstein parameters, tower heights, spacers and random spacer realizations.

Stages are indexed ``k = 0, ..., K-1``.  Stage ``k`` cuts the height-``h_k``
column into ``p_k`` subcolumns and puts ``a_i^(k) = t_k + x_{k,i} - x_{k,i-1}``
spacers above the ``i``-th one (``x_{k,0} = 0``, ``x_{k,p_k}`` deterministic),
so that ``h_{k+1} = p_k (h_k + t_k) + x_{k,p_k}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence, Union

import numpy as np

from .distributions import Pmf, TablePmf, UniformPmf
from .errors import ParamsError, RealizationError

H_PREV = "h_prev"


@dataclass(frozen=True)
class OrnsteinParams:
    """Deterministic sequences (p_k, t_k, x_{k,p_k}) and the offset laws xi_k."""

    p: tuple[int, ...]
    t: tuple[int, ...]
    x_top: tuple[int, ...]
    xi: tuple[Pmf, ...]

    @property
    def stages(self) -> int:
        return len(self.p)

    def window(self, k: int) -> tuple[int, int]:
        """X_k as the closed integer range (-t_k/2, t_k/2)."""
        return -(self.t[k] // 2), self.t[k] // 2

    def to_json(self) -> dict:
        return {
            "p": list(self.p),
            "t": [str(v) for v in self.t],
            "x_top": list(self.x_top),
            "xi": [d.to_json() for d in self.xi],
        }


XiSpec = Union[str, Pmf, Mapping[int, object]]


def _resolve_xi(entry: XiSpec, t_k: int) -> Pmf:
    if isinstance(entry, (TablePmf, UniformPmf)):
        return entry
    if isinstance(entry, str):
        if entry == "uniform":
            return UniformPmf(t_k // 2)
        if entry == "point":
            return TablePmf.point(0)
        raise ParamsError(f"unknown distribution name {entry!r} (expected 'uniform', 'point' or a table)")
    if isinstance(entry, Mapping):
        return TablePmf({int(s): w for s, w in entry.items()})
    raise ParamsError(f"cannot interpret distribution {entry!r}")


def _broadcast(value, stages: int, name: str) -> list:
    if isinstance(value, (list, tuple)):
        if len(value) != stages:
            raise ParamsError(f"{name} has {len(value)} entries, expected {stages}")
        return list(value)
    return [value] * stages


def make_params(p, t, x_top=0, xi: Union[XiSpec, Sequence[XiSpec]] = "uniform", stages: int | None = None) -> OrnsteinParams:
    """Assemble an :class:`OrnsteinParams`.

    ``p``, ``t`` and ``x_top`` may be scalars or per-stage sequences.  ``t``
    may also be ``"h_prev"``: the classic Ornstein choice ``t_k = h_{k-1}``,
    rounded up to the next even integer, with ``t_0 = 0``.  ``xi`` may be
    ``"uniform"`` (uniform on X_k), ``"point"`` (mass 1 at 0), a table
    ``{offset: mass}``, a pmf object, or a per-stage list of these.
    """
    if stages is None:
        for seq in (p, t, x_top):
            if isinstance(seq, (list, tuple)):
                stages = len(seq)
                break
        else:
            raise ParamsError("stage count is ambiguous; pass stages=")
    ps = [int(v) for v in _broadcast(p, stages, "p")]
    xs = [int(v) for v in _broadcast(x_top, stages, "x_top")]
    if isinstance(t, str):
        if t != H_PREV:
            raise ParamsError(f"unknown t preset {t!r}")
        ts = _t_from_previous_heights(ps, xs)
    else:
        ts = [int(v) for v in _broadcast(t, stages, "t")]
    xi_list = list(xi) if isinstance(xi, (list, tuple)) else [xi] * stages
    if len(xi_list) != stages:
        raise ParamsError(f"xi has {len(xi_list)} entries, expected {stages}")
    xis = [_resolve_xi(entry, tk) for entry, tk in zip(xi_list, ts)]
    return OrnsteinParams(tuple(ps), tuple(ts), tuple(xs), tuple(xis))


def _t_from_previous_heights(ps: list[int], xs: list[int]) -> list[int]:
    ts: list[int] = []
    h_prev, h = None, 1
    for pk, xk in zip(ps, xs):
        tk = 0 if h_prev is None else h_prev + (h_prev % 2)
        ts.append(tk)
        h_prev, h = h, pk * (h + tk) + xk
    return ts


@dataclass(frozen=True)
class ValidationReport:
    horizon: int
    finiteness_terms: tuple[Fraction, ...]
    finiteness_sum: Fraction
    finiteness_suspect: bool
    inv_p2_sum: Fraction
    bounded_cut_divergent: bool
    notes: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "horizon": self.horizon,
            "finiteness_sum": str(self.finiteness_sum),
            "finiteness_sum_float": float(self.finiteness_sum),
            "finiteness_terms": [str(v) for v in self.finiteness_terms],
            "finiteness_suspect_divergent": self.finiteness_suspect,
            "inv_p2_sum": str(self.inv_p2_sum),
            "inv_p2_divergent": self.bounded_cut_divergent,
            "notes": list(self.notes),
        }


def _check_structure(params: OrnsteinParams) -> None:
    K = params.stages
    if not (len(params.t) == len(params.x_top) == len(params.xi) == K):
        raise ParamsError("parameter sequences have different lengths")
    for k in range(K):
        if params.p[k] < 2:
            raise ParamsError(f"p_{k} = {params.p[k]} < 2")
        tk = params.t[k]
        if tk < 0 or tk % 2:
            raise ParamsError(f"t_{k} = {tk} must be a nonnegative even integer (X_k is symmetric)")
        if params.x_top[k] < 0:
            raise ParamsError(f"x_{k},p_k = {params.x_top[k]} must be >= 0")
        xi = params.xi[k]
        if xi.total != 1:
            raise ParamsError(f"xi_{k} sums to {xi.total}, not 1")
        lo, hi = xi.support
        if lo < -(tk // 2) or hi > tk // 2:
            raise ParamsError(f"support of xi_{k} [{lo}, {hi}] is outside X_{k} = [-{tk // 2}, {tk // 2}]")


def _tail_nondecreasing(terms: Sequence[Fraction]) -> bool:
    # heuristic: a series whose last term has stopped shrinking is flagged divergent
    return len(terms) >= 2 and terms[-1] > 0 and terms[-1] >= terms[-2]


def validate_params(params: OrnsteinParams, horizon: int | None = None) -> ValidationReport:
    """Check the parameters and report the finiteness and 1/p^2 partial sums.

    Raises :class:`ParamsError` for non-normalized or misplaced xi_k, odd
    t_k, or p_k < 2.
    """
    _check_structure(params)
    horizon = params.stages if horizon is None else min(int(horizon), params.stages)
    h = heights(params)
    terms = tuple(
        Fraction(params.t[k], h[k]) + Fraction(params.x_top[k], params.p[k] * h[k]) for k in range(horizon)
    )
    inv_p2 = tuple(Fraction(1, params.p[k] ** 2) for k in range(horizon))
    finite_suspect = _tail_nondecreasing(terms)
    bounded = _tail_nondecreasing(inv_p2)
    notes = []
    if finite_suspect:
        notes.append("finiteness series terms stopped decreasing: total measure may be infinite")
    else:
        notes.append("finiteness partial sums OK over horizon (not a proof)")
    if bounded:
        notes.append("Σ1/p² divergent: singular by bounded-cut criterion")
    else:
        notes.append("Σ1/p² terms decreasing over horizon")
    return ValidationReport(horizon, terms, sum(terms, Fraction(0)), finite_suspect, sum(inv_p2, Fraction(0)), bounded, tuple(notes))


def heights(params: OrnsteinParams) -> tuple[int, ...]:
    """(h_0, ..., h_K) with h_0 = 1, as exact Python integers."""
    h = [1]
    for pk, tk, xk in zip(params.p, params.t, params.x_top):
        h.append(pk * (h[-1] + tk) + xk)
    return tuple(h)


@dataclass(frozen=True)
class SpacerRealization:
    """One point omega: offsets (x_{k,1}, ..., x_{k,p_k-1}) for each stage."""

    offsets: tuple[tuple[int, ...], ...]
    seed: int | None = None
    replica: int = 0

    def to_json(self) -> dict:
        return {"seed": self.seed, "replica": self.replica, "offsets": [[str(x) for x in row] for row in self.offsets]}


def full_offsets(params: OrnsteinParams, omega: SpacerRealization, k: int) -> tuple[int, ...]:
    """(x_{k,0}, ..., x_{k,p_k}) including the fixed endpoints."""
    if not 0 <= k < params.stages:
        raise RealizationError(f"stage {k} out of range 0..{params.stages - 1}")
    row = omega.offsets[k]
    if len(row) != params.p[k] - 1:
        raise RealizationError(f"stage {k} needs {params.p[k] - 1} offsets, got {len(row)}")
    half = params.t[k] // 2
    for x in row:
        if abs(x) > half:
            raise RealizationError(f"offset {x} outside X_{k} = [-{half}, {half}]")
    return (0, *row, params.x_top[k])


def spacers_from_realization(params: OrnsteinParams, omega: SpacerRealization, k: int) -> tuple[int, ...]:
    """Spacer counts a_1^(k), ..., a_{p_k}^(k)."""
    x = full_offsets(params, omega, k)
    tk = params.t[k]
    return tuple(tk + x[i] - x[i - 1] for i in range(1, len(x)))


@dataclass(frozen=True)
class StageGeometry:
    """Heights, spacers and offsets of every stage for one realization."""

    heights: tuple[int, ...]
    spacers: tuple[tuple[int, ...], ...]
    offsets: tuple[tuple[int, ...], ...]  # full rows x_{k,0..p_k}
    t: tuple[int, ...]

    @property
    def stages(self) -> int:
        return len(self.spacers)

    def p(self, k: int) -> int:
        return len(self.spacers[k])

    def partial_sums(self, k: int) -> tuple[int, ...]:
        s = [0]
        for a in self.spacers[k]:
            s.append(s[-1] + a)
        return tuple(s)

    def column_offsets(self, k: int) -> tuple[int, ...]:
        """Heights j*h_k + s_k(j), j < p_k, at which copies of B_{k+1} sit inside B_k's column."""
        s = self.partial_sums(k)
        h = self.heights[k]
        return tuple(j * h + s[j] for j in range(self.p(k)))


def stage_geometry(params: OrnsteinParams, omega: SpacerRealization) -> StageGeometry:
    rows = tuple(full_offsets(params, omega, k) for k in range(params.stages))
    spacers = tuple(spacers_from_realization(params, omega, k) for k in range(params.stages))
    return StageGeometry(heights(params), spacers, rows, params.t)


def stage_rng(seed: int, k: int, replica: int = 0) -> np.random.Generator:
    """Independent stream for (stage, replica) derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(k), int(replica))))


def sample_realization(params: OrnsteinParams, seed: int, replica: int = 0) -> SpacerRealization:
    """Draw x_{k,i} ~ xi_k independently; a pure function of (params, seed, replica)."""
    rows = []
    for k in range(params.stages):
        draws = params.xi[k].sample(stage_rng(seed, k, replica), params.p[k] - 1)
        rows.append(tuple(int(v) for v in draws))
    return SpacerRealization(tuple(rows), seed, replica)


def zero_realization(params: OrnsteinParams) -> SpacerRealization:
    return SpacerRealization(tuple((0,) * (pk - 1) for pk in params.p))
