"""Exact cutting-and-stacking towers used as an oracle for the spectral recursion.

After K cutting steps the space is a single column of h_K levels, all of
width w_K = 1 / (p_0 ... p_{K-1}).  Endpoints are stored as integers in units
of w_K, which is exact rational arithmetic with a common denominator.  The map
T sends level i onto level i + 1 by translation and is left undefined on the
top level, so T^n is the partial map of the stage-K tower.  Correlations are
therefore those of this partial map; they coincide with the limiting
transformation's wherever no mass of B_j leaves through the top within n steps.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .construction import OrnsteinParams, SpacerRealization, heights, spacers_from_realization, stage_geometry
from .errors import InvariantViolation, ResourceLimitError, WindowRangeError
from .spectral import CorrelationSeq
from .trigpoly import build_pk, modulus_squared

MAX_LEVELS = 2_000_000


@dataclass
class Tower:
    K: int
    heights: tuple[int, ...]
    width: Fraction             # w_K, the common level width
    lo: np.ndarray              # left endpoint of level i, in units of w_K
    bases: tuple[tuple[int, int], ...]  # B_j = [lo, hi) in units of w_K, j = 0..K
    spacer_units: int           # number of spacer levels (units) ever added

    @property
    def height(self) -> int:
        return len(self.lo)

    @property
    def total_mass(self) -> Fraction:
        return self.width * self.height

    @property
    def spacer_mass(self) -> Fraction:
        return self.width * self.spacer_units

    def base_width(self, j: int) -> Fraction:
        lo, hi = self.bases[j]
        return self.width * (hi - lo)

    def levels(self) -> list[tuple[Fraction, Fraction]]:
        w = self.width
        return [(w * int(x), w * (int(x) + 1)) for x in self.lo]

    def base_levels(self, j: int) -> np.ndarray:
        """Indices of stage-K levels contained in B_j."""
        lo, hi = self.bases[j]
        return np.nonzero((self.lo >= lo) & (self.lo + 1 <= hi))[0]

    def to_json(self) -> str:
        return json.dumps(
            {
                "K": self.K,
                "heights": [str(h) for h in self.heights],
                "total_mass": str(self.total_mass),
                "bases": [[str(self.width * a), str(self.width * b)] for a, b in self.bases],
                "levels": [[str(a), str(b)] for a, b in self.levels()],
            },
            indent=1,
        )


def build_tower(params: OrnsteinParams, omega: SpacerRealization, K: int | None = None, max_levels: int = MAX_LEVELS) -> Tower:
    """Run the first K cutting-and-stacking steps of T_omega on B_0 = [0, 1)."""
    K = params.stages if K is None else K
    h = heights(params)[: K + 1]
    if h[-1] > max_levels:
        raise ResourceLimitError(f"stage-{K} tower has {h[-1]} levels (budget {max_levels})")
    # work in units of the current width, rescaling by p_k at each cut
    levels = [0]
    next_free = 1
    base_hist = [(0, 1)]
    scale = 1
    for k in range(K):
        pk = params.p[k]
        a = spacers_from_realization(params, omega, k)
        levels = [x * pk for x in levels]
        next_free *= pk
        base_hist = [(lo * pk, hi * pk) for lo, hi in base_hist]
        scale *= pk
        new = []
        spacers = 0
        for r in range(pk):
            new.extend(x + r for x in levels)
            for _ in range(a[r]):
                new.append(next_free)
                next_free += 1
                spacers += 1
        levels = new
        base_hist.append((levels[0], levels[0] + 1))
    lo = np.asarray(levels, dtype=np.int64)
    spacer_units = len(levels) - scale
    tower = Tower(K, h, Fraction(1, scale), lo, tuple(base_hist), spacer_units)
    if tower.height != h[-1] or next_free != tower.height:
        raise InvariantViolation("tower height or mass bookkeeping disagrees with the heights recursion")
    return tower


def _overlap_mass(tower: Tower, j: int, lags) -> dict[int, int]:
    """nu(B_j ∩ T^{-n} B_j) in units of w_K for each n, by interval intersection.

    Every stage-K level is one unit wide and T^n translates level i onto
    level i + n, so the overlap at lag n is sum_i s_i s_{i+n} where s_i is the
    length of B_j inside level i.  All lags come from one integer correlation.
    """
    blo, bhi = tower.bases[j]
    lo = tower.lo
    s = np.clip(np.minimum(lo + 1, bhi) - np.maximum(lo, blo), 0, None)
    if np.any(s > 1):
        raise InvariantViolation("level wider than one unit")
    H = tower.height
    full = np.correlate(s, s, mode="full")      # index H - 1 + n holds lag n
    out = {}
    for n in lags:
        out[n] = int(full[H - 1 + n]) if abs(n) < H else 0
    return out


def _check_window(tower: Tower, j: int, window: int) -> None:
    if not 0 <= j <= tower.K:
        raise WindowRangeError(f"stage {j} not in tower of {tower.K} stages")
    limit = tower.heights[tower.K] - tower.heights[j]
    if window < 0 or window > limit:
        raise WindowRangeError(f"window {window} exceeds h_K - h_j = {limit} for stage {j}")


def _correlation_values(tower: Tower, j: int, lags) -> dict[int, Fraction]:
    lo, hi = tower.bases[j]
    width = hi - lo
    return {n: Fraction(m, width) for n, m in _overlap_mass(tower, j, lags).items()}


def correlation(tower: Tower, j: int, window: int) -> CorrelationSeq:
    """sigma-hat_{f_j}(n) = nu(B_j ∩ T^{-n} B_j) / nu(B_j), |n| <= window, exact."""
    _check_window(tower, j, window)
    vals = _correlation_values(tower, j, range(-window, window + 1))
    return CorrelationSeq(window, vals, True, "tower")


@dataclass(frozen=True)
class RecursionReport:
    j: int
    window: int
    residual: Fraction
    lags_checked: int

    def to_json(self) -> dict:
        return {"j": self.j, "window": self.window, "residual": str(self.residual), "lags_checked": self.lags_checked}


def max_window(tower: Tower, j: int) -> int:
    return tower.heights[tower.K] - tower.heights[j]


def recursion_check(tower: Tower, params: OrnsteinParams, omega: SpacerRealization, j: int, window: int | None = None) -> RecursionReport:
    """max_n |sigma_j(n) - sum_m c_j(m) sigma_{j+1}(n - m)| over |n| <= window.

    Both correlations come from interval overlaps in the tower; c_j is the
    autocorrelation of P_j from the polynomial module.
    """
    if window is None:
        window = max_window(tower, j)
    _check_window(tower, j, window)
    if j + 1 > tower.K:
        raise WindowRangeError(f"stage {j + 1} is not built (K = {tower.K})")
    geom = stage_geometry(params, omega)
    pj = params.p[j]
    c = modulus_squared(build_pk(geom, j, "spacer")).terms
    # c_j(m) = (number of exponent pairs at distance m) / p_j, so with
    # nu(B_j) = p_j nu(B_{j+1}) both sides share the denominator nu(B_j)
    pairs = {m: v * pj for m, v in c.items()}
    if any(Fraction(v).denominator != 1 for v in pairs.values()):
        raise InvariantViolation("autocorrelation of P_j is not a pair count over p_j")
    span = max(abs(m) for m in c)
    lags = np.arange(-window, window + 1)
    lhs = _overlap_mass(tower, j, range(-window, window + 1))
    lhs = np.array([lhs[n] for n in range(-window, window + 1)], dtype=np.int64)
    src = _overlap_mass(tower, j + 1, range(-window - span, window + span + 1))
    src = np.array([src[n] for n in range(-window - span, window + span + 1)], dtype=np.int64)
    rhs = np.zeros_like(lhs)
    for m, k in pairs.items():
        rhs += int(k) * src[lags - m + window + span]
    lo, hi = tower.bases[j]
    worst = Fraction(int(np.max(np.abs(lhs - rhs))), hi - lo)
    return RecursionReport(j, window, worst, 2 * window + 1)
