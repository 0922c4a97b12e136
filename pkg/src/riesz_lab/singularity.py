"""Singularity diagnostics: the gap inequality, F_epsilon masks, the weak limit of
phi_m, greedy subsequence selection and the degenerate-case bound."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .construction import OrnsteinParams, SpacerRealization, heights, sample_realization, stage_geometry
from .distributions import Pmf
from .montecarlo import pm_grid_rows
from .errors import EmptyMaskError, GridMismatchError, InvariantViolation
from .spectral import GENERIC_SHIFT, GridDensity, grid_eval
from .trigpoly import PhiFunction, SparseTrigPoly, build_pk, phi_of_distribution, split_polys

SLACK_TOL = 1e-8
DEGENERATE_TOL = 1e-9
GENERIC, DEGENERATE = "GENERIC", "DEGENERATE"


@dataclass
class MaskedFunctional:
    mask: np.ndarray
    description: str
    value: float | None = None

    @property
    def fraction(self) -> float:
        return float(np.mean(self.mask))


def f_epsilon_mask(phi_values: np.ndarray, eps: float) -> np.ndarray:
    """Grid points where 1 - phi >= eps."""
    return (1.0 - np.asarray(phi_values).real) >= eps


def f_epsilon(phi: PhiFunction, eps: float, N: int, Q: GridDensity | None = None) -> MaskedFunctional:
    mask = f_epsilon_mask(phi.on_grid(N), eps)
    value = Q.masked_mean(mask) if Q is not None else float(np.mean(mask))
    return MaskedFunctional(mask, f"F_epsilon({eps})", value)


def mask_stability(phi: PhiFunction, eps: float, N: int) -> float:
    """|lambda(F_eps) on N grid - lambda(F_eps) on 2N grid|."""
    a = np.mean(f_epsilon_mask(phi.on_grid(N), eps))
    b = np.mean(f_epsilon_mask(phi.on_grid(2 * N), eps))
    return float(abs(a - b))


# -- gap inequality ---------------------------------------------------------

@dataclass(frozen=True)
class GapResult:
    lhs: float
    rhs: float
    slack: float
    q_mass: float
    q_p2_mass: float
    abs_dev: float


def gap_inequality(Q: GridDensity | np.ndarray, P_m: SparseTrigPoly | np.ndarray, mask: np.ndarray | None = None, check: bool = True) -> GapResult:
    """Both sides of  int_F Q|P| <= (int_F Q + int_F Q|P|^2)/2 - (int_F Q ||P|^2 - 1|)^2 / 8.

    Integrals are grid means.  ``P_m`` is a polynomial (evaluated on Q's grid)
    or an array of complex samples.
    """
    q = Q.values if isinstance(Q, GridDensity) else np.asarray(Q, dtype=float)
    N = q.shape[0]
    pv = grid_eval(P_m, N) if isinstance(P_m, SparseTrigPoly) else np.asarray(P_m)
    if pv.shape[0] != N:
        raise GridMismatchError(f"Q has {N} samples, P_m has {pv.shape[0]}")
    if mask is None:
        mask = np.ones(N, dtype=bool)
    elif mask.shape[0] != N:
        raise GridMismatchError(f"mask has {mask.shape[0]} samples, Q has {N}")
    w = q * mask
    a = np.abs(pv)
    a2 = a * a
    lhs = float(np.sum(w * a) / N)
    q_mass = float(np.sum(w) / N)
    q_p2 = float(np.sum(w * a2) / N)
    dev = float(np.sum(w * np.abs(a2 - 1.0)) / N)
    rhs = 0.5 * (q_mass + q_p2) - dev * dev / 8.0
    res = GapResult(lhs, rhs, rhs - lhs, q_mass, q_p2, dev)
    if check and res.slack < -SLACK_TOL:
        raise InvariantViolation(f"gap inequality violated: slack {res.slack:.3e}")
    return res


# -- weak limit of phi_m ------------------------------------------------------

@dataclass
class PhiLimit:
    phi: PhiFunction
    case: str
    history: dict[int, list[Fraction]]   # n -> [phi_m-hat(n) for m in stages]
    stages: tuple[int, ...]
    oscillation: float
    liminf_max_mass: Fraction
    zero_set_fraction: float
    near_one: tuple[int, ...]
    N: int
    eps: float

    def to_json(self) -> dict:
        return {
            "case": self.case,
            "stages": list(self.stages),
            "liminf_max_mass": str(self.liminf_max_mass),
            "oscillation": self.oscillation,
            "limit_coeffs": {str(n): str(self.phi.coeff(n)) for n in sorted(self.history)},
            "zero_set_fraction": self.zero_set_fraction,
            "zero_set_eps": self.eps,
            "near_one_grid_points": list(self.near_one[:64]),
            "near_one_count": len(self.near_one),
            "N": self.N,
        }


def phi_weak_limit(params: OrnsteinParams, stages: Sequence[int] | None = None, window: int = 8, N: int = 4096, eps: float = 0.1) -> PhiLimit:
    """Track phi_m-hat(n), |n| <= window, along the stage range and extract the limit.

    The limit is read off the last stage; ``oscillation`` is the largest
    spread of any tracked coefficient over the second half of the range.  The
    case flag is DEGENERATE when min over that tail of max_s xi_m(s) is
    >= 1 - 1e-9.
    """
    stages = tuple(range(params.stages)) if stages is None else tuple(stages)
    if len(stages) < 2:
        raise ValueError("phi_weak_limit needs at least two stages")
    history = {n: [params.xi[m].autocorr(n) for m in stages] for n in range(-window, window + 1)}
    tail = stages[len(stages) // 2:]
    tail_pos = len(stages) - len(tail)
    osc = max(float(max(v[tail_pos:]) - min(v[tail_pos:])) for v in history.values())
    liminf = min(params.xi[m].max_mass() for m in tail)
    case = DEGENERATE if liminf >= 1 - Fraction(DEGENERATE_TOL) else GENERIC

    tail_xi = [params.xi[m] for m in tail]
    if all(x == tail_xi[-1] for x in tail_xi):
        phi = phi_of_distribution(tail_xi[-1], "limit", window)
    else:
        coeffs = {n: v[-1] for n, v in history.items() if v[-1]}
        phi = PhiFunction(coeffs, "limit", complete=False)
    limit_vals = [phi.coeff(n) for n in history]
    if min(limit_vals) < -1e-12 or float(sum(limit_vals)) > 1 + 1e-9:
        raise InvariantViolation("limit coefficients must be >= 0 with sum <= 1")
    one_minus = 1.0 - phi.on_grid(N)
    zero_frac = float(np.mean(one_minus < eps))
    near_one = tuple(int(j) for j in np.nonzero(one_minus < 1e-9)[0])
    return PhiLimit(phi, case, history, stages, osc, liminf, zero_frac, near_one, N, eps)


# -- greedy subsequence -------------------------------------------------------

@dataclass
class GreedyTrace:
    epsilon: float
    selected: list[int] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    initial: float = 0.0
    stop_reason: str = ""
    mode: str = "fixed"
    replicas: int = 1
    N: int = 0
    mask_fraction: float = 0.0
    shift: Fraction = Fraction(0)
    aliased_from: int | None = None

    def to_json(self) -> dict:
        return {
            "aliased_from_stage": self.aliased_from,
            "grid_shift": str(self.shift),
            "epsilon": self.epsilon,
            "mode": self.mode,
            "replicas": self.replicas,
            "N": self.N,
            "mask_fraction": self.mask_fraction,
            "initial": self.initial,
            "selected": self.selected,
            "values": self.values,
            "stop_reason": self.stop_reason,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "stage", "L"])
            w.writerow([0, "", repr(self.initial)])
            for i, (m, v) in enumerate(zip(self.selected, self.values), 1):
                w.writerow([i, m, repr(v)])


def greedy_select(
    params: OrnsteinParams,
    eps: float,
    *,
    phi: PhiFunction | None = None,
    omega: SpacerRealization | None = None,
    replicas: int = 64,
    seed: int = 0,
    budget: int = 5,
    N: int = 1 << 14,
    threshold: float = 1e-3,
    max_steps: int = 50,
    workers: int = 1,
    shift: Fraction = GENERIC_SHIFT,
) -> GreedyTrace:
    """Greedy choice of n_1 < n_2 < ... driving int_F prod |P_{n_i}| down.

    Each step scans the next ``budget`` stages and keeps the one with the
    smallest new value (ties to the smallest stage); it stops when the value
    drops below ``threshold`` (``threshold``), when no candidate decreases it
    (``stalled``) or when stages or ``max_steps`` run out (``exhausted``).
    With ``omega`` the run is for one realization; otherwise values are
    averaged over ``replicas`` independent realizations.

    The integral is a mean over the grid rotated by ``shift``/N.  Once stage
    heights pass N the grid cannot resolve |P_m| and the values are estimates;
    ``aliased_from`` records the first such stage.
    """
    if phi is None:
        phi = phi_weak_limit(params).phi
    mask = f_epsilon_mask(phi.on_grid(N, shift), eps)
    if not mask.any():
        raise EmptyMaskError("F_epsilon is empty (phi ≡ 1): run the section6 experiment for the degenerate case")
    if omega is not None:
        omegas = [omega]
        mode = "fixed"
    else:
        omegas = [sample_realization(params, seed, r) for r in range(replicas)]
        mode = "averaged"
    geoms = [stage_geometry(params, om) for om in omegas]
    R = len(geoms)
    Q = np.ones((R, N))
    maskf = mask.astype(float)
    K = params.stages

    def replica_abs(m: int) -> np.ndarray:
        def one(r):
            return np.abs(grid_eval(build_pk(geoms[r], m), N, shift))
        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                rows = list(ex.map(one, range(R)))
        else:
            rows = [one(r) for r in range(R)]
        return np.stack(rows)

    def functional(arr: np.ndarray) -> float:
        per_replica = np.sum(arr * maskf, axis=1) / N
        return float(np.sum(per_replica) / R)

    hs = heights(params)
    aliased = [k for k in range(K) if 2 * (hs[k + 1] - hs[k]) >= N]
    trace = GreedyTrace(eps, mode=mode, replicas=R, N=N, mask_fraction=float(mask.mean()),
                        shift=Fraction(shift), aliased_from=aliased[0] if aliased else None)
    current = functional(Q)
    trace.initial = current
    cache: dict[int, np.ndarray] = {}
    last = -1
    while True:
        if len(trace.selected) >= max_steps:
            trace.stop_reason = "exhausted"
            break
        cands = range(last + 1, min(last + 1 + budget, K))
        if not cands:
            trace.stop_reason = "exhausted"
            break
        best_m, best_val = None, math.inf
        for m in cands:
            if m not in cache:
                cache[m] = replica_abs(m)
            val = functional(Q * cache[m])
            if val < best_val:
                best_m, best_val = m, val
        if not best_val < current:
            trace.stop_reason = "stalled"
            break
        Q *= cache[best_m]
        cache = {m: v for m, v in cache.items() if m > best_m}
        trace.selected.append(best_m)
        trace.values.append(best_val)
        if trace.values[-1] > current:
            raise InvariantViolation("greedy trace increased")
        current = best_val
        last = best_m
        if current < threshold:
            trace.stop_reason = "threshold"
            break
    return trace


# -- degenerate-case bound ----------------------------------------------------

@dataclass(frozen=True)
class DegenerateBoundReport:
    p: int
    M: int
    N: int
    g_term_exact_sq: Fraction
    g_term_exact: float
    g_term_grid: float
    g_term_inverse_sqrt: float
    f_term: float
    f_term_identity: float
    f_lower_bound: float
    sum_xi_sq: Fraction
    lhs: float
    lhs_se: float
    q_mass: float
    replicas: int

    def to_json(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["g_term_exact_sq"] = str(self.g_term_exact_sq)
        out["sum_xi_sq"] = str(self.sum_xi_sq)
        return out


def _pow2_at_least(x: int) -> int:
    n = 1
    while n < x:
        n <<= 1
    return n


def degenerate_bound(
    p: int,
    M: int,
    xi: Pmf,
    Q: GridDensity | np.ndarray | None = None,
    N: int | None = None,
    replicas: int = 200,
    seed: int = 0,
    check: bool = True,
) -> DegenerateBoundReport:
    """Terms of the degenerate-case decomposition for a stage with p cuts and step M = h_m + t_m.

    ``f_term`` is the grid quadrature of int |F_p(z^M) - (p-1)/p| phi_m dlambda
    and is checked against sum_s xi(s)^2 (p-2)/p.  ``g_term_exact`` is
    (int |G_p(z^M)|^2)^{1/2} = sqrt(p-1)/p.  ``lhs`` is a Monte Carlo estimate of
    int int Q ||P_m|^2 - 1| dlambda dP.
    """
    lo, hi = xi.support
    tmax = max(abs(lo), abs(hi))
    if N is None:
        N = min(_pow2_at_least(64 * (M * (p - 1) + 2 * tmax + 1)), 1 << 22)
    F, G = split_polys(p, M)
    c = Fraction(p - 1, p)
    phi = phi_of_distribution(xi).on_grid(N)
    Fv = grid_eval(F, N).real
    f_term = float(np.mean(np.abs(Fv - float(c)) * phi))
    F1, _ = split_polys(p, 1)
    N1 = _pow2_at_least(64 * p)
    f_identity = float(xi.sum_squares()) * float(np.mean(np.abs(grid_eval(F1, N1).real - float(c))))
    lower = float(xi.sum_squares() * Fraction(p - 2, p))
    g_sq = Fraction(p - 1, p * p)
    g_grid = math.sqrt(float(np.mean(np.abs(grid_eval(G, N)) ** 2)))
    if Q is None:
        q = np.ones(N)
    else:
        q = Q.values if isinstance(Q, GridDensity) else np.asarray(Q, dtype=float)
        if q.shape[0] != N:
            raise GridMismatchError(f"Q has {q.shape[0]} samples, grid is {N}")
    per = np.array([np.sum(q * np.abs(np.abs(row) ** 2 - 1.0)) / N for row in pm_grid_rows(xi, p, M, N, replicas, seed)])
    report = DegenerateBoundReport(
        p, M, N, g_sq, math.sqrt(float(g_sq)), g_grid, 1 / math.sqrt(p),
        f_term, f_identity, lower, xi.sum_squares(),
        float(np.mean(per)), float(np.std(per, ddof=1) / math.sqrt(replicas)) if replicas > 1 else 0.0,
        float(np.mean(q)), replicas,
    )
    if check and f_term < lower - SLACK_TOL:
        raise InvariantViolation(f"F-term {f_term} below its lower bound {lower}")
    return report
