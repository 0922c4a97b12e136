"""Expectations over the stage-m probability space Omega_m = X_m^{p_m - 1}.

At a grid point z the random polynomial is
P_m(z) = p^{-1/2} sum_{q<p} z^{qM} tau_q with tau_q = z^{x_{m,q}}, tau_0 = 1,
M = h_m + t_m.  Small spaces are enumerated exactly; otherwise replicas are
drawn in fixed-size chunks, each chunk from its own derived stream, so the
estimates do not depend on how chunks are spread over workers.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .construction import OrnsteinParams, heights, stage_rng
from .distributions import Pmf
from .errors import GridMismatchError

ENUMERATION_LIMIT = 10**6
CHUNK = 1024
DEGENERATE_GAP = 1e-6


def offsets_chunks(xi: Pmf, p: int, R: int, seed: int, stage: int = 0):
    """Yield (R_chunk, p-1) arrays of i.i.d. offsets; chunk c uses stream (stage, c)."""
    for c, start in enumerate(range(0, R, CHUNK)):
        n = min(CHUNK, R - start)
        rng = stage_rng(seed, stage, c)
        yield np.asarray(xi.sample(rng, n * (p - 1))).reshape(n, p - 1)


def _residues(x: np.ndarray, p: int, M: int, N: int) -> np.ndarray:
    """(qM + x_q) mod N for q = 0..p-1, with x_0 = 0; handles big-integer offsets."""
    steps = np.array([(q * M) % N for q in range(p)], dtype=np.int64)
    xr = np.asarray(x % N, dtype=np.int64) if x.dtype == object else x % N
    out = np.empty((x.shape[0], p), dtype=np.int64)
    out[:, 0] = 0
    out[:, 1:] = xr
    return (out + steps[None, :]) % N


def pm_grid_rows(xi: Pmf, p: int, M: int, N: int, R: int, seed: int, stage: int = 0):
    """Yield samples of P_m on the whole N-grid, one replica at a time."""
    scale = 1.0 / math.sqrt(p)
    for x in offsets_chunks(xi, p, R, seed, stage):
        res = _residues(x, p, M, N)
        for row in res:
            A = np.bincount(row, minlength=N).astype(complex)
            yield np.fft.ifft(A) * (N * scale)


def enumerate_space(xi: Pmf, p: int):
    """All offset tuples of X_m^{p-1} with their probabilities (None if too large)."""
    if xi.support_size ** (p - 1) > ENUMERATION_LIMIT:
        return None
    atoms = list(xi.items())
    vals = np.array([s for s, _ in atoms], dtype=np.int64)
    probs = np.array([float(w) for _, w in atoms])
    idx = np.array(list(itertools.product(range(len(atoms)), repeat=p - 1)), dtype=np.int64).reshape(-1, p - 1)
    weights = np.prod(probs[idx], axis=1) if p > 1 else np.ones(1)
    return vals[idx], weights


@dataclass
class KBStats:
    z_index: int
    N: int
    stage: int
    replicas: int
    exact: bool
    mean_abs_dev: float
    mean_abs_dev_se: float
    var_tau: float
    var_tau_se: float
    one_minus_phi: float
    apq_norm: float
    ratio: float | None
    ratio_se: float | None

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class KBReport:
    stats: list[KBStats]
    filtered: list[int]
    k_prime: float | None
    k_prime_se: float | None
    argmin: int | None
    message: str = ""
    masked: dict | None = None

    def to_json(self) -> dict:
        return {
            "k_prime": self.k_prime,
            "k_prime_se": self.k_prime_se,
            "argmin_z_index": self.argmin,
            "filtered_z_indices": self.filtered,
            "message": self.message,
            "masked": self.masked,
            "stats": [s.to_json() for s in self.stats],
        }


def _weighted_stats(values: np.ndarray, weights: np.ndarray | None):
    if weights is None:
        R = values.shape[0]
        mean = float(np.mean(values))
        se = float(np.std(values, ddof=1) / math.sqrt(R)) if R > 1 else 0.0
        return mean, se
    return float(np.sum(values * weights)), 0.0


def kb_stats(p: int, M: int, xi: Pmf, z_indices: Sequence[int], N: int, R: int = 10_000, seed: int = 0, stage: int = 0, exact: bool | None = None, workers: int = 1) -> KBReport:
    """Lower-bound ratio E||P_m(z)|^2 - 1| / [((p-1)(p-2)/p^2)(1 - phi_m(z))^2] per z.

    Also checks var(tau_1(z)) against 1 - phi_m(z).  ``exact=None`` enumerates
    Omega_m when it has at most 10^6 points, else samples R replicas.
    """
    z_indices = [int(j) % N for j in z_indices]
    space = enumerate_space(xi, p) if exact in (None, True) else None
    if exact and space is None:
        raise ValueError("stage space too large to enumerate")
    if space is not None:
        x, weights = space
        chunks = [x[i:i + CHUNK] for i in range(0, x.shape[0], CHUNK)]
    else:
        weights = None
        chunks = list(offsets_chunks(xi, p, R, seed, stage))
    apq = (p - 1) * (p - 2) / p**2
    zs = np.asarray(z_indices, dtype=np.int64)
    one_minus_phi = 1.0 - np.abs(xi.characteristic(zs, N)) ** 2

    def per_chunk(x):
        res = _residues(x, p, M, N)                        # (n, p)
        phase = np.exp(2j * np.pi * ((res[:, :, None] * zs[None, None, :]) % N) / N)
        P = phase.sum(axis=1) / math.sqrt(p)               # (n, Z)
        dev = np.abs(np.abs(P) ** 2 - 1.0)
        tau1 = phase[:, 1, :] * np.exp(-2j * np.pi * (((M % N) * zs) % N) / N) if p > 1 else np.ones_like(P)
        return dev, tau1

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(per_chunk, chunks))
    else:
        parts = [per_chunk(x) for x in chunks]
    dev = np.concatenate([d for d, _ in parts])
    tau1 = np.concatenate([t for _, t in parts])
    nrep = dev.shape[0]

    stats, filtered = [], []
    for col, j in enumerate(z_indices):
        mad, mad_se = _weighted_stats(dev[:, col], weights)
        t = tau1[:, col]
        if weights is None:
            centered = np.abs(t - np.mean(t)) ** 2
            var = float(np.sum(centered) / (nrep - 1))
            var_se = float(np.std(centered, ddof=1) / math.sqrt(nrep))
        else:
            mu = np.sum(t * weights)
            var = float(np.sum(np.abs(t - mu) ** 2 * weights))
            var_se = 0.0
        gap = float(one_minus_phi[col])
        denom = apq * gap * gap
        if gap < DEGENERATE_GAP or denom == 0.0:
            ratio = ratio_se = None
            filtered.append(j)
        else:
            ratio, ratio_se = mad / denom, mad_se / denom
        stats.append(KBStats(j, N, stage, nrep, weights is not None, mad, mad_se, var, var_se, gap, apq, ratio, ratio_se))

    defined = [s for s in stats if s.ratio is not None]
    if not defined:
        return KBReport(stats, filtered, None, None, None, "degenerate case, use the section6 experiment")
    best = min(defined, key=lambda s: (s.ratio, s.z_index))
    msg = f"{len(filtered)} z-points filtered (1 - phi < {DEGENERATE_GAP})" if filtered else ""
    return KBReport(stats, filtered, best.ratio, best.ratio_se, best.z_index, msg)


def stage_step(params: OrnsteinParams, m: int) -> int:
    """M = h_m + t_m, the spacing of the columns in P_m."""
    return heights(params)[m] + params.t[m]


def kb_ratio(params: OrnsteinParams, m: int, z_indices: Sequence[int], N: int, R: int = 10_000, seed: int = 0, workers: int = 1) -> KBReport:
    return kb_stats(params.p[m], stage_step(params, m), params.xi[m], z_indices, N, R, seed, stage=m, workers=workers)


def spread_z_indices(xi: Pmf, N: int, count: int) -> list[int]:
    """``count`` roughly equispaced grid indices avoiding points where 1 - phi < 1e-6."""
    gap = 1.0 - np.abs(xi.characteristic(np.arange(N), N)) ** 2
    good = np.nonzero(gap >= DEGENERATE_GAP)[0]
    if good.size == 0:
        return []
    pick = np.linspace(0, good.size - 1, num=min(count, good.size)).round().astype(int)
    return sorted(set(int(good[i]) for i in pick))


def kb_masked(p: int, M: int, xi: Pmf, Q: np.ndarray, mask: np.ndarray, N: int, R: int = 1000, seed: int = 0, stage: int = 0) -> dict:
    """Integrated form: int_F Q E||P_m|^2-1| against (int_F Q (1-phi))^2 and int_F Q (1-phi)^2."""
    Q = np.asarray(Q, dtype=float)
    if Q.shape[0] != N or mask.shape[0] != N:
        raise GridMismatchError("Q, mask and grid size disagree")
    acc = np.zeros(N)
    for row in pm_grid_rows(xi, p, M, N, R, seed, stage):
        acc += np.abs(np.abs(row) ** 2 - 1.0)
    expected_dev = acc / R
    gap = 1.0 - np.abs(xi.characteristic(np.arange(N), N)) ** 2
    w = Q * mask
    lhs = float(np.sum(w * expected_dev) / N)
    lin = float(np.sum(w * gap) / N)
    quad = float(np.sum(w * gap * gap) / N)
    q_mass = float(np.sum(w) / N)
    return {
        "lhs": lhs,
        "q_mass": q_mass,
        "linear": lin,
        "quadratic": quad,
        "cauchy_schwarz_holds": lin <= math.sqrt(q_mass * quad) + 1e-12,
        "implied_constant_quadratic": lhs / quad if quad > 0 else None,
        "implied_constant_linear_sq": lhs / (lin * lin) if lin > 0 else None,
    }
