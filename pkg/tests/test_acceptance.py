"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python tests/test_acceptance.py`` (lines go to stdout).
"""
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from riesz_lab import (
    SparseTrigPoly,
    TablePmf,
    UniformPmf,
    build_pk,
    make_params,
    modulus_squared,
    phi_of_distribution,
    sample_realization,
    stage_geometry,
)
from riesz_lab.cli import main as cli_main
from riesz_lab.config import load_preset
from riesz_lab.montecarlo import kb_ratio, kb_stats, spread_z_indices
from riesz_lab.singularity import f_epsilon_mask, greedy_select, gap_inequality, phi_weak_limit, degenerate_bound
from riesz_lab.spectral import factor_span, grid_eval, riesz_partial
from riesz_lab.tower import build_tower, recursion_check

RESULTS: list[str] = []


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)


def random_config(rng, max_stages, max_p, max_t, max_x=3):
    K = int(rng.integers(1, max_stages + 1))
    p = [int(v) for v in rng.integers(2, max_p + 1, K)]
    t = [2 * int(v) for v in rng.integers(0, max_t // 2 + 1, K)]
    x = [int(v) for v in rng.integers(0, max_x + 1, K)]
    return make_params(p, t, x, "uniform")


# 1 -------------------------------------------------------------------------

def test_oracle_equivalence():
    rng = np.random.default_rng(20240101)
    start = time.perf_counter()
    checks, worst = 0, Fraction(0)
    for seed in range(50):
        params = random_config(rng, 4, 4, 4)
        omega = sample_realization(params, seed)
        tower = build_tower(params, omega)
        for j in range(params.stages):
            worst = max(worst, recursion_check(tower, params, omega, j).residual)
            checks += 1
    # the largest admissible shape, every seed
    big = make_params(4, 4, 3, "uniform", stages=4)
    for seed in range(50):
        omega = sample_realization(big, seed)
        tower = build_tower(big, omega)
        for j in range(4):
            worst = max(worst, recursion_check(tower, big, omega, j).residual)
            checks += 1
    elapsed = time.perf_counter() - start
    ok = worst == 0 and elapsed < 60
    record(1, ok, f"{checks} recursion checks, max residual {worst}, {elapsed:.1f}s (< 60s)")
    assert ok


# 2 -------------------------------------------------------------------------

def stage_sample(n_configs=100, seed=7):
    rng = np.random.default_rng(seed)
    for i in range(n_configs):
        params = random_config(rng, 5, 12, 40, 10)
        yield params, stage_geometry(params, sample_realization(params, i))


def test_exponent_form_equivalence():
    N = 4096
    worst, mirrored, stages = 0.0, True, 0
    for params, g in stage_sample():
        for k in range(params.stages):
            orn, spc = build_pk(g, k, "ornstein"), build_pk(g, k, "spacer")
            mirrored &= set(orn.frequencies) == {-f for f in spc.frequencies}
            worst = max(worst, float(np.max(np.abs(np.abs(grid_eval(orn, N)) - np.abs(grid_eval(spc, N))))))
            stages += 1
    ok = mirrored and worst < 1e-12
    record(2, ok, f"{stages} stages over 100 configs, mirrored={mirrored}, max |modulus diff| {worst:.2e} (< 1e-12)")
    assert ok


# 3 -------------------------------------------------------------------------

def test_normalization_and_flat_window():
    bad, stages, worst_mean = [], 0, 0.0
    for params, g in stage_sample():
        for k in range(params.stages):
            pk = build_pk(g, k)
            c = modulus_squared(pk).terms
            if c.get(0) != 1 or any(c.get(n, 0) != 0 for n in range(1, g.heights[k])):
                bad.append((k, params))
            span = factor_span(g, k)
            N = 1 << max(10, (2 * span + 1).bit_length())
            assert N > 2 * span
            worst_mean = max(worst_mean, abs(riesz_partial(g, [k], N)[1].mean - 1.0))
            stages += 1
    ok = not bad and worst_mean < 1e-12
    record(3, ok, f"{stages} stages: c(0)=1 and flat window exact ({len(bad)} failures); max |grid mean - 1| {worst_mean:.1e} (< 1e-12)")
    assert ok


# 4 -------------------------------------------------------------------------

def test_gap_inequality():
    r = gap_inequality(np.ones(1 << 16), SparseTrigPoly({0: 1, 1: 1}, Fraction(1, 2)))
    lhs_ok = abs(r.lhs - 2 * math.sqrt(2) / math.pi) <= 1e-6
    rhs_ok = abs(r.rhs - (1 - (2 / math.pi) ** 2 / 8)) <= 1e-6
    rng = np.random.default_rng(99)
    N = 4096
    phi = phi_of_distribution(UniformPmf(1)).on_grid(N)
    triples, worst = 0, math.inf
    seed = 0
    while triples < 200:
        params = random_config(rng, 5, 6, 8)
        seed += 1
        if params.stages < 2:
            continue
        g = stage_geometry(params, sample_realization(params, seed))
        m = int(rng.integers(1, params.stages))
        Q, _ = riesz_partial(g, range(m), N)
        kind = triples % 3
        if kind == 0:
            mask = None
        elif kind == 1:
            mask = f_epsilon_mask(phi, float(rng.uniform(0.05, 0.9)))
        else:
            mask = rng.random(N) < 0.5
        worst = min(worst, gap_inequality(Q, build_pk(g, m), mask, check=False).slack)
        triples += 1
    ok = lhs_ok and rhs_ok and worst >= -1e-8
    record(4, ok, f"closed form lhs {r.lhs:.9f} rhs {r.rhs:.9f} (±1e-6: {lhs_ok and rhs_ok}); min slack over {triples} triples {worst:.3e} (>= -1e-8)")
    assert ok


# 5 -------------------------------------------------------------------------

def test_phi_identities():
    rng = np.random.default_rng(5)
    laws = [UniformPmf(h) for h in (0, 1, 2, 7, 50)] + [TablePmf.point(0), TablePmf({-1: "1/100", 0: "49/50", 1: "1/100"})]
    for _ in range(40):
        support = sorted(set(int(s) for s in rng.integers(-6, 7, int(rng.integers(1, 6)))))
        w = [int(v) for v in rng.integers(1, 10, len(support))]
        laws.append(TablePmf({s: Fraction(wi, sum(w)) for s, wi in zip(support, w)}))
    nonneg = total_one = True
    for xi in laws:
        phi = phi_of_distribution(xi)
        nonneg &= all(v >= 0 for v in phi.coeffs.values())
        total_one &= phi.total() == 1
    u = phi_of_distribution(UniformPmf(1)).coeffs
    three = (u[0], u[1], u[2], u[-1], u[-2]) == (Fraction(1, 3), Fraction(2, 9), Fraction(1, 9), Fraction(2, 9), Fraction(1, 9))
    ok = nonneg and total_one and three
    record(5, ok, f"{len(laws)} laws: nonnegative={nonneg}, sum exactly 1={total_one}; uniform{{-1,0,1}} -> (1/3, 2/9, 1/9)={three}")
    assert ok


# 6 -------------------------------------------------------------------------

def test_variance_identity():
    N = 1024
    xi = UniformPmf(1)
    z = spread_z_indices(xi, N, 32)
    rep = kb_stats(16, 37, xi, z, N, R=10_000, seed=0, exact=False)
    misses = [s.z_index for s in rep.stats if abs(s.var_tau - s.one_minus_phi) > 3 * s.var_tau_se]
    exact = kb_stats(6, 11, xi, z, N, exact=True)
    exact_err = max(abs(s.var_tau - s.one_minus_phi) for s in exact.stats)
    ok = len(z) == 32 and not misses and exact_err <= 1e-12
    record(6, ok, f"{len(z)} points, R=10^4: {len(misses)} outside 3 SE {misses}; enumeration max error {exact_err:.1e} (<= 1e-12)")
    assert ok


# 7 -------------------------------------------------------------------------

def test_kb_evidence():
    N = 1024
    parts, ok = [], True
    for p in (8, 16, 32):
        params = make_params([p, p], [2, 2], 0, "uniform")
        z = spread_z_indices(params.xi[1], N, 32)
        a = kb_ratio(params, 1, z, N, R=10_000, seed=1)
        b = kb_ratio(params, 1, z, N, R=10_000, seed=2)
        band = 3 * math.hypot(a.k_prime_se, b.k_prime_se)
        stable = abs(a.k_prime - b.k_prime) <= band
        positive = a.k_prime > 0 and b.k_prime > 0
        ok &= stable and positive
        parts.append(f"p={p}: K'={a.k_prime:.3f}±{a.k_prime_se:.3f} / {b.k_prime:.3f}±{b.k_prime_se:.3f} (|diff| {abs(a.k_prime - b.k_prime):.3f} <= {band:.3f})")
    record(7, ok, "; ".join(parts))
    assert ok


# 8 -------------------------------------------------------------------------

def test_degenerate_bound():
    laws = {
        "point": TablePmf.point(0),
        "near-point": TablePmf({-1: "1/100", 0: "49/50", 1: "1/100"}),
        "near-point-skew": TablePmf({0: "999/1000", 1: "1/1000"}),
    }
    worst, g_exact = math.inf, True
    for p in range(3, 17):
        for M in (1, 7):
            for xi in laws.values():
                rep = degenerate_bound(p, M, xi, replicas=8, check=False)
                worst = min(worst, rep.f_term - rep.f_lower_bound)
                g_exact &= rep.g_term_exact_sq == Fraction(p - 1, p * p) and abs(rep.g_term_grid - math.sqrt(p - 1) / p) < 1e-12
    g_seq = [math.sqrt(p - 1) / p for p in (3, 16, 256, 65536)]
    vanishing = all(b < a for a, b in zip(g_seq, g_seq[1:])) and g_seq[-1] < 4e-3
    ok = worst >= -1e-8 and g_exact and vanishing
    record(8, ok, f"min(F-term - bound) {worst:.4f} over p=3..16 x 3 laws x 2 steps; G-term sqrt(p-1)/p exact={g_exact}, -> 0: {g_seq[-1]:.2e}")
    assert ok


# 9 -------------------------------------------------------------------------

def test_greedy_classic_preset():
    cfg = load_preset("classic-ornstein")
    num = cfg.numeric
    params = cfg.build_params()
    start = time.perf_counter()
    lim = phi_weak_limit(params, N=int(num["grid"]), eps=0.1)
    trace = greedy_select(params, 0.1, phi=lim.phi, replicas=64, seed=int(num["seed"]), budget=int(num["budget"]),
                          N=int(num["grid"]), threshold=float(num["threshold"]), max_steps=20)
    elapsed = time.perf_counter() - start
    vals = [trace.initial, *trace.values]
    monotone = all(b <= a for a, b in zip(vals, vals[1:]))
    below_half = any(v < 0.5 for v in trace.values[:20])
    ok = monotone and elapsed < 600
    record(9, ok, f"L: {trace.initial:.3f} -> {vals[-1]:.4f} in {len(trace.values)} steps, non-increasing={monotone}; "
                  f"soft target L<0.5 {'reached' if below_half else 'NOT reached'}; {elapsed:.1f}s (< 600s)")
    assert ok


# 10 ------------------------------------------------------------------------

RUNS = [
    ("validate", "dyadic-odometer", []),
    ("riesz-decay", "dyadic-odometer", []),
    ("oracle-check", "dyadic-odometer", []),
    ("phi-limit", "classic-ornstein", []),
    ("kb-bound", "classic-ornstein", ["--replicas", "2000"]),
    ("greedy", "classic-ornstein", ["--replicas", "16"]),
    ("greedy", "degenerate-xi", []),
    ("section6", "degenerate-xi", []),
]


def test_reproducibility(tmp_path):
    same, outcomes = True, []
    for i, (experiment, preset, extra) in enumerate(RUNS):
        dirs = [tmp_path / f"{i}_{r}" for r in range(2)]
        codes = [cli_main([experiment, "--preset", preset, "--out", str(d), "--seed", "11", *extra]) for d in dirs]
        stem = experiment.replace("-", "_")
        files = sorted(f.name for f in dirs[0].iterdir() if f.name != "manifest.json")
        identical = codes[0] == codes[1] and all((dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes() for f in files)
        identical &= bool(files) and f"{stem}.json" in files
        same &= identical
        outcomes.append(f"{experiment}/{preset}={'same' if identical else 'DIFF'}(exit {codes[0]})")
    record(10, same, "; ".join(outcomes))
    assert same


if __name__ == "__main__":
    import tempfile

    failures = 0
    for fn in [test_oracle_equivalence, test_exponent_form_equivalence, test_normalization_and_flat_window, test_gap_inequality,
               test_phi_identities, test_variance_identity, test_kb_evidence, test_degenerate_bound, test_greedy_classic_preset]:
        try:
            fn()
        except AssertionError:
            failures += 1
    with tempfile.TemporaryDirectory() as d:
        try:
            test_reproducibility(Path(d))
        except AssertionError:
            failures += 1
    sys.exit(1 if failures else 0)
