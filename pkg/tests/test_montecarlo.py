import itertools
import math

import numpy as np
import pytest

from riesz_lab import TablePmf, UniformPmf, make_params, phi_of_distribution
from riesz_lab.montecarlo import enumerate_space, kb_masked, kb_ratio, kb_stats, offsets_chunks, spread_z_indices

XI3 = UniformPmf(1)


def test_variance_at_i():
    rep = kb_stats(16, 37, XI3, [256], 1024, R=10_000, seed=1)
    s = rep.stats[0]
    assert s.one_minus_phi == pytest.approx(8 / 9, abs=1e-14)
    assert abs(s.var_tau - 8 / 9) < 3 * s.var_tau_se


def test_enumeration_matches_brute_force():
    # p = 4, three atoms: 27 equally likely offset triples, computed by hand here
    p, M, N = 4, 5, 64
    zs = [3, 10, 17]
    rep = kb_stats(p, M, XI3, zs, N)
    assert all(s.exact for s in rep.stats)
    for s, j in zip(rep.stats, zs):
        z = np.exp(2j * np.pi * j / N)
        devs = []
        for x in itertools.product((-1, 0, 1), repeat=p - 1):
            P = (1 + sum(z ** (q * M + xq) for q, xq in enumerate(x, 1))) / math.sqrt(p)
            devs.append(abs(abs(P) ** 2 - 1))
        assert s.mean_abs_dev == pytest.approx(np.mean(devs), abs=1e-12)
        assert abs(s.var_tau - s.one_minus_phi) < 1e-12


def test_enumeration_limit():
    assert enumerate_space(XI3, 13) is not None       # 3^12 = 531441
    assert enumerate_space(XI3, 14) is None           # 3^13 > 10^6


def test_point_mass_reports_degenerate():
    rep = kb_stats(8, 3, TablePmf.point(0), [1, 5, 9], 64, R=200)
    assert rep.k_prime is None
    assert rep.message == "degenerate case, use the section6 experiment"
    assert rep.filtered == [1, 5, 9]


def test_spread_avoids_phi_roots():
    N = 1024
    z = spread_z_indices(XI3, N, 32)
    assert len(z) == 32 and 0 not in z
    gap = 1 - phi_of_distribution(XI3).on_grid(N)[z]
    assert np.all(gap >= 1e-6)
    assert spread_z_indices(TablePmf.point(0), N, 32) == []


def test_workers_do_not_change_estimates():
    z = spread_z_indices(XI3, 512, 8)
    a = kb_stats(16, 41, XI3, z, 512, R=3000, seed=9, workers=1)
    b = kb_stats(16, 41, XI3, z, 512, R=3000, seed=9, workers=4)
    assert a.to_json() == b.to_json()


def test_chunks_are_reproducible():
    a = np.concatenate(list(offsets_chunks(XI3, 5, 2500, seed=4, stage=2)))
    b = np.concatenate(list(offsets_chunks(XI3, 5, 2500, seed=4, stage=2)))
    assert a.shape == (2500, 4) and np.array_equal(a, b)


def test_ratio_positive_where_defined():
    params = make_params([16, 16], [2, 2], 0, "uniform")
    z = spread_z_indices(params.xi[1], 1024, 16)
    rep = kb_ratio(params, 1, z, 1024, R=2000, seed=0)
    assert rep.k_prime is not None and rep.k_prime > 0
    assert all(s.mean_abs_dev >= 0 for s in rep.stats)
    assert all(s.apq_norm == pytest.approx(15 * 14 / 256) for s in rep.stats)


def test_masked_form_consistent():
    N = 512
    Q = np.abs(np.cos(np.pi * np.arange(N) / N)) + 0.1
    mask = np.arange(N) % 3 != 0
    out = kb_masked(8, 13, XI3, Q, mask, N, R=200, seed=2)
    assert out["cauchy_schwarz_holds"]
    assert out["lhs"] > 0 and out["q_mass"] > 0
    assert out["implied_constant_quadratic"] > 0
