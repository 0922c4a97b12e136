from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given

from riesz_lab import SparseTrigPoly, build_pk, make_params, modulus_squared, stage_geometry
from riesz_lab.construction import zero_realization
from riesz_lab.spectral import (
    GENERIC_SHIFT,
    dft_coeffs,
    grid_eval,
    product_fourier_coeffs,
    riesz_partial,
    root_mean_converged,
    total_span,
)
from riesz_lab.trigpoly import convolve

from conftest import params_and_omega


def odometer_geometry(K):
    params = make_params(2, 0, 0, "point", stages=K)
    return stage_geometry(params, zero_realization(params))


def test_constant_polynomial_samples():
    assert np.allclose(grid_eval(SparseTrigPoly({0: 1}), 16), 1.0)


def test_quarter_point_samples():
    P = SparseTrigPoly({0: 1, 1: 1}, Fraction(1, 2))
    assert np.allclose(np.abs(grid_eval(P, 4)) ** 2, [2, 1, 0, 1], atol=1e-14)


def test_big_frequency_wraps():
    N = 12
    a = grid_eval(SparseTrigPoly({N + 1: 1}), N)
    b = grid_eval(SparseTrigPoly({1: 1}), N)
    assert np.allclose(a, b)


def test_empty_product_is_one():
    root, sq = riesz_partial(odometer_geometry(3), [], 64)
    assert root.mean == 1.0 and sq.mean == 1.0
    assert np.all(root.values == 1.0)


def test_odometer_root_integral_decreases():
    g = odometer_geometry(5)
    means = [riesz_partial(g, range(k), 1 << 12)[0].mean for k in range(1, 6)]
    assert means[0] < 1
    assert all(b < a for a, b in zip(means, means[1:]))
    # one factor: mean of sqrt(1 + cos) is 2*sqrt(2)/pi; the kink at pi limits grid accuracy
    assert means[0] == pytest.approx(2 * np.sqrt(2) / np.pi, abs=1e-7)


def test_root_mean_converges_under_doubling():
    mean, N, ok = root_mean_converged(odometer_geometry(4), range(4), N=1 << 10)
    assert ok and N <= 1 << 14
    assert mean == pytest.approx(riesz_partial(odometer_geometry(4), range(4), 1 << 16)[0].mean, abs=1e-6)


def test_aliased_flag():
    g = odometer_geometry(6)
    assert riesz_partial(g, range(6), 32)[0].aliased
    assert not riesz_partial(g, range(6), 1 << 10)[0].aliased


def test_single_factor_coefficients():
    c = product_fourier_coeffs(odometer_geometry(1), [0], window=2)
    assert [c[n] for n in range(-2, 3)] == [0, Fraction(1, 2), 1, Fraction(1, 2), 0]


def test_two_odometer_factors_against_dense_product():
    c = product_fourier_coeffs(odometer_geometry(2), [0, 1], window=4)
    # dense oracle: (1 + cos t)(1 + cos 2t) expanded with numpy
    a = np.array([0.5, 1.0, 0.5])                 # lags -1..1
    b = np.array([0.5, 0.0, 1.0, 0.0, 0.5])       # lags -2..2
    dense = np.convolve(a, b)                     # lags -3..3
    assert [float(c[n]) for n in range(-3, 4)] == list(dense)
    assert (c[0], c[1], c[2], c[3], c[4]) == (1, Fraction(3, 4), Fraction(1, 2), Fraction(1, 4), 0)


def test_dft_cross_check_on_ornstein_stages():
    params = make_params([3, 4, 3], [2, 4, 2], [1, 0, 2], "uniform")
    from riesz_lab import sample_realization

    g = stage_geometry(params, sample_realization(params, 5))
    stages = [0, 1, 2]
    N = 1 << 12
    assert N > 2 * total_span(g, stages)
    exact = product_fourier_coeffs(g, stages, window=40)
    _, sq = riesz_partial(g, stages, N)
    assert exact.max_abs_diff(dft_coeffs(sq, 40)) < 1e-9
    _, sq_shift = riesz_partial(g, stages, N, GENERIC_SHIFT)
    assert exact.max_abs_diff(dft_coeffs(sq_shift, 40)) < 1e-9


def test_truncated_convolution_matches_full_product():
    params = make_params([3, 2, 4], [2, 2, 4], 1, "uniform")
    from riesz_lab import sample_realization

    g = stage_geometry(params, sample_realization(params, 9))
    full = SparseTrigPoly({0: 1})
    for k in range(3):
        full = convolve(full, modulus_squared(build_pk(g, k)))
    c = product_fourier_coeffs(g, [0, 1, 2], window=15)
    assert all(c[n] == full.terms.get(n, 0) for n in range(-15, 16))


@given(params_and_omega(max_stages=3))
def test_squared_mean_matches_zeroth_coefficient(po):
    params, omega = po
    g = stage_geometry(params, omega)
    stages = list(range(params.stages))
    N = 1 << 10
    while N <= 2 * total_span(g, stages):
        N <<= 1
    root, sq = riesz_partial(g, stages, N)
    assert abs(sq.mean - float(product_fourier_coeffs(g, stages, window=0)[0])) < 1e-12
    assert np.all(root.values >= 0) and np.all(sq.values >= 0)
    for k in stages:
        single = riesz_partial(g, [k], N)[1]
        assert abs(single.mean - 1.0) < 1e-12


@given(params_and_omega(max_stages=4))
def test_fixed_coefficients_stabilize(po):
    params, omega = po
    g = stage_geometry(params, omega)
    n = 2
    prev = None
    for k in range(1, params.stages + 1):
        cur = product_fourier_coeffs(g, range(k), window=n)
        if prev is not None and g.heights[k - 1] > n + total_span(g, range(k - 1)):
            assert cur[n] == prev[n]
        prev = cur
