from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import random_set, well
from matres.born import (BornConfig, BornError, BornGrid, apply_J, block_error, born_series,
                         born_transmission, continue_left, convergence_study,
                         difference_power, remainder_bound)
from matres.geometry import PotentialSpec, l1_norm
from matres.transfer import transmission_matrix


def _const(grid, n=1, value=1.0):
    f = grid.zeros(1)
    f[:, :, 0] = value
    return f


def test_J_of_zero_potential():
    p = PotentialSpec(2, [0, 1], [np.zeros((2, 2))])
    g = BornGrid.build(p, 5.0)
    f = np.random.default_rng(0).normal(size=(g.size, 2, 1)) + 0j
    for kind in ("minus", "plus"):
        assert np.all(apply_J(kind, 5.0, f, g) == 0)


@pytest.mark.parametrize("k", [3.0, 7 - 1j, 12 + 0.5j])
def test_J_minus_constant(k):
    v, c = 2.5, 1.7
    g = BornGrid.build(well(v, 0, 1), k)
    out = apply_J("minus", k, _const(g, value=c), g)
    expected = -1j * v * c / (2 * k)
    assert abs(out[0, 0, 0] - expected) <= 1e-13
    assert abs(continue_left("minus", k, out[0], 0.0, -3.0)[0, 0] - expected) <= 1e-13


@pytest.mark.parametrize("k", [3.0, 7 - 1j, 12 + 0.5j])
@pytest.mark.parametrize("x", [0.0, -0.4])
def test_J_plus_constant_against_quadrature(k, x):
    v, c = 2.5, 1.7
    g = BornGrid.build(well(v, 0, 1), k)
    at0 = apply_J("plus", k, _const(g, value=c), g)[0, 0, 0]
    val = continue_left("plus", k, at0, 0.0, x)

    def part(fn):
        return quad(lambda y: fn(np.exp(2j * k * (x - y)) * v * c / (2 * k)), 0, 1,
                    epsabs=1e-14, epsrel=1e-14, limit=200)[0]

    ref = -1j * (part(np.real) + 1j * part(np.imag))
    assert abs(val - ref) <= 1e-10


def test_J_interior_against_quadrature():
    # two pieces, smooth test function, interior sample points
    p = PotentialSpec(1, [0, 0.4, 1.0], [[[1.5]], [[-0.7]]])
    k = 6 - 0.8j
    g = BornGrid.build(p, k)
    fn = lambda y: np.cos(3 * y) + 1j * y ** 2
    f = fn(g.x)[:, None, None]
    out = apply_J("plus", k, f, g)
    for i in (3, 17, 40, g.size - 5):
        x = g.x[i]

        def part(h):
            return sum(quad(lambda y: h(np.exp(2j * k * (x - y)) * p(y)[0, 0] / (2 * k) * fn(y)),
                            a, b, epsabs=1e-14, limit=200)[0]
                       for a, b in ((max(x, 0), 0.4), (max(x, 0.4), 1.0)) if b > a)

        ref = -1j * (part(np.real) + 1j * part(np.imag))
        assert abs(out[i, 0, 0] - ref) <= 1e-10


def test_J_rejects_small_k():
    g = BornGrid.build(well(), 1.0)
    with pytest.raises(BornError):
        apply_J("minus", 1.0, _const(g), g, k_min=2.0)
    with pytest.raises(ValueError):
        apply_J("sideways", 1.0, _const(g), g)


def test_J_operator_norm_bound():
    rng = np.random.default_rng(1)
    for p in random_set(2, 4, n_max=3):
        for k in (5.0, 9 - 1j, 20 + 2j):
            g = BornGrid.build(p, k)
            bound = l1_norm(p) / (2 * abs(k))
            for _ in range(5):
                f = rng.normal(size=(g.size, p.n, 1)) + 1j * rng.normal(size=(g.size, p.n, 1))
                sup_f = np.abs(f).sum(axis=1).max()
                for kind in ("minus", "plus"):
                    if kind == "plus" and k.imag > 0:
                        continue  # e^{2ik(x-y)} is bounded only for Im k <= 0
                    out = apply_J(kind, k, f, g)
                    assert np.abs(out).sum(axis=1).max() <= bound * sup_f * (1 + 1e-8)


def test_first_order_tau22_example():
    exp_ = born_transmission(10.0, well(1.0, 0, 1), BornConfig(order=1))
    t = exp_.partial_sum(1)
    assert t.tau22[0, 0] == pytest.approx(1 + 0.05j, abs=1e-12)


def test_zero_potential_blocks():
    p = PotentialSpec(2, [0, 1], [np.zeros((2, 2))])
    exp_ = born_transmission(3.0, p, BornConfig(order=4))
    t = exp_.partial_sum()
    np.testing.assert_array_equal(t.full(), np.eye(4))
    assert exp_.remainder_bound == 0.0


def test_order_zero_blocks_identity():
    exp_ = born_transmission(30.0, random_set(3, 1)[0], BornConfig(order=2))
    t0 = exp_.terms[0]
    np.testing.assert_allclose(t0.tau11, np.eye(t0.tau11.shape[0]), atol=1e-15)
    np.testing.assert_allclose(t0.tau22, np.eye(t0.tau11.shape[0]), atol=1e-15)
    assert np.all(t0.tau12 == 0) and np.all(t0.tau21 == 0)
    assert exp_.remainder_bound >= 0


def test_k_min_guard():
    with pytest.raises(BornError):
        born_transmission(1.0, well(3.0, 0, 1))  # default k_min = 2 ||V||_1 = 6
    born_transmission(1.0, well(3.0, 0, 1), BornConfig(k_min=0.5))


@pytest.mark.parametrize("N", [1, 2, 3])
def test_truncation_slope_scalar(N):
    rows, slopes = convergence_study(well(1.0, 0, 1), [10, 20, 40], orders=(N,))
    assert slopes[N] <= -(N + 1) + 0.3


def test_remainder_bound_examples():
    p = PotentialSpec(1, [0, 1], [[[2.0]]])
    assert remainder_bound(10.0, p, 2) == pytest.approx(0.01)
    assert remainder_bound(10.0, PotentialSpec(1, [0, 1], [[[0.0]]]), 3) == 0.0
    with pytest.raises(ValueError):
        remainder_bound(10.0, p, 0)
    r = [remainder_bound(k, p, 3) for k in (5, 10, 20, 40)]
    assert all(a > b for a, b in zip(r, r[1:]))


def test_remainder_bound_dominates_error():
    rng = np.random.default_rng(4)
    for p in random_set(5, 4, n_max=3):
        l1 = l1_norm(p)
        for _ in range(5):
            k = 10 * l1 * (1 + 3 * rng.random()) * rng.choice([-1, 1])
            exact = transmission_matrix(k, p)
            for N in (1, 2, 3):
                e = born_transmission(k, p, BornConfig(order=N, k_min=0.0))
                assert block_error(e.partial_sum(), exact) <= e.remainder_bound


def test_remainder_bound_first_family_lower_half_plane():
    # the (c, 0) family stays bounded for Im k <= 0; the e^{2iky} family does not
    rng = np.random.default_rng(5)
    for p in random_set(6, 3, n_max=3):
        l1 = l1_norm(p)
        for _ in range(5):
            k = 10 * l1 * (1 + 3 * rng.random()) * np.exp(-1j * np.pi * rng.random())
            exact = transmission_matrix(k, p)
            e = born_transmission(k, p, BornConfig(order=2, k_min=0.0))
            t = e.partial_sum()
            err = max(np.abs(t.tau11 - exact.tau11).sum(axis=1).max(),
                      np.abs(t.tau21 - exact.tau21).sum(axis=1).max())
            assert err <= e.remainder_bound


def test_recursion_forms_agree():
    p = random_set(6, 1, n_max=2)[0]
    k = 8 - 0.5j
    g, minus, plus = born_series(k, p, 4)
    diffs = difference_power(k, g, 4)
    for n in range(5):
        d = minus[n] - plus[n]
        assert np.abs(d - diffs[n]).max() <= 1e-10 * max(1.0, np.abs(d).max())


def test_gamma_minus_constant_right_of_support():
    p = random_set(7, 1)[0]
    g, minus, _ = born_series(12.0, p, 2)
    # the closing row at x_m has no support to its right: J^- vanishes there
    for gm in minus[1:]:
        assert np.abs(gm[-1]).max() == 0.0
