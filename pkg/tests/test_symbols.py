import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lacuna.geometry import cell_index, make_direction, sigma_pairs, wedge_membership
from lacuna.symbols import (
    PROFILE_NAMES,
    eta_family,
    hm_constants,
    hm_profile,
    kappa_profile,
    kappa_sigma_ell,
    lp_bump,
    nsw_omega,
    nsw_omega_v,
    smooth_step,
)


def _step_oracle(x):
    g = lambda y: math.exp(-1.0 / y) if y > 0 else 0.0
    return g(x) / (g(x) + g(1 - x))


def _random_directions(rng, count, n):
    V = np.exp(rng.uniform(-4, 4, size=(count, n)))
    return V / np.linalg.norm(V, axis=1, keepdims=True)


@pytest.mark.parametrize("x, expected", [(-1.0, 0.0), (0.0, 0.0), (1.0, 1.0), (2.0, 1.0), (0.5, 0.5)])
def test_smooth_step_fixed_points(x, expected):
    assert smooth_step(x) == expected


def test_smooth_step_quarter():
    # e^-4 / (e^-4 + e^-4/3)
    assert smooth_step(0.25) == pytest.approx(_step_oracle(0.25), rel=1e-14)
    assert smooth_step(0.25) == pytest.approx(0.0649692, abs=1e-7)


@given(st.floats(0.001, 0.999))
def test_smooth_step_symmetry(x):
    assert smooth_step(x) + smooth_step(1 - x) == pytest.approx(1.0, abs=1e-15)


def test_smooth_step_strictly_increasing():
    x = np.linspace(0.05, 0.95, 1001)
    assert np.all(np.diff(smooth_step(x)) > 0)


@pytest.mark.parametrize("xi, expected", [((1, -1), 1.0), ((1, 1), 0.0), ((1, -1 + 0.1875), 0.5)])
def test_nsw_omega_examples(xi, expected):
    assert nsw_omega(np.array(xi, float), 2) == pytest.approx(expected, abs=1e-15)


def test_nsw_omega_rejects_origin():
    with pytest.raises(ValueError):
        nsw_omega(np.zeros(2))


def test_nsw_omega_v_examples():
    v = make_direction((1, 1))
    assert nsw_omega_v(np.array([1.0, -1.0]), v) == 1.0
    assert nsw_omega_v(np.array([1.0, 1.0]), v) == 0.0


@pytest.mark.parametrize("s, expected", [(1.0, 1.0), (3.5, 0.0), (2.5, 0.5), (0.0, 0.0), (-1.0, 0.0),
                                         (0.25, 1.0)])
def test_kappa_profile_examples(s, expected):
    assert kappa_profile(s, 2) == pytest.approx(expected, abs=1e-15)


def test_kappa_sigma_ell_examples():
    assert kappa_sigma_ell(np.array([-1.0, 1.0]), (1, 2), 0) == 1.0
    assert kappa_sigma_ell(np.array([1.0, 1.0]), (1, 2), 0) == 0.0
    assert kappa_sigma_ell(np.array([1.0, 0.0]), (1, 2), 0) == 0.0


def test_eta_examples():
    v = make_direction((1, 1))
    assert np.array_equal(eta_family(np.array([1.0, 1e-6]), v), [1.0, 0.0])
    assert np.array_equal(eta_family(np.array([1e-6, 1.0]), v), [0.0, 1.0])


@pytest.mark.parametrize("n", [2, 3, 4])
def test_eta_telescopes(rng, n):
    V = _random_directions(rng, 20000, n)
    xi = rng.standard_normal((20000, n)) * np.exp(rng.uniform(-5, 5, (20000, 1)))
    eta = eta_family(xi, V)
    assert np.all(eta >= 0)
    assert np.max(np.abs(eta.sum(axis=-1) - 1)) <= 1e-12


@pytest.mark.parametrize("n", [2, 3, 4])
def test_kappa_support_consistency(rng, n):
    xi = rng.standard_normal((20000, n))
    for sg in sigma_pairs(n):
        for ell in (-2, 0, 3):
            k = kappa_sigma_ell(xi, sg, ell)
            assert np.all(wedge_membership(xi[k > 0], sg, ell, widened=True))
            assert np.all(k[wedge_membership(xi, sg, ell)] == 1.0)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_symbol_covering_identity(rng, n):
    V = _random_directions(rng, 2000, n)
    xi = rng.standard_normal((2000, n))
    worst = 0.0
    for v, x in zip(V, xi):
        cell = cell_index(v)
        prod = nsw_omega_v(x, v)
        for sg in sigma_pairs(n):
            prod = prod * (1 - kappa_sigma_ell(x, sg, cell[sg]))
        worst = max(worst, abs(prod))
    assert worst <= 1e-12


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3).filter(
    lambda x: max(map(abs, x)) > 1e-3), st.floats(1e-3, 1e3))
def test_degree_zero_homogeneity(xi, t):
    xi = np.array(xi)
    v = make_direction((3, 2, 1))
    assert nsw_omega(t * xi) == pytest.approx(nsw_omega(xi), abs=1e-9)
    assert nsw_omega_v(t * xi, v) == pytest.approx(nsw_omega_v(xi, v), abs=1e-9)
    assert kappa_sigma_ell(t * xi, (1, 3), 1) == pytest.approx(kappa_sigma_ell(xi, (1, 3), 1), abs=1e-9)
    assert np.allclose(eta_family(t * xi, v), eta_family(xi, v), atol=1e-9)


def test_gradient_bound_stable_across_annuli(rng):
    # |grad omega_v| ~ C / ||xi||_inf, with C the same on every dyadic annulus
    v = make_direction((1, 0.3))
    consts = []
    for r in (4.0, 64.0, 1024.0):
        d = rng.standard_normal((4000, 2))
        xi = r * d / np.abs(d).max(axis=1, keepdims=True)
        h = 1e-4 * r
        grad = np.stack([(nsw_omega_v(xi + h * e, v) - nsw_omega_v(xi - h * e, v)) / (2 * h)
                         for e in np.eye(2)], axis=-1)
        consts.append(np.max(np.linalg.norm(grad, axis=1) * r))
    assert max(consts) / min(consts) < 1.05


def test_profiles():
    assert hm_profile("analytic_projection")(2.0) == 1
    assert hm_profile("analytic_projection")(-2.0) == 0
    assert hm_profile("hilbert_sign")(-3.0) == 1j
    for name in PROFILE_NAMES:
        m = hm_profile(name)
        s = np.geomspace(1e-6, 1e6, 200)
        assert np.all(np.abs(m(np.concatenate([-s, s]))) <= 1.0)
        assert m(0.0) == 0


def test_smooth_odd_hm_constants():
    consts = hm_constants(hm_profile("smooth_odd"))
    assert len(consts) == 4
    assert max(consts) <= 10


def test_unknown_profile():
    with pytest.raises(ValueError):
        hm_profile("nope")
    with pytest.raises(ValueError):
        hm_profile("smooth_odd", scale=0)


def test_lp_bumps():
    assert 0 < lp_bump(1.0, "p") <= 1
    assert lp_bump(-1.0, "q") == 1.0
    assert lp_bump(3.0, "p") == 0.0
    assert lp_bump(0.0, "p") == 0.0
    total = sum(lp_bump(2.0 ** -t * 0.73, "p") for t in range(-40, 41))
    assert total == pytest.approx(1.0, abs=1e-12)
    s = np.geomspace(0.5, 2, 50)
    assert np.all(lp_bump(s, "q") == 1.0)
    with pytest.raises(ValueError):
        lp_bump(1.0, "r")
