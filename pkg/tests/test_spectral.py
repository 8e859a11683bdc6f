import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lacuna.geometry import make_direction
from lacuna.spectral import (
    FREQUENCY,
    PHYSICAL,
    GridError,
    GridFunction,
    SymbolField,
    TorusGrid,
    apply_multiplier,
    fft_forward,
    fft_inverse,
    load_grid_function,
    lp_projection,
    norm,
    sample_symbol,
    save_grid_function,
)
from lacuna.symbols import hm_profile, lp_bump, nsw_omega_v


def _random(grid, rng):
    return GridFunction(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


def _wave(grid, k):
    x = grid.points()
    return GridFunction(grid, np.exp(2j * np.pi * (x @ np.asarray(k, float))))


@pytest.mark.parametrize("n, M", [(2, 4), (2, 12), (2, 2048), (3, 256), (4, 64), (5, 8), (1, 16)])
def test_grid_limits(n, M):
    with pytest.raises(GridError):
        TorusGrid(n, M)


@pytest.mark.parametrize("n, M", [(2, 8), (2, 1024), (3, 128), (4, 32)])
def test_grid_accepts(n, M):
    g = TorusGrid(n, M)
    assert g.frequencies().shape == (M,) * n + (n,)
    assert g.frequencies().min() == -M // 2 and g.frequencies().max() == M // 2 - 1


def test_grid_function_shape_checks():
    g = TorusGrid(2, 8)
    assert GridFunction(g, np.zeros(64)).values.shape == (8, 8)
    with pytest.raises(GridError):
        GridFunction(g, np.zeros(63))
    with pytest.raises(GridError):
        GridFunction(g, np.zeros(64), side="other")
    with pytest.raises(GridError):
        GridFunction(g, np.zeros(64)) + GridFunction(TorusGrid(2, 16), np.zeros(256))


def test_constant_and_wave_transforms():
    g = TorusGrid(2, 16)
    c = fft_forward(GridFunction(g, np.ones(g.shape)))
    expected = np.zeros(g.shape)
    expected[0, 0] = 1
    assert np.allclose(c.values, expected, atol=1e-15)
    w = fft_forward(_wave(g, (3, -5)))
    assert abs(w.values[3, -5] - 1) < 1e-12
    assert np.sum(np.abs(w.values) > 1e-12) == 1


@pytest.mark.parametrize("n, M", [(2, 64), (3, 16), (4, 8)])
def test_round_trip_and_plancherel(rng, n, M):
    g = TorusGrid(n, M)
    f = _random(g, rng)
    F = fft_forward(f)
    assert F.side == FREQUENCY
    back = fft_inverse(F)
    assert norm(back - f) <= 1e-10 * norm(f)
    assert norm(F) == pytest.approx(norm(f), rel=1e-12)
    with pytest.raises(GridError):
        fft_forward(F)
    with pytest.raises(GridError):
        fft_inverse(f)


def test_sample_symbol_dc_conventions():
    g = TorusGrid(2, 16)
    one = sample_symbol(lambda xi: np.ones(xi.shape[:-1]), g, dc_value=1.0)
    assert np.all(one.values == 1) and one.dc_value == 1
    v = make_direction((1, 0.3))
    m = hm_profile("hilbert_sign")
    hs = sample_symbol(lambda xi: m(xi @ v), g)
    assert hs.values[0, 0] == 0 and hs.dc_value == 0
    w = sample_symbol(lambda xi: nsw_omega_v(xi, v), g)
    assert np.all((w.values.real >= 0) & (w.values.real <= 1))
    with pytest.raises(GridError), np.errstate(divide="ignore"):
        sample_symbol(lambda xi: 1.0 / xi[..., 0], g)


def test_apply_multiplier_identities(rng):
    g = TorusGrid(2, 32)
    f = _random(g, rng)
    one = SymbolField(g, np.ones(g.shape, complex), 1.0)
    zero = SymbolField(g, np.zeros(g.shape, complex))
    assert norm(apply_multiplier(one, f) - f) <= 1e-12 * norm(f)
    assert norm(apply_multiplier(zero, f)) == 0
    a = SymbolField(g, rng.standard_normal(g.shape) + 0j)
    b = SymbolField(g, rng.standard_normal(g.shape) + 0j)
    twice = apply_multiplier(b, apply_multiplier(a, f))
    once = apply_multiplier(a * b, f)
    assert norm(twice - once) <= 1e-12 * norm(f)
    with pytest.raises(GridError):
        apply_multiplier(a, fft_forward(f))


def test_lp_projection_examples(rng):
    g = TorusGrid(2, 64)
    wave = _wave(g, (8, 3))
    assert norm(lp_projection(wave, 1, 3) - lp_bump(1.0) * wave) < 1e-12
    plane = _wave(g, (0, 5))
    assert all(norm(lp_projection(plane, 1, t)) < 1e-14 for t in g.dyadic_range())


def test_lp_projections_sum(rng):
    g = TorusGrid(2, 64)
    f = _random(g, rng)
    coeffs = fft_forward(f).values.copy()
    coeffs[0, :] = 0  # plane xi_1 = 0
    target = fft_inverse(GridFunction(g, coeffs, FREQUENCY))
    total = sum((lp_projection(f, 1, t) for t in g.dyadic_range()), GridFunction(g, np.zeros(g.shape)))
    # |xi_1| = M/2 lies at the top edge of the last band, where p has weight 1
    assert norm(total - target) <= 1e-10 * norm(f)


@given(st.floats(-5, 5).filter(lambda c: c != 0), st.sampled_from([1.0, 2.0, 3.5, np.inf]))
def test_norm_of_constant(c, p):
    g = TorusGrid(2, 8)
    assert norm(GridFunction(g, np.full(g.shape, c)), p) == pytest.approx(abs(c), rel=1e-12)


def test_norm_half_indicator_and_errors():
    g = TorusGrid(2, 8)
    vals = np.zeros(g.shape)
    vals[:4] = 1
    assert norm(GridFunction(g, vals), 1) == 0.5
    with pytest.raises(ValueError):
        norm(GridFunction(g, vals), 0.5)


@pytest.mark.parametrize("dtype", ["complex128", "complex64"])
def test_save_load_round_trip(tmp_path, rng, dtype):
    g = TorusGrid(3, 8)
    f = _random(g, rng)
    save_grid_function(f, tmp_path / "f.bin", dtype)
    back = load_grid_function(tmp_path / "f.bin")
    assert back.grid == g and back.side == PHYSICAL
    tol = 0 if dtype == "complex128" else 1e-6
    assert np.max(np.abs(back.values - f.values)) <= tol * np.max(np.abs(f.values))
    with pytest.raises(GridError):
        save_grid_function(f, tmp_path / "g.bin", "float32")
