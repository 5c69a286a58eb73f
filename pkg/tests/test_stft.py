import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from modlab.grid import SampledFunction, lp_norm, make_grid, parse_descriptor, sample
from modlab.stft import (PhaseSpaceFunction, log_abs_stft_gaussian_closed, moyal_check, phase_inner,
                         poisson_window, read_phase_csv, stft, stft_at_frequency, stft_gaussian_closed,
                         stft_poisson_closed, translate_grid, write_phase_csv)


def d(text, grid):
    return sample(parse_descriptor(text), grid)


def quad_stft(f, phi, x, xi, lim=12.0):
    re = quad(lambda y: f(y) * phi(y - x) * math.cos(2 * math.pi * y * xi), -lim, lim, limit=400)[0]
    im = quad(lambda y: -f(y) * phi(y - x) * math.sin(2 * math.pi * y * xi), -lim, lim, limit=400)[0]
    return complex(re, im)


def test_gaussian_closed_at_origin():
    # V(0, 0) = ||h_t0||_2^2 = h_{2 t0}(0) = 1/sqrt(2) at t0 = 1/(4 pi)
    t0 = 1 / (4 * math.pi)
    assert abs(stft_gaussian_closed(t0, 0.0, 0.0)) == pytest.approx(2 ** -0.5, rel=1e-15)
    # the literal variant gives sqrt(2), which is not the transform
    assert abs(stft_gaussian_closed(t0, 0.0, 0.0, printed=True)) == pytest.approx(2 ** 0.5)
    assert abs(stft_gaussian_closed(t0, 0.0, 40.0)) < 1e-300


@pytest.mark.parametrize("x,xi", [(0.0, 0.0), (0.7, -0.4), (-1.5, 1.1)])
def test_gaussian_closed_against_quadrature(x, xi):
    t0 = 0.2
    h = lambda y: (4 * math.pi * t0) ** -0.5 * math.exp(-y * y / (4 * t0))
    assert stft_gaussian_closed(t0, x, xi) == pytest.approx(quad_stft(h, h, x, xi), abs=1e-12)


def test_log_abs_gaussian_closed():
    t0 = 0.3
    x, xi = 1.2, -0.7
    assert log_abs_stft_gaussian_closed(t0, x * x, xi * xi) == pytest.approx(
        math.log(abs(stft_gaussian_closed(t0, x, xi))))


def test_numerical_stft_matches_gaussian_closed():
    g = make_grid(1, 8, 512)
    h = d("gaussian:0.2", g)
    V = stft(h, h)
    X, XI = np.meshgrid(V.grid_x.axis, V.grid_xi.axis, indexing="ij")
    closed = stft_gaussian_closed(0.2, X, XI)
    assert np.max(np.abs(V.values - closed)) / np.max(np.abs(closed)) < 1e-12


def test_gaussian_closed_2d():
    g = make_grid(2, 6, 64)
    h = d("gaussian:0.3", g)
    V = stft(h, h, stride=8)
    x = V.grid_x.points().reshape(-1, 2)
    xi = V.grid_xi.points().reshape(-1, 2)
    closed = stft_gaussian_closed(0.3, x[:, None, :], xi[None, :, :], n=2)
    vals = V.values.reshape(x.shape[0], xi.shape[0])
    assert np.max(np.abs(vals - closed)) / np.max(np.abs(closed)) < 1e-10


def test_poisson_closed_values():
    assert stft_poisson_closed(0.5, 0.0, 3.0) == pytest.approx(1 / math.pi)
    x, xi = 0.3, 0.7
    a = stft_poisson_closed(0.5, x, xi)
    b = stft_poisson_closed(0.5, x, xi, printed=True)
    assert abs(a) == pytest.approx(abs(b))
    assert a == pytest.approx(np.conj(b))


def test_poisson_closed_against_quadrature():
    t0, x, xi = 0.5, 0.4, 0.75
    p = lambda y: t0 / (math.pi * (y * y + t0 * t0))
    # window M_{-xi} p: conj(phi(y - x)) = exp(2 pi i (y - x) xi) p(y - x)
    re = quad(lambda y: p(y) * p(y - x) * math.cos(2 * math.pi * (-x * xi)), -np.inf, np.inf)[0]
    im = quad(lambda y: p(y) * p(y - x) * math.sin(2 * math.pi * (-x * xi)), -np.inf, np.inf)[0]
    assert stft_poisson_closed(t0, x, xi) == pytest.approx(complex(re, im), abs=1e-10)


def test_numerical_poisson_stft():
    g = make_grid(1, 64, 8192)
    p = d("poisson:0.5", g)
    xi = 0.5
    V = stft_at_frequency(p, poisson_window(0.5, xi, g), xi, stride=8)
    x = translate_grid(g, 8).axis
    keep = np.abs(x) <= 8
    assert np.max(np.abs(V - stft_poisson_closed(0.5, x, xi))[keep]) < 1e-4
    assert np.max(np.abs(V - stft_poisson_closed(0.5, x, xi, printed=True))[keep]) > 0.1


def test_direct_and_fft_routes_agree():
    g = make_grid(1, 8, 128, "half_step")
    f = d("gaussian:0.3", g)
    w = d("hermite:1", g)
    V = stft(f, w)
    V2 = stft(f, w, make_grid(1, g.reciprocal().L, 128).__class__(1, g.reciprocal().L, 128, "half_step"))
    assert V2.values.shape == V.values.shape
    for j in (3, 50, 100):
        col = stft_at_frequency(f, w, V.grid_xi.axis[j])
        assert np.max(np.abs(col - V.values[:, j])) < 1e-12


def test_stft_against_quadrature_on_half_step():
    g = make_grid(1, 8, 1024, "half_step")
    f = d("hermite:2", g)
    w = d("gausswin", g)
    V = stft(f, w, stride=64)
    from modlab.hermite import hermite_function
    ff = lambda y: float(hermite_function(2, y))
    phi = lambda y: math.exp(-math.pi * y * y)
    i, j = 9, 520
    x, xi = V.grid_x.axis[i], V.grid_xi.axis[j]
    assert V.values[i, j] == pytest.approx(quad_stft(ff, phi, x, xi), abs=1e-10)


def test_window_must_be_nonzero():
    g = make_grid(1, 4, 16)
    with pytest.raises(ValueError, match="nonzero"):
        stft(d("gausswin", g), SampledFunction(g, np.zeros(16)))
    with pytest.raises(ValueError):
        stft(d("gausswin", g), d("gausswin", make_grid(1, 4, 32)))
    with pytest.raises(ValueError):
        translate_grid(g, 3)


def test_moyal_normalized_gaussian():
    g = make_grid(1, 16, 512)
    h = d("gausswin", g).scaled(2 ** 0.25)
    lhs, rhs = moyal_check(h, h, h, h)
    assert lhs == pytest.approx(1.0, abs=1e-6)
    assert rhs == pytest.approx(1.0, abs=1e-6)


def test_moyal_orthogonal_pair():
    g = make_grid(1, 16, 512)
    w = d("gausswin", g)
    lhs, rhs = moyal_check(d("hermite:0", g), d("hermite:1", g), w, w)
    assert abs(lhs) <= 1e-8 and abs(rhs) <= 1e-8


@given(st.integers(0, 2 ** 31))
def test_moyal_random_smooth_pair(seed):
    rng = np.random.default_rng(seed)
    g = make_grid(1, 12, 256)
    x = g.axis
    mk = lambda: SampledFunction(g, np.exp(-(x - rng.uniform(-2, 2)) ** 2 * rng.uniform(0.3, 2))
                                 * np.exp(2j * math.pi * rng.uniform(-1, 1) * x))
    f1, f2, p1, p2 = mk(), mk(), mk(), mk()
    lhs, rhs = moyal_check(f1, f2, p1, p2)
    scale = lp_norm(f1, 2) * lp_norm(f2, 2) * lp_norm(p1, 2) * lp_norm(p2, 2)
    assert abs(lhs - rhs) <= 1e-6 * scale


def test_stft_l2_norm_is_product_of_norms():
    g = make_grid(1, 12, 256, "half_step")
    f, w = d("indicator:1", g), d("hermite:3", g)
    V = stft(f, w)
    assert math.sqrt(phase_inner(V, V).real) == pytest.approx(lp_norm(f, 2) * lp_norm(w, 2), rel=1e-6)


def test_translation_covariance():
    g = make_grid(1, 16, 512)
    k = 37
    f = d("gaussian:0.5", g)
    shifted = SampledFunction(g, np.roll(f.values, k))  # translate by k steps; tails are negligible
    w = d("gausswin", g)
    A, B = np.abs(stft(f, w).values), np.abs(stft(shifted, w).values)
    assert np.max(np.abs(B[k:] - A[:-k])) < 1e-8


def test_phase_csv_round_trip(tmp_path):
    g = make_grid(1, 4, 16)
    V = stft(d("gaussian:0.5", g), d("gausswin", g))
    write_phase_csv(V, tmp_path / "v.csv")
    back = read_phase_csv(tmp_path / "v.csv")
    assert back.grid_x == V.grid_x and back.grid_xi == V.grid_xi
    assert np.array_equal(back.values, V.values)


def test_phase_space_function_validates():
    g = make_grid(1, 4, 8)
    with pytest.raises(ValueError):
        PhaseSpaceFunction(g, g, np.zeros(10))
    F = PhaseSpaceFunction(g, g, np.ones(64))
    assert F.values.shape == (8, 8) and not F.values.flags.writeable
