import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from modlab.grid import SampledFunction, make_grid, parse_descriptor, sample
from modlab.maximal import (RadiiSet, check_domination, check_maximal_convolution_order,
                            check_stft_maximal_inequality, default_t_list, dilation_sup,
                            majorant_integral, maximal_bruteforce, maximal_function,
                            maximal_modnorm_check)


def d(text, grid):
    return sample(parse_descriptor(text), grid)


def test_indicator_at_three():
    g = make_grid(1, 8, 1024, "half_step")
    Mf = maximal_function(d("indicator:1", g))
    i = int(np.argmin(np.abs(g.axis - 3)))
    # best ball is [1 - eps, 5]: 2 / 8
    assert Mf.values[i] == pytest.approx(0.25, abs=2 * g.step)


@given(st.integers(0, 2 ** 31), st.sampled_from(["none", "half_step"]))
def test_prefix_sums_match_bruteforce(seed, offset):
    rng = np.random.default_rng(seed)
    g = make_grid(1, 8, 64, offset)
    f = SampledFunction(g, rng.uniform(0, 1, 64) * (rng.uniform(size=64) < 0.7))
    radii = RadiiSet.default(g)
    assert np.max(np.abs(maximal_function(f, radii).values - maximal_bruteforce(f, radii))) <= 1e-12


def test_two_dimensional_discs_match_direct_average():
    g = make_grid(2, 4, 16, "half_step")
    rng = np.random.default_rng(0)
    f = SampledFunction(g, rng.uniform(size=g.shape))
    radii = RadiiSet(g, (1, 2, 3))
    Mf = maximal_function(f, radii).values
    I, J = np.meshgrid(np.arange(16), np.arange(16), indexing="ij")
    for (a, b) in ((0, 0), (7, 8), (15, 3)):
        best = 0.0
        for k in radii.ks:
            ball = (I - a) ** 2 + (J - b) ** 2 <= k * k
            best = max(best, f.values[ball].mean())
        assert Mf[a, b] == pytest.approx(best, abs=1e-13)


@given(st.integers(0, 2 ** 31), st.floats(0.1, 10))
def test_homogeneous_monotone_and_above_data(seed, c):
    rng = np.random.default_rng(seed)
    g = make_grid(1, 4, 64)
    a = rng.uniform(size=64)
    b = a + rng.uniform(size=64)
    fa, fb = SampledFunction(g, a), SampledFunction(g, b)
    Ma = maximal_function(fa).values
    assert np.allclose(maximal_function(fa.scaled(c)).values, c * Ma, rtol=1e-13, atol=0)
    assert np.all(maximal_function(fb).values >= Ma - 1e-15)
    small = maximal_function(fa, RadiiSet(g, (1,))).values
    assert np.all(Ma >= small)


def test_constant_and_negative():
    g = make_grid(1, 4, 32)
    assert np.allclose(maximal_function(SampledFunction(g, np.full(32, 2.5))).values, 2.5)
    with pytest.raises(ValueError, match="nonnegativity required"):
        maximal_function(SampledFunction(g, -np.ones(32)))


def test_radii_set_validation():
    g = make_grid(1, 4, 32)
    with pytest.raises(ValueError):
        RadiiSet(g, ())
    with pytest.raises(ValueError):
        RadiiSet(g, (2, 1))
    with pytest.raises(ValueError):
        RadiiSet(g, (100,))
    with pytest.raises(ValueError):
        RadiiSet.from_radii(g, [0.3])
    assert RadiiSet.from_radii(g, [0.25, 0.5]).ks == (1, 2)
    assert RadiiSet.default(g).radii[-1] == pytest.approx(4.0)


def test_majorant_integrals_are_one():
    for prof in ("indicator", "gauss", "poisson"):
        assert majorant_integral(prof, 1) == pytest.approx(1.0, abs=1e-3)
    assert majorant_integral("gauss", 2) == pytest.approx(1.0, abs=1e-3)


def test_indicator_dilations_reproduce_maximal_function():
    g = make_grid(1, 8, 512, "half_step")
    f = d("indicator:1", g)
    # radii up to 4 keep every ball centred in |x| < 4 inside the window
    ts = np.arange(1, 129) * g.step + 1e-9
    sup = dilation_sup(f, "indicator", ts).values
    Mf = maximal_function(f, RadiiSet(g, tuple(range(1, 129)))).values
    inside = np.abs(g.axis) < 4
    assert np.max(np.abs(sup - Mf)[inside]) < 1e-12


def test_dilation_of_zero():
    g = make_grid(1, 4, 64)
    assert not np.any(dilation_sup(SampledFunction(g, np.zeros(64)), "gauss", default_t_list(g)).values)
    with pytest.raises(ValueError):
        dilation_sup(SampledFunction(g, np.zeros(64)), "gauss", [0.0])


@pytest.mark.parametrize("data,prof", [("indicator:1", "gauss"), ("gaussian:0.25", "poisson"),
                                        ("indicator:1", "indicator")])
def test_domination(data, prof):
    g = make_grid(1, 8, 1024, "half_step")
    assert check_domination(d(data, g), prof) <= 1.05


def test_stft_maximal_inequality_fails_at_zero_frequency():
    # the claimed order is reversed; see the ledger
    g = make_grid(1, 8, 1024, "half_step")
    viol, scale = check_stft_maximal_inequality(d("indicator:1", g), "gauss", 0.0)
    assert viol == pytest.approx(0.212, abs=2e-3)
    assert viol > 1e-3 * scale


def test_stft_maximal_inequality_holds_for_modulated_windows():
    g = make_grid(1, 8, 1024, "half_step")
    for xi in (0.5, 1.0, 2.0):
        viol, scale = check_stft_maximal_inequality(d("indicator:1", g), "gauss", xi)
        assert viol <= 1e-3 * scale


def test_zero_function_both_sides_vanish():
    g = make_grid(1, 8, 256, "half_step")
    z = SampledFunction(g, np.zeros(g.size))
    assert check_stft_maximal_inequality(z, "gauss", 0.0) == (0.0, 0.0)
    assert maximal_modnorm_check(z, 2.0) == (0.0, 0.0)


def test_convolution_order_holds():
    g = make_grid(1, 8, 1024, "half_step")
    for data in ("indicator:1", "gaussian:0.1"):
        viol, _ = check_maximal_convolution_order(d(data, g), "gauss")
        assert viol <= 1e-12


def test_modnorm_gaussian_finite():
    g = make_grid(1, 8, 512, "half_step")
    nm, nf = maximal_modnorm_check(d("gaussian:0.25", g), 2.0)
    assert math.isfinite(nm) and math.isfinite(nf) and nm >= nf > 0
    with pytest.raises(ValueError):
        maximal_modnorm_check(d("gaussian:0.25", g), 1.0)
