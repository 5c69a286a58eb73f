import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import eval_hermite, gammaln

from modlab import kernels
from modlab.grid import make_grid


def hermite_heat_series(t, x, y, K=80):
    """``sum exp(-(2k+1)t) h_k(x) h_k(y)`` with scipy Hermite polynomials."""
    total = 0.0
    for k in range(K):
        lognorm = -0.5 * (k * math.log(2) + gammaln(k + 1) + 0.5 * math.log(math.pi))
        hk = lambda z: eval_hermite(k, z) * math.exp(lognorm - z * z / 2)
        total += math.exp(-(2 * k + 1) * t) * hk(x) * hk(y)
    return total


def test_point_values():
    assert kernels.heat_kernel(1 / (4 * math.pi), 0.0) == pytest.approx(1.0)
    assert kernels.poisson_kernel(1.0, 0.0) == pytest.approx(1 / math.pi)
    w1 = math.exp(-0.5) * 2 ** -0.5 * math.log(math.e + 1) ** -1.5
    assert kernels.omega_weight(1.0) == pytest.approx(w1)
    # ln(e + 1)^(-3/2) = 0.6645, so the product is 0.2850
    assert w1 == pytest.approx(0.28498, abs=1e-5)
    assert kernels.log_heat_kernel_r2(0.3, 2.0) == pytest.approx(math.log(kernels.heat_kernel_r2(0.3, 2.0)))
    assert kernels.log_poisson_kernel_r2(0.3, 2.0) == pytest.approx(math.log(kernels.poisson_kernel_r2(0.3, 2.0)))
    assert kernels.heat_kernel(0.5, np.array([[1.0, 1.0]]), n=2)[0] == pytest.approx(
        kernels.heat_kernel(0.5, 1.0) ** 2)


def test_bad_time():
    with pytest.raises(ValueError):
        kernels.heat_kernel(0.0, 1.0)
    with pytest.raises(ValueError):
        kernels.KernelSpec("bogus", 1.0)
    with pytest.raises(ValueError):
        kernels.KernelSpec("hermite_poisson", 1.0, M=4)


def test_hermite_heat_frozen_value():
    # independent oracle: spectral sum with scipy Hermite polynomials
    ref = hermite_heat_series(0.5, 0.3, -0.2)
    assert ref == pytest.approx(0.3210814032757172, abs=1e-14)
    for form in ("meda", "mehler"):
        assert kernels.hermite_heat_kernel(0.5, 0.3, -0.2, form=form) == pytest.approx(ref, abs=1e-13)


def test_flipped_sign_fails_spectral_oracle():
    ref = hermite_heat_series(0.5, 0.3, -0.2)
    assert abs(kernels.hermite_heat_kernel(0.5, 0.3, -0.2, form="flipped") - ref) > 0.01


@given(st.floats(0.01, 3.0), st.floats(-3, 3), st.floats(-3, 3))
def test_meda_and_mehler_forms_agree(t, x, y):
    a = kernels.hermite_heat_kernel(t, x, y, form="meda")
    b = kernels.hermite_heat_kernel(t, x, y, form="mehler")
    assert a == pytest.approx(b, rel=1e-10, abs=1e-300)


def test_meda_form_is_finite_for_tiny_t():
    v = kernels.hermite_heat_kernel(1e-12, 0.0, 0.0)
    assert math.isfinite(v) and v > 0


def test_hermite_poisson_frozen_value():
    # spectral oracle: sum exp(-t sqrt(2k+1)) h_k(0.3) h_k(0), K = 4000
    val, change = kernels.hermite_poisson_kernel(0.5, 0.3, 0.0, return_change=True)
    assert val == pytest.approx(0.4318830490203688, abs=1e-10)
    assert change < 1e-8


@given(st.floats(0.01, 3.0))
def test_subordination_reproduces_multiplier(t):
    s, c = kernels.subordination_nodes(t, 64)
    for lam in (1.0, 3.0, 41.0):
        assert np.sum(c * np.exp(-s * lam)) == pytest.approx(math.exp(-t * math.sqrt(lam)), abs=1e-12)


def test_laguerre_rule_is_inaccurate_at_small_t():
    s, c = kernels.subordination_nodes(0.1, 64, rule="laguerre")
    err = abs(np.sum(c * np.exp(-s)) - math.exp(-0.1))
    assert err > 1e-3
    x, w = kernels.laguerre_nodes(16)
    assert np.sum(w) == pytest.approx(math.sqrt(math.pi))


@pytest.mark.parametrize("t", [0.25, 1.0, 2.0])
def test_bounds_hold(t):
    g = make_grid(1, 8, 256)
    assert kernels.check_hermite_upper_bound(t, g) <= 1e-12
    assert kernels.check_hermite_lower_bound(t, g) <= 1e-12


@pytest.mark.parametrize("t,excess", [(0.25, 0.0168), (1.0, 0.0737), (2.0, 0.0561)])
def test_literal_upper_prefactor_fails_in_one_dimension(t, excess):
    g = make_grid(1, 8, 256)
    assert kernels.check_hermite_upper_bound(t, g, literal=True) == pytest.approx(excess, abs=1e-4)


def test_bounds_two_dimensions():
    g = make_grid(2, 4, 16)
    assert kernels.check_hermite_upper_bound(0.5, g) <= 1e-12
    assert kernels.check_hermite_upper_bound(0.5, g, literal=True) <= 1e-12
    assert kernels.check_hermite_lower_bound(0.5, g) <= 1e-12


def test_poisson_sandwich():
    g = make_grid(1, 8, 512)
    lo, hi = kernels.check_poisson_sandwich(1.0, 0.0, g)
    assert 0 < lo <= hi < math.inf
    assert lo == pytest.approx(0.2159654614497047, rel=1e-6)


def test_kernel_matrix_symmetric_psd():
    g = make_grid(1, 6, 128)
    X, Y = np.meshgrid(g.axis, g.axis, indexing="ij")
    A = kernels.hermite_heat_kernel(0.3, X, Y)
    assert np.array_equal(A, A.T)
    assert np.min(np.linalg.eigvalsh(A * g.step)) >= -1e-10


def test_chapman_kolmogorov():
    g = make_grid(1, 8, 512)
    X, Y = np.meshgrid(g.axis, g.axis, indexing="ij")
    A = kernels.hermite_heat_kernel(0.2, X, Y)
    B = kernels.hermite_heat_kernel(0.3, X, Y)
    assert np.max(np.abs(A @ B * g.step - kernels.hermite_heat_kernel(0.5, X, Y))) <= 1e-6


def test_kernel_function_rejects_hermite():
    with pytest.raises(ValueError):
        kernels.kernel_function("hermite_heat", 1.0)
