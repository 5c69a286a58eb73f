import configparser
import math

import numpy as np
import pytest

from modlab import kernels
from modlab.convergence import (DEFAULT_SUITE, SemigroupSpec, apply_semigroup, convergence_experiment,
                                decide, default_rows, dyadic_sweep, parse_t_values, rows_from_config)
from modlab.grid import make_grid, parse_descriptor, sample
from modlab.maximal import check_domination, maximal_function, majorant_integral


def d(text, grid):
    return sample(parse_descriptor(text), grid)


def test_spec_validation_and_floors():
    with pytest.raises(ValueError):
        SemigroupSpec("bogus")
    with pytest.raises(ValueError):
        SemigroupSpec("heat", "spectral")
    g = make_grid(1, 8, 1024)
    assert SemigroupSpec("heat").resolved_floor(g) == pytest.approx(8 * g.step ** 2)
    assert SemigroupSpec("poisson").resolved_floor(g) == pytest.approx(4 * g.step)
    assert SemigroupSpec("hermite_heat", "spectral").resolved_floor(g) == 0.0


def test_heat_and_poisson_semigroups():
    g = make_grid(1, 8, 1024)
    out = apply_semigroup(SemigroupSpec("heat"), d("gaussian:0.2", g), 0.1)
    assert np.max(np.abs(out.values - kernels.heat_kernel(0.3, g.axis))) <= 1e-8
    g = make_grid(1, 64, 8192)
    out = apply_semigroup(SemigroupSpec("poisson"), d("poisson:0.5", g), 0.5)
    inside = np.abs(g.axis) < 32
    assert np.max(np.abs(out.values - kernels.poisson_kernel(1.0, g.axis))[inside]) <= 1e-4


def test_hermite_heat_on_ground_state():
    g = make_grid(1, 8, 256)
    phi0 = d("hermite:0", g)
    out = apply_semigroup(SemigroupSpec("hermite_heat", "spectral"), phi0, 0.3)
    assert np.max(np.abs(out.values - math.exp(-0.3) * phi0.values)) < 1e-13


def test_route_agreement_2d():
    g = make_grid(2, 8, 64, "half_step")
    f = d("gaussian:0.5", g)
    a = apply_semigroup(SemigroupSpec("hermite_heat"), f, 0.3).values
    b = apply_semigroup(SemigroupSpec("hermite_heat", "spectral"), f, 0.3).values
    assert np.max(np.abs(a - b)) < 1e-6


def test_decide():
    assert decide([1, 0.5, 0.25, 0.001], 1e-2) == "converges"
    assert decide([1, 0.5, 0.25, 0.1], 1e-2) == "stagnates"
    assert decide([0.1, 0.2, 0.4, 0.8], 1e-2) == "diverges"
    # 10% slack absorbs small bumps
    assert decide([0.01, 0.009, 0.0095, 0.005], 1e-2) == "converges"


def test_parse_t_values():
    assert parse_t_values("dyadic:2:4,0.01") == (0.25, 0.125, 0.0625, 0.01)
    assert dyadic_sweep(1, 2) == [0.5, 0.25]


def test_gaussian_heat_experiment_closed_form():
    g = make_grid(1, 8, 4096, "half_step")
    ts = dyadic_sweep(2, 12)
    rep = convergence_experiment(SemigroupSpec("heat"), d("gaussian:0.25", g), ts)
    assert rep.verdict == "converges"
    # error is |h_{0.25+t} - h_0.25|, dominated at the origin
    t = ts[-1]
    closed = np.max(np.abs(kernels.heat_kernel(0.25 + t, g.axis) - kernels.heat_kernel(0.25, g.axis))[
        np.abs(g.axis) < 4])
    assert rep.max_error[-1] == pytest.approx(closed, rel=1e-6)
    assert rep.max_error[-1] <= 1e-3


def test_falpha_heat_experiment():
    g = make_grid(1, 8, 8192, "half_step")
    ts = parse_t_values("dyadic:2:13,0.0001")
    rep = convergence_experiment(SemigroupSpec("heat"), d("falpha:0.5", g), ts, excluded_radius=0.5)
    assert rep.verdict == "converges"
    assert rep.max_error[-1] <= 1e-2


def test_hermite_poisson_ground_state_linear_in_t():
    g = make_grid(1, 8, 512, "half_step")
    ts = dyadic_sweep(2, 10)
    rep = convergence_experiment(SemigroupSpec("hermite_poisson", "spectral"), d("hermite:0", g), ts)
    assert rep.verdict == "converges"
    x0 = np.min(np.abs(g.axis))
    for t, e in zip(ts, rep.max_error):
        assert e == pytest.approx((1 - math.exp(-t)) * math.pi ** -0.25 * math.exp(-x0 * x0 / 2), rel=1e-8)
    assert all(b < a for a, b in zip(rep.max_error, rep.max_error[1:]))


def test_experiment_validation():
    g = make_grid(1, 8, 256, "half_step")
    f = d("gaussian:0.25", g)
    with pytest.raises(ValueError):
        convergence_experiment(SemigroupSpec("heat"), f, [0.1, 0.2, 0.05, 0.01])
    with pytest.raises(ValueError):
        convergence_experiment(SemigroupSpec("heat"), f, [0.1, 0.05])
    with pytest.raises(ValueError):
        convergence_experiment(SemigroupSpec("heat"), f, [0.4, 0.2, 0.1, 0.05], excluded_radius=10)


def test_heat_dominated_by_maximal_function():
    g = make_grid(1, 8, 1024, "half_step")
    f = d("indicator:1", g)
    A = majorant_integral("gauss")
    Mf = maximal_function(f).values
    inside = np.abs(g.axis) < 4
    for t in (0.25, 0.01, 0.001):
        u = apply_semigroup(SemigroupSpec("heat"), f, t).values
        assert np.all((np.abs(u) <= A * Mf + 1e-6)[inside])


def test_default_suite_rows():
    rows = default_rows()
    names = [r.name for r in rows]
    assert "falpha-heat" in names and "phi0-hermite-poisson" in names
    fa = rows[names.index("falpha-heat")]
    assert fa.p == 4 and fa.t_values[-1] == 1e-4 and fa.excluded_radius == 0.5


def test_rows_from_config_rejects_unknown_and_missing():
    cp = configparser.ConfigParser()
    cp.read_string("[r]\nweight = const\ndata = gaussian:1\nsemigroup = heat\nfoo = 1\n")
    with pytest.raises(ValueError, match="foo"):
        rows_from_config(cp)
    cp = configparser.ConfigParser()
    cp.read_string("[r]\nweight = const\n")
    with pytest.raises(ValueError, match="missing"):
        rows_from_config(cp)
    assert "[gauss-heat]" in DEFAULT_SUITE
