import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from modlab.weights import CONST, parse_weight


def pt(*v):
    return np.array(v, dtype=float)[None, :]


def test_forms_evaluate():
    assert parse_weight("const")(pt(3.0), pt(1.0))[0] == 1.0
    assert parse_weight("const:2.5")(pt(3.0), pt(1.0))[0] == 2.5
    assert parse_weight("exp:-1,2")(pt(1.0), pt(2.0))[0] == pytest.approx(math.exp(-5))
    assert parse_weight("poly:2")(pt(1.0), pt(1.0))[0] == pytest.approx(3.0)
    v = parse_weight("prod(exp:-1,4,poly:1)")
    assert v(pt(1.5), pt(2.0))[0] == pytest.approx(math.exp(-1.5 ** 4) * math.sqrt(5.0))


def test_log_domain_survives_large_arguments():
    v = parse_weight("exp:1,2")
    assert v.log_eval(pt(32.0), pt(0.0))[0] == pytest.approx(1024.0)
    assert v.inverse().log_eval(pt(32.0), pt(0.0))[0] == pytest.approx(-1024.0)
    assert v.inverse().inverse() is v


@pytest.mark.parametrize("bad", ["exp:1", "exp:1,0", "poly", "const:-1", "prod(const)", "foo:1", "exp:a,b"])
def test_parse_errors(bad):
    with pytest.raises(ValueError):
        parse_weight(bad)


def test_table_weight(tmp_path):
    p = tmp_path / "w.csv"
    rows = ["x,xi,value"] + [f"{x},{xi},{1 + x + 2 * xi}" for x in (0, 1, 2) for xi in (0, 1)]
    p.write_text("\n".join(rows) + "\n")
    v = parse_weight(f"table:{p}")
    assert v(pt(0.5), pt(0.5))[0] == pytest.approx(2.5)
    # clamped outside the lattice
    assert v(pt(10.0), pt(-3.0))[0] == pytest.approx(3.0)
    with pytest.raises(OSError):
        parse_weight(f"table:{tmp_path / 'missing.csv'}")


def test_table_rejects_nonpositive(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("x,xi,value\n0,0,1\n0,1,0\n1,0,1\n1,1,1\n")
    with pytest.raises(ValueError):
        parse_weight(f"table:{p}")


weights = st.one_of(
    st.just("const"),
    st.floats(0.1, 5).map(lambda c: f"const:{c!r}"),
    st.tuples(st.floats(-2, 2), st.floats(0.5, 4)).map(lambda a: f"exp:{a[0]!r},{a[1]!r}"),
    st.floats(-3, 3).map(lambda s: f"poly:{s!r}"),
)


@given(st.one_of(weights, st.tuples(weights, weights).map(lambda w: f"prod({w[0]},{w[1]})")))
def test_str_round_trip(text):
    v = parse_weight(text)
    assert parse_weight(str(v)) == v


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_weights_positive(x, xi):
    for text in ("exp:-1,2", "poly:-2", "prod(exp:-1,4,poly:1)"):
        assert parse_weight(text)(pt(x), pt(xi))[0] > 0
    assert CONST(pt(x), pt(xi))[0] == 1.0
