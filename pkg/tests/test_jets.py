import itertools

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from codazzi_lab.expr import compile_expression
from codazzi_lab.jets import Jet, multi_indices

U, V = sp.symbols("u v")

EXPRESSIONS = [
    "sin(u)*cos(v) + u**3",
    "exp(u*v)/(1 + u*u)",
    "sqrt(2 + sin(u) + v*v)",
    "log(3 + cos(u*v))",
    "tan(0.3*u - 0.2*v)",
    "sinh(u)*cosh(v) - (u - v)**4",
    "(1 + u*u + v*v)**-1.5",
]


def _sympy_partials(src, point, order):
    f = sp.sympify(src, locals={"u": U, "v": V})
    out = {}
    for m in multi_indices(2, order):
        d = f
        for sym, k in zip((U, V), m):
            if k:
                d = sp.diff(d, sym, k)
        out[m] = float(d.subs({U: point[0], V: point[1]}))
    return out


@pytest.mark.parametrize("src", EXPRESSIONS)
def test_jet_partials_match_symbolic_derivatives(src):
    point = (0.37, -0.61)
    prog = compile_expression(src, ["u", "v"])
    jet = prog(*Jet.variables([np.asarray(x) for x in point], 4))
    for m, want in _sympy_partials(src, point, 4).items():
        assert jet.partial(m) == pytest.approx(want, rel=1e-10, abs=1e-10), m


def test_multi_index_count():
    for n, k in itertools.product(range(1, 4), range(0, 5)):
        from math import comb
        assert len(multi_indices(n, k)) == comb(n + k, k)


def test_from_derivatives_roundtrip():
    derivs = {m: float(sum(m) + 1) for m in multi_indices(2, 3)}
    jet = Jet.from_derivatives(derivs, 2, 3)
    for m, v in derivs.items():
        assert jet.partial(m) == pytest.approx(v)


def test_d_shifts_derivatives():
    prog = compile_expression("sin(u)*v*v", ["u", "v"])
    jet = prog(*Jet.variables([np.asarray(0.5), np.asarray(2.0)], 4))
    dv = jet.d(1)
    assert dv.order == 3
    assert dv.partial((1, 1)) == pytest.approx(jet.partial((1, 2)))


def test_vectorised_over_grid():
    u = np.linspace(0, 1, 5)
    v = np.linspace(-1, 0, 5)
    prog = compile_expression("u*u*v", ["u", "v"])
    jet = prog(*Jet.variables([u, v], 2))
    np.testing.assert_allclose(jet.partial((1, 0)), 2 * u * v)
    np.testing.assert_allclose(jet.partial((2, 0)), 2 * v)


def test_partial_beyond_order_rejected():
    jet = Jet.variables([np.asarray(0.0)], 2)[0]
    with pytest.raises(ValueError):
        jet.partial((3,))


def test_mixing_variable_counts_rejected():
    a = Jet.variables([np.asarray(0.0)], 2)[0]
    b = Jet.variables([np.asarray(0.0), np.asarray(1.0)], 2)[0]
    with pytest.raises(ValueError):
        a + b


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.integers(-3, 3))
def test_integer_power_matches_repeated_product(x, y, k):
    u, v = Jet.variables([np.asarray(x), np.asarray(y)], 4)
    base = 2.0 + u * v
    power = base ** k
    prod = Jet.constant(1.0, 2, 4)
    for _ in range(abs(k)):
        prod = prod * base
    if k < 0:
        prod = prod.reciprocal()
    np.testing.assert_allclose(power.coef, prod.coef, rtol=1e-10, atol=1e-12)
