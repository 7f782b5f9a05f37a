import numpy as np
import pytest

from codazzi_lab.errors import CodazziLabError
from codazzi_lab.expr import ExpressionError, check_expression, compile_expression


def test_evaluates_on_arrays():
    f = compile_expression("2*pi*sin(u) + v**2", ["u", "v"])
    u = np.array([0.0, np.pi / 2])
    np.testing.assert_allclose(f(u, np.array([1.0, 3.0])), [1.0, 2 * np.pi + 9.0])


@pytest.mark.parametrize("src", [
    "__import__('os')",
    "u.real",
    "[u]",
    "u if v else 1",
    "sin(u, v)",
    "max(u)",
    "'text'",
    "lambda: 1",
    "u == v",
])
def test_rejects_anything_outside_the_vocabulary(src):
    with pytest.raises(ExpressionError):
        check_expression(src, ["u", "v"])


def test_unknown_name():
    with pytest.raises(ExpressionError, match="unknown name 'w'"):
        compile_expression("u + w", ["u", "v"])


def test_syntax_error():
    with pytest.raises(ExpressionError, match="cannot parse"):
        compile_expression("u +", ["u"])


def test_is_a_library_error():
    assert issubclass(ExpressionError, CodazziLabError)
    assert issubclass(ExpressionError, ValueError)
