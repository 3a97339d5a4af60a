import numpy as np
import pytest

from nlrecon.expressions import ExpressionError, compile_expression


def ev(text, **values):
    names = sorted(values)
    fn = compile_expression(text, names)
    return fn(*(values[k] for k in names))


def test_basic_arithmetic():
    assert ev("1 + 2*3") == 7.0
    assert ev("(1 + 2) * 3") == 9.0
    assert ev("7 / 2") == 3.5
    assert ev("2 - 3 - 4") == -5.0
    assert ev("12 / 3 / 2") == 2.0


def test_power_is_right_associative():
    assert ev("2^3^2") == 512.0
    assert ev("2^2^0.5") == 2 ** (2**0.5)


def test_unary_minus_binds_looser_than_power():
    assert ev("-2^2") == -4.0
    assert ev("(-2)^2") == 4.0
    assert ev("3 * -2") == -6.0


def test_variables_and_functions():
    assert ev("a^2 + b", a=3.0, b=1.0) == 10.0
    assert ev("exp(a)", a=0.0) == 1.0
    assert ev("sin(a)^2 + cos(a)^2", a=0.73) == pytest.approx(1.0, abs=1e-15)
    assert ev("cosh(a)", a=1.2) == pytest.approx(np.cosh(1.2))
    assert ev("sqrt(a)", a=9.0) == 3.0


def test_scientific_notation_and_unicode_dot():
    assert ev("1e-3 + 2E2") == pytest.approx(200.001)
    assert ev("2 · a", a=5.0) == 10.0


def test_elementwise_over_arrays():
    fn = compile_expression("a^2 + b", ["a", "b"])
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([0.5, 0.5, 0.5])
    np.testing.assert_allclose(fn(a, b), a**2 + b)


def test_unknown_variable_lists_available_names():
    with pytest.raises(ExpressionError, match="a, b"):
        compile_expression("a + c", ["a", "b"])


def test_unknown_function_rejected():
    with pytest.raises(ExpressionError, match="tan"):
        compile_expression("tan(a)", ["a"])


@pytest.mark.parametrize("bad", ["", "1 +", "(a", "a b", "1 2", "^2", "a +* b"])
def test_malformed_expressions_rejected(bad):
    with pytest.raises(ExpressionError):
        compile_expression(bad, ["a", "b"])


def test_expression_error_is_a_value_error():
    assert issubclass(ExpressionError, ValueError)
