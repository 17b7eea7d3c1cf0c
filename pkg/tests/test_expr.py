import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwcapprox.expr import (
    Binary, Const, DomainError, Expr, ParseError, Unary, Var,
    eval_expr, gradient_fd, hessian_fd, parse, relabel, to_source,
)


def test_single_variable():
    ast = parse("x1", 1)
    assert ast.root == Var(1, 0)


def test_mixed_expression():
    assert eval_expr(parse("sin(x1)+x2^2", 2), [0, 3]) == 9.0


def test_unbalanced_paren_position():
    with pytest.raises(ParseError) as exc:
        parse("2*(", 1)
    assert exc.value.position == 3


def test_variable_beyond_dimension():
    with pytest.raises(ParseError) as exc:
        parse("x1 + x3", 2)
    assert exc.value.position == 5


@pytest.mark.parametrize("source", ["", "1 +", "sin x1", "foo(x1)", "x0", "2 $ 3", "(x1", "x1)"])
def test_malformed(source):
    with pytest.raises(ParseError) as exc:
        parse(source, 1)
    assert 0 <= exc.value.position <= len(source.encode())


def test_position_is_byte_offset():
    with pytest.raises(ParseError) as exc:
        parse("x1 + é", 1)
    assert exc.value.position == 5


@pytest.mark.parametrize("source, x, expected", [
    ("sin(x1)", 0.0, 0.0),
    ("x1^2", 3.0, 9.0),
    ("abs(x1) - 0.5*x1", -2.0, 3.0),
    ("-x1^2", 3.0, -9.0),
    ("2^3^2", 0.0, 512.0),
    ("2^-1", 0.0, 0.5),
    ("8/4/2", 0.0, 1.0),
    ("1-2-3", 0.0, -4.0),
    ("-2*-3", 0.0, 6.0),
    ("1.5e1 + .5", 0.0, 15.5),
    ("exp(0)+log(1)+sqrt(4)+tanh(0)+cos(0)", 0.0, 4.0),
    ("(-2)^2", 0.0, 4.0),
])
def test_eval(source, x, expected):
    assert eval_expr(parse(source, 1), [x]) == expected


@pytest.mark.parametrize("source, x, pos", [
    ("log(x1)", 0.0, 0),
    ("1 + log(x1)", -1.0, 4),
    ("1/x1", 0.0, 1),
    ("sqrt(x1)", -1.0, 0),
    ("x1^0.5", -4.0, 2),
    ("x1^-1", 0.0, 2),
])
def test_domain_errors(source, x, pos):
    with pytest.raises(DomainError) as exc:
        eval_expr(parse(source, 1), [x])
    assert exc.value.position == pos


def test_negative_base_integer_exponent():
    assert eval_expr(parse("x1^3", 1), [-2.0]) == -8.0


def test_point_dimension_checked():
    with pytest.raises(ValueError):
        eval_expr(parse("x1", 2), [1.0])


def test_evaluate_many_constant_broadcasts():
    out = parse("5", 2).evaluate_many(np.zeros((4, 2)))
    assert out.shape == (4,) and np.all(out == 5)


def test_gradient_examples():
    assert gradient_fd(parse("x1^2", 1), [1.0], 1e-5)[0] == pytest.approx(2, abs=1e-6)
    assert gradient_fd(parse("sin(x1)", 1), [0.0], 1e-5)[0] == pytest.approx(1, abs=1e-6)
    assert np.all(gradient_fd(parse("5", 3), [1.0, -2.0, 0.5]) == 0)


def test_hessian_examples():
    assert hessian_fd(parse("x1^2", 1), [0.0], 1e-3)[0, 0] == pytest.approx(2, abs=1e-4)
    H = hessian_fd(parse("x1*x2", 2), [0.0, 0.0])
    assert H[0, 1] == pytest.approx(1, abs=1e-6)
    assert H[1, 0] == pytest.approx(1, abs=1e-6)
    assert H[0, 0] == pytest.approx(0, abs=1e-6) and H[1, 1] == pytest.approx(0, abs=1e-6)
    assert np.all(hessian_fd(parse("5", 2), [1.0, 2.0]) == 0)


coef = st.floats(-3, 3, allow_nan=False)
point = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(coef, min_size=6, max_size=6), point, point)
def test_gradient_of_quadratics(c, x1, x2):
    source = (f"{c[0]!r}*x1^2 + {c[1]!r}*x2^2 + {c[2]!r}*x1*x2 + "
              f"{c[3]!r}*x1 + {c[4]!r}*x2 + {c[5]!r}")
    g = gradient_fd(parse(source, 2), [x1, x2], 1e-5)
    exact = [2 * c[0] * x1 + c[2] * x2 + c[3], 2 * c[1] * x2 + c[2] * x1 + c[4]]
    np.testing.assert_allclose(g, exact, rtol=0, atol=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), point, point, point)
def test_hessian_is_exactly_symmetric(c, x1, x2, x3):
    f = parse(f"sin({c[0]!r}*x1*x2) + exp({c[1]!r}*x2*x3/10) + {c[2]!r}*x1*x3^2/100", 3)
    H = hessian_fd(f, [x1, x2, x3])
    assert np.array_equal(H, H.T)


def _exprs(dim):
    leaves = st.one_of(
        st.floats(-100, 100, allow_nan=False).map(lambda v: Const(v)),
        st.integers(1, dim).map(lambda j: Var(j)),
    )

    def extend(children):
        return st.one_of(
            st.tuples(st.sampled_from(["neg", "sin", "cos", "tanh", "abs"]), children)
            .map(lambda t: Unary(t[0], t[1])),
            st.tuples(st.sampled_from(list("+-*")), children, children)
            .map(lambda t: Binary(t[0], t[1], t[2])),
        )

    return st.recursive(leaves, extend, max_leaves=12)


@settings(max_examples=100, deadline=None)
@given(_exprs(2))
def test_print_parse_round_trip(root):
    ast = Expr(root, 2)
    again = parse(to_source(root), 2)
    pts = np.random.default_rng(7).uniform(-3, 3, size=(100, 2))
    a = ast.evaluate_many(pts)
    b = again.evaluate_many(pts)
    np.testing.assert_array_equal(a, b)


def test_round_trip_of_parsed_text():
    src = "-x1^2 + 3*sin(x2)/ (1 + abs(x1)) - 2^-x2^2"
    ast = parse(src, 2)
    again = parse(str(ast), 2)
    pts = np.random.default_rng(3).uniform(-2, 2, size=(100, 2))
    np.testing.assert_array_equal(ast.evaluate_many(pts), again.evaluate_many(pts))


def test_relabel():
    ast = relabel(parse("sin(x3)", 3), {3: 1}, 1)
    assert eval_expr(ast, [math.pi / 2]) == 1.0
    with pytest.raises(ValueError):
        relabel(parse("x1 + x2", 2), {}, 1)
