import itertools
import math

import numpy as np
import pytest

from pwcapprox.core import Box, eval_piece, eval_pwc
from pwcapprox.expr import parse
from pwcapprox.separable import (
    SumForm, TooManyPieces, build_separable, eval_sumform, expand_sumform, separable_target,
)
from pwcapprox.univariate import build_univariate

SIN = parse("sin(x1)", 1)
ABS = parse("abs(x1)", 1)
BOX2 = Box((0.0, -1.0), (math.pi, 1.0))


@pytest.fixture(scope="module")
def sin_abs():
    return build_separable([(SIN, 1.0), (ABS, 1.01)], BOX2, 0.02)


def test_single_component_reduces_to_univariate():
    sep = build_separable([(SIN, 1.0)], Box((0.0,), (math.pi,)), 0.01)
    uni = build_univariate(SIN, 0.0, math.pi, 1.0, 0.01)
    assert sep.sumform.components[0] == uni.pwc
    X = np.linspace(0, math.pi, 1001)[:, None]
    np.testing.assert_array_equal(sep.sumform.evaluate(X)[0], uni.pwc.evaluate(X)[0])


def test_eps_split_even(sin_abs):
    assert [p.eps for p in sin_abs.parts] == [0.01, 0.01]
    assert sin_abs.parts[0].grid.n_p == 786


def test_sin_abs_dense_error(sin_abs):
    xs = np.linspace(0, math.pi, 300)
    ys = np.linspace(-1, 1, 300)
    X = np.stack([g.ravel() for g in np.meshgrid(xs, ys, indexing="ij")], axis=1)
    err = np.abs(sin_abs.sumform.evaluate(X)[0] - (np.sin(X[:, 0]) + np.abs(X[:, 1])))
    assert err.max() <= 0.02
    # additivity: total error bounded by the per-component errors
    e1 = np.abs(sin_abs.sumform.components[0].evaluate(xs)[0] - np.sin(xs)).max()
    e2 = np.abs(sin_abs.sumform.components[1].evaluate(ys)[0] - np.abs(ys)).max()
    assert err.max() <= e1 + e2 + 1e-12
    assert e1 <= 0.01 and e2 <= 0.01


def test_constant_components():
    box = Box((0.0, 0.0), (1.0, 1.0))
    sep = build_separable([(parse("1", 1), 1.0), (parse("2", 1), 1.0)], box, 0.5)
    m1 = sep.parts[0].grid.midpoints()
    m2 = sep.parts[1].grid.midpoints()
    X = np.array(list(itertools.product(m1, m2)))
    np.testing.assert_allclose(sep.sumform.evaluate(X)[0], 3.0, rtol=0, atol=1e-9)


def test_eval_sumform_examples():
    box = Box((0.0,), (1.0,))
    single = build_univariate(SIN, 0.0, 1.0, 1.0, 0.1).pwc
    sf = SumForm((single,), box)
    for x in (0.0, 0.37, 1.0):
        assert eval_sumform(sf, [x]) == eval_pwc(single, [x])[0]
    box2 = Box((0.0, 0.0), (1.0, 1.0))
    three = build_univariate(parse("3", 1), 0.0, 1.0, 1.0, 10.0).pwc
    four = build_univariate(parse("4", 1), 0.0, 1.0, 1.0, 10.0).pwc
    sf2 = SumForm((three, four), box2)
    assert three.n_pieces == 1
    # one piece per coordinate: value 7 at the shared midpoint
    assert eval_sumform(sf2, [0.5, 0.5]) == pytest.approx(7.0, abs=1e-12)


def test_sumform_validation():
    comp = build_univariate(SIN, 0.0, 1.0, 1.0, 0.1).pwc
    with pytest.raises(ValueError):
        SumForm((comp,), Box((0.0, 0.0), (1.0, 1.0)))
    with pytest.raises(ValueError):
        SumForm((comp, comp), Box((0.0, 0.0), (1.0, 2.0)))
    with pytest.raises(ValueError):
        eval_sumform(SumForm((comp,), Box((0.0,), (1.0,))), [0.1, 0.2])


def test_expand_single_component():
    sep = build_separable([(SIN, 1.0)], Box((0.0,), (1.0,)), 0.1)
    assert expand_sumform(sep.sumform) == sep.sumform.components[0]


def test_expand_two_by_two():
    box = Box((0.0, 0.0), (1.0, 1.0))
    sep = build_separable([(SIN, 1.0), (ABS, 1.0)], box, 2 * 2.5 * 0.5)
    assert [c.n_pieces for c in sep.sumform.components] == [2, 2]
    assert expand_sumform(sep.sumform).n_pieces == 4


def test_expand_matches_enumeration_oracle():
    # 3 x 3 pieces so tuples can be enumerated by hand
    sep = build_separable([(SIN, 1.0), (ABS, 1.01)], BOX2,
                          None, eps_split=[2.5 * math.pi / 3, 2.5 * 1.01 * 2 / 3])
    comps = sep.sumform.components
    assert [c.n_pieces for c in comps] == [3, 3]
    expanded = expand_sumform(sep.sumform)
    for d in expanded.D:
        assert np.all(d <= 0)
    xs = np.linspace(0, math.pi, 50)
    ys = np.linspace(-1, 1, 50)
    for x in xs:
        for y in ys:
            oracle = max(
                eval_piece(p, [x]) + eval_piece(q, [y])
                for p, q in itertools.product(comps[0].pieces, comps[1].pieces)
            )
            assert abs(eval_pwc(expanded, [x, y])[0] - oracle) <= 1e-12
            assert abs(eval_sumform(sep.sumform, [x, y]) - oracle) <= 1e-12


def test_expand_guard_reports_product(sin_abs):
    with pytest.raises(TooManyPieces, match="786 x 505"):
        expand_sumform(sin_abs.sumform)


def test_expand_matches_sumform_random_points(sin_abs):
    expanded = expand_sumform(sin_abs.sumform, max_pieces=10**6)
    X = np.random.default_rng(9).uniform(BOX2.lower, BOX2.upper, size=(200, 2))
    diff = np.abs(expanded.evaluate(X)[0] - sin_abs.sumform.evaluate(X)[0])
    assert diff.max() <= 1e-12


def test_eps_split_override():
    sep = build_separable([(SIN, 1.0), (ABS, 1.01)], BOX2, None, eps_split=[0.015, 0.005])
    assert sep.eps == pytest.approx(0.02)
    assert sep.meta["eps_split"] == [0.015, 0.005]


def test_separable_target():
    t = separable_target([SIN, ABS])
    X = np.array([[1.0, -0.5], [0.0, 0.25]])
    np.testing.assert_allclose(t(X), np.sin(X[:, 0]) + np.abs(X[:, 1]))
