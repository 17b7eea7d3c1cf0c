import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwcapprox.core import Box, DiagQuadPiece, PwcFunction, eval_piece, eval_pwc
from pwcapprox.modelfile import (
    ModelFile, ValidationError, VersionError, dumps, load_model, loads, save_model,
)


def test_box_validation():
    with pytest.raises(ValueError):
        Box((0.0, 1.0), (1.0, 1.0))
    with pytest.raises(ValueError):
        Box((0.0,), (1.0, 2.0))
    assert Box((0,), (1,)).dim == 1


def test_piece_rejects_convexity():
    with pytest.raises(ValueError, match="concavity"):
        DiagQuadPiece((1.0,), (0.0,), 0.0)


def test_eval_piece_examples():
    # univariate parabola for kappa=1, delta=1, L=0, f(0.5)=1
    assert eval_piece(DiagQuadPiece((-2.0,), (2.0,), 0.5), [0.5]) == 1.0
    assert eval_piece(DiagQuadPiece((0.0,), (0.0,), 7.0), [123.0]) == 7.0
    assert eval_piece(DiagQuadPiece((-1.0, -1.0), (0.0, 0.0), 0.0), [1.0, 1.0]) == -2.0


def test_eval_piece_dimension_mismatch():
    with pytest.raises(ValueError):
        eval_piece(DiagQuadPiece((-1.0,), (0.0,), 0.0), [1.0, 2.0])


def test_eval_pwc_examples():
    box = Box((-1,), (1,))
    f = PwcFunction([DiagQuadPiece((-1,), (0,), 0), DiagQuadPiece((-1,), (0,), -0.5)], box)
    assert eval_pwc(f, [0.0]) == (0.0, 0)
    single = PwcFunction([DiagQuadPiece((-1,), (2,), 1)], box)
    assert eval_pwc(single, [0.5]) == (eval_piece(single.pieces[0], [0.5]), 0)
    lines = PwcFunction([DiagQuadPiece((0,), (1,), 0), DiagQuadPiece((0,), (-1,), 0)], box)
    assert eval_pwc(lines, [2.0]) == (2.0, 0)
    assert eval_pwc(lines, [-2.0]) == (2.0, 1)


def test_tie_break_smallest_index():
    box = Box((0,), (1,))
    f = PwcFunction([DiagQuadPiece((0,), (0,), 1)] * 3, box)
    assert eval_pwc(f, [0.3])[1] == 0


def test_eval_outside_domain_is_global():
    f = PwcFunction([DiagQuadPiece((-1,), (0,), 0)], Box((0,), (1,)))
    assert eval_pwc(f, [5.0])[0] == -25.0


def _random_pwc(rng, n, k, scale=5.0):
    D = -rng.uniform(0, scale, size=(k, n))
    D[rng.uniform(size=(k, n)) < 0.2] = 0.0
    A = rng.normal(scale=scale, size=(k, n))
    B = rng.normal(scale=scale, size=k)
    return PwcFunction.from_arrays(D, A, B, Box([-2.0] * n, [2.0] * n))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_max_dominates_every_piece(n, k, seed):
    rng = np.random.default_rng(seed)
    f = _random_pwc(rng, n, k)
    X = rng.uniform(-3, 3, size=(50, n))
    values, _ = f.evaluate(X)
    for piece in f.pieces:
        for x, v in zip(X, values):
            assert v >= eval_piece(piece, x)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_concave_where_winner_constant(n, k, seed):
    rng = np.random.default_rng(seed)
    f = _random_pwc(rng, n, k)
    X = rng.uniform(-2, 2, size=(200, n))
    Y = X + rng.normal(scale=0.05, size=X.shape)
    vx, wx = f.evaluate(X)
    vy, wy = f.evaluate(Y)
    vm, wm = f.evaluate(0.5 * (X + Y))
    same = (wx == wy) & (wx == wm)
    assert np.all(vm[same] >= 0.5 * (vx[same] + vy[same]) - 1e-12)


def test_vertex_form_matches_plain_form():
    rng = np.random.default_rng(11)
    f = _random_pwc(rng, 3, 20)
    X = rng.uniform(-2, 2, size=(300, 3))
    plain = (X ** 2) @ f.D.T + X @ f.A.T + f.B
    np.testing.assert_allclose(f.piece_values(X), plain, rtol=0, atol=1e-12 * np.abs(plain).max())


def test_large_coefficients_evaluate_accurately():
    # parabola -500 (x - 3)^2 + 0.25 written in global coefficients
    d, c, v = -500.0, 3.0, 0.25
    piece = DiagQuadPiece((d,), (-2 * d * c,), d * c * c + v)
    assert abs(eval_piece(piece, [c]) - v) < 1e-13


def test_chunked_evaluation_matches_full():
    rng = np.random.default_rng(5)
    f = _random_pwc(rng, 2, 900)
    X = rng.uniform(-2, 2, size=(5000, 2))
    values, winners = f.evaluate(X)
    V = f.piece_values(X)
    np.testing.assert_array_equal(values, V.max(axis=1))
    np.testing.assert_array_equal(winners, V.argmax(axis=1))


def _three_piece():
    box = Box((-1.0, 0.0), (1.0, 2.0))
    pieces = [
        DiagQuadPiece((-0.1, -2.5), (1 / 3, 0.7), -0.2),
        DiagQuadPiece((0.0, -1e-300), (-2.0, 1e10), 1 / 7),
        DiagQuadPiece((-3.0, 0.0), (0.0, -0.0), 2.0**-40),
    ]
    return PwcFunction(pieces, box)


def test_model_round_trip_is_bit_exact(tmp_path):
    f = _three_piece()
    model = ModelFile(f, {"builder": "test", "eps": 0.1})
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    assert back.kind == "pwc" and back.meta == model.meta
    assert back.payload == f
    X = np.random.default_rng(0).uniform(-1, 2, size=(1000, 2))
    np.testing.assert_array_equal(back.payload.evaluate(X)[0], f.evaluate(X)[0])
    # repeated cycles do not drift
    text = dumps(back)
    for _ in range(3):
        back = loads(dumps(back))
    assert dumps(back) == text


def test_document_field_order(tmp_path):
    doc = json.loads(dumps(ModelFile(_three_piece(), {"k": 1})))
    assert list(doc) == ["version", "kind", "domain", "pieces", "meta"]
    assert list(doc["pieces"][0]) == ["d", "a", "b"]
    assert doc["version"] == 1


def _doc():
    return json.loads(dumps(ModelFile(_three_piece(), {})))


def test_load_rejects_convex_piece():
    doc = _doc()
    doc["pieces"][1]["d"] = [1.0, 0.0]
    with pytest.raises(ValidationError, match="concavity violated"):
        loads(json.dumps(doc))


def test_load_rejects_unknown_version():
    doc = _doc()
    doc["version"] = 2
    with pytest.raises(VersionError):
        loads(json.dumps(doc))


def test_validation_lists_every_problem():
    doc = _doc()
    doc["pieces"][0]["d"] = [1.0, 1.0]
    doc["pieces"][2]["b"] = "x"
    with pytest.raises(ValidationError) as exc:
        loads(json.dumps(doc))
    assert len(exc.value.problems) == 2


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(kind="other"),
    lambda d: d["domain"].update(lower=[1.0, 5.0]),
    lambda d: d["pieces"][0].update(a=[1.0]),
    lambda d: d.update(pieces=[]),
])
def test_load_rejects_malformed(mutate):
    doc = _doc()
    mutate(doc)
    with pytest.raises(ValidationError):
        loads(json.dumps(doc))


def test_non_finite_coefficients_rejected():
    with pytest.raises(ValidationError):
        loads(dumps(ModelFile(_three_piece(), {})).replace("1e-300", "1e999"))
