import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superdense.errors import DegenerateBasis, DisconnectedSurface, ParseError
from superdense.experiments import load_surface
from superdense.surface import (
    EdgeGluing,
    RectangleTable,
    RightTriangleTable,
    TranslationSurface,
    area,
    build_square_tiled,
    build_torus,
    convexified,
    dumps_surface,
    is_square_tiled,
    iter_builtin_names,
    l_surface,
    loads_surface,
    parse_permutation,
    regular_octagon,
    same_surface,
    stratum_and_genus,
    unfold_billiard,
    validate,
)

BUILTINS = list(iter_builtin_names())


def euler_genus(s):
    # independent of the library's genus: count vertex classes by brute-force orbit walking
    corners = {(f, j) for f, v in enumerate(s.faces) for j in range(len(v))}
    seen, classes = set(), 0
    for c in sorted(corners):
        if c in seen:
            continue
        classes += 1
        stack = [c]
        while stack:
            f, j = stack.pop()
            if (f, j) in seen:
                continue
            seen.add((f, j))
            # corner j of f is the start of edge j; its glued partner edge ends at that point
            g, k = s.partner[(f, j)]
            stack.append((g, (k + 1) % len(s.faces[g])))
            n = len(s.faces[f])
            g, k = s.partner[(f, (j - 1) % n)]
            stack.append((g, k))
    chi = classes - len(s.gluings) + len(s.faces)
    return (2 - chi) // 2


@pytest.mark.parametrize("name", BUILTINS)
def test_builtins_valid(name):
    s = load_surface(name)
    assert validate(s).ok
    assert s.genus == euler_genus(s)


@pytest.mark.parametrize("name", BUILTINS)
def test_gauss_bonnet(name):
    s = load_surface(name)
    excess = sum(c.total_angle - 2 * math.pi for c in s.cone_points)
    assert abs(excess - 2 * math.pi * (2 * s.genus - 2)) <= 1e-8


def test_unit_torus():
    s = build_torus((1, 0), (0, 1))
    assert validate(s).ok
    sig, g = stratum_and_genus(s)
    assert g == 1 and sig.kappa == ()
    assert area(s) == 1


def test_length_mismatch():
    sq = [(0, 0), (1, 0), (1, 1), (0, 1)]
    tall = [(0, 0), (1, 0), (1, 2), (0, 2)]
    s = TranslationSurface([sq, tall], [EdgeGluing(0, 3, 1, 1), EdgeGluing(0, 0, 0, 2),
                                        EdgeGluing(1, 0, 1, 2), EdgeGluing(0, 1, 1, 3)])
    assert "edge length mismatch" in validate(s).kinds()


def test_l_surface():
    s = l_surface()
    assert validate(s).ok
    sig, g = stratum_and_genus(s)
    assert g == 2 and sig.kappa == (2,)
    assert area(s) == 3
    cones = [c for c in s.cone_points if c.is_singular]
    assert len(cones) == 1 and abs(cones[0].total_angle - 6 * math.pi) < 1e-9


def test_octagon():
    sig, g = stratum_and_genus(regular_octagon())
    assert g == 2 and sig.kappa == (2,)


@pytest.mark.parametrize("e1,e2", [((1, 0), (0, 1)), ((2, 0), (0, 0.5)), ((1, 0), (1, 1))])
def test_build_torus_examples(e1, e2):
    s = build_torus(e1, e2)
    assert validate(s).ok
    assert s.genus == 1


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 10), st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 10))
def test_torus_area_is_det(a, b, c, d):
    det = a * d - b * c
    if det <= 1e-3:
        with pytest.raises(DegenerateBasis):
            build_torus((a, c), (b, d))
        return
    s = build_torus((a, c), (b, d))
    assert abs(s.area - det) <= 1e-12 * det


def test_degenerate_basis():
    with pytest.raises(DegenerateBasis):
        build_torus((1, 1), (2, 2))


def test_square_tiled_examples():
    one = build_square_tiled([0], [0])
    assert same_surface(one, build_torus((1, 0), (0, 1)))
    L = build_square_tiled("(1 2)(3)", "(1 3)(2)")
    assert L.genus == 2 and L.area == 3
    dbl = build_square_tiled("(1 2)", "id")
    assert dbl.genus == 1 and dbl.area == 2 and validate(dbl).ok


def test_square_tiled_disconnected():
    with pytest.raises(DisconnectedSurface):
        build_square_tiled([0, 1], [0, 1])


@pytest.mark.parametrize("text,n,expect", [("(1 2)(3)", None, [1, 0, 2]), ("(1,3)", 3, [2, 1, 0]),
                                           ("2,3,1", None, [1, 2, 0]), ("id", 2, [0, 1])])
def test_parse_permutation(text, n, expect):
    assert parse_permutation(text, n) == expect


def test_unfold_rectangles():
    for a, b in [(1, 1), (2, 1)]:
        s = unfold_billiard(RectangleTable(a, b))
        assert len(s.faces) == 4 and validate(s).ok
        assert s.genus == 1 and abs(s.area - 4 * a * b) < 1e-12
        lo = np.min([v.min(axis=0) for v in s.faces], axis=0)
        hi = np.max([v.max(axis=0) for v in s.faces], axis=0)
        assert np.allclose(hi - lo, [2 * a, 2 * b])


def test_unfold_triangle_pi_over_8():
    s = unfold_billiard(RightTriangleTable(8))
    assert len(s.faces) == 16 and validate(s).ok and s.genus == 2


def test_json_round_trip():
    for name in BUILTINS:
        s = load_surface(name)
        t = loads_surface(dumps_surface(s))
        assert dumps_surface(t) == dumps_surface(s)
        assert all(np.array_equal(a, b) for a, b in zip(s.faces, t.faces))


def test_bad_json():
    with pytest.raises(ParseError):
        loads_surface("{not json")


def test_missing_gluing_message():
    d = json.loads(dumps_surface(build_torus((1, 0), (0, 1))))
    d["gluings"] = [g for g in d["gluings"] if g["eb"] != 2]
    rep = validate(TranslationSurface.from_json_dict(d))
    assert "unpaired edge (face 0, edge 2)" in [v.message for v in rep.violations]


def test_square_tiled_detection():
    assert is_square_tiled(l_surface())
    assert not is_square_tiled(regular_octagon())
    assert not is_square_tiled(build_torus((2, 0), (0, 0.5)))


def test_convexified_same_surface():
    s = unfold_billiard(RightTriangleTable(8))
    c = convexified(l_surface())
    assert c.convex and validate(c).ok
    assert c.genus == 2 and abs(c.area - 3) < 1e-12
    assert convexified(s) is s or convexified(s).convex
