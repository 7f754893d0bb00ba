import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import GOLDEN, PHI
from superdense.errors import OrientationReversing, TooFewSamples
from superdense.geometry import delaunay_edge_audit, diameter, surface_metrics, systole
from superdense.moduli import (
    BOUNDED,
    DIVERGENT,
    DiameterTrack,
    MatrixAction,
    apply_matrix,
    boundedness_diagnostic,
    g_t,
    geodesic_track,
    lagrange_reduce,
    renormalize,
    rotate_to_vertical,
)
from superdense.surface import build_torus, l_surface, regular_octagon, same_surface

TORUS = build_torus((1, 0), (0, 1))


def gauss_reduced(u, v):
    """Textbook Gauss reduction, written from scratch for the oracle."""
    u, v = np.array(u, float), np.array(v, float)
    while True:
        if u @ u > v @ v:
            u, v = v, u
        k = math.floor(u @ v / (u @ u) + 0.5)
        if k == 0:
            return u, v
        v = v - k * u


def torus_diameter_oracle(t, direction):
    """Covering radius of the lattice g_t R Z^2: circumradius of a reduced acute basis triangle."""
    dx, dy = direction
    R = np.array([[dy, -dx], [dx, dy]])
    G = np.diag([math.exp(t), math.exp(-t)]) @ R
    u, v = gauss_reduced(G[:, 0], G[:, 1])
    if u @ v < 0:
        v = -v
    a, b, c = np.hypot(*u), np.hypot(*v), np.hypot(*(u - v))
    area2 = abs(u[0] * v[1] - u[1] * v[0])
    circ = a * b * c / (2 * area2)
    half_diag = np.hypot(*(u + v)) / 2
    return circ, half_diag


def test_g_ln2_gives_rectangle():
    out = apply_matrix(TORUS, g_t(math.log(2)))
    assert same_surface(out, build_torus((2, 0), (0, 0.5)))


def test_identity_and_rotation():
    assert same_surface(apply_matrix(TORUS, [[1, 0], [0, 1]]), TORUS)
    L = l_surface()
    r = apply_matrix(L, MatrixAction.rotation(math.pi / 2))
    a, b = diameter(L, 0.05), diameter(r, 0.05)
    assert abs(a.value - b.value) <= a.error + b.error


def test_orientation_reversing():
    with pytest.raises(OrientationReversing):
        apply_matrix(TORUS, [[1, 0], [0, -1]])


@pytest.mark.parametrize("d,expect", [((0, 1), [[1, 0], [0, 1]]), ((1, 0), [[0, -1], [1, 0]]),
                                      ((1, 1), [[0.5**0.5, -(0.5**0.5)], [0.5**0.5, 0.5**0.5]])])
def test_rotate_to_vertical(d, expect):
    R = rotate_to_vertical(d)
    assert np.allclose(R.array, expect, atol=1e-15)
    v = np.array(d, float) / np.hypot(*d)
    assert np.allclose(R.array @ v, [0, 1], atol=1e-15)


def test_renormalize_examples():
    assert same_surface(renormalize(build_torus((1, 0), (5, 1))), TORUS)
    rect = build_torus((2, 0), (0, 0.5))
    assert same_surface(renormalize(rect), rect)


def test_renormalize_golden_g3_edges():
    s = apply_matrix(apply_matrix(TORUS, rotate_to_vertical(GOLDEN)), g_t(3))
    audit = delaunay_edge_audit(renormalize(s))
    assert audit.violations == 0


@pytest.mark.parametrize("surface", [l_surface(), regular_octagon()], ids=["L3", "octagon"])
def test_renormalize_is_isometry(surface):
    s = apply_matrix(surface, [[1, 0.7], [0, 1]])
    r = renormalize(s)
    assert abs(r.area - s.area) <= 1e-9 * s.area
    assert abs(systole(r) - systole(s)) <= 1e-9
    h = systole(s) / 20
    a, b = diameter(s, h), diameter(r, h)
    assert abs(a.value - b.value) <= 2 * max(a.error, b.error)


@settings(max_examples=40, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10))
def test_group_law(s, t):
    a = apply_matrix(apply_matrix(TORUS, g_t(s)), g_t(t))
    b = apply_matrix(TORUS, g_t(s + t))
    # exp(s) exp(t) and exp(s + t) may differ in the last bit
    assert np.allclose(a.faces[0], b.faces[0], rtol=1e-13, atol=0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-10, 10))
def test_area_invariance(t):
    for s in (TORUS, l_surface()):
        assert abs(apply_matrix(s, g_t(t)).area - s.area) <= 1e-9 * s.area


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_lagrange_reduce(a, b, c, d):
    det = a * d - b * c
    if abs(det) < 1e-2:
        return
    u, v = lagrange_reduce((a, b), (c, d))
    assert abs(abs(u[0] * v[1] - u[1] * v[0]) - abs(det)) <= 1e-9 * max(1, abs(det))
    assert u[0] * v[1] - u[1] * v[0] > 0
    short = min(u @ u, v @ v)
    assert 0 <= u @ v <= short / 2 * (1 + 1e-9) + 1e-12
    B = np.array([[a, c], [b, d]])
    brute = min(float(np.sum((B @ (i, j)) ** 2)) for i in range(-30, 31) for j in range(-30, 31) if (i, j) != (0, 0))
    assert short <= brute * (1 + 1e-9) + 1e-12


@pytest.mark.parametrize("surface", [TORUS, l_surface()], ids=["torus", "L3"])
def test_diameter_stability(surface):
    m = np.array([[1.2, 0.3], [0.1, 0.9]])
    m2 = m + np.array([[7e-4, -5e-4], [3e-4, 6e-4]])
    h = 0.02
    a = diameter(apply_matrix(surface, m), h)
    b = diameter(apply_matrix(surface, m2), h)
    assert abs(a.value - b.value) <= 1e-2 * a.value + 2 * max(a.error, b.error)


def test_track_t_zero():
    tr = geodesic_track(TORUS, GOLDEN, t_max=0)
    assert len(tr.samples) == 1
    ref = surface_metrics(renormalize(apply_matrix(TORUS, rotate_to_vertical(GOLDEN))), tr.samples[0].h)
    assert tr.samples[0].diameter == pytest.approx(ref.diameter, abs=1e-12)
    assert tr.samples[0].systole == pytest.approx(ref.systole, abs=1e-12)


def test_vertical_track_closed_form(vertical_track):
    for s in vertical_track.samples:
        if s.t in (1.0, 2.0, 3.0):
            exact = math.sqrt(math.exp(2 * s.t) + math.exp(-2 * s.t)) / 2
            assert abs(s.diameter - exact) <= 5 * s.h + 1e-6


def test_vertical_diagnostic(vertical_track):
    v = boundedness_diagnostic(vertical_track)
    assert v.verdict == DIVERGENT
    assert abs(v.growth_rate - 1.0) <= 0.1


def test_oracle_sanity():
    c, hd = torus_diameter_oracle(0.0, (0.0, 1.0))
    assert c == pytest.approx(math.sqrt(2) / 2) and hd == pytest.approx(math.sqrt(2) / 2)
    c, _ = torus_diameter_oracle(2.0, (0.0, 1.0))
    assert c == pytest.approx(math.sqrt(math.exp(4) + math.exp(-4)) / 2)


def test_golden_track_against_gauss_oracle(golden_track):
    circ = [torus_diameter_oracle(s.t, GOLDEN) for s in golden_track.samples]
    D_star = max(c for c, _ in circ)
    for s, (c, hd) in zip(golden_track.samples, circ):
        assert abs(s.diameter - c) <= 5 * s.h
        assert s.diameter <= D_star + 5 * s.h
        # the half-diagonal of a reduced basis is only an upper bound
        assert c <= hd + 1e-12
    assert boundedness_diagnostic(golden_track).verdict == BOUNDED


def test_golden_diameter_bounded_by_phi_constant(golden_track):
    # the g_t-orbit of the golden lattice is periodic up to rotation, so one period bounds it
    period = math.log(PHI)
    one = [torus_diameter_oracle(k * period / 40, GOLDEN)[0] for k in range(41)]
    assert golden_track.D_max <= max(one) + 5 * max(s.h for s in golden_track.samples)


def test_constant_synthetic_track():
    tr = DiameterTrack.synthetic(np.arange(12) * 0.5, [1.0] * 12)
    v = boundedness_diagnostic(tr)
    assert v.verdict == BOUNDED and abs(v.growth_rate) < 1e-12


def test_too_few_samples():
    with pytest.raises(TooFewSamples):
        boundedness_diagnostic(DiameterTrack.synthetic([0, 1, 2], [1, 1, 1]))


def test_track_csv_header(vertical_track):
    lines = vertical_track.to_csv().splitlines()
    assert lines[0] == "t,diameter,diameter_err,systole"
    assert len(lines) == len(vertical_track.samples) + 1
