import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from gaussmap.planar import (
    NotNormal, outside_start, polyline_turning, segment_intersections, signed_area,
    tangent_turning, whitney, winding_number, winding_numbers,
)

T = np.linspace(0, 2 * np.pi, 400, endpoint=False) + 0.0123


def circle(sign=1):
    return np.c_[np.cos(sign * T), np.sin(sign * T)]


def test_circle_rotation_number_and_area():
    for sign in (1, -1):
        w = whitney(circle(sign))
        assert (w.rho, w.mu, w.theta_plus, w.theta_minus) == (sign, sign, 0, 0)
        assert signed_area(circle(sign)) == pytest.approx(sign * np.pi, rel=1e-3)
        assert winding_number(circle(sign), (0.1, 0.0)) == sign


def test_figure_eight_has_zero_rotation():
    P = np.c_[np.sin(T), np.sin(2 * T) / 2]
    w = whitney(P)
    assert w.rho == 0
    assert len(w.crossings) == 1
    assert w.identity_residual == 0
    assert abs(polyline_turning(P)) < 1e-12


def test_limacon_inner_loop():
    r = 0.5 + np.cos(T)
    P = np.c_[r * np.cos(T), r * np.sin(T)]
    w = whitney(P)
    assert w.rho == 2 and w.mu == 1 and w.theta_plus_true == 1
    assert winding_numbers(P, np.array([[0.2, 0.0], [1.0, 0.0], [3.0, 0.0]])).tolist() == [2, 1, 0]


def test_crossing_below_angle_tolerance_is_not_normal():
    P = np.c_[np.sin(T), np.sin(2 * T) / 2]
    whitney(P, normal_tol=0.9)
    with pytest.raises(NotNormal):
        whitney(P, normal_tol=1.01)


def test_segment_intersections_of_a_bowtie():
    P = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    hits = segment_intersections(P)
    assert len(hits) == 1
    i, j, si, sj = hits[0]
    assert np.allclose(P[i] + si * (P[(i + 1) % 4] - P[i]), [0.5, 0.5])


def test_start_vertex_is_on_the_hull():
    P = circle()
    k = outside_start(P)
    assert winding_number(P, P[k] * 1.01) == 0


fourier = st.lists(st.floats(-1.0, 1.0), min_size=8, max_size=8)


@given(fourier, st.integers(1, 3))
def test_whitney_identity_on_random_trigonometric_curves(c, k):
    """Rotation number equals start sign plus signed true crossings."""
    t = np.linspace(0, 2 * np.pi, 1500, endpoint=False)
    x = np.cos(k * t) + 0.6 * (c[0] * np.cos(2 * t) + c[1] * np.sin(3 * t) + c[2] * np.cos(5 * t) + c[3] * np.sin(t))
    y = np.sin(k * t) + 0.6 * (c[4] * np.sin(2 * t) + c[5] * np.cos(3 * t) + c[6] * np.sin(5 * t) + c[7] * np.cos(t))
    P = np.c_[x, y]
    Tn = np.c_[np.gradient(x, t), np.gradient(y, t)]
    assume(np.min(np.linalg.norm(Tn, axis=1)) > 0.05)
    try:
        w = whitney(P)
    except NotNormal:
        assume(False)
    assert w.rho == round(tangent_turning(Tn))
    assert w.identity_residual == 0
    assert w.raw_identity_residual == 0
