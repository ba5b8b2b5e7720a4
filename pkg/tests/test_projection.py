import math

import numpy as np
import pytest

from gaussmap.catalog import builtin, catenoid, enneper
from gaussmap.projection import (
    TYPE_A, TYPE_B, EndOnCircle, InconclusiveAtTolerance, TraceOptions, classify_cusps,
    decompose_regions, detect_cusps, regularize, trace_singular_set,
)
from gaussmap.transforms import RotationSpec

CATALOG = ("catenoid", "enneper", "enneper2", "enneper3")


@pytest.fixture(scope="module")
def traced():
    out = {}
    for name in CATALOG:
        data = builtin(name)
        curves = trace_singular_set(data)
        for c in curves:
            detect_cusps(data, c)
            classify_cusps(data, c)
        out[name] = (data, curves)
    return out


@pytest.mark.parametrize("name,nu", [("catenoid", 1), ("enneper", 1), ("enneper2", 2), ("enneper3", 3)])
def test_vertical_singular_set_is_the_unit_circle(traced, name, nu):
    data, curves = traced[name]
    (c,) = curves
    assert c.nu == nu
    assert np.max(np.abs(np.abs(c.z) - 1.0)) < 1e-12
    # the lifted curve closes up and stays on the equator of the Gauss map
    assert c.lift.closure_residual < 1e-9
    assert np.max(np.abs(c.lift.G @ c.frame[2])) < 1e-12


def test_enneper_cusps_match_closed_form(traced):
    # projected curve t -> Re(z - z^3/3, i(z + z^3/3))/2 at z = e^{it} stops at t = pi/4 + k pi/2
    _, (c,) = traced["enneper"]
    got = np.sort(np.mod(np.angle([k.z_star for k in c.cusps]), 2 * np.pi))
    assert np.allclose(got, np.pi / 4 + np.pi / 2 * np.arange(4), atol=1e-9)
    assert not any(k.degenerate for k in c.cusps)


@pytest.mark.parametrize("name,c_total", [("catenoid", 0), ("enneper", 4), ("enneper2", 6), ("enneper3", 8)])
def test_cusp_counts_and_types(traced, name, c_total):
    _, curves = traced[name]
    cusps = [k for c in curves for k in c.cusps]
    assert len(cusps) == c_total
    for k in cusps:
        # a cusp is a loop on exactly one side of the curve
        assert {k.side_class[1], k.side_class[-1]} == {TYPE_A, TYPE_B}


def test_projected_velocity_vanishes_at_cusps(traced):
    _, (c,) = traced["enneper3"]
    s = np.array([k.t_star for k in c.cusps])
    speed = np.median(np.linalg.norm(c.lift.dGamma, axis=1))
    assert np.max(np.abs(c.beta(s))) < 1e-9 * speed


def test_regularized_curves_satisfy_whitney(traced):
    for name in CATALOG:
        _, curves = traced[name]
        for c in curves:
            for side, reg in c.regularized.items():
                assert reg.whitney.identity_residual == 0, (name, side)
                assert abs(reg.delta) <= TraceOptions().delta1


def test_regularization_lies_on_the_offset_latitude(traced):
    data, (c,) = traced["enneper"]
    reg = regularize(data, c, 1, 1e-3)
    G = data.gauss_vec(reg.z)
    assert np.allclose(G @ c.frame[2], 1e-3, atol=1e-10)


def test_region_decomposition_of_enneper(traced):
    data, curves = traced["enneper"]
    regs = decompose_regions(data, curves).regions
    by_sign = {r.sign: r for r in regs}
    assert set(by_sign) == {1, -1}
    assert by_sign[1].ends and not by_sign[-1].ends
    assert all(r.euler_characteristic == 1 for r in regs)
    assert sum(r.euler_characteristic for r in regs) == 2


def test_branch_points_are_assigned_to_regions(traced):
    data, curves = traced["enneper3"]
    regs = decompose_regions(data, curves).regions
    assert sorted(r.branch_sum for r in regs) == [2, 2]


def test_tilted_direction_gives_one_curve_and_fiber_count():
    data = catenoid()
    A = RotationSpec.tilt(0.4).matrix
    (c,) = trace_singular_set(data, frame=A)
    G = data.gauss_vec(c.z)
    assert np.max(np.abs(G @ A[2])) < 1e-12
    assert c.fiber_checks >= TraceOptions().samples_per_turn


def test_end_on_the_traced_circle_is_reported():
    with pytest.raises(EndOnCircle):
        trace_singular_set(catenoid(), (1.0, 0.0, 0.0))


def test_critical_catenoid_has_degenerate_points():
    data = catenoid()
    (c,) = trace_singular_set(data, frame=RotationSpec.tilt(math.pi / 4).matrix)
    cusps = detect_cusps(data, c)
    assert len(cusps) == 2 and all(k.degenerate for k in cusps)
    assert sorted(round(k.t_star / math.pi, 6) % 2 for k in cusps) == [0.0, 1.0]
    with pytest.raises(InconclusiveAtTolerance):
        classify_cusps(data, c)


@pytest.mark.parametrize("eps,count", [(0.05, 4), (-0.05, 0)])
def test_parallel_surface_resolves_critical_points(eps, count):
    data = catenoid()
    (c,) = trace_singular_set(data, frame=RotationSpec.tilt(math.pi / 4).matrix, eps=eps)
    cusps = detect_cusps(data, c)
    assert len(cusps) == count
    assert not any(k.degenerate for k in cusps)


def test_trace_is_deterministic():
    a = trace_singular_set(enneper())[0]
    b = trace_singular_set(enneper())[0]
    assert np.array_equal(a.z, b.z) and np.array_equal(a.s, b.s)
