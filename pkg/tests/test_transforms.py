import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from gaussmap.catalog import builtin, catenoid, enneper
from gaussmap.invariants import analyze
from gaussmap.polynomial import INF
from gaussmap.projection import InconclusiveAtTolerance
from gaussmap.transforms import (
    GUARD_BAND, ClosedFormCatenoid, EpsilonFamily, EpsilonTooLarge, FamilySweep, MinimalSurface,
    NotProperRegion, RotationFamily, RotationSpec, TargetTooFar, bend_end, catenoid_singular_curve,
    closed_form_cusp_count, critical_angle, delta0, max_principal_curvature, parallel_surface,
    rotated_analysis, rotated_catenoid_family, rotation_between, sampled_invariants, smoothstep,
    smoothstep_derivative, sweep, tilted,
)
from gaussmap.weierstrass import AEViolation, WeierstrassData

# frozen from an independent root finder (brentq on d tanh d = 1)
DELTA0 = 1.19967864025773


# rotations ---------------------------------------------------------------------


def test_rotation_spec_rejects_non_rotations():
    with pytest.raises(ValueError):
        RotationSpec(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ValueError):
        RotationSpec(np.eye(3) * 1.001)
    with pytest.raises(ValueError):
        RotationSpec(np.eye(2))


def test_rotation_spec_directions():
    assert RotationSpec.identity().is_identity()
    assert np.allclose(RotationSpec.tilt(0.3).direction, [0, -math.sin(0.3), math.cos(0.3)])
    assert RotationSpec.tilt(0.0).is_identity()
    spec = RotationSpec.from_axis_angle([0, 0, 1], 0.7)
    assert np.allclose(spec.direction, [0, 0, 1])


def test_rotated_analysis_refuses_inadmissible_direction():
    with pytest.raises(AEViolation) as info:
        rotated_analysis(catenoid(), RotationSpec.tilt(math.pi / 2))
    assert any("AE.5" in v for v in info.value.report.violations)


# the rotated catenoid -------------------------------------------------------------


def test_delta0_matches_independent_root():
    assert delta0() == pytest.approx(DELTA0, abs=1e-9)
    assert brentq(lambda d: d * math.tanh(d) - 1.0, 1.0, 2.0, xtol=1e-14) == pytest.approx(DELTA0, abs=1e-12)
    assert delta0() == pytest.approx(1 / math.tanh(delta0()), abs=1e-9)


def test_critical_angle_is_a_quarter_turn():
    assert critical_angle() == pytest.approx(math.pi / 4, abs=1e-8)


def test_closed_form_curve_lies_on_the_rotated_equator():
    t = np.linspace(0, 2 * np.pi, 50)
    for d in (0.2, 0.9, 1.4):
        pos, vel, nrm = catenoid_singular_curve(d, t)
        assert np.allclose(nrm[:, 2], 0.0, atol=1e-14)
        assert np.allclose(np.einsum("ij,ij->i", vel, nrm), 0.0, atol=1e-12)


@pytest.mark.parametrize("delta,count", [(0.3, 0), (0.7, 0), (0.78, 0), (0.79, 4), (1.0, 4), (1.2, 4), (1.4, 4)])
def test_closed_form_and_pipeline_cusp_counts_agree(delta, count):
    assert closed_form_cusp_count(delta) == count
    rep = rotated_analysis(catenoid(), RotationSpec.tilt(delta))
    assert rep.c_total == count
    assert rep.all_passed


# parallel surfaces -----------------------------------------------------------------


def test_parallel_offset_bound():
    data = catenoid()
    assert max_principal_curvature(data) == pytest.approx(1.0, rel=1e-3)
    with pytest.raises(EpsilonTooLarge):
        parallel_surface(data, 0.95)
    assert parallel_surface(data, -0.5).eps0 == pytest.approx(1 / 1.1, rel=1e-3)


def test_parallel_surface_offsets_along_the_normal():
    data = enneper()
    z = np.array([0.3 + 0.4j, -1.0 + 0.2j])
    base = MinimalSurface(data)
    assert np.array_equal(parallel_surface(data, 0.0).position(z), base.position(z))
    par = parallel_surface(data, 0.1)
    assert np.allclose(par.position(z) - base.position(z), 0.1 * base.normal(z))
    assert np.array_equal(par.normal(z), base.normal(z))


@pytest.mark.parametrize("eps,count", [(-0.1, 0), (0.1, 4)])
def test_parallel_surfaces_split_the_critical_catenoid(eps, count):
    rep = parallel_surface(catenoid(), eps).analyze(frame=RotationSpec.tilt(math.pi / 4).matrix)
    assert rep.c_total == count
    assert rep.all_passed


def test_critical_catenoid_is_inconclusive_without_offset():
    with pytest.raises(InconclusiveAtTolerance):
        rotated_analysis(catenoid(), RotationSpec.tilt(math.pi / 4))


# bending ---------------------------------------------------------------------------


def test_smoothstep_profile():
    x = np.linspace(-0.5, 1.5, 401)
    y = smoothstep(x)
    assert np.all(y[x <= 0] == 0) and np.all(y[x >= 1] == 1)
    assert np.all(np.diff(y) >= 0)
    h = 1e-6
    inner = x[(x > 0.01) & (x < 0.99)]
    fd = (smoothstep(inner + h) - smoothstep(inner - h)) / (2 * h)
    assert np.allclose(fd, smoothstep_derivative(inner), atol=1e-6)


def test_rotation_between_and_tilt():
    a = np.array([0.0, 0.0, 1.0])
    b = tilted(a, 0.2)
    assert np.arccos(a @ b) == pytest.approx(0.2)
    assert np.allclose(rotation_between(a, b) @ a, b)
    assert np.allclose(rotation_between(a, a), np.eye(3))


@pytest.fixture(scope="module")
def bent():
    par = parallel_surface(catenoid(), 0.1)
    target = tilted(par.normal_at(INF), 0.05)
    return par, target, bend_end(par, INF, target, R=1.5)


def test_bent_end_takes_the_target_normal(bent):
    par, target, b = bent
    assert np.allclose(b.normal_at(INF), target, atol=1e-12)
    # beyond the transition layer the surface is the rigidly rotated end
    z = np.exp(-np.linspace(9, 10, 5) * (1 + 0j)) ** -1
    assert np.allclose(b.position(z), par.position(z) @ b.A.T, atol=1e-9)
    assert np.allclose(b.normal(z), par.normal(z) @ b.A.T, atol=1e-9)
    far = b.normal(np.array([1e6 + 0j]))[0]
    assert np.linalg.norm(far - target) < 1e-5


def test_bending_leaves_the_rest_unchanged(bent):
    par, _, b = bent
    z = np.exp(1j * np.linspace(0, 2 * np.pi, 16, endpoint=False)) * np.array([[0.5], [1.0], [2.0]])
    z = z.ravel()
    assert np.array_equal(b.position(z), par.position(z))
    assert np.allclose(b.normal(z), par.normal(z), atol=1e-15)
    assert np.array_equal(b.normal_at(0j), par.normal_at(0j))


def test_bent_normals_stay_unit_and_continuous(bent):
    _, _, b = bent
    g = b.polar_grid(INF, np.linspace(-1.2, -3.0, 200), np.linspace(0, 2 * np.pi, 64, endpoint=False))
    assert np.allclose(np.linalg.norm(g.normals, axis=-1), 1.0)
    assert np.max(np.linalg.norm(np.diff(g.normals, axis=0), axis=-1)) < 0.05


def test_bending_bounds():
    par = parallel_surface(catenoid(), 0.1)
    with pytest.raises(TargetTooFar):
        bend_end(par, INF, tilted(par.normal_at(INF), 0.3), R=1.5)
    with pytest.raises(NotProperRegion):
        bend_end(par, INF, tilted(par.normal_at(INF), 0.05), R=0.01)
    with pytest.raises(ValueError):
        bend_end(par, 1 + 0j, [0, 0, 1], R=1.5)


# sampled invariants ----------------------------------------------------------------


@pytest.mark.parametrize("name,summary", [
    ("enneper", {"n": 1, "beta": {"0": 0, "inf": 0}, "I": {"inf": 3}, "l": 1}),
    ("enneper2", {"n": 2, "beta": {"0": 1, "inf": 1}, "I": {"inf": 5}, "l": 1}),
])
def test_sampled_invariants_match_the_analytic_ones(name, summary):
    data = builtin(name)
    s = sampled_invariants(MinimalSurface(data), ns=401, nt=128)
    assert s.summary() == summary
    rep = analyze(data)
    assert s.n == rep.n and s.l == rep.l
    assert s.branch_total == sum(b.order for b in rep.branches)
    assert np.max(np.abs(np.abs(s.locus) - 1.0)) < 1e-6


def test_sampled_invariants_need_ends_at_zero_or_infinity():
    from gaussmap.polynomial import RationalMap

    data = WeierstrassData(RationalMap.from_coeffs([0, 1]), RationalMap.from_coeffs([1], [-1, 1]), (1 + 0j, INF))
    with pytest.raises(ValueError):
        sampled_invariants(MinimalSurface(data))


# sweeps ----------------------------------------------------------------------------


def test_closed_form_sweep_brackets_the_critical_angle():
    grid = np.round(np.arange(0.0, 1.55 + 1e-9, 0.01), 10)
    res = sweep(ClosedFormCatenoid(), grid)
    (tr,) = res.transitions
    assert (tr.c_lo, tr.c_hi) == (0, 4)
    # limited by the 4096-point sampling of the closed-form curve
    assert abs(tr.estimate - math.pi / 4) < 1e-6
    assert tr.hi - tr.lo < 1e-9


def test_pipeline_sweep_agrees_with_closed_form_on_a_coarse_grid():
    grid = np.round(np.arange(0.05, 1.55, 0.1), 10)
    res = sweep(rotated_catenoid_family(), grid, refine=False)
    assert res.counts() == [closed_form_cusp_count(p) for p in grid]
    (tr,) = res.transitions
    assert tr.lo < math.pi / 4 < tr.hi


def test_guard_band_flags_the_critical_sample():
    fam = rotated_catenoid_family()
    s = fam(math.pi / 4 + GUARD_BAND / 2)
    assert not s.analyzed and s.flags[0].startswith("guard-band")
    assert fam(math.pi / 4 + 2 * GUARD_BAND).c == 4


def test_epsilon_family_samples():
    fam = EpsilonFamily()
    assert fam(-0.05).c == 0 and fam(0.05).c == 4
    assert fam(0.0).flags[0].startswith("InconclusiveAtTolerance")
    assert fam(2.0).flags[0].startswith("EpsilonTooLarge")


def test_rotation_family_about_another_axis():
    fam = RotationFamily(enneper(), (0.0, 1.0, 0.0))
    s = fam(0.2)
    assert s.analyzed and s.l == 1 and not s.flags


def test_sweep_outputs():
    res = sweep(ClosedFormCatenoid(), [0.5, 1.0], refine=False)
    lines = res.to_csv().splitlines()
    assert lines[0] == "parameter,c,omega,l,flags"
    assert lines[1].startswith("0.5,0,,2,")
    doc = json.loads(res.to_json())
    assert doc["format_version"] == 1
    assert doc["transitions"][0]["c_hi"] == 4
    with pytest.raises(ValueError):
        FamilySweep("x", "p", np.array([0.2, 0.1]), [])


def test_parallel_sweep_matches_serial():
    grid = np.linspace(0.6, 1.0, 9)
    a = sweep(ClosedFormCatenoid(), grid)
    b = sweep(ClosedFormCatenoid(), grid, jobs=2)
    assert a.to_json() == b.to_json()
