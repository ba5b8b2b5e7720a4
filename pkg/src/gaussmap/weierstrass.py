"""Genus-zero Weierstrass data and the geometry it generates.

A surface is given by a rational Gauss map ``g`` (stereographic coordinate of
the unit normal) and a rational height differential ``dh = h dz``.  The
immersion is ``x = Re int phi`` with

    phi1 = (1/g - g) h / 2,   phi2 = i (1/g + g) h / 2,   phi3 = h.

The stereographic convention is ``G = (2 Re g, 2 Im g, |g|^2 - 1)/(|g|^2 + 1)``,
so the vertical Jacobian of the projection is ``J = G3`` and the singular set
of the vertical projection is ``{|g| = 1}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.integrate import quad_vec

from .polynomial import (
    INF,
    ExtendedComplex,
    Polynomial,
    PoleAt,
    RationalMap,
    cluster_roots,
    ext_distance,
    is_inf,
)

#: roots of the branching locus closer than this (relative) are merged
BRANCH_CLUSTER_TOL = 1e-5
#: a point closer than this (chordal) to an end counts as the end
END_TOL = 1e-9


class DegenerateData(ValueError):
    """The data do not define an immersion at the requested point."""


class PathThroughPole(ValueError):
    pass


class PeriodViolation(ValueError):
    pass


class NotComplete(ValueError):
    pass


class MetricDegenerate(ValueError):
    pass


class AEViolation(ValueError):
    """The data fail the admissibility checks for the requested direction."""

    def __init__(self, report: "ValidityReport", direction=None):
        super().__init__("; ".join(report.violations) or "admissibility violated")
        self.report = report
        self.direction = None if direction is None else tuple(float(x) for x in direction)


# ---------------------------------------------------------------------------
# stereographic helpers


def gauss_from_g(gv) -> np.ndarray:
    """Unit normals for an array of (finite or infinite) values of ``g``.

    Infinite entries map to the north pole.  Result has shape ``(..., 3)``.
    """
    gv = np.asarray(gv, dtype=complex)
    with np.errstate(invalid="ignore", over="ignore"):
        m = np.abs(gv) ** 2
        out = np.stack([2 * gv.real, 2 * gv.imag, m - 1.0], axis=-1) / (m + 1.0)[..., None]
    big = ~np.isfinite(m) | (m > 1e300)
    if np.any(big):
        out[big] = (0.0, 0.0, 1.0)
    # recompute large |g| through the chart w = 1/g for accuracy
    far = (m > 1e8) & ~big
    if np.any(far):
        w = 1.0 / gv[far]
        mw = np.abs(w) ** 2
        out[far] = np.stack([2 * w.real, -2 * w.imag, 1.0 - mw], axis=-1) / (1.0 + mw)[..., None]
    return out


def g_from_gauss(x: Sequence[float]) -> ExtendedComplex:
    """Inverse stereographic projection, INF for the north pole."""
    x1, x2, x3 = (float(v) for v in x)
    if x3 > 1.0 - 1e-15:
        return INF
    return complex(x1, x2) / (1.0 - x3)


def homogeneous_g(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Homogeneous stereographic coordinates ``(a, b)`` with ``g = a/b``."""
    x = np.asarray(x, dtype=float)
    return x[..., 0] + 1j * x[..., 1], 1.0 - x[..., 2]


def orthonormal_frame(direction: Sequence[float]) -> np.ndarray:
    """Right-handed frame ``(e1', e2', u)`` as the rows of a 3x3 matrix.

    For ``u = e3`` this is the identity, so projected coordinates are the
    usual horizontal coordinates.
    """
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    a = np.cross([0.0, 1.0, 0.0], u)
    if np.linalg.norm(a) < 1e-8:
        a = np.cross(u, [1.0, 0.0, 0.0])
    e1 = a / np.linalg.norm(a)
    e2 = np.cross(u, e1)
    return np.array([e1, e2, u])


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True, eq=False)
class EndData:
    end: ExtendedComplex
    geometric_index: int
    gauss_image: tuple[float, float, float]


@dataclass(frozen=True, eq=False)
class BranchRecord:
    location: ExtendedComplex
    order: int


@dataclass(frozen=True, eq=False)
class WeierstrassData:
    """Genus-zero Weierstrass data ``(g, h dz)`` with its set of ends."""

    g: RationalMap
    h: RationalMap
    ends: tuple = ()
    name: str = "surface"

    def __post_init__(self):
        object.__setattr__(self, "g", self.g.reduced())
        object.__setattr__(self, "h", self.h.reduced())
        ends = tuple(INF if is_inf(e) else complex(e) for e in self.ends)
        object.__setattr__(self, "ends", ends)

    # -- derived rational maps ---------------------------------------------

    @cached_property
    def gprime(self) -> RationalMap:
        return self.g.derivative()

    @cached_property
    def phi(self) -> tuple[RationalMap, RationalMap, RationalMap]:
        P, Q = self.g.num, self.g.den
        H, K = self.h.num, self.h.den
        den = P * Q * K
        phi1 = RationalMap((Q * Q - P * P) * H * 0.5, den).reduced()
        phi2 = RationalMap((Q * Q + P * P) * H * 0.5j, den).reduced()
        return phi1, phi2, self.h

    @cached_property
    def dphi(self) -> tuple[RationalMap, RationalMap, RationalMap]:
        return tuple(p.derivative() for p in self.phi)

    @cached_property
    def f(self) -> RationalMap:
        """The classical ``f = h/g`` (so that ``phi3 = f g``)."""
        return (self.h / self.g).reduced()

    @cached_property
    def finite_ends(self) -> np.ndarray:
        return np.array([e for e in self.ends if not is_inf(e)], dtype=complex)

    @property
    def has_end_at_infinity(self) -> bool:
        return any(is_inf(e) for e in self.ends)

    def is_end(self, z: ExtendedComplex, tol: float = END_TOL) -> bool:
        return any(ext_distance(z, e) <= tol for e in self.ends)

    # -- vectorised kernels --------------------------------------------------

    def phi_vec(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.stack([p(z) for p in self.phi])

    def dphi_vec(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.stack([p(z) for p in self.dphi])

    def gauss_vec(self, z) -> np.ndarray:
        return gauss_from_g(self.g(np.asarray(z, dtype=complex)))


# ---------------------------------------------------------------------------
# operations


def eval_phi(data: WeierstrassData, z: complex) -> tuple[complex, complex, complex]:
    """The Weierstrass 1-form coefficients at a finite, non-end point."""
    if is_inf(z) or data.is_end(z):
        raise PoleAt(z)
    z = complex(z)
    vals = []
    for p in data.phi:
        if abs(complex(p.den(z))) <= 1e-13 * max(1.0, np.max(np.abs(p.den.coeffs))):
            if abs(complex(data.g.num(z))) <= 1e-13 * max(1.0, np.max(np.abs(data.g.num.coeffs))):
                raise DegenerateData(f"g vanishes at {z} without a compensating zero of h")
            raise PoleAt(z)
        vals.append(complex(p(z)))
    return tuple(vals)


def _poles_of_phi(data: WeierstrassData) -> list[complex]:
    pts: list[complex] = []
    for p in data.phi:
        if p.den.degree > 0:
            pts.extend(complex(r) for r, _ in cluster_roots(p.den.roots(), 1e-6))
    pts.extend(complex(e) for e in data.finite_ends)
    uniq: list[complex] = []
    for q in pts:
        if all(abs(q - r) > 1e-9 * (1 + abs(q)) for r in uniq):
            uniq.append(q)
    return uniq


def _route(a: complex, b: complex, poles: list[complex], side: int = 1, depth: int = 0) -> list[complex]:
    """Piecewise-linear path from a to b detouring around nearby poles."""
    if depth > 8 or a == b:
        return [a, b]
    d = b - a
    L = abs(d)
    unit = d / L
    worst = None
    for p in poles:
        others = [abs(p - q) for q in poles if q != p] + [abs(p - a), abs(p - b)]
        clearance = 0.5 * min(others) if others else 0.5 * L
        s = np.clip(((p - a) * np.conj(unit)).real, 0.0, L)
        dist = abs(a + s * unit - p)
        if dist < clearance:
            if abs(p - a) < 1e-14 or abs(p - b) < 1e-14:
                raise PathThroughPole(p)
            if worst is None or dist / clearance < worst[0]:
                worst = (dist / clearance, p, clearance)
    if worst is None:
        return [a, b]
    _, p, r = worst
    nrm = 1j * unit * side
    foot_side = ((p - a) * np.conj(nrm)).real
    # keep the pole on the far side of the detour
    offset = -r * nrm if foot_side > 0 else r * nrm
    if abs(foot_side) < 1e-300:
        offset = -r * nrm
    v1 = p - r * unit + offset
    v2 = p + r * unit + offset
    left = _route(a, v1, poles, side, depth + 1)
    mid = _route(v1, v2, poles, side, depth + 1)
    right = _route(v2, b, poles, side, depth + 1)
    return left[:-1] + mid[:-1] + right


def _integrate_path(data: WeierstrassData, path: list[complex], tol: float) -> np.ndarray:
    total = np.zeros(3)
    for a, b in zip(path[:-1], path[1:]):
        d = b - a

        def integrand(t, a=a, d=d):
            return (data.phi_vec(a + t * d) * d).real

        val, _ = quad_vec(integrand, 0.0, 1.0, epsabs=tol, epsrel=tol)
        total += val
    return total


def eval_immersion(data: WeierstrassData, z: complex, basepoint: complex,
                   tol: float = 1e-11, check_periods: bool = True) -> np.ndarray:
    """Position ``Re int_basepoint^z phi`` along a pole-avoiding path."""
    if is_inf(z) or data.is_end(z):
        raise PoleAt(z)
    z, basepoint = complex(z), complex(basepoint)
    if z == basepoint:
        return np.zeros(3)
    poles = _poles_of_phi(data)
    path = _route(basepoint, z, poles, side=1)
    x = _integrate_path(data, path, tol)
    if check_periods:
        other = _route(basepoint, z, poles, side=-1)
        if other != path:
            y = _integrate_path(data, other, tol)
            if np.max(np.abs(x - y)) > 1e3 * tol * (1 + np.max(np.abs(x))):
                raise PeriodViolation(f"paths to {z} disagree by {np.max(np.abs(x - y)):.3e}")
    return x


def eval_gauss(data: WeierstrassData, z: ExtendedComplex) -> np.ndarray:
    gv = data.g.at(z)
    if is_inf(gv):
        return np.array([0.0, 0.0, 1.0])
    return gauss_from_g(np.array([gv]))[0]


def curvature_and_metric(data: WeierstrassData, z: complex) -> tuple[float, float]:
    """Conformal factor ``lambda`` (``ds = lambda |dz|``) and Gauss curvature."""
    if is_inf(z) or data.is_end(z):
        raise PoleAt(z)
    z = complex(z)
    gv = data.g.at(z)
    if is_inf(gv) or abs(gv) > 1.0:
        # chart w = 1/g:  lambda = |h g| (1 + |w|^2) / 2
        w = data.g.reciprocal()
        wv = complex(w(z))
        hg = (data.h * data.g).reduced().at(z)
        if is_inf(hg):
            raise MetricDegenerate(f"metric blows up at {z}")
        spherical = abs(complex(w.derivative()(z))) / (1.0 + abs(wv) ** 2)
        lam = 0.5 * abs(complex(hg)) * (1.0 + abs(wv) ** 2)
    else:
        fv = data.f.at(z)
        if is_inf(fv):
            raise MetricDegenerate(f"metric blows up at {z}")
        gv = complex(gv)
        spherical = abs(complex(data.gprime(z))) / (1.0 + abs(gv) ** 2)
        lam = 0.5 * abs(complex(fv)) * (1.0 + abs(gv) ** 2)
    if not np.isfinite(lam) or lam < 1e-300:
        raise MetricDegenerate(f"metric degenerates at {z}")
    K = -(2.0 * spherical / lam) ** 2
    return float(lam), float(K)


def _local_degree_at_infinity(g: RationalMap) -> int:
    P, Q = g.num, g.den
    k = P.degree - Q.degree
    if k != 0:
        return abs(k)
    c = P.lead / Q.lead
    R = P - Q * c
    if R.is_zero:
        return 0
    # R has leading terms cancelled; trim relative to the size of P
    scale = max(np.max(np.abs(P.coeffs)), abs(c) * np.max(np.abs(Q.coeffs)))
    coeffs = R.coeffs.copy()
    kk = len(coeffs)
    while kk > 1 and abs(coeffs[kk - 1]) <= 1e-11 * scale:
        kk -= 1
    return Q.degree - (kk - 1)


def degree_and_branch_points(data: WeierstrassData) -> tuple[int, list[BranchRecord]]:
    """Degree ``n`` of ``g`` and its branch points (including infinity)."""
    g = data.g
    n = g.degree
    P, Q = g.num, g.den
    W = P.derivative() * Q - P * Q.derivative()
    branches: list[BranchRecord] = []
    if W.degree > 0:
        for loc, mult in cluster_roots(W.roots(), BRANCH_CLUSTER_TOL):
            branches.append(BranchRecord(loc, mult))
    beta_inf = _local_degree_at_infinity(g) - 1
    if beta_inf > 0:
        branches.append(BranchRecord(INF, beta_inf))
    return n, branches


def _pole_order_of_form(r: RationalMap, w: ExtendedComplex) -> int:
    """Pole order of the 1-form ``r(z) dz`` at ``w`` (0 if holomorphic)."""
    if r.num.is_zero:
        return 0
    if is_inf(w):
        return max(0, r.num.degree - r.den.degree + 2)
    return max(0, -r.order_at(w))


def geometric_indices(data: WeierstrassData) -> list[EndData]:
    out = []
    for w in data.ends:
        order = max(_pole_order_of_form(p, w) for p in data.phi)
        if order <= 1:
            raise NotComplete(f"end {w} has maximal pole order {order}")
        out.append(EndData(w, order - 1, tuple(float(v) for v in eval_gauss(data, w))))
    return out


def residue(r: RationalMap, w: ExtendedComplex, radius: float | None = None) -> complex:
    """Residue of ``r(z) dz`` at ``w`` by a trapezoidal contour integral."""
    poles = [p for p, _ in r.poles() if not is_inf(p)]
    if is_inf(w):
        R = 2.0 * (1.0 + max([abs(p) for p in poles] or [0.0]))
        t = np.exp(2j * np.pi * np.arange(512) / 512)
        zs = R * t
        return -complex(np.mean(r(zs) * zs))
    w = complex(w)
    others = [abs(p - w) for p in poles if abs(p - w) > 1e-9 * (1 + abs(w))]
    rad = radius or 0.5 * min(others + [1.0])
    t = np.exp(2j * np.pi * np.arange(512) / 512)
    zs = w + rad * t
    return complex(np.mean(r(zs) * rad * t))


@dataclass
class ValidityReport:
    period_residuals: dict = field(default_factory=dict)
    stray_poles: list = field(default_factory=list)
    metric_min: float = 0.0
    sigma_min_abs_K: float = float("nan")
    branch_circle_distance: float = float("inf")
    end_equator_distance: dict = field(default_factory=dict)
    end_pole_distance: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "period_residuals": {k: list(v) for k, v in self.period_residuals.items()},
            "stray_poles": [_point_json(p) for p in self.stray_poles],
            "metric_min": self.metric_min,
            "sigma_min_abs_K": self.sigma_min_abs_K,
            "branch_circle_distance": self.branch_circle_distance,
            "end_equator_distance": dict(self.end_equator_distance),
            "end_pole_distance": dict(self.end_pole_distance),
            "violations": list(self.violations),
            "warnings": list(self.warnings),
        }


def _point_json(p):
    return "inf" if is_inf(p) else [float(np.real(p)), float(np.imag(p))]


def point_label(p) -> str:
    if is_inf(p):
        return "inf"
    p = complex(p)
    return f"{p.real:.6g}{p.imag:+.6g}i"


def circle_fiber(data: WeierstrassData, frame: np.ndarray, t, height: float = 0.0) -> np.ndarray:
    """Solutions of ``<G(z), u> = height`` at circle angles ``t``; shape (len(t), n).

    Points of the latitude circle are ``s(t) = r (cos t e1' + sin t e2') + height u``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    r = np.sqrt(max(0.0, 1.0 - height ** 2))
    pts = r * (np.cos(t)[:, None] * frame[0] + np.sin(t)[:, None] * frame[1]) + height * frame[2]
    a, b = homogeneous_g(pts)
    n = data.g.degree
    out = np.empty((len(t), n), dtype=complex)
    P, Q = data.g.num.padded(n + 1), data.g.den.padded(n + 1)
    for k in range(len(t)):
        poly = Polynomial(b[k] * P - a[k] * Q)
        if poly.degree < n:
            raise DegenerateData("the traced circle passes through g(infinity)")
        out[k] = poly.roots()
    return out


def validate_data(data: WeierstrassData, direction: Sequence[float] = (0.0, 0.0, 1.0),
                  tol: float = 1e-8, samples: int = 64) -> ValidityReport:
    """Check the admissibility conditions for analysis along ``direction``.

    Never raises for a violated condition; violations are listed in the report.
    """
    rep = ValidityReport()
    frame = orthonormal_frame(direction)
    u = frame[2]
    # periods and stray poles
    for w in data.ends:
        res = []
        for p in data.phi:
            try:
                res.append(abs((2j * np.pi * residue(p, w)).real))
            except Exception:  # pragma: no cover - defensive
                res.append(float("nan"))
        rep.period_residuals[point_label(w)] = res
        if max(res) > 1e-7:
            rep.violations.append(f"period: real period {max(res):.3e} at end {point_label(w)}")
    for p in data.phi:
        for loc, _ in p.poles():
            if not is_inf(loc) and not data.is_end(loc, tol=1e-6):
                rep.stray_poles.append(loc)
    if not data.has_end_at_infinity and any(_pole_order_of_form(p, INF) for p in data.phi):
        rep.stray_poles.append(INF)
    if rep.stray_poles:
        rep.violations.append(
            "poles: phi has poles off the ends at " + ", ".join(point_label(p) for p in rep.stray_poles))
    # metric positivity on a deterministic sample
    rng = np.random.default_rng(12345)
    zs = (rng.normal(size=samples) + 1j * rng.normal(size=samples)) * 1.5
    lams = []
    for z in zs:
        if data.is_end(z, 1e-3):
            continue
        try:
            lam, K = curvature_and_metric(data, z)
        except (MetricDegenerate, PoleAt):
            lams.append(0.0)
            continue
        lams.append(lam)
        if K > 1e-12:
            rep.violations.append(f"curvature: K > 0 at {point_label(z)}")
    rep.metric_min = float(min(lams)) if lams else float("nan")
    if lams and rep.metric_min <= 0:
        rep.violations.append("metric: conformal factor vanishes at a sample point")
    # AE.4: branch points off the traced circle; |K| on sampled Sigma
    try:
        n, branches = degree_and_branch_points(data)
    except Exception as exc:  # pragma: no cover - defensive
        rep.violations.append(f"branch: {exc}")
        branches = []
    dists = []
    for br in branches:
        G = eval_gauss(data, br.location)
        d = abs(float(G @ u))
        dists.append(d)
        if d < tol:
            rep.violations.append(f"AE.4: branch point {point_label(br.location)} lies on the singular set")
        elif 1.0 - d < tol and float(G @ u) > 0 and not data.is_end(br.location):
            rep.warnings.append(f"AE.4: branch point {point_label(br.location)} maps to the pole")
    rep.branch_circle_distance = float(min(dists)) if dists else float("inf")
    # AE.5: ends off the equator (and, as a warning, off the pole)
    for w in data.ends:
        G = eval_gauss(data, w)
        d_eq = abs(float(G @ u))
        d_pole = float(np.linalg.norm(G - u))
        rep.end_equator_distance[point_label(w)] = d_eq
        rep.end_pole_distance[point_label(w)] = d_pole
        if d_eq < tol:
            rep.violations.append(f"AE.5: end {point_label(w)} has horizontal normal")
        elif d_pole < tol:
            rep.warnings.append(f"AE.5: end {point_label(w)} has normal equal to the direction")
    if not any(v.startswith("AE.") for v in rep.violations):
        try:
            fib = circle_fiber(data, frame, np.linspace(0, 2 * np.pi, 48, endpoint=False))
            ks = []
            for z in fib.ravel():
                if data.is_end(z, 1e-6):
                    rep.violations.append("AE.5: an end lies on the singular set")
                    break
                ks.append(abs(curvature_and_metric(data, z)[1]))
            rep.sigma_min_abs_K = float(min(ks)) if ks else float("nan")
            if ks and rep.sigma_min_abs_K < tol:
                rep.violations.append("AE.4: curvature vanishes on the singular set")
        except (DegenerateData, MetricDegenerate, PoleAt) as exc:
            rep.violations.append(f"AE.5: {exc}")
    return rep


# ---------------------------------------------------------------------------
# rigid motions of the data


def mobius_for_rotation(A: np.ndarray) -> tuple[complex, complex, complex, complex]:
    """Mobius coefficients ``(a, b, c, d)`` with ``g_rot = (a g + b)/(c g + d)``
    realising ``G_rot = A G`` in the stereographic convention above."""
    A = np.asarray(A, dtype=float)
    src = [np.array([0.0, 0.0, -1.0]), np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])]
    w1, w2, w3 = (g_from_gauss(A @ p) for p in src)
    # S sends (w1, w2, w3) to (0, 1, inf); the rotation Mobius map is S^-1
    if is_inf(w3):
        S = np.array([[1.0, -w1], [0.0, w2 - w1]], dtype=complex)
    elif is_inf(w1):
        S = np.array([[0.0, w2 - w3], [1.0, -w3]], dtype=complex)
    elif is_inf(w2):
        S = np.array([[1.0, -w1], [1.0, -w3]], dtype=complex)
    else:
        S = np.array([[w2 - w3, -w1 * (w2 - w3)], [w2 - w1, -w3 * (w2 - w1)]], dtype=complex)
    M = np.linalg.inv(S)
    M = M / np.sqrt(np.linalg.det(M))
    return complex(M[0, 0]), complex(M[0, 1]), complex(M[1, 0]), complex(M[1, 1])


def rotate_data(data: WeierstrassData, A: np.ndarray, name: str | None = None) -> WeierstrassData:
    """Weierstrass data of the rotated surface ``A x`` on the same parameter domain."""
    A = np.asarray(A, dtype=float)
    a, b, c, d = mobius_for_rotation(A)
    g_rot = data.g.compose_mobius(a, b, c, d)
    p1, p2, p3 = data.phi
    h_rot = (p1 * float(A[2, 0]) + p2 * float(A[2, 1]) + p3 * float(A[2, 2])).reduced()
    return WeierstrassData(g_rot, h_rot, data.ends, name or f"{data.name}-rotated")
