"""Surface-modifying constructions: rotations, parallel surfaces, end bending, sweeps.

The rotated catenoid used throughout is

    f_d(t, u) = (cos t cosh u, cos d sin t cosh u + u sin d, -sin d sin t cosh u + u cos d),

the standard catenoid turned by ``d`` in the ``(e2, e3)`` plane from ``e3``
towards ``e2``.  Its singular set for the vertical projection is
``sinh u = -tan d sin t``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar
from scipy.spatial.transform import Rotation

from .catalog import catenoid
from .invariants import InvariantReport, analyze
from .polynomial import INF, PoleAt, is_inf
from .projection import TraceOptions
from .weierstrass import (
    AEViolation,
    WeierstrassData,
    curvature_and_metric,
    eval_gauss,
    eval_immersion,
    validate_data,
)

ORTHO_TOL = 1e-12
#: samples this close to a known critical parameter are not analyzed
GUARD_BAND = 1e-4
#: safety factor of the parallel-surface bound over the sampled curvature
EPS_SAFETY = 1.1
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class EpsilonTooLarge(ValueError):
    pass


class TargetTooFar(ValueError):
    pass


class NotProperRegion(ValueError):
    pass


# ---------------------------------------------------------------------------
# rotations


@dataclass(frozen=True, eq=False)
class RotationSpec:
    """A rotation ``A`` of space; the rotated surface ``A M`` is analyzed along
    the vertical, which is the analysis of ``M`` along ``u = A^T e3``."""

    matrix: np.ndarray

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float)
        if A.shape != (3, 3):
            raise ValueError("rotation matrix must be 3x3")
        if np.max(np.abs(A @ A.T - np.eye(3))) > ORTHO_TOL or abs(np.linalg.det(A) - 1.0) > ORTHO_TOL:
            raise ValueError("matrix is not a proper rotation")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)

    @classmethod
    def identity(cls) -> "RotationSpec":
        return cls(np.eye(3))

    @classmethod
    def from_axis_angle(cls, axis: Sequence[float], angle: float) -> "RotationSpec":
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        A = Rotation.from_rotvec(angle * axis).as_matrix()
        # re-orthonormalize to keep the matrix check at machine precision
        U, _, Vt = np.linalg.svd(A)
        return cls(U @ Vt)

    @classmethod
    def tilt(cls, delta: float) -> "RotationSpec":
        """Turn by ``delta`` in the ``(e2, e3)`` plane, taking ``e3`` towards ``e2``."""
        c, s = math.cos(delta), math.sin(delta)
        return cls(np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]]))

    @property
    def direction(self) -> np.ndarray:
        return self.matrix[2].copy()

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.matrix, np.eye(3)))


def rotated_analysis(data: WeierstrassData, rotation: RotationSpec, eps: float = 0.0,
                     options: TraceOptions | None = None, validate: bool = True) -> InvariantReport:
    """Analysis of the rotated surface, i.e. of ``data`` along ``A^T e3``."""
    if validate:
        rep = validate_data(data, rotation.direction)
        if not rep.ok:
            raise AEViolation(rep, rotation.direction)
    if rotation.is_identity():
        return analyze(data, eps=eps, options=options)
    return analyze(data, frame=rotation.matrix, eps=eps, options=options)


# ---------------------------------------------------------------------------
# the rotated catenoid in closed form


def delta0(tol: float = 1e-10) -> float:
    """Positive root of ``d sinh d = cosh d`` by bisection on ``[1, 2]``."""
    lo, hi = 1.0, 2.0
    r = lambda d: d * math.sinh(d) - math.cosh(d)  # noqa: E731
    assert r(lo) < 0 < r(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if r(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def catenoid_singular_curve(delta: float, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Points, velocities and normals along the singular curve of the rotated catenoid."""
    t = np.asarray(t, dtype=float)
    c, s = math.cos(delta), math.sin(delta)
    A = np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])
    tn = math.tan(delta)
    u = np.arcsinh(-tn * np.sin(t))
    ch, sh = np.cosh(u), np.sinh(u)
    du = -tn * np.cos(t) / ch
    pos = np.stack([np.cos(t) * ch, np.sin(t) * ch, u], axis=-1)
    ft = np.stack([-np.sin(t) * ch, np.cos(t) * ch, np.zeros_like(t)], axis=-1)
    fu = np.stack([np.cos(t) * sh, np.sin(t) * sh, np.ones_like(t)], axis=-1)
    nrm = np.stack([np.cos(t), np.sin(t), -sh], axis=-1) / ch[..., None]
    return pos @ A.T, (ft + du[..., None] * fu) @ A.T, nrm @ A.T


def _catenoid_cusp_function(delta: float, t) -> np.ndarray:
    """``det(Gamma', e3, N)``: vanishes exactly where the curve runs vertically."""
    _, vel, nrm = catenoid_singular_curve(delta, t)
    return np.einsum("...i,...i->...", np.cross(vel, [0.0, 0.0, 1.0]), nrm)


def closed_form_cusp_count(delta: float, samples: int = 4096) -> int:
    """Number of cusps of the projected singular curve, from the closed form."""
    t = (np.arange(samples) + 0.5) * (2 * np.pi / samples)
    b = _catenoid_cusp_function(delta, t)
    return int(np.count_nonzero(np.sign(b) != np.sign(np.roll(b, 1))))


def _min_cusp_function(delta: float) -> float:
    h = 2 * np.pi / 720
    t = np.arange(720) * h
    b = _catenoid_cusp_function(delta, t)
    k = int(np.argmin(b))
    res = minimize_scalar(lambda x: float(_catenoid_cusp_function(delta, np.array([x]))[0]),
                          bracket=(t[k] - h, t[k], t[k] + h), tol=1e-12)
    return min(float(res.fun), float(b[k]))


def critical_angle(tol: float = 1e-10) -> float:
    """Smallest rotation at which the rotated catenoid's projection develops cusps.

    Bisection on the minimum over the curve of ``det(Gamma', e3, N)``.
    """
    lo, hi = 0.0, 1.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _min_cusp_function(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# point evaluators for surfaces built from Weierstrass data


def _chart_radius(z, w) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    with np.errstate(divide="ignore"):
        return 1.0 / np.abs(z) if is_inf(w) else np.abs(z - complex(w))


def _polar_points(center, sigma, t):
    """``z = c + exp(sigma + i t)`` around a finite center, ``exp(-sigma - i t)`` around infinity."""
    e = np.exp(np.add.outer(sigma, 1j * np.asarray(t)))
    if is_inf(center):
        z = 1.0 / e
        return z, -z, -1j * z
    return complex(center) + e, e, 1j * e


def _gl_integrals(data: WeierstrassData, center, s0, s1, t0, t1) -> np.ndarray:
    """``Re int phi`` along straight chart segments from ``(s0, t0)`` to ``(s1, t1)``."""
    s0, s1, t0, t1 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (s0, s1, t0, t1)))
    ds, dt = (s1 - s0)[..., None], (t1 - t0)[..., None]
    x = 0.5 * (_GL_X + 1.0)
    s = s0[..., None] + ds * x
    t = t0[..., None] + dt * x
    if is_inf(center):
        z = np.exp(-s - 1j * t)
        dz = -z * (ds + 1j * dt)
    else:
        e = np.exp(s + 1j * t)
        z = complex(center) + e
        dz = e * (ds + 1j * dt)
    vals = np.real(data.phi_vec(z) * dz)
    return 0.5 * np.einsum("c...k,k->...c", vals, _GL_W)


def _default_basepoint(data: WeierstrassData) -> complex:
    poles = [loc for p in data.phi for loc, _ in p.poles() if not is_inf(loc)]
    for b in (1.0, 1j, -1.0, 0.5 + 0.5j, 2.0):
        if not data.is_end(b, 1e-3) and all(abs(b - q) > 1e-3 for q in poles):
            return complex(b)
    raise ValueError("no admissible basepoint found")


@dataclass
class PolarGrid:
    center: object
    sigma: np.ndarray
    t: np.ndarray
    z: np.ndarray
    positions: np.ndarray  # (ns, nt, 3)
    normals: np.ndarray  # (ns, nt, 3)
    closure: float  # largest mismatch of the position around a circle


class MinimalSurface:
    """Positions ``Re int phi`` and normals of the surface given by ``data``."""

    eps = 0.0

    def __init__(self, data: WeierstrassData, basepoint: complex | None = None):
        self.data = data
        self.basepoint = _default_basepoint(data) if basepoint is None else complex(basepoint)
        self.ends = data.ends

    def position(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        X = np.array([eval_immersion(self.data, zz, self.basepoint, check_periods=False) for zz in z])
        return X + self.eps * self.data.gauss_vec(z)

    def normal(self, z) -> np.ndarray:
        return self.data.gauss_vec(np.atleast_1d(np.asarray(z, dtype=complex)))

    def normal_at(self, w) -> np.ndarray:
        """Normal at any point of the compactified domain, including ends."""
        return eval_gauss(self.data, w)

    def polar_grid(self, center, sigma, t) -> PolarGrid:
        """Positions and normals on ``z = c + exp(sigma + i t)`` (or its analogue at infinity)."""
        sigma = np.asarray(sigma, dtype=float)
        t = np.asarray(t, dtype=float)
        z, _, _ = _polar_points(center, sigma, t)
        j0 = int(np.argmin(np.abs(sigma)))
        X = np.empty(z.shape + (3,))
        X[j0, 0] = eval_immersion(self.data, z[j0, 0], self.basepoint, check_periods=False)
        steps = _gl_integrals(self.data, center, sigma[:-1], sigma[1:], t[0], t[0])
        up = np.cumsum(steps[j0:], axis=0)
        down = np.cumsum(steps[:j0][::-1], axis=0)
        X[j0 + 1:, 0] = X[j0, 0] + up
        X[:j0, 0] = (X[j0, 0] - down)[::-1]
        tt = np.append(t, t[0] + 2 * np.pi)
        arcs = _gl_integrals(self.data, center, sigma[:, None], sigma[:, None], tt[None, :-1], tt[None, 1:])
        cum = np.cumsum(arcs, axis=1)
        X[:, 1:] = X[:, :1] + cum[:, :-1]
        closure = float(np.max(np.abs(cum[:, -1])))
        N = self.data.gauss_vec(z)
        return PolarGrid(center, sigma, t, z, X + self.eps * N, N, closure)


class ParallelSurface(MinimalSurface):
    """The parallel surface ``f + eps G``; the Gauss map is unchanged."""

    def __init__(self, data: WeierstrassData, eps: float, eps0: float,
                 basepoint: complex | None = None):
        super().__init__(data, basepoint)
        self.eps = float(eps)
        self.eps0 = float(eps0)

    def analyze(self, direction: Sequence[float] = (0.0, 0.0, 1.0), frame: np.ndarray | None = None,
                options: TraceOptions | None = None) -> InvariantReport:
        return analyze(self.data, direction, frame=frame, eps=self.eps, options=options)


def max_principal_curvature(data: WeierstrassData, samples: int = 4000) -> float:
    """Largest ``sqrt|K|`` (the principal curvature of a minimal surface) over a
    quasi-uniform sample of the parameter sphere."""
    k = np.arange(samples) + 0.5
    zc = 1.0 - 2.0 * k / samples
    phi = np.pi * (1.0 + 5 ** 0.5) * k
    r = np.sqrt(1.0 - zc ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        pts = (r * np.cos(phi) + 1j * r * np.sin(phi)) / (1.0 - zc)
    best = 0.0
    for z in pts:
        if not np.isfinite(z) or data.is_end(complex(z), 1e-3):
            continue
        try:
            _, K = curvature_and_metric(data, complex(z))
        except (PoleAt, ValueError):
            continue
        best = max(best, math.sqrt(abs(K)))
    return best


def parallel_surface(data: WeierstrassData, eps: float, eps0: float | None = None) -> ParallelSurface:
    """``f + eps G`` for ``|eps| < eps0 = 1 / (1.1 max sqrt|K|)``."""
    if eps0 is None:
        eps0 = 1.0 / (EPS_SAFETY * max_principal_curvature(data))
    if abs(eps) >= eps0:
        raise EpsilonTooLarge(f"|eps| = {abs(eps):g} is not below the bound {eps0:.6g}")
    return ParallelSurface(data, eps, eps0)


# ---------------------------------------------------------------------------
# bending an end


def smoothstep(x) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (x * (6.0 * x - 15.0) + 10.0)


def smoothstep_derivative(x) -> np.ndarray:
    inside = (x > 0) & (x < 1)
    x = np.clip(x, 0.0, 1.0)
    return np.where(inside, 30.0 * x * x * (1.0 - x) ** 2, 0.0)


def rotation_between(a: Sequence[float], b: Sequence[float]) -> np.ndarray:
    """The rotation by the angle between unit vectors ``a`` and ``b`` taking ``a`` to ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    axis = np.cross(a, b)
    s = np.linalg.norm(axis)
    if s < 1e-15:
        return np.eye(3)
    angle = math.atan2(s, float(a @ b))
    return Rotation.from_rotvec(angle * axis / s).as_matrix()


def tilted(y: Sequence[float], angle: float, axis: Sequence[float] | None = None) -> np.ndarray:
    """``y`` turned by ``angle`` about ``axis`` (default: a fixed axis orthogonal to ``y``)."""
    y = np.asarray(y, dtype=float)
    if axis is None:
        axis = np.cross(y, [1.0, 0.0, 0.0])
        if np.linalg.norm(axis) < 1e-8:
            axis = np.cross(y, [0.0, 1.0, 0.0])
    axis = np.asarray(axis, dtype=float)
    axis = axis - (axis @ y) * y
    return Rotation.from_rotvec(angle * axis / np.linalg.norm(axis)).apply(y)


class BentSurface:
    """``h o f`` on a neighbourhood ``Z`` of one end, with
    ``h(x) = (1 - psi(|x|)) x + psi(|x|) A x`` and ``psi`` rising from 0 at
    ``|x| = 2R`` to 1 at ``|x| = 2R + width``."""

    def __init__(self, base: MinimalSurface, end, rotation: np.ndarray, R: float,
                 width: float | None = None, zone_radius: float = float("inf")):
        self.base = base
        self.data = base.data
        self.ends = base.ends
        self.end = end
        self.A = np.asarray(rotation, dtype=float)
        self.R = float(R)
        self.width = float(R if width is None else width)
        self.zone_radius = float(zone_radius)

    def psi(self, r):
        return smoothstep((np.asarray(r) - 2 * self.R) / self.width)

    def in_zone(self, z) -> np.ndarray:
        return _chart_radius(z, self.end) < self.zone_radius

    def _apply(self, z, X, N) -> tuple[np.ndarray, np.ndarray]:
        zone = self.in_zone(z)
        r = np.linalg.norm(X, axis=-1)
        x = (r - 2 * self.R) / self.width
        psi = np.where(zone, smoothstep(x), 0.0)
        dpsi = np.where(zone, smoothstep_derivative(x) / self.width, 0.0)
        AX = X @ self.A.T
        Y = X + psi[..., None] * (AX - X)
        I = np.eye(3)
        with np.errstate(invalid="ignore", divide="ignore"):
            grad = np.where(r[..., None] > 0, X / r[..., None], 0.0) * dpsi[..., None]
        Dh = ((1 - psi)[..., None, None] * I + psi[..., None, None] * self.A
              + (AX - X)[..., :, None] * grad[..., None, :])
        # normals transform by the cofactor matrix
        M = np.linalg.solve(np.swapaxes(Dh, -1, -2), N[..., None])[..., 0]
        M *= np.sign(np.linalg.det(Dh))[..., None]
        return Y, M / np.linalg.norm(M, axis=-1, keepdims=True)

    def position(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return self._apply(z, self.base.position(z), self.base.normal(z))[0]

    def normal(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return self._apply(z, self.base.position(z), self.base.normal(z))[1]

    def normal_at(self, w) -> np.ndarray:
        if _same_point(w, self.end):
            return self.A @ self.base.normal_at(w)
        if is_inf(w) or any(_same_point(w, e) for e in self.ends):
            return self.base.normal_at(w)
        return self.normal(w)[0]

    def polar_grid(self, center, sigma, t) -> PolarGrid:
        g = self.base.polar_grid(center, sigma, t)
        Y, M = self._apply(g.z, g.positions, g.normals)
        return PolarGrid(center, g.sigma, g.t, g.z, Y, M, g.closure)


def _same_point(p, q) -> bool:
    if is_inf(p) or is_inf(q):
        return is_inf(p) and is_inf(q)
    return abs(complex(p) - complex(q)) < 1e-12


def _angle_between(a, b) -> np.ndarray:
    return np.arctan2(np.linalg.norm(np.cross(a, b), axis=-1), np.einsum("...i,...i->...", a, b))


def bend_end(surface: MinimalSurface, end, target: Sequence[float], R: float,
             width: float | None = None, samples: int = 128) -> BentSurface:
    """Bend the end ``end`` so that its limit normal becomes ``target``.

    The bending zone is the chart disk around the end bounded by the outermost
    circle on which ``|f| < 2R``; the bound ``sin(angle) < dist(G(w), G(boundary))/4``
    is enforced.
    """
    if not any(_same_point(end, e) for e in surface.ends):
        raise ValueError(f"{end} is not an end")
    others = [e for e in surface.ends if not _same_point(e, end)]
    # chart radius up to which the end's neighbourhood is free of other ends
    if is_inf(end):
        rmax = min([1.0 / abs(complex(e)) for e in others if not is_inf(e) and abs(complex(e)) > 0] + [1e3])
    else:
        w = complex(end)
        rmax = min([abs(complex(e) - w) for e in others if not is_inf(e)]
                   + [1.0 / abs(w) if abs(w) > 0 else 1e3 for e in others if is_inf(e)] + [1e3])
    sig = np.linspace(math.log(rmax) - 0.1, -25.0, 1200)
    t = np.arange(samples) * (2 * np.pi / samples)
    grid = surface.polar_grid(end, sig, t)
    rad = np.linalg.norm(grid.positions, axis=-1)
    inner = rad.max(axis=1) < 2 * R
    if not inner.any():
        raise NotProperRegion(f"no circle around the end stays inside |x| < {2 * R:g}")
    if rad[-1].min() < 2 * R + (R if width is None else width):
        raise NotProperRegion("the end does not leave the ball |x| <= 3R within the sampled chart")
    last_inside = int(np.nonzero(inner)[0].max())
    if np.any(rad[last_inside + 1:].max(axis=1) < 2 * R):  # pragma: no cover - defensive
        raise NotProperRegion("|f| is not monotone enough towards the end")
    zone = math.exp(sig[last_inside])
    y0 = surface.normal_at(end)
    target = np.asarray(target, dtype=float)
    target = target / np.linalg.norm(target)
    dist = float(_angle_between(y0[None, :], grid.normals[last_inside]).min())
    delta = float(_angle_between(y0, target))
    if math.sin(delta) >= dist / 4:
        raise TargetTooFar(f"target at angle {delta:.4g} exceeds the bound from dist {dist:.4g}")
    return BentSurface(surface, end, rotation_between(y0, target), R, width, zone)


# ---------------------------------------------------------------------------
# invariants sampled from a point evaluator


def _tangent_basis(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    e1 = np.cross(y, [1.0, 0.0, 0.0])
    if np.linalg.norm(e1) < 0.5:
        e1 = np.cross(y, [0.0, 1.0, 0.0])
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(y, e1)


def _stereo_homogeneous(N: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Homogeneous stereographic coordinates ``(a, b)`` of ``N`` from ``-p`` (``p`` maps to 0)."""
    e1, e2 = _tangent_basis(p)
    return N @ e1 + 1j * (N @ e2), 1.0 + N @ p


def _stereo(N: np.ndarray, y: np.ndarray) -> np.ndarray:
    a, b = _stereo_homogeneous(N, y)
    return a / b


def _cross_ratio_coordinate(N: np.ndarray, y: np.ndarray, q: np.ndarray) -> np.ndarray:
    """A degree-one coordinate on the sphere vanishing at ``y`` with its pole at ``q``."""
    p = _generic_value([y, q, -y, -q])
    a, b = _stereo_homogeneous(N, p)
    ay, by = _stereo_homogeneous(y, p)
    aq, bq = _stereo_homogeneous(q, p)
    return (a * by - ay * b) / (a * bq - aq * b)


def _winding(w: np.ndarray) -> int:
    d = np.angle(np.roll(w, -1) / w)
    return int(round(d.sum() / (2 * np.pi)))


@dataclass
class SampledInvariants:
    n: int
    degree_value: float
    branch_orders: dict  # label -> order, for 0, infinity and interior branch points
    indices: dict  # end label -> geometric index
    missing: list
    locus: np.ndarray  # parameter points of the singular set found on the grid
    closure: float

    @property
    def l(self) -> int:
        return len(self.missing)

    @property
    def branch_total(self) -> int:
        return int(sum(self.branch_orders.values()))

    def summary(self) -> dict:
        return {"n": self.n, "beta": dict(self.branch_orders), "I": dict(self.indices), "l": self.l}


def sampled_invariants(surface, direction: Sequence[float] = (0.0, 0.0, 1.0), span: float = 7.0,
                       ns: int = 561, nt: int = 256) -> SampledInvariants:
    """Degree, branch orders, end indices, missing points and singular locus
    measured on a log-polar grid ``z = exp(sigma + i t)``, ``|sigma| <= span``.

    Only surfaces whose ends lie in ``{0, infinity}`` are supported; the two
    caps beyond the grid are represented by the limit normals there.
    """
    for e in surface.ends:
        if not (is_inf(e) or abs(complex(e)) < 1e-14):
            raise ValueError("sampled invariants need all ends at 0 or infinity")
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    sigma = np.linspace(-span, span, ns)
    t = np.arange(nt) * (2 * np.pi / nt)
    g = surface.polar_grid(0j, sigma, t)
    N, X = g.normals, g.positions
    dt = t[1] - t[0]
    Ns = np.gradient(N, sigma, axis=0)
    Nt = (np.roll(N, -1, axis=1) - np.roll(N, 1, axis=1)) / (2 * dt)
    dens = np.einsum("...i,...i->...", N, np.cross(Ns, Nt))
    area = float(trapezoid(dens.sum(axis=1) * dt, sigma))
    degree_value = area / (4 * np.pi)
    n = abs(int(round(degree_value)))
    orient = 1.0 if area >= 0 else -1.0

    centers = {"0": (0j, 0), "inf": (INF, -1)}
    branch: dict = {}
    indices: dict = {}
    cap_normals = {}
    for label, (c, row) in centers.items():
        y = surface.normal_at(c)
        cap_normals[label] = y
        branch[label] = abs(_winding(_stereo(N[row], y))) - 1
        if any(_same_point(c, e) for e in surface.ends):
            P = X[row] - np.outer(X[row] @ y, y)
            zeta = _stereo(P / np.linalg.norm(P, axis=-1, keepdims=True), y)
            indices[label] = abs(_winding(zeta))
    # interior branch points: zeros of the area density
    scaled = orient * dens
    interior = 0
    low = scaled < 1e-6 * np.max(np.abs(scaled))
    low[[0, -1], :] = False
    for j, k in zip(*np.nonzero(low)):
        ring = [N[j + a, (k + b) % nt] for a, b in ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))]
        deg = abs(_winding(_stereo(np.array(ring), N[j, k])))
        if deg > 1:
            branch[f"{g.z[j, k]:.6g}"] = deg - 1
            interior += 1
    # missing points: the end normals whose preimage count in the annulus is zero
    missing = []
    for e in surface.ends:
        y = surface.normal_at(e)
        if any(np.linalg.norm(y - m) < 1e-9 for m in missing):
            continue
        q = _generic_value(list(cap_normals.values()) + [y])
        zeta = _cross_ratio_coordinate(N, y, q)
        diff = _winding(zeta[-1]) - _winding(zeta[0])
        attained_in_cap = any(np.linalg.norm(cap_normals[lab] - y) < 1e-9
                              for lab, (c, _) in centers.items()
                              if not any(_same_point(c, ee) for ee in surface.ends))
        if abs(diff) == n and not attained_in_cap:
            missing.append(y)
    # singular locus on every ray
    v = N @ u
    pts = []
    for k in range(nt):
        col = v[:, k]
        exact = np.nonzero(col == 0)[0]
        idx = np.nonzero(col[:-1] * col[1:] < 0)[0]
        roots = list(sigma[exact])
        if len(idx):
            cs = CubicSpline(sigma, col)
            found = cs.roots(extrapolate=False)
            for i in idx:
                guess = sigma[i] - col[i] * (sigma[i + 1] - sigma[i]) / (col[i + 1] - col[i])
                roots.append(found[np.argmin(np.abs(found - guess))] if len(found) else guess)
        pts.extend(np.exp(np.array(sorted(roots)) + 1j * t[k]))
    return SampledInvariants(n, degree_value, branch, indices, missing, np.array(pts), g.closure)


def _generic_value(avoid: list) -> np.ndarray:
    cands = [np.array(v, dtype=float) / np.linalg.norm(v)
             for v in ([0.36, 0.48, 0.8], [-0.6, 0.64, -0.48], [0.8, -0.36, 0.48], [0.0, -0.6, 0.8])]
    return max(cands, key=lambda c: min(np.linalg.norm(c - a) for a in avoid))


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepSample:
    parameter: float
    c: int | None = None
    omega: int | None = None
    l: int | None = None
    flags: list = field(default_factory=list)

    @property
    def analyzed(self) -> bool:
        return self.c is not None

    def to_dict(self) -> dict:
        return {"parameter": self.parameter, "c": self.c, "omega": self.omega, "l": self.l,
                "flags": list(self.flags)}


@dataclass
class Transition:
    lo: float
    hi: float
    c_lo: int
    c_hi: int

    @property
    def estimate(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "c_lo": self.c_lo, "c_hi": self.c_hi,
                "estimate": self.estimate}


@dataclass
class FamilySweep:
    family: str
    parameter_name: str
    grid: np.ndarray
    samples: list
    transitions: list = field(default_factory=list)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if len(g) > 1 and np.any(np.diff(g) <= 0):
            raise ValueError("sweep grid must be strictly increasing")
        self.grid = g

    def counts(self) -> list:
        return [s.c for s in self.samples]

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "family": self.family,
            "parameter": self.parameter_name,
            "samples": [s.to_dict() for s in self.samples],
            "transitions": [t.to_dict() for t in self.transitions],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parameter", "c", "omega", "l", "flags"])
        for s in self.samples:
            w.writerow([repr(float(s.parameter)), "" if s.c is None else s.c,
                        "" if s.omega is None else s.omega, "" if s.l is None else s.l, ";".join(s.flags)])
        return buf.getvalue()


class Family:
    """A one-parameter family; ``sample`` returns the invariant summary at a parameter."""

    name = "family"
    parameter_name = "parameter"
    critical: tuple = ()
    refine_steps = 12

    def sample(self, p: float) -> SweepSample:  # pragma: no cover - interface
        raise NotImplementedError

    def __call__(self, p: float) -> SweepSample:
        p = float(p)
        near = [c for c in self.critical if abs(p - c) < GUARD_BAND]
        if near:
            return SweepSample(p, flags=[f"guard-band:{near[0]:.10g}"])
        return self.sample(p)


def _summarize(p: float, run) -> SweepSample:
    try:
        rep = run()
    except AEViolation as exc:
        return SweepSample(p, flags=["AE:" + "; ".join(exc.report.violations)])
    except (ValueError, RuntimeError) as exc:
        return SweepSample(p, flags=[f"{type(exc).__name__}: {exc}"])
    flags = [f"identity:{c.name}" for c in rep.failed()]
    return SweepSample(p, rep.c_total, rep.omega_total, rep.l, flags)


@dataclass
class ClosedFormCatenoid(Family):
    samples: int = 4096
    name = "rotated-catenoid-closed-form"
    parameter_name = "delta"
    refine_steps = 40

    def sample(self, p: float) -> SweepSample:
        return SweepSample(p, closed_form_cusp_count(p, self.samples), None, 2)


@dataclass
class RotationFamily(Family):
    """Rotations of a surface about a fixed axis."""

    data: WeierstrassData = field(default_factory=catenoid)
    axis: tuple = (1.0, 0.0, 0.0)
    critical: tuple = ()
    parameter_name = "angle"

    @property
    def name(self) -> str:
        return f"rotation:{self.data.name}"

    def rotation(self, p: float) -> RotationSpec:
        if tuple(self.axis) == (1.0, 0.0, 0.0):
            return RotationSpec.tilt(p)  # exact identity at p = 0
        return RotationSpec.from_axis_angle(self.axis, p)

    def sample(self, p: float) -> SweepSample:
        return _summarize(p, lambda: rotated_analysis(self.data, self.rotation(p)))


def rotated_catenoid_family() -> RotationFamily:
    """The rotated catenoid through the full pipeline, guarded at its critical angle."""
    return RotationFamily(catenoid(), (1.0, 0.0, 0.0), (math.pi / 4,))


@dataclass
class EpsilonFamily(Family):
    """Parallel surfaces ``f + eps G`` of a (rotated) surface."""

    data: WeierstrassData = field(default_factory=catenoid)
    rotation: RotationSpec = field(default_factory=lambda: RotationSpec.tilt(math.pi / 4))
    eps0: float | None = None
    critical: tuple = ()
    parameter_name = "eps"
    refine_steps = 8

    def __post_init__(self):
        if self.eps0 is None:
            self.eps0 = 1.0 / (EPS_SAFETY * max_principal_curvature(self.data))

    @property
    def name(self) -> str:
        return f"epsilon:{self.data.name}"

    def sample(self, p: float) -> SweepSample:
        if abs(p) >= self.eps0:
            return SweepSample(p, flags=[f"EpsilonTooLarge: bound {self.eps0:.6g}"])
        return _summarize(p, lambda: rotated_analysis(self.data, self.rotation, eps=p))


def _refine(family: Family, lo: SweepSample, hi: SweepSample) -> Transition:
    a, b = lo, hi
    for _ in range(family.refine_steps):
        mid = family(0.5 * (a.parameter + b.parameter))
        if not mid.analyzed:
            break
        if mid.c == a.c:
            a = mid
        elif mid.c == b.c:
            b = mid
        else:
            b = mid  # a third value: keep the left-most change
    return Transition(a.parameter, b.parameter, a.c, b.c)


def sweep(family: Family, grid: Sequence[float], jobs: int = 1, refine: bool = True) -> FamilySweep:
    """Sample ``family`` on ``grid`` and bracket every change of the cusp count."""
    grid = np.asarray(grid, dtype=float)
    if jobs > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            samples = list(ex.map(family, grid.tolist(), chunksize=max(1, len(grid) // (4 * jobs))))
    else:
        samples = [family(p) for p in grid]
    out = FamilySweep(family.name, family.parameter_name, grid, samples)
    done = [s for s in samples if s.analyzed]
    for a, b in zip(done, done[1:]):
        if a.c != b.c:
            out.transitions.append(_refine(family, a, b) if refine else Transition(a.parameter, b.parameter, a.c, b.c))
    return out
