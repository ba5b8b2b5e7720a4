"""Singular set of the orthogonal projection along a direction ``u``.

The singular set is ``Sigma = {<G, u> = 0}``, the preimage under ``G`` of the
great circle orthogonal to ``u``.  It is traced by sweeping the circle angle
``theta`` and continuing the ``n`` solutions of ``g(z) = c(theta)``.  Level sets
``<G, u> = delta`` are traced the same way with a latitude circle.

Curves carry the orientation of ``M+``: the side ``{<G, u> > 0}`` lies on the
left in the parameter chart.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from .planar import WhitneyData, signed_area, whitney, winding_numbers
from .polynomial import INF, aberth_roots, is_inf
from .weierstrass import (
    WeierstrassData,
    degree_and_branch_points,
    eval_immersion,
    homogeneous_g,
    orthonormal_frame,
)

TYPE_A = "A"
TYPE_B = "B"


class BranchOnCircle(ValueError):
    pass


class EndOnCircle(ValueError):
    pass


class CurveThroughInfinity(ValueError):
    pass


class StraightLineComponent(ValueError):
    pass


class InconclusiveAtTolerance(RuntimeError):
    pass


class AmbiguousRegion(RuntimeError):
    pass


@dataclass
class TraceOptions:
    samples_per_turn: int = 256
    max_turn_deg: float = 10.0
    delta1: float = 1e-3
    max_halvings: int = 3
    collision_tol: float = 1e-7
    degeneracy_tol: float = 1e-6


# ---------------------------------------------------------------------------
# the circle fibration


class LatitudeFibration:
    """Solutions of ``<G(z), u> = height`` as a function of the circle angle.

    With ``s(theta) = r (cos theta e1' + sin theta e2') + height u`` and the
    homogeneous coordinates ``a = s1 + i s2, b = 1 - s3`` the solutions are the
    roots of ``F(z, theta) = b P(z) - a Q(z)`` where ``g = P/Q``.
    """

    def __init__(self, data: WeierstrassData, frame: np.ndarray, height: float = 0.0):
        self.data = data
        self.frame = np.asarray(frame, dtype=float)
        self.height = float(height)
        self.r = float(np.sqrt(max(0.0, 1.0 - height * height)))
        self.n = data.g.degree
        P, Q = data.g.num, data.g.den
        self.Pc = P.padded(self.n + 1)
        self.Qc = Q.padded(self.n + 1)
        self._P = (P, P.derivative(), P.derivative(2))
        self._Q = (Q, Q.derivative(), Q.derivative(2))
        self.scale = float(max(np.max(np.abs(self.Pc)), np.max(np.abs(self.Qc))))

    def sigma(self, th):
        th = np.asarray(th, dtype=float)
        e1, e2, u = self.frame
        c, s = np.cos(th)[..., None], np.sin(th)[..., None]
        S = self.r * (c * e1 + s * e2) + self.height * u
        dS = self.r * (-s * e1 + c * e2)
        d2S = -self.r * (c * e1 + s * e2)
        return S, dS, d2S

    def _ab(self, th):
        S, dS, d2S = self.sigma(th)
        a, b = homogeneous_g(S)
        da, db = dS[..., 0] + 1j * dS[..., 1], -dS[..., 2]
        d2a, d2b = d2S[..., 0] + 1j * d2S[..., 1], -d2S[..., 2]
        return a, b, da, db, d2a, d2b

    def parts(self, z, th):
        a, b, da, db, d2a, d2b = self._ab(th)
        P0, P1, P2 = (p(z) for p in self._P)
        Q0, Q1, Q2 = (q(z) for q in self._Q)
        F = b * P0 - a * Q0
        Fz = b * P1 - a * Q1
        Fzz = b * P2 - a * Q2
        Ft = db * P0 - da * Q0
        Fzt = db * P1 - da * Q1
        Ftt = d2b * P0 - d2a * Q0
        return F, Fz, Fzz, Ft, Fzt, Ftt

    def velocity(self, z, th):
        """``dz/dtheta`` and ``d2z/dtheta2`` along the solution through ``z``."""
        F, Fz, Fzz, Ft, Fzt, Ftt = self.parts(z, th)
        z1 = -Ft / Fz
        z2 = -(Fzz * z1 * z1 + 2 * Fzt * z1 + Ftt) / Fz
        return z1, z2

    def height_velocity(self, z, th):
        """``dz/dheight`` along the solution through ``z`` at fixed angle."""
        th = np.asarray(th, dtype=float)
        e1, e2, u = self.frame
        c, s = np.cos(th)[..., None], np.sin(th)[..., None]
        dS = -(self.height / max(self.r, 1e-300)) * (c * e1 + s * e2) + u
        ah, bh = dS[..., 0] + 1j * dS[..., 1], -dS[..., 2]
        a, b, *_ = self._ab(th)
        P0, P1 = self._P[0](z), self._P[1](z)
        Q0, Q1 = self._Q[0](z), self._Q[1](z)
        return -(bh * P0 - ah * Q0) / (b * P1 - a * Q1)

    def newton(self, z, th, iters: int = 30):
        z = np.array(z, dtype=complex)
        a, b, *_ = self._ab(th)
        done = np.zeros(z.shape, dtype=bool)
        for _ in range(iters):
            F = b * self._P[0](z) - a * self._Q[0](z)
            Fz = b * self._P[1](z) - a * self._Q[1](z)
            dz = np.where(done, 0.0, F / Fz)
            z = z - dz
            done |= np.abs(dz) <= 1e-15 * (1.0 + np.abs(z))
            if done.all():
                break
        return z, done | (np.abs(dz) <= 1e-11 * (1.0 + np.abs(z)))

    def roots(self, th: float, init=None) -> np.ndarray:
        a, b, *_ = self._ab(np.array(th))
        coeffs = complex(b) * self.Pc - complex(a) * self.Qc
        if abs(coeffs[-1]) <= 1e-12 * self.scale:
            raise CurveThroughInfinity(f"the traced circle meets g(infinity) at theta={th:.6f}")
        return aberth_roots(coeffs, init=init)


# ---------------------------------------------------------------------------
# records


@dataclass
class CuspRecord:
    t_star: float
    z_star: complex
    theta_star: float
    degenerate: bool
    point: tuple = (0.0, 0.0)
    height: float = 0.0
    vertical_sign: int = 0  # sign of <Gamma', u> at the cusp
    side_class: dict = field(default_factory=dict)  # side (+1/-1) -> TYPE_A / TYPE_B

    def to_dict(self) -> dict:
        return {
            "t_star": self.t_star,
            "z_star": [self.z_star.real, self.z_star.imag],
            "theta_star": self.theta_star,
            "degenerate": self.degenerate,
            "point": list(self.point),
            "height": self.height,
            "vertical_sign": self.vertical_sign,
            "side_class": {("+" if k > 0 else "-"): v for k, v in sorted(self.side_class.items())},
        }


@dataclass
class Lift:
    Gamma: np.ndarray  # positions (N, 3)
    dGamma: np.ndarray  # derivative in the curve parameter
    d2Gamma: np.ndarray
    G: np.ndarray
    dG: np.ndarray
    closure_residual: float


@dataclass
class Regularization:
    """Level curve ``<G, u> = delta`` next to a singular curve and its projection."""

    side: int
    delta: float
    s: np.ndarray
    z: np.ndarray
    points: np.ndarray  # projected vertices (N, 2)
    tangents: np.ndarray  # projected tangents (N, 2)
    reversed: bool
    whitney: WhitneyData
    loop_cusps: list = field(default_factory=list)
    period: float = 0.0

    def s_of(self, t: float) -> float:
        """Singular-curve parameter at polyline parameter ``t`` (vertex units)."""
        N, L = len(self.s), self.period
        i = int(np.floor(t)) % N
        frac = t - np.floor(t)
        a, b = self.s[i], self.s[(i + 1) % N]
        if self.reversed:
            return (a - frac * ((a - b) % L)) % L
        return (a + frac * ((b - a) % L)) % L


@dataclass
class SingularCurve:
    fibration: LatitudeFibration
    direction_sign: int  # theta = theta0 + direction_sign * s
    theta0: float
    nu: int
    s: np.ndarray
    z: np.ndarray
    eps: float = 0.0
    basepoint: complex = 0j
    lift: Lift | None = None
    cusps: list = field(default_factory=list)
    regularized: dict = field(default_factory=dict)
    fiber_checks: int = 0
    index: int = 0

    orientation = "M+"

    @property
    def length(self) -> float:
        return 2 * np.pi * self.nu

    @property
    def theta(self) -> np.ndarray:
        return self.theta0 + self.direction_sign * self.s

    @property
    def frame(self) -> np.ndarray:
        return self.fibration.frame

    @property
    def vertices(self) -> np.ndarray:
        """Closed vertex sequence (first vertex repeated at the end)."""
        return np.append(self.z, self.z[:1])

    @property
    def gamma(self) -> np.ndarray:
        return self.lift.Gamma @ self.frame[:2].T

    @property
    def heights(self) -> np.ndarray:
        return self.lift.Gamma @ self.frame[2]

    def jets(self, s):
        """``z, dz/ds, d2z/ds2`` at arbitrary curve parameters."""
        s = np.atleast_1d(np.asarray(s, dtype=float)) % self.length
        k = np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, len(self.s) - 1)
        th0 = self.theta[k]
        z0 = self.z[k]
        z1, z2 = self.fibration.velocity(z0, th0)
        d = self.theta0 + self.direction_sign * s - th0
        pred = z0 + z1 * d + 0.5 * z2 * d * d
        th = th0 + d
        z, _ = self.fibration.newton(pred, th)
        w1, w2 = self.fibration.velocity(z, th)
        return z, self.direction_sign * w1, w2, th

    def beta(self, s) -> np.ndarray:
        """Component of ``Gamma'`` along ``u x G`` (vanishes exactly at cusps)."""
        z, zs, zss, th = self.jets(s)
        dX = _position_derivatives(self.fibration.data, z, zs, zss)[0]
        S, dS, _ = self.fibration.sigma(th)
        if self.eps:
            dX = dX + self.eps * self.direction_sign * dS
        w = np.cross(self.frame[2], S)
        return np.einsum("ij,ij->i", dX, w)


@dataclass
class Region:
    key: frozenset
    sign: int
    boundary: list
    ends: list
    branch_points: list
    euler_characteristic: int
    n_omega: int

    @property
    def is_disk(self) -> bool:
        return self.euler_characteristic == 1

    @property
    def is_compact(self) -> bool:
        return not self.ends

    @property
    def degree(self) -> int:
        return -self.n_omega

    @property
    def branch_sum(self) -> int:
        return sum(b for _, b in self.branch_points)

    def to_dict(self) -> dict:
        return {
            "sign": "+" if self.sign > 0 else "-",
            "boundary": list(self.boundary),
            "ends": [_pt(e) for e in self.ends],
            "branch_points": [[_pt(p), int(b)] for p, b in self.branch_points],
            "euler_characteristic": self.euler_characteristic,
            "is_disk": self.is_disk,
            "is_compact": self.is_compact,
            "n_omega": self.n_omega,
            "degree": self.degree,
        }


@dataclass
class RegionDecomposition:
    regions: list

    def of_sign(self, sign: int) -> list:
        return [r for r in self.regions if r.sign == sign]


def _pt(p):
    return "inf" if is_inf(p) else [float(np.real(p)), float(np.imag(p))]


# ---------------------------------------------------------------------------
# geometry along curves


def _position_derivatives(data: WeierstrassData, z, zs, zss):
    phi = data.phi_vec(z)
    dphi = data.dphi_vec(z)
    dX = np.real(phi * zs).T
    d2X = np.real(dphi * zs * zs + phi * zss).T
    return dX, d2X


def _gl_segment_integral(data: WeierstrassData, a, b, nodes: int = 12) -> np.ndarray:
    """``Re int_a^b phi`` along straight segments (vectorised over segments)."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    a = np.atleast_1d(a)
    b = np.atleast_1d(b)
    d = (b - a) / 2
    m = (a + b) / 2
    pts = m[:, None] + d[:, None] * x[None, :]
    vals = data.phi_vec(pts.ravel()).reshape(3, len(a), nodes)
    return np.real(np.einsum("ikn,n->ki", vals, w) * d[:, None])


def _lift(th, data: WeierstrassData, fib: LatitudeFibration, s, z, dirsign, eps,
          start_position: np.ndarray, length: float) -> Lift:
    z1, z2 = fib.velocity(z, th)
    zs = dirsign * z1
    zss = z2
    dX, d2X = _position_derivatives(data, z, zs, zss)
    S, dS, d2S = fib.sigma(th)
    if eps:
        dX = dX + eps * dirsign * dS
        d2X = d2X + eps * d2S
    # Hermite-corrected trapezoid for the cumulative integral of Gamma'
    s_closed = np.append(s, length)
    h = np.diff(s_closed)[:, None]
    f0, f1 = dX, np.roll(dX, -1, axis=0)
    g0, g1 = d2X, np.roll(d2X, -1, axis=0)
    inc = h / 2 * (f0 + f1) + h * h / 12 * (g0 - g1)
    pos = start_position + np.vstack([np.zeros(3), np.cumsum(inc, axis=0)])
    closure = float(np.linalg.norm(pos[-1] - pos[0]))
    return Lift(pos[:-1], dX, d2X, S, dirsign * dS, closure)


def _angle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Unsigned angle between corresponding rows (complex numbers or vectors)."""
    if np.iscomplexobj(a):
        return np.abs(np.angle(b * np.conj(a)))
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    c = np.einsum("...i,...i->...", a, b) / (na * nb)
    return np.arccos(np.clip(c, -1.0, 1.0))


def _refine(fib: LatitudeFibration, theta0: float, dirsign: int, length: float, s, z, need,
            max_pass: int = 14, min_step: float = 1e-9):
    """Insert midpoints in the intervals flagged by ``need(s, z)``.

    ``need`` receives closed arrays (first vertex appended with ``s + length``)
    and returns a boolean per interval.
    """
    for _ in range(max_pass):
        sc = np.append(s, s[0] + length)
        zc = np.append(z, z[:1])
        flag = need(sc, zc) & (np.diff(sc) > min_step)
        if not flag.any():
            break
        k = np.nonzero(flag)[0]
        sm = 0.5 * (sc[k] + sc[k + 1])
        th_k = theta0 + dirsign * sc[k]
        z1, z2 = fib.velocity(zc[k], th_k)
        d = dirsign * (sm - sc[k])
        pred = zc[k] + z1 * d + 0.5 * z2 * d * d
        zm, _ = fib.newton(pred, theta0 + dirsign * sm)
        s = np.insert(s, k + 1, sm)
        z = np.insert(z, k + 1, zm)
    return s, z


# ---------------------------------------------------------------------------
# tracing


def _min_separation(z: np.ndarray) -> float:
    if len(z) < 2:
        return np.inf
    d = np.abs(z[:, None] - z[None, :]) + np.diag(np.full(len(z), np.inf))
    return float(d.min())


def _check_roots(data: WeierstrassData, fib: LatitudeFibration, z: np.ndarray, th: float, tol: float):
    scale = 1.0 + float(np.max(np.abs(z)))
    if _min_separation(z) < tol * scale:
        raise BranchOnCircle(f"two solutions collide near theta={th:.6f}")
    for e in data.finite_ends:
        if np.min(np.abs(z - e)) < 1e-9 * scale:
            raise EndOnCircle(f"end {e} lies on the traced circle")


def _trace_all_roots(data: WeierstrassData, fib: LatitudeFibration, N0: int, tol: float):
    """Continue all ``n`` solutions around the circle; returns grid roots and checks."""
    n = fib.n
    grid = 2 * np.pi * np.arange(N0 + 1) / N0
    Z = np.empty((N0 + 1, n), dtype=complex)
    try:
        z = fib.roots(0.0)
    except CurveThroughInfinity:
        if data.has_end_at_infinity:
            raise EndOnCircle("the end at infinity lies on the traced circle") from None
        raise
    z, _ = fib.newton(z, np.full(n, 0.0))
    _check_roots(data, fib, z, 0.0, tol)
    Z[0] = z
    checks = 1
    step = grid[1]
    for k in range(N0):
        cur, stop = grid[k], grid[k + 1]
        while cur < stop - 1e-15:
            h = min(step, stop - cur)
            z1, z2 = fib.velocity(z, np.full(n, cur))
            pred = z + z1 * h + 0.5 * z2 * h * h
            try:
                new = fib.roots(cur + h, init=pred)
            except CurveThroughInfinity:
                if data.has_end_at_infinity:
                    raise EndOnCircle("the end at infinity lies on the traced circle") from None
                raise
            checks += 1
            if len(new) != n:  # pragma: no cover - the root finder always returns n roots
                raise BranchOnCircle("fiber count changed")
            if n > 1:
                cost = np.abs(new[None, :] - pred[:, None])
                _, col = linear_sum_assignment(cost)
                new = new[col]
            sep = _min_separation(new)
            disp = float(np.max(np.abs(new - z)))
            if n > 1 and disp > 0.5 * sep:
                step = h / 2
                if step < 1e-10:
                    raise BranchOnCircle(f"continuation stalled near theta={cur:.6f}")
                continue
            new, _ = fib.newton(new, np.full(n, cur + h))
            _check_roots(data, fib, new, cur + h, tol)
            z = new
            cur += h
            step = min(2 * h, grid[1])
        Z[k + 1] = z
    if n > 1:
        cost = np.abs(Z[N0][:, None] - Z[0][None, :])
        _, perm = linear_sum_assignment(cost)
    else:
        perm = np.array([0])
    return grid[:-1], Z[:-1], perm, checks


def _cycles(perm: np.ndarray) -> list[list[int]]:
    seen: set[int] = set()
    out = []
    for i in range(len(perm)):
        if i in seen:
            continue
        cyc = []
        j = i
        while j not in seen:
            seen.add(j)
            cyc.append(j)
            j = int(perm[j])
        out.append(cyc)
    return out


def trace_singular_set(data: WeierstrassData, direction: Sequence[float] = (0.0, 0.0, 1.0),
                       frame: np.ndarray | None = None, eps: float = 0.0,
                       options: TraceOptions | None = None, height: float = 0.0,
                       basepoint: complex | None = None) -> list[SingularCurve]:
    """Trace ``G^{-1}`` of the circle orthogonal to ``direction`` into closed curves.

    ``eps`` selects the parallel surface ``f + eps G`` for the lifted curves.
    """
    opts = options or TraceOptions()
    frame = orthonormal_frame(direction) if frame is None else np.asarray(frame, dtype=float)
    fib = LatitudeFibration(data, frame, height)
    N0 = opts.samples_per_turn
    grid, Z, perm, checks = _trace_all_roots(data, fib, N0, opts.collision_tol)
    curves: list[SingularCurve] = []
    max_turn = np.deg2rad(opts.max_turn_deg)
    for cyc in _cycles(perm):
        nu = len(cyc)
        s = np.concatenate([grid + 2 * np.pi * m for m in range(nu)])
        z = np.concatenate([Z[:, i] for i in cyc])
        # orientation: {J > 0} on the left of the parameter-chart velocity
        z1, _ = fib.velocity(z, s)
        zh = fib.height_velocity(z, s)
        side = np.sign(np.imag(np.conj(z1) * zh))
        dirsign = 1 if np.sum(side) > 0 else -1
        if np.any(side != side[0]):  # pragma: no cover - sign is constant on a regular curve
            raise AmbiguousRegion("inconsistent side of the singular curve")
        L = 2 * np.pi * nu
        if dirsign < 0:
            # reverse: s' = L - s, keeping s' = 0 at the same starting vertex
            s = np.concatenate([[0.0], L - s[:0:-1]])
            z = np.concatenate([z[:1], z[:0:-1]])
        theta0 = 0.0

        def need(sc, zc, fib=fib, dirsign=dirsign):
            th = theta0 + dirsign * sc
            w1, _ = fib.velocity(zc, th)
            dX, _ = _position_derivatives(data, zc, dirsign * w1, 0 * w1)
            return (_angle(w1[:-1], w1[1:]) > max_turn) | (_angle(dX[:-1], dX[1:]) > max_turn)

        s, z = _refine(fib, theta0, dirsign, L, s, z, need)
        curves.append(SingularCurve(fib, dirsign, theta0, nu, s, z, eps=eps, fiber_checks=checks,
                                    index=len(curves)))
    bp = curves[0].z[0] if basepoint is None else complex(basepoint)
    for c in curves:
        c.basepoint = bp
        lift_curve(data, c)
    return curves


def lift_curve(data: WeierstrassData, curve: SingularCurve) -> Lift:
    fib = curve.fibration
    start = eval_immersion(data, curve.z[0], curve.basepoint, check_periods=False)
    if curve.eps:
        start = start + curve.eps * fib.sigma(curve.theta[0])[0]
    curve.lift = _lift(curve.theta, data, fib, curve.s, curve.z, curve.direction_sign, curve.eps,
                       start, curve.length)
    T = curve.lift.dGamma / np.linalg.norm(curve.lift.dGamma, axis=1)[:, None]
    if np.max(np.linalg.norm(T - T[0], axis=1)) < 1e-9:
        raise StraightLineComponent("a singular curve is a straight line")
    return curve.lift


# ---------------------------------------------------------------------------
# cusps


def detect_cusps(data: WeierstrassData, curve: SingularCurve,
                 options: TraceOptions | None = None) -> list[CuspRecord]:
    """Zeros of the projected velocity along the curve (second-order singularities)."""
    opts = options or TraceOptions()
    s = curve.s
    L = curve.length
    beta = curve.beta(s)
    scale = float(np.median(np.linalg.norm(curve.lift.dGamma, axis=1)))
    f = lambda x: float(curve.beta(np.array([x]))[0])  # noqa: E731
    roots: list[tuple[float, bool]] = []
    sc = np.append(s, L)
    bc = np.append(beta, beta[0])
    for k in np.nonzero(np.sign(bc[:-1]) * np.sign(bc[1:]) <= 0)[0]:
        a, b = sc[k], sc[k + 1]
        if bc[k] == 0:
            roots.append((a, False))
            continue
        if bc[k + 1] == 0:
            continue
        r = brentq(f, a, b, xtol=1e-13, rtol=1e-14, maxiter=200)
        roots.append((r % L, False))
    # touching zeros without a sign change: small local minima of |beta|
    ab = np.abs(beta)
    prev, nxt = np.roll(beta, 1), np.roll(beta, -1)
    speed = np.linalg.norm(curve.lift.dGamma, axis=1)
    cand = np.nonzero((ab <= np.abs(prev)) & (ab <= np.abs(nxt)) & (ab < 1e-2 * speed)
                      & (np.sign(prev) == np.sign(nxt)))[0]
    for k in cand:
        left = s[k - 1] if k > 0 else s[-1] - L
        res = minimize_scalar(lambda x: abs(f(x)), bracket=(left, s[k], sc[k + 1]),
                              method="golden", tol=1e-12)
        if abs(res.fun) < opts.degeneracy_tol * speed[k]:
            roots.append((float(res.x) % L, True))
    roots = sorted(((0.0 if L - r < 1e-7 else r), touching) for r, touching in roots)
    cusps: list[CuspRecord] = []
    h = 1e-5
    for r, touching in roots:
        if cusps and abs(r - cusps[-1].t_star) < 1e-9:
            continue
        db = (f(r + h) - f(r - h)) / (2 * h)
        degenerate = touching or abs(db) < opts.degeneracy_tol * scale
        z, zs, zss, th = curve.jets(np.array([r]))
        dX = _position_derivatives(data, z, zs, zss)[0][0]
        if curve.eps:
            dX = dX + curve.eps * curve.direction_sign * curve.fibration.sigma(th)[1][0]
        vsign = 1 if dX @ curve.frame[2] > 0 else -1
        pos = _position_at(data, curve, r)
        cusps.append(CuspRecord(float(r), complex(z[0]), float(th[0]), bool(degenerate),
                                tuple(float(v) for v in pos[:2]), float(pos[2]), vsign))
    curve.cusps = cusps
    return cusps


def _position_at(data: WeierstrassData, curve: SingularCurve, s: float) -> np.ndarray:
    """Lifted position at ``s`` in frame coordinates (gamma_1, gamma_2, height)."""
    k = int(np.clip(np.searchsorted(curve.s, s, side="right") - 1, 0, len(curve.s) - 1))
    z, _, _, th = curve.jets(np.array([s]))
    X = curve.lift.Gamma[k] + _gl_segment_integral(data, curve.z[k:k + 1], z)[0]
    if curve.eps:
        X = X + curve.eps * (curve.fibration.sigma(th)[0][0] - curve.lift.G[k])
    return curve.frame @ X


# ---------------------------------------------------------------------------
# regularised curves and cusp classification


def regularize(data: WeierstrassData, curve: SingularCurve, side: int, delta: float,
               options: TraceOptions | None = None) -> Regularization:
    """Trace the level curve ``<G, u> = side*delta`` next to ``curve`` and project it.

    The projected curve is traversed with the image of the deeper part of the
    side on its left.
    """
    opts = options or TraceOptions()
    hval = side * abs(delta)
    fib0 = curve.fibration
    fib = LatitudeFibration(data, fib0.frame, fib0.height + hval)
    th = curve.theta
    # continue in height from the singular curve to the level curve
    z = curve.z.copy()
    steps = 4
    for k in range(steps):
        hk = fib0.height + hval * k / steps
        fk = LatitudeFibration(data, fib0.frame, hk)
        zh = fk.height_velocity(z, th)
        pred = z + zh * (hval / steps)
        z, _ = LatitudeFibration(data, fib0.frame, hk + hval / steps).newton(pred, th)
    s = curve.s.copy()
    L = curve.length
    dirsign = curve.direction_sign
    max_turn = np.deg2rad(opts.max_turn_deg)
    eps = curve.eps
    cusp_s = np.array([c.t_star for c in curve.cusps])
    fine = 0.05 * np.sqrt(abs(delta))

    def need(sc, zc):
        thc = curve.theta0 + dirsign * sc
        w1, w2 = fib.velocity(zc, thc)
        dX, _ = _position_derivatives(data, zc, dirsign * w1, w2)
        if eps:
            dX = dX + eps * dirsign * fib.sigma(thc)[1]
        T = dX @ fib0.frame[:2].T
        flag = (_angle(T[:-1], T[1:]) > max_turn) | (_angle(w1[:-1], w1[1:]) > max_turn)
        if len(cusp_s):
            mid = 0.5 * (sc[:-1] + sc[1:])
            dist = np.min(np.abs(((mid[:, None] - cusp_s[None, :]) + L / 2) % L - L / 2), axis=1)
            flag |= (dist < 20 * np.sqrt(abs(delta))) & (np.diff(sc) > fine)
        return flag

    s, z = _refine(fib, curve.theta0, dirsign, L, s, z, need)
    thv = curve.theta0 + dirsign * s
    start = curve.lift.Gamma[0] + _gl_segment_integral(data, curve.z[:1], z[:1])[0]
    if eps:
        start = start + eps * (fib.sigma(thv[0])[0] - curve.lift.G[0])
    lift = _lift(thv, data, fib, s, z, dirsign, eps, start, L)
    P = lift.Gamma @ fib0.frame[:2].T
    T = lift.dGamma @ fib0.frame[:2].T
    # image of the deeper part: derivative of the position with respect to |height|
    zh = fib.height_velocity(z, thv)
    Xh = np.real(data.phi_vec(z) * zh).T * side
    if eps:
        e1, e2, u = fib0.frame
        c, sn = np.cos(thv)[:, None], np.sin(thv)[:, None]
        Xh = Xh + eps * side * (-(fib.height / max(fib.r, 1e-300)) * (c * e1 + sn * e2) + u)
        # height derivative of the latitude point
    H = Xh @ fib0.frame[:2].T
    cross = T[:, 0] * H[:, 1] - T[:, 1] * H[:, 0]
    rev = bool(np.sum(np.sign(cross)) < 0)
    if rev:
        P = np.concatenate([P[:1], P[:0:-1]])
        T = -np.concatenate([T[:1], T[:0:-1]])
        s_out = np.concatenate([[s[0]], s[:0:-1]])
        z_out = np.concatenate([z[:1], z[:0:-1]])
    else:
        s_out, z_out = s, z
    W = whitney(P, T)
    reg = Regularization(side, hval, s_out, z_out, P, T, rev, W, period=L)
    return reg


def _loop_cusps(reg: Regularization, curve: SingularCurve) -> tuple[list[int], bool]:
    """Cusps of ``curve`` enclosed by a small loop of the regularised curve."""
    L = curve.length
    cs = np.array([c.t_star for c in curve.cusps])
    m = len(cs)
    if m == 0:
        return [], True
    gaps = np.diff(np.append(cs, cs[0] + L))
    left_gap = np.roll(gaps, 1)
    right_gap = gaps
    loops: list[int] = []
    ok = True

    for q in reg.whitney.crossings:
        s1, s2 = reg.s_of(q.t1 + reg.whitney.start), reg.s_of(q.t2 + reg.whitney.start)
        hit = None
        for j in range(m):
            lo = (s1 - cs[j] + L / 2) % L - L / 2
            hi = (s2 - cs[j] + L / 2) % L - L / 2
            if lo > hi:
                lo, hi = hi, lo
            if -0.5 * left_gap[j] < lo < 0 < hi < 0.5 * right_gap[j]:
                hit = j
                break
        if hit is not None:
            if hit in loops:
                ok = False
            loops.append(hit)
    return sorted(loops), ok


def classify_cusps(data: WeierstrassData, curve: SingularCurve,
                   options: TraceOptions | None = None) -> dict:
    """Trace both regularisations of ``curve`` and classify every cusp on both sides.

    Returns the regularisations keyed by side.  Each cusp's ``side_class`` is
    filled with TYPE_A (embedded convex arc) or TYPE_B (small loop).
    """
    opts = options or TraceOptions()
    L = curve.length
    cs = np.array([c.t_star for c in curve.cusps])
    delta = opts.delta1
    if len(cs) > 1:
        gmin = float(np.min(np.diff(np.append(cs, cs[0] + L))))
        delta = min(delta, opts.delta1 * (gmin / 0.5) ** 2)
    last_err = None
    for attempt in range(opts.max_halvings + 1):
        regs = {side: regularize(data, curve, side, delta, opts) for side in (1, -1)}
        loops = {}
        ok = True
        for side, reg in regs.items():
            lp, good = _loop_cusps(reg, curve)
            loops[side] = lp
            reg.loop_cusps = lp
            ok &= good
        if ok and len(cs):
            # each cusp is a loop on exactly one side
            both = set(loops[1]) & set(loops[-1])
            cover = set(loops[1]) | set(loops[-1])
            ok = not both and cover == set(range(len(cs)))
        if ok:
            for j, c in enumerate(curve.cusps):
                c.side_class = {side: (TYPE_B if j in loops[side] else TYPE_A) for side in (1, -1)}
            curve.regularized = regs
            return regs
        last_err = f"cusp classification inconclusive at delta={delta:.3e}"
        delta /= 2
    raise InconclusiveAtTolerance(last_err)


def classify_cusp(data: WeierstrassData, curve: SingularCurve, cusp: CuspRecord, side: int) -> str:
    if side not in cusp.side_class:
        classify_cusps(data, curve)
    return cusp.side_class[side]


# ---------------------------------------------------------------------------
# regions


def decompose_regions(data: WeierstrassData, curves: list[SingularCurve]) -> RegionDecomposition:
    """Components of the complement of the singular set, labelled by the sign of J."""
    polys = [np.c_[c.z.real, c.z.imag] for c in curves]
    m = len(curves)
    containers = []
    for i in range(m):
        p = polys[i][0]
        containers.append(frozenset(j for j in range(m) if j != i and winding_numbers(polys[j], p)[0] != 0))
    inside_key = [containers[i] | {i} for i in range(m)]
    # J > 0 lies on the left of each curve (M+ orientation)
    inside_sign = [1 if signed_area(polys[i]) > 0 else -1 for i in range(m)]

    def key_of(z) -> frozenset:
        if is_inf(z):
            return frozenset()
        q = np.array([[complex(z).real, complex(z).imag]])
        return frozenset(j for j in range(m) if winding_numbers(polys[j], q)[0] != 0)

    keys = [frozenset()] + inside_key
    signs = {}
    for i in range(m):
        signs[inside_key[i]] = inside_sign[i]
        if not containers[i]:
            signs[frozenset()] = -inside_sign[i]
    # sample J on both sides of every curve
    fib = curves[0].fibration
    u = fib.frame[2]
    for i, c in enumerate(curves):
        k = len(c.z) // 3
        z0 = c.z[k]
        w1, _ = fib.velocity(z0, c.theta[k])
        normal = 1j * c.direction_sign * w1 / abs(w1)
        step = 1e-4 * (1 + abs(z0))
        for sgn in (1, -1):
            zz = z0 + sgn * step * normal
            J = float(data.gauss_vec(np.array([zz]))[0] @ u) - fib.height
            expect = signs[key_of(zz)]
            if np.sign(J) != expect or np.sign(J) != sgn:
                raise AmbiguousRegion(f"sign of J does not match region label near curve {i}")
    _, branches = degree_and_branch_points(data)
    # fiber count over a generic point of each hemisphere
    counts = {k: {1: 0, -1: 0} for k in keys}
    e1, e2, _ = fib.frame
    for sgn in (1, -1):
        y = sgn * 0.8 * u + 0.6 * (np.cos(0.7312) * e1 + np.sin(0.7312) * e2)
        a, b = homogeneous_g(y)
        coeffs = complex(b) * fib.Pc - complex(a) * fib.Qc
        roots = aberth_roots(coeffs) if abs(coeffs[-1]) > 1e-12 * fib.scale else None
        if roots is None:
            raise AmbiguousRegion("generic fiber meets infinity")
        for r in roots:
            counts[key_of(r)][sgn] += 1
    regions = []
    for k in keys:
        sgn = signs[k]
        if k:
            outer = [i for i in range(m) if inside_key[i] == k]
        else:
            outer = []
        inner = [i for i in range(m) if containers[i] == k]
        boundary = sorted(outer + inner)
        ends = [e for e in data.ends if key_of(e) == k]
        brs = [(b.location, b.order) for b in branches if key_of(b.location) == k]
        regions.append(Region(k, sgn, boundary, ends, brs, 2 - len(boundary), counts[k][sgn]))
    if any(counts[k][-signs[k]] for k in keys):
        raise AmbiguousRegion("fiber point found in a region of the wrong sign")
    return RegionDecomposition(regions)
