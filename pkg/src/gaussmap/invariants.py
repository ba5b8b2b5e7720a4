"""Integer invariants of the singular set and the identities relating them.

Every curve quantity is taken with the ``M+`` orientation of the curve unless
a region orientation is stated.  Side ``+1`` is ``M+ = {<G, u> > 0}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .polynomial import INF, aberth_roots, is_inf
from .projection import (
    TYPE_A,
    TYPE_B,
    RegionDecomposition,
    SingularCurve,
    TraceOptions,
    _position_derivatives,
    classify_cusps,
    decompose_regions,
    detect_cusps,
    trace_singular_set,
)
from .weierstrass import (
    BranchRecord,
    EndData,
    WeierstrassData,
    degree_and_branch_points,
    eval_gauss,
    geometric_indices,
    homogeneous_g,
    orthonormal_frame,
    point_label,
)

INTEGER_TOL = 1e-3


class Disagreement(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# geodesic curvature and the cusp winding number


@dataclass
class CurvatureData:
    kg_integral: float
    omega: int
    mu_list: list
    rho_list: list
    arc_integrals: list


def _kg_density(data: WeierstrassData, curve: SingularCurve, s: np.ndarray) -> np.ndarray:
    z, zs, zss, th = curve.jets(s)
    dX, d2X = _position_derivatives(data, z, zs, zss)
    S, dS, d2S = curve.fibration.sigma(th)
    if curve.eps:
        dX = dX + curve.eps * curve.direction_sign * dS
        d2X = d2X + curve.eps * d2S
    num = np.einsum("ij,ij->i", np.cross(dX, d2X), S)
    return num / np.einsum("ij,ij->i", dX, dX)


def _integrate(data: WeierstrassData, curve: SingularCurve, a: np.ndarray, b: np.ndarray,
               nodes: int = 10) -> np.ndarray:
    x, w = np.polynomial.legendre.leggauss(nodes)
    m, h = (a + b) / 2, (b - a) / 2
    pts = (m[:, None] + h[:, None] * x[None, :]).ravel()
    vals = _kg_density(data, curve, pts).reshape(len(a), nodes)
    return vals @ w * h


def geodesic_curvature_and_omega(data: WeierstrassData, curve: SingularCurve) -> CurvatureData:
    """Total geodesic curvature of the curve and the combinatorial winding number.

    On the arc between consecutive cusps ``mu = -sign(beta)`` where
    ``Gamma' = alpha u + beta (u x G)``; ``rho`` is half the jump of the sign
    of ``<Gamma', u>`` between the bounding cusps.
    """
    L = curve.length
    cs = [c.t_star for c in curve.cusps]
    knots = np.unique(np.concatenate([curve.s, cs, [L]]))
    seg_a, seg_b = knots[:-1], knots[1:]
    vals = _integrate(data, curve, seg_a, seg_b)
    total = float(vals.sum())
    if not cs:
        return CurvatureData(total, 0, [], [], [])
    mus, rhos, arcs = [], [], []
    m = len(cs)
    cum = np.concatenate([[0.0], np.cumsum(vals)])
    kk = np.searchsorted(knots, cs)
    for j in range(m):
        lo = cs[j]
        hi = cs[(j + 1) % m] + (L if j == m - 1 else 0.0)
        mid = 0.5 * (lo + hi)
        mu = -int(np.sign(curve.beta(np.array([mid % L]))[0]))
        rho = (curve.cusps[(j + 1) % m].vertical_sign - curve.cusps[j].vertical_sign) // 2
        if j < m - 1:
            arc = cum[kk[j + 1]] - cum[kk[j]]
        else:
            arc = total - (cum[kk[-1]] - cum[kk[0]])
        mus.append(mu)
        rhos.append(int(rho))
        arcs.append(float(arc))
    omega = int(sum(a * b for a, b in zip(mus, rhos)))
    return CurvatureData(total, omega, mus, rhos, arcs)


def alternation_ok(arc_integrals: Sequence[float], tol: float = 1e-3) -> bool:
    """Consecutive non-vanishing arc integrals, ``k`` arcs apart, relate by ``-(-1)^k``."""
    nz = [i for i, v in enumerate(arc_integrals) if abs(v) > tol]
    m = len(arc_integrals)
    if len(nz) < 2:
        return True
    for a, b in zip(nz, nz[1:] + [nz[0] + m]):
        k = b - a
        va, vb = arc_integrals[a], arc_integrals[b % m]
        if abs(va - (-((-1) ** k)) * vb) > tol * (1 + abs(va)):
            return False
    return True


# ---------------------------------------------------------------------------
# per-curve invariants


@dataclass
class SideData:
    side: int
    delta: float
    a: int
    b: int
    rho: int
    rho_value: float
    mu: int
    theta_plus: int
    theta_minus: int
    theta_plus_true: int
    theta_minus_true: int

    @property
    def whitney_residual(self) -> int:
        return self.rho - (self.mu + self.theta_plus_true - self.theta_minus_true)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta, "a": self.a, "b": self.b, "rho": self.rho,
            "rho_value": self.rho_value, "mu": self.mu,
            "theta_plus": self.theta_plus, "theta_minus": self.theta_minus,
            "theta_plus_true": self.theta_plus_true, "theta_minus_true": self.theta_minus_true,
        }


@dataclass
class CurveInvariants:
    index: int
    c: int
    a_plus: int
    b_plus: int
    omega: int
    mu: int
    nu: int
    theta: int
    deg_G: int
    kappa_integral: float
    kg_integral: float
    reference_side: int
    degenerate: int = 0
    mu_list: list = field(default_factory=list)
    rho_list: list = field(default_factory=list)
    arc_integrals: list = field(default_factory=list)
    sides: dict = field(default_factory=dict)
    deg_combinatorial: int = 0
    closure_residual: float = 0.0
    vertices: int = 0

    def to_dict(self) -> dict:
        return {
            "index": self.index, "c": self.c, "a_plus": self.a_plus, "b_plus": self.b_plus,
            "omega": self.omega, "mu": self.mu, "nu": self.nu, "theta": self.theta,
            "deg_G": self.deg_G, "deg_combinatorial": self.deg_combinatorial,
            "kappa_integral": self.kappa_integral, "kg_integral": self.kg_integral,
            "reference_side": self.reference_side, "degenerate": self.degenerate,
            "mu_list": list(self.mu_list), "rho_list": list(self.rho_list),
            "arc_integrals": list(self.arc_integrals),
            "sides": {("+" if k > 0 else "-"): v.to_dict() for k, v in sorted(self.sides.items(), reverse=True)},
            "closure_residual": self.closure_residual, "vertices": self.vertices,
        }


def whitney_side_data(curve: SingularCurve, side: int) -> SideData:
    reg = curve.regularized[side]
    w = reg.whitney
    a = sum(1 for c in curve.cusps if c.side_class.get(side) == TYPE_A)
    b = sum(1 for c in curve.cusps if c.side_class.get(side) == TYPE_B)
    return SideData(side, reg.delta, a, b, w.rho, w.rho_value, w.mu, w.theta_plus, w.theta_minus,
                    w.theta_plus_true, w.theta_minus_true)


def curve_gauss_degree(curve: SingularCurve, sides: dict) -> tuple[int, float, int]:
    """Degree of ``G`` on the curve by winding, by turning quadrature and combinatorially.

    Returns ``(deg_winding, deg_quadrature, deg_combinatorial)``; the last two
    come from the regularised curve of each side and must agree on both sides.
    """
    deg_winding = -curve.nu
    quad = []
    comb = []
    for sd in sides.values():
        quad.append(sd.rho_value - 0.5 * (sd.a - sd.b))
        comb.append(sd.mu + sd.theta_plus_true - sd.theta_minus_true - (sd.a - sd.b) // 2
                    if (sd.a - sd.b) % 2 == 0 else np.nan)
    dq = float(np.mean(quad))
    if max(abs(q - deg_winding) for q in quad) > INTEGER_TOL or any(c != deg_winding for c in comb):
        raise Disagreement(f"curve degree: winding {deg_winding}, quadrature {quad}, combinatorial {comb}")
    return deg_winding, dq, int(comb[0])


def _reference_side(sides: dict) -> int:
    for side in (-1, 1):
        if sides[side].b == 0 and sides[side].theta_plus_true == 0:
            return side
    for side in (-1, 1):
        if sides[side].b == 0:
            return side
    for side in (1, -1):
        if sides[side].theta_plus_true == 0:
            return side
    return 1


def curve_invariants(data: WeierstrassData, curve: SingularCurve) -> CurveInvariants:
    cd = geodesic_curvature_and_omega(data, curve)
    sides = {side: whitney_side_data(curve, side) for side in (1, -1)}
    deg, dq, dc = curve_gauss_degree(curve, sides)
    ref = _reference_side(sides)
    sd = sides[ref]
    c = len(curve.cusps)
    theta = sd.theta_minus_true - sd.theta_plus_true - sd.b
    return CurveInvariants(
        index=curve.index,
        c=c,
        a_plus=sides[1].a,
        b_plus=sides[1].b,
        omega=cd.omega,
        mu=sd.mu,
        nu=curve.nu,
        theta=theta,
        deg_G=deg,
        kappa_integral=dq,
        kg_integral=cd.kg_integral,
        reference_side=ref,
        degenerate=sum(1 for q in curve.cusps if q.degenerate),
        mu_list=cd.mu_list,
        rho_list=cd.rho_list,
        arc_integrals=cd.arc_integrals,
        sides=sides,
        deg_combinatorial=dc,
        closure_residual=curve.lift.closure_residual,
        vertices=len(curve.s),
    )


# ---------------------------------------------------------------------------
# missing points


@dataclass
class MissingPoints:
    points: list  # unit 3-vectors
    preimages: list  # list of lists of ends
    signs: list  # hemisphere of each point relative to the direction

    @property
    def l(self) -> int:
        return len(self.points)

    @property
    def l_plus(self) -> int:
        return sum(1 for s in self.signs if s > 0)

    @property
    def l_minus(self) -> int:
        return sum(1 for s in self.signs if s < 0)

    def to_dict(self) -> dict:
        return {
            "points": [list(map(float, p)) for p in self.points],
            "preimages": [[point_label(e) for e in pre] for pre in self.preimages],
            "l": self.l, "l_plus": self.l_plus, "l_minus": self.l_minus,
        }


def missing_points(data: WeierstrassData, direction: Sequence[float] = (0.0, 0.0, 1.0),
                   tol: float = 1e-6) -> MissingPoints:
    """Values of ``G`` that are attained only at ends (hence omitted by the surface)."""
    u = orthonormal_frame(direction)[2]
    n = data.g.degree
    Pc, Qc = data.g.num.padded(n + 1), data.g.den.padded(n + 1)
    scale = max(np.max(np.abs(Pc)), np.max(np.abs(Qc)))
    pts, pres, signs = [], [], []
    for w in data.ends:
        y = eval_gauss(data, w)
        if any(np.linalg.norm(y - p) < 1e-9 for p in pts):
            continue
        a, b = homogeneous_g(y)
        coeffs = complex(b) * Pc - complex(a) * Qc
        k = len(coeffs)
        while k > 1 and abs(coeffs[k - 1]) <= 1e-12 * scale:
            k -= 1
        fiber = []
        if k > 1:
            fiber.extend(complex(r) for r in aberth_roots(coeffs[:k]))
        if k - 1 < n:
            fiber.append(INF)
        if all(data.is_end(r, tol) for r in fiber):
            pre = []
            for e in data.ends:
                if any((is_inf(e) and is_inf(r)) or (not is_inf(e) and not is_inf(r) and abs(e - r) < tol * (1 + abs(e)))
                       for r in fiber):
                    pre.append(e)
            pts.append(y)
            pres.append(pre)
            signs.append(int(np.sign(y @ u)))
    return MissingPoints(pts, pres, signs)


# ---------------------------------------------------------------------------
# report and identities


@dataclass
class Check:
    name: str
    kind: str  # "integer", "inequality" or "real"
    lhs: float
    rhs: float
    pre_round: float
    passed: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "lhs": self.lhs, "rhs": self.rhs,
                "pre_round": self.pre_round, "passed": self.passed}


@dataclass
class InvariantReport:
    name: str
    direction: tuple
    eps: float
    n: int
    ends: list
    branches: list
    curves: list
    regions: RegionDecomposition
    missing: MissingPoints
    checks: list = field(default_factory=list)
    trace: dict = field(default_factory=dict)
    singular_curves: list = field(default_factory=list, repr=False)

    # aggregates ----------------------------------------------------------

    @property
    def c_total(self) -> int:
        return sum(c.c for c in self.curves)

    @property
    def omega_total(self) -> int:
        return sum(c.omega for c in self.curves)

    @property
    def l(self) -> int:
        return self.missing.l

    def _side_sets(self, sign: int):
        regs = self.regions.of_sign(sign)
        ends = [e for r in regs for e in r.ends]
        brs = [b for r in regs for b in r.branch_points]
        return regs, ends, brs

    def index_of(self, end) -> int:
        for e in self.ends:
            if (is_inf(e.end) and is_inf(end)) or (not is_inf(e.end) and not is_inf(end) and abs(e.end - end) < 1e-9):
                return e.geometric_index
        raise KeyError(end)

    def aggregates(self) -> dict:
        B = sum(b.order for b in self.branches)
        E = len(self.ends)
        I = sum(e.geometric_index for e in self.ends)
        pre = [e for p in self.missing.preimages for e in p]
        B_inf = sum(b.order for b in self.branches if any(_same(b.location, e) for e in pre))
        out = {"B": B, "E": E, "I": I, "B_inf": B_inf, "B_prime": B - B_inf, "E_prime": E - len(pre)}
        for sign, tag in ((1, "+"), (-1, "-")):
            regs, ends, brs = self._side_sets(sign)
            out["B" + tag] = sum(b for _, b in brs)
            out["E" + tag] = len(ends)
            out["I" + tag] = sum(self.index_of(e) for e in ends)
            pre_s = [e for p, s in zip(self.missing.preimages, self.missing.signs) if s == sign for e in p]
            binf = sum(b for loc, b in brs if any(_same(loc, e) for e in pre_s))
            out["B_inf" + tag] = binf
            out["B_prime" + tag] = out["B" + tag] - binf
            out["E_prime" + tag] = len(ends) - len(pre_s)
            out["chi" + tag] = sum(r.euler_characteristic for r in regs)
        out["chi"] = out["chi+"] + out["chi-"]
        return out

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "direction": list(self.direction),
            "eps": self.eps,
            "n": self.n,
            "ends": [{"end": point_label(e.end), "geometric_index": e.geometric_index,
                      "gauss_image": list(e.gauss_image)} for e in self.ends],
            "branches": [{"location": point_label(b.location), "order": b.order} for b in self.branches],
            "curves": [c.to_dict() for c in self.curves],
            "regions": [r.to_dict() for r in self.regions.regions],
            "missing": self.missing.to_dict(),
            "aggregates": self.aggregates(),
            "c_total": self.c_total,
            "omega_total": self.omega_total,
            "checks": [c.to_dict() for c in self.checks],
            "all_passed": self.all_passed,
            "trace": dict(self.trace),
        }


def _same(p, q) -> bool:
    if is_inf(p) or is_inf(q):
        return is_inf(p) and is_inf(q)
    return abs(complex(p) - complex(q)) < 1e-6 * (1 + abs(complex(p)))


def _int_check(name: str, lhs, rhs) -> Check:
    pre = float(lhs) - float(rhs)
    ok = abs(pre - round(pre)) < INTEGER_TOL and round(pre) == 0
    return Check(name, "integer", float(lhs), float(rhs), pre, bool(ok))


def verify_identities(report: InvariantReport) -> list[Check]:
    """Evaluate every identity and inequality on an assembled report."""
    R = report
    n = R.n
    agg = R.aggregates()
    checks: list[Check] = []
    chi = agg["chi"]
    checks.append(_int_check("tc", 2 * n, -chi + agg["E"] + agg["I"]))
    checks.append(_int_check("rh", 2 * n, chi + agg["B"]))
    checks.append(_int_check("rh.genus0", agg["B"], 2 * n - 2))
    checks.append(_int_check("regions.euler", chi, 2))
    curves = {c.index: c for c in R.curves}
    # per-curve identities
    for c in R.curves:
        tag = f"[{c.index}]"
        checks.append(_int_check("kg_winding" + tag, c.kg_integral / (2 * np.pi), -0.5 * c.omega))
        checks.append(Check("kg_winding.tolerance" + tag, "real", c.kg_integral, -np.pi * c.omega,
                            c.kg_integral + np.pi * c.omega,
                            abs(c.kg_integral + np.pi * c.omega) < 1e-4 * (1 + abs(c.kg_integral))))
        if c.c == 0:
            checks.append(Check("kg_cuspless" + tag, "real", c.kg_integral, 0.0, c.kg_integral, abs(c.kg_integral) < 1e-6))
        checks.append(Check("kg_alternation" + tag, "inequality", 0, 0, 0, alternation_ok(c.arc_integrals)))
        checks.append(_int_check("curve_degree" + tag, c.kappa_integral, c.deg_G))
        if c.c == 0:
            checks.append(_int_check("curve_degree.cusps" + tag, c.deg_G, -c.nu))
        else:
            checks.append(_int_check("curve_degree.cusps" + tag, c.deg_G, -(-c.mu + c.theta + 0.5 * c.c)))
        for side, sd in sorted(c.sides.items(), reverse=True):
            st = "+" if side > 0 else "-"
            checks.append(_int_check(f"whitney{tag}{st}", sd.rho, sd.mu + sd.theta_plus_true - sd.theta_minus_true))
            checks.append(_int_check(f"whitney.raw{tag}{st}", sd.rho, sd.mu + sd.theta_plus - sd.theta_minus))
        checks.append(_int_check("cusp_sides" + tag, c.sides[1].a, c.sides[-1].b))
        checks.append(_int_check("cusp_balance.curve" + tag, c.omega, c.b_plus - c.a_plus))
    total_nu = sum(c.nu for c in R.curves)
    checks.append(_int_check("fiber_count", total_nu, n))
    c0 = [c for c in R.curves if c.c == 0]
    cp = [c for c in R.curves if c.c > 0]
    checks.append(_int_check("cusp_total", R.c_total,
                             2 * (n + sum(c.mu for c in cp) - sum(c.nu for c in c0) - sum(c.theta for c in cp))))
    checks.append(_int_check("kg_winding.total", sum(c.kg_integral for c in R.curves) / (2 * np.pi), -0.5 * R.omega_total))
    checks.append(_int_check("cusp_balance", R.omega_total, sum(c.b_plus - c.a_plus for c in R.curves)))
    # regions
    for k, reg in enumerate(R.regions.regions):
        tag = f"[{k}{'+' if reg.sign > 0 else '-'}]"
        s = reg.sign
        E = len(reg.ends)
        I = sum(R.index_of(e) for e in reg.ends)
        bnd = [curves[i] for i in reg.boundary]
        kg = s * sum(c.kg_integral for c in bnd)
        om = sum(c.omega for c in bnd)
        a = sum(c.sides[s].a for c in bnd)
        b = sum(c.sides[s].b for c in bnd)
        rho = sum(c.sides[s].rho_value for c in bnd)
        chi_r = reg.euler_characteristic
        checks.append(_int_check("tc.region" + tag, -reg.degree - kg / (2 * np.pi), -chi_r + E + I))
        checks.append(_int_check("rh.region" + tag, chi_r, reg.n_omega - reg.branch_sum))
        checks.append(_int_check("tc_winding.region" + tag, -reg.degree + s * 0.5 * om, -chi_r + E + I))
        checks.append(_int_check("euler_cusps.region" + tag, chi_r, reg.degree + 0.5 * a - 0.5 * b + E + I))
        checks.append(_int_check("cusp_balance.region" + tag, s * om, b - a))
        checks.append(_int_check("gauss_bonnet_flat" + tag, chi_r, rho + E + I))
        if reg.is_compact:
            checks.append(Check("compact_cusps" + tag, "inequality", sum(c.c for c in bnd), a,
                                0, sum(c.c for c in bnd) >= a >= 3))
        if reg.is_compact and reg.is_disk:
            (c,) = bnd
            sd = c.sides[s]
            checks.append(_int_check("disk_cusps.mu" + tag, sd.mu, 1))
            checks.append(_int_check("disk_cusps.b" + tag, sd.b, 0))
            checks.append(_int_check("disk_cusps.theta" + tag, sd.theta_minus_true, 0))
            checks.append(_int_check("disk_cusps.deg" + tag, abs(reg.degree), 1 + reg.branch_sum))
            checks.append(_int_check("disk_cusps.c" + tag, c.c, 2 + 2 * abs(reg.degree)))
            checks.append(_int_check("disk_cusps.a" + tag, sd.a, c.c))
    # hemispheres
    for sign, tag in ((1, "+"), (-1, "-")):
        regs = R.regions.of_sign(sign)
        checks.append(_int_check("region_degree" + tag, sum(r.n_omega for r in regs), n))
        a_plus = sum(c.a_plus for c in R.curves)
        b_plus = sum(c.b_plus for c in R.curves)
        checks.append(_int_check("euler_cusps.hemisphere" + tag, agg["chi" + tag],
                                 -n + sign * 0.5 * a_plus - sign * 0.5 * b_plus + agg["E" + tag] + agg["I" + tag]))
        checks.append(_int_check("tc_winding.hemisphere" + tag, n + sign * 0.5 * R.omega_total,
                                 -agg["chi" + tag] + agg["E" + tag] + agg["I" + tag]))
        checks.append(_int_check("rh.hemisphere" + tag, agg["chi" + tag], n - agg["B" + tag]))
        checks.append(_int_check("hemisphere" + tag, 2 * n + sign * 0.5 * R.omega_total,
                                 agg["B" + tag] + agg["E" + tag] + agg["I" + tag]))
        checks.append(_int_check("obstruction" + tag,
                                 2 * n + sign * 0.5 * R.omega_total - (R.missing.l_plus if sign > 0 else R.missing.l_minus) * n,
                                 agg["B_prime" + tag] + agg["E_prime" + tag] + agg["I" + tag]))
    checks.append(_int_check("obstruction", (4 - R.l) * n, agg["B_prime"] + agg["E_prime"] + agg["I"]))
    checks.append(Check("missing_bound", "inequality", R.l, 2, 0, R.l <= 2))
    return checks


# ---------------------------------------------------------------------------
# pipeline


def analyze(data: WeierstrassData, direction: Sequence[float] = (0.0, 0.0, 1.0),
            frame: np.ndarray | None = None, eps: float = 0.0,
            options: TraceOptions | None = None) -> InvariantReport:
    """Full analysis: trace, cusps, classification, regions, invariants, identities."""
    opts = options or TraceOptions()
    frame = orthonormal_frame(direction) if frame is None else np.asarray(frame, dtype=float)
    u = frame[2]
    n, branches = degree_and_branch_points(data)
    ends: list[EndData] = geometric_indices(data)
    curves = trace_singular_set(data, frame=frame, eps=eps, options=opts)
    for c in curves:
        detect_cusps(data, c, opts)
        classify_cusps(data, c, opts)
    regions = decompose_regions(data, curves)
    inv = [curve_invariants(data, c) for c in curves]
    missing = missing_points(data, u)
    trace = {
        "fiber_checks": int(sum(c.fiber_checks for c in curves[:1])),
        "fiber_count": n,
        "max_closure_residual": float(max(c.lift.closure_residual for c in curves)),
        "deltas": sorted({float(abs(r.delta)) for c in curves for r in c.regularized.values()}),
    }
    report = InvariantReport(data.name, tuple(float(x) for x in u), float(eps), n, ends, branches, inv,
                             regions, missing, trace=trace, singular_curves=curves)
    report.checks = verify_identities(report)
    return report
