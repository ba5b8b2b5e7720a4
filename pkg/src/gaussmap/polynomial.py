"""Polynomials and rational maps over the complex numbers.

Coefficients are stored in ascending order.  The point at infinity of the
Riemann sphere is the singleton :data:`INF`; it is never approximated by a
large finite number.  Evaluation at :data:`INF` goes through the chart
``w = 1/z``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

#: relative tolerance under which two roots are considered coincident
COPRIME_TOL = 1e-9
#: relative size under which a leading coefficient is treated as zero
TRIM_TOL = 1e-13


class _Infinity:
    """The point at infinity of the extended complex plane."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()

ExtendedComplex = Union[complex, _Infinity]


def is_inf(p) -> bool:
    return p is INF


def ext_distance(p: ExtendedComplex, q: ExtendedComplex) -> float:
    """Chordal distance on the Riemann sphere (unit sphere, diameter 2)."""
    if is_inf(p) and is_inf(q):
        return 0.0
    if is_inf(p):
        p, q = q, p
    if is_inf(q):
        return 2.0 / np.sqrt(1.0 + abs(p) ** 2)
    return 2.0 * abs(p - q) / np.sqrt((1.0 + abs(p) ** 2) * (1.0 + abs(q) ** 2))


class PoleAt(ValueError):
    """Evaluation requested at a pole."""


# ---------------------------------------------------------------------------
# root finding


def aberth_roots(coeffs: Sequence[complex], init: Sequence[complex] | None = None,
                 tol: float = 1e-15, maxiter: int = 500) -> np.ndarray:
    """Simultaneous Aberth-Ehrlich iteration for all roots of a polynomial.

    ``coeffs`` are ascending and the leading coefficient must be nonzero.
    ``init`` warm-starts the iteration (used by continuation); when it fails
    to converge the roots are recomputed by Newton iteration with deflation.
    """
    c = np.asarray(coeffs, dtype=complex)
    d = len(c) - 1
    if d < 1:
        return np.zeros(0, dtype=complex)
    if d == 1:
        return np.array([-c[0] / c[1]])
    a = c[::-1] / c[-1]  # monic, descending
    da = a[:-1] * np.arange(d, 0, -1)
    if init is not None and len(init) == d:
        z = np.array(init, dtype=complex)
        # separate exact duplicates in warm starts
        for i in range(d):
            for j in range(i):
                if z[i] == z[j]:
                    z[i] += 1e-8 * (1 + abs(z[i])) * np.exp(0.7j * (i + 1))
    else:
        # Cauchy-type radius bound and offset angles
        radius = 1.0 + np.max(np.abs(a[1:])) if d else 1.0
        radius = min(radius, 2.0 * np.max(np.abs(a[1:]) ** (1.0 / np.arange(1, d + 1))) + 1e-3)
        z = radius * np.exp(1j * (2 * np.pi * np.arange(d) / d + 0.4))
    converged = False
    for _ in range(maxiter):
        p = np.polyval(a, z)
        dp = np.polyval(da, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            s = np.sum(np.where(np.eye(d, dtype=bool), 0.0, 1.0 / diff), axis=1)
            step = ratio / (1.0 - ratio * s)
        if not np.all(np.isfinite(step)):
            break
        z = z - step
        if np.all(np.abs(step) <= tol * (1.0 + np.abs(z))):
            converged = True
            break
    if not converged or not np.all(np.isfinite(z)):
        z = _deflation_roots(c)
    return z


def _deflation_roots(coeffs: np.ndarray) -> np.ndarray:
    """Newton iteration with synthetic-division deflation, then polishing."""
    work = np.asarray(coeffs, dtype=complex)[::-1] / coeffs[-1]
    full = work.copy()
    found = []
    while len(work) > 2:
        x = 0.4 + 0.9j
        dwork = np.polyder(work)
        for _ in range(200):
            f = np.polyval(work, x)
            df = np.polyval(dwork, x)
            if df == 0:
                x += 1e-3
                continue
            dx = f / df
            x -= dx
            if abs(dx) < 1e-16 * (1 + abs(x)):
                break
        found.append(x)
        work, _ = np.polydiv(work, np.array([1.0, -x]))
    found.append(-work[1] / work[0])
    dfull = np.polyder(full)
    out = []
    for x in found:
        for _ in range(5):
            df = np.polyval(dfull, x)
            if df == 0:
                break
            x = x - np.polyval(full, x) / df
        out.append(x)
    return np.array(out, dtype=complex)


def cluster_roots(roots: Iterable[complex], tol: float) -> list[tuple[complex, int]]:
    """Group numerically coincident roots; returns (mean location, multiplicity)."""
    pts = list(roots)
    groups: list[list[complex]] = []
    for r in pts:
        for grp in groups:
            centre = np.mean(grp)
            if abs(r - centre) <= tol * (1.0 + abs(centre)):
                grp.append(r)
                break
        else:
            groups.append([r])
    return [(complex(np.mean(g)), len(g)) for g in groups]


# ---------------------------------------------------------------------------
# polynomials


def _trim(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    if c.size == 0:
        return np.zeros(1, dtype=complex)
    scale = np.max(np.abs(c))
    if scale == 0:
        return np.zeros(1, dtype=complex)
    k = len(c)
    while k > 1 and abs(c[k - 1]) <= TRIM_TOL * scale:
        k -= 1
    return c[:k].copy()


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Complex polynomial with ascending coefficients."""

    coeffs: np.ndarray

    def __init__(self, coeffs):
        object.__setattr__(self, "coeffs", _trim(np.atleast_1d(np.asarray(coeffs, dtype=complex))))

    @classmethod
    def monomial(cls, k: int, c: complex = 1.0) -> "Polynomial":
        a = np.zeros(k + 1, dtype=complex)
        a[k] = c
        return cls(a)

    @classmethod
    def from_roots(cls, roots: Iterable[complex], lead: complex = 1.0) -> "Polynomial":
        p = cls([lead])
        for r in roots:
            p = p * cls([-r, 1.0])
        return p

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0

    @property
    def lead(self) -> complex:
        return complex(self.coeffs[-1])

    def __call__(self, z):
        return np.polyval(self.coeffs[::-1], z)

    def derivative(self, k: int = 1) -> "Polynomial":
        c = self.coeffs
        for _ in range(k):
            if len(c) == 1:
                return Polynomial([0.0])
            c = c[1:] * np.arange(1, len(c))
        return Polynomial(c)

    def padded(self, n: int) -> np.ndarray:
        out = np.zeros(max(n, len(self.coeffs)), dtype=complex)
        out[: len(self.coeffs)] = self.coeffs
        return out

    def reversed(self, d: int | None = None) -> "Polynomial":
        """Coefficients of ``z**d * p(1/z)``; ``d`` defaults to the degree."""
        d = self.degree if d is None else d
        return Polynomial(self.padded(d + 1)[::-1])

    def __add__(self, other):
        other = _as_poly(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return Polynomial(self.padded(n) + other.padded(n))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self.coeffs)

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(np.convolve(self.coeffs, other.coeffs))
        return Polynomial(self.coeffs * complex(other))

    __rmul__ = __mul__

    def roots(self, init=None) -> np.ndarray:
        if self.degree < 1:
            return np.zeros(0, dtype=complex)
        return aberth_roots(self.coeffs, init=init)

    def valuation(self, tol: float = TRIM_TOL) -> int:
        """Order of vanishing at ``z = 0``."""
        scale = np.max(np.abs(self.coeffs))
        for k, c in enumerate(self.coeffs):
            if abs(c) > tol * scale:
                return k
        return 0

    def __repr__(self) -> str:
        return f"Polynomial({np.round(self.coeffs, 12).tolist()})"


def _as_poly(x) -> Polynomial:
    return x if isinstance(x, Polynomial) else Polynomial([complex(x)])


# ---------------------------------------------------------------------------
# rational maps


@dataclass(frozen=True, eq=False)
class RationalMap:
    """A meromorphic function on the Riemann sphere, ``num/den``."""

    num: Polynomial
    den: Polynomial

    def __post_init__(self):
        if self.den.is_zero:
            raise ValueError("denominator is the zero polynomial")

    @classmethod
    def from_coeffs(cls, num, den=(1.0,)) -> "RationalMap":
        return cls(Polynomial(num), Polynomial(den))

    @classmethod
    def constant(cls, c: complex) -> "RationalMap":
        return cls(Polynomial([c]), Polynomial([1.0]))

    @property
    def degree(self) -> int:
        if self.num.is_zero:
            return 0
        return max(self.num.degree, self.den.degree)

    # -- evaluation ---------------------------------------------------------

    def __call__(self, z):
        """Vectorised evaluation at finite points (poles give inf)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.num(z) / self.den(z)

    def at(self, p: ExtendedComplex) -> ExtendedComplex:
        """Value at an extended-complex point, returning INF at poles."""
        if is_inf(p):
            k = self.num.degree - self.den.degree
            if self.num.is_zero or k < 0:
                return 0j
            if k > 0:
                return INF
            return self.num.lead / self.den.lead
        d = complex(self.den(p))
        n = complex(self.num(p))
        if abs(d) <= 1e-14 * max(1.0, abs(n)):
            order = self.order_at(p)
            if order < 0:
                return INF
            if order > 0:
                return 0j
            # removable: evaluate slightly off and average
            eps = 1e-7 * (1 + abs(p))
            vals = [complex(self(p + eps * np.exp(2j * np.pi * k / 4))) for k in range(4)]
            return complex(np.mean(vals))
        return n / d

    def derivative(self) -> "RationalMap":
        num = self.num.derivative() * self.den - self.num * self.den.derivative()
        return RationalMap(num, self.den * self.den)

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        other = _as_rat(other)
        return RationalMap(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __neg__(self):
        return RationalMap(-self.num, self.den)

    def __sub__(self, other):
        return self + (-_as_rat(other))

    def __rsub__(self, other):
        return _as_rat(other) - self

    def __mul__(self, other):
        other = _as_rat(other)
        return RationalMap(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_rat(other)
        if other.num.is_zero:
            raise ZeroDivisionError("division by the zero rational map")
        return RationalMap(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other):
        return _as_rat(other) / self

    def reciprocal(self) -> "RationalMap":
        return RationalMap(self.den, self.num)

    def compose_mobius(self, a: complex, b: complex, c: complex, d: complex) -> "RationalMap":
        """Return ``M o self`` for the Mobius map ``M(w) = (a w + b)/(c w + d)``."""
        return RationalMap(self.num * a + self.den * b, self.num * c + self.den * d).reduced()

    # -- structure ------------------------------------------------------------

    def reduced(self, tol: float = COPRIME_TOL) -> "RationalMap":
        """Cancel common roots of numerator and denominator, normalise den."""
        num, den = self.num, self.den
        if num.is_zero:
            return RationalMap(Polynomial([0.0]), Polynomial([1.0]))
        nr = list(num.roots()) if num.degree > 0 else []
        dr = list(den.roots()) if den.degree > 0 else []
        scale = 1.0 + max([abs(r) for r in nr + dr] or [0.0])
        ctol = max(tol, 1e-6) * scale
        common = []
        for r in list(nr):
            best = None
            for j, s in enumerate(dr):
                if abs(r - s) <= ctol and (best is None or abs(r - s) < abs(r - dr[best])):
                    best = j
            if best is not None:
                common.append(0.5 * (r + dr[best]))
                nr.remove(r)
                dr.pop(best)
        if not common:
            lead = den.lead
            return RationalMap(Polynomial(num.coeffs / lead), Polynomial(den.coeffs / lead))
        new_num = Polynomial.from_roots(nr, num.lead)
        new_den = Polynomial.from_roots(dr, den.lead)
        lead = new_den.lead
        return RationalMap(Polynomial(new_num.coeffs / lead), Polynomial(new_den.coeffs / lead))

    def is_coprime(self, tol: float = COPRIME_TOL) -> bool:
        if self.num.degree < 1 or self.den.degree < 1:
            return True
        nr, dr = self.num.roots(), self.den.roots()
        scale = 1.0 + max(np.max(np.abs(nr)), np.max(np.abs(dr)))
        gap = np.min(np.abs(nr[:, None] - dr[None, :]))
        return bool(gap > max(tol, 1e-7) * scale)

    def order_at(self, p: ExtendedComplex) -> int:
        """Zero order (positive) or pole order (negative) at ``p``."""
        if is_inf(p):
            if self.num.is_zero:
                return 0
            return self.den.degree - self.num.degree
        zn = _root_count_near(self.num, p)
        zd = _root_count_near(self.den, p)
        return zn - zd

    def poles(self) -> list[tuple[ExtendedComplex, int]]:
        """Poles with their orders, including the point at infinity."""
        r = self.reduced()
        out: list[tuple[ExtendedComplex, int]] = []
        if r.den.degree > 0:
            out.extend(cluster_roots(r.den.roots(), 1e-5))
        k = r.num.degree - r.den.degree
        if not r.num.is_zero and k > 0:
            out.append((INF, k))
        return out

    def __repr__(self) -> str:
        return f"RationalMap(num={self.num!r}, den={self.den!r})"


def _root_count_near(p: Polynomial, z0: complex) -> int:
    if p.is_zero:
        return 0
    # Taylor coefficients at z0 give the multiplicity robustly
    q = p
    scale = np.max(np.abs(p.coeffs)) * (1.0 + abs(z0)) ** p.degree
    count = 0
    while q.degree >= 0 and count <= p.degree:
        if abs(complex(q(z0))) > 1e-9 * scale * max(1.0, count):
            break
        count += 1
        q = q.derivative()
        scale *= max(1, p.degree)
        if q.is_zero:
            break
    return count


def _as_rat(x) -> RationalMap:
    if isinstance(x, RationalMap):
        return x
    if isinstance(x, Polynomial):
        return RationalMap(x, Polynomial([1.0]))
    return RationalMap.constant(complex(x))
