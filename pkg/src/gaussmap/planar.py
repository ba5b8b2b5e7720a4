"""Closed plane curves: self-intersections, rotation numbers and crossing signs.

Curves are closed polylines given by their vertices (the closing vertex is
implicit).  Parameters of points on a polyline are expressed in vertex units:
``i + s`` is the point a fraction ``s`` along segment ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CHUNK = 32
#: fixed rotation applied before picking the lowest point, to avoid ties
START_ROTATION = 0.3141592653589793 / 3.0


class NotNormal(ValueError):
    """The curve has a tangential or multiple self-intersection."""

    def __init__(self, message: str, params=()):
        super().__init__(message)
        self.params = tuple(params)


@dataclass(frozen=True)
class Crossing:
    t1: float  # parameters measured from the outside starting point, t1 < t2
    t2: float
    point: tuple[float, float]
    sign: int  # +1 when (tangent(t1), tangent(t2)) is a negative base


@dataclass
class WhitneyData:
    rho: int
    rho_value: float
    mu: int
    theta_plus: int
    theta_minus: int
    theta_plus_true: int
    theta_minus_true: int
    crossings: list = field(default_factory=list)
    true_crossings: list = field(default_factory=list)
    start: int = 0

    @property
    def identity_residual(self) -> int:
        return self.rho - (self.mu + self.theta_plus_true - self.theta_minus_true)

    @property
    def raw_identity_residual(self) -> int:
        return self.rho - (self.mu + self.theta_plus - self.theta_minus)


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def segment_intersections(P: np.ndarray) -> list[tuple[int, int, float, float]]:
    """All transverse intersections between non-adjacent segments.

    Returns ``(i, j, s, u)`` with ``i < j`` and the hit point
    ``P[i] + s (P[i+1]-P[i]) = P[j] + u (P[j+1]-P[j])``.
    """
    P = np.asarray(P, dtype=float)
    N = len(P)
    if N < 4:
        return []
    A = P
    B = np.roll(P, -1, axis=0)
    lo = np.minimum(A, B)
    hi = np.maximum(A, B)
    nchunks = (N + CHUNK - 1) // CHUNK
    starts = np.arange(nchunks) * CHUNK
    ends = np.minimum(starts + CHUNK, N)
    clo = np.array([lo[s:e].min(axis=0) for s, e in zip(starts, ends)])
    chi = np.array([hi[s:e].max(axis=0) for s, e in zip(starts, ends)])
    ov = ((clo[:, None, 0] <= chi[None, :, 0]) & (clo[None, :, 0] <= chi[:, None, 0])
          & (clo[:, None, 1] <= chi[None, :, 1]) & (clo[None, :, 1] <= chi[:, None, 1]))
    ci, cj = np.nonzero(np.triu(ov))
    if len(ci) == 0:
        return []
    off = np.arange(CHUNK)
    I = (starts[ci][:, None, None] + off[None, :, None]) * np.ones(CHUNK, dtype=int)[None, None, :]
    J = (starts[cj][:, None, None] + off[None, None, :]) * np.ones(CHUNK, dtype=int)[None, :, None]
    I = I.ravel()
    J = J.ravel()
    keep = (I < N) & (J < N) & (J > I + 1) & ~((I == 0) & (J == N - 1))
    I, J = I[keep], J[keep]
    # bounding-box prefilter
    keep = ((lo[I, 0] <= hi[J, 0]) & (lo[J, 0] <= hi[I, 0])
            & (lo[I, 1] <= hi[J, 1]) & (lo[J, 1] <= hi[I, 1]))
    I, J = I[keep], J[keep]
    if len(I) == 0:
        return []
    r = B[I] - A[I]
    s = B[J] - A[J]
    qp = A[J] - A[I]
    den = _cross(r, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross(qp, s) / den
        u = _cross(qp, r) / den
    hit = (den != 0) & (t >= 0) & (t < 1) & (u >= 0) & (u < 1)
    return [(int(i), int(j), float(a), float(b)) for i, j, a, b in zip(I[hit], J[hit], t[hit], u[hit])]


def polyline_turning(P: np.ndarray) -> float:
    """Total turning of the edge directions of a closed polyline, in turns."""
    E = np.roll(P, -1, axis=0) - P
    E2 = np.roll(E, -1, axis=0)
    ang = np.arctan2(_cross(E, E2), np.einsum("ij,ij->i", E, E2))
    return float(ang.sum() / (2 * np.pi))


def tangent_turning(T: np.ndarray) -> float:
    """Total turning of a closed sequence of tangent vectors, in turns.

    Consecutive tangents must differ by less than a half turn.
    """
    T2 = np.roll(T, -1, axis=0)
    ang = np.arctan2(_cross(T, T2), np.einsum("ij,ij->i", T, T2))
    return float(ang.sum() / (2 * np.pi))


def signed_area(P: np.ndarray) -> float:
    Q = np.roll(P, -1, axis=0)
    return 0.5 * float(np.sum(_cross(P, Q)))


def winding_number(P: np.ndarray, q) -> int:
    """Winding number of the closed polyline ``P`` around the point ``q``."""
    V = P - np.asarray(q, dtype=float)
    W = np.roll(V, -1, axis=0)
    ang = np.arctan2(_cross(V, W), np.einsum("ij,ij->i", V, W))
    return int(round(ang.sum() / (2 * np.pi)))


def winding_numbers(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Winding numbers of ``P`` around each row of ``Q``."""
    Q = np.atleast_2d(Q)
    out = np.empty(len(Q), dtype=int)
    for k in range(0, len(Q), 64):
        V = P[None, :, :] - Q[k:k + 64, None, :]
        W = np.roll(V, -1, axis=1)
        ang = np.arctan2(_cross(V, W), np.einsum("kij,kij->ki", V, W))
        out[k:k + 64] = np.rint(ang.sum(axis=1) / (2 * np.pi)).astype(int)
    return out


def outside_start(P: np.ndarray) -> int:
    """Index of a global support vertex (lowest after a fixed rotation)."""
    c, s = np.cos(START_ROTATION), np.sin(START_ROTATION)
    y = -s * P[:, 0] + c * P[:, 1]
    return int(np.argmin(y))


def _cancel_nested(crossings: list[Crossing]) -> list[Crossing]:
    """Iteratively remove interleaved crossing pairs whose spanned arcs are disjoint."""
    remaining = list(crossings)
    while True:
        best = None
        m = len(remaining)
        for a in range(m):
            q1 = remaining[a]
            for b in range(m):
                q2 = remaining[b]
                if a == b or not (q1.t1 < q2.t1 < q1.t2 < q2.t2):
                    continue
                if q1.sign + q2.sign != 0:
                    continue
                lo1, hi1, lo2, hi2 = q1.t1, q2.t1, q1.t2, q2.t2
                blocked = False
                for k, q in enumerate(remaining):
                    if k in (a, b):
                        continue
                    x, y = q.t1, q.t2
                    if (lo1 < x < hi1 and lo2 < y < hi2) or (lo1 < y < hi1 and lo2 < x < hi2):
                        blocked = True
                        break
                if blocked:
                    continue
                size = (hi1 - lo1) + (hi2 - lo2)
                if best is None or size < best[0]:
                    best = (size, a, b)
        if best is None:
            return remaining
        _, a, b = best
        remaining = [q for k, q in enumerate(remaining) if k not in (a, b)]


def whitney(P: np.ndarray, T: np.ndarray | None = None, normal_tol: float = 1e-7) -> WhitneyData:
    """Whitney rotation number, crossing counts and starting sign of a closed curve.

    ``P`` are the vertices, ``T`` optional exact tangents at the vertices
    (used for the rotation number and the starting direction).
    """
    P = np.asarray(P, dtype=float)
    N = len(P)
    if T is None:
        T = np.roll(P, -1, axis=0) - np.roll(P, 1, axis=0)
    T = np.asarray(T, dtype=float)
    rho_value = tangent_turning(T)
    rho = int(round(rho_value))
    k0 = outside_start(P)
    c, s = np.cos(START_ROTATION), np.sin(START_ROTATION)
    mu = 1 if c * T[k0, 0] + s * T[k0, 1] > 0 else -1
    E = np.roll(P, -1, axis=0) - P
    hits = segment_intersections(P)
    crossings: list[Crossing] = []
    pts = []
    for i, j, si, sj in hits:
        ei = E[i] / np.linalg.norm(E[i])
        ej = E[j] / np.linalg.norm(E[j])
        det = float(_cross(ei, ej))
        if abs(det) < normal_tol:
            raise NotNormal("tangential self-intersection", (i + si, j + sj))
        pi = (i + si - k0) % N
        pj = (j + sj - k0) % N
        point = P[i] + si * E[i]
        if pi < pj:
            t1, t2, sign = pi, pj, (1 if det < 0 else -1)
        else:
            t1, t2, sign = pj, pi, (1 if det > 0 else -1)
        crossings.append(Crossing(float(t1), float(t2), (float(point[0]), float(point[1])), sign))
        pts.append(point)
    if len(pts) > 1:
        A = np.array(pts)
        scale = max(1e-300, float(np.ptp(P, axis=0).max()))
        d = np.linalg.norm(A[:, None, :] - A[None, :, :], axis=-1) + np.eye(len(A)) * 1e300
        if d.min() < 1e-12 * scale:
            raise NotNormal("multiple point", [crossings[int(k)].t1 for k in np.argwhere(d < 1e-12 * scale)[0]])
    crossings.sort(key=lambda q: (q.t1, q.t2))
    true = _cancel_nested(crossings)
    return WhitneyData(
        rho=rho,
        rho_value=rho_value,
        mu=mu,
        theta_plus=sum(1 for q in crossings if q.sign > 0),
        theta_minus=sum(1 for q in crossings if q.sign < 0),
        theta_plus_true=sum(1 for q in true if q.sign > 0),
        theta_minus_true=sum(1 for q in true if q.sign < 0),
        crossings=crossings,
        true_crossings=true,
        start=k0,
    )
