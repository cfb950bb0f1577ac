"""Mean projections, surface area, volume and the quermassintegral checks.

Everything is derived from the intrinsic volumes ``V_0..V_d`` of the hull.
For ``Q = P + s*B`` they follow from those of ``P`` by the Steiner expansion

    V_k(P + sB) = sum_j binom(d-j, k-j) kappa_{d-j} / kappa_{d-k} s^(k-j) V_j(P)

and the mean i-dimensional projection is

    M_i = kappa_i kappa_{d-i} V_i / (kappa_d binom(d, i)),

so M_1 is the mean width, M_{d-1} = kappa_{d-1} S / (d kappa_d) and M_d = vol.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import (
    Body,
    GeometryError,
    Hull,
    HullMetrics,
    Polytope,
    circumradius_hull,
    convex_hull,
    inradius_hull,
    kappa,
)
from .records import CERTIFIED, EXACT, GE, compare


def ball_constants(d: int) -> list[float]:
    """kappa_1..kappa_d."""
    return [kappa(i) for i in range(1, d + 1)]


def _as_hull(Q) -> Hull:
    if isinstance(Q, Hull):
        return Q
    if isinstance(Q, Body):
        return Q.as_hull()
    if isinstance(Q, Polytope):
        return Hull(Q, 0.0)
    raise TypeError(f"cannot measure {type(Q).__name__}")


def intrinsic_volumes(Q) -> np.ndarray:
    Q = _as_hull(Q)
    d = Q.dim
    base = np.asarray(Q.polytope.intrinsic, dtype=float)
    s = Q.offset
    if s == 0:
        return base.copy()
    out = np.zeros(d + 1)
    for k in range(d + 1):
        out[k] = sum(
            math.comb(d - j, k - j) * kappa(d - j) / kappa(d - k) * s ** (k - j) * base[j]
            for j in range(k + 1)
        )
    return out


def mean_projection(Q, i: int) -> float:
    Q = _as_hull(Q)
    d = Q.dim
    if not 1 <= i <= d:
        raise ValueError(f"projection index {i} outside 1..{d}")
    V = intrinsic_volumes(Q)
    return kappa(i) * kappa(d - i) * V[i] / (kappa(d) * math.comb(d, i))


def mean_projections(Q) -> list[float]:
    Q = _as_hull(Q)
    return [mean_projection(Q, i) for i in range(1, Q.dim + 1)]


def surface_area(Q) -> float:
    Q = _as_hull(Q)
    if not Q.full_dimensional:
        raise GeometryError("surface area of a lower-dimensional hull; wrap it as an outer parallel body")
    return 2.0 * intrinsic_volumes(Q)[Q.dim - 1]


def volume(Q) -> float:
    Q = _as_hull(Q)
    return float(intrinsic_volumes(Q)[Q.dim])


def hull_metrics(Q) -> HullMetrics:
    Q = _as_hull(Q)
    r, _ = inradius_hull(Q)
    R, _ = circumradius_hull(Q)
    return HullMetrics(
        inradius=r,
        circumradius=R,
        mean_projections=tuple(mean_projections(Q)),
        surface_area=surface_area(Q),
        volume=volume(Q),
    )


def af_ball_lower_bound(Q, rtol: float = 1e-9) -> list:
    """M_i(Q) >= kappa_i (vol(Q)/kappa_d)^(i/d) for i = 1..d-1.

    Holds for every convex body with equality for balls; a failure means a
    measurement bug.
    """
    Q = _as_hull(Q)
    d = Q.dim
    vol = volume(Q)
    records = []
    for i in range(1, d):
        lhs = mean_projection(Q, i)
        rhs = kappa(i) * (vol / kappa(d)) ** (i / d)
        records.append(
            compare(
                f"af_ball_lower_bound[i={i}]",
                lhs,
                rhs,
                GE,
                EXACT,
                inputs={"i": i, "d": d, "M": mean_projections(Q), "vol": vol},
                rtol=rtol,
            )
        )
    return records


def steiner_polynomial(Q, t: float) -> float:
    """vol(Q + tB) = sum_j binom(d, j) W_j t^j with W_j = (kappa_d / kappa_{d-j}) M_{d-j}, M_0 = 1."""
    Q = _as_hull(Q)
    d = Q.dim
    total = 0.0
    for j in range(d + 1):
        m = 1.0 if j == d else mean_projection(Q, d - j)
        total += math.comb(d, j) * kappa(d) / kappa(d - j) * m * t**j
    return total


def offset_polygon_area(vertices, t: float) -> float:
    """Area of a convex polygon dilated by a disk of radius t, by Green's theorem on its boundary.

    The boundary alternates shifted edges and circular arcs around the
    vertices; each piece contributes (1/2) * integral of (x dy - y dx).
    """
    v = np.asarray(vertices, dtype=float)
    if len(v) == 1:
        return math.pi * t * t
    if len(v) == 2:
        # a segment is a degenerate polygon traversed out and back
        v = np.array([v[0], v[1]])
        k = 2
    else:
        k = len(v)
        x, y = v[:, 0], v[:, 1]
        if np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)) < 0:
            v = v[::-1]
    total = 0.0
    for a in range(k):
        p, q = v[a], v[(a + 1) % k]
        e = q - p
        n = np.array([e[1], -e[0]]) / np.hypot(*e)
        p1, q1 = p + t * n, q + t * n
        total += 0.5 * (p1[0] * q1[1] - p1[1] * q1[0])
        # arc around q from this edge's normal to the next edge's normal
        r = v[(a + 2) % k]
        f = r - q
        n2 = np.array([f[1], -f[0]]) / np.hypot(*f)
        phi0 = math.atan2(n[1], n[0])
        phi1 = math.atan2(n2[1], n2[0])
        dphi = (phi1 - phi0) % (2 * math.pi)
        # integral over the arc q + t(cos, sin) of (x dy - y dx)
        s0, s1 = phi0, phi0 + dphi
        total += 0.5 * (
            t * q[0] * (math.sin(s1) - math.sin(s0))
            + t * q[1] * (math.cos(s0) - math.cos(s1))
            + t * t * dphi
        )
    return total


def _point_triangle_dist2(X: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Squared distance from points X (n,3) to one triangle (3,3)."""
    a, b, c = tri
    ab, ac = b - a, c - a
    nrm = np.cross(ab, ac)
    nn = nrm @ nrm
    ap = X - a
    # barycentric coordinates of the projection
    d00, d01, d11 = ab @ ab, ab @ ac, ac @ ac
    d20, d21 = ap @ ab, ap @ ac
    denom = d00 * d11 - d01 * d01
    v = (d11 * d20 - d01 * d21) / denom
    w = (d00 * d21 - d01 * d20) / denom
    u = 1 - v - w
    inside = (u >= 0) & (v >= 0) & (w >= 0)
    plane = (ap @ nrm) ** 2 / nn
    best = np.full(len(X), np.inf)
    for p, q in ((a, b), (b, c), (c, a)):
        e = q - p
        s = np.clip(((X - p) @ e) / (e @ e), 0, 1)
        diff = X - (p + s[:, None] * e)
        best = np.minimum(best, np.einsum("ij,ij->i", diff, diff))
    return np.where(inside, plane, best)


def _parallel_body_membership(P: Polytope, t: float, X: np.ndarray) -> np.ndarray:
    A, b = P.equations[:, :-1], P.equations[:, -1]
    excess = (X @ A.T - b).max(axis=1)
    inside = excess <= 0
    out = excess > t
    shell = ~inside & ~out
    result = inside.copy()
    if shell.any():
        Y = X[shell]
        best = np.full(len(Y), np.inf)
        for tri in P.vertices[P.simplices]:
            best = np.minimum(best, _point_triangle_dist2(Y, tri))
        result[shell] = best <= t * t
    return result


def monte_carlo_parallel_volume(P: Polytope, t: float, samples: int = 400_000, seed: int = 0):
    """Stratified estimate of vol(P + tB) in 3D; returns (value, standard error)."""
    rng = np.random.default_rng(seed)
    lo = P.vertices.min(axis=0) - t
    hi = P.vertices.max(axis=0) + t
    k = max(2, int(round((samples / 50) ** (1 / 3))))
    per = max(2, samples // k**3)
    cell = (hi - lo) / k
    grid = np.stack(np.meshgrid(*[np.arange(k)] * 3, indexing="ij"), axis=-1).reshape(-1, 3)
    box = float(np.prod(hi - lo))
    means = np.empty(len(grid))
    variances = np.empty(len(grid))
    chunk = max(1, 200_000 // per)
    for start in range(0, len(grid), chunk):
        g = grid[start : start + chunk]
        X = lo + (g[:, None, :] + rng.random((len(g), per, 3))) * cell
        hit = _parallel_body_membership(P, t, X.reshape(-1, 3)).reshape(len(g), per).astype(float)
        means[start : start + len(g)] = hit.mean(axis=1)
        variances[start : start + len(g)] = hit.var(axis=1, ddof=1) / per
    weight = box / len(grid)
    return weight * means.sum(), weight * math.sqrt(variances.sum())


def steiner_check(P, t: float, samples: int = 400_000, seed: int = 0):
    """Compare an independent volume of ``P + tB`` with the Steiner polynomial from the mean projections."""
    if not t > 0:
        raise ValueError("Steiner check needs t > 0")
    Q = _as_hull(P)
    if Q.offset != 0:
        raise ValueError("Steiner check expects a plain polytope")
    poly = Q.polytope
    predicted = steiner_polynomial(Q, t)
    if Q.dim == 2:
        if poly.affine_dim == 2:
            measured = offset_polygon_area(poly.vertices, t)
        else:
            measured = offset_polygon_area(poly.vertices[:2] if poly.affine_dim == 1 else poly.vertices[:1], t)
        return _two_sided(
            "steiner_identity_2d", measured, predicted, 1e-9 * max(1.0, predicted), EXACT,
            {"vertices": poly.vertices, "t": t},
        )
    if Q.dim == 3:
        if poly.affine_dim != 3:
            raise ValueError("3D Steiner check needs a full-dimensional polytope")
        value, se = monte_carlo_parallel_volume(poly, t, samples=samples, seed=seed)
        return _two_sided("steiner_identity_3d", value, predicted, 3 * se, CERTIFIED,
                          {"vertices": poly.vertices, "t": t, "samples": samples, "seed": seed},
                          {"standard_error": se})
    raise ValueError("Steiner check supports d = 2, 3")


def _two_sided(name, measured, predicted, tol, semantics, inputs, details=None):
    """Equality check recorded as |measured - predicted| <= tol."""
    err = abs(measured - predicted)
    return compare(name, err, tol, "<=", semantics, inputs=inputs, atol=0.0,
                   details={"measured": measured, "predicted": predicted, **(details or {})})


def random_polytope(rng, d: int, n: int = 50, kind: str = "ball") -> Polytope:
    """Hull of ``n`` random points (uniform in a ball or Gaussian)."""
    if kind == "gauss":
        pts = rng.normal(size=(n, d)) * rng.uniform(0.2, 3.0, size=d)
    else:
        g = rng.normal(size=(n, d))
        g /= np.linalg.norm(g, axis=1)[:, None]
        pts = g * rng.random(n)[:, None] ** (1 / d)
    pts += rng.normal(size=d)
    return convex_hull(pts)
