"""Convex bodies, packings and hull primitives.

Bodies are o-symmetric and stored by vertices (or a radius for balls).
Hulls are represented as ``P + s*B`` where ``P`` is a polytope that may be
lower dimensional and ``s >= 0`` is the radius of a Euclidean ball summand.
This covers both the hull of a polygonal packing (``s = 0``) and the hull of
a ball packing (``P`` = hull of the centers, ``s`` = ball radius) without any
polygonal approximation of round boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull
from scipy.special import gamma

DEFAULT_RTOL = 1e-9

BALL = "ball"
POLYGON2 = "polygon2"
POLYTOPE3 = "polytope3"


class GeometryError(ValueError):
    pass


class InvalidDirectionError(GeometryError):
    pass


class DegenerateHullError(GeometryError):
    """Raised when the input points span less than the ambient dimension."""

    def __init__(self, affine_dim, dim):
        super().__init__(f"points span an affine subspace of dimension {affine_dim} < {dim}")
        self.affine_dim = affine_dim
        self.dim = dim


def kappa(n: int) -> float:
    """Volume of the n-dimensional unit ball (kappa_0 = 1)."""
    return math.pi ** (n / 2) / gamma(n / 2 + 1)


def _facets(hull: ConvexHull) -> tuple[np.ndarray, np.ndarray]:
    """Unit outward normals and offsets ``a.x <= b`` with coplanar facets merged."""
    eq = hull.equations
    normals = eq[:, :-1]
    offsets = -eq[:, -1]
    key = np.round(np.hstack([normals, offsets[:, None]]), 10)
    _, first = np.unique(key, axis=0, return_index=True)
    first = np.sort(first)
    return normals[first].copy(), offsets[first].copy()


@dataclass(frozen=True, eq=False)
class Body:
    """An o-symmetric convex body: a ball, a symmetric polygon or a symmetric 3-polytope."""

    kind: str
    dim: int
    radius: float | None = None
    vertices: np.ndarray | None = None
    normals: np.ndarray | None = field(default=None, repr=False)
    offsets: np.ndarray | None = field(default=None, repr=False)
    _volume: float = field(default=0.0, repr=False)

    @classmethod
    def ball(cls, radius: float = 1.0, dim: int = 2) -> "Body":
        if not radius > 0:
            raise GeometryError("ball radius must be positive")
        if dim < 1:
            raise GeometryError("dimension must be positive")
        return cls(BALL, dim, radius=float(radius), _volume=kappa(dim) * radius**dim)

    @classmethod
    def polygon(cls, vertices) -> "Body":
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 4:
            raise GeometryError("a symmetric polygon needs at least 4 planar vertices")
        try:
            hull = ConvexHull(v)
        except Exception as exc:
            raise GeometryError(f"polygon vertices are degenerate: {exc}") from exc
        if len(hull.vertices) != len(v):
            raise GeometryError("polygon vertices must be in strictly convex position")
        ordered = v[hull.vertices]  # qhull gives counterclockwise order in 2D
        angles = np.mod(np.arctan2(ordered[:, 1], ordered[:, 0]), 2 * math.pi)
        ordered = np.roll(ordered, -int(np.argmin(angles)), axis=0)
        _check_symmetric(ordered)
        normals, offsets = _facets(hull)
        if offsets.min() <= 0:
            raise GeometryError("origin must be an interior point")
        return cls(POLYGON2, 2, vertices=ordered, normals=normals, offsets=offsets, _volume=hull.volume)

    @classmethod
    def polytope(cls, vertices) -> "Body":
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3 or len(v) < 6:
            raise GeometryError("a symmetric 3-polytope needs at least 6 vertices in R^3")
        try:
            hull = ConvexHull(v)
        except Exception as exc:
            raise GeometryError(f"polytope vertices are degenerate: {exc}") from exc
        if len(hull.vertices) != len(v):
            raise GeometryError("polytope vertices must all be extreme points")
        ordered = v[np.lexsort(v.T[::-1])]
        _check_symmetric(ordered)
        normals, offsets = _facets(hull)
        if offsets.min() <= 0:
            raise GeometryError("origin must be an interior point")
        return cls(POLYTOPE3, 3, vertices=ordered, normals=normals, offsets=offsets, _volume=hull.volume)

    @classmethod
    def square(cls, half_width: float = 1.0) -> "Body":
        h = float(half_width)
        return cls.polygon([(h, h), (-h, h), (-h, -h), (h, -h)])

    @classmethod
    def regular_polygon(cls, k: int, circumradius: float = 1.0, phase: float = 0.0) -> "Body":
        if k < 4 or k % 2:
            raise GeometryError("a centrally symmetric regular polygon needs an even k >= 4")
        t = phase + 2 * math.pi * np.arange(k) / k
        return cls.polygon(circumradius * np.column_stack([np.cos(t), np.sin(t)]))

    @classmethod
    def cube(cls, half_width: float = 1.0) -> "Body":
        h = float(half_width)
        pts = [(x, y, z) for x in (-h, h) for y in (-h, h) for z in (-h, h)]
        return cls.polytope(pts)

    @classmethod
    def octahedron(cls, radius: float = 1.0) -> "Body":
        r = float(radius)
        pts = [(r, 0, 0), (-r, 0, 0), (0, r, 0), (0, -r, 0), (0, 0, r), (0, 0, -r)]
        return cls.polytope(pts)

    @property
    def is_ball(self) -> bool:
        return self.kind == BALL

    @property
    def volume(self) -> float:
        return self._volume

    def support(self, u) -> np.ndarray | float:
        return support(self, u)

    def gauge(self, x) -> np.ndarray | float:
        return norm_c(x, self)

    def radii(self) -> tuple[float, float]:
        return body_radii(self)

    def as_hull(self) -> "Hull":
        if self.is_ball:
            return Hull(convex_hull(np.zeros((1, self.dim)), allow_degenerate=True), self.radius)
        return Hull(convex_hull(self.vertices), 0.0)

    def to_dict(self) -> dict:
        if self.is_ball:
            return {"kind": BALL, "dimension": self.dim, "radius": self.radius}
        return {"kind": self.kind, "dimension": self.dim, "vertices": self.vertices.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Body":
        kind = data.get("kind")
        if kind == BALL:
            return cls.ball(float(data["radius"]), int(data.get("dimension", 2)))
        if kind == POLYGON2:
            return cls.polygon(data["vertices"])
        if kind == POLYTOPE3:
            return cls.polytope(data["vertices"])
        raise GeometryError(f"unknown body kind {kind!r}")


def _check_symmetric(vertices: np.ndarray, tol: float = 1e-12) -> None:
    scale = 2 * np.linalg.norm(vertices, axis=1).max()
    for v in vertices:
        if np.linalg.norm(vertices + v, axis=1).min() > tol * scale:
            raise GeometryError(f"body is not o-symmetric: no vertex matches {-v}")


def support(body: Body, u) -> np.ndarray | float:
    """Support function h_C(u) = max{x.u : x in C}; accepts one direction or a stack."""
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    U = np.atleast_2d(u)
    lengths = np.linalg.norm(U, axis=1)
    if np.any(lengths == 0):
        raise InvalidDirectionError("support function needs a nonzero direction")
    if body.is_ball:
        h = body.radius * lengths
    else:
        h = (U @ body.vertices.T).max(axis=1)
    return float(h[0]) if single else h


def norm_c(x, body: Body) -> np.ndarray | float:
    """Gauge ||x||_C = inf{lam : x in lam*C}; vectorized over rows of ``x``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if body.is_ball:
        g = np.linalg.norm(X, axis=1) / body.radius
    else:
        # the boundary ray hits the facet maximizing a.x / b
        g = np.maximum((X @ body.normals.T / body.offsets).max(axis=1), 0.0)
    return float(g[0]) if single else g


def body_radii(body: Body) -> tuple[float, float]:
    """(inradius, circumradius); both balls are centered at o by symmetry."""
    if body.is_ball:
        return body.radius, body.radius
    return float(body.offsets.min()), float(np.linalg.norm(body.vertices, axis=1).max())


@dataclass(frozen=True, eq=False)
class Hyperplane:
    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise GeometryError("hyperplane normal must have unit length")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def through(cls, direction, offset) -> "Hyperplane":
        d = np.asarray(direction, dtype=float)
        length = np.linalg.norm(d)
        return cls(d / length, offset / length)


@dataclass(frozen=True, eq=False)
class Packing:
    """Translates ``c_i + C`` of one body, with the separability parameter rho."""

    body: Body
    rho: float
    centers: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float).reshape(-1, self.body.dim)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "rho", float(self.rho))
        if not self.rho >= 1:
            raise GeometryError("rho must be at least 1")

    @property
    def n(self) -> int:
        return len(self.centers)

    @property
    def dim(self) -> int:
        return self.body.dim

    def scale(self) -> float:
        return instance_scale(self.body, self.centers)

    def with_centers(self, centers) -> "Packing":
        return Packing(self.body, self.rho, centers)

    def with_rho(self, rho: float) -> "Packing":
        return Packing(self.body, rho, self.centers)

    def subset(self, indices) -> "Packing":
        return Packing(self.body, self.rho, self.centers[list(indices)])


def instance_scale(body: Body, centers) -> float:
    c = np.asarray(centers, dtype=float)
    far = float(np.linalg.norm(c, axis=1).max()) if len(c) else 0.0
    return max(body_radii(body)[1], far)


# --------------------------------------------------------------------------- hulls


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex hull of a point set, possibly lower dimensional.

    ``vertices`` are counterclockwise for full-dimensional planar hulls.
    ``equations`` holds unit outward facet normals and offsets as rows
    ``[a, b]`` meaning ``a.x <= b``; only present for full-dimensional hulls.
    """

    vertices: np.ndarray
    dim: int
    affine_dim: int
    equations: np.ndarray | None = None
    simplices: np.ndarray | None = None
    intrinsic: tuple = ()

    def contains(self, x, rtol: float = DEFAULT_RTOL) -> np.ndarray:
        X = np.atleast_2d(np.asarray(x, dtype=float))
        if self.equations is None:
            raise DegenerateHullError(self.affine_dim, self.dim)
        tol = rtol * max(1.0, float(np.abs(self.vertices).max()))
        return (X @ self.equations[:, :-1].T - self.equations[:, -1] <= tol).all(axis=1)


@dataclass(frozen=True, eq=False)
class Hull:
    """The outer parallel body ``polytope + offset * B^d``."""

    polytope: Polytope
    offset: float = 0.0

    @property
    def dim(self) -> int:
        return self.polytope.dim

    @property
    def full_dimensional(self) -> bool:
        return self.offset > 0 or self.polytope.affine_dim == self.dim


def _affine_frame(pts: np.ndarray, rtol: float):
    centroid = pts.mean(axis=0)
    X = pts - centroid
    extent = float(np.linalg.norm(X, axis=1).max()) if len(X) else 0.0
    if extent == 0.0:
        return centroid, np.zeros((0, pts.shape[1]))
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    rank = int(np.sum(s / math.sqrt(len(X)) > rtol * extent))
    return centroid, vt[:rank]


def _edge_length_angle_sum(points: np.ndarray, hull: ConvexHull) -> float:
    """Sum over hull edges of length times exterior dihedral angle (3D)."""
    normals = hull.equations[:, :-1]
    total = 0.0
    for t, simplex in enumerate(hull.simplices):
        for k in range(3):
            nb = hull.neighbors[t, k]
            if nb < t:
                continue
            # the edge opposite vertex k is shared with neighbor nb
            a, b = simplex[(k + 1) % 3], simplex[(k + 2) % 3]
            cosang = float(np.clip(normals[t] @ normals[nb], -1.0, 1.0))
            total += np.linalg.norm(points[a] - points[b]) * math.acos(cosang)
    return total


def _polygon_area_perimeter(v: np.ndarray) -> tuple[float, float]:
    x, y = v[:, 0], v[:, 1]
    area = 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    perim = float(np.linalg.norm(v - np.roll(v, -1, axis=0), axis=1).sum())
    return abs(area), perim


def convex_hull(points, allow_degenerate: bool = False, rtol: float = DEFAULT_RTOL) -> Polytope:
    """Convex hull with intrinsic volumes attached.

    Raises DegenerateHullError for affinely degenerate input unless
    ``allow_degenerate`` is set, in which case the hull is computed inside
    the affine span of the points.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise GeometryError("convex hull of an empty point set")
    d = pts.shape[1]
    centroid, basis = _affine_frame(pts, rtol)
    m = len(basis)
    if m < d and not allow_degenerate:
        raise DegenerateHullError(m, d)
    intrinsic = [0.0] * (d + 1)
    intrinsic[0] = 1.0

    if m == d:
        hull = ConvexHull(pts)
        if d == 2:
            verts = pts[hull.vertices]
            area, perim = _polygon_area_perimeter(verts)
            intrinsic[1], intrinsic[2] = perim / 2, area
            eq = _facet_rows(hull)
            return Polytope(verts, d, d, eq, None, tuple(intrinsic))
        if d == 3:
            idx = np.unique(hull.simplices)
            remap = np.full(len(pts), -1)
            remap[idx] = np.arange(len(idx))
            verts = pts[idx]
            intrinsic[1] = _edge_length_angle_sum(pts, hull) / (2 * math.pi)
            intrinsic[2] = hull.area / 2
            intrinsic[3] = hull.volume
            return Polytope(verts, d, d, _facet_rows(hull), remap[hull.simplices], tuple(intrinsic))
        verts = pts[hull.vertices]
        intrinsic[d] = hull.volume
        return Polytope(verts, d, d, _facet_rows(hull), None, tuple(intrinsic))

    # lower dimensional: work in the affine span
    local = (pts - centroid) @ basis.T
    if m == 0:
        verts = pts[:1].copy()
    elif m == 1:
        lo, hi = int(np.argmin(local[:, 0])), int(np.argmax(local[:, 0]))
        verts = pts[[lo, hi]]
        intrinsic[1] = float(local[hi, 0] - local[lo, 0])
    elif m == 2:
        hull = ConvexHull(local)
        verts = pts[hull.vertices]
        area, perim = _polygon_area_perimeter(local[hull.vertices])
        intrinsic[1], intrinsic[2] = perim / 2, area
    else:
        raise GeometryError("affine dimension above 2 inside a degenerate hull is unsupported")
    return Polytope(verts, d, m, None, None, tuple(intrinsic))


def _facet_rows(hull: ConvexHull) -> np.ndarray:
    normals, offsets = _facets(hull)
    return np.hstack([normals, offsets[:, None]])


def hull_of_packing(packing: Packing) -> Hull:
    """conv of the union of the translates ``c_i + C``."""
    body = packing.body
    if packing.n == 0:
        raise GeometryError("hull of an empty packing")
    if body.is_ball:
        return Hull(convex_hull(packing.centers, allow_degenerate=True), body.radius)
    pts = (packing.centers[:, None, :] + body.vertices[None, :, :]).reshape(-1, body.dim)
    return Hull(convex_hull(pts), 0.0)


# ------------------------------------------------------------ enclosing balls


def _circumball(basis: np.ndarray) -> tuple[np.ndarray, float]:
    """Smallest ball with all basis points on its boundary."""
    p0 = basis[0]
    if len(basis) == 1:
        return p0.copy(), 0.0
    A = basis[1:] - p0
    G = A @ A.T
    rhs = 0.5 * np.diag(G)
    lam = np.linalg.lstsq(G, rhs, rcond=None)[0]
    c = p0 + A.T @ lam
    return c, float(np.max(np.sum((basis - c) ** 2, axis=1)))


def min_enclosing_ball(points, seed: int = 0) -> tuple[np.ndarray, float]:
    """Welzl's randomized incremental minimum enclosing ball (move-to-front variant).

    Returns ``(center, radius)``. The permutation is drawn from a fixed seed so
    results are reproducible.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = pts.shape
    if n == 0:
        raise GeometryError("enclosing ball of an empty set")
    order = list(np.random.default_rng(seed).permutation(n))
    scale = max(1.0, float(np.abs(pts).max()))
    eps = 1e-12 * scale * scale

    def mtf(end, boundary):
        if boundary:
            c, r2 = _circumball(pts[boundary])
        else:
            c, r2 = pts[order[0]].copy(), -1.0
        if len(boundary) == d + 1:
            return c, r2
        i = 0
        while i < end:
            k = order[i]
            if np.sum((pts[k] - c) ** 2) > r2 + eps:
                c, r2 = mtf(i, boundary + [k])
                order.insert(0, order.pop(i))
            i += 1
        return c, r2

    c, r2 = mtf(n, [])
    return c, math.sqrt(max(r2, 0.0))


def circumradius_hull(Q: Hull) -> tuple[float, np.ndarray]:
    c, r = min_enclosing_ball(Q.polytope.vertices)
    return r + Q.offset, c


def chebyshev_center(equations: np.ndarray) -> tuple[np.ndarray, float]:
    """Largest ball inside ``{x : a.x <= b}`` for unit rows ``a``; LP then active-set polish."""
    A = equations[:, :-1]
    b = equations[:, -1]
    m, d = A.shape
    norms = np.linalg.norm(A, axis=1)
    cost = np.zeros(d + 1)
    cost[-1] = -1.0
    res = linprog(
        cost,
        A_ub=np.hstack([A, norms[:, None]]),
        b_ub=b,
        bounds=[(None, None)] * d + [(0, None)],
        method="highs",
    )
    if res.status == 3:
        raise GeometryError("inscribed ball problem is unbounded")
    if not res.success:
        raise GeometryError(f"inscribed ball LP failed: {res.message}")
    x, t = res.x[:d], res.x[-1]
    scale = max(1.0, float(np.abs(b).max()))
    slack = b - A @ x - t * norms
    active = np.argsort(slack)[: d + 1]
    if np.all(slack[active] < 1e-6 * scale):
        M = np.hstack([A[active], norms[active, None]])
        sol = np.linalg.lstsq(M, b[active], rcond=None)[0]
        if np.all(b - A @ sol[:d] - sol[-1] * norms >= -1e-12 * scale) and sol[-1] >= t - 1e-7 * scale:
            x, t = sol[:d], sol[-1]
    return x, float(t)


def inradius_hull(Q: Hull) -> tuple[float, np.ndarray]:
    P = Q.polytope
    if P.affine_dim < P.dim:
        return Q.offset, P.vertices.mean(axis=0)
    x, t = chebyshev_center(P.equations)
    return t + Q.offset, x


@dataclass(frozen=True)
class HullMetrics:
    inradius: float
    circumradius: float
    mean_projections: tuple
    surface_area: float
    volume: float

    def to_dict(self) -> dict:
        return {
            "inradius": self.inradius,
            "circumradius": self.circumradius,
            "mean_projections": list(self.mean_projections),
            "surface_area": self.surface_area,
            "volume": self.volume,
        }
