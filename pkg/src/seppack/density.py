"""Density bounds, union volumes and periodic density certificates.

The largest density of rho-separable packings is never computed here, only
bracketed: every estimate is an interval with a provenance tag.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gamma

from .geometry import BALL, POLYGON2, POLYTOPE3, Body, GeometryError, Packing, body_radii, norm_c
from .separability import check_packing, rho_subpacking, totally_separable

REFERENCE = "reference"
PSZ_BOUND = "psz-bound"
TRIVIAL_UPPER = "trivial-upper"
CERTIFIED_CONSTRUCTION = "certified-construction"


class UnsupportedMethodError(ValueError):
    pass


class InsufficientUnfoldingError(ValueError):
    pass


@dataclass(frozen=True)
class DensityEstimate:
    lower: float
    upper: float
    source: str

    def __post_init__(self):
        if not (0 < self.lower <= self.upper <= 1 + 1e-12):
            raise ValueError(f"invalid density interval [{self.lower}, {self.upper}]")


@dataclass(frozen=True)
class ObservationWindow:
    """The cube of edge length 2*half_width centered at the origin."""

    half_width: float
    dimension: int

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("window half-width must be positive")

    @property
    def half_widths(self) -> tuple:
        return (self.half_width,) * self.dimension

    @property
    def volume(self) -> float:
        return (2 * self.half_width) ** self.dimension


@dataclass(frozen=True)
class PeriodicCell:
    """Axis-parallel box ``prod [-w_k, w_k)`` used as a torus."""

    half_widths: tuple

    def __post_init__(self):
        if any(not w > 0 for w in self.half_widths):
            raise ValueError("cell half-widths must be positive")

    @property
    def dimension(self) -> int:
        return len(self.half_widths)

    @property
    def volume(self) -> float:
        return float(np.prod([2 * w for w in self.half_widths]))


@lru_cache(maxsize=1)
def density_table() -> dict:
    text = resources.files("seppack").joinpath("data/densities.json").read_text()
    return json.loads(text)


def body_family(body: Body) -> str | None:
    """Registered family of a body, if any."""
    if body.kind == BALL:
        return {2: "disk", 3: "ball"}.get(body.dim)
    if body.kind == POLYGON2 and len(body.vertices) == 4:
        return "parallelogram"  # every o-symmetric quadrilateral
    if body.kind == POLYTOPE3 and len(body.vertices) == 8 and len(body.normals) == 6:
        return "parallelepiped"
    return None


def psz_density_bound(d: int) -> float:
    """Universal lower bound on the rho-separable packing density in dimension d."""
    if d < 2:
        raise ValueError("dimension must be at least 2")
    recip = 2 ** (1.5 * d) * math.sqrt(math.comb(d * (d + 1) // 2, d)) / (
        (d + 1) ** (d / 2) * math.pi ** (d / 2) * gamma(d / 2 + 1)
    )
    return 1.0 / recip


def reference_density(body: Body, rho: float) -> DensityEstimate:
    family = body_family(body)
    if family is not None:
        for entry in density_table()["entries"]:
            if entry["body"] != family or entry["dimension"] != body.dim:
                continue
            hi = entry["rho_max"]
            if entry["rho_min"] <= rho and (hi is None or rho < hi):
                return DensityEstimate(entry["lower"], entry["upper"], entry["source"])
    return DensityEstimate(psz_density_bound(body.dim), 1.0, PSZ_BOUND)


# ---------------------------------------------------------------- union volume


def _clip(poly: list, a: np.ndarray, b: float) -> list:
    """Sutherland-Hodgman clip of a convex polygon against ``a.x <= b``."""
    out = []
    k = len(poly)
    for idx in range(k):
        p, q = poly[idx], poly[(idx + 1) % k]
        fp, fq = a @ p - b, a @ q - b
        if fp <= 0:
            out.append(p)
        if (fp < 0 < fq) or (fq < 0 < fp):
            t = fp / (fp - fq)
            out.append(p + t * (q - p))
    return out


def _segment_circle_area(p: np.ndarray, q: np.ndarray, r: float) -> float:
    """Signed area of the disk (radius r at o) intersected with triangle (o, p, q)."""
    d = q - p
    A = d @ d
    if A == 0:
        return 0.0
    B = p @ d
    Cc = p @ p - r * r
    disc = B * B - A * Cc
    ts = [0.0]
    if disc > 0:
        s = math.sqrt(disc)
        for t in ((-B - s) / A, (-B + s) / A):
            if 0 < t < 1:
                ts.append(t)
    ts.append(1.0)
    total = 0.0
    for t0, t1 in zip(ts[:-1], ts[1:]):
        a, b = p + t0 * d, p + t1 * d
        mid = p + 0.5 * (t0 + t1) * d
        cross = a[0] * b[1] - a[1] * b[0]
        # strict test: a segment tangent to the circle stays outside
        if mid @ mid < r * r * (1 - 1e-12):
            total += 0.5 * cross
        else:
            total += 0.5 * r * r * math.atan2(cross, a @ b)
    return total


def disk_polygon_area(center, r: float, poly) -> float:
    """Area of a disk intersected with a convex polygon."""
    if len(poly) < 3:
        return 0.0
    c = np.asarray(center, dtype=float)
    pts = [np.asarray(p, dtype=float) - c for p in poly]
    total = sum(_segment_circle_area(pts[k], pts[(k + 1) % len(pts)], r) for k in range(len(pts)))
    return abs(total)


def union_of_disks_area(centers, radii) -> float:
    """Exact area of a union of disks via power-diagram cells."""
    C = np.asarray(centers, dtype=float)
    r = np.broadcast_to(np.asarray(radii, dtype=float), (len(C),))
    tree = cKDTree(C)
    rmax = float(r.max())
    total = 0.0
    for i in range(len(C)):
        ci, ri = C[i], r[i]
        cell = [ci + np.array(s) * ri for s in ((-1, -1), (1, -1), (1, 1), (-1, 1))]
        for j in tree.query_ball_point(ci, ri + rmax):
            if j == i:
                continue
            cj, rj = C[j], r[j]
            dist2 = float((cj - ci) @ (cj - ci))
            if dist2 == 0:
                if rj > ri or (rj == ri and j < i):
                    cell = []
                    break
                continue
            if math.sqrt(dist2) >= ri + rj:
                continue
            a = 2 * (cj - ci)
            b = cj @ cj - ci @ ci - rj * rj + ri * ri
            cell = _clip(cell, a, b)
            if len(cell) < 3:
                break
        total += disk_polygon_area(ci, ri, cell)
    return total


def _stratified_union(packing: Packing, inflation: float, samples: int, seed: int):
    body = packing.body
    d = body.dim
    C = packing.centers
    reach = inflation * body_radii(body)[1]
    lo = C.min(axis=0) - reach
    hi = C.max(axis=0) + reach
    k = 100 if d == 2 else max(2, int(round((samples / 10) ** (1 / d))))
    per = max(2, samples // k**d)
    cell = (hi - lo) / k
    grid = np.stack(np.meshgrid(*[np.arange(k)] * d, indexing="ij"), axis=-1).reshape(-1, d)
    rng = np.random.default_rng(seed)
    tree = cKDTree(C) if body.is_ball else None
    means = np.empty(len(grid))
    var = np.empty(len(grid))
    chunk = max(1, 100_000 // per)
    for start in range(0, len(grid), chunk):
        g = grid[start : start + chunk]
        X = (lo + (g[:, None, :] + rng.random((len(g), per, d))) * cell).reshape(-1, d)
        if tree is not None:
            dist, _ = tree.query(X)
            hit = dist <= inflation * body.radius
        else:
            hit = np.zeros(len(X), dtype=bool)
            for c in C:
                hit |= norm_c(X - c, body) <= inflation
        hit = hit.reshape(len(g), per).astype(float)
        means[start : start + len(g)] = hit.mean(axis=1)
        var[start : start + len(g)] = hit.var(axis=1, ddof=1) / per
    w = float(np.prod(cell))
    return w * means.sum(), 3 * w * math.sqrt(var.sum())


def union_volume(
    packing: Packing,
    inflation: float,
    method: str = "exact-disk",
    samples: int = 1_000_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Volume of ``union_i (c_i + inflation * C)`` and an error half-width.

    ``exact-disk`` is exact up to rounding (error reported as 0);
    ``monte-carlo`` reports a 3-sigma half-width.
    """
    if not inflation > 0:
        raise ValueError("inflation must be positive")
    if packing.n == 0:
        return 0.0, 0.0
    if method == "exact-disk":
        if not (packing.body.is_ball and packing.dim == 2):
            raise UnsupportedMethodError("exact-disk union needs a disk body in the plane")
        return union_of_disks_area(packing.centers, inflation * packing.body.radius), 0.0
    if method == "monte-carlo":
        return _stratified_union(packing, inflation, samples, seed)
    raise UnsupportedMethodError(f"unknown union method {method!r}")


# ---------------------------------------------------------- periodic packings


def unfold(cell, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3^d periodic copies of the centers; returns (points, index of the original)."""
    w = np.asarray(cell.half_widths, dtype=float)
    d = len(w)
    shifts = np.array(list(itertools.product((-1, 0, 1), repeat=d)), dtype=float) * 2 * w
    # the zero shift first so that original indices are preserved
    order = np.argsort(np.abs(shifts).sum(axis=1), kind="stable")
    shifts = shifts[order]
    pts = (shifts[:, None, :] + centers[None, :, :]).reshape(-1, d)
    origin = np.tile(np.arange(len(centers)), len(shifts))
    return pts, origin


def torus_density(cell, packing: Packing, rtol: float = 1e-9) -> DensityEstimate:
    """Certified lower bound on the rho-separable density from a periodic packing.

    ``packing.centers`` lie in the cell and are repeated with the cell's
    periods. Validity and rho-separability are checked on the 3^d unfolding.
    """
    if packing.n == 0:
        raise ValueError("empty periodic packing certifies nothing")
    body = packing.body
    w = np.asarray(cell.half_widths, dtype=float)
    if len(w) != body.dim:
        raise ValueError("cell and body dimensions differ")
    if np.any(np.abs(packing.centers) > w * (1 + rtol)):
        raise ValueError("centers must lie inside the periodic cell")
    reach = packing.rho * body_radii(body)[1]
    if np.any(w <= reach):
        raise InsufficientUnfoldingError(
            f"cell half-widths {w.tolist()} must exceed rho*R(C) = {reach} for a 3^d unfolding"
        )
    pts, _ = unfold(cell, packing.centers)
    big = Packing(body, packing.rho, pts)
    report = check_packing(big, rtol)
    if not report.ok:
        raise GeometryError(f"periodic packing overlaps: {report.violations[:3]}")
    if packing.rho >= 3:
        seen = set()
        for i in range(packing.n):
            sub = rho_subpacking(big, i, rtol)
            key = frozenset(sub)
            if len(sub) < 2 or key in seen:
                continue
            seen.add(key)
            res = totally_separable(big, sub, rtol=rtol, certificates=False)
            if not res.separable:
                raise GeometryError(f"periodic packing is not rho-separable at center {i}: {res.failing_pair}")
    lower = packing.n * body.volume / cell.volume
    upper = reference_density(body, packing.rho).upper
    return DensityEstimate(lower, max(lower, upper), CERTIFIED_CONSTRUCTION)


def hexagonal_cell(reps: tuple = (3, 2), radius: float = 1.0):
    """Hexagonal disk lattice repeated ``reps`` times over its rectangular 2-disk cell."""
    a = 2 * radius
    wx, wy = a / 2, a * math.sqrt(3) / 2
    base = np.array([[0.0, 0.0], [a / 2, a * math.sqrt(3) / 2]])
    nx, ny = reps
    pts = [base + [2 * wx * i, 2 * wy * j] for i in range(nx) for j in range(ny)]
    pts = np.vstack(pts)
    cell = PeriodicCell((nx * wx, ny * wy))
    pts = pts - [nx * wx - 0.5 * wx, ny * wy - 0.5 * wy]
    return cell, pts


def square_cell(k: int, spacing: float = 2.0, dim: int = 2):
    """``k^dim`` centers of a square (cubic) lattice filling one periodic cell."""
    coords = (np.arange(k) - (k - 1) / 2) * spacing
    pts = np.array(list(itertools.product(coords, repeat=dim)), dtype=float)
    return PeriodicCell((k * spacing / 2,) * dim), pts
