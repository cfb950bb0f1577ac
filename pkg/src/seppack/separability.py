"""Total separability and rho-separability of translative packings.

For a unit direction ``u`` every translate ``c_k + C`` projects to the
interval ``[c_k.u - h(u), c_k.u + h(u)]``. All intervals have the same
length, so after sorting by ``c_k.u`` the elements split into blocks wherever
two consecutive projections differ by at least ``2h(u)``. A hyperplane with
normal ``u`` avoiding every open interior exists between two elements exactly
when they fall in different blocks.

In the plane the block structure only changes at finitely many critical
directions, where two interval endpoints coincide. Enumerating those
directions and the midpoints of the arcs between them decides separability
exactly. In space a branch over side assignments with one convex program per
node is used instead (a linear program for polytopes, a second-order cone
program for balls).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import cKDTree

from .geometry import DEFAULT_RTOL, Body, GeometryError, Hyperplane, Packing, body_radii, instance_scale, norm_c, support

BELOW = "below"
ABOVE = "above"

DEFAULT_CAP_3D = 14
LP_RTOL = 1e-7


class CapacityError(RuntimeError):
    """A 3D sub-packing is too large for the exact side-assignment search."""


@dataclass(frozen=True, eq=False)
class SeparationCertificate:
    pair: tuple
    plane: Hyperplane
    side_assignment: dict

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "normal": self.plane.normal.tolist(),
            "offset": self.plane.offset,
            "side_assignment": {str(k): v for k, v in sorted(self.side_assignment.items())},
        }


@dataclass
class OverlapReport:
    ok: bool
    violations: list = field(default_factory=list)  # (i, j, gauge distance)


@dataclass
class SeparabilityResult:
    separable: bool
    certificates: list = field(default_factory=list)
    failing_pair: tuple | None = None
    heuristic: bool = False


@dataclass
class RhoResult:
    separable: bool
    witness: tuple | None = None  # (i, (j, k)) on failure
    checked: int = 0
    fast_path: bool = False
    heuristic: bool = False


def _tolerance(body: Body, centers: np.ndarray, rtol: float) -> float:
    return rtol * instance_scale(body, centers)


def check_packing(packing: Packing, rtol: float = DEFAULT_RTOL) -> OverlapReport:
    """All pairs with ``||c_j - c_k||_C < 2`` (beyond tolerance), including duplicates."""
    C = packing.centers
    if packing.n < 2:
        return OverlapReport(True)
    tol = 2 * rtol * max(1.0, packing.scale() / body_radii(packing.body)[1])
    R = body_radii(packing.body)[1]
    pairs = np.array(sorted(cKDTree(C).query_pairs(2 * R * (1 + rtol) + 1e-12)), dtype=int).reshape(-1, 2)
    violations = []
    if len(pairs):
        g = norm_c(C[pairs[:, 1]] - C[pairs[:, 0]], packing.body)
        bad = g < 2 - tol
        for (i, j), value in zip(pairs[bad], g[bad]):
            violations.append((int(i), int(j), float(value)))
    violations.sort()
    return OverlapReport(not violations, violations)


def rho_subpacking(packing: Packing, i: int, rtol: float = DEFAULT_RTOL) -> list[int]:
    """Indices j with ``c_j + C`` inside ``c_i + rho C``, i.e. gauge distance at most rho - 1."""
    g = norm_c(packing.centers - packing.centers[i], packing.body)
    limit = packing.rho - 1 + rtol * packing.rho
    idx = np.flatnonzero(g <= limit).tolist()
    if i not in idx:
        idx.append(i)
        idx.sort()
    return idx


# ------------------------------------------------------------ block structure


def component_labels(proj: np.ndarray, h: np.ndarray, tol: float) -> np.ndarray:
    """Block labels of the projected intervals.

    ``proj`` has shape (D, m) (center projections per direction) and ``h``
    shape (D,) (support values). Labels increase with the projection.
    """
    order = np.argsort(proj, axis=1, kind="stable")
    s = np.take_along_axis(proj, order, axis=1)
    breaks = np.diff(s, axis=1) >= (2 * h)[:, None] - tol
    lab_sorted = np.concatenate([np.zeros((len(s), 1), dtype=np.int32), np.cumsum(breaks, axis=1, dtype=np.int32)], axis=1)
    labels = np.empty_like(lab_sorted)
    np.put_along_axis(labels, order, lab_sorted, axis=1)
    return labels


def pair_coverage(
    body: Body,
    centers: np.ndarray,
    directions: np.ndarray,
    pairs: np.ndarray,
    tol: float,
    chunk: int = 2048,
) -> np.ndarray:
    """For each pair, the index of the first direction separating it (or -1)."""
    first = np.full(len(pairs), -1, dtype=np.int64)
    if len(pairs) == 0 or len(directions) == 0:
        return first
    I, J = pairs[:, 0], pairs[:, 1]
    budget = max(1, 4_000_000 // max(1, len(pairs)))
    step = max(1, min(chunk, budget))
    for start in range(0, len(directions), step):
        U = directions[start : start + step]
        proj = U @ centers.T
        labels = component_labels(proj, support(body, U), tol)
        open_ = first < 0
        if not open_.any():
            break
        sep = labels[:, I[open_]] != labels[:, J[open_]]
        hit = sep.any(axis=0)
        idx = np.flatnonzero(open_)
        first[idx[hit]] = start + np.argmax(sep[:, hit], axis=0)
    return first


def certificate_from_direction(
    body: Body,
    centers: np.ndarray,
    obstacle_ids,
    i_local: int,
    j_local: int,
    u: np.ndarray,
    tol: float,
) -> SeparationCertificate | None:
    """Place a hyperplane with normal +-u between blocks of ``i`` and ``j``.

    Indices are local (rows of ``centers``); the certificate stores global
    ids from ``obstacle_ids``.
    """
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    a = centers @ u
    if a[i_local] > a[j_local]:
        u, a = -u, -a
    h = support(body, u)
    labels = component_labels(a[None, :], np.array([h]), tol)[0]
    li, lj = labels[i_local], labels[j_local]
    if li == lj:
        return None
    top = a[labels == li].max()
    nxt = a[labels == li + 1].min()
    b = 0.5 * (top + nxt)
    sides = {int(obstacle_ids[k]): (BELOW if a[k] < b else ABOVE) for k in range(len(a))}
    return SeparationCertificate((int(obstacle_ids[i_local]), int(obstacle_ids[j_local])), Hyperplane(u, b), sides)


def critical_angles_2d(body: Body, centers: np.ndarray) -> np.ndarray:
    """Sorted angles in [0, pi) where two projected interval endpoints coincide."""
    m = len(centers)
    parts = []
    if m >= 2:
        I, J = np.triu_indices(m, 1)
        D = centers[J] - centers[I]
        alpha = np.arctan2(D[:, 1], D[:, 0])
        parts.append(alpha + math.pi / 2)  # equal-sign endpoints: u perpendicular to the difference
        if body.is_ball:
            dist = np.linalg.norm(D, axis=1)
            beta = np.arccos(np.clip(2 * body.radius / np.maximum(dist, 1e-300), -1.0, 1.0))
            parts += [alpha + beta, alpha - beta]
        else:
            for v in body.vertices:
                W = D - 2 * v
                parts.append(np.arctan2(W[:, 1], W[:, 0]) + math.pi / 2)
    if not body.is_ball:
        # breakpoints of the support function
        parts.append(np.arctan2(body.normals[:, 1], body.normals[:, 0]))
    parts.append(np.zeros(1))
    ang = np.mod(np.concatenate(parts), math.pi)
    ang = np.unique(np.round(ang, 13))
    ang = ang[ang < math.pi]
    return ang


def sweep_directions_2d(body: Body, centers: np.ndarray) -> np.ndarray:
    """Critical directions interleaved with arc midpoints, in angular order from +x."""
    ang = critical_angles_2d(body, centers)
    nxt = np.append(ang[1:], ang[0] + math.pi)
    mids = 0.5 * (ang + nxt)
    allang = np.empty(2 * len(ang))
    allang[0::2] = ang
    allang[1::2] = mids
    return np.column_stack([np.cos(allang), np.sin(allang)])


# ------------------------------------------------------------------- 3D search


def candidate_directions_3d(body: Body, centers: np.ndarray) -> np.ndarray:
    dirs = [np.eye(3)]
    m = len(centers)
    if m >= 2:
        I, J = np.triu_indices(m, 1)
        D = centers[J] - centers[I]
        dirs.append(D)
    if not body.is_ball:
        dirs.append(body.normals)
    U = np.vstack(dirs)
    U = U[np.linalg.norm(U, axis=1) > 0]
    U /= np.linalg.norm(U, axis=1)[:, None]
    return U


def fibonacci_sphere(k: int) -> np.ndarray:
    idx = np.arange(k) + 0.5
    z = 1 - 2 * idx / k
    r = np.sqrt(1 - z * z)
    phi = math.pi * (1 + 5**0.5) * idx
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _side_program(body: Body, centers: np.ndarray, below, above, i: int, j: int):
    """Maximize the separation margin t for a fixed side assignment.

    Returns ``(u, b, t)`` in the normalization ``(c_j - c_i).u = 1`` or None.
    """
    delta = centers[j] - centers[i]
    if body.is_ball:
        import cvxpy as cp

        u = cp.Variable(3)
        b = cp.Variable()
        t = cp.Variable()
        r = body.radius
        nu = cp.norm(u, 2)
        cons = [delta @ u == 1, t <= 1]
        for k in below:
            cons.append(centers[k] @ u + r * nu + t <= b)
        for k in above:
            cons.append(centers[k] @ u - r * nu - t >= b)
        prob = cp.Problem(cp.Maximize(t), cons)
        try:
            prob.solve(solver=cp.CLARABEL)
        except cp.SolverError:
            return None
        if prob.status not in ("optimal", "optimal_inaccurate") or u.value is None:
            return None
        return np.asarray(u.value, dtype=float), float(b.value), float(t.value)

    V = body.vertices
    rows = []
    for k in below:
        P = centers[k] + V
        rows.append(np.hstack([P, -np.ones((len(V), 1)), np.ones((len(V), 1))]))
    for k in above:
        P = centers[k] + V
        rows.append(np.hstack([-P, np.ones((len(V), 1)), np.ones((len(V), 1))]))
    A_ub = np.vstack(rows)
    res = linprog(
        np.array([0, 0, 0, 0, -1.0]),
        A_ub=A_ub,
        b_ub=np.zeros(len(A_ub)),
        A_eq=np.array([[*delta, 0, 0]]),
        b_eq=[1.0],
        bounds=[(None, None)] * 4 + [(None, 1)],
        method="highs",
    )
    if not res.success:
        return None
    return res.x[:3], float(res.x[3]), float(res.x[4])


def _bnb_pair_3d(body: Body, centers: np.ndarray, i: int, j: int, tol: float):
    """Exact search over side assignments; returns (u, b) with unit u or None."""
    lp_tol = max(tol, LP_RTOL * instance_scale(body, centers))
    stack = [((i,), (j,))]
    seen = set()
    while stack:
        below, above = stack.pop()
        key = (frozenset(below), frozenset(above))
        if key in seen:
            continue
        seen.add(key)
        sol = _side_program(body, centers, below, above, i, j)
        if sol is None:
            continue
        u, b, t = sol
        norm = np.linalg.norm(u)
        if norm == 0:
            continue
        u, b = u / norm, b / norm
        if t / norm < -lp_tol:
            continue
        a = centers @ u
        h = support(body, u)
        cut = (a - h < b - lp_tol) & (b + lp_tol < a + h)
        if not cut.any():
            return u, b
        assigned = set(below) | set(above)
        free = [k for k in np.flatnonzero(cut) if k not in assigned]
        if not free:
            continue
        k = int(free[0])
        stack.append((below, above + (k,)))
        stack.append((below + (k,), above))
    return None


# ------------------------------------------------------------ public checks


def _resolve(packing: Packing, subset, obstacles):
    subset = sorted(set(int(k) for k in subset))
    if obstacles is None:
        obstacles = subset
    obstacles = sorted(set(int(k) for k in obstacles) | set(subset))
    return subset, obstacles


def pair_separable(
    packing: Packing,
    subset,
    i: int,
    j: int,
    obstacles=None,
    rtol: float = DEFAULT_RTOL,
    cap: int = DEFAULT_CAP_3D,
    heuristic: bool = False,
) -> SeparationCertificate | None:
    """A hyperplane separating ``c_i + C`` and ``c_j + C`` that misses the interior of every
    element of ``obstacles`` (default: the subset itself), or None.

    The returned plane has ``i`` below and ``j`` above.
    """
    if i == j:
        raise ValueError("pair_separable needs two distinct elements")
    subset, obstacles = _resolve(packing, subset, obstacles)
    if i not in subset or j not in subset:
        raise ValueError("pair must lie in the subset")
    body = packing.body
    C = packing.centers[obstacles]
    tol = _tolerance(body, C, rtol)
    li, lj = obstacles.index(i), obstacles.index(j)
    if body.dim == 2:
        U = sweep_directions_2d(body, C)
        first = pair_coverage(body, C, U, np.array([[li, lj]]), tol)[0]
        if first < 0:
            return None
        return certificate_from_direction(body, C, obstacles, li, lj, U[first], tol)
    if body.dim == 3:
        U = candidate_directions_3d(body, C)
        first = pair_coverage(body, C, U, np.array([[li, lj]]), tol)[0]
        if first >= 0:
            return certificate_from_direction(body, C, obstacles, li, lj, U[first], tol)
        if len(obstacles) > cap:
            if not heuristic:
                raise CapacityError(f"{len(obstacles)} elements exceed the 3D cap of {cap}")
            U = fibonacci_sphere(4000)
            first = pair_coverage(body, C, U, np.array([[li, lj]]), tol)[0]
            if first < 0:
                return None
            return certificate_from_direction(body, C, obstacles, li, lj, U[first], tol)
        found = _bnb_pair_3d(body, C, li, lj, tol)
        if found is None:
            return None
        u, b = found
        a = C @ u
        if a[li] > a[lj]:
            u, b, a = -u, -b, -a
        sides = {int(obstacles[k]): (BELOW if a[k] < b else ABOVE) for k in range(len(a))}
        return SeparationCertificate((int(i), int(j)), Hyperplane(u, b), sides)
    raise GeometryError("separability is implemented for d = 2, 3")


def separable_pairs(
    packing: Packing,
    subset,
    obstacles=None,
    rtol: float = DEFAULT_RTOL,
    directions: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, list]:
    """Pairs of ``subset`` and the first separating direction for each (or -1).

    Without ``directions`` the planar critical sweep (2D) or the 3D candidate
    set is used. Returns ``(pairs_global, first_index, directions, obstacles)``.
    """
    subset, obstacles = _resolve(packing, subset, obstacles)
    body = packing.body
    C = packing.centers[obstacles]
    tol = _tolerance(body, C, rtol)
    local = {g: k for k, g in enumerate(obstacles)}
    pairs = np.array(list(itertools.combinations([local[g] for g in subset], 2)), dtype=np.int64).reshape(-1, 2)
    if directions is None:
        directions = sweep_directions_2d(body, C) if body.dim == 2 else candidate_directions_3d(body, C)
    first = pair_coverage(body, C, directions, pairs, tol)
    glob = np.array(obstacles, dtype=np.int64)[pairs] if len(pairs) else pairs
    return glob, first, directions, obstacles


def totally_separable(
    packing: Packing,
    subset=None,
    obstacles=None,
    rtol: float = DEFAULT_RTOL,
    certificates: bool = True,
    cap: int = DEFAULT_CAP_3D,
    heuristic: bool = False,
) -> SeparabilityResult:
    """Every pair of ``subset`` is separable; returns certificates or the first failing pair."""
    if subset is None:
        subset = range(packing.n)
    subset, obstacles = _resolve(packing, subset, obstacles)
    if len(subset) < 2:
        return SeparabilityResult(True)
    body = packing.body
    C = packing.centers[obstacles]
    tol = _tolerance(body, C, rtol)
    pairs, first, U, obstacles = separable_pairs(packing, subset, obstacles, rtol)
    local = {g: k for k, g in enumerate(obstacles)}
    used_heuristic = False
    if body.dim == 3 and (first < 0).any():
        for n_pair in np.flatnonzero(first < 0):
            i, j = (int(x) for x in pairs[n_pair])
            if len(obstacles) > cap and not heuristic:
                raise CapacityError(f"{len(obstacles)} elements exceed the 3D cap of {cap}")
            used_heuristic |= len(obstacles) > cap
            cert = pair_separable(packing, subset, i, j, obstacles, rtol, cap, heuristic)
            if cert is None:
                return SeparabilityResult(False, failing_pair=(i, j), heuristic=used_heuristic)
            first[n_pair] = -2  # resolved by the side-assignment search
    elif (first < 0).any():
        n_pair = int(np.flatnonzero(first < 0)[0])
        return SeparabilityResult(False, failing_pair=tuple(int(x) for x in pairs[n_pair]))
    certs = []
    if certificates:
        for (i, j), k in zip(pairs, first):
            i, j = int(i), int(j)
            if k >= 0:
                cert = certificate_from_direction(body, C, obstacles, local[i], local[j], U[k], tol)
            else:
                cert = pair_separable(packing, subset, i, j, obstacles, rtol, cap, heuristic)
            certs.append(cert)
    return SeparabilityResult(True, certs, heuristic=used_heuristic)


def rho_separable(
    packing: Packing,
    strict_global: bool = False,
    rtol: float = DEFAULT_RTOL,
    cap: int = DEFAULT_CAP_3D,
    heuristic: bool = False,
) -> RhoResult:
    """Every sub-packing ``{c_j + C inside c_i + rho C}`` is totally separable.

    With ``strict_global`` the separating hyperplanes must also avoid the
    interiors of elements outside the sub-packing.
    """
    if packing.rho < 3:
        return RhoResult(True, fast_path=True)
    seen = set()
    checked = 0
    everything = list(range(packing.n))
    any_heuristic = False
    for i in range(packing.n):
        sub = rho_subpacking(packing, i, rtol)
        key = frozenset(sub)
        if len(sub) < 2 or key in seen:
            continue
        seen.add(key)
        checked += 1
        res = totally_separable(
            packing, sub, everything if strict_global else None, rtol, certificates=False, cap=cap, heuristic=heuristic
        )
        any_heuristic |= res.heuristic
        if not res.separable:
            return RhoResult(False, (i, res.failing_pair), checked, heuristic=any_heuristic)
    return RhoResult(True, None, checked, heuristic=any_heuristic)


def verify_certificate(packing: Packing, subset, cert: SeparationCertificate, rtol: float = DEFAULT_RTOL) -> bool:
    """Independent re-check of both certificate invariants."""
    n = np.asarray(cert.plane.normal, dtype=float)
    if n.shape != (packing.dim,) or abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError("malformed certificate: normal must be a unit vector of the ambient dimension")
    i, j = cert.pair
    subset = sorted(set(int(k) for k in subset) | {int(i), int(j)})
    C = packing.centers
    tol = _tolerance(packing.body, C[subset], rtol)
    h = support(packing.body, n)
    b = cert.plane.offset
    if not (C[i] @ n + h <= b + tol and b <= C[j] @ n - h + tol):
        return False
    for k in subset:
        a = C[k] @ n
        if a - h < b - tol and b + tol < a + h:
            return False
    return True
