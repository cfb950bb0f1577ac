"""Annealing search for rho-separable packings with small mean projection, and
constructive lower bounds for nu_C(rho, K) and upper bounds for R_C(rho, n).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import (
    DEFAULT_RTOL,
    Body,
    GeometryError,
    Hull,
    Packing,
    body_radii,
    convex_hull,
    hull_of_packing,
    norm_c,
)
from .quermass import mean_projection
from .separability import (
    CapacityError,
    check_packing,
    pair_separable,
    rho_separable,
    rho_subpacking,
    separable_pairs,
)

POOL_SIZE = 96


class OptimizationAborted(RuntimeError):
    """Raised when a 3D capacity error stops a run; carries the partial trace."""

    def __init__(self, message, trace, best):
        super().__init__(message)
        self.trace = trace
        self.best = best


@dataclass(frozen=True)
class AnnealSchedule:
    initial_temperature: float | None = None  # None: 0.05 * M_i(initial)
    cooling_factor: float = 0.95
    moves_per_epoch: int | None = None  # None: 200 * n
    epochs: int = 100
    seed: int = 0
    move_scale: float = 0.25
    polish_epochs: int = 5

    def __post_init__(self):
        if not 0 < self.cooling_factor < 1:
            raise ValueError("cooling_factor must lie in (0, 1)")
        if self.epochs < 1 or (self.moves_per_epoch is not None and self.moves_per_epoch < 1):
            raise ValueError("epochs and moves_per_epoch must be positive")
        if self.polish_epochs < 0:
            raise ValueError("polish_epochs must be nonnegative")
        if self.initial_temperature is not None and not self.initial_temperature >= 0:
            raise ValueError("initial_temperature must be nonnegative")
        if not self.move_scale > 0:
            raise ValueError("move_scale must be positive")


@dataclass
class TraceRow:
    epoch: int
    best: float
    current: float
    temperature: float


@dataclass
class OptimizationResult:
    packing: Packing
    objective: float
    trace: list = field(default_factory=list)
    verification: bool = False
    initial_objective: float = float("nan")


def objective(packing: Packing, i: int) -> float:
    return float(mean_projection(hull_of_packing(packing), i))


# ------------------------------------------------------------ constructions


def _lattice_basis(body: Body, kind: str) -> np.ndarray:
    """Rows are lattice basis vectors whose translates of C pack."""
    d = body.dim
    E = np.eye(d)
    g = np.atleast_1d(norm_c(E, body))
    B = 2 * E / g[:, None]
    if kind == "hex":
        if d == 2:
            b1 = B[0]
            # shear the second vector until it clears both b1-neighbours
            lo, hi = 0.0, 4 * body_radii(body)[1] / body_radii(body)[0] * 2

            def ok(t):
                v = np.array([b1[0] / 2, t])
                return norm_c(v, body) >= 2 and norm_c(v - b1, body) >= 2

            for _ in range(80):
                mid = 0.5 * (lo + hi)
                lo, hi = (lo, mid) if ok(mid) else (mid, hi)
            B = np.array([b1, [b1[0] / 2, hi]])
        elif body.is_ball:
            r = body.radius
            B = r * np.array([[2.0, 0, 0], [1.0, math.sqrt(3), 0], [1.0, 1 / math.sqrt(3), 2 * math.sqrt(2 / 3)]])
    # repair bases whose short combinations overlap
    combos = np.array([m for m in itertools.product((-1, 0, 1), repeat=d) if any(m)], dtype=float)
    shortest = float(np.min(norm_c(combos @ B, body)))
    if shortest < 2:
        B = B * (2 / shortest)
    return B


def _lattice_points(B: np.ndarray, offset: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Points offset + m B (m integer) inside the box [lo, hi]."""
    d = len(B)
    Binv = np.linalg.inv(B)
    corners = np.array(list(itertools.product(*zip(lo, hi)))) - offset
    coef = corners @ Binv
    mlo = np.floor(coef.min(axis=0)).astype(int) - 1
    mhi = np.ceil(coef.max(axis=0)).astype(int) + 1
    grids = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(mlo, mhi)], indexing="ij")
    M = np.stack(grids, axis=-1).reshape(-1, d)
    X = offset + M @ B
    keep = np.all((X >= lo - 1e-9) & (X <= hi + 1e-9), axis=1)
    return X[keep]


def _round_to(X: np.ndarray) -> np.ndarray:
    # cancel rounding noise so tangencies land exactly on integer multiples
    return np.where(np.abs(X - np.round(X)) < 1e-12, np.round(X), X)


def _verified(packing: Packing, rtol: float = DEFAULT_RTOL) -> bool:
    return check_packing(packing, rtol).ok and rho_separable(packing, rtol=rtol).separable


def initial_configuration(n: int, body: Body, rho: float, shape: str = "round") -> Packing:
    """A verified rho-separable packing of ``n`` translates.

    ``round`` crops the densest available lattice by gauge distance from its
    centroid (falling back to ``grid`` when the crop is not rho-separable),
    ``sausage`` places collinear centers at gauge spacing 2 along the first
    axis and ``grid`` uses the square lattice with gauge spacing 2.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    d = body.dim
    if n == 1:
        return Packing(body, rho, np.zeros((1, d)))
    if shape == "sausage":
        step = 2 / float(norm_c(np.eye(d)[0], body))
        C = np.zeros((n, d))
        C[:, 0] = step * np.arange(n)
        P = Packing(body, rho, C)
    elif shape == "grid":
        B = _lattice_basis(body, "grid")
        k = math.ceil(n ** (1 / d) - 1e-9)
        M = np.array(list(itertools.product(range(k), repeat=d)))[:, ::-1]
        # fill whole rows first so the shape stays compact
        P = Packing(body, rho, (M @ B)[:n])
    elif shape == "round":
        P = _round_crop(n, body, rho)
        if P is None:
            return initial_configuration(n, body, rho, "grid")
    else:
        raise ValueError(f"unknown shape {shape!r}")
    if not _verified(P):
        raise GeometryError(f"{shape} construction failed verification")
    return P


def _round_crop(n: int, body: Body, rho: float) -> Packing | None:
    d = body.dim
    B = _lattice_basis(body, "hex")
    R = body_radii(body)[1]
    reach = 2 * R * (n ** (1 / d) + 2)
    X = _lattice_points(B, np.zeros(d), -reach * np.ones(d), reach * np.ones(d))
    g = norm_c(X, body)
    order = np.lexsort((X[:, 1], X[:, 0], np.round(g, 9)))
    X = X[order[:n]]
    P = Packing(body, rho, _round_to(X))
    if rho >= 3 and not rho_separable(P).separable:
        return None
    return P


# ------------------------------------------------------------ separability


class _SepChecker:
    """rho-separability checks with a pool of recently useful directions."""

    def __init__(self, rtol: float = DEFAULT_RTOL):
        self.pool = np.zeros((0, 0))
        self.rtol = rtol

    def _remember(self, U: np.ndarray):
        U = np.atleast_2d(U)
        if self.pool.size == 0:
            self.pool = U.copy()
        else:
            self.pool = np.vstack([U, self.pool])
        # canonical sign and dedupe
        s = np.where(self.pool[:, 0] < 0, -1.0, 1.0)
        canon = np.round(self.pool * s[:, None], 12)
        _, keep = np.unique(canon, axis=0, return_index=True)
        self.pool = self.pool[np.sort(keep)][:POOL_SIZE]

    def subset_ok(self, packing: Packing, subset) -> bool:
        if len(subset) < 2:
            return True
        if self.pool.size:
            pairs, first, _, obstacles = separable_pairs(packing, subset, None, self.rtol, directions=self.pool)
        else:
            pairs, first, obstacles = None, None, None
        if first is not None and (first >= 0).all():
            return True
        body = packing.body
        if body.dim == 2:
            pairs2, first2, U, obstacles = separable_pairs(packing, subset, None, self.rtol)
            if (first2 < 0).any():
                return False
            self._remember(U[np.unique(first2)][:8])
            return True
        # 3D: exact pair checks only for pairs the pool missed
        todo = pairs if pairs is not None else separable_pairs(packing, subset, None, self.rtol, directions=np.eye(3))[0]
        misses = todo[first < 0] if first is not None else todo
        for i, j in misses:
            cert = pair_separable(packing, subset, int(i), int(j), rtol=self.rtol)
            if cert is None:
                return False
            self._remember(cert.plane.normal)
        return True

    def packing_ok(self, packing: Packing, candidates=None) -> bool:
        if packing.rho < 3:
            return True
        idx = range(packing.n) if candidates is None else candidates
        subsets = {frozenset(rho_subpacking(packing, i, self.rtol)) for i in idx}
        for sub in sorted(subsets, key=lambda s: (len(s), sorted(s))):
            if not self.subset_ok(packing, sorted(sub)):
                return False
        return True


# ------------------------------------------------------------ annealing


def _strictly_inside(hull: Hull, x: np.ndarray, tol: float) -> bool:
    eq = hull.polytope.equations
    if eq is None:
        return False
    return bool((x @ eq[:, :-1].T - eq[:, -1] < -tol).all(axis=-1).all())


def _inside(hull: Hull, x: np.ndarray, tol: float) -> bool:
    eq = hull.polytope.equations
    if eq is None:
        return False
    return bool((x @ eq[:, :-1].T - eq[:, -1] <= tol).all())


def _pocket_candidates(rng, C: np.ndarray, body: Body, k: int, tol: float) -> np.ndarray:
    """Free positions touching other translates, ``k`` itself ignored.

    Balls in the plane use the points touching two translates; otherwise
    points touching one translate along random directions.
    """
    n, d = C.shape
    others = np.delete(np.arange(n), k)
    O = C[others]
    if body.is_ball and d == 2 and n > 2:
        r2 = 2 * body.radius
        pairs = cKDTree(O).query_pairs(2 * r2 * (1 - 1e-12), output_type="ndarray")
        if len(pairs) > 400:
            pairs = pairs[rng.choice(len(pairs), 400, replace=False)]
        a, b = pairs[:, 0], pairs[:, 1]
        v = O[b] - O[a]
        L = np.linalg.norm(v, axis=1)
        keep = L > 0
        a, b, v, L = a[keep], b[keep], v[keep], L[keep]
        h = np.sqrt(np.maximum(r2 * r2 - L * L / 4, 0.0))
        perp = np.stack([-v[:, 1], v[:, 0]], axis=1) / L[:, None]
        m = 0.5 * (O[a] + O[b])
        cand = np.vstack([m + h[:, None] * perp, m - h[:, None] * perp])
    else:
        j = rng.integers(len(O), size=64)
        U = rng.normal(size=(64, d))
        U /= np.atleast_1d(norm_c(U, body))[:, None]
        cand = O[j] + 2 * U
    if len(cand) == 0:
        return cand
    return cand[_free_positions(cand, O, body, tol)]


def _free_positions(cand: np.ndarray, O: np.ndarray, body: Body, tol: float) -> np.ndarray:
    tree = cKDTree(O)
    if body.is_ball:
        dist, _ = tree.query(cand)
        return dist / body.radius >= 2 - tol
    free = np.ones(len(cand), dtype=bool)
    reach = 2 * body_radii(body)[1]
    for t, near in enumerate(tree.query_ball_point(cand, reach)):
        if near:
            free[t] = bool((np.atleast_1d(norm_c(O[near] - cand[t], body)) >= 2 - tol).all())
    return free


def _min_gauge_distance(C: np.ndarray, body: Body) -> float:
    tree = cKDTree(C)
    if body.is_ball:
        dist, _ = tree.query(C, k=2)
        return float(dist[:, 1].min()) / body.radius
    # the Euclidean nearest pair bounds the gauge minimum, which bounds the search radius
    dist, idx = tree.query(C, k=2)
    t = int(np.argmin(dist[:, 1]))
    bound = float(norm_c(C[idx[t, 1]] - C[t], body))
    pairs = tree.query_pairs(bound * body_radii(body)[1] * (1 + 1e-9), output_type="ndarray")
    return float(np.min(norm_c(C[pairs[:, 1]] - C[pairs[:, 0]], body)))


def minimize_Mi(
    n: int,
    body: Body,
    rho: float,
    i: int = 1,
    schedule: AnnealSchedule | None = None,
    initial: Packing | str = "round",
    allow_volume: bool = False,
    check_separability: bool = True,
    rtol: float = DEFAULT_RTOL,
) -> OptimizationResult:
    """Simulated annealing over center configurations minimizing ``M_i`` of the hull."""
    d = body.dim
    if n < 2:
        raise ValueError("minimize_Mi needs n >= 2")
    if not (1 <= i <= d - 1 or (i == d and allow_volume)):
        raise ValueError(f"projection index {i} outside 1..{d - 1}")
    schedule = schedule or AnnealSchedule()
    rng = np.random.default_rng(schedule.seed)
    start = initial if isinstance(initial, Packing) else initial_configuration(n, body, rho, initial)
    if start.n != n or start.body is not body and start.body.to_dict() != body.to_dict():
        raise ValueError("initial packing does not match n and body")
    start = Packing(body, rho, start.centers)
    checker = _SepChecker(rtol)

    r_in, R_out = body_radii(body)
    limit = rho - 1 + rtol * rho
    C = start.centers.copy()
    hull = hull_of_packing(start)
    cur = float(mean_projection(hull, i))
    first_value = cur
    best, best_C = cur, C.copy()
    T0 = 0.05 * cur if schedule.initial_temperature is None else schedule.initial_temperature
    moves = schedule.moves_per_epoch or 200 * n
    trace: list[TraceRow] = []
    tol = 2 * rtol * max(1.0, float(np.abs(C).max()) / R_out)
    sep = check_separability and rho >= 3

    def overlap_free(Cn, k):
        g = np.atleast_1d(norm_c(np.delete(Cn, k, axis=0) - Cn[k], body))
        return bool((g >= 2 - tol).all())

    total_epochs = schedule.epochs + schedule.polish_epochs
    T = T0
    try:
        for epoch in range(total_epochs):
            polish = epoch >= schedule.epochs
            temp = 0.0 if polish else T
            frac = math.sqrt(temp / T0) if T0 > 0 else 0.0
            step = schedule.move_scale * r_in * max(0.02, frac)
            for _ in range(moves):
                kind = rng.random()
                Cn = C.copy()
                moved = None
                if kind < 0.7:
                    k = int(rng.integers(n))
                    Cn[k] = C[k] + rng.normal(size=d) * step
                    moved = k
                elif kind < 0.9:
                    cen = C.mean(axis=0)
                    k = int(np.argmax(norm_c(C - cen, body)))
                    cand = _pocket_candidates(rng, C, body, k, tol)
                    if len(cand) == 0:
                        continue
                    order = np.argsort(np.atleast_1d(norm_c(cand - cen, body)), kind="stable")
                    pick = order[int(rng.integers(min(3, len(order))))]
                    Cn[k] = cand[pick]
                    moved = k
                else:
                    cen = C.mean(axis=0)
                    dmin = _min_gauge_distance(C, body)
                    eps = rng.random() * 0.02
                    f = max(1 - eps, 2 / dmin) if dmin > 0 else 1.0
                    if f >= 1:
                        continue
                    Cn = cen + (C - cen) * f
                if moved is not None and not overlap_free(Cn, moved):
                    continue
                if moved is not None and _strictly_inside(hull, _translates(body, C[moved]), tol) and _inside(
                    hull, _translates(body, Cn[moved]), -tol
                ):
                    new_val = cur
                    new_hull = hull
                else:
                    new_hull = hull_of_packing(Packing(body, rho, Cn))
                    new_val = float(mean_projection(new_hull, i))
                delta = new_val - cur
                if delta > 0 and (temp <= 0 or rng.random() >= math.exp(-delta / temp)):
                    continue
                if sep:
                    P_new = Packing(body, rho, Cn)
                    if moved is None:
                        cands = None
                    else:
                        g_old = np.atleast_1d(norm_c(Cn - C[moved], body))
                        g_new = np.atleast_1d(norm_c(Cn - Cn[moved], body))
                        cands = np.flatnonzero((g_old <= limit) | (g_new <= limit)).tolist()
                    if not checker.packing_ok(P_new, cands):
                        continue
                C, cur, hull = Cn, new_val, new_hull
                if cur < best:
                    best, best_C = cur, C.copy()
            trace.append(TraceRow(epoch, best, cur, temp))
            if polish:
                C, cur = best_C.copy(), best
                hull = hull_of_packing(Packing(body, rho, C))
            else:
                T *= schedule.cooling_factor
    except CapacityError as exc:
        raise OptimizationAborted(str(exc), trace, Packing(body, rho, best_C)) from exc

    final = Packing(body, rho, best_C)
    ok = check_packing(final, rtol).ok and (not check_separability or rho_separable(final, rtol=rtol).separable)
    if not ok:
        raise GeometryError("final configuration failed from-scratch verification")
    return OptimizationResult(final, objective(final, i), trace, ok, first_value)


def _translates(body: Body, c: np.ndarray) -> np.ndarray:
    if body.is_ball:
        return c[None, :]
    return c + body.vertices


# ------------------------------------------------------------ containers


def ball_container(radius: float, dim: int = 2) -> Hull:
    return Hull(convex_hull(np.zeros((1, dim)), allow_degenerate=True), float(radius))


def box_container(half_width: float, dim: int = 2) -> Hull:
    pts = np.array(list(itertools.product((-half_width, half_width), repeat=dim)), dtype=float)
    return Hull(convex_hull(pts), 0.0)


def container_contains(K: Hull, X, rtol: float = DEFAULT_RTOL) -> np.ndarray:
    """Membership in ``polytope + offset * B`` with a relative tolerance."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    P = K.polytope
    scale = max(1.0, float(np.abs(P.vertices).max()) + K.offset)
    tol = rtol * scale
    if P.affine_dim == 0:
        return np.linalg.norm(X - P.vertices[0], axis=1) <= K.offset + tol
    if P.affine_dim == 1:
        a, b = P.vertices[0], P.vertices[1]
        e = b - a
        s = np.clip((X - a) @ e / (e @ e), 0, 1)
        return np.linalg.norm(X - (a + s[:, None] * e), axis=1) <= K.offset + tol
    if P.equations is None:
        raise GeometryError("container must be full-dimensional or a point/segment plus a ball")
    excess = (X @ P.equations[:, :-1].T - P.equations[:, -1]).max(axis=1)
    if K.offset == 0:
        return excess <= tol
    inside = excess <= tol
    shell = ~inside & (excess <= K.offset + tol)
    if shell.any():
        Y = X[shell]
        if P.dim == 2:
            V = P.vertices
            best = np.full(len(Y), np.inf)
            for a, b in zip(V, np.roll(V, -1, axis=0)):
                e = b - a
                s = np.clip((Y - a) @ e / (e @ e), 0, 1)
                best = np.minimum(best, np.linalg.norm(Y - (a + s[:, None] * e), axis=1))
        else:
            from .quermass import _point_triangle_dist2

            best = np.full(len(Y), np.inf)
            for tri in P.vertices[P.simplices]:
                best = np.minimum(best, np.sqrt(_point_triangle_dist2(Y, tri)))
        inside[shell] = best <= K.offset + tol
    return inside


def _container_box(K: Hull) -> tuple[np.ndarray, np.ndarray]:
    V = K.polytope.vertices
    return V.min(axis=0) - K.offset, V.max(axis=0) + K.offset


def _container_center(K: Hull) -> np.ndarray:
    return K.polytope.vertices.mean(axis=0)


def nu_lower(
    body: Body,
    rho: float,
    K: Hull,
    target: int | None = None,
    seed: int = 0,
    insertions: int = 400,
    rtol: float = DEFAULT_RTOL,
) -> tuple[int, Packing]:
    """Certified lower bound on nu_C(rho, K) with its witness packing.

    Only the centers are constrained to K. Lattices are seeded at a few
    anchored offsets and some random ones; free positions touching placed
    translates are then tried as insertions.
    """
    d = body.dim
    rng = np.random.default_rng(seed)
    lo, hi = _container_box(K)
    center = _container_center(K)
    kinds = ["grid"] + (["hex"] if rho < 3 and (d == 2 or body.is_ball) else [])
    best = np.zeros((0, d))
    checker = _SepChecker(rtol)
    for kind in kinds:
        B = _lattice_basis(body, kind)
        anchors = [np.zeros(d)]
        anchors += [0.5 * b for b in B]
        anchors.append(0.5 * B.sum(axis=0))
        if kind == "hex" and d == 2:
            anchors.append(B.sum(axis=0) / 3)
        anchors += [rng.random(d) @ B for _ in range(4)]
        for off in anchors:
            X = _lattice_points(B, center + off, lo, hi)
            X = _round_to(X[container_contains(K, X, rtol)])
            if len(X) <= len(best):
                continue
            if target is not None and len(X) > target:
                # crop around the container center before verification
                order = np.lexsort((X[:, 0], np.round(np.linalg.norm(X - center, axis=1), 9)))
                X = X[order[: max(target, 1)]]
                if len(X) <= len(best):
                    continue
            if checker.packing_ok(Packing(body, rho, X)):
                best = X
            if target is not None and len(best) >= target:
                break
        if target is not None and len(best) >= target:
            break
    if len(best) == 0:
        best = center[None, :] if container_contains(K, center, rtol)[0] else K.polytope.vertices[:1].copy()
    # insertions at touching positions
    C = best
    tol = 2 * rtol * max(1.0, float(np.abs(hi).max()) / body_radii(body)[1])
    for _ in range(insertions):
        if target is not None and len(C) >= target:
            break
        j = int(rng.integers(len(C)))
        U = rng.normal(size=(8, d))
        U /= np.atleast_1d(norm_c(U, body))[:, None]
        cand = C[j] + 2 * U
        cand = cand[container_contains(K, cand, rtol)]
        for c in cand:
            g = np.atleast_1d(norm_c(C - c, body))
            if (g < 2 - tol).any():
                continue
            trial = np.vstack([C, c])
            P = Packing(body, rho, trial)
            near = np.flatnonzero(norm_c(trial - c, body) <= rho - 1 + rtol * rho).tolist()
            if checker.packing_ok(P, near):
                C = trial
                break
    P = Packing(body, rho, C)
    if not _verified(P, rtol) or not container_contains(K, C, rtol).all():
        raise GeometryError("nu_lower witness failed verification")
    return len(C), P


@dataclass
class RcEstimate:
    R_upper: float
    packing: Packing
    complete: bool = True
    probes: int = 0


def _crop_nearest(P: Packing, n: int) -> Packing:
    norms = np.linalg.norm(P.centers, axis=1)
    order = np.lexsort((P.centers[:, 0], np.round(norms, 12)))
    return P.with_centers(P.centers[order[:n]])


def estimate_Rc(
    body: Body,
    rho: float,
    n: int,
    rel_width: float = 1e-3,
    max_iter: int = 60,
    seed: int = 0,
    insertions: int = 100,
) -> RcEstimate:
    """Upper bound on R_C(rho, n) by bisection over certified nu_lower probes."""
    d = body.dim
    if n < 1:
        raise ValueError("n must be at least 1")
    if n == 1:
        return RcEstimate(0.0, Packing(body, rho, np.zeros((1, d))))
    # a feasible radius: a grid block around the origin
    witness = _crop_nearest(initial_configuration(n, body, rho, "grid"), n)
    witness = witness.with_centers(witness.centers - witness.centers.mean(axis=0))
    hi = float(np.linalg.norm(witness.centers, axis=1).max())
    lo = 0.0
    probes = 0
    while hi - lo > rel_width * hi and probes < max_iter:
        mid = 0.5 * (lo + hi)
        probes += 1
        count, P = nu_lower(body, rho, ball_container(mid, d), target=n, seed=seed + probes, insertions=insertions)
        if count >= n:
            P = _crop_nearest(P, n)
            witness = P
            hi = min(mid, float(np.linalg.norm(P.centers, axis=1).max()))
        else:
            lo = mid
    witness = Packing(body, rho, witness.centers)
    if not _verified(witness):
        raise GeometryError("R_C witness failed verification")
    return RcEstimate(hi, witness, hi - lo <= rel_width * hi, probes)
