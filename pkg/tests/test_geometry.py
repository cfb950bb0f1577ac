import math

import numpy as np
import pytest

from seppack.geometry import (
    Body,
    DegenerateHullError,
    GeometryError,
    Hull,
    Hyperplane,
    Packing,
    circumradius_hull,
    convex_hull,
    hull_of_packing,
    inradius_hull,
    kappa,
    min_enclosing_ball,
    norm_c,
    support,
)


def test_kappa_values():
    assert kappa(0) == pytest.approx(1.0)
    assert kappa(1) == pytest.approx(2.0)
    assert kappa(2) == pytest.approx(math.pi)
    assert kappa(3) == pytest.approx(4 * math.pi / 3)


def test_support_examples():
    assert support(Body.ball(), [0, 3]) == pytest.approx(3)
    assert support(Body.square(), [1, 1]) == pytest.approx(2)
    assert support(Body.regular_polygon(6), [1, 0]) == pytest.approx(1)


def test_support_vectorized_matches_loop():
    hexagon = Body.regular_polygon(6, phase=0.3)
    U = np.random.default_rng(0).normal(size=(20, 2))
    batch = support(hexagon, U)
    assert np.allclose(batch, [support(hexagon, u) for u in U])


def test_gauge_examples():
    assert norm_c([3, 4], Body.ball()) == pytest.approx(5)
    assert norm_c([0.5, -1.5], Body.square()) == pytest.approx(1.5)


def test_gauge_hexagon_against_membership_bisection():
    hexagon = Body.regular_polygon(6)
    x = np.array([0.0, 1.5])
    rng = np.random.default_rng(3)
    # bisection on membership of x in lam*C, tested against the scaled vertex polygon
    lo, hi = 0.0, 10.0
    verts = hexagon.vertices
    for _ in range(60):
        lam = 0.5 * (lo + hi)
        inside = _in_hull(verts * lam, x)
        lo, hi = (lo, lam) if inside else (lam, hi)
    assert norm_c(x, hexagon) == pytest.approx(hi, rel=1e-9)
    pts = rng.uniform(-2, 2, size=(1000, 2))
    g = norm_c(pts, hexagon)
    assert all(_in_hull(verts * (gi + 1e-9), p) for gi, p in zip(g[:200], pts[:200]))


def _in_hull(verts, x):
    # counterclockwise polygon: x inside iff left of every edge
    v = np.asarray(verts)
    e = np.roll(v, -1, axis=0) - v
    w = x - v
    return bool((e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0] >= -1e-12).all())


def test_body_radii():
    assert Body.ball().radii() == pytest.approx((1, 1))
    assert Body.square().radii() == pytest.approx((1, math.sqrt(2)))
    assert Body.regular_polygon(6).radii() == pytest.approx((math.sqrt(3) / 2, 1))


def test_body_validation():
    with pytest.raises(GeometryError):
        Body.polygon([(1, 0), (0, 1), (-1, 0), (0, -1.5)])  # not symmetric
    with pytest.raises(GeometryError):
        Body.ball(0)
    with pytest.raises(GeometryError):
        Body.regular_polygon(5)


def test_body_round_trip():
    for body in (Body.ball(2.0), Body.square(0.5), Body.cube(), Body.octahedron(2)):
        again = Body.from_dict(body.to_dict())
        assert again.to_dict() == body.to_dict()


def test_hyperplane_requires_unit_normal():
    with pytest.raises(GeometryError):
        Hyperplane(np.array([1.0, 1.0]), 0.0)


def test_packing_requires_rho_at_least_one():
    with pytest.raises(GeometryError):
        Packing(Body.ball(), 0.5, [[0, 0]])


def test_convex_hull_examples():
    tri = convex_hull([(0, 0), (1, 0), (0, 1), (0.25, 0.25)])
    assert len(tri.vertices) == 3
    sq = convex_hull([(1, 1), (-1, 1), (-1, -1), (1, -1)])
    assert sq.intrinsic[2] == pytest.approx(4)


def test_convex_hull_random_disk_points():
    rng = np.random.default_rng(0)
    r = np.sqrt(rng.random(100))
    t = rng.random(100) * 2 * np.pi
    pts = np.column_stack([r * np.cos(t), r * np.sin(t)])
    hull = convex_hull(pts)
    assert hull.contains(pts).all()
    assert hull.intrinsic[2] <= math.pi


def test_degenerate_hull_raises_unless_allowed():
    with pytest.raises(DegenerateHullError):
        convex_hull([(0, 0), (1, 0), (2, 0)])
    seg = convex_hull([(0, 0), (1, 0), (2, 0)], allow_degenerate=True)
    assert seg.affine_dim == 1
    assert seg.intrinsic[1] == pytest.approx(2)


def test_hull_of_packing_metrics():
    D = Body.ball()
    one = hull_of_packing(Packing(D, 1, [[0, 0]]))
    assert inradius_hull(one)[0] == pytest.approx(1)
    assert circumradius_hull(one)[0] == pytest.approx(1)
    two = hull_of_packing(Packing(D, 1, [[0, 0], [2, 0]]))
    assert inradius_hull(two)[0] == pytest.approx(1)
    assert circumradius_hull(two)[0] == pytest.approx(2)
    grid = hull_of_packing(Packing(D, 1, [[x, y] for x in (0, 2, 4) for y in (0, 2, 4)]))
    assert inradius_hull(grid)[0] == pytest.approx(3)
    assert circumradius_hull(grid)[0] == pytest.approx(1 + 2 * math.sqrt(2))


def test_min_enclosing_ball_examples():
    c, R = min_enclosing_ball([(1, 1), (-1, 1), (-1, -1), (1, -1)])
    assert R == pytest.approx(math.sqrt(2))
    assert np.allclose(c, 0)
    c, R = min_enclosing_ball([(0, 0), (4, 0), (0, 3)])
    assert R == pytest.approx(2.5)
    assert np.allclose(c, [2, 1.5])


def test_min_enclosing_ball_contains_and_is_deterministic():
    pts = np.random.default_rng(5).normal(size=(300, 3))
    c1, R1 = min_enclosing_ball(pts, seed=1)
    c2, R2 = min_enclosing_ball(pts, seed=1)
    assert R1 == R2 and np.array_equal(c1, c2)
    assert (np.linalg.norm(pts - c1, axis=1) <= R1 * (1 + 1e-9)).all()


def test_inradius_examples():
    sq = Hull(convex_hull([(1, 1), (-1, 1), (-1, -1), (1, -1)]))
    r, c = inradius_hull(sq)
    assert r == pytest.approx(1) and np.allclose(c, 0, atol=1e-9)
    tri = Hull(convex_hull([(0, 0), (2, 0), (1, math.sqrt(3))]))
    assert inradius_hull(tri)[0] == pytest.approx(1 / math.sqrt(3))
