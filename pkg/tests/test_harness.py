import math

import mpmath
import numpy as np
import pytest
import sympy

from seppack.density import DensityEstimate, square_cell
from seppack.geometry import Body, Hull, Packing, convex_hull, kappa, min_enclosing_ball
from seppack.harness import (
    TheoremContext,
    UnverifiedPackingError,
    check_eq2,
    check_lemma_density,
    check_lemma_Mi_bound,
    check_nu_volume_sandwich,
    check_sr_vol,
    check_stability,
    check_sublemma,
    check_theorem,
    derived_omega,
    exact_failures,
    final_estimate_holds,
    minkowski_difference_body,
    run_suite,
    shape_bound,
    theorem_threshold,
    theta,
)
from seppack.optimizer import (
    AnnealSchedule,
    ball_container,
    box_container,
    initial_configuration,
    minimize_Mi,
)
from seppack.quermass import af_ball_lower_bound, random_polytope
from seppack.records import CERTIFIED, EXACT, FAIL, HEURISTIC, INFORMATIONAL, NOT_APPLICABLE, PASS

D = Body.ball()
HEX = math.pi / math.sqrt(12)
INTERVAL = DensityEstimate(math.pi / 4, HEX, "interval")
SQUARE = Hull(convex_hull([(1, 1), (-1, 1), (-1, -1), (1, -1)]))

# frozen from a 40-digit mpmath evaluation of the closed form
THETA = {2: 9.47374313794841e-05, 3: 6.077409056586541e-06}


def theta_mp(d):
    mpmath.mp.dps = 40
    d = mpmath.mpf(d)
    lead = 1 / (2 ** ((d + 3) / 2) * mpmath.sqrt(2 * mpmath.pi) * mpmath.sqrt(d) * (d - 1) * (d + 3))
    return lead * min(3 / (mpmath.pi**2 * d * (d + 2) * 2**d), 16 / (d * mpmath.pi) ** ((d - 1) / 4))


@pytest.mark.parametrize("d", [2, 3])
def test_theta_fixture(d):
    assert theta(d) == pytest.approx(THETA[d], rel=1e-13)
    assert theta(d) == pytest.approx(float(theta_mp(d)), rel=1e-13)


def test_theta_positive_and_decreasing():
    values = [theta(d) for d in range(2, 11)]
    assert all(v > 0 for v in values)
    assert all(b < a for a, b in zip(values, values[1:]))
    with pytest.raises(ValueError):
        theta(1)


def test_stability_examples():
    disk = check_stability(D)
    assert disk.passed and abs(disk.lhs) < 1e-12 and disk.rhs == 0
    sq = check_stability(SQUARE)
    assert sq.lhs == pytest.approx(4 / math.pi - 1)
    assert sq.rhs == pytest.approx(THETA[2] * (1 - 1 / math.sqrt(2)) ** 2.5)
    assert sq.passed and sq.semantics == EXACT


def test_sr_vol_examples():
    disk = check_sr_vol(D)
    assert (disk.lhs, disk.rhs) == pytest.approx((2 * math.pi, math.pi))
    sq = check_sr_vol(SQUARE)
    assert (sq.lhs, sq.rhs) == pytest.approx((8, 4))


@pytest.mark.parametrize("d", [2, 3])
def test_exact_checks_on_random_hulls(d):
    rng = np.random.default_rng(100 + d)
    for k in range(100):
        Q = Hull(random_polytope(rng, d, kind="gauss" if k % 2 else "ball"), float(rng.uniform(0, 0.5)))
        for rec in (check_stability(Q), check_sr_vol(Q), *af_ball_lower_bound(Q)):
            assert rec.passed, rec


def test_lemma_density_examples():
    one = check_lemma_density(Packing(D, 1, [[0, 0]]))
    assert one.lhs == pytest.approx(0.25) and one.rhs == pytest.approx(HEX) and one.passed
    _, pts = square_cell(10)
    grid = check_lemma_density(Packing(D, 6, pts), HEX)
    assert grid.passed and grid.semantics == CERTIFIED and grid.details["method"] == "exact-disk"
    sausage = check_lemma_density(Packing(D, 1, [[2 * k, 0] for k in range(20)]))
    # union of 20 radius-2 disks at spacing 2: a stadium minus nothing overlapping twice
    assert sausage.passed and sausage.margin > 0.3


def test_lemma_density_refuses_unverified_packing():
    with pytest.raises(UnverifiedPackingError):
        check_lemma_density(Packing(D, 1, [[0, 0], [1, 0]]))
    hexagon = [[0, 0]] + [[2 * math.cos(k * math.pi / 3), 2 * math.sin(k * math.pi / 3)] for k in range(6)]
    with pytest.raises(UnverifiedPackingError):
        check_lemma_density(Packing(D, 3, hexagon))


def test_nu_volume_sandwich_examples():
    lower, upper = check_nu_volume_sandwich(ball_container(2), D, 1, 4)
    assert lower.passed and lower.semantics == CERTIFIED
    assert upper.verdict == INFORMATIONAL
    assert set(upper.details) >= {"at_delta_lower", "at_delta_upper"}
    assert check_nu_volume_sandwich(box_container(2), D, 6, 9)[0].passed
    trivial = check_nu_volume_sandwich(ball_container(2), D, 1, 1)[0]
    assert trivial.passed and trivial.margin > 0.9 * trivial.lhs


def test_eq2_examples():
    for body, rho, n, R in ((D, 1, 1, 0.0), (D, 1, 2, 1.001), (D, 6, 9, 2 * math.sqrt(2))):
        main, left = check_eq2(body, rho, n, R)
        assert main.passed and main.margin >= 0
        assert left.verdict == INFORMATIONAL
    main, _ = check_eq2(D, 1, 2, 1.001)
    assert main.lhs == pytest.approx(2 / HEX)
    assert main.rhs == pytest.approx(3.001**2)


def test_lemma_Mi_bound_examples():
    P = initial_configuration(4096, D, 1, "round")
    _, R = min_enclosing_ball(P.centers)
    rec = check_lemma_Mi_bound(D, 1, 4096, 1, R)
    assert rec.details["threshold"] == pytest.approx(16 * HEX)
    assert rec.passed
    assert check_lemma_Mi_bound(D, 1, 2, 1, 1.0).verdict == NOT_APPLICABLE
    # square grid cropped to the 10^4 centers nearest the origin
    g = np.arange(-60, 61) * 2.0
    X = np.array([[x, y] for x in g for y in g])
    X = X[np.lexsort((X[:, 1], X[:, 0], np.round(np.linalg.norm(X, axis=1), 9)))[:10_000]]
    R = float(np.linalg.norm(X, axis=1).max())
    assert check_lemma_Mi_bound(Body.square(), 1, 10_000, 1, R).passed


def test_theorem_threshold_values():
    r, R = 1.0, 1.0
    assert theorem_threshold(2, 1, r, R, math.pi / 4) == pytest.approx(5215.189175235226, rel=1e-12)
    assert theorem_threshold(2, 1, r, R, HEX) == pytest.approx(4516.486311295320, rel=1e-12)


def test_check_theorem_n5000_per_endpoint():
    res = minimize_Mi(5000, D, 1, schedule=AnnealSchedule(epochs=1, moves_per_epoch=2000, polish_epochs=0))
    records = {r.name: r for r in check_theorem(res.packing, 1, result=res, density=INTERVAL)}
    assert records["theorem_threshold[delta_lower]"].verdict == NOT_APPLICABLE
    assert records["theorem_threshold[delta_lower]"].rhs == pytest.approx(5215.189175235226)
    assert records["theorem_threshold[delta_upper]"].verdict == PASS
    assert records["theorem_threshold[delta_upper]"].rhs == pytest.approx(4516.486311295320)
    assert records["theorem_shape_bound"].verdict == INFORMATIONAL
    assert records["theorem_sigma[delta_lower]"].verdict == INFORMATIONAL
    assert records["theorem_sigma[delta_upper]"].semantics == HEURISTIC
    assert records["theorem_minimality"].passed


def test_check_theorem_sausage_pair():
    P = initial_configuration(2, D, 1, "sausage")
    records = {r.name: r for r in check_theorem(P, 1)}
    assert records["theorem_threshold[delta_lower]"].verdict == NOT_APPLICABLE
    assert records["theorem_threshold[delta_upper]"].verdict == NOT_APPLICABLE
    shape = records["theorem_shape_bound"]
    assert shape.verdict == INFORMATIONAL and shape.details["ratio"] == pytest.approx(0.5)
    assert records["theorem_minimality"].passed


def test_check_theorem_square_body_large_rho():
    P = initial_configuration(200, Body.square(), 20, "grid")
    records = check_theorem(P, 1)
    sigma = [r for r in records if r.name.startswith("theorem_sigma")]
    assert len(sigma) == 2 and all(np.isfinite(r.lhs) for r in sigma)
    assert all(r.verdict == INFORMATIONAL for r in sigma)


def test_theorem_context():
    ctx = TheoremContext.build(Body.square(), 2, 100)
    assert (ctx.r_C, ctx.R_C, ctx.vol_C) == pytest.approx((1, math.sqrt(2), 4))
    assert ctx.kappa_d == pytest.approx(math.pi) and ctx.kappa_i == pytest.approx(2)
    with pytest.raises(ValueError):
        TheoremContext.build(D, 1, 10, i=3)


def test_rearrangement_matches_final_estimate():
    rng = np.random.default_rng(8)
    for _ in range(20):
        d = int(rng.integers(2, 6))
        n = int(rng.integers(2, 10**7))
        rho = float(rng.uniform(1, 10))
        r_C = float(rng.uniform(0.3, 1))
        R_C = r_C * float(rng.uniform(1, 3))
        delta = float(rng.uniform(0.1, 1))
        bound = shape_bound(d, n, rho, r_C, R_C, delta)
        for ratio in (0.0, 0.5, 0.99, 1 - 0.9 * bound, 1 - 1.1 * bound):
            if not 0 <= ratio <= 1:
                continue
            assert final_estimate_holds(d, n, rho, r_C, R_C, delta, ratio) == (1 - ratio <= bound)


def test_rearrangement_symbolic():
    k, n, rho, r, R, delta, th = sympy.symbols("k n rho r R delta theta", positive=True)
    d = k + 1  # d >= 2 enters through k = d - 1 > 0
    left = 4 * d**2 * (d - 1) * rho * R / (delta * r) * n ** (-1 / d)
    omega = (4 * d**2 * (d - 1) * rho * R / (th * delta * r)) ** (2 / (d + 3))
    bound = omega * n ** (-2 / (d * (d + 3)))
    # equality case: theta * bound^((d+3)/2) reproduces the left side
    assert sympy.simplify(sympy.powsimp(sympy.expand_power_base(th * bound ** ((d + 3) / 2), force=True),
                                        force=True) - left) == 0
    assert derived_omega(2, 1, 1, 1, HEX) == pytest.approx((16 / (theta(2) * HEX)) ** 0.4)


def test_sublemma_examples():
    X = box_container(2)
    same = check_sublemma(X, X, D, 1)
    assert same.verdict == INFORMATIONAL
    Y = box_container(4)
    diff = minkowski_difference_body(Y, X)
    assert diff.polytope.intrinsic[2] == pytest.approx(144)
    rec = check_sublemma(box_container(4), box_container(2), D, 1)
    assert rec.semantics == HEURISTIC and rec.verdict in (PASS, FAIL)
    assert rec.details["nu_X"] >= rec.details["nu_Y"]


def test_run_suite_and_exact_failures():
    _, pts = square_cell(10)
    P = Packing(D, 6, pts)
    records = run_suite(P, "exact")
    assert records and not exact_failures(records)
    assert [r.name for r in records] == sorted(r.name for r in records)
    everything = run_suite(Packing(D, 1, [[0, 0], [2, 0], [1, 2]]), "all")
    assert not exact_failures(everything)
    with pytest.raises(ValueError):
        run_suite(P, "bogus")


def test_record_digest_reproducible():
    a = check_stability(SQUARE)
    b = check_stability(Hull(convex_hull([(1, 1), (-1, 1), (-1, -1), (1, -1)])))
    assert a.inputs_digest == b.inputs_digest and a.to_dict() == b.to_dict()


def test_kappa_consistency_with_context():
    assert kappa(3) == pytest.approx(TheoremContext.build(Body.ball(1, 3), 1, 10).kappa_d)
