"""Concrete evaluation of the shape and density inequalities.

Where a quantity is only known through bounds (the separable density, R_C,
nu_C) each check substitutes the endpoint that turns the inequality into a
consequence that can actually be certified; the other endpoint is reported
in the record details.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .density import DensityEstimate, reference_density, union_volume
from .geometry import (
    DEFAULT_RTOL,
    Body,
    Hull,
    Packing,
    body_radii,
    convex_hull,
    hull_of_packing,
    inradius_hull,
    circumradius_hull,
    kappa,
    min_enclosing_ball,
)
from .quermass import _as_hull, af_ball_lower_bound, mean_projection, surface_area, volume
from .records import (
    CERTIFIED,
    EXACT,
    FAIL,
    GE,
    HEURISTIC,
    INFORMATIONAL,
    LE,
    NOT_APPLICABLE,
    PASS,
    InequalityRecord,
    compare,
    digest,
)
from .separability import check_packing, rho_separable


class UnverifiedPackingError(ValueError):
    pass


def theta(d: int) -> float:
    if d < 2:
        raise ValueError("theta needs d >= 2")
    lead = 1.0 / (2 ** ((d + 3) / 2) * math.sqrt(2 * math.pi) * math.sqrt(d) * (d - 1) * (d + 3))
    return lead * min(3 / (math.pi**2 * d * (d + 2) * 2**d), 16 / (d * math.pi) ** ((d - 1) / 4))


def derived_omega(d: int, rho: float, r_C: float, R_C: float, delta: float) -> float:
    """Shape constant obtained by solving the final estimate of the proof chain for 1 - r/R."""
    return (4 * d * d * (d - 1) * rho * R_C / (theta(d) * delta * r_C)) ** (2 / (d + 3))


def shape_bound(d: int, n: int, rho: float, r_C: float, R_C: float, delta: float) -> float:
    """Upper bound on 1 - r(Q)/R(Q): derived omega times n^(-2/(d(d+3)))."""
    return derived_omega(d, rho, r_C, R_C, delta) * n ** (-2 / (d * (d + 3)))


def final_estimate_holds(d, n, rho, r_C, R_C, delta, ratio) -> bool:
    """The unrearranged form: 4d^2(d-1) rho R/(delta r) n^(-1/d) >= theta (1 - r/R)^((d+3)/2)."""
    left = 4 * d * d * (d - 1) * rho * R_C / (delta * r_C) * n ** (-1 / d)
    return left >= theta(d) * (1 - ratio) ** ((d + 3) / 2)


def theorem_threshold(d: int, rho: float, r_C: float, R_C: float, delta: float) -> float:
    return 4**d * d ** (4 * d) / delta ** (d - 1) * (rho * R_C / r_C) ** d


def lemma_Mi_threshold(d: int, rho: float, r_C: float, R_C: float, delta: float) -> float:
    return 4**d * delta * rho**d * R_C**d / r_C**d


@dataclass(frozen=True)
class TheoremContext:
    d: int
    i: int
    rho: float
    n: int
    r_C: float
    R_C: float
    vol_C: float
    delta_lower: float
    delta_upper: float
    kappa_d: float
    kappa_i: float

    @classmethod
    def build(cls, body: Body, rho: float, n: int, i: int = 1, density: DensityEstimate | None = None):
        d = body.dim
        if not 1 <= i <= d:
            raise ValueError(f"projection index {i} outside 1..{d}")
        est = density or reference_density(body, rho)
        r, R = body_radii(body)
        return cls(d, i, float(rho), int(n), r, R, body.volume, float(est.lower), float(est.upper), kappa(d), kappa(i))

    def to_dict(self) -> dict:
        return asdict(self)


def _within(name, value, lo, hi, semantics, inputs, details=None, applicable=True, rtol=1e-9):
    """Record for lo <= value <= hi; the margin is the distance to the nearer end."""
    margin = min(value - lo, hi - value)
    tol = rtol * max(1.0, abs(value), abs(lo), abs(hi))
    if not applicable:
        verdict = NOT_APPLICABLE
    elif semantics == INFORMATIONAL:
        verdict = INFORMATIONAL
    else:
        verdict = PASS if margin >= -tol else FAIL
    return InequalityRecord(
        name, float(value), float(hi), LE, float(margin), semantics, verdict, digest(inputs), tol,
        {"window": [float(lo), float(hi)], **(details or {})},
    )


def _informational(record: InequalityRecord) -> InequalityRecord:
    record.verdict = INFORMATIONAL
    record.semantics = INFORMATIONAL
    return record


# ------------------------------------------------------------ convex body checks


def check_stability(Q, rtol: float = 1e-9) -> InequalityRecord:
    """Isoperimetric deficit against theta(d) (1 - r/R)^((d+3)/2)."""
    Q = _as_hull(Q)
    d = Q.dim
    S, vol = surface_area(Q), volume(Q)
    r, _ = inradius_hull(Q)
    R, _ = circumradius_hull(Q)
    deficit = (S / (d * kappa(d))) ** d * (kappa(d) / vol) ** (d - 1) - 1
    rhs = theta(d) * max(0.0, 1 - r / R) ** ((d + 3) / 2)
    return compare("stability", deficit, rhs, GE, EXACT,
                   inputs={"S": S, "vol": vol, "r": r, "R": R, "d": d}, rtol=rtol,
                   details={"inradius": r, "circumradius": R, "surface_area": S, "volume": vol})


def check_sr_vol(Q, rtol: float = 1e-9) -> InequalityRecord:
    Q = _as_hull(Q)
    S, vol = surface_area(Q), volume(Q)
    r, _ = inradius_hull(Q)
    return compare("surface_inradius_volume", S * r, vol, GE, EXACT,
                   inputs={"S": S, "r": r, "vol": vol}, rtol=rtol)


# ------------------------------------------------------------ density-side checks


def _require_verified(P: Packing, rtol: float):
    if not check_packing(P, rtol).ok:
        raise UnverifiedPackingError("translates overlap")
    if not rho_separable(P, rtol=rtol).separable:
        raise UnverifiedPackingError("packing is not rho-separable")


def check_lemma_density(
    P: Packing,
    delta_upper: float | None = None,
    method: str | None = None,
    samples: int = 1_000_000,
    seed: int = 0,
    verify: bool = True,
    rtol: float = DEFAULT_RTOL,
) -> InequalityRecord:
    """n vol(C) / vol(union of c_i + 2 rho C) <= delta_upper."""
    if verify:
        _require_verified(P, rtol)
    if delta_upper is None:
        delta_upper = reference_density(P.body, P.rho).upper
    if method is None:
        method = "exact-disk" if P.body.is_ball and P.dim == 2 else "monte-carlo"
    area, err = union_volume(P, 2 * P.rho, method=method, samples=samples, seed=seed)
    # the Monte Carlo error is charged against the check
    lhs = P.n * P.body.volume / (area - err)
    semantics = CERTIFIED
    return compare(
        "lemma_density", lhs, delta_upper, LE, semantics,
        inputs={"centers": P.centers, "rho": P.rho, "body": P.body.to_dict(), "method": method,
                "samples": samples, "seed": seed},
        rtol=1e-9,
        details={"union_volume": area, "union_error": err, "method": method},
    )


def check_nu_volume_sandwich(K: Hull, body: Body, rho: float, nu_lb: int,
                             density: DensityEstimate | None = None) -> list[InequalityRecord]:
    """Certified lower side of the container-volume sandwich, then the upper side informationally."""
    K = _as_hull(K)
    d = body.dim
    est = density or reference_density(body, rho)
    vol_K = volume(K)
    r_K, _ = inradius_hull(K)
    _, R_C = body_radii(body)
    factor = 0.0 if r_K == 0 else (1 + 2 * rho * R_C / r_K) ** (-d)
    rhs = factor * body.volume * nu_lb / est.upper
    inputs = {"K": K.polytope.vertices, "offset": K.offset, "body": body.to_dict(), "rho": rho, "nu_lb": nu_lb}
    certified = compare("nu_volume_sandwich_lower", vol_K, rhs, GE, CERTIFIED, inputs=inputs,
                        details={"inradius_K": r_K, "delta_upper": est.upper})
    upper = compare("nu_volume_sandwich_upper", vol_K, body.volume * nu_lb / est.lower, LE, INFORMATIONAL,
                    inputs=inputs,
                    details={"at_delta_lower": body.volume * nu_lb / est.lower,
                             "at_delta_upper": body.volume * nu_lb / est.upper,
                             "note": "needs the exact nu and delta; nu_lb is only a lower bound"})
    return [certified, upper]


def check_eq2(body: Body, rho: float, n: int, R_upper: float,
              density: DensityEstimate | None = None) -> list[InequalityRecord]:
    """vol(C) n / (delta_upper kappa_d) <= (R_upper + 2 rho R(C))^d, then the left side informationally."""
    d = body.dim
    est = density or reference_density(body, rho)
    _, R_C = body_radii(body)
    lhs = body.volume * n / (est.upper * kappa(d))
    rhs = (R_upper + 2 * rho * R_C) ** d
    inputs = {"body": body.to_dict(), "rho": rho, "n": n, "R_upper": R_upper}
    main = compare("eq2_upper", lhs, rhs, LE, CERTIFIED, inputs=inputs,
                   details={"delta_upper": est.upper})
    left = compare("eq2_lower", R_upper**d, body.volume * n / (est.lower * kappa(d)), LE, INFORMATIONAL,
                   inputs=inputs,
                   details={"at_delta_lower": body.volume * n / (est.lower * kappa(d)),
                            "at_delta_upper": lhs,
                            "note": "R_upper only bounds R_C from above"})
    return [main, left]


def check_lemma_Mi_bound(body: Body, rho: float, n: int, i: int, R_upper: float,
                         density: DensityEstimate | None = None) -> InequalityRecord:
    """Mean projection of the ball (R + rho R(C)) B against the volume-derived bound.

    The hypothesis on n is evaluated at delta_upper. delta_lower enters the
    volume factor and delta_upper the correction term, which makes the
    substituted right-hand side at least as large as the true one.
    """
    d = body.dim
    est = density or reference_density(body, rho)
    r_C, R_C = body_radii(body)
    need = lemma_Mi_threshold(d, rho, r_C, R_C, est.upper)
    lhs = kappa(i) * (R_upper + rho * R_C) ** i
    rhs = (
        kappa(i)
        * (body.volume * n / (est.lower * kappa(d))) ** (i / d)
        * (1 + 2 * est.upper ** (1 / d) * rho * R_C / r_C * n ** (-1 / d)) ** i
    )
    return compare(
        "lemma_Mi_bound", lhs, rhs, LE, CERTIFIED,
        inputs={"body": body.to_dict(), "rho": rho, "n": n, "i": i, "R_upper": R_upper},
        applicable=n >= need,
        details={"threshold": need, "volume_factor_delta": "lower", "correction_delta": "upper",
                 "R": "R_upper bounds R_C from above"},
    )


# ------------------------------------------------------------ the main estimate


def check_theorem(
    P: Packing,
    i: int = 1,
    result=None,
    R_upper: float | None = None,
    ball_witness: Packing | None = None,
    density: DensityEstimate | None = None,
) -> list[InequalityRecord]:
    """Threshold applicability, derived shape bound, sigma window and the minimality bound.

    ``result`` (an OptimizationResult) only marks that P came from the
    heuristic minimizer. Without ``R_upper`` the minimum enclosing ball of
    the centers serves as the witness for an upper bound on R_C(rho, n).
    """
    body = P.body
    d, n, rho = body.dim, P.n, P.rho
    est = density or reference_density(body, rho)
    r_C, R_C = body_radii(body)
    Q = hull_of_packing(P)
    rQ, _ = inradius_hull(Q)
    RQ, _ = circumradius_hull(Q)
    ratio = rQ / RQ
    inputs = {"centers": P.centers, "rho": rho, "body": body.to_dict(), "i": i}
    records = []

    applicable = {}
    for tag, delta in (("delta_lower", est.lower), ("delta_upper", est.upper)):
        need = theorem_threshold(d, rho, r_C, R_C, delta)
        applicable[tag] = n >= need
        records.append(compare(f"theorem_threshold[{tag}]", n, need, GE, EXACT, inputs=inputs,
                               applicable=n >= need, details={"delta": delta}))

    # shape bound; delta_lower is conservative for it
    bound = shape_bound(d, n, rho, r_C, R_C, est.lower)
    shape = compare("theorem_shape_bound", 1 - ratio, bound, LE, HEURISTIC, inputs=inputs,
                    details={"ratio": ratio, "derived_omega": derived_omega(d, rho, r_C, R_C, est.lower),
                             "theta": theta(d), "delta": est.lower,
                             "note": "a violation means a suboptimal minimizer or a defect; these cannot be told apart"})
    records.append(shape if applicable["delta_lower"] else _informational(shape))

    Mi = float(mean_projection(Q, i))
    for tag, delta in (("delta_lower", est.lower), ("delta_upper", est.upper)):
        base = kappa(i) * (body.volume * n / (delta * kappa(d))) ** (i / d)
        sigma = (Mi / base - 1) * n ** (1 / d)
        lo = -2.25 * R_C * rho * d * i / (r_C * delta)
        hi = 2.1 * R_C * rho * i / (r_C * delta)
        rec = _within(f"theorem_sigma[{tag}]", sigma, lo, hi, HEURISTIC, inputs, {"delta": delta, "M_i": Mi})
        records.append(rec if applicable[tag] else _informational(rec))

    if R_upper is None:
        c, R_upper = min_enclosing_ball(P.centers)
        ball_witness = P.with_centers(P.centers - c)
    ball_value = kappa(i) * (R_upper + rho * R_C) ** i
    beats = True
    if ball_witness is not None:
        beats = Mi <= float(mean_projection(hull_of_packing(ball_witness), i)) * (1 + 1e-12)
    records.append(compare("theorem_minimality", Mi, ball_value, LE, EXACT if beats else HEURISTIC, inputs=inputs,
                           details={"R_upper": R_upper, "beats_ball_construction": beats,
                                    "heuristic_minimizer": result is not None}))
    return records


# ------------------------------------------------------------ sublemma


def minkowski_difference_body(X: Hull, Y: Hull) -> Hull:
    """X - Y = X + (-Y) for polytope-plus-ball containers."""
    A, B = X.polytope.vertices, Y.polytope.vertices
    sums = (A[:, None, :] - B[None, :, :]).reshape(-1, A.shape[1])
    return Hull(convex_hull(sums, allow_degenerate=True), X.offset + Y.offset)


def check_sublemma(X: Hull, Y: Hull, body: Body, rho: float,
                   nu_X: int | None = None, nu_Y: int | None = None, seed: int = 0) -> InequalityRecord:
    """nu(Y) >= vol(Y) nu(X) / vol(X - Y) - 1 with certified lower bounds on both sides."""
    from .optimizer import nu_lower

    if nu_X is None:
        nu_X = nu_lower(body, rho, X, seed=seed)[0]
    if nu_Y is None:
        nu_Y = nu_lower(body, rho, Y, seed=seed)[0]
    vol_XY = volume(minkowski_difference_body(X, Y))
    rhs = volume(Y) * nu_X / vol_XY - 1
    same = X is Y or (X.offset == Y.offset and np.array_equal(X.polytope.vertices, Y.polytope.vertices))
    rec = compare("sublemma", nu_Y, rhs, GE, HEURISTIC,
                  inputs={"X": X.polytope.vertices, "Y": Y.polytope.vertices, "rho": rho, "body": body.to_dict()},
                  details={"nu_X": nu_X, "nu_Y": nu_Y, "vol_X_minus_Y": vol_XY, "slack": 1})
    return _informational(rec) if same else rec


# ------------------------------------------------------------ suites


def exact_suite(P: Packing) -> list[InequalityRecord]:
    Q = hull_of_packing(P)
    return [check_stability(Q), check_sr_vol(Q), *af_ball_lower_bound(Q)]


def certified_suite(P: Packing, density: DensityEstimate | None = None) -> list[InequalityRecord]:
    """Density-side checks with the packing itself as witness.

    The packing is its own witness for nu(conv centers) >= n and, centered at
    the minimum enclosing ball of its centers, for R_C(rho, n) <= that radius.
    """
    body = P.body
    est = density or reference_density(body, P.rho)
    records = [check_lemma_density(P, est.upper, verify=False)]
    K = Hull(convex_hull(P.centers, allow_degenerate=True), 0.0)
    if K.polytope.affine_dim == P.dim:
        records += check_nu_volume_sandwich(K, body, P.rho, P.n, est)
    _, R_up = min_enclosing_ball(P.centers)
    records += check_eq2(body, P.rho, P.n, R_up, est)
    for i in range(1, P.dim):
        rec = check_lemma_Mi_bound(body, P.rho, P.n, i, R_up, est)
        rec.name = f"lemma_Mi_bound[i={i}]"
        records.append(rec)
    return records


def run_suite(P: Packing, suite: str = "all", i: int = 1, rtol: float = DEFAULT_RTOL) -> list[InequalityRecord]:
    if suite not in ("exact", "certified", "theorem", "all"):
        raise ValueError(f"unknown suite {suite!r}")
    _require_verified(P, rtol)
    records = []
    if suite in ("exact", "all"):
        records += exact_suite(P)
    if suite in ("certified", "all"):
        records += certified_suite(P)
    if suite in ("theorem", "all"):
        records += check_theorem(P, i)
    return sorted(records, key=lambda r: r.name)


def exact_failures(records) -> list[InequalityRecord]:
    return [r for r in records if r.semantics == EXACT and r.verdict == FAIL]
