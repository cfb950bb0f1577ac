"""Deterministic SVG drawings of planar packings."""

from __future__ import annotations

import math

import numpy as np

from .geometry import Packing, circumradius_hull, hull_of_packing, inradius_hull


class UnsupportedRenderError(ValueError):
    pass


def _f(x: float) -> str:
    return f"{x:.6f}".rstrip("0").rstrip(".")


def _hull_path(P: Packing, flip) -> str:
    body = P.body
    Q = hull_of_packing(P)
    V = Q.polytope.vertices
    if not body.is_ball:
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in map(flip, V))
        return f'<polygon class="hull" points="{pts}" fill="none" stroke="#c0392b" stroke-width="0.06"/>'
    r = body.radius
    if len(V) == 1:
        cx, cy = flip(V[0])
        return f'<circle class="hull" cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(r)}" fill="none" stroke="#c0392b" stroke-width="0.06"/>'
    if Q.polytope.affine_dim == 1:
        V = np.array([V[0], V[1]])
    k = len(V)
    parts = []
    for a in range(k):
        p, q, s = V[a], V[(a + 1) % k], V[(a + 2) % k]
        e = q - p
        n = np.array([e[1], -e[0]]) / np.hypot(*e)
        f2 = s - q
        n2 = np.array([f2[1], -f2[0]]) / np.hypot(*f2)
        p1, q1, q2 = p + r * n, q + r * n, q + r * n2
        if a == 0:
            parts.append("M {} {}".format(*map(_f, flip(p1))))
        parts.append("L {} {}".format(*map(_f, flip(q1))))
        turn = (math.atan2(n2[1], n2[0]) - math.atan2(n[1], n[0])) % (2 * math.pi)
        large = 1 if turn > math.pi else 0
        # the y axis flips, so counterclockwise arcs become clockwise (sweep 0)
        parts.append(f"A {_f(r)} {_f(r)} 0 {large} 0 {_f(flip(q2)[0])} {_f(flip(q2)[1])}")
    parts.append("Z")
    return f'<path class="hull" d="{" ".join(parts)}" fill="none" stroke="#c0392b" stroke-width="0.06"/>'


def render_svg(P: Packing, certificates=None) -> str:
    if P.dim != 2:
        raise UnsupportedRenderError("only planar packings can be rendered")
    body = P.body
    Q = hull_of_packing(P)
    R, cR = circumradius_hull(Q)
    r, cr = inradius_hull(Q)
    pad = 0.5 + 0.05 * R
    lo = cR - R - pad
    size = 2 * (R + pad)

    def flip(p):
        return (float(p[0]), float(2 * cR[1] - p[1]))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{_f(lo[0])} {_f(lo[1])} {_f(size)} {_f(size)}" '
        f'width="600" height="600">'
    ]
    out.append('<g class="bodies">')
    for c in P.centers:
        x, y = flip(c)
        if body.is_ball:
            out.append(f'<circle class="body" cx="{_f(x)}" cy="{_f(y)}" r="{_f(body.radius)}" fill="#aed6f1" stroke="#1b4f72" stroke-width="0.03"/>')
        else:
            pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in map(flip, c + body.vertices))
            out.append(f'<polygon class="body" points="{pts}" fill="#aed6f1" stroke="#1b4f72" stroke-width="0.03"/>')
    out.append("</g>")
    out.append(_hull_path(P, flip))
    x, y = flip(cr)
    out.append(f'<circle class="inradius" cx="{_f(x)}" cy="{_f(y)}" r="{_f(r)}" fill="none" stroke="#27ae60" stroke-width="0.05"/>')
    x, y = flip(cR)
    out.append(f'<circle class="circumradius" cx="{_f(x)}" cy="{_f(y)}" r="{_f(R)}" fill="none" stroke="#8e44ad" stroke-width="0.05"/>')
    if certificates:
        out.append('<g class="certificates">')
        span = 2 * (R + pad)
        for cert in certificates:
            u, b = cert.plane.normal, cert.plane.offset
            t = np.array([-u[1], u[0]])
            # foot of the perpendicular from the drawing center
            foot = cR + (b - cR @ u) * u
            a0, a1 = flip(foot - span * t), flip(foot + span * t)
            out.append(
                f'<line class="certificate" x1="{_f(a0[0])}" y1="{_f(a0[1])}" x2="{_f(a1[0])}" y2="{_f(a1[1])}" '
                f'stroke="#7f8c8d" stroke-width="0.02"/>'
            )
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
