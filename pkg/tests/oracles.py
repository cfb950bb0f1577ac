"""Independent reference computations used by the tests."""

from __future__ import annotations

import math

import numpy as np


def random_disk_packing(rng, n_max=8, box=10.0, radius=1.0, tries=2000):
    """Up to ``n_max`` non-overlapping disks with centers uniform in a box."""
    n = int(rng.integers(2, n_max + 1))
    pts = []
    for _ in range(tries):
        p = rng.uniform(radius, box - radius, size=2)
        if all(np.hypot(*(p - q)) >= 2 * radius for q in pts):
            pts.append(p)
            if len(pts) == n:
                break
    return np.array(pts)


def brute_force_separable(centers, radius=1.0, n_dir=3600, n_off=2000):
    """Pairs (i, j) separated by some line of a (theta, b) grid.

    Directions are ``pi k / n_dir``; offsets form a uniform grid of ``n_off``
    values over the projected range. A line at offset b misses the interior
    of disk k iff |b - c_k.u| >= r. For each direction the free offsets are
    the gaps between the merged open intervals, and a pair is separated if
    one grid offset lies in a free gap between the two disks.
    """
    C = np.asarray(centers, dtype=float)
    m = len(C)
    L = float(np.abs(C).max()) + radius + 1.0
    b0, db = -L * math.sqrt(2), 2 * L * math.sqrt(2) / (n_off - 1)
    theta = np.pi * np.arange(n_dir) / n_dir
    U = np.column_stack([np.cos(theta), np.sin(theta)])
    proj = U @ C.T  # (D, m)
    order = np.argsort(proj, axis=1)
    s = np.take_along_axis(proj, order, axis=1)
    lo, hi = s - radius, s + radius
    reach = np.maximum.accumulate(hi, axis=1)
    # gap t lies between sorted positions t and t+1
    gap_lo, gap_hi = reach[:, :-1], lo[:, 1:]
    first = np.ceil((gap_lo - b0) / db - 1e-9)
    last = np.floor((gap_hi - b0) / db + 1e-9)
    has_point = last >= first  # (D, m-1)
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.arange(m)[None, :].repeat(len(U), 0), axis=1)
    csum = np.concatenate([np.zeros((len(U), 1), dtype=int), np.cumsum(has_point, axis=1)], axis=1)
    out = np.zeros((m, m), dtype=bool)
    for i in range(m):
        for j in range(i + 1, m):
            a = np.minimum(rank[:, i], rank[:, j])
            b = np.maximum(rank[:, i], rank[:, j])
            # any gap with index in [a, b) holding a grid offset
            hits = np.take_along_axis(csum, b[:, None], 1) - np.take_along_axis(csum, a[:, None], 1)
            out[i, j] = out[j, i] = bool((hits > 0).any())
    return out


def stadium_m1(distance, radius=1.0):
    """Mean width of the hull of two disks: perimeter / pi."""
    return (2 * math.pi * radius + 2 * distance) / math.pi


def lens_area(r, d):
    return 2 * r * r * math.acos(d / (2 * r)) - 0.5 * d * math.sqrt(4 * r * r - d * d)

