"""Cantor-cone domains: digit statistics, separating arcs, measure bounds.

The domain is the union of slope-1/a cones over the depth-n Cantor
construction, realized as a graph epigraph. Theta(s) is the angular width
of the arc of the circle of radius s around a base point that separates it
from the pole; the exponential-integral bound it feeds is compared with a
directly solved harmonic measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .geometry import CantorCone, CoefficientField, _cantor_graph
from .solver import harmonic_measure, shear_mesh

__all__ = [
    "CantorSpec",
    "cantor_intervals",
    "digit_frequencies",
    "theta",
    "ahlfors_bound",
    "measured_density",
    "cantor_dimension",
    "sample_normal_point",
    "cantor_mesh",
]


@dataclass(frozen=True)
class CantorSpec:
    """lambda = 1/(2k+1) Cantor set, cones of slope 1/a, truncation depth."""

    k: int = 1
    depth: int = 6
    aperture: float = 1.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if not self.aperture > 0:
            raise ValueError("aperture must be positive")

    @property
    def lam(self):
        return Fraction(1, 2 * self.k + 1)

    @property
    def slope(self):
        return 1.0 / self.aperture

    @property
    def hausdorff_dimension(self):
        lam = float(self.lam)
        return math.log(2.0) / math.log(2.0 / (1.0 - lam))

    def domain(self, box=(-0.55, 1.55, -0.1, 1.25)):
        return CantorCone(k=self.k, depth=self.depth, aperture=self.aperture,
                          box=box)

    def smallest_gap(self):
        lam = self.lam
        return float(lam * ((1 - lam) / 2) ** (self.depth - 1))


def cantor_intervals(spec: CantorSpec, depth=None):
    """The 2^depth closed intervals of E_depth with exact rational ends."""
    depth = spec.depth if depth is None else depth
    if depth > 20:
        raise ValueError("depth must be <= 20")
    lam = spec.lam
    scale = (1 - lam) / 2
    shift = (1 + lam) / 2
    ivs = [(Fraction(0), Fraction(1))]
    for _ in range(depth):
        ivs = [(a * scale, b * scale) for a, b in ivs] \
            + [(shift + a * scale, shift + b * scale) for a, b in ivs]
    ivs.sort()
    return ivs


def digit_frequencies(x, k, n_digits):
    """Counts of the first n_digits base-(2k+1) digits of x in [0, 1]."""
    base = 2 * k + 1
    if isinstance(x, Fraction):
        v = x
    else:
        v = Fraction(x).limit_denominator(10 ** 18) if not isinstance(x, int) \
            else Fraction(x)
    if not 0 <= v <= 1:
        raise ValueError("x must lie in [0, 1]")
    counts = np.zeros(base, dtype=np.int64)
    for _ in range(n_digits):
        v *= base
        d = int(v)
        if d == base:          # x = 1 edge
            d = base - 1
        counts[d] += 1
        v -= d
    return counts


def sample_normal_point(spec: CantorSpec, n_digits, seed):
    """Pseudo-random Cantor point from seeded uniform allowed-digit draws."""
    base = 2 * spec.k + 1
    allowed = [d for d in range(base) if d != spec.k]
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    digits = rng.integers(0, len(allowed), size=n_digits)
    x = Fraction(0)
    p = Fraction(1)
    for d in digits:
        p /= base
        x += allowed[int(d)] * p
    return x


def _graph_arrays(spec: CantorSpec, box):
    """Boundary polyline of the untruncated cone union over the box range
    (Theta is a property of the cones alone; the outer truncation never
    meets the circles with s <= 1)."""
    bp = _cantor_graph(spec.k, spec.depth, spec.slope, box)
    xs = np.array([p[0] for p in bp])
    ys = np.array([p[1] for p in bp])
    sl = np.diff(ys) / np.diff(xs)

    def phi(x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(sl) - 1)
        return ys[idx] + sl[idx] * (x - xs[idx])

    return phi, xs, ys


def theta(spec: CantorSpec, x, s, box=(-1.6, 2.6, -0.1, 2.1)):
    """Angle of the separating arc of the circle of radius s around (x, 0).

    Exact circle-segment intersections over the finitely many cone walls
    give the crossing angles; the component through the vertical direction
    (the segment toward the pole) is returned. Always in (0, pi].
    """
    if not 0 < s <= 1.0:
        raise ValueError("s must be in (0, 1]")
    x = float(x)
    phi_fn, xs, ys = _graph_arrays(spec, box)
    cx, cy = x, 0.0
    crossings = []
    # extend the polyline with its terminal wing slopes far enough
    span = 2.0 * s + 1.0
    m = spec.slope
    ax = np.concatenate([[xs[0] - span], xs, [xs[-1] + span]])
    ay = np.concatenate([[ys[0] + span * m], ys, [ys[-1] + span * m]])
    for (xa, ya), (xb, yb) in zip(zip(ax[:-1], ay[:-1]), zip(ax[1:], ay[1:])):
        dx, dy = xb - xa, yb - ya
        fa = (xa - cx, ya - cy)
        A = dx * dx + dy * dy
        B = 2 * (fa[0] * dx + fa[1] * dy)
        C = fa[0] ** 2 + fa[1] ** 2 - s * s
        disc = B * B - 4 * A * C
        if disc <= 0 or A == 0:
            continue
        sq = math.sqrt(disc)
        for t in ((-B - sq) / (2 * A), (-B + sq) / (2 * A)):
            if 0.0 <= t <= 1.0:
                px, py = xa + t * dx, ya + t * dy
                phi = math.atan2(py - cy, px - cx)
                if 0.0 < phi < math.pi:
                    crossings.append(phi)
    knots = np.array(sorted({0.0, math.pi, *crossings}))

    def inside(phi):
        px = cx + s * math.cos(phi)
        py = cy + s * math.sin(phi)
        return py > float(phi_fn(np.array([px]))[0])

    if not inside(math.pi / 2):
        raise ValueError("vertical direction blocked; no separating arc")
    i = int(np.searchsorted(knots, math.pi / 2)) - 1
    lo, hi = i, i + 1
    while lo > 0 and inside(0.5 * (knots[lo - 1] + knots[lo])):
        lo -= 1
    while hi < len(knots) - 1 and inside(0.5 * (knots[hi] + knots[hi + 1])):
        hi += 1
    return float(knots[hi] - knots[lo])


def ahlfors_bound(spec: CantorSpec, x, r, theta_fn=None, pts_per_decade=512):
    """Exponential-integral upper bound for omega(B((x,0), r)).

    (8/pi) exp(-pi * int_r^1 ds/(s Theta(s))) with the integral on a
    log-uniform grid. A synthetic theta_fn override replaces the exact
    separating-arc angles (used by the closed-form checks).
    """
    if not 1e-4 < r < 1.0:
        raise ValueError("r must be in (1e-4, 1)")
    fn = theta_fn if theta_fn is not None else (lambda s: theta(spec, x, s))
    n = max(8, math.ceil(pts_per_decade * math.log10(1.0 / r)))
    ls = np.linspace(math.log(r), 0.0, n + 1)
    vals = np.array([1.0 / fn(math.exp(l)) for l in ls])
    integral = float(np.trapezoid(vals, ls))
    return {
        "r": r,
        "integral": integral,
        "bound": (8.0 / math.pi) * math.exp(-math.pi * integral),
    }


def cantor_mesh(spec: CantorSpec, h, box=(-0.55, 1.55, -0.1, 1.25),
                fine_window=(-0.05, 1.05), y_grade=1.09, x_grade=1.1):
    """Graded shear mesh: columns at h inside the window plus breakpoints,
    geometric wings; rows geometric from thickness h at the graph."""
    dom = spec.domain(box)
    x0, x1, _, ytop = box
    a, b = fine_window
    fine = np.arange(a, b + h / 2, h)
    left = [a]
    step = h
    while left[-1] - step * x_grade > x0:
        step *= x_grade
        left.append(left[-1] - step)
    right = [b]
    step = h
    while right[-1] + step * x_grade < x1:
        step *= x_grade
        right.append(right[-1] + step)
    bps = [p for p in dom._xs if x0 < p < x1]
    xs = np.unique(np.concatenate([
        np.asarray(left), fine, np.asarray(right), [x0, x1], np.asarray(bps)]))
    xs = np.clip(xs, x0, x1)
    keep = np.concatenate([[True], np.diff(xs) > h * 1e-3])
    keep[-1] = True                       # never drop the right edge
    xs = xs[keep]
    if xs[-1] - xs[-2] <= h * 1e-3:       # collapsed next-to-last column
        xs = np.delete(xs, -2)
    return shear_mesh(dom, h, xs=xs, y_grade=y_grade)


def _clip_polyline_to_disk(xs, ys, cx, cy, r):
    """Sub-segments of a polyline inside the disk B((cx,cy), r)."""
    out = []
    for (xa, ya), (xb, yb) in zip(zip(xs[:-1], ys[:-1]), zip(xs[1:], ys[1:])):
        dx, dy = xb - xa, yb - ya
        A = dx * dx + dy * dy
        if A == 0:
            continue
        B = 2 * ((xa - cx) * dx + (ya - cy) * dy)
        C = (xa - cx) ** 2 + (ya - cy) ** 2 - r * r
        disc = B * B - 4 * A * C
        if disc <= 0:
            mid_in = (xa + 0.5 * dx - cx) ** 2 + (ya + 0.5 * dy - cy) ** 2 <= r * r
            if mid_in:
                out.append(((xa, ya), (xb, yb)))
            continue
        sq = math.sqrt(disc)
        t1 = max(0.0, (-B - sq) / (2 * A))
        t2 = min(1.0, (-B + sq) / (2 * A))
        if t2 > t1:
            out.append(((xa + t1 * dx, ya + t1 * dy),
                        (xa + t2 * dx, ya + t2 * dy)))
    return out


def measured_density(spec: CantorSpec, x, r, h, pole=(0.0, 1.0), mesh=None,
                     box=(-0.55, 1.55, -0.1, 1.25)):
    """Solved harmonic measure of the boundary inside B((x,0), r), over r.

    The chart box replaces the paper's outer disk truncation from inside
    (shrinking the domain only lowers the measure of the shared bottom
    boundary), so 'measured <= ahlfors_bound' is a conservative check.
    """
    gap = spec.smallest_gap()
    if h > gap / 8.0:
        raise ValueError(f"mesh too coarse for depth (h > gap/8 = {gap / 8:.3e})")
    if mesh is None:
        mesh = cantor_mesh(spec, h, box=box)
    dom = mesh.domain
    arc = _clip_polyline_to_disk(dom._xs, dom._ys, float(x), 0.0, r)
    fld = CoefficientField.identity()
    w = harmonic_measure(dom, fld, pole, arc, h, mesh=mesh)
    return {"r": r, "omega": w, "density": w / r}


def cantor_dimension(spec: CantorSpec):
    """log 2 / log(2/(1-lambda)), the self-similarity dimension."""
    return spec.hausdorff_dimension
