"""Zero sets, sign-constant balls, singular-set detection, box counting.

Zero sets come from marching on the P1 triangles (linear crossings on
edges, no ambiguous saddle cases). Sign decisions near Sigma ignore the
boundary layer of width 2h where the Dirichlet condition makes nodal sign
tests meaningless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .solver import DiscreteSolution, normal_derivative_trace

__all__ = [
    "ZeroSet",
    "BoxCount",
    "extract_zero_set",
    "nodal_measure",
    "sign_constant_ball",
    "detect_sign_change_points",
    "detect_small_gradient_points",
    "box_counting_dimension",
    "cover_report",
    "make_sign_oracle",
]


@dataclass
class ZeroSet:
    segments: np.ndarray      # (s, 2, 2) endpoints
    total_length: float
    region: object = None

    def to_csv(self, path, metadata=()):
        with open(path, "w", newline="\n") as f:
            for line in metadata:
                f.write(f"# {line}\n")
            f.write("x1,y1,x2,y2\n")
            for (a, b) in self.segments:
                f.write(f"{a[0]:.17g},{a[1]:.17g},{b[0]:.17g},{b[1]:.17g}\n")


@dataclass
class BoxCount:
    levels: np.ndarray
    counts: np.ndarray
    slope: float
    slope_stderr: float


def _region_mask(region, pts):
    if region is None:
        return np.ones(len(pts), bool)
    if callable(region):
        return np.asarray(region(pts), bool)
    if hasattr(region, "contains"):
        return np.asarray(region.contains(pts), bool)
    center, radius = region
    rel = pts - np.asarray(center, float)
    return np.einsum("ij,ij->i", rel, rel) <= radius * radius


def extract_zero_set(u: DiscreteSolution, region=None):
    """Marching-triangles zero set of the P1 interpolant.

    Each triangle with a sign change on exactly two edges contributes one
    segment; strictly signed cells contribute nothing. Exact zeros at nodes
    are pushed to the positive side to keep the crossing count even.
    """
    mesh = u.mesh
    keep = _region_mask(region, mesh.tri_centroids)
    tris = mesh.tris[keep]
    v = u.values[tris]
    v = np.where(v == 0.0, 1e-300, v)
    s = np.sign(v)
    crossing = s != np.roll(s, -1, axis=1)       # edge k: (k, k+1)
    two = crossing.sum(axis=1) == 2
    tris = tris[two]
    v = v[two]
    crossing = crossing[two]
    if len(tris) == 0:
        return ZeroSet(np.zeros((0, 2, 2)), 0.0, region)
    P = mesh.nodes[tris]
    pts = np.full((len(tris), 2, 2), np.nan)
    slot = np.zeros(len(tris), dtype=int)
    for k in range(3):
        m = crossing[:, k]
        if not m.any():
            continue
        a = P[m, k]
        b = P[m, (k + 1) % 3]
        va = v[m, k]
        vb = v[m, (k + 1) % 3]
        t = va / (va - vb)
        x = a + t[:, None] * (b - a)
        idx = np.flatnonzero(m)
        pts[idx, slot[idx]] = x
        slot[idx] += 1
    segs = pts
    lengths = np.linalg.norm(segs[:, 0] - segs[:, 1], axis=1)
    return ZeroSet(segs, float(lengths.sum()), region)


def nodal_measure(u: DiscreteSolution, ball, sigma_aware=True):
    """Length of the zero set inside a ball, optionally dropping the
    2h-collar of Sigma where the boundary condition pollutes the count."""
    center, radius = np.asarray(ball[0], float), float(ball[1])
    zs = extract_zero_set(u, (center, radius))
    segs = zs.segments
    if len(segs) == 0:
        return 0.0
    if sigma_aware:
        mids = segs.mean(axis=1)
        far = u.mesh.domain.dist_sigma(mids) > 2.0 * u.mesh.h
        segs = segs[far]
    if len(segs) == 0:
        return 0.0
    return float(np.linalg.norm(segs[:, 0] - segs[:, 1], axis=1).sum())


def _sign_constant_in(u, x, rho):
    mesh = u.mesh
    rel = mesh.nodes - x
    in_ball = np.einsum("ij,ij->i", rel, rel) < rho * rho
    far = mesh.domain.dist_sigma(mesh.nodes[in_ball]) > 2.0 * mesh.h
    vals = u.values[in_ball][far]
    if len(vals) == 0:
        return True
    return bool(np.all(vals > 0.0) or np.all(vals < 0.0))


def sign_constant_ball(u: DiscreteSolution, x, rho_max):
    """Largest rho <= rho_max with one strict sign on B(x, rho) ∩ Omega.

    Decided on mesh nodes farther than 2h from Sigma; 20 bisection steps.
    Returns 0 when even the 4h-ball already sees both signs.
    """
    x = np.asarray(x, dtype=float).reshape(2)
    h = u.mesh.h
    if float(u.mesh.domain.dist_sigma(x[None, :])[0]) > 2.0 * h:
        raise ValueError("center must lie within 2h of Sigma")
    lo = 4.0 * h
    if not _sign_constant_in(u, x, lo):
        return 0.0
    if _sign_constant_in(u, x, rho_max):
        return float(rho_max)
    hi = float(rho_max)
    for _ in range(20):
        mid = 0.5 * (lo + hi)
        if _sign_constant_in(u, x, mid):
            lo = mid
        else:
            hi = mid
    return float(lo)


def detect_sign_change_points(u, sigma_samples, r_floor):
    """Samples where u changes sign in every r_floor-neighborhood."""
    if r_floor < 4.0 * u.mesh.h:
        raise ValueError("r_floor must be >= 4h")
    sigma_samples = np.atleast_2d(np.asarray(sigma_samples, float))
    rho = np.array([
        sign_constant_ball(u, s, r_floor) for s in sigma_samples])
    return sigma_samples[rho < r_floor]


def detect_small_gradient_points(u, sigma_samples, threshold):
    """Samples with |normal derivative| below the threshold."""
    sigma_samples = np.atleast_2d(np.asarray(sigma_samples, float))
    _, tr = normal_derivative_trace(u, u.mesh.domain, samples=sigma_samples)
    return sigma_samples[np.abs(tr) < threshold]


def box_counting_dimension(points, j_max):
    """Dyadic box counts and fitted slope for a subset of the unit chart.

    2D inputs are projected to their abscissa (the H_0 projection of the
    boundary picture). The slope is least squares over the last half of the
    levels, with its standard error as a confidence band.
    """
    if j_max > 14:
        raise ValueError("j_max must be <= 14")
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 2:
        pts = pts[:, 0]
    if len(pts) == 0:
        levels = np.arange(j_max + 1)
        return BoxCount(levels, np.zeros(j_max + 1, int), 0.0, 0.0)
    lo, hi = float(pts.min()), float(pts.max())
    span = max(hi - lo, 1e-12)
    x = (pts - lo) / span
    levels = np.arange(j_max + 1)
    counts = np.array([
        len(np.unique(np.clip((x * 2 ** j).astype(np.int64), 0, 2 ** j - 1)))
        for j in levels
    ])
    if j_max + 1 < 3:
        raise ValueError("need at least 3 levels")
    tail = max(3, math.ceil((j_max + 1) / 2))
    jj = levels[-tail:].astype(float)
    cc = np.log2(counts[-tail:].astype(float))
    A = np.stack([jj, np.ones_like(jj)], axis=1)
    coef, res, *_ = np.linalg.lstsq(A, cc, rcond=None)
    slope = float(coef[0])
    dof = max(len(jj) - 2, 1)
    sigma2 = float(res[0]) / dof if len(res) else 0.0
    var = sigma2 * np.linalg.inv(A.T @ A)[0, 0]
    return BoxCount(levels, counts, slope, float(math.sqrt(max(var, 0.0))))


def cover_report(u: DiscreteSolution, window, n_samples=129, rho_max=0.5,
                 r_floor=None):
    """Greedy cover of a Sigma window by maximal sign-constant balls.

    ``window`` is an abscissa interval (a, b) on Sigma. Largest balls are
    chosen first, skipping samples already covered; the residual keeps the
    samples in no ball together with their dyadic box counts.
    """
    mesh = u.mesh
    h = mesh.h
    if r_floor is None:
        r_floor = 4.0 * h
    a, b = window
    dom = mesh.domain
    xs = np.linspace(a, b, n_samples)
    if hasattr(dom, "graph"):
        samples = np.stack([xs, dom.graph.phi(xs)], axis=1)
    elif hasattr(dom, "phi"):
        samples = np.stack([xs, dom.phi(xs)], axis=1)
    else:
        samples = np.stack([xs, np.zeros_like(xs)], axis=1)
    rho = np.array([sign_constant_ball(u, s, rho_max) for s in samples])
    order = np.argsort(-rho)
    covered = np.zeros(n_samples, bool)
    balls = []
    for i in order:
        if rho[i] < r_floor or covered[i]:
            continue
        c = samples[i]
        nu = dom.sigma_normal(c[None, :])[0]
        probe = c - nu * max(3 * h, 0.2 * rho[i])
        sgn = 1 if u.eval(probe[None, :])[0] >= 0 else -1
        balls.append({"cx": float(c[0]), "cy": float(c[1]),
                      "r": float(rho[i]), "sign": sgn})
        covered |= np.linalg.norm(samples - c, axis=1) < rho[i]
    residual = samples[~covered]
    if len(residual):
        bc = box_counting_dimension((residual[:, 0] - a) / (b - a), j_max=12)
    else:
        bc = box_counting_dimension(np.zeros(0), j_max=12)
    # residual never intersects a chosen ball (definitional check)
    for ball in balls:
        c = np.array([ball["cx"], ball["cy"]])
        assert not np.any(np.linalg.norm(residual - c, axis=1) < ball["r"])
    return {
        "balls": balls,
        "residual": residual,
        "boxcount": {"j": bc.levels.tolist(), "count": bc.counts.tolist()},
        "residual_slope": bc.slope,
        "r_floor": float(r_floor),
    }


def make_sign_oracle(u: DiscreteSolution):
    """Zero detector over axis rectangles for the Whitney recursion.

    oracle((x0, x1, y0, y1)) is True when u has zeros on the open rectangle
    intersected with Omega, decided on mesh nodes beyond the 2h collar of
    Sigma. Raises if the rectangle contains no decidable nodes.
    """
    mesh = u.mesh
    far = mesh.domain.dist_sigma(mesh.nodes) > 2.0 * mesh.h
    nodes = mesh.nodes
    vals = u.values

    def oracle(rect):
        x0, x1, y0, y1 = rect
        m = far & (nodes[:, 0] > x0) & (nodes[:, 0] < x1) \
            & (nodes[:, 1] > y0) & (nodes[:, 1] < y1)
        v = vals[m]
        if len(v) == 0:
            raise ValueError(f"sign oracle has no decidable nodes in {rect}")
        return bool(v.min() <= 0.0 <= v.max())

    return oracle
