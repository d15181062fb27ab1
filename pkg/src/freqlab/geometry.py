"""Domains, boundary graphs, coefficient fields and admissibility.

Everything here is 2D, immutable after construction, and pure. Boundary
graphs are piecewise linear so slopes, normals and distances are exact.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "ChartError",
    "ConfigError",
    "LipschitzGraph",
    "Domain",
    "GraphEpigraph",
    "HalfBall",
    "Ball",
    "UnitSquare",
    "PlanarCone",
    "CantorCone",
    "CoefficientField",
    "AffineMap",
    "admissible",
    "normalize_at",
    "cone_vanishing_order_2d",
    "domain_from_json",
    "field_from_json",
]


class ChartError(ValueError):
    """A ball (or sample) escapes the chart where Sigma is a graph."""


class ConfigError(ValueError):
    """Malformed user configuration."""


# ---------------------------------------------------------------------------
# boundary graphs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LipschitzGraph:
    """Piecewise-linear graph y = phi(x) with slope bound ``slope_tau``.

    ``breakpoints`` is a sorted sequence of (abscissa, ordinate) pairs.
    Outside the breakpoint range the graph continues with the terminal
    segment slopes (this keeps the Lipschitz constant).
    """

    breakpoints: tuple
    slope_tau: float

    def __post_init__(self):
        bp = tuple((float(a), float(o)) for a, o in self.breakpoints)
        object.__setattr__(self, "breakpoints", bp)
        xs = np.array([p[0] for p in bp])
        ys = np.array([p[1] for p in bp])
        if len(bp) < 2:
            raise ConfigError("graph needs at least two breakpoints")
        if not np.all(np.diff(xs) > 0):
            raise ConfigError("breakpoint abscissae must be strictly increasing")
        slopes = np.diff(ys) / np.diff(xs)
        if np.any(np.abs(slopes) > self.slope_tau + 1e-12):
            raise ConfigError("segment slope exceeds declared slope_tau")
        if not self.slope_tau < 1.0:
            raise ConfigError("slope_tau must be < 1")
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_ys", ys)
        object.__setattr__(self, "_slopes", slopes)

    def phi(self, x):
        """Evaluate the graph height, extended by the end slopes."""
        x = np.asarray(x, dtype=float)
        xs, ys, sl = self._xs, self._ys, self._slopes
        idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(sl) - 1)
        return ys[idx] + sl[idx] * (x - xs[idx])

    def normals(self, x):
        """Outward (downward) unit normal of the epigraph at abscissa x.

        At breakpoints the normal of the right segment is returned (the
        normal exists a.e. only).
        """
        x = np.asarray(x, dtype=float)
        xs, sl = self._xs, self._slopes
        idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(sl) - 1)
        s = sl[idx]
        nrm = np.sqrt(1.0 + s * s)
        return np.stack([s / nrm, -1.0 / nrm], axis=-1)

    def distance(self, pts):
        """Exact Euclidean distance from points (n,2) to the graph polyline."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        xs, ys, sl = self._xs, self._ys, self._slopes
        # extend far beyond the chart with terminal slopes
        span = (xs[-1] - xs[0]) + 1.0
        ax = np.concatenate([[xs[0] - 10 * span], xs, [xs[-1] + 10 * span]])
        ay = np.concatenate([[ys[0] - 10 * span * sl[0]], ys,
                             [ys[-1] + 10 * span * sl[-1]]])
        p1 = np.stack([ax[:-1], ay[:-1]], axis=1)
        p2 = np.stack([ax[1:], ay[1:]], axis=1)
        d = p2 - p1
        L2 = np.einsum("ij,ij->i", d, d)
        w = pts[:, None, :] - p1[None, :, :]
        t = np.clip(np.einsum("pid,id->pi", w, d) / L2[None, :], 0.0, 1.0)
        proj = p1[None, :, :] + t[..., None] * d[None, :, :]
        dist = np.linalg.norm(pts[:, None, :] - proj, axis=2)
        return dist.min(axis=1)


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

class Domain:
    """Base for 2D regions with a designated vanishing boundary part Sigma.

    Subclasses provide membership, distance to Sigma, outward normals a.e.
    on Sigma, and the chart predicate used to reject escaping balls.
    """

    #: slope of Sigma against the horizontal (0 for flat boundaries)
    sigma_slope = 0.0

    def contains(self, pts):
        raise NotImplementedError

    def dist_sigma(self, pts):
        """Unsigned distance to Sigma (inf if Sigma is empty)."""
        raise NotImplementedError

    def signed_dist_sigma(self, pts):
        """Distance to Sigma, positive inside Omega and negative outside."""
        d = self.dist_sigma(pts)
        sign = np.where(self.contains(pts), 1.0, -1.0)
        return d * sign

    def sigma_normal(self, pts):
        """Outward unit normal at (a.e.) points of Sigma."""
        raise NotImplementedError

    def ball_boundary_in_sigma(self, x, r):
        """True iff B(x, r) meets the boundary only inside Sigma and stays
        within the chart."""
        raise NotImplementedError

    def sigma_points(self, n):
        """n sample points spread over Sigma (empty array if Sigma empty)."""
        raise NotImplementedError


@dataclass(frozen=True)
class GraphEpigraph(Domain):
    """Region above a Lipschitz graph, clipped to a chart box.

    Omega = {(x, y): y > phi(x)} within ``box`` = (x0, x1, y0, y1); Sigma is
    the graph portion strictly inside the box.
    """

    graph: LipschitzGraph
    box: tuple

    def __post_init__(self):
        x0, x1, y0, y1 = map(float, self.box)
        if not (x0 < x1 and y0 < y1):
            raise ConfigError("degenerate chart box")
        object.__setattr__(self, "box", (x0, x1, y0, y1))
        object.__setattr__(self, "sigma_slope", float(self.graph.slope_tau))

    def contains(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x0, x1, y0, y1 = self.box
        phi = self.graph.phi(pts[:, 0])
        return (
            (pts[:, 1] > phi)
            & (pts[:, 0] > x0) & (pts[:, 0] < x1)
            & (pts[:, 1] > y0) & (pts[:, 1] < y1)
        )

    def dist_sigma(self, pts):
        return self.graph.distance(pts)

    def sigma_normal(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self.graph.normals(pts[:, 0])

    def ball_boundary_in_sigma(self, x, r):
        x = np.asarray(x, dtype=float)
        x0, x1, y0, y1 = self.box
        # clear of box sides/top: any boundary met is then graph; dipping
        # below the graph is fine (that region is exterior, u extends by 0)
        return x[0] - r > x0 and x[0] + r < x1 and x[1] + r < y1

    def sigma_points(self, n):
        x0, x1, _, _ = self.box
        xs = np.linspace(x0, x1, n + 2)[1:-1]
        return np.stack([xs, self.graph.phi(xs)], axis=1)


@dataclass(frozen=True)
class HalfBall(Domain):
    """Upper half-disk; Sigma is the open diameter."""

    center: tuple = (0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(map(float, self.center)))
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        c = np.array(self.center)
        rel = pts - c
        return (np.einsum("ij,ij->i", rel, rel) < self.radius**2) & (rel[:, 1] > 0)

    def dist_sigma(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        cx, cy = self.center
        dx = np.maximum(np.abs(pts[:, 0] - cx) - self.radius, 0.0)
        return np.hypot(dx, pts[:, 1] - cy)

    def sigma_normal(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = np.zeros_like(pts)
        n[:, 1] = -1.0
        return n

    def ball_boundary_in_sigma(self, x, r):
        x = np.asarray(x, dtype=float)
        c = np.array(self.center)
        return np.linalg.norm(x - c) + r < self.radius

    def sigma_points(self, n):
        cx, cy = self.center
        xs = cx + np.linspace(-self.radius, self.radius, n + 2)[1:-1]
        return np.stack([xs, np.full(n, cy)], axis=1)


@dataclass(frozen=True)
class Ball(Domain):
    """Full disk; Sigma is empty (interior experiments only)."""

    center: tuple = (0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(map(float, self.center)))
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        rel = pts - np.array(self.center)
        return np.einsum("ij,ij->i", rel, rel) < self.radius**2

    def dist_sigma(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.full(len(pts), np.inf)

    def sigma_normal(self, pts):
        raise ValueError("Ball has empty Sigma")

    def ball_boundary_in_sigma(self, x, r):
        # Sigma empty: require the ball to avoid the boundary entirely
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - np.array(self.center)) + r < self.radius

    def sigma_points(self, n):
        return np.zeros((0, 2))


@dataclass(frozen=True)
class UnitSquare(Domain):
    """[0,1]^2 with Sigma = whole boundary (eigenfunction experiments)."""

    def contains(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return (
            (pts[:, 0] > 0) & (pts[:, 0] < 1)
            & (pts[:, 1] > 0) & (pts[:, 1] < 1)
        )

    def dist_sigma(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        dx = np.minimum(pts[:, 0], 1 - pts[:, 0])
        dy = np.minimum(pts[:, 1], 1 - pts[:, 1])
        inside = self.contains(pts)
        d_in = np.minimum(dx, dy)
        # outside: distance to the square
        ox = np.maximum(np.maximum(-pts[:, 0], pts[:, 0] - 1), 0.0)
        oy = np.maximum(np.maximum(-pts[:, 1], pts[:, 1] - 1), 0.0)
        return np.where(inside, d_in, np.hypot(ox, oy))

    def sigma_normal(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = np.zeros_like(pts)
        on_left = np.isclose(pts[:, 0], 0)
        on_right = np.isclose(pts[:, 0], 1)
        on_bottom = np.isclose(pts[:, 1], 0)
        on_top = np.isclose(pts[:, 1], 1)
        n[on_left] = (-1, 0)
        n[on_right] = (1, 0)
        n[on_bottom] = (0, -1)
        n[on_top] = (0, 1)
        return n

    def ball_boundary_in_sigma(self, x, r):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x - r > -1) and np.all(x + r < 2))

    def sigma_points(self, n):
        t = np.linspace(0, 1, n + 2)[1:-1]
        return np.stack([t, np.zeros(n)], axis=1)


@dataclass(frozen=True)
class PlanarCone(Domain):
    """Truncated cone {y'' > tau·|y'|} ∩ B(vertex, s), vertex-relative.

    Negative tau gives the non-convex (reflex) cone. Sigma is the pair of
    boundary rays; the outer arc is the non-vanishing boundary part.
    """

    vertex: tuple = (0.0, 0.0)
    aperture_tau: float = 0.0
    truncation: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "vertex", tuple(map(float, self.vertex)))
        tau = float(self.aperture_tau)
        if not math.isfinite(tau):
            raise ConfigError("aperture must be finite")
        object.__setattr__(self, "aperture_tau", tau)
        object.__setattr__(self, "truncation", float(self.truncation))
        object.__setattr__(self, "sigma_slope", abs(tau))
        # rays at angles theta0 and pi-theta0 against the horizontal
        object.__setattr__(self, "_theta0", math.atan(tau))

    @property
    def opening(self):
        return math.pi - 2.0 * self._theta0

    def _polar(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        rel = pts - np.array(self.vertex)
        rho = np.hypot(rel[:, 0], rel[:, 1])
        th = np.arctan2(rel[:, 1], rel[:, 0])
        return rho, th

    def contains(self, pts):
        rho, th = self._polar(pts)
        t0 = self._theta0
        return (rho < self.truncation) & (th > t0) & (th < math.pi - t0) & (rho > 0)

    def dist_sigma(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        rel = pts - np.array(self.vertex)
        t0 = self._theta0
        d = np.full(len(rel), np.inf)
        for ang in (t0, math.pi - t0):
            e = np.array([math.cos(ang), math.sin(ang)])
            t = np.clip(rel @ e, 0.0, self.truncation)
            proj = t[:, None] * e[None, :]
            d = np.minimum(d, np.linalg.norm(rel - proj, axis=1))
        return d

    def sigma_normal(self, pts):
        rho, th = self._polar(pts)
        t0 = self._theta0
        left = th > math.pi / 2
        out = np.empty((len(rho), 2))
        # normals of the two rays, pointing out of the cone
        nr = np.array([math.sin(t0), -math.cos(t0)])
        nl = np.array([-math.sin(t0), -math.cos(t0)])
        out[~left] = nr
        out[left] = nl
        return out

    def ball_boundary_in_sigma(self, x, r):
        x = np.asarray(x, dtype=float)
        rel = np.linalg.norm(x - np.array(self.vertex))
        return rel + r < self.truncation

    def sigma_points(self, n):
        t0 = self._theta0
        m = n // 2
        out = []
        for ang in (t0, math.pi - t0):
            e = np.array([math.cos(ang), math.sin(ang)])
            t = np.linspace(0, self.truncation, m + 2)[1:-1]
            out.append(np.array(self.vertex) + t[:, None] * e[None, :])
        return np.concatenate(out, axis=0)


def _cantor_intervals_float(k, depth):
    lam = 1.0 / (2 * k + 1)
    scale = (1.0 - lam) / 2.0
    ivs = np.array([[0.0, 1.0]])
    for _ in range(depth):
        left = scale * ivs
        right = (1.0 + lam) / 2.0 + scale * ivs
        ivs = np.concatenate([left, right], axis=0)
    return ivs[np.argsort(ivs[:, 0])]


def _cantor_graph(k, depth, slope, box):
    """Piecewise-linear phi(x) = slope·dist(x, E_depth) over the chart box."""
    ivs = _cantor_intervals_float(k, depth)
    x0, x1 = box[0], box[1]
    xs = [x0]
    ys = [slope * (0.0 - x0) if x0 < 0 else 0.0]
    # left wing
    xs = [x0]
    ys = [slope * max(0.0 - x0, 0.0)]
    for i, (a, b) in enumerate(ivs):
        xs.extend([a, b])
        ys.extend([0.0, 0.0])
        if i + 1 < len(ivs):
            nxt = ivs[i + 1][0]
            mid = 0.5 * (b + nxt)
            xs.append(mid)
            ys.append(slope * (mid - b))
    xs.append(x1)
    ys.append(slope * max(x1 - 1.0, 0.0))
    pts = sorted(set(zip(xs, ys)))
    return pts


@dataclass(frozen=True)
class CantorCone(Domain):
    """Union of cones with slope 1/a over the depth-n Cantor construction.

    The region is the epigraph of phi(x) = (1/a)·dist(x, E_n) clipped to an
    axis box that sits inside B(0, 2). Sigma is the whole graph.
    """

    k: int = 1
    depth: int = 4
    aperture: float = 1.0
    box: tuple = (-0.55, 1.55, -0.1, 1.25)

    def __post_init__(self):
        if self.k < 1 or self.depth < 1:
            raise ConfigError("k and depth must be >= 1")
        if not self.aperture > 0:
            raise ConfigError("aperture must be positive")
        object.__setattr__(self, "box", tuple(map(float, self.box)))
        x0, x1, y0, y1 = self.box
        if math.hypot(max(abs(x0), abs(x1)), max(abs(y0), abs(y1))) > 2.0:
            raise ConfigError("chart box must sit inside B(0,2)")
        slope = 1.0 / self.aperture
        object.__setattr__(self, "slope", slope)
        bp = _cantor_graph(self.k, self.depth, slope, self.box)
        # the graph slope equals the cone slope; LipschitzGraph demands < 1,
        # so for slope >= 1 we keep the polyline but bypass that check
        object.__setattr__(self, "_breakpoints", bp)
        object.__setattr__(self, "sigma_slope", slope)
        xs = np.array([p[0] for p in bp])
        ys = np.array([p[1] for p in bp])
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_ys", ys)
        object.__setattr__(self, "_sl", np.diff(ys) / np.diff(xs))

    @property
    def lam(self):
        return 1.0 / (2 * self.k + 1)

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        xs, ys, sl = self._xs, self._ys, self._sl
        idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(sl) - 1)
        return ys[idx] + sl[idx] * (x - xs[idx])

    def contains(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x0, x1, y0, y1 = self.box
        return (
            (pts[:, 1] > self.phi(pts[:, 0]))
            & (pts[:, 0] > x0) & (pts[:, 0] < x1) & (pts[:, 1] < y1)
        )

    def dist_sigma(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        xs, ys = self._xs, self._ys
        p1 = np.stack([xs[:-1], ys[:-1]], axis=1)
        p2 = np.stack([xs[1:], ys[1:]], axis=1)
        d = p2 - p1
        L2 = np.einsum("ij,ij->i", d, d)
        w = pts[:, None, :] - p1[None, :, :]
        t = np.clip(np.einsum("pid,id->pi", w, d) / L2[None, :], 0.0, 1.0)
        proj = p1[None, :, :] + t[..., None] * d[None, :, :]
        return np.linalg.norm(pts[:, None, :] - proj, axis=2).min(axis=1)

    def sigma_normal(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        xs, sl = self._xs, self._sl
        idx = np.clip(np.searchsorted(xs, pts[:, 0], side="right") - 1, 0, len(sl) - 1)
        s = sl[idx]
        nrm = np.sqrt(1.0 + s * s)
        return np.stack([s / nrm, -1.0 / nrm], axis=-1)

    def ball_boundary_in_sigma(self, x, r):
        x = np.asarray(x, dtype=float)
        x0, x1, _, y1 = self.box
        return x[0] - r > x0 and x[0] + r < x1 and x[1] + r < y1

    def sigma_points(self, n):
        x0, x1, _, _ = self.box
        xs = np.linspace(x0, x1, n + 2)[1:-1]
        return np.stack([xs, self.phi(xs)], axis=1)


# ---------------------------------------------------------------------------
# coefficient fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientField:
    """Symmetric 2x2 matrix field A(x) with declared constants.

    ``entries`` maps an (n,2) array of points to an (n,2,2) array of
    symmetric matrices. The declared ellipticity Lambda_A >= 1 and Lipschitz
    constant L_A >= 0 are contracts checked by sampling, not recomputed.
    """

    entries: object
    ellipticity_Lambda: float = 1.0
    lipschitz_L: float = 0.0
    name: str = "A"

    def __call__(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        A = np.asarray(self.entries(pts), dtype=float)
        if A.shape != (len(pts), 2, 2):
            raise ValueError("entries callable must return (n,2,2)")
        return A

    @staticmethod
    def identity():
        def entries(pts):
            n = len(pts)
            A = np.zeros((n, 2, 2))
            A[:, 0, 0] = 1.0
            A[:, 1, 1] = 1.0
            return A
        return CoefficientField(entries, 1.0, 0.0, name="I")

    @staticmethod
    def constant(mat, name="const"):
        mat = np.asarray(mat, dtype=float)
        if not np.allclose(mat, mat.T):
            raise ConfigError("constant matrix must be symmetric")
        ev = np.linalg.eigvalsh(mat)
        lam = max(ev[1], 1.0 / ev[0]) if ev[0] > 0 else np.inf
        def entries(pts):
            return np.broadcast_to(mat, (len(pts), 2, 2)).copy()
        return CoefficientField(entries, float(lam), 0.0, name=name)

    def validate(self, pts, rtol=1e-6):
        """Sampled invariant checks: symmetry, ellipticity, Lipschitz.

        Returns a dict report; raises nothing.
        """
        A = self(pts)
        sym = float(np.max(np.abs(A - np.transpose(A, (0, 2, 1)))))
        ev = np.linalg.eigvalsh(A)
        lam_ok = bool(
            np.all(ev[:, 0] >= 1.0 / self.ellipticity_Lambda - rtol)
            and np.all(ev[:, 1] <= self.ellipticity_Lambda + rtol)
        )
        # difference quotients over consecutive sample pairs
        d = np.linalg.norm(pts[1:] - pts[:-1], axis=1)
        keep = d > 1e-12
        quot = np.max(
            np.abs(A[1:] - A[:-1]).reshape(len(pts) - 1, 4), axis=1
        )[keep] / d[keep]
        lip_ok = bool(np.all(quot <= self.lipschitz_L * (1 + 1e-6) + 1e-12))
        return {
            "symmetry_defect": sym,
            "ellipticity_ok": lam_ok,
            "lipschitz_ok": lip_ok,
            "max_difference_quotient": float(quot.max()) if len(quot) else 0.0,
        }


@dataclass(frozen=True)
class AffineMap:
    """y -> shift + S·y together with its inverse."""

    S: np.ndarray
    shift: np.ndarray

    def apply(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return pts @ self.S.T + self.shift

    def inverse(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        Sinv = np.linalg.inv(self.S)
        return (pts - self.shift) @ Sinv.T


def normalize_at(fld: CoefficientField, x):
    """Rescale coordinates so the transformed field is I at the origin.

    Returns (transformed field, map y -> x + S·y) where S is the symmetric
    positive-definite square root of A(x). The transformed field is
    A_S(y) = S^{-1} A(x + S y) S^{-1}.
    """
    x = np.asarray(x, dtype=float).reshape(2)
    A0 = fld(x[None, :])[0]
    w, V = np.linalg.eigh(A0)
    if np.any(w <= 1e-10):
        raise ValueError("A(x) is not positive definite within tolerance")
    S = (V * np.sqrt(w)) @ V.T
    Sinv = (V / np.sqrt(w)) @ V.T

    def entries(pts):
        phys = np.atleast_2d(pts) @ S.T + x
        A = fld(phys)
        return np.einsum("ab,nbc,cd->nad", Sinv, A, Sinv)

    lam = fld.ellipticity_Lambda
    new = CoefficientField(
        entries,
        ellipticity_Lambda=lam * lam,
        lipschitz_L=fld.lipschitz_L * lam ** 1.5,
        name=fld.name + "_normalized",
    )
    return new, AffineMap(S=S, shift=x)


# ---------------------------------------------------------------------------
# admissibility (sufficient geometric condition for the boundary sign term)
# ---------------------------------------------------------------------------

def admissible(x, r, domain: Domain, fld: CoefficientField, C=1.0):
    """Decide whether the center x and radius r are admissible.

    True if dist(x, Sigma) > r, or if the sufficient condition holds with
    T = dist(x, Sigma):

        T/r >= C·L_A·r   and   cos(arccos(T/r) + arctan tau) >= C·L_A·r

    when A(x) = I; for general A(x) the Lambda-scaled variant

        cos(arccos(Lambda^{-1}·T/r) + arctan(Lambda·tau)) >= C·L_A·Lambda^{1/2}·r

    is used. Comparisons are non-strict so the classical flat-boundary
    harmonic case (T = 0, tau = 0, L_A = 0) is admissible.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float).reshape(2)
    if not domain.ball_boundary_in_sigma(x, r):
        raise ChartError("ball not compactly inside Sigma-chart")
    T = float(domain.dist_sigma(x[None, :])[0])
    if T > r:
        return True
    tau = domain.sigma_slope
    L = fld.lipschitz_L
    A0 = fld(x[None, :])[0]
    is_identity = np.max(np.abs(A0 - np.eye(2))) < 1e-8
    ratio = min(T / r, 1.0)
    if is_identity:
        if not ratio >= C * L * r:
            return False
        ang = math.acos(ratio) + math.atan(tau)
        return math.cos(ang) >= C * L * r
    lam = fld.ellipticity_Lambda
    ratio = min(T / (lam * r), 1.0)
    ang = math.acos(ratio) + math.atan(lam * tau)
    return math.cos(ang) >= C * L * math.sqrt(lam) * r


def cone_vanishing_order_2d(aperture_tau):
    """Homogeneity degree of the planar-sector positive harmonic profile.

    The sector {y > tau·|x|} has opening pi − 2·arctan(tau); separation of
    variables gives degree pi / opening. Equals 1 at tau = 0, is monotone
    increasing in tau, and tends to 1/2 as tau -> -inf.
    """
    tau = float(aperture_tau)
    if not math.isfinite(tau):
        raise ValueError("aperture must be finite")
    opening = math.pi - 2.0 * math.atan(tau)
    if not 0.0 < opening < 2.0 * math.pi:
        raise ValueError("opening angle outside (0, 2*pi)")
    return math.pi / opening


# ---------------------------------------------------------------------------
# JSON construction
# ---------------------------------------------------------------------------

_ALLOWED_CALLS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}


def _compile_expr(src):
    """Compile a whitelisted expression over x, y into a numpy callable.

    Grammar: numeric constants, names x and y, +, *, unary -, and the calls
    sin, cos, exp. Anything else is rejected.
    """
    try:
        tree = ast.parse(str(src), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad expression {src!r}: {exc}") from None

    def ev(node, x, y):
        if isinstance(node, ast.Expression):
            return ev(node.body, x, y)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id == "x":
                return x
            if node.id == "y":
                return y
            raise ConfigError(f"unknown name {node.id!r} in expression")
        if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Mult, ast.Sub)):
            a = ev(node.left, x, y)
            b = ev(node.right, x, y)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            return a * b
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -ev(node.operand, x, y)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            fn = _ALLOWED_CALLS.get(node.func.id)
            if fn is None or len(node.args) != 1 or node.keywords:
                raise ConfigError(f"call {ast.dump(node)} not allowed")
            return fn(ev(node.args[0], x, y))
        raise ConfigError(f"expression node {type(node).__name__} not allowed")

    # validate eagerly on dummy input
    ev(tree, np.zeros(1), np.zeros(1))
    return lambda x, y: ev(tree, x, y)


def domain_from_json(spec):
    """Build a Domain from a JSON-style dict (key 'kind' selects the type)."""
    if not isinstance(spec, dict):
        raise ConfigError("domain spec must be an object")
    kind = spec.get("kind")
    if kind == "graph_epigraph":
        graph = LipschitzGraph(
            tuple(map(tuple, spec["breakpoints"])), float(spec["tau"])
        )
        return GraphEpigraph(graph, tuple(spec["box"]))
    if kind == "half_ball":
        return HalfBall(tuple(spec.get("center", (0, 0))), float(spec.get("radius", 1)))
    if kind == "ball":
        return Ball(tuple(spec.get("center", (0, 0))), float(spec.get("radius", 1)))
    if kind == "unit_square":
        return UnitSquare()
    if kind == "planar_cone":
        return PlanarCone(
            tuple(spec.get("vertex", (0, 0))),
            float(spec.get("aperture", 0.0)),
            float(spec.get("truncation", 1.0)),
        )
    if kind == "cantor_cone":
        kwargs = {}
        if "box" in spec:
            kwargs["box"] = tuple(spec["box"])
        return CantorCone(
            int(spec.get("k", 1)), int(spec.get("depth", 4)),
            float(spec.get("aperture", 1.0)), **kwargs,
        )
    raise ConfigError(f"unknown domain kind {kind!r}")


def field_from_json(spec):
    """Build a CoefficientField from a JSON-style dict.

    Keys: 'matrix' (2x2 nested list of expressions over the whitelisted
    grammar), 'lambda' (ellipticity) and 'lipschitz'. Omitted matrix means
    the identity field.
    """
    if spec is None or spec == {} or spec == "identity":
        return CoefficientField.identity()
    if not isinstance(spec, dict):
        raise ConfigError("field spec must be an object")
    mat = spec.get("matrix")
    lam = float(spec.get("lambda", 1.0))
    lip = float(spec.get("lipschitz", 0.0))
    if mat is None:
        return CoefficientField.identity()
    if (
        not isinstance(mat, (list, tuple)) or len(mat) != 2
        or any(len(row) != 2 for row in mat)
    ):
        raise ConfigError("matrix must be 2x2")
    if str(mat[0][1]) != str(mat[1][0]):
        raise ConfigError("matrix must be symmetric (equal off-diagonal sources)")
    fns = [[_compile_expr(mat[i][j]) for j in range(2)] for i in range(2)]

    def entries(pts):
        x, y = pts[:, 0], pts[:, 1]
        A = np.empty((len(pts), 2, 2))
        for i in range(2):
            for j in range(2):
                A[:, i, j] = np.broadcast_to(fns[i][j](x, y), x.shape)
        return A

    return CoefficientField(entries, lam, lip, name=spec.get("name", "A"))
