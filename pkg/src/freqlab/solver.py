"""Structured P1 finite-element solver for div(A grad u) = 0 in 2D.

Meshes are boundary-fitted structured triangulations (tensor grids on
axis-aligned boxes, sheared columns on graph epigraphs, polar rings on
disks/sectors), so point location and interpolation are O(1) and the
bottom boundary is matched exactly. Systems are symmetric positive
definite; large solves go through AMG-preconditioned CG.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import (
    Ball,
    CantorCone,
    ChartError,
    CoefficientField,
    Domain,
    GraphEpigraph,
    HalfBall,
    PlanarCone,
    UnitSquare,
)

__all__ = [
    "Mesh",
    "DiscreteSolution",
    "EigenPair",
    "ConvergenceError",
    "mesh_domain",
    "tensor_mesh",
    "shear_mesh",
    "polar_mesh",
    "solve_dirichlet",
    "green_function",
    "harmonic_measure",
    "dirichlet_eigenpairs",
    "gradient",
    "normal_derivative_trace",
    "project",
    "export_solution_csv",
    "export_mesh_off",
]

_SPSOLVE_LIMIT = 120_000


class ConvergenceError(RuntimeError):
    """Iterative solver failed to reach the required residual."""


# ---------------------------------------------------------------------------
# mesh
# ---------------------------------------------------------------------------

class Mesh:
    """Structured triangle mesh over a Domain.

    Attributes: ``nodes`` (n,2), ``tris`` (t,3) CCW, ``on_boundary`` and
    ``on_sigma`` node masks, nominal size ``h``. The logical structure is
    kept by a locator so values interpolate bilinearly in grid coordinates.
    """

    def __init__(self, domain, nodes, tris, on_boundary, on_sigma, h, locator):
        self.domain = domain
        self.nodes = np.asarray(nodes, dtype=float)
        self.tris = np.asarray(tris, dtype=np.int64)
        self.on_boundary = np.asarray(on_boundary, dtype=bool)
        self.on_sigma = np.asarray(on_sigma, dtype=bool)
        self.h = float(h)
        self._locator = locator
        P = self.nodes[self.tris]
        e1 = P[:, 1] - P[:, 0]
        e2 = P[:, 2] - P[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(det <= 0):
            raise ValueError("mesh has non-positively oriented triangles")
        self.tri_areas = 0.5 * det
        self.tri_centroids = P.mean(axis=1)
        # P1 barycentric gradients: grad lambda_k, shape (t, 3, 2)
        g = np.empty((len(self.tris), 3, 2))
        g[:, 0, 0] = P[:, 1, 1] - P[:, 2, 1]
        g[:, 0, 1] = P[:, 2, 0] - P[:, 1, 0]
        g[:, 1, 0] = P[:, 2, 1] - P[:, 0, 1]
        g[:, 1, 1] = P[:, 0, 0] - P[:, 2, 0]
        g[:, 2, 0] = P[:, 0, 1] - P[:, 1, 1]
        g[:, 2, 1] = P[:, 1, 0] - P[:, 0, 0]
        self._bary_grads = g / det[:, None, None]
        self._edges_boundary = None

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_interior(self):
        return int(np.count_nonzero(~self.on_boundary))

    def min_angle_deg(self):
        P = self.nodes[self.tris]
        angles = []
        for k in range(3):
            a = P[:, (k + 1) % 3] - P[:, k]
            b = P[:, (k + 2) % 3] - P[:, k]
            na = np.linalg.norm(a, axis=1)
            nb = np.linalg.norm(b, axis=1)
            cosang = np.clip(np.einsum("ij,ij->i", a, b) / (na * nb), -1, 1)
            angles.append(np.arccos(cosang))
        return float(np.degrees(np.min(np.stack(angles))))

    def boundary_edges(self):
        """Edges lying on the boundary (pairs of node indices)."""
        if self._edges_boundary is None:
            e = np.concatenate([
                self.tris[:, [0, 1]], self.tris[:, [1, 2]], self.tris[:, [2, 0]],
            ])
            e_sorted = np.sort(e, axis=1)
            _, idx, counts = np.unique(
                e_sorted, axis=0, return_index=True, return_counts=True)
            self._edges_boundary = e_sorted[idx[counts == 1]]
        return self._edges_boundary

    def boundary_spacing(self):
        """Per-node typical boundary edge length (nan off the boundary)."""
        out = np.full(self.n_nodes, np.nan)
        be = self.boundary_edges()
        L = np.linalg.norm(self.nodes[be[:, 0]] - self.nodes[be[:, 1]], axis=1)
        acc = np.zeros(self.n_nodes)
        cnt = np.zeros(self.n_nodes)
        for k in range(2):
            np.add.at(acc, be[:, k], L)
            np.add.at(cnt, be[:, k], 1)
        mask = cnt > 0
        out[mask] = acc[mask] / cnt[mask]
        return out

    def chart_contains(self, pts):
        return self._locator.chart_contains(np.atleast_2d(pts))

    def interpolate(self, values, pts):
        """Bilinear interpolation in logical grid coordinates (clamped)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        corners, weights = self._locator.locate(pts)
        return np.einsum("pk,pk->p", values[corners], weights)

    def tri_gradients(self, values):
        """Cell-wise P1 gradient, shape (t, 2)."""
        v = values[self.tris]
        return np.einsum("tk,tkd->td", v, self._bary_grads)


# ---------------------------------------------------------------------------
# locators (logical inverse maps)
# ---------------------------------------------------------------------------

def _bracket(knots, x):
    """Interval index and fraction for (clamped) piecewise-linear knots."""
    i = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, len(knots) - 2)
    f = (x - knots[i]) / (knots[i + 1] - knots[i])
    return i, np.clip(f, 0.0, 1.0)


class _TensorLocator:
    def __init__(self, xs, ys, idx):
        self.xs, self.ys, self.idx = xs, ys, idx

    def chart_contains(self, pts):
        return (
            (pts[:, 0] >= self.xs[0] - 1e-12) & (pts[:, 0] <= self.xs[-1] + 1e-12)
            & (pts[:, 1] >= self.ys[0] - 1e-12) & (pts[:, 1] <= self.ys[-1] + 1e-12)
        )

    def locate(self, pts):
        i, fx = _bracket(self.xs, pts[:, 0])
        j, fy = _bracket(self.ys, pts[:, 1])
        c = np.stack([
            self.idx[i, j], self.idx[i + 1, j],
            self.idx[i, j + 1], self.idx[i + 1, j + 1],
        ], axis=1)
        w = np.stack([
            (1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy,
        ], axis=1)
        return c, w


class _ShearLocator:
    def __init__(self, xs, T, phi, ytop, idx):
        self.xs, self.T, self.phi, self.ytop, self.idx = xs, T, phi, ytop, idx

    def chart_contains(self, pts):
        return (
            (pts[:, 0] >= self.xs[0] - 1e-12) & (pts[:, 0] <= self.xs[-1] + 1e-12)
            & (pts[:, 1] <= self.ytop + 1e-12)
        )

    def locate(self, pts):
        i, fx = _bracket(self.xs, pts[:, 0])
        floor = (1 - fx) * self.phi[i] + fx * self.phi[i + 1]
        t = (pts[:, 1] - floor) / (self.ytop - floor)
        j, fy = _bracket(self.T, np.clip(t, 0.0, 1.0))
        c = np.stack([
            self.idx[i, j], self.idx[i + 1, j],
            self.idx[i, j + 1], self.idx[i + 1, j + 1],
        ], axis=1)
        w = np.stack([
            (1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy,
        ], axis=1)
        return c, w


class _PolarLocator:
    def __init__(self, vertex, theta, radii, idx, vertex_id, periodic):
        self.vertex = np.asarray(vertex, dtype=float)
        self.theta = theta
        self.radii = radii
        self.idx = idx          # (n_rings, n_cols) node ids
        self.vertex_id = vertex_id
        self.periodic = periodic

    def chart_contains(self, pts):
        rel = pts - self.vertex
        return np.hypot(rel[:, 0], rel[:, 1]) <= self.radii[-1] + 1e-12

    def locate(self, pts):
        rel = pts - self.vertex
        rho = np.hypot(rel[:, 0], rel[:, 1])
        th = np.arctan2(rel[:, 1], rel[:, 0])
        if self.periodic:
            th = np.mod(th, 2 * math.pi)
        j, ft = _bracket(self.theta, th)
        ncols = self.idx.shape[1]
        jp = (j + 1) % ncols if self.periodic else j + 1
        # radial bracket; below the first ring blend with the vertex node
        i = np.searchsorted(self.radii, rho, side="right") - 1
        inner = i < 0
        i = np.clip(i, 0, len(self.radii) - 2)
        fr = (rho - self.radii[i]) / (self.radii[i + 1] - self.radii[i])
        fr = np.clip(fr, 0.0, 1.0)
        c = np.stack([
            self.idx[i, j], self.idx[i, jp],
            self.idx[i + 1, j], self.idx[i + 1, jp],
        ], axis=1)
        w = np.stack([
            (1 - ft) * (1 - fr), ft * (1 - fr), (1 - ft) * fr, ft * fr,
        ], axis=1)
        if np.any(inner):
            s = rho[inner] / self.radii[0]
            c[inner, 2] = self.idx[0, j[inner]]
            c[inner, 3] = self.idx[0, jp[inner]]
            c[inner, 0] = self.vertex_id
            c[inner, 1] = self.vertex_id
            w[inner, 0] = (1 - s)
            w[inner, 1] = 0.0
            w[inner, 2] = s * (1 - ft[inner])
            w[inner, 3] = s * ft[inner]
        return c, w


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def _quads_to_tris(idx):
    """Split the logical quad grid idx[i,j] into CCW triangle pairs."""
    a = idx[:-1, :-1].ravel()
    b = idx[1:, :-1].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[:-1, 1:].ravel()
    return np.concatenate([
        np.stack([a, b, c], axis=1),
        np.stack([a, c, d], axis=1),
    ])


def tensor_mesh(domain, x0, x1, y0, y1, h):
    nx = max(2, round((x1 - x0) / h)) + 1
    ny = max(2, round((y1 - y0) / h)) + 1
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)
    idx = np.arange(nx * ny).reshape(nx, ny)
    tris = _quads_to_tris(idx)
    onb = np.zeros(nx * ny, bool)
    onb[idx[0, :]] = onb[idx[-1, :]] = True
    onb[idx[:, 0]] = onb[idx[:, -1]] = True
    on_sigma = onb.copy()  # UnitSquare: Sigma is the whole boundary
    return Mesh(domain, nodes, tris, onb, on_sigma, h,
                _TensorLocator(xs, ys, idx))


def shear_mesh(domain, h, xs=None, rows=None, y_grade=None):
    """Columns following the graph: node (i,j) = (x_i, phi_i + T_j (top-phi_i)).

    ``xs`` overrides the abscissae (must contain the graph breakpoints that
    fall inside); ``rows`` overrides the row levels T in [0,1]; ``y_grade``
    (ratio > 1) makes rows geometric starting at thickness ~h near the graph.
    """
    if isinstance(domain, GraphEpigraph):
        x0, x1, _, ytop = domain.box
        phi_fn = domain.graph.phi
        bps = [p[0] for p in domain.graph.breakpoints]
    elif isinstance(domain, CantorCone):
        x0, x1, _, ytop = domain.box
        phi_fn = domain.phi
        bps = [p[0] for p in domain._breakpoints]
    else:
        raise TypeError("shear_mesh needs a graph-epigraph style domain")

    if xs is None:
        base = np.linspace(x0, x1, max(2, round((x1 - x0) / h)) + 1)
        inner = [b for b in bps if x0 < b < x1]
        xs = np.unique(np.concatenate([base, np.asarray(inner)]))
        # drop near-duplicates that would squeeze columns
        keep = np.concatenate([[True], np.diff(xs) > 1e-9])
        xs = xs[keep]
    xs = np.asarray(xs, dtype=float)
    phi = phi_fn(xs)
    depth = ytop - phi
    if np.any(depth <= 0):
        raise ValueError("graph reaches the top of the chart box")

    if rows is None:
        if y_grade is None:
            ny = max(2, round((ytop - float(phi.min())) / h)) + 1
            rows = np.linspace(0.0, 1.0, ny)
        else:
            # geometric layer thicknesses ~h, h*q, ... measured on the maximum depth
            dmax = float(depth.max())
            levels = [0.0]
            step = h
            while levels[-1] < dmax:
                levels.append(levels[-1] + step)
                step *= y_grade
            rows = np.asarray(levels) / levels[-1]
    rows = np.asarray(rows, dtype=float)

    nx, ny = len(xs), len(rows)
    Y = phi[:, None] + rows[None, :] * depth[:, None]
    X = np.broadcast_to(xs[:, None], (nx, ny))
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)
    idx = np.arange(nx * ny).reshape(nx, ny)
    tris = _quads_to_tris(idx)
    onb = np.zeros(nx * ny, bool)
    onb[idx[0, :]] = onb[idx[-1, :]] = True
    onb[idx[:, 0]] = onb[idx[:, -1]] = True
    on_sigma = np.zeros(nx * ny, bool)
    on_sigma[idx[:, 0]] = True
    on_sigma[idx[0, 0]] = on_sigma[idx[-1, 0]] = False  # chart corners
    return Mesh(domain, nodes, tris, onb, on_sigma, h,
                _ShearLocator(xs, rows, phi, ytop, idx))


def polar_mesh(domain, h, rings="uniform", r_min=None, n_theta=None):
    """Vertex fan plus concentric rings on Ball / HalfBall / PlanarCone."""
    if isinstance(domain, Ball):
        vertex = np.array(domain.center)
        th0, th1 = 0.0, 2.0 * math.pi
        R = domain.radius
        periodic = True
        vertex_boundary = False
    elif isinstance(domain, HalfBall):
        vertex = np.array(domain.center)
        th0, th1 = 0.0, math.pi
        R = domain.radius
        periodic = False
        vertex_boundary = True
    elif isinstance(domain, PlanarCone):
        vertex = np.array(domain.vertex)
        t0 = math.atan(domain.aperture_tau)
        th0, th1 = t0, math.pi - t0
        R = domain.truncation
        periodic = False
        vertex_boundary = True
    else:
        raise TypeError("polar_mesh needs Ball, HalfBall or PlanarCone")

    opening = th1 - th0
    if n_theta is None:
        n_theta = max(8, round(opening * R / h))
    ncols = n_theta if periodic else n_theta + 1
    theta = th0 + opening * np.arange(n_theta + 1) / n_theta

    if rings == "uniform":
        n_r = max(2, round(R / h))
        radii = R * np.arange(1, n_r + 1) / n_r
    elif rings == "geometric":
        if r_min is None:
            r_min = h * 0.05
        q = 1.0 + opening / n_theta
        n_r = max(2, math.ceil(math.log(R / r_min) / math.log(q)))
        radii = R * (r_min / R) ** (np.arange(n_r, -1, -1) / n_r)
    else:
        raise ValueError("rings must be 'uniform' or 'geometric'")

    cols = theta[:ncols]
    TH, RR = np.meshgrid(cols, radii, indexing="xy")
    ring_nodes = np.stack([
        vertex[0] + (RR * np.cos(TH)).ravel(),
        vertex[1] + (RR * np.sin(TH)).ravel(),
    ], axis=1)
    nodes = np.concatenate([vertex[None, :], ring_nodes], axis=0)
    n_rings = len(radii)
    idx = 1 + (np.arange(n_rings)[:, None] * ncols + np.arange(ncols)[None, :])

    tris = []
    jp = (np.arange(n_theta) + 1) % ncols if periodic else np.arange(1, n_theta + 1)
    j = np.arange(n_theta)
    tris.append(np.stack([np.zeros(n_theta, int), idx[0, j], idx[0, jp]], axis=1))
    for i in range(n_rings - 1):
        a, b = idx[i, j], idx[i, jp]
        c, d = idx[i + 1, j], idx[i + 1, jp]
        tris.append(np.stack([a, c, d], axis=1))
        tris.append(np.stack([a, d, b], axis=1))
    tris = np.concatenate(tris)

    n = len(nodes)
    onb = np.zeros(n, bool)
    on_sigma = np.zeros(n, bool)
    onb[idx[-1, :]] = True
    if not periodic:
        onb[idx[:, 0]] = onb[idx[:, -1]] = True
        on_sigma[idx[:, 0]] = on_sigma[idx[:, -1]] = True
        on_sigma[idx[-1, 0]] = on_sigma[idx[-1, -1]] = False  # arc corners
    if vertex_boundary:
        onb[0] = True
        on_sigma[0] = True
    return Mesh(domain, nodes, tris, onb, on_sigma, h,
                _PolarLocator(vertex, theta, radii, idx, 0, periodic))


def mesh_domain(domain, h, **kwargs):
    """Default boundary-fitted mesh for the given domain kind."""
    if isinstance(domain, UnitSquare):
        return tensor_mesh(domain, 0.0, 1.0, 0.0, 1.0, h)
    if isinstance(domain, (GraphEpigraph, CantorCone)):
        return shear_mesh(domain, h, **kwargs)
    if isinstance(domain, (Ball, HalfBall, PlanarCone)):
        return polar_mesh(domain, h, **kwargs)
    raise TypeError(f"no mesher for {type(domain).__name__}")


# ---------------------------------------------------------------------------
# solutions
# ---------------------------------------------------------------------------

@dataclass
class DiscreteSolution:
    """Nodal P1 solution with its mesh, field and residual certificate."""

    mesh: Mesh
    values: np.ndarray
    fld: CoefficientField
    residual_norm: float = 0.0

    def eval(self, pts, extend_by_zero=True):
        """Values at points; zero outside the closed domain per the
        extension convention. Points outside the chart raise ChartError."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if not np.all(self.mesh.chart_contains(pts)):
            raise ChartError("evaluation point escapes the chart")
        inside = self.mesh.domain.contains(pts)
        out = np.zeros(len(pts))
        if np.any(inside):
            out[inside] = self.mesh.interpolate(self.values, pts[inside])
        if not extend_by_zero and not inside.all():
            raise ValueError("point outside the closed domain")
        return out

    def max_on_sigma(self):
        s = self.mesh.on_sigma
        return float(np.max(np.abs(self.values[s]))) if s.any() else 0.0


@dataclass
class EigenPair:
    eigenvalue: float
    solution: DiscreteSolution


# ---------------------------------------------------------------------------
# assembly and linear solve
# ---------------------------------------------------------------------------

def assemble(mesh: Mesh, fld: CoefficientField):
    """Stiffness (with A at centroids) and consistent mass matrices."""
    A = fld(mesh.tri_centroids)
    g = mesh._bary_grads                       # (t,3,2)
    Ag = np.einsum("tab,tkb->tka", A, g)
    Kloc = np.einsum("tia,tja->tij", g, Ag) * mesh.tri_areas[:, None, None]
    Mref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    Mloc = Mref[None, :, :] * mesh.tri_areas[:, None, None]
    rows = np.repeat(mesh.tris, 3, axis=1).ravel()
    cols = np.tile(mesh.tris, (1, 3)).ravel()
    n = mesh.n_nodes
    K = sp.coo_matrix((Kloc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((Mloc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return K, M


def _solve_spd(K, b, cap):
    n = K.shape[0]
    if n <= _SPSOLVE_LIMIT:
        x = spla.spsolve(K.tocsc(), b)
        return x
    import pyamg

    ml = pyamg.ruge_stuben_solver(K.tocsr())
    M = ml.aspreconditioner(cycle="V")
    x, info = spla.cg(K, b, rtol=1e-12, atol=0.0, maxiter=cap, M=M)
    if info != 0:
        raise ConvergenceError(
            f"PCG did not converge within {cap} iterations (info={info})")
    return x


def _dirichlet_solve(mesh, fld, boundary_values, rhs=None):
    K, _ = assemble(mesh, fld)
    n = mesh.n_nodes
    onb = mesh.on_boundary
    u = np.zeros(n)
    u[onb] = boundary_values[onb]
    b = np.zeros(n) if rhs is None else np.asarray(rhs, dtype=float).copy()
    b = b - K @ u
    ii = np.flatnonzero(~onb)
    if len(ii) == 0:
        raise ValueError("empty interior")
    Kii = K[ii][:, ii]
    cap = max(200, int(10 * math.sqrt(len(ii))))
    x = _solve_spd(Kii, b[ii], cap)
    u[ii] = x
    res = Kii @ x - b[ii]
    denom = np.linalg.norm(b[ii])
    rel = float(np.linalg.norm(res) / denom) if denom > 0 else 0.0
    if rel > 1e-10 and denom > 0:
        raise ConvergenceError(f"relative algebraic residual {rel:.2e} > 1e-10")
    return DiscreteSolution(mesh, u, fld, residual_norm=rel)


def solve_dirichlet(domain, fld, data, h, mesh=None, **mesh_kwargs):
    """Solve div(A grad u) = 0 with Dirichlet data on all of the boundary.

    ``data`` is a callable over (n,2) boundary points. The mesh may be
    passed explicitly to reuse it across solves.
    """
    if mesh is None:
        mesh = mesh_domain(domain, h, **mesh_kwargs)
    if mesh.n_interior < 1000:
        raise ValueError("mesh too coarse: fewer than 1000 interior nodes")
    g = np.zeros(mesh.n_nodes)
    onb = mesh.on_boundary
    g[onb] = np.asarray(data(mesh.nodes[onb]), dtype=float)
    return _dirichlet_solve(mesh, fld, g)


def project(domain, fn, h, mesh=None, **mesh_kwargs):
    """Sample a closed form onto the mesh nodes (no solve, residual 0).

    Used by the analytic batteries: downstream quadrature then sees the
    same interpolated surface a solver output would provide.
    """
    if mesh is None:
        mesh = mesh_domain(domain, h, **mesh_kwargs)
    vals = np.asarray(fn(mesh.nodes), dtype=float)
    return DiscreteSolution(mesh, vals, CoefficientField.identity(), 0.0)


def green_function(domain, fld, pole, h, mesh=None, **mesh_kwargs):
    """Discrete Green function: unit point mass lumped at the pole's node."""
    if mesh is None:
        mesh = mesh_domain(domain, h, **mesh_kwargs)
    pole = np.asarray(pole, dtype=float).reshape(2)
    if not mesh.domain.contains(pole[None, :])[0]:
        raise ValueError("pole must be interior")
    d2 = np.einsum("ij,ij->i", mesh.nodes - pole, mesh.nodes - pole)
    d2[mesh.on_boundary] = np.inf
    node = int(np.argmin(d2))
    if math.sqrt(float(np.min(
            np.einsum("ij,ij->i", mesh.nodes[mesh.on_boundary] - pole,
                      mesh.nodes[mesh.on_boundary] - pole)))) < 10 * mesh.h:
        raise ValueError("pole too close to the boundary (needs >= 10h)")
    rhs = np.zeros(mesh.n_nodes)
    rhs[node] = 1.0
    return _dirichlet_solve(mesh, fld, np.zeros(mesh.n_nodes), rhs=rhs)


def _arc_data(mesh, segments):
    """Mollified indicator of a union of boundary segments.

    The ramp is centered at the free arc endpoints (value 1/2 there) and one
    boundary cell wide, which keeps the measure unbiased and monotone in the
    arc. An arc with no free endpoints gets the constant indicator 1.
    """
    segs = [(np.asarray(a, float), np.asarray(b, float)) for a, b in segments]
    total = sum(np.linalg.norm(b - a) for a, b in segs)
    if total < 2 * mesh.h:
        raise ValueError("degenerate arc (length < 2h)")
    pts = mesh.nodes
    d = np.full(mesh.n_nodes, np.inf)
    for a, b in segs:
        ab = b - a
        L2 = float(ab @ ab)
        t = np.clip((pts - a) @ ab / L2, 0.0, 1.0)
        proj = a + t[:, None] * ab
        d = np.minimum(d, np.linalg.norm(pts - proj, axis=1))
    # free endpoints: segment ends not shared with another arc segment
    ends = []
    allpts = [p for seg in segs for p in seg]
    for p in allpts:
        hits = sum(1 for q in allpts if np.linalg.norm(p - q) < 1e-12)
        if hits == 1:
            ends.append(p)
    spacing = mesh.boundary_spacing()
    data = np.zeros(mesh.n_nodes)
    onb = mesh.on_boundary
    ramp = np.maximum(spacing[onb], 1e-300)
    if ends:
        d_end = np.min(np.linalg.norm(
            pts[:, None, :] - np.asarray(ends)[None, :, :], axis=2), axis=1)
    else:
        d_end = np.full(mesh.n_nodes, np.inf)
    # quarter-cell tolerance absorbs chord sag of polyline approximations
    on_arc = d[onb] < 0.25 * ramp
    sdist = np.where(on_arc, -d_end[onb], d[onb])
    data[onb] = np.clip(0.5 - sdist / ramp, 0.0, 1.0)
    return data


def harmonic_measure(domain, fld, pole, arc, h, mesh=None, return_solution=False,
                     **mesh_kwargs):
    """Measure of a boundary arc seen from the pole for div(A grad .).

    ``arc`` is a list of boundary segments ((x1,y1),(x2,y2)). The indicator
    data is mollified over one boundary cell at the endpoints.
    """
    if mesh is None:
        mesh = mesh_domain(domain, h, **mesh_kwargs)
    data = _arc_data(mesh, arc)
    u = DiscreteSolution(mesh, data, fld)
    sol = _dirichlet_solve(mesh, fld, data)
    val = float(np.clip(sol.eval(np.asarray(pole, float)[None, :])[0], 0.0, 1.0))
    if return_solution:
        return val, sol
    return val


def dirichlet_eigenpairs(domain, fld, count, h, mesh=None, **mesh_kwargs):
    """Smallest Dirichlet eigenpairs by shift-invert on the (K, M) pencil."""
    if count > 50:
        raise ValueError("count must be <= 50")
    if mesh is None:
        mesh = mesh_domain(domain, h, **mesh_kwargs)
    K, M = assemble(mesh, fld)
    ii = np.flatnonzero(~mesh.on_boundary)
    Kii = K[ii][:, ii].tocsc()
    Mii = M[ii][:, ii].tocsc()
    v0 = np.ones(len(ii)) / math.sqrt(len(ii))  # deterministic Lanczos start
    try:
        vals, vecs = spla.eigsh(Kii, k=count, M=Mii, sigma=0.0, which="LM",
                                v0=v0)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"eigensolver failed: {exc}") from None
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    pairs = []
    for k in range(count):
        u = np.zeros(mesh.n_nodes)
        v = vecs[:, k]
        nrm = math.sqrt(float(v @ (Mii @ v)))
        u[ii] = v / nrm
        pairs.append(EigenPair(float(vals[k]), DiscreteSolution(mesh, u, fld)))
    return pairs


def gradient(u: DiscreteSolution):
    """Cell-wise gradient of the P1 solution, shape (t, 2)."""
    return u.mesh.tri_gradients(u.values)


def normal_derivative_trace(u: DiscreteSolution, domain=None, samples=None,
                            delta=None):
    """Inward difference quotient u(x + delta*nu_in)/delta at Sigma samples.

    Requires u to vanish on Sigma (max nodal |u| < 1e-8 there). Returns
    (samples, trace values); the non-tangential offset is delta = 3h.
    """
    domain = domain or u.mesh.domain
    if u.max_on_sigma() >= 1e-8:
        raise ValueError("u does not vanish on Sigma")
    if delta is None:
        delta = 3.0 * u.mesh.h
    if samples is None:
        samples = u.mesh.nodes[u.mesh.on_sigma]
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    nu = domain.sigma_normal(samples)
    probe = samples - delta * nu
    if not np.all(u.mesh.chart_contains(probe)):
        raise ChartError("sample too close to the Sigma-chart edge")
    vals = u.eval(probe) / delta
    return samples, vals


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def export_solution_csv(u: DiscreteSolution, path, metadata=()):
    with open(path, "w", newline="\n") as f:
        for line in metadata:
            f.write(f"# {line}\n")
        f.write("x,y,u\n")
        for (x, y), v in zip(u.mesh.nodes, u.values):
            f.write(f"{x:.17g},{y:.17g},{v:.17g}\n")


def export_mesh_off(mesh: Mesh, path):
    with open(path, "w", newline="\n") as f:
        f.write("OFF\n")
        f.write(f"{mesh.n_nodes} {len(mesh.tris)} 0\n")
        for x, y in mesh.nodes:
            f.write(f"{x:.17g} {y:.17g} 0\n")
        for a, b, c in mesh.tris:
            f.write(f"3 {a} {b} {c}\n")
