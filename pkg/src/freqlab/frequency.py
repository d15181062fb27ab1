"""Frequency machinery: H, I, N with the mu-weight, and check suites.

Sphere integrals use 2048 uniformly spaced arc samples with bilinear
interpolation of the stored solution; area integrals use cell sums with
exact circle clipping of the cut triangles, so both are smooth in r and
finite differences of H and N are meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ChartError, CoefficientField, admissible, normalize_at
from .solver import DiscreteSolution

__all__ = [
    "FrequencyProfile",
    "mu_weight",
    "H_of",
    "I_of",
    "frequency_profile",
    "check_H_derivative",
    "check_N_monotone",
    "check_growth_bound",
    "check_annulus_bounds",
    "check_mean_value_bound",
    "check_H_center_move",
    "check_center_perturbation",
    "doubling_exponent",
    "vanishing_order_estimate",
    "center_move_constant",
    "disk_triangle_areas",
]

N_ARC_SAMPLES = 2048
H_ZERO = 1e-30


# ---------------------------------------------------------------------------
# exact disk-polygon clipping
# ---------------------------------------------------------------------------

def _edge_disk_contribution(P, Q, r):
    """Signed area of triangle(0, P, Q) ∩ disk(0, r) for edge arrays (m,2).

    Summing over the directed edges of a polygon gives the polygon-disk
    intersection area (winding handles every containment case).
    """
    U = Q - P
    a = np.einsum("ij,ij->i", U, U)
    b = 2.0 * np.einsum("ij,ij->i", P, U)
    c = np.einsum("ij,ij->i", P, P) - r * r
    disc = b * b - 4.0 * a * c
    safe = np.maximum(disc, 0.0)
    sq = np.sqrt(safe)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where((disc > 0) & (a > 0), (-b - sq) / (2 * a), 0.0)
        t2 = np.where((disc > 0) & (a > 0), (-b + sq) / (2 * a), 0.0)
    t1 = np.clip(t1, 0.0, 1.0)
    t2 = np.clip(t2, np.maximum(t1, 0.0), 1.0)
    total = np.zeros(len(P))
    knots = (np.zeros_like(t1), t1, t2, np.ones_like(t1))
    for ta, tb in zip(knots[:-1], knots[1:]):
        A = P + ta[:, None] * U
        B = P + tb[:, None] * U
        mid = P + (0.5 * (ta + tb))[:, None] * U
        inside = np.einsum("ij,ij->i", mid, mid) <= r * r
        cross = A[:, 0] * B[:, 1] - A[:, 1] * B[:, 0]
        dot = np.einsum("ij,ij->i", A, B)
        tri = 0.5 * cross
        sector = 0.5 * r * r * np.arctan2(cross, dot)
        total += np.where(tb > ta, np.where(inside, tri, sector), 0.0)
    return total


def disk_triangle_areas(tri_pts, r):
    """Area of each triangle's intersection with the disk B(0, r).

    ``tri_pts`` has shape (t, 3, 2), CCW, coordinates relative to the disk
    center. Fully inside/outside triangles are classified in bulk; only the
    band near the circle gets the exact clip.
    """
    d2 = np.einsum("tkd,tkd->tk", tri_pts, tri_pts)
    dmax = np.sqrt(d2.max(axis=1))
    dmin = np.sqrt(d2.min(axis=1))
    edge = tri_pts - np.roll(tri_pts, 1, axis=1)
    max_edge = np.sqrt(np.einsum("tkd,tkd->tk", edge, edge).max(axis=1))
    out = np.zeros(len(tri_pts))
    full = dmax <= r
    band = ~full & (dmin - max_edge <= r)
    if np.any(full):
        P = tri_pts[full]
        e1 = P[:, 1] - P[:, 0]
        e2 = P[:, 2] - P[:, 0]
        out[full] = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    if np.any(band):
        T = tri_pts[band]
        acc = np.zeros(len(T))
        for k in range(3):
            acc += _edge_disk_contribution(T[:, k], T[:, (k + 1) % 3], r)
        out[band] = np.maximum(acc, 0.0)
    return out


# ---------------------------------------------------------------------------
# the (possibly normalized) picture around a center
# ---------------------------------------------------------------------------

class _Picture:
    """Quadrature state about one center, in normalized coordinates.

    If A(x) != I the picture is the transformed one: coordinates
    y = S^{-1}(p - x) with S = sqrt(A(x)), field A_S(y), solution
    u_S(y) = u(x + S y). All radii below refer to these coordinates.
    """

    def __init__(self, u: DiscreteSolution, fld: CoefficientField, x):
        self.u = u
        self.fld = fld
        self.x = np.asarray(x, dtype=float).reshape(2)
        A0 = fld(self.x[None, :])[0]
        self.transformed = bool(np.max(np.abs(A0 - np.eye(2))) > 1e-8)
        if self.transformed:
            self.fld_t, self.amap = normalize_at(fld, self.x)
            self.S = self.amap.S
            self.Sinv = np.linalg.inv(self.S)
        else:
            self.fld_t = fld
            self.S = np.eye(2)
            self.Sinv = np.eye(2)
        mesh = u.mesh
        rel = mesh.nodes - self.x
        mapped = rel @ self.Sinv.T
        self._tv = mapped[mesh.tris]                       # (t,3,2)
        d2 = np.einsum("tkd,tkd->tk", self._tv, self._tv)
        self._dmax = np.sqrt(d2.max(axis=1))
        self._dmin = np.sqrt(d2.min(axis=1))
        e = self._tv - np.roll(self._tv, 1, axis=1)
        self._max_edge = np.sqrt(np.einsum("tkd,tkd->tk", e, e).max(axis=1))
        detS = float(np.linalg.det(self.S))
        self._areas = mesh.tri_areas / detS
        self._energy = self._energy_density()
        cen = (mesh.tri_centroids - self.x) @ self.Sinv.T
        self._cen = cen
        self._cen_rho = np.hypot(cen[:, 0], cen[:, 1])
        self._u_cen = None

    def _energy_density(self):
        # (A_S grad u_S, grad u_S) per cell; center-independent in the
        # untransformed case, so cache it on the solution for cube scans
        u, fld, mesh = self.u, self.fld, self.u.mesh
        if not self.transformed:
            cache = getattr(u, "_energy_cache", None)
            if cache is not None and cache[0] is fld:
                return cache[1]
        grads = mesh.tri_gradients(u.values) @ self.S.T     # grad of u_S
        A_phys = fld(mesh.tri_centroids)
        if self.transformed:
            A_t = np.einsum("ab,tbc,cd->tad", self.Sinv, A_phys, self.Sinv)
            return np.einsum("td,tde,te->t", grads, A_t, grads)
        energy = np.einsum("td,tde,te->t", grads, A_phys, grads)
        u._energy_cache = (fld, energy)
        return energy

    def u_at_centroids(self):
        if self._u_cen is None:
            m = self.u.mesh
            self._u_cen = self.u.values[m.tris].mean(axis=1)
        return self._u_cen

    def arc_points(self, r):
        th = 2.0 * math.pi * (np.arange(N_ARC_SAMPLES) + 0.5) / N_ARC_SAMPLES
        z = r * np.stack([np.cos(th), np.sin(th)], axis=1)
        phys = z @ self.S.T + self.x
        return z, phys

    def mu_at(self, z, phys):
        A = self.fld(phys)
        At = np.einsum("ab,nbc,cd->nad", self.Sinv, A, self.Sinv)
        zz = np.einsum("nd,nd->n", z, z)
        return np.einsum("nd,nde,ne->n", z, At, z) / zz

    def H(self, r):
        z, phys = self.arc_points(r)
        vals = self.u.eval(phys)               # extension by zero outside
        mu = self.mu_at(z, phys)
        dtheta = 2.0 * math.pi / N_ARC_SAMPLES
        # r^{1-d} * ∮ mu |u|^2, d sigma = r dtheta, d = 2
        return float(np.sum(mu * vals * vals) * dtheta)

    def clip_areas(self, r):
        out = np.zeros(len(self._tv))
        full = self._dmax <= r
        band = ~full & (self._dmin - self._max_edge <= r)
        out[full] = self._areas[full]
        if np.any(band):
            T = self._tv[band]
            acc = np.zeros(len(T))
            for k in range(3):
                acc += _edge_disk_contribution(T[:, k], T[:, (k + 1) % 3], r)
            out[band] = np.clip(acc, 0.0, None)
        return out

    def I(self, r):
        areas = self.clip_areas(r)
        return float(np.sum(self._energy * areas) / r)

    def ball_mean_u2(self, r):
        """Average of |u|^2 over B(0, r) with the zero extension."""
        areas = self.clip_areas(r)
        u2 = self.u_at_centroids() ** 2
        return float(np.sum(u2 * areas) / (math.pi * r * r))

    def annulus_mean(self, r, delta, c_H):
        """Average of e^{c_H |y|} mu |u|^2 over the annulus A(0, r, r+delta)."""
        a_out = self.clip_areas(r + delta)
        a_in = self.clip_areas(r)
        w = a_out - a_in
        keep = w > 0
        cen = self._cen[keep]
        rho = self._cen_rho[keep]
        phys = cen @ self.S.T + self.x
        mu = self.mu_at(cen, phys)
        u2 = self.u_at_centroids()[keep] ** 2
        integrand = np.exp(c_H * rho) * mu * u2
        total = float(np.sum(integrand * w[keep]))
        area = math.pi * ((r + delta) ** 2 - r ** 2)
        return total / area


def mu_weight(fld: CoefficientField, x, y):
    """mu_x(y) = (A(y)(y-x), y-x)/|y-x|^2; lies in [1/Lambda, Lambda]."""
    x = np.asarray(x, dtype=float).reshape(2)
    y = np.asarray(y, dtype=float).reshape(2)
    d = y - x
    n2 = float(d @ d)
    if n2 == 0.0:
        raise ValueError("mu weight undefined at y = x")
    A = fld(y[None, :])[0]
    return float(d @ (A @ d) / n2)


def _require_identity_at(fld, x):
    A0 = fld(np.asarray(x, float).reshape(1, 2))[0]
    if np.max(np.abs(A0 - np.eye(2))) > 1e-8:
        raise ValueError(
            "A(x) must be the identity here; route through normalize_at "
            "or use frequency_profile for general centers")


def _check_chart(u, x, r):
    if not u.mesh.domain.ball_boundary_in_sigma(np.asarray(x, float), r):
        raise ChartError("ball not compactly inside Sigma-chart")


def H_of(u: DiscreteSolution, fld, x, r):
    """Weighted sphere average r^{1-d} ∮ mu |u|^2 (u extended by zero)."""
    _require_identity_at(fld, x)
    _check_chart(u, x, r)
    return _Picture(u, fld, x).H(r)


def I_of(u: DiscreteSolution, fld, x, r):
    """Normalized energy r^{1-d} ∫_{B∩Omega} (A grad u, grad u)."""
    _require_identity_at(fld, x)
    _check_chart(u, x, r)
    return _Picture(u, fld, x).I(r)


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------

@dataclass
class FrequencyProfile:
    center: np.ndarray
    radii: np.ndarray
    H_values: np.ndarray
    I_values: np.ndarray
    N_values: np.ndarray
    admissible_flags: np.ndarray
    c_H: float
    C_N: float
    transformed: bool = False
    ellipticity: float = 1.0

    def to_csv(self, path, metadata=()):
        with open(path, "w", newline="\n") as f:
            for line in metadata:
                f.write(f"# {line}\n")
            f.write("r,H,I,N,admissible\n")
            for r, H, I, N, a in zip(self.radii, self.H_values, self.I_values,
                                     self.N_values, self.admissible_flags):
                f.write(f"{r:.17g},{H:.17g},{I:.17g},{N:.17g},{int(a)}\n")


def frequency_profile(u: DiscreteSolution, fld, x, r_min, r_max, n_samples,
                      spacing="geometric", C_admissible=1.0,
                      c_H=None, C_N=None):
    """Sample H, I, N over radii with admissibility flags.

    Centers where A(x) != I are handled through the normalized picture.
    Radii are geometric by default so the log-derivative checks are exact
    for homogeneous solutions. c_H and C_N default to 10*L_A.
    """
    if n_samples < 8:
        raise ValueError("need n_samples >= 8")
    x = np.asarray(x, dtype=float).reshape(2)
    _check_chart(u, x, r_max)
    if spacing == "geometric":
        radii = np.geomspace(r_min, r_max, n_samples)
    elif spacing == "linear":
        radii = np.linspace(r_min, r_max, n_samples)
    else:
        raise ValueError("spacing must be 'geometric' or 'linear'")
    pic = _Picture(u, fld, x)
    H = np.empty(n_samples)
    I = np.empty(n_samples)
    for i, r in enumerate(radii):
        H[i] = pic.H(float(r))
        I[i] = pic.I(float(r))
    with np.errstate(divide="ignore", invalid="ignore"):
        N = np.where(H > H_ZERO, radii * I / H, np.nan)
    flags = np.array([
        admissible(x, float(r), u.mesh.domain, fld, C=C_admissible)
        for r in radii
    ])
    L = fld.lipschitz_L
    return FrequencyProfile(
        center=x, radii=radii, H_values=H, I_values=I, N_values=N,
        admissible_flags=flags,
        c_H=10.0 * L if c_H is None else float(c_H),
        C_N=10.0 * L if C_N is None else float(C_N),
        transformed=pic.transformed,
        ellipticity=fld.ellipticity_Lambda,
    )


# ---------------------------------------------------------------------------
# check suites (each returns a plain dict report)
# ---------------------------------------------------------------------------

def check_H_derivative(profile: FrequencyProfile, kappa=10.0, slack=5e-3):
    """Compare the radial derivative of H with 2I (H' = 2I up to L_A terms).

    H' is a central difference in log r (exact for homogeneous solutions on
    geometric radii). Reports max |H' - 2I| / H against kappa*L_A + slack.
    """
    r, H, I = profile.radii, profile.H_values, profile.I_values
    if len(r) < 16:
        raise ValueError("need a profile with >= 16 radii")
    lr = np.log(r)
    lH = np.log(np.maximum(H, H_ZERO))
    dH = np.empty_like(H)
    dH[1:-1] = (lH[2:] - lH[:-2]) / (lr[2:] - lr[:-2])
    dH[0] = dH[1]
    dH[-1] = dH[-2]
    Hprime = H * dH / r
    resid = np.abs(Hprime - 2.0 * I) / np.maximum(H, H_ZERO)
    resid = resid[1:-1]  # one-sided ends excluded
    L_A = profile.c_H / 10.0 if profile.c_H else 0.0
    bound = kappa * L_A + slack
    return {
        "check": "H_derivative",
        "max_residual": float(resid.max()),
        "bound": float(bound),
        "kappa": kappa,
        "slack": slack,
        "passed": bool(resid.max() <= bound),
    }


def check_N_monotone(profile: FrequencyProfile, kappa=10.0, slack=5e-3,
                     L_A=None):
    """Smallest Chat >= 0 making e^{r Chat} N(r) nondecreasing.

    Only applicable when all radii are admissible. Reports Chat against
    kappa*L_A + slack (harmonic case: Chat is pure quadrature noise). The
    almost-monotonicity statement needs ellipticity below 2; beyond that
    the fitted constant is reported without an assertion.
    """
    if not profile.admissible_flags.all():
        return {"check": "N_monotone", "applicable": False,
                "passed": True, "note": "inadmissible radii present"}
    report_only = profile.ellipticity >= 2.0
    r, N = profile.radii, profile.N_values
    ok = np.isfinite(N)
    r, N = r[ok], N[ok]
    if len(r) < 2:
        return {"check": "N_monotone", "applicable": False,
                "passed": True, "note": "too few finite samples"}
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.log(N[:-1] / N[1:]) / (r[1:] - r[:-1])
    chat = float(max(0.0, np.nanmax(need)))
    if L_A is None:
        L_A = profile.C_N / 10.0 if profile.C_N else 0.0
    bound = kappa * L_A + slack
    out = {
        "check": "N_monotone",
        "applicable": True,
        "C_hat": chat,
        "bound": float(bound),
        "passed": bool(report_only or chat <= bound),
    }
    if report_only:
        out["note"] = "ellipticity >= 2: constant reported, not asserted"
    return out


def check_growth_bound(u, fld, x, rho, alpha_ratio, c_H=None, C_N=None,
                       C_admissible=1.0, rel_slack=5e-3):
    """Two-sided growth control of log(H(alpha*rho)/H(rho)) by N.

    Sandwich: 2 N(rho) log(alpha) e^{-C_N (alpha-1) rho} - c_H (alpha-1) rho
    <= log ratio <= 2 N(alpha rho) log(alpha) e^{C_N (alpha-1) rho}
    + c_H (alpha-1) rho.
    """
    alpha = float(alpha_ratio)
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    x = np.asarray(x, dtype=float).reshape(2)
    if not admissible(x, alpha * rho, u.mesh.domain, fld, C=C_admissible):
        raise ValueError("inadmissible configuration (x, alpha*rho)")
    L = fld.lipschitz_L
    c_H = 10.0 * L if c_H is None else c_H
    C_N = 10.0 * L if C_N is None else C_N
    pic = _Picture(u, fld, x)
    H1, H2 = pic.H(rho), pic.H(alpha * rho)
    I1, I2 = pic.I(rho), pic.I(alpha * rho)
    N1 = rho * I1 / H1
    N2 = alpha * rho * I2 / H2
    mid = math.log(H2 / H1)
    lo = 2 * N1 * math.log(alpha) * math.exp(-C_N * (alpha - 1) * rho) \
        - c_H * (alpha - 1) * rho
    hi = 2 * N2 * math.log(alpha) * math.exp(C_N * (alpha - 1) * rho) \
        + c_H * (alpha - 1) * rho
    tol = rel_slack * max(1.0, abs(mid))
    return {
        "check": "growth_bound",
        "log_ratio": mid, "lower": lo, "upper": hi,
        "N_rho": N1, "N_alpha_rho": N2,
        "passed": bool(lo - tol <= mid <= hi + tol),
    }


def check_annulus_bounds(u, fld, x, r, delta, c_H=None, rel_slack=5e-3):
    """Annulus-average sandwich between e^{c_H r} H(r) and the outer value.

    mean of e^{c_H |y|} mu |u|^2 over A(0, r, r+delta) sits between
    e^{c_H r} H(r)/(d|B_1|) and e^{c_H (r+delta)} H(r+delta)/(d|B_1|).
    """
    _require_identity_at(fld, x)
    _check_chart(u, x, r + delta)
    L = fld.lipschitz_L
    c_H = 10.0 * L if c_H is None else c_H
    pic = _Picture(u, fld, x)
    dB1 = 2.0 * math.pi  # d * |B_1| for d = 2
    lo = math.exp(c_H * r) * pic.H(r) / dB1
    hi = math.exp(c_H * (r + delta)) * pic.H(r + delta) / dB1
    mean = pic.annulus_mean(r, delta, c_H)
    tol = rel_slack * max(hi, 1e-300)
    return {
        "check": "annulus_bounds",
        "lower": lo, "mean": mean, "upper": hi,
        "passed": bool(lo - tol <= mean <= hi + tol),
    }


def check_mean_value_bound(u, fld, x, r, kappa=10.0, c_H=None):
    """Ball mean of |u|^2 controlled by H at the Lambda^(1/2)-inflated radius."""
    x = np.asarray(x, dtype=float).reshape(2)
    lam = fld.ellipticity_Lambda
    _check_chart(u, x, math.sqrt(lam) * r)
    L = fld.lipschitz_L
    c_H = 10.0 * L if c_H is None else c_H
    pic = _Picture(u, fld, x)
    # the lemma's mean is over the physical ball B(x, r), zero extension
    mean = _ball_mean_u2_physical(u, x, r)
    rhs = kappa * math.exp(c_H * math.sqrt(lam) * r) * pic.H(math.sqrt(lam) * r)
    return {
        "check": "mean_value_bound",
        "mean_u2": mean, "bound": rhs, "kappa": kappa,
        "passed": bool(mean <= rhs),
    }


def _ball_mean_u2_physical(u, x, r):
    mesh = u.mesh
    rel_tris = mesh.nodes[mesh.tris] - np.asarray(x, float)
    areas = disk_triangle_areas(rel_tris, r)
    u2 = u.values[mesh.tris].mean(axis=1) ** 2
    return float(np.sum(u2 * areas) / (math.pi * r * r))


def center_move_constant(gamma, delta, lam_min=1.0, lam_max=1.0, d=2):
    """Annular-volume ratio constant from the H-center-move estimate."""
    num = (lam_min ** -1 * (1 + gamma + delta)) ** d \
        - (lam_max ** -1 * (1 - gamma)) ** d
    den = (1 + delta) ** d - 1
    return num / den


def check_H_center_move(u, fld, x, z, r, gamma, delta, rel_slack=5e-3):
    """H(x, r) <= C(gamma, delta) H(z, lam^{1/2}(1+gamma+delta) r)."""
    x = np.asarray(x, dtype=float).reshape(2)
    z = np.asarray(z, dtype=float).reshape(2)
    if np.linalg.norm(z - x) > gamma * r + 1e-15:
        raise ValueError("|z - x| must be <= gamma * r")
    _require_identity_at(fld, x)
    Az = fld(z[None, :])[0]
    ev = np.linalg.eigvalsh(Az)
    lmin, lmax = math.sqrt(ev[0]), math.sqrt(ev[1])
    C = center_move_constant(gamma, delta, lmin, lmax)
    lam = fld.ellipticity_Lambda
    r2 = math.sqrt(lam) * (1 + gamma + delta) * r
    Hx = _Picture(u, fld, x).H(r)
    Hz = _Picture(u, fld, z).H(r2)
    rhs = C * Hz
    return {
        "check": "H_center_move",
        "H_x": Hx, "H_z_inflated": Hz, "C": C,
        "passed": bool(Hx <= rhs * (1 + rel_slack)),
    }


def check_center_perturbation(u, fld, x, z, r, gamma, C_admissible=1.0,
                              C_max=10.0):
    """Frequency stability under center moves: N(x, r) <= C + C N(z, 4r).

    Reports the smallest C making the inequality hold and asserts it stays
    below C_max (harmonic battery contract).
    """
    x = np.asarray(x, dtype=float).reshape(2)
    z = np.asarray(z, dtype=float).reshape(2)
    lam = fld.ellipticity_Lambda
    if gamma >= 1.0 / (lam + 1.0):
        raise ValueError("gamma must be below 1/(Lambda+1)")
    if np.linalg.norm(z - x) > gamma * r + 1e-15:
        raise ValueError("|z - x| must be <= gamma * r")
    if not admissible(z, 4 * r, u.mesh.domain, fld, C=C_admissible):
        raise ValueError("(z, 4r) not admissible")
    px = _Picture(u, fld, x)
    pz = _Picture(u, fld, z)
    Nx = r * px.I(r) / px.H(r)
    Nz = 4 * r * pz.I(4 * r) / pz.H(4 * r)
    C_star = Nx / (1.0 + Nz)
    return {
        "check": "center_perturbation",
        "N_x_r": Nx, "N_z_4r": Nz, "C_star": C_star,
        "passed": bool(C_star <= C_max),
    }


def doubling_exponent(u, fld, x, r):
    """log2 sqrt(H(x, 2r) / H(x, r)); the r->0 limit is the vanishing order."""
    _check_chart(u, x, 2 * r)
    pic = _Picture(u, fld, x)
    H1 = pic.H(r)
    H2 = pic.H(2 * r)
    if H1 <= H_ZERO or H2 <= H_ZERO:
        raise ValueError("H numerically zero; doubling exponent undefined")
    return 0.5 * math.log2(H2 / H1)


def vanishing_order_estimate(u, fld, x, r_sequence):
    """Extrapolated doubling exponent with an uncertainty estimate.

    ``r_sequence`` must be geometric with ratio 2 (descending), length >= 4.
    Aitken extrapolation of the doubling exponents gives the order; the
    uncertainty is the gap of the last two iterates. A non-monotone tail is
    flagged, not fatal.
    """
    rs = np.asarray(r_sequence, dtype=float)
    if len(rs) < 4:
        raise ValueError("need at least 4 radii")
    ratios = rs[:-1] / rs[1:]
    if not np.allclose(ratios, 2.0, rtol=1e-9):
        raise ValueError("radii must decrease geometrically with ratio 2")
    d = np.array([doubling_exponent(u, fld, x, float(r)) for r in rs])
    d_small_first = d[::-1]
    diffs = np.diff(d_small_first)
    monotone_tail = bool(np.all(diffs[-2:] >= -1e-12) or
                         np.all(diffs[-2:] <= 1e-12))
    a, b, c = d_small_first[2], d_small_first[1], d_small_first[0]
    denom = (c - b) - (b - a)
    if abs(denom) > 1e-14:
        order = c - (c - b) ** 2 / denom
    else:
        order = c
    uncertainty = abs(d_small_first[0] - d_small_first[1])
    return {
        "order": float(order),
        "uncertainty": float(uncertainty),
        "doublings": d,
        "monotone_tail": monotone_tail,
    }
