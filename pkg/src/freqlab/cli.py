"""Experiment command line: reproducible runs with machine-readable output.

Every command reads a JSON config (unknown keys rejected), writes CSV/JSON
artifacts stamped with the config hash and code version, and exits with
0 = all assertions pass, 2 = named assertion failure, 3 = config error,
4 = numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import (
    Ball,
    ChartError,
    CoefficientField,
    ConfigError,
    GraphEpigraph,
    HalfBall,
    UnitSquare,
    admissible,
    domain_from_json,
    field_from_json,
    _compile_expr,
)
from .solver import (
    ConvergenceError,
    DiscreteSolution,
    dirichlet_eigenpairs,
    green_function,
    harmonic_measure,
    mesh_domain,
    normal_derivative_trace,
    project,
    solve_dirichlet,
)
from .frequency import (
    _Picture,
    check_H_derivative,
    check_N_monotone,
    frequency_profile,
)
from .nodal import (
    cover_report,
    detect_small_gradient_points,
    extract_zero_set,
    nodal_measure,
    sign_constant_ball,
)
from .combinatorics import (
    TreeParams,
    alpha_of,
    binomial_tail,
    dimension_bound,
    epsilon0_of,
    mu_j,
    simulate_recursion,
    stirling_bound,
    z_of,
)
from .cantor_lab import (
    CantorSpec,
    ahlfors_bound,
    cantor_dimension,
    cantor_mesh,
    measured_density,
    sample_normal_point,
    theta,
)

EXIT_OK = 0
EXIT_ASSERT = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4


class ExperimentFailure(AssertionError):
    """A named experiment assertion did not hold."""


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def check_keys(cfg, allowed, where):
    unknown = set(cfg) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown config key(s) in {where}: {sorted(unknown)}")


def meta_lines(cfg, extra=()):
    lines = [f"freqlab_version={__version__}", f"config_hash={config_hash(cfg)}"]
    if "seed" in cfg:
        lines.append(f"seed={cfg['seed']}")
    lines.extend(extra)
    return lines


def write_csv(path, header, rows, meta):
    with open(path, "w", newline="\n") as f:
        for line in meta:
            f.write(f"# {line}\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(
                f"{v:.17g}" if isinstance(v, float) else str(v)
                for v in row) + "\n")


def write_json(path, payload, meta):
    payload = {"meta": dict(m.split("=", 1) for m in meta), **payload}
    with open(path, "w", newline="\n") as f:
        json.dump(payload, f, indent=1, sort_keys=True, default=float)
        f.write("\n")


def resolve_solution(domain, fld, spec, h, mesh=None):
    """Build a DiscreteSolution from a config 'solution' block.

    Kinds: closed_form (whitelisted expression, zero outside Omega),
    dirichlet (boundary data expression), green (pole), eigenfunction
    (1-based index).
    """
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError("solution block must have exactly one kind")
    kind, value = next(iter(spec.items()))
    if kind == "closed_form":
        fn = _compile_expr(value)
        return project(domain, lambda p: fn(p[:, 0], p[:, 1]), h, mesh=mesh)
    if kind == "dirichlet":
        fn = _compile_expr(value)
        return solve_dirichlet(domain, fld, lambda p: fn(p[:, 0], p[:, 1]),
                               h, mesh=mesh)
    if kind == "green":
        return green_function(domain, fld, tuple(value), h, mesh=mesh)
    if kind == "eigenfunction":
        pairs = dirichlet_eigenpairs(domain, fld, int(value), h, mesh=mesh)
        return pairs[int(value) - 1].solution
    raise ConfigError(f"unknown solution kind {kind!r}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_frequency_profile(cfg, out):
    allowed = {"experiment", "domain", "field", "solution", "center",
               "r_min", "r_max", "n_samples", "mesh_h", "C_admissible",
               "expect_N", "expect_tol", "checks", "seed", "threads"}
    check_keys(cfg, allowed, "frequency_profile")
    domain = domain_from_json(cfg["domain"])
    fld = field_from_json(cfg.get("field"))
    h = float(cfg.get("mesh_h", 1 / 256))
    u = resolve_solution(domain, fld, cfg["solution"], h)
    prof = frequency_profile(
        u, fld, tuple(cfg["center"]), float(cfg["r_min"]), float(cfg["r_max"]),
        int(cfg.get("n_samples", 20)), C_admissible=float(cfg.get("C_admissible", 1.0)))
    prof.to_csv(Path(out) / "profile.csv", meta_lines(cfg))
    failures = []
    reports = {}
    for name in cfg.get("checks", ["H_derivative", "N_monotone"]):
        if name == "H_derivative":
            rep = check_H_derivative(prof)
        elif name == "N_monotone":
            rep = check_N_monotone(prof)
        else:
            raise ConfigError(f"unknown check {name!r}")
        reports[name] = rep
        if not rep.get("passed", True):
            failures.append(name)
    if "expect_N" in cfg:
        target = float(cfg["expect_N"])
        tol = float(cfg.get("expect_tol", 0.01))
        dev = float(np.nanmax(np.abs(prof.N_values - target)) / max(target, 1e-30))
        reports["expect_N"] = {"target": target, "max_rel_dev": dev,
                               "passed": dev <= tol}
        if dev > tol:
            failures.append("expect_N")
    write_json(Path(out) / "checks.json", {"reports": reports},
               meta_lines(cfg))
    if failures:
        raise ExperimentFailure("failed checks: " + ", ".join(failures))


def cmd_cover(cfg, out):
    allowed = {"experiment", "domain", "field", "solution", "window",
               "n_samples", "rho_max", "r_floor", "mesh_h",
               "max_residual_slope", "seed", "threads"}
    check_keys(cfg, allowed, "cover")
    domain = domain_from_json(cfg["domain"])
    fld = field_from_json(cfg.get("field"))
    h = float(cfg.get("mesh_h", 1 / 256))
    u = resolve_solution(domain, fld, cfg["solution"], h)
    kwargs = {}
    if "r_floor" in cfg:
        kwargs["r_floor"] = float(cfg["r_floor"])
    rep = cover_report(u, tuple(cfg["window"]),
                       n_samples=int(cfg.get("n_samples", 129)),
                       rho_max=float(cfg.get("rho_max", 0.5)), **kwargs)
    payload = {
        "balls": rep["balls"],
        "residual": [[float(a), float(b)] for a, b in rep["residual"]],
        "boxcount": rep["boxcount"],
        "residual_slope": rep["residual_slope"],
        "r_floor": rep["r_floor"],
    }
    write_json(Path(out) / "cover.json", payload, meta_lines(cfg))
    cap = cfg.get("max_residual_slope")
    if cap is not None and rep["residual_slope"] > float(cap):
        raise ExperimentFailure(
            f"residual box slope {rep['residual_slope']:.3f} above {cap}")


def cmd_boundary_nodal(cfg, out):
    allowed = {"experiment", "domain", "field", "solution", "center",
               "radii", "S", "alpha", "mesh_h", "ratio_band", "seed",
               "threads"}
    check_keys(cfg, allowed, "boundary_nodal")
    domain = domain_from_json(cfg["domain"])
    fld = field_from_json(cfg.get("field"))
    h = float(cfg.get("mesh_h", 1 / 256))
    u = resolve_solution(domain, fld, cfg["solution"], h)
    x = np.asarray(cfg["center"], dtype=float)
    S = float(cfg.get("S", 1.0))
    radii = [float(r) for r in cfg["radii"]]
    nu_in = -domain.sigma_normal(x[None, :])[0]
    rows = []
    for r in radii:
        length = nodal_measure(u, (x, r))
        xt = x + 0.5 * r * nu_in          # the freedom in choosing x~
        pic = _Picture(u, fld, xt)
        H = pic.H(S * r)
        N = S * r * pic.I(S * r) / H if H > 1e-300 else math.nan
        rows.append((r, length, N))
    alpha_cfg = cfg.get("alpha", "fit")
    lengths = np.array([row[1] for row in rows])
    Ns = np.array([row[2] for row in rows])
    rs = np.array(radii)
    mask = lengths > 0
    if alpha_cfg == "fit":
        if mask.sum() >= 2:
            A = np.stack([np.log(Ns[mask] + 1), np.ones(mask.sum())], 1)
            coef, *_ = np.linalg.lstsq(A, np.log(lengths[mask] / rs[mask]),
                                       rcond=None)
            alpha = float(coef[0])
        else:
            alpha = 1.0
    else:
        alpha = float(alpha_cfg)
    ratios = np.where(mask, lengths / (rs * (Ns + 1.0) ** alpha), 0.0)
    pos = ratios[mask]
    C_fit = float(np.exp(np.mean(np.log(pos)))) if mask.any() else 0.0
    out_rows = [(r, L, N, float(q)) for (r, L, N), q in zip(rows, ratios)]
    write_csv(Path(out) / "boundary_nodal.csv",
              ["r", "nodal_length", "N_Sr", "ratio"], out_rows,
              meta_lines(cfg, [f"alpha={alpha:.17g}", f"C_fit={C_fit:.17g}"]))
    band = cfg.get("ratio_band", 0.1)
    if band is not None and mask.any():
        band = float(band)
        # a single fitted constant describes every ratio within the band
        if pos.max() > C_fit * (1 + band) or pos.min() < C_fit / (1 + band):
            raise ExperimentFailure(
                f"ratios [{pos.min():.3g}, {pos.max():.3g}] stray beyond "
                f"{band:.0%} of the fitted C={C_fit:.3g}")


def cmd_yau_scan(cfg, out):
    allowed = {"experiment", "domain", "field", "count", "mesh_h",
               "ball_radius", "center_grid", "lift_modes", "lift_radius",
               "variation_cap", "exclude_zero_length", "seed", "threads"}
    check_keys(cfg, allowed, "yau_scan")
    domain = domain_from_json(cfg.get("domain", {"kind": "unit_square"}))
    fld = field_from_json(cfg.get("field"))
    h = float(cfg.get("mesh_h", 1 / 256))
    count = int(cfg.get("count", 20))
    pairs = dirichlet_eigenpairs(domain, fld, count, h)
    rball = float(cfg.get("ball_radius", 0.25))
    grid = int(cfg.get("center_grid", 3))
    cs = np.linspace(0.35, 0.65, grid)
    centers = [(a, b) for a in cs for b in cs]
    rows = []
    threads = int(cfg.get("threads", 1))

    def one(kp):
        k, pair = kp
        u = pair.solution
        lam = pair.eigenvalue
        zs = extract_zero_set(u)
        mids = zs.segments.mean(axis=1) if len(zs.segments) else np.zeros((0, 2))
        if len(mids):
            far = domain.dist_sigma(mids) > 2 * u.mesh.h
            L = float(np.linalg.norm(zs.segments[far][:, 0]
                                     - zs.segments[far][:, 1], axis=1).sum())
        else:
            L = 0.0
        # interior frequency of the cylinder lift w = u exp(sqrt(lambda) t),
        # the object the sqrt(lambda) bound speaks about (u itself does not
        # solve the divergence equation)
        maxN = max(_lift_frequency(pair, np.asarray(c), rball)
                   for c in centers)
        return (k + 1, lam, L, maxN, L / math.sqrt(lam), maxN / math.sqrt(lam))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(one, enumerate(pairs)))
    else:
        rows = [one(kp) for kp in enumerate(pairs)]

    # cylinder lift validation on a few modes: the doubling of
    # u_lambda * exp(sqrt(lambda) t) sandwiched by its 3D frequency
    lift_rows = []
    lift_r = float(cfg.get("lift_radius", 0.15))
    for k in cfg.get("lift_modes", [1, 4, 9]):
        pair = pairs[k - 1]
        ok, D, N1, N2 = _lift_check(pair, domain, lift_r)
        lift_rows.append((k, D, N1, N2, int(ok)))
    write_csv(Path(out) / "yau_scan.csv",
              ["mode", "lambda", "nodal_length", "max_N",
               "length_over_sqrt_lambda", "N_over_sqrt_lambda"],
              rows, meta_lines(cfg))
    write_csv(Path(out) / "yau_lift.csv",
              ["mode", "doubling", "N_r", "N_2r", "passed"],
              lift_rows, meta_lines(cfg))
    cap = float(cfg.get("variation_cap", 3.0))
    lr = np.array([r[4] for r in rows])
    nr = np.array([r[5] for r in rows])
    if cfg.get("exclude_zero_length", True):
        lr = lr[lr > 0]
    fails = []
    if lr.max() / lr.min() > cap:
        fails.append(f"length ratio varies by {lr.max() / lr.min():.2f}")
    if nr.max() / nr.min() > cap:
        fails.append(f"frequency ratio varies by {nr.max() / nr.min():.2f}")
    if any(row[4] == 0 for row in lift_rows):
        fails.append("lift sandwich violated")
    if fails:
        raise ExperimentFailure("; ".join(fails))


def _lift_sphere_mean(pair, center, rr, n_sphere=48):
    """Sphere average of w^2 for the lift w = u exp(sqrt(lambda) t)."""
    u = pair.solution
    sq = math.sqrt(pair.eigenvalue)
    th = np.linspace(0, math.pi, n_sphere + 1)[1:-1]
    ph = np.linspace(0, 2 * math.pi, 2 * n_sphere, endpoint=False)
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    nx = np.sin(TH) * np.cos(PH)
    ny = np.sin(TH) * np.sin(PH)
    nt = np.cos(TH)
    pts = center[None, :] + rr * np.stack([nx.ravel(), ny.ravel()], 1)
    vals = u.eval(pts) * np.exp(sq * rr * nt.ravel())
    w = np.sin(TH).ravel()
    return float(np.sum(vals * vals * w) / np.sum(w))


def _lift_frequency(pair, center, r, delta=0.05):
    """N_w(center, r) via (r/2) dlog H_w/dr (exact identity H' = 2I)."""
    lo = _lift_sphere_mean(pair, center, r * (1 - delta))
    hi = _lift_sphere_mean(pair, center, r * (1 + delta))
    # H_w(r) = r^{2-1}... in d=3, H = r^{-2} * surface integral = 4 pi * mean
    dlog = (math.log(hi) - math.log(lo)) / (2 * delta)
    return 0.5 * dlog


def _lift_check(pair, domain, r, n_sphere=48, n_ball=40):
    """Sandwich D_w(r) in [0.9 N_w(r), 1.1 N_w(2r)] for the cylinder lift."""
    u = pair.solution
    lam = pair.eigenvalue
    sq = math.sqrt(lam)
    center = np.array([0.5, 0.5])

    def H_w(rr):
        th = np.linspace(0, math.pi, n_sphere + 1)[1:-1]
        ph = np.linspace(0, 2 * math.pi, 2 * n_sphere, endpoint=False)
        TH, PH = np.meshgrid(th, ph, indexing="ij")
        nx = np.sin(TH) * np.cos(PH)
        ny = np.sin(TH) * np.sin(PH)
        nt = np.cos(TH)
        pts = center[None, :] + rr * np.stack([nx.ravel(), ny.ravel()], 1)
        vals = u.eval(pts) * np.exp(sq * rr * nt.ravel())
        w = np.sin(TH).ravel()
        s2 = float(np.sum(vals * vals * w) / np.sum(w))
        return s2 * 4 * math.pi * rr ** 2 / rr ** 2

    def N_w(rr):
        g = np.linspace(-rr, rr, n_ball)
        X, Y, T = np.meshgrid(g, g, g, indexing="ij")
        inside = X ** 2 + Y ** 2 + T ** 2 < rr ** 2
        pts = center[None, :] + np.stack([X[inside], Y[inside]], 1)
        uv = u.eval(pts)
        gt = u.mesh.tri_gradients(u.values)
        # gradient magnitude via finite differences of the interpolant
        d = 1e-4
        ux = (u.eval(pts + [d, 0]) - u.eval(pts - [d, 0])) / (2 * d)
        uy = (u.eval(pts + [0, d]) - u.eval(pts - [0, d])) / (2 * d)
        et = np.exp(2 * sq * T[inside])
        dens = (ux ** 2 + uy ** 2 + lam * uv ** 2) * et
        cell = (2 * rr / n_ball) ** 3
        I = float(np.sum(dens) * cell) / rr ** 2
        return rr * I / H_w(rr)

    H1, H2 = H_w(r), H_w(2 * r)
    D = 0.5 * math.log2(H2 / H1)
    N1, N2 = N_w(r), N_w(2 * r)
    ok = 0.9 * N1 <= D <= 1.1 * N2
    return ok, D, N1, N2


def cmd_hopf_density(cfg, out):
    allowed = {"experiment", "domain", "field", "solution", "window",
               "n_samples", "mesh_h", "kappa_cap", "grad_threshold",
               "arc_lengths", "seed", "threads"}
    check_keys(cfg, allowed, "hopf_density")
    domain = domain_from_json(cfg["domain"])
    fld = field_from_json(cfg.get("field"))
    h = float(cfg.get("mesh_h", 1 / 128))
    u = resolve_solution(domain, fld, cfg["solution"], h)
    a, b = cfg["window"]
    n = int(cfg.get("n_samples", 9))
    xs = np.linspace(a, b, n + 2)[1:-1]
    samples = np.stack([xs, np.zeros_like(xs)], 1)
    _, trace = normal_derivative_trace(u, domain, samples=samples)
    l1, l2 = cfg.get("arc_lengths", [0.06, 0.1])
    mesh = u.mesh
    dens = []
    for x0 in xs:
        w = []
        for L in (l1, l2):
            arc = [((x0 - L / 2, 0.0), (x0 + L / 2, 0.0))]
            w.append(harmonic_measure(domain, fld, _pole_for(domain), arc,
                                      h, mesh=mesh))
        dens.append((w[1] - w[0]) / (l2 - l1))
    dens = np.asarray(dens)
    ratio = np.abs(trace) / np.maximum(dens, 1e-300)
    c = math.sqrt(ratio.max() * ratio.min())
    kappa = math.sqrt(ratio.max() / ratio.min())
    rows = list(zip(xs.tolist(), np.abs(trace).tolist(), dens.tolist(),
                    ratio.tolist()))
    write_csv(Path(out) / "hopf_density.csv",
              ["x", "normal_derivative", "density", "ratio"],
              rows, meta_lines(cfg, [f"kappa={kappa:.17g}",
                                     f"comparability_c={c:.17g}"]))
    thr = float(cfg.get("grad_threshold", 1e-3))
    det = detect_small_gradient_points(u, samples, thr)
    r_floor = 4 * u.mesh.h
    cap = float(cfg.get("kappa_cap", 10.0))
    fails = []
    if kappa > cap:
        fails.append(f"kappa {kappa:.2f} above {cap}")
    if len(det) * (xs[1] - xs[0]) > 2 * r_floor + 1e-12:
        fails.append("small-gradient set exceeds 2*r_floor")
    if fails:
        raise ExperimentFailure("; ".join(fails))


def _pole_for(domain):
    if isinstance(domain, HalfBall):
        c = domain.center
        return (c[0], c[1] + 0.5 * domain.radius)
    if isinstance(domain, Ball):
        return domain.center
    if isinstance(domain, GraphEpigraph):
        x0, x1, y0, y1 = domain.box
        return (0.5 * (x0 + x1), 0.5 * y1)
    raise ConfigError("no default pole for this domain kind")


def cmd_dim_bound(cfg, out):
    allowed = {"experiment", "delta0", "eps", "K", "d", "N0", "Nprime_root",
               "seed", "threads"}
    check_keys(cfg, allowed, "dim_bound")
    params = TreeParams(
        delta0=float(cfg["delta0"]), eps=float(cfg["eps"]),
        K=int(cfg["K"]), d=int(cfg.get("d", 2)),
        N0=float(cfg.get("N0", 4.0)),
        Nprime_root=float(cfg.get("Nprime_root", 4.0)))
    alpha = alpha_of(params.delta0)
    payload = {
        "alpha": alpha,
        "epsilon0": epsilon0_of(alpha),
        "z_alpha": z_of(alpha, params.delta0),
        "M": params.M,
        "dimension_bound": dimension_bound(params),
    }
    write_json(Path(out) / "dim_bound.json", payload, meta_lines(cfg))
    if not payload["dimension_bound"] < params.d - 1:
        raise ExperimentFailure("bound not below d-1")


def cmd_simulate(cfg, out):
    allowed = {"experiment", "delta0", "eps", "K", "d", "N0", "Nprime_root",
               "generations", "trials", "seed", "threads", "sigma_cap"}
    check_keys(cfg, allowed, "simulate")
    params = TreeParams(
        delta0=float(cfg["delta0"]), eps=float(cfg["eps"]),
        K=int(cfg["K"]), d=int(cfg.get("d", 2)),
        N0=float(cfg.get("N0", 4.0)),
        Nprime_root=float(cfg.get("Nprime_root", 4.0)))
    seed = int(cfg.get("seed", 0))
    trials = int(cfg.get("trials", 10 ** 6))
    rows = []
    worst = 0.0
    for j in cfg["generations"]:
        rep = simulate_recursion(params, int(j), trials, seed)
        beta = rep["beta"]
        try:
            sb = stirling_bound(int(j), beta, params.delta0)
        except ValueError:
            sb = math.nan
        rows.append((int(j), rep["exact_tail"], sb, rep["p_bad"],
                     rep["stderr"]))
        exact = rep["exact_tail"]
        if exact is not None and exact > 0:
            # sigma scale of the estimator under the exact law
            sigma = max(math.sqrt(exact * (1 - exact) / trials), 1e-300)
            worst = max(worst, abs(rep["p_bad"] - exact) / sigma)
    write_csv(Path(out) / "simulate.csv",
              ["j", "exact_tail", "stirling_bound", "mc_estimate",
               "mc_stderr"],
              rows, meta_lines(cfg))
    cap = float(cfg.get("sigma_cap", 3.0))
    if worst > cap:
        raise ExperimentFailure(
            f"Monte Carlo deviates {worst:.2f} sigma from the exact tail")


def cmd_cantor(cfg, out):
    allowed = {"experiment", "k", "depth", "aperture", "x", "radii",
               "mesh_h", "solve", "decay_min", "compare_depth", "seed",
               "threads"}
    check_keys(cfg, allowed, "cantor")
    spec = CantorSpec(k=int(cfg.get("k", 1)), depth=int(cfg.get("depth", 6)),
                      aperture=float(cfg.get("aperture", 1.0)))
    xval = cfg.get("x", 0.0)
    if isinstance(xval, str) and xval.startswith("normal:"):
        x = float(sample_normal_point(spec, 64, seed=int(xval.split(":")[1])))
    else:
        x = float(xval)
    radii = [float(r) for r in cfg.get("radii", [1 / 3, 1 / 9, 1 / 27])]
    do_solve = bool(cfg.get("solve", True))
    h = float(cfg.get("mesh_h", spec.smallest_gap() / 8))
    mesh = cantor_mesh(spec, h) if do_solve else None
    rows = []
    fails = []
    prev_density = None
    for r in radii:
        bound = ahlfors_bound(spec, x, r)
        grid = np.geomspace(r, 1.0, 64)
        tmin = min(theta(spec, x, float(s)) for s in grid)
        measured = math.nan
        ratio = math.nan
        if do_solve:
            res = measured_density(spec, x, r, h, mesh=mesh)
            measured = res["omega"]
            ratio = measured / bound["bound"]
            if measured > bound["bound"]:
                fails.append(f"measured {measured:.3e} above bound at r={r:.4g}")
        dens = bound["bound"] / r
        if prev_density is not None:
            if prev_density / dens < float(cfg.get("decay_min", 1.2)):
                fails.append(f"bound/r decay below target at r={r:.4g}")
        prev_density = dens
        rows.append((r, tmin, bound["integral"], bound["bound"],
                     measured, ratio))
    write_csv(Path(out) / "cantor.csv",
              ["r", "theta_min", "integral", "bound", "measured", "ratio"],
              rows, meta_lines(cfg, [
                  f"slope=1/a={spec.slope:.17g}",
                  f"dimension={cantor_dimension(spec):.17g}"]))
    cmp_depth = cfg.get("compare_depth")
    if do_solve and cmp_depth:
        spec2 = CantorSpec(k=spec.k, depth=int(cmp_depth),
                           aperture=spec.aperture)
        h2 = spec2.smallest_gap() / 8
        res2 = measured_density(spec2, x, radii[0], h2)
        base = rows[0][4]
        drift = abs(res2["omega"] - base) / max(base, 1e-300)
        write_json(Path(out) / "depth_comparison.json",
                   {"depth": spec.depth, "other_depth": spec2.depth,
                    "omega": base, "omega_other": res2["omega"],
                    "relative_drift": drift}, meta_lines(cfg))
    if fails:
        raise ExperimentFailure("; ".join(fails))


COMMANDS = {
    "frequency-profile": cmd_frequency_profile,
    "cover": cmd_cover,
    "boundary-nodal": cmd_boundary_nodal,
    "yau-scan": cmd_yau_scan,
    "hopf-density": cmd_hopf_density,
    "dim-bound": cmd_dim_bound,
    "simulate": cmd_simulate,
    "cantor": cmd_cantor,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="freqlab",
        description="boundary unique continuation experiments")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--mesh-h", type=float, default=None)
    args = parser.parse_args(argv)
    try:
        with open(args.config) as f:
            cfg = json.load(f)
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.threads is not None:
            cfg["threads"] = args.threads
        if args.mesh_h is not None:
            cfg["mesh_h"] = args.mesh_h
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, outdir)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExperimentFailure as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except (ConvergenceError, ChartError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print("ok")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
