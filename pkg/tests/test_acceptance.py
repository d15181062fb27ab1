"""Acceptance suite: the twelve headline criteria.

Each test enforces its stated tolerance and runtime budget and prints one
PASS/FAIL line (run with -s to see them inline). Closed-form oracles are
spelled out where the criterion is exact.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from freqlab.geometry import (
    Ball,
    CoefficientField,
    GraphEpigraph,
    HalfBall,
    LipschitzGraph,
    PlanarCone,
    UnitSquare,
    cone_vanishing_order_2d,
)
from freqlab.solver import (
    DiscreteSolution,
    dirichlet_eigenpairs,
    green_function,
    harmonic_measure,
    mesh_domain,
    normal_derivative_trace,
    polar_mesh,
    project,
    solve_dirichlet,
)
from freqlab.frequency import (
    _Picture,
    check_annulus_bounds,
    check_center_perturbation,
    check_growth_bound,
    check_H_center_move,
    check_H_derivative,
    check_mean_value_bound,
    check_N_monotone,
    frequency_profile,
    vanishing_order_estimate,
)
from freqlab.whitney import (
    build_tree,
    verify_cube_conditions,
    vertical_translate,
    whitney_decompose,
)
from freqlab.nodal import (
    box_counting_dimension,
    cover_report,
    detect_small_gradient_points,
    extract_zero_set,
)
from freqlab.combinatorics import (
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
from freqlab.cantor_lab import (
    CantorSpec,
    ahlfors_bound,
    cantor_dimension,
    cantor_intervals,
    cantor_mesh,
    measured_density,
)
from freqlab import cli

I2 = CoefficientField.identity()


def report(name, passed, detail=""):
    tag = "PASS" if passed else "FAIL"
    print(f"[acceptance] {tag} {name} {detail}")
    assert passed, f"{name}: {detail}"


def monotone_violation(vals):
    vals = np.asarray(vals, dtype=float)
    drops = np.maximum(0.0, vals[:-1] - vals[1:]) / np.abs(vals[1:])
    return float(drops.max()) if len(drops) else 0.0


# ---------------------------------------------------------------------------
# criterion 1: frequency exactness on homogeneous harmonics
# ---------------------------------------------------------------------------

def test_criterion_1_frequency_exactness():
    dom = Ball()
    mesh = mesh_domain(dom, 1 / 512)
    worst = 0.0
    slowest = 0.0
    for k in range(1, 6):
        t0 = time.time()
        z = mesh.nodes[:, 0] + 1j * mesh.nodes[:, 1]
        u = DiscreteSolution(mesh, np.real(z ** k), I2, 0.0)
        prof = frequency_profile(u, I2, (0.0, 0.0), 0.1, 0.4, 13)
        dev = float(np.max(np.abs(prof.N_values - k)) / k)
        worst = max(worst, dev)
        dt = time.time() - t0
        slowest = max(slowest, dt)
        assert dev <= 0.01, f"k={k}: N deviates {dev:.2%}"
        assert dt < 30.0, f"k={k} took {dt:.1f}s"
    report("1 frequency exactness",
           worst <= 0.01 and slowest < 30.0,
           f"worst rel dev {worst:.2e}, slowest {slowest:.1f}s")


# ---------------------------------------------------------------------------
# criterion 2: harmonic monotonicity of H and N with certified slack
# ---------------------------------------------------------------------------

def _vee_domain(tau):
    g = LipschitzGraph(((-1.0, tau), (0.0, 0.0), (1.0, tau)), tau)
    return GraphEpigraph(g, (-1.0, 1.0, -0.5, 1.5))


def _sector_mode(tau, j):
    theta0 = math.atan(tau)
    beta = math.pi / (math.pi - 2 * theta0)

    def fn(p):
        z = p[:, 0] + 1j * p[:, 1]
        w = z * np.exp(-1j * theta0)
        return np.imag(w ** (j * beta))
    return fn


def _harmonic_battery(h):
    """(solution, center, r_min, r_max) tuples; all A = I, vanish on Sigma."""
    out = []
    hd = HalfBall()
    mesh_hd = mesh_domain(hd, h)
    z = mesh_hd.nodes[:, 0] + 1j * mesh_hd.nodes[:, 1]
    y = mesh_hd.nodes[:, 1]

    def sol(vals):
        return DiscreteSolution(mesh_hd, vals, I2, 0.0)

    out.append((sol(np.imag(z)), (0.0, 0.0), 0.1, 0.45))
    out.append((sol(np.imag(z ** 2)), (0.0, 0.0), 0.1, 0.45))
    out.append((sol(np.imag(z ** 3)), (0.0, 0.0), 0.1, 0.45))
    out.append((sol(y + 0.2 * np.imag(z ** 2)), (0.0, 0.0), 0.1, 0.45))
    out.append((sol(y + 0.05 * np.imag(z ** 3)), (0.0, 0.0), 0.1, 0.45))
    out.append((sol(np.imag(z ** 2) + 0.1 * np.imag(z ** 4)),
                (0.0, 0.0), 0.1, 0.45))
    for tau, height, coef in ((0.1, 0.10, 0.3), (0.2, 0.12, 0.2)):
        dom = _vee_domain(tau)
        mesh = mesh_domain(dom, h)
        m1 = _sector_mode(tau, 1)(mesh.nodes)
        m2 = _sector_mode(tau, 2)(mesh.nodes)
        inside = mesh.nodes[:, 1] >= dom.graph.phi(mesh.nodes[:, 0]) - 1e-12
        u1 = DiscreteSolution(mesh, np.where(inside, m1, 0.0), I2, 0.0)
        u2 = DiscreteSolution(mesh, np.where(inside, m1 + coef * m2, 0.0),
                              I2, 0.0)
        out.append((u1, (0.0, height), 0.08, 0.4))
        out.append((u2, (0.0, height), 0.08, 0.4))
    return out


def _battery_violations(h):
    vH, vN = 0.0, 0.0
    for u, x, r0, r1 in _harmonic_battery(h):
        prof = frequency_profile(u, I2, x, r0, r1, 20)
        assert prof.admissible_flags.all()
        vH = max(vH, monotone_violation(prof.H_values))
        vN = max(vN, monotone_violation(prof.N_values))
    return vH, vN


def test_criterion_2_harmonic_monotonicity():
    t0 = time.time()
    vH_coarse, vN_coarse = _battery_violations(1 / 256)
    vH, vN = _battery_violations(1 / 512)
    dt = time.time() - t0
    ok = vH <= 1e-3 and vN <= 1e-3 and dt < 300
    certified = vH <= vH_coarse + 2e-4 and vN <= vN_coarse + 2e-4
    report("2 harmonic H/N monotonicity",
           ok and certified,
           f"viol H {vH:.2e} N {vN:.2e} (coarse {vH_coarse:.2e}/"
           f"{vN_coarse:.2e}), {dt:.0f}s")


# ---------------------------------------------------------------------------
# criterion 3: perturbed coefficients, constants linear in L_A
# ---------------------------------------------------------------------------

def _perturbed_field(L):
    def entries(pts):
        x, y = pts[:, 0], pts[:, 1]
        A = np.zeros((len(pts), 2, 2))
        p = 0.5 * np.sin(x + y)
        q = 0.5 * np.cos(x - y)
        A[:, 0, 0] = 1.0 + L * p
        A[:, 1, 1] = 1.0 - L * p
        A[:, 0, 1] = A[:, 1, 0] = L * q * 0.5
        return A

    lam = (1 + 0.8 * L) / (1 - 0.8 * L)
    return CoefficientField(entries, max(lam, 1.0), L, name=f"pert{L}")


def _perturbed_constants(L, h):
    dom = HalfBall()
    fld = _perturbed_field(L) if L > 0 else I2
    mesh = mesh_domain(dom, h)
    data = lambda p: np.where(p[:, 1] > 1e-12,
                              np.sin(np.arctan2(p[:, 1], p[:, 0])), 0.0)
    u = solve_dirichlet(dom, fld, data, h, mesh=mesh)
    prof = frequency_profile(u, fld, (0.0, 0.05), 0.08, 0.35, 20)
    repH = check_H_derivative(prof)
    repN = check_N_monotone(prof)
    return repH["max_residual"], repN["C_hat"]


def test_criterion_3_perturbed_linear_scaling():
    t0 = time.time()
    h = 1 / 128
    base_H, base_N = _perturbed_constants(0.0, h)
    rows = []
    ok = True
    for L in (0.02, 0.05, 0.1):
        cH, cN = _perturbed_constants(L, h)
        rows.append((L, cH, cN))
        ok &= cH <= base_H + 10.0 * L
        ok &= cN <= base_N + 10.0 * L
    dt = time.time() - t0
    report("3 perturbed-coefficient scaling", ok,
           f"base ({base_H:.3f},{base_N:.3f}) " +
           " ".join(f"L={L}:({a:.3f},{b:.3f})" for L, a, b in rows) +
           f", {dt:.0f}s")


# ---------------------------------------------------------------------------
# criterion 4: auxiliary lemma sandwiches, zero violations
# ---------------------------------------------------------------------------

def test_criterion_4_lemma_sandwiches():
    t0 = time.time()
    violations = []
    for u, x, r0, r1 in _harmonic_battery(1 / 256):
        rho = 0.12
        rep = check_growth_bound(u, I2, x, rho, 2.0)
        if not rep["passed"]:
            violations.append(("growth", x))
        rep = check_annulus_bounds(u, I2, x, 0.2, 0.1)
        if not rep["passed"]:
            violations.append(("annulus", x))
        rep = check_mean_value_bound(u, I2, x, 0.3, kappa=10.0)
        if not rep["passed"]:
            violations.append(("mean_value", x))
        z = (x[0], x[1] + 0.03 * 0.1)
        rep = check_center_perturbation(u, I2, x, z, 0.1, gamma=0.4,
                                        C_max=10.0)
        if not rep["passed"]:
            violations.append(("center_perturbation", x))
        rep = check_H_center_move(u, I2, x, z, 0.1, gamma=0.4, delta=0.5)
        if not rep["passed"]:
            violations.append(("H_center_move", x))
    dt = time.time() - t0
    report("4 lemma sandwiches", len(violations) == 0,
           f"{len(violations)} violations {violations[:3]}, {dt:.0f}s")


# ---------------------------------------------------------------------------
# criterion 5: whitney validity
# ---------------------------------------------------------------------------

def test_criterion_5_whitney_validity():
    t0 = time.time()
    ok = True
    details = []
    for tau in (0.0, 0.1):
        if tau == 0.0:
            g = LipschitzGraph(((-2.5, 0.0), (2.5, 0.0)), 0.0)
        else:
            g = LipschitzGraph(((-2.5, 2.5 * tau), (0.0, 0.0),
                                (2.5, 2.5 * tau)), tau)
        dom = GraphEpigraph(g, (-2.5, 2.5, -0.5, 4.2))
        cubes = whitney_decompose(dom, l_min=1 / 128)
        for q in cubes:
            rep = verify_cube_conditions(dom, q, 120)
            if not (rep["ten_inside"] and rep["W_meets_boundary"]
                    and rep["diam_condition"]):
                ok = False
        # disjoint cover of the far region (condition 1), exact dyadic
        sel = {(q.k, q.i, q.j) for q in cubes}
        ks = sorted({q.k for q in cubes})
        rng = np.random.default_rng(17)
        pts = rng.uniform((-2.0, 0.5), (2.0, 3.8), (800, 2))
        for p in pts:
            hits = sum(
                1 for k in ks
                if (k, math.floor(p[0] * 2.0 ** k),
                    math.floor(p[1] * 2.0 ** k)) in sel)
            d = dom.graph.distance(p[None, :])[0]
            if d >= 30 / 128 and hits != 1:
                ok = False
        roots = [q for q in cubes if q.side == 1 / 8
                 and abs(q.center[0] + 1 / 16) < 1e-12]
        roots.sort(key=lambda q: q.center[1])
        tree = build_tree(cubes, roots[0], depth=4, domain=dom)
        for k, gen in enumerate(tree.generations):
            if len(gen) != 2 ** k:
                ok = False
            width = sum(q.proj[1] - q.proj[0] for q in gen)
            if abs(width - tree.root.side) > 1e-15:
                ok = False
        tree2 = build_tree(cubes, roots[0], depth=4, domain=dom)
        if [q.ident for gen in tree.generations for q in gen] != \
                [q.ident for gen in tree2.generations for q in gen]:
            ok = False
        cubes2 = whitney_decompose(dom, l_min=1 / 128)
        if cubes2 != cubes:
            ok = False
        details.append(f"tau={tau}: {len(cubes)} cubes")
    dt = time.time() - t0
    report("5 whitney validity", ok, "; ".join(details) + f", {dt:.0f}s")


# ---------------------------------------------------------------------------
# criterion 6: cover mechanism for u = 2xy
# ---------------------------------------------------------------------------

def test_criterion_6_cover_2xy():
    t0 = time.time()
    dom = HalfBall()
    u = project(dom, lambda p: 2 * p[:, 0] * np.maximum(p[:, 1], 0.0), 1 / 512)
    rep = cover_report(u, (-0.6, 0.6), n_samples=129, rho_max=0.5)
    res = rep["residual"]
    r_floor = rep["r_floor"]
    contained = len(res) == 0 or np.max(np.abs(res[:, 0])) <= r_floor + 0.02
    slope_ok = rep["residual_slope"] <= 0.1
    dt = time.time() - t0
    report("6 cover residual (2xy)",
           contained and slope_ok and dt < 120,
           f"residual {len(res)} pts within {r_floor:.4f}+0.02, "
           f"slope {rep['residual_slope']:.3f}, {dt:.0f}s")


# ---------------------------------------------------------------------------
# criterion 7: combinatorics package
# ---------------------------------------------------------------------------

def test_criterion_7_combinatorics():
    t0 = time.time()
    rng = np.random.default_rng(2718)
    ok = True
    for d0 in rng.uniform(1e-3, 1 - 1e-3, 1000):
        a = alpha_of(d0)
        # cross-multiplied identity with the stable complement of alpha
        # (the naive quotient loses digits to cancellation as d0 -> 1)
        one_minus_a = 3 * (1 - d0) / (3 - 2 * d0)
        lhs = d0 * one_minus_a
        rhs = 3 * a * (1 - d0)
        if abs(lhs - rhs) > 1e-14 * rhs:
            ok = False
        if not a < d0:
            ok = False
    for a in rng.uniform(0.02, 0.95, 1000):
        e0 = epsilon0_of(a)
        back = math.log(1 + e0) / (math.log(1 + e0) + math.log(2))
        if abs(back - a) > 1e-14:
            ok = False
    for _ in range(200):
        b, d0 = rng.uniform(0.02, 0.98, 2)
        kl = b * math.log(b / d0) + (1 - b) * math.log((1 - b) / (1 - d0))
        if abs(z_of(b, d0) - math.exp(-kl)) > 1e-12:
            ok = False
    exact_small = binomial_tail(10, 0.25, 0.5)
    ok &= exact_small == 56 / 1024
    for j in (50, 100, 400, 1000):
        ok &= binomial_tail(j, 0.25, 0.5) <= stirling_bound(j, 0.25, 0.5)
    bound = dimension_bound(TreeParams(delta0=0.5, eps=0.1, K=10, d=2))
    ok &= abs(bound - 0.9811278124459133) <= 1e-3  # recomputed closed form
    params = TreeParams(delta0=0.5, eps=0.1, K=3, N0=4.0, Nprime_root=4.0)
    rep = simulate_recursion(params, 60, 10 ** 6, seed=424242)
    sigma = math.sqrt(rep["exact_tail"] * (1 - rep["exact_tail"]) / 10 ** 6)
    ok &= abs(rep["p_bad"] - rep["exact_tail"]) <= 3 * sigma
    dt = time.time() - t0
    report("7 combinatorics", ok and dt < 60,
           f"tail={exact_small}, bound={bound:.6f}, "
           f"mc dev {abs(rep['p_bad'] - rep['exact_tail']) / sigma:.2f} sigma, "
           f"{dt:.0f}s")


# ---------------------------------------------------------------------------
# criterion 8: nodal exactness for product eigenfunctions
# ---------------------------------------------------------------------------

def test_criterion_8_nodal_exactness():
    t0 = time.time()
    dom = UnitSquare()
    mesh = mesh_domain(dom, 1 / 512)
    worst = 0.0
    for m in range(1, 7):
        for n in range(1, 7):
            if m == 1 and n == 1:
                continue
            vals = np.sin(m * np.pi * mesh.nodes[:, 0]) \
                * np.sin(n * np.pi * mesh.nodes[:, 1])
            u = DiscreteSolution(mesh, vals, I2, 0.0)
            zs = extract_zero_set(u)
            mids = zs.segments.mean(axis=1)
            far = dom.dist_sigma(mids) > 2 * mesh.h
            L = float(np.linalg.norm(zs.segments[far][:, 0]
                                     - zs.segments[far][:, 1], axis=1).sum())
            exact = (m - 1) + (n - 1)
            worst = max(worst, abs(L - exact) / exact)
    dt = time.time() - t0
    report("8 nodal exactness", worst <= 0.03,
           f"worst rel dev {worst:.3%}, {dt:.0f}s")


# ---------------------------------------------------------------------------
# criterion 9: Yau-type scan boundedness
# ---------------------------------------------------------------------------

def test_criterion_9_yau_scan(tmp_path):
    t0 = time.time()
    cfg = json.loads((Path(cli.__file__).parent / "configs"
                      / "square_yau.json").read_text())
    cli.cmd_yau_scan(cfg, tmp_path)
    rows = [r.split(",") for r in (tmp_path / "yau_scan.csv").read_text()
            .splitlines() if not r.startswith("#")][1:]
    lr = np.array([float(r[4]) for r in rows])
    nr = np.array([float(r[5]) for r in rows])
    lr_pos = lr[lr > 0]
    ratio_L = lr_pos.max() / lr_pos.min()
    ratio_N = nr.max() / nr.min()
    dt = time.time() - t0
    report("9 yau scan", ratio_L <= 3.0 and ratio_N <= 3.0 and dt < 600,
           f"length ratio {ratio_L:.2f}, frequency ratio {ratio_N:.2f}, "
           f"{dt:.0f}s")


# ---------------------------------------------------------------------------
# criterion 10: cantor cone
# ---------------------------------------------------------------------------

def test_criterion_10_cantor():
    t0 = time.time()
    spec = CantorSpec(k=1, depth=6, aperture=1.0)
    h = spec.smallest_gap() / 8
    mesh = cantor_mesh(spec, h)
    ok = True
    details = []
    prev_density = None
    for r in (1 / 3, 1 / 9, 1 / 27):
        bound = ahlfors_bound(spec, 0.0, r)["bound"]
        measured = measured_density(spec, 0.0, r, h, mesh=mesh)["omega"]
        if measured > bound:
            ok = False
        dens = bound / r
        if prev_density is not None and prev_density / dens < 1.2:
            ok = False
        details.append(f"r=3^-{round(-math.log(r) / math.log(3))}: "
                       f"{measured:.4f}<={bound:.4f}")
        prev_density = dens
    ivs = cantor_intervals(spec, 12)
    pts = np.array(sorted({float(e) for ab in ivs for e in ab}))
    slope = box_counting_dimension(pts, 12).slope
    dim_ok = abs(slope - cantor_dimension(spec)) <= 0.05
    dt = time.time() - t0
    report("10 cantor cone", ok and dim_ok and dt < 900,
           "; ".join(details) + f"; dim {slope:.3f} vs "
           f"{cantor_dimension(spec):.3f}, {dt:.0f}s")


# ---------------------------------------------------------------------------
# criterion 11: vanishing order at cone vertices
# ---------------------------------------------------------------------------

def test_criterion_11_cone_orders():
    t0 = time.time()
    orders = []
    ok = True
    for tau in (-0.2, 0.0, 0.2):
        dom = PlanarCone(vertex=(0, 0), aperture_tau=tau, truncation=1.0)
        mesh = polar_mesh(dom, h=1 / 96, rings="geometric", r_min=1e-3)
        g = green_function(dom, I2, (0.0, 0.6), h=1 / 96, mesh=mesh)
        est = vanishing_order_estimate(g, I2, (0, 0), [0.2, 0.1, 0.05, 0.025])
        exact = cone_vanishing_order_2d(tau)
        orders.append(est["order"])
        if abs(est["order"] - exact) > 0.02:
            ok = False
    crosses = orders[0] < 1.0 < orders[2] and orders[0] < orders[1] < orders[2]
    dt = time.time() - t0
    report("11 cone vanishing orders", ok and crosses,
           f"orders {['%.4f' % o for o in orders]} vs "
           f"{['%.4f' % cone_vanishing_order_2d(t) for t in (-0.2, 0, 0.2)]}, "
           f"{dt:.0f}s")


# ---------------------------------------------------------------------------
# criterion 12: Hopf / density comparability
# ---------------------------------------------------------------------------

def _hopf_window(u, dom, mesh, fld, window, n=9):
    a, b = window
    xs = np.linspace(a, b, n + 2)[1:-1]
    samples = np.stack([xs, np.zeros_like(xs)], 1)
    _, trace = normal_derivative_trace(u, dom, samples=samples)
    l1, l2 = 0.06, 0.1
    dens = []
    for x0 in xs:
        w = [harmonic_measure(dom, fld, (0.0, 0.5),
                              [((x0 - L / 2, 0.0), (x0 + L / 2, 0.0))],
                              u.mesh.h, mesh=mesh) for L in (l1, l2)]
        dens.append((w[1] - w[0]) / (l2 - l1))
    dens = np.asarray(dens)
    ratio = np.abs(trace) / np.maximum(dens, 1e-300)
    kappa = math.sqrt(ratio.max() / ratio.min())
    det = detect_small_gradient_points(u, samples, threshold=1e-3)
    spacing = xs[1] - xs[0]
    measure = len(det) * spacing
    return kappa, measure


def test_criterion_12_hopf_density():
    t0 = time.time()
    dom = HalfBall()
    h = 1 / 128
    mesh = mesh_domain(dom, h)
    battery = []
    u_lin = solve_dirichlet(dom, I2, lambda p: np.where(
        p[:, 1] > 1e-12, p[:, 1], 0.0), h, mesh=mesh)
    battery.append((u_lin, (-0.55, 0.55)))
    u_green = green_function(dom, I2, (0.0, 0.5), h, mesh=mesh)
    battery.append((u_green, (-0.5, 0.5)))
    u_2xy = project(dom, lambda p: 2 * p[:, 0] * np.maximum(p[:, 1], 0.0),
                    h, mesh=mesh)
    battery.append((u_2xy, (0.2, 0.8)))
    ok = True
    details = []
    for u, window in battery:
        kappa, measure = _hopf_window(u, dom, mesh, I2, window)
        r_floor = 4 * h
        if kappa > 10.0 or measure > 2 * r_floor:
            ok = False
        details.append(f"kappa={kappa:.2f} m={measure:.3f}")
    dt = time.time() - t0
    report("12 hopf density", ok, "; ".join(details) + f", {dt:.0f}s")
