import math

import numpy as np
import pytest

from freqlab.geometry import Ball, CoefficientField, HalfBall, UnitSquare
from freqlab.nodal import (
    box_counting_dimension,
    cover_report,
    detect_sign_change_points,
    detect_small_gradient_points,
    extract_zero_set,
    make_sign_oracle,
    nodal_measure,
    sign_constant_ball,
)
from freqlab.solver import DiscreteSolution, mesh_domain, project

I2 = CoefficientField.identity()


def square_solution(fn, h=1 / 256):
    return project(UnitSquare(), fn, h)


def halfdisk_solution(fn, h=1 / 256):
    return project(HalfBall(), fn, h)


def u_2xy(p):
    return 2 * p[:, 0] * np.maximum(p[:, 1], 0.0)


# ---------------------------------------------------------------------------
# zero sets
# ---------------------------------------------------------------------------

def test_level_line():
    u = square_solution(lambda p: p[:, 1] - 0.5)
    zs = extract_zero_set(u)
    assert abs(zs.total_length - 1.0) <= 2 * u.mesh.h
    assert np.all(np.abs(zs.segments[:, :, 1] - 0.5) < u.mesh.h)


def test_vertical_line():
    u = halfdisk_solution(lambda p: p[:, 0])
    zs = extract_zero_set(u)
    # x = 0 ray of length 1 inside the half disk
    assert abs(zs.total_length - 1.0) <= 3 * u.mesh.h


def test_product_eigenfunction_grid():
    u = square_solution(
        lambda p: np.sin(2 * np.pi * p[:, 0]) * np.sin(3 * np.pi * p[:, 1]))
    zs = extract_zero_set(u)
    mids = zs.segments.mean(axis=1)
    far = UnitSquare().dist_sigma(mids) > 2 * u.mesh.h
    L = float(np.linalg.norm(
        zs.segments[far][:, 0] - zs.segments[far][:, 1], axis=1).sum())
    assert abs(L - 3.0) / 3.0 < 0.03


def test_signed_cells_produce_nothing():
    u = square_solution(lambda p: 1.0 + p[:, 0])
    assert extract_zero_set(u).total_length == 0.0


def test_zero_set_csv(tmp_path):
    u = square_solution(lambda p: p[:, 1] - 0.5, h=1 / 64)
    zs = extract_zero_set(u)
    path = tmp_path / "zs.csv"
    zs.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x1,y1,x2,y2"
    assert len(lines) == 1 + len(zs.segments)


# ---------------------------------------------------------------------------
# nodal measure
# ---------------------------------------------------------------------------

def test_nodal_measure_positive_solution():
    u = halfdisk_solution(lambda p: np.maximum(p[:, 1], 0.0))
    assert nodal_measure(u, ((0.0, 0.0), 0.4)) == 0.0


def test_nodal_measure_single_ray():
    u = halfdisk_solution(u_2xy)
    L = nodal_measure(u, ((0.0, 0.0), 0.5))
    assert abs(L - 0.5) <= 3 * u.mesh.h


def test_nodal_measure_three_diameters():
    u = project(Ball(), lambda p: np.real((p[:, 0] + 1j * p[:, 1]) ** 3),
                1 / 256)
    L = nodal_measure(u, ((0.0, 0.0), 0.5), sigma_aware=False)
    assert abs(L - 3.0) / 3.0 < 0.03


def test_length_stable_under_halving():
    lengths = []
    for h in (1 / 128, 1 / 256):
        u = square_solution(
            lambda p: np.sin(4 * np.pi * p[:, 0]) * np.sin(3 * np.pi * p[:, 1]),
            h=h)
        zs = extract_zero_set(u)
        lengths.append(zs.total_length)
    assert abs(lengths[0] - lengths[1]) <= 0.05 * lengths[1]


# ---------------------------------------------------------------------------
# sign-constant balls
# ---------------------------------------------------------------------------

def test_sign_ball_positive_solution():
    u = halfdisk_solution(lambda p: np.maximum(p[:, 1], 0.0))
    assert sign_constant_ball(u, (0.1, 0.0), 0.5) == pytest.approx(0.5)


def test_sign_ball_distance_to_zero_ray():
    u = halfdisk_solution(u_2xy)
    rho = sign_constant_ball(u, (0.3, 0.0), 0.6)
    assert abs(rho - 0.3) <= 4 * u.mesh.h


def test_sign_ball_at_sign_change():
    u = halfdisk_solution(u_2xy)
    assert sign_constant_ball(u, (0.0, 0.0), 0.5) == 0.0


def test_sign_ball_monotone_in_rho_max():
    u = halfdisk_solution(u_2xy)
    r1 = sign_constant_ball(u, (0.25, 0.0), 0.6)
    r2 = sign_constant_ball(u, (0.25, 0.0), 0.2)
    assert r2 <= r1 + 1e-12


def test_sign_ball_requires_center_near_sigma():
    u = halfdisk_solution(u_2xy)
    with pytest.raises(ValueError):
        sign_constant_ball(u, (0.0, 0.5), 0.3)


# ---------------------------------------------------------------------------
# detections
# ---------------------------------------------------------------------------

def test_detect_sign_change_2xy():
    u = halfdisk_solution(u_2xy)
    xs = np.linspace(-0.6, 0.6, 25)
    samples = np.stack([xs, np.zeros_like(xs)], 1)
    det = detect_sign_change_points(u, samples, r_floor=0.05)
    assert len(det) >= 1
    assert np.max(np.abs(det[:, 0])) <= 0.05 + 1e-12


def test_detect_sign_change_empty_for_positive():
    u = halfdisk_solution(lambda p: np.maximum(p[:, 1], 0.0))
    xs = np.linspace(-0.5, 0.5, 11)
    samples = np.stack([xs, np.zeros_like(xs)], 1)
    det = detect_sign_change_points(u, samples, r_floor=0.05)
    assert len(det) == 0


def test_detect_small_gradient():
    u = halfdisk_solution(u_2xy)
    xs = np.linspace(-0.5, 0.5, 21)
    samples = np.stack([xs, np.zeros_like(xs)], 1)
    det = detect_small_gradient_points(u, samples, threshold=0.2)
    # trace = 2x: detected iff |x| < 0.1
    assert np.all(np.abs(det[:, 0]) < 0.1 + 0.03)
    u_lin = halfdisk_solution(lambda p: np.maximum(p[:, 1], 0.0))
    assert len(detect_small_gradient_points(u_lin, samples, 0.9)) == 0


def test_singular_set_agreement_smooth_battery():
    # Dini-smooth picture: S and S' detections agree within one r_floor
    u = halfdisk_solution(u_2xy)
    xs = np.linspace(-0.5, 0.5, 41)
    samples = np.stack([xs, np.zeros_like(xs)], 1)
    r_floor = 0.05
    s_prime = detect_sign_change_points(u, samples, r_floor)
    s_grad = detect_small_gradient_points(u, samples, threshold=2 * r_floor)
    a = set(map(tuple, np.round(s_prime, 12)))
    b = set(map(tuple, np.round(s_grad, 12)))
    sym = a.symmetric_difference(b)
    assert all(abs(p[0]) <= 2 * r_floor for p in sym)


# ---------------------------------------------------------------------------
# box counting
# ---------------------------------------------------------------------------

def test_box_count_finite_set():
    bc = box_counting_dimension(np.array([0.1, 0.4, 0.9]), 12)
    assert abs(bc.slope) < 0.05


def test_box_count_full_interval():
    bc = box_counting_dimension(np.linspace(0, 1, 2 ** 14 + 1), 14)
    assert abs(bc.slope - 1.0) <= 0.05


def test_box_count_cantor_endpoints():
    ivs = [(0.0, 1.0)]
    for _ in range(12):
        s = 1 / 3
        ivs = [(a * s, b * s) for a, b in ivs] \
            + [(2 / 3 + a * s, 2 / 3 + b * s) for a, b in ivs]
    pts = np.array(sorted({e for ab in ivs for e in ab}))
    bc = box_counting_dimension(pts, 12)
    assert abs(bc.slope - math.log(2) / math.log(3)) <= 0.05


def test_box_count_guards():
    with pytest.raises(ValueError):
        box_counting_dimension(np.array([0.5]), 15)


# ---------------------------------------------------------------------------
# cover report
# ---------------------------------------------------------------------------

def test_cover_positive_solution():
    u = halfdisk_solution(lambda p: np.maximum(p[:, 1], 0.0))
    rep = cover_report(u, (-0.5, 0.5), n_samples=65, rho_max=0.4)
    assert len(rep["residual"]) == 0
    assert len(rep["balls"]) >= 1


def test_cover_2xy_residual_near_origin():
    u = halfdisk_solution(u_2xy)
    rep = cover_report(u, (-0.6, 0.6), n_samples=129, rho_max=0.5)
    res = rep["residual"]
    r_floor = rep["r_floor"]
    assert np.all(np.abs(res[:, 0]) <= r_floor + 0.02)
    assert rep["residual_slope"] <= 0.1
    # residual disjoint from every ball (also asserted internally)
    for b in rep["balls"]:
        c = np.array([b["cx"], b["cy"]])
        assert np.all(np.linalg.norm(res - c, axis=1) >= b["r"])


# ---------------------------------------------------------------------------
# sign oracle
# ---------------------------------------------------------------------------

def test_sign_oracle_basic():
    u = halfdisk_solution(u_2xy)
    oracle = make_sign_oracle(u)
    assert oracle((-0.1, 0.1, -0.05, 0.3)) is True     # straddles x = 0
    assert oracle((0.2, 0.5, -0.05, 0.3)) is False     # u > 0 there
    with pytest.raises(ValueError):
        oracle((0.2, 0.2001, 0.0, 0.0001))             # no decidable nodes


def test_sign_oracle_heredity():
    # "no zeros" on a rectangle implies "no zeros" on contained rectangles
    u = halfdisk_solution(u_2xy)
    oracle = make_sign_oracle(u)
    outer = (0.15, 0.55, -0.05, 0.4)
    if not oracle(outer):
        for rect in [(0.2, 0.4, 0.0, 0.3), (0.3, 0.5, 0.05, 0.2)]:
            assert oracle(rect) is False
