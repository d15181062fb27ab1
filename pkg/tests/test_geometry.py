import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freqlab.geometry import (
    AffineMap,
    Ball,
    CantorCone,
    ChartError,
    CoefficientField,
    ConfigError,
    GraphEpigraph,
    HalfBall,
    LipschitzGraph,
    PlanarCone,
    UnitSquare,
    admissible,
    cone_vanishing_order_2d,
    domain_from_json,
    field_from_json,
    normalize_at,
)

RNG = np.random.default_rng(2401)


def vee_graph(tau, half_width=1.0):
    return LipschitzGraph(((-half_width, tau * half_width), (0.0, 0.0),
                           (half_width, tau * half_width)), tau)


# ---------------------------------------------------------------------------
# graphs and domains
# ---------------------------------------------------------------------------

def test_graph_validation():
    with pytest.raises(ConfigError):
        LipschitzGraph(((0, 0), (0, 1)), 0.5)          # not increasing
    with pytest.raises(ConfigError):
        LipschitzGraph(((0, 0), (1, 0.9)), 0.5)        # slope above tau
    with pytest.raises(ConfigError):
        LipschitzGraph(((0, 0), (1, 0.99)), 1.0)       # tau must be < 1


def test_graph_phi_and_distance():
    g = vee_graph(0.2)
    assert g.phi(0.0) == 0.0
    assert g.phi(0.5) == pytest.approx(0.1)
    # distance from a point straight above the vertex is along the normal
    d = g.distance(np.array([[0.0, 0.5]]))[0]
    assert d == pytest.approx(0.5 * math.cos(math.atan(0.2)))


def test_membership_normal_consistency():
    # stepping inward from Sigma along the normal lands inside Omega
    domains = [
        GraphEpigraph(vee_graph(0.2), (-1, 1, -0.5, 1.5)),
        HalfBall(),
        UnitSquare(),
        PlanarCone(aperture_tau=0.1, truncation=1.0),
        CantorCone(k=1, depth=3),
    ]
    for dom in domains:
        pts = dom.sigma_points(17)
        if len(pts) == 0:
            continue
        nrm = dom.sigma_normal(pts)
        inner = pts - 0.009 * nrm
        keep = np.ones(len(pts), bool)
        if isinstance(dom, UnitSquare):
            keep = (pts[:, 0] > 0.02) & (pts[:, 0] < 0.98)
        assert dom.contains(inner)[keep].all()
        assert dom.dist_sigma(inner[keep]).max() < 0.01 + 1e-12


def test_halfball_membership():
    hb = HalfBall()
    assert hb.contains(np.array([[0.0, 0.5]]))[0]
    assert not hb.contains(np.array([[0.0, -0.5]]))[0]
    assert not hb.contains(np.array([[0.0, 1.5]]))[0]
    assert hb.dist_sigma(np.array([[0.3, 0.2]]))[0] == pytest.approx(0.2)


def test_signed_distance_sign():
    dom = GraphEpigraph(vee_graph(0.1), (-1, 1, -0.5, 1.5))
    s = dom.signed_dist_sigma(np.array([[0.0, 0.3], [0.0, -0.3]]))
    assert s[0] > 0 and s[1] < 0


# ---------------------------------------------------------------------------
# admissible
# ---------------------------------------------------------------------------

def test_admissible_trivial_flat():
    dom = HalfBall()
    fld = CoefficientField.identity()
    assert admissible((0.0, 0.5), 0.4, dom, fld) is True


def test_admissible_rejects_bad_radius_and_chart():
    dom = GraphEpigraph(vee_graph(0.0), (-1, 1, -0.5, 1.5))
    fld = CoefficientField.identity()
    with pytest.raises(ValueError):
        admissible((0.0, 0.1), -1.0, dom, fld)
    with pytest.raises(ChartError):
        admissible((0.0, 0.1), 2.0, dom, fld)


def test_admissible_derived_example():
    # dist = 0.05, r = 1, tau = 0.2, L_A = 0.1:
    # cos(arccos(0.05) + arctan 0.2) = -0.1468 < 0.1 -> not admissible
    g = LipschitzGraph(((-4, 0.8), (0, 0), (4, 0.8)), 0.2)
    dom = GraphEpigraph(g, (-4, 4, -1, 4))
    T = 0.05 * math.cos(math.atan(0.2))  # place center at height giving T
    x = (0.0, 0.05)
    fld = CoefficientField(CoefficientField.identity().entries, 1.0, 0.1)
    assert admissible(x, 1.0, dom, fld, C=1.0) is False
    assert math.cos(math.acos(0.05) + math.atan(0.2)) < 0.1


def test_admissible_boundary_center_flat():
    # classical boundary case: tau = 0, L_A = 0, center on Sigma
    dom = HalfBall()
    fld = CoefficientField.identity()
    assert admissible((0.0, 0.0), 0.5, dom, fld) is True


def test_admissible_monotone_in_radius():
    dom = HalfBall()
    fld = CoefficientField(CoefficientField.identity().entries, 1.0, 0.05)
    x = (0.0, 0.2)
    radii = np.linspace(0.05, 0.7, 30)
    flags = [admissible(x, float(r), dom, fld) for r in radii]
    # once it turns False it stays False
    seen_false = False
    for f in flags:
        if not f:
            seen_false = True
        else:
            assert not seen_false


# ---------------------------------------------------------------------------
# normalize_at
# ---------------------------------------------------------------------------

def test_normalize_identity_fixed_point():
    fld = CoefficientField.identity()
    new, amap = normalize_at(fld, (0.3, -0.2))
    assert np.allclose(amap.S, np.eye(2))
    assert np.allclose(amap.apply(np.zeros((1, 2))), [[0.3, -0.2]])
    assert np.allclose(new(np.zeros((1, 2)))[0], np.eye(2))


def test_normalize_constant_diagonal():
    fld = CoefficientField.constant(np.diag([4.0, 1.0]))
    new, amap = normalize_at(fld, (0.0, 0.0))
    assert np.allclose(amap.S, np.diag([2.0, 1.0]))
    y = RNG.normal(size=(5, 2))
    assert np.allclose(new(y), np.broadcast_to(np.eye(2), (5, 2, 2)), atol=1e-12)


def test_normalize_offdiagonal_and_inverse_roundtrip():
    def entries(pts):
        n = len(pts)
        A = np.zeros((n, 2, 2))
        A[:, 0, 0] = 2.0 + 0.05 * np.sin(pts[:, 0])
        A[:, 1, 1] = 1.0 + 0.05 * np.cos(pts[:, 1])
        A[:, 0, 1] = A[:, 1, 0] = 0.1
        return A

    fld = CoefficientField(entries, 3.0, 0.1)
    new, amap = normalize_at(fld, (0.2, 0.1))
    assert np.max(np.abs(new(np.zeros((1, 2)))[0] - np.eye(2))) < 1e-10
    # conjugating back reproduces the original field at 100 random points
    pts = RNG.uniform(-0.5, 0.5, size=(100, 2))
    S = amap.S
    back = np.einsum("ab,nbc,cd->nad", S, new(amap.inverse(pts)), S)
    assert np.max(np.abs(back - fld(pts))) < 1e-10


def test_normalize_rejects_indefinite():
    fld = CoefficientField.constant(np.diag([1.0, 1.0]))
    bad = CoefficientField(lambda p: np.broadcast_to(
        np.diag([1.0, -1.0]), (len(p), 2, 2)).copy(), 2.0, 0.0)
    with pytest.raises(ValueError):
        normalize_at(bad, (0, 0))
    normalize_at(fld, (0, 0))  # fine


# ---------------------------------------------------------------------------
# cone orders
# ---------------------------------------------------------------------------

def test_cone_order_values():
    assert cone_vanishing_order_2d(0.0) == pytest.approx(1.0)
    assert cone_vanishing_order_2d(1.0) == pytest.approx(2.0)
    assert cone_vanishing_order_2d(-1.0) == pytest.approx(2.0 / 3.0)


def test_cone_order_monotone_and_continuous():
    taus = np.linspace(-0.9, 0.9, 181)
    vals = np.array([cone_vanishing_order_2d(t) for t in taus])
    assert np.all(np.diff(vals) > 0)
    assert np.all(vals[taus > 0] > 1) and np.all(vals[taus < 0] < 1)
    # finite-difference continuity
    assert np.max(np.abs(np.diff(vals))) < 0.05


def test_cone_order_rejects_nonfinite():
    with pytest.raises(ValueError):
        cone_vanishing_order_2d(float("nan"))


# ---------------------------------------------------------------------------
# coefficient field invariants
# ---------------------------------------------------------------------------

def test_field_validate():
    def entries(pts):
        n = len(pts)
        A = np.zeros((n, 2, 2))
        A[:, 0, 0] = 1.0 + 0.05 * np.sin(pts[:, 1])
        A[:, 1, 1] = 1.0
        return A

    fld = CoefficientField(entries, ellipticity_Lambda=1.1, lipschitz_L=0.05)
    pts = RNG.uniform(-1, 1, size=(200, 2))
    rep = fld.validate(pts)
    assert rep["symmetry_defect"] == 0.0
    assert rep["ellipticity_ok"] and rep["lipschitz_ok"]


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-0.8, max_value=0.8),
       st.floats(min_value=0.05, max_value=0.9))
def test_admissible_monotone_property(tau, rfrac):
    g = LipschitzGraph(((-4, abs(tau) * 4), (0, 0), (4, abs(tau) * 4)), abs(tau) + 1e-9)
    dom = GraphEpigraph(g, (-4, 4, -1, 4))
    fld = CoefficientField(CoefficientField.identity().entries, 1.0, 0.07)
    x = (0.0, 0.5)
    r_big = 2.0 * rfrac
    r_small = rfrac
    try:
        big = admissible(x, r_big, dom, fld)
    except ChartError:
        return
    if big:
        assert admissible(x, r_small, dom, fld)


# ---------------------------------------------------------------------------
# JSON interfaces
# ---------------------------------------------------------------------------

def test_domain_from_json():
    dom = domain_from_json({
        "kind": "graph_epigraph",
        "breakpoints": [[-1, 0.1], [0, 0], [1, 0.1]],
        "tau": 0.1,
        "box": [-1, 1, -0.5, 1.5],
    })
    assert isinstance(dom, GraphEpigraph)
    assert isinstance(domain_from_json({"kind": "unit_square"}), UnitSquare)
    assert isinstance(domain_from_json({"kind": "ball"}), Ball)
    with pytest.raises(ConfigError):
        domain_from_json({"kind": "moebius"})


def test_field_from_json_grammar():
    fld = field_from_json({
        "matrix": [["1 + 0.1*sin(y)", "0"], ["0", "1"]],
        "lambda": 1.2,
        "lipschitz": 0.1,
    })
    A = fld(np.array([[0.0, math.pi / 2]]))
    assert A[0, 0, 0] == pytest.approx(1.1)
    with pytest.raises(ConfigError):
        field_from_json({"matrix": [["__import__('os')", "0"], ["0", "1"]]})
    with pytest.raises(ConfigError):
        field_from_json({"matrix": [["1", "x"], ["y", "1"]]})  # asymmetric


def test_cantor_cone_geometry():
    dom = CantorCone(k=1, depth=2, aperture=1.0)
    # gap midpoint of (1/3, 2/3) carries a peak of height 1/6
    assert dom.phi(0.5) == pytest.approx(1.0 / 6.0)
    assert dom.phi(1.0 / 9.0) == pytest.approx(0.0, abs=1e-15)
    assert dom.phi(0.5 * (1 / 9 + 2 / 9)) == pytest.approx(1.0 / 18.0)
    assert dom.contains(np.array([[0.5, 0.5]]))[0]
    assert not dom.contains(np.array([[0.5, 0.1]]))[0]
