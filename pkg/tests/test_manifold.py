import numpy as np
import pytest

from conekit.core import BoxDomain, Point, SplitVectorField, ZBound
from conekit.errors import (ConfigError, GraphComputationError,
                            HypothesisError, LipschitzPrecondition,
                            UnsupportedDimension)
from conekit.manifold import (GraphManifold, classify_boundary,
                              compute_graph_shoot, compute_graph_transform,
                              cone_invariance_probe, derivative_field,
                              intersect_graphs, invariance_residual,
                              lipschitz_audit, periodicity_audit,
                              separation_probe)


def toy_field():
    # invariant graph a = sin(z)/2 (z frozen); a expands at rate 2
    return SplitVectorField(1, 1, lambda a, z: 2 * a - np.sin(z),
                            lambda a, z: 0.0 * z)


def toy_domain():
    return BoxDomain([(-1, 1)], [ZBound.periodic(2 * np.pi)])


def drift_field():
    # 1-d base drive keeps the transform's base leg honest: the graph
    # height feeds back into the base speed
    return SplitVectorField(1, 1,
                            lambda a, z: 8 * a - a ** 2 + np.sin(z),
                            lambda a, z: 0.3 + 0.1 * a)


def drift_domain():
    return BoxDomain([(-0.3, 0.3)], [ZBound.periodic(2 * np.pi)])


# -- container ----------------------------------------------------------------

def synthetic_graph(fn, nodes=65, inclusive=True, dfn=None):
    ax = np.linspace(0.0, 2 * np.pi, nodes) if inclusive else np.linspace(
        0.0, 2 * np.pi, nodes, endpoint=False)
    h = fn(ax)[:, None]
    dh = dfn(ax)[:, None, None] if dfn else None
    return GraphManifold([ax], h, periods=(2 * np.pi,), dh_values=dh)


def test_container_shape_validation():
    ax = np.linspace(0, 1, 5)
    with pytest.raises(ConfigError):
        GraphManifold([ax], np.zeros((4, 1)))
    with pytest.raises(ConfigError):
        GraphManifold([ax], np.zeros((5, 1)), periods=(None, None))
    with pytest.raises(ConfigError):
        GraphManifold([ax[::-1]], np.zeros((5, 1)))


def test_interpolation_and_wrap():
    g = synthetic_graph(lambda z: np.sin(z) / 2, dfn=lambda z: np.cos(z) / 2)
    rng = np.random.default_rng(2)
    zq = rng.uniform(0, 2 * np.pi, size=(50, 1))
    assert np.max(np.abs(g.h_at(zq)[:, 0] - np.sin(zq[:, 0]) / 2)) < 2e-6
    # periodic images evaluate identically
    assert np.allclose(g.h_at(zq), g.h_at(zq + 4 * np.pi), atol=1e-12)
    assert np.max(np.abs(g.dh_at(zq)[:, 0, 0] - np.cos(zq[:, 0]) / 2)) < 2e-6


def test_interval_lattice_bounds():
    ax = np.linspace(0.0, 1.0, 9)
    g = GraphManifold([ax], (ax ** 2)[:, None])
    assert g.h_at([[0.5]])[0, 0] == pytest.approx(0.25, abs=1e-3)
    # a hair outside is forgiven, far outside is an error
    g.h_at([[1.0 + 1e-12]])
    with pytest.raises(GraphComputationError):
        g.h_at([[1.5]])
    with pytest.raises(ConfigError):
        g.dh_at([[0.5]])
    assert list(g.covers([[0.5], [1.4]])) == [True, False]


def test_node_enumeration_order():
    ax0 = np.array([0.0, 1.0])
    ax1 = np.array([0.0, 0.5, 1.0])
    h = np.arange(6, dtype=float).reshape(2, 3, 1)
    g = GraphManifold([ax0, ax1], h)
    Z = g.nodes_z()
    assert Z.shape == (6, 2)
    # C-order: the trailing axis varies fastest
    assert np.allclose(Z[0], [0, 0]) and np.allclose(Z[1], [0, 0.5])
    assert np.allclose(g.nodes_h()[:, 0], np.arange(6))


# -- boundary classification ----------------------------------------------------

def test_classify_boundary_toy():
    rep = classify_boundary(toy_field(), toy_domain())
    assert rep.faces["a0_hi"].kind == "exit"
    assert rep.faces["a0_lo"].kind == "exit"
    assert rep.isolating
    # outward floor 2 - max(sin) over the 9-sample face lattice
    assert rep.faces["a0_hi"].min_speed == pytest.approx(
        2.0 - np.sin(4 * np.pi / 9), abs=1e-9)


def test_classify_boundary_mixed_and_z_faces():
    small = BoxDomain([(-0.2, 0.2)], [ZBound.periodic(2 * np.pi)])
    rep = classify_boundary(toy_field(), small)
    assert rep.faces["a0_hi"].kind == "mixed"
    assert not rep.isolating

    fld = SplitVectorField(1, 1, lambda a, z: 2 * a,
                           lambda a, z: -np.ones_like(z))
    dom = BoxDomain([(-1, 1)], [(0.0, 1.0)])
    rep = classify_boundary(fld, dom)
    assert rep.faces["z0_lo"].kind == "exit"
    assert rep.faces["z0_hi"].kind == "entry"
    assert not rep.isolating


# -- shooting -------------------------------------------------------------------

def test_shoot_recovers_toy_graph():
    g = compute_graph_shoot(toy_field(), toy_domain(), grid_density=65)
    zs = g.nodes_z()[:, 0]
    assert np.max(np.abs(g.nodes_h()[:, 0] - np.sin(zs) / 2)) < 1e-7
    # interpolated heights off the lattice
    zq = np.linspace(0.1, 6.0, 40)[:, None]
    assert np.max(np.abs(g.h_at(zq)[:, 0] - np.sin(zq[:, 0]) / 2)) < 1e-5
    assert g.residual < 1e-5
    assert g.meta["method"] == "shoot"
    assert periodicity_audit(g) < 1e-6
    rep = lipschitz_audit(g)
    assert rep.passed and rep.margin > 0.45


def test_shoot_rejects_vector_normal():
    fld = SplitVectorField(2, 1, lambda a, z: 2 * a, lambda a, z: 0.0 * z)
    dom = BoxDomain([(-1, 1), (-1, 1)], [ZBound.periodic(2 * np.pi)])
    with pytest.raises(UnsupportedDimension):
        compute_graph_shoot(fld, dom)


def test_shoot_rejects_contracting_normal():
    fld = SplitVectorField(1, 1, lambda a, z: -2 * a, lambda a, z: 0.0 * z)
    with pytest.raises(HypothesisError):
        compute_graph_shoot(fld, toy_domain())


def test_shoot_rejects_non_isolating_box():
    dom = BoxDomain([(-0.2, 0.2)], [ZBound.periodic(2 * np.pi)])
    with pytest.raises(HypothesisError, match="isolating"):
        compute_graph_shoot(toy_field(), dom)


def test_shoot_reports_sideways_exits():
    fld = SplitVectorField(1, 1, lambda a, z: 2 * a,
                           lambda a, z: -np.ones_like(z))
    dom = BoxDomain([(-1, 1)], [(0.0, 4.0)])
    with pytest.raises(GraphComputationError, match="z-face"):
        compute_graph_shoot(fld, dom, grid_density=9, precheck=False,
                            t_horizon=30.0)


# -- graph transform --------------------------------------------------------------

def test_transform_recovers_toy_graph():
    g = compute_graph_transform(toy_field(), toy_domain(), grid_density=33,
                                tol=1e-9)
    zs = g.nodes_z()[:, 0]
    assert np.max(np.abs(g.nodes_h()[:, 0] - np.sin(zs) / 2)) < 1e-7
    assert g.meta["method"] == "transform"
    assert g.meta["sweeps"] < 60
    # per-sweep contraction tracks exp(-alpha * tau) = exp(-1)
    assert 0.25 < g.meta["contraction_estimate"] < 0.5


def test_transform_iteration_budget():
    with pytest.raises(GraphComputationError, match="settle"):
        compute_graph_transform(toy_field(), toy_domain(), grid_density=17,
                                max_iter=2, tol=1e-12)


def test_transform_matches_shoot_with_base_drift():
    fld = drift_field()
    dom = drift_domain()
    gs = compute_graph_shoot(fld, dom, grid_density=33)
    gt = compute_graph_transform(fld, dom, grid_density=33, tol=1e-10)
    diff = np.max(np.abs(gs.nodes_h() - gt.nodes_h()))
    assert diff < 1e-6
    # recorded defect uses the margin-scaled flight
    assert gt.residual < 1e-5
    # a full unit-time flight amplifies node error by exp(alpha) ~ 3e3
    assert invariance_residual(fld, gt, domain=dom, t_probe=1.0) < 1e-3


# -- residuals and derivative transport -------------------------------------------

def test_residual_flags_perturbed_graph():
    fld = toy_field()
    g = compute_graph_shoot(fld, toy_domain(), grid_density=33)
    exact = invariance_residual(fld, g, domain=toy_domain())
    bad = GraphManifold(g.z_axes, g.h_values + 0.01, g.periods)
    drifted = invariance_residual(fld, bad, domain=toy_domain())
    assert exact < 1e-5
    # the defect of the shifted graph grows with the normal rate
    assert drifted > 0.05


def test_derivative_field_toy():
    fld = toy_field()
    g = compute_graph_shoot(fld, toy_domain(), grid_density=65)
    gd = derivative_field(fld, g, t_back=8.0)
    zs = gd.nodes_z()[:, 0]
    dh = gd.nodes_dh()[:, 0, 0]
    assert np.max(np.abs(dh - np.cos(zs) / 2)) < 1e-6
    assert gd.meta["max_slope"] == pytest.approx(0.5, abs=1e-6)
    zq = np.array([[0.3], [4.0]])
    assert np.max(np.abs(gd.dh_at(zq)[:, 0, 0] - np.cos(zq[:, 0]) / 2)) < 1e-5


def test_derivative_field_slope_guard():
    fld = toy_field()
    g = compute_graph_shoot(fld, toy_domain(), grid_density=33)
    with pytest.raises(HypothesisError, match="slope"):
        derivative_field(fld, g, t_back=8.0, slope_limit=0.4)


# -- periodicity --------------------------------------------------------------------

def test_periodicity_audit_catches_synthetic_violation():
    ax = np.linspace(0.0, 2 * np.pi, 17)
    g = GraphManifold([ax], ax[:, None], periods=(2 * np.pi,))
    assert periodicity_audit(g) == pytest.approx(2 * np.pi)


def test_periodicity_audit_needs_endpoint():
    g = synthetic_graph(lambda z: np.sin(z), inclusive=False)
    with pytest.raises(ConfigError):
        periodicity_audit(g)


# -- cone and separation probes --------------------------------------------------------

def test_cone_probe_gauge_grows():
    fld = toy_field()
    z0 = 1.1
    x1 = Point([np.sin(z0) / 2 + 0.05], [z0])
    x2 = Point([np.sin(z0) / 2], [z0])
    trace = cone_invariance_probe(fld, x1, x2, 1.0)
    assert trace.ok and trace.monotone and not trace.truncated
    assert trace.gauges[0] == pytest.approx(0.0025)
    assert trace.gauges[-1] > trace.gauges[0]


def test_cone_probe_rejects_outside_pair():
    x1 = Point([0.0], [0.0])
    x2 = Point([0.0], [0.5])
    with pytest.raises(ConfigError):
        cone_invariance_probe(toy_field(), x1, x2, 1.0)


def test_cone_probe_truncates_at_boundary():
    fld = toy_field()
    x1 = Point([0.9], [0.0])
    x2 = Point([0.0], [0.0])
    trace = cone_invariance_probe(fld, x1, x2, 5.0, domain=toy_domain())
    assert trace.truncated
    assert trace.times[-1] < 5.0
    assert trace.ok


def test_separation_probe_rates():
    # da(t) = da(0) exp(2t) exactly for the toy pair
    fld = toy_field()
    x1 = Point([0.1], [0.4])
    x2 = Point([0.0], [0.4])
    ok = separation_probe(fld, x1, x2, c1=1.9, t_end=1.0)
    assert ok.passed
    too_fast = separation_probe(fld, x1, x2, c1=2.1, t_end=1.0)
    assert not too_fast.passed


# -- fixed-section intersection ----------------------------------------------------------

def test_intersection_quarter_linear():
    P = lambda q, zeta, theta: 0.25 * q + 0.3 * np.sin(zeta)
    Q = lambda p, zeta, theta: -0.25 * p + 0.2 * np.cos(theta)
    zeta = np.linspace(0, 2 * np.pi, 21)
    theta = np.linspace(0, 2 * np.pi, 19)
    res = intersect_graphs(P, Q, zeta, theta)
    Zg, Tg = np.meshgrid(zeta, theta, indexing="ij")
    p_exact = (0.3 * np.sin(Zg) + 0.05 * np.cos(Tg)) / (17.0 / 16.0)
    assert np.max(np.abs(res.p - p_exact)) < 1e-10
    assert np.max(np.abs(res.q - (-0.25 * res.p + 0.2 * np.cos(Tg)))) < 1e-10
    assert res.ratio_max <= 0.5
    assert res.iterations < 40
    assert res.lip_p == pytest.approx(0.25, abs=1e-9)


def test_intersection_rejects_steep_maps():
    P = lambda q, zeta, theta: 0.6 * q
    Q = lambda p, zeta, theta: 0.1 * p
    with pytest.raises(LipschitzPrecondition):
        intersect_graphs(P, Q, np.linspace(0, 1, 5), np.linspace(0, 1, 5))
