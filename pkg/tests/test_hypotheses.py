import numpy as np
import pytest

from conekit.core import BoxDomain, Point, RateProfile, SplitVectorField, ZBound
from conekit.errors import ConfigError, HypothesisError
from conekit.hypotheses import (CheckReport, check_hyp2, check_hyp2star,
                                check_hyp5, grid_rates, max_certified_order,
                                pointwise_rates)


def toy_field():
    # invariant graph a = sin(z)/2; a-block expands at rate 2
    return SplitVectorField(1, 1, lambda a, z: 2 * a - np.sin(z),
                            lambda a, z: 0.0 * z)


def toy_domain():
    return BoxDomain([(-1, 1)], [ZBound.periodic(2 * np.pi)])


def torus_rates(beta=0.7, delta=0.3, k=1.0, gamma=0.1):
    # closed-form envelope bounds for the driven torus family
    s = np.sqrt(1 + gamma ** 2)
    return RateProfile(alpha=lambda a, z: 8 * beta - 2 * delta,
                       ell=lambda a, z: beta ** 2 * s,
                       dzf_norm=lambda a, z: k * s,
                       dag_norm=lambda a, z: beta / k)


def test_pointwise_rates_toy():
    r = pointwise_rates(toy_field(), Point([0.1], [0.7]))
    assert r["alpha"] == pytest.approx(2.0, abs=1e-8)
    assert r["ell"] == pytest.approx(0.0, abs=1e-8)
    assert r["dzf_norm"] == pytest.approx(abs(np.cos(0.7)), abs=1e-8)
    assert r["dag_norm"] == pytest.approx(0.0, abs=1e-8)


def test_alpha_is_tightest_quadratic_bound():
    # alpha must be attained (not just bounded) by the quadratic form
    M = np.array([[3.0, 1.0], [0.0, 2.0]])
    fld = SplitVectorField(2, 1, lambda a, z: a @ M.T,
                           lambda a, z: -z)
    r = pointwise_rates(fld, Point([0.0, 0.0], [0.0]))
    sym = 0.5 * (M + M.T)
    ang = np.linspace(0.0, np.pi, 20001)
    u = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    forms = np.einsum("ki,ij,kj->k", u, sym, u)
    assert forms.min() >= r["alpha"] - 1e-12
    assert forms.min() <= r["alpha"] + 1e-6


def test_hyp2_margin_toy_exact():
    # worst sample sits at cos(z) = +-1, so the margin is 2 - 1 - c1 up
    # to finite-difference roundoff in the sampled Jacobians
    rep = check_hyp2(toy_field(), toy_domain())
    assert rep.passed
    assert rep.margin == pytest.approx(1.0, abs=1e-9)
    rep9 = check_hyp2(toy_field(), toy_domain(), c1=0.9)
    assert rep9.passed
    assert rep9.margin == pytest.approx(0.1, abs=1e-9)
    rep_fail = check_hyp2(toy_field(), toy_domain(), c1=1.5)
    assert not rep_fail.passed
    assert rep_fail.margin == pytest.approx(-0.5, abs=1e-9)


def test_hyp2_report_record_line():
    rep = check_hyp2(toy_field(), toy_domain())
    line = rep.to_record()
    assert line.startswith("check=hyp2 passed=1 margin=")
    assert f"samples={rep.samples}" in line


def test_nested_grid_monotone():
    # the 17-point axes are a subset of the 33-point axes, so refining
    # can only lower the sampled minimum
    fld = toy_field()
    dom = toy_domain()
    m17 = check_hyp2(fld, dom, grid_density=17).margin
    m33 = check_hyp2(fld, dom, grid_density=33).margin
    assert m33 <= m17 + 1e-15


def test_rates_override_used():
    rep = check_hyp2(toy_field(), toy_domain(), rates=torus_rates())
    s = np.sqrt(1.01)
    expect = 5.0 - 0.49 * s - s - 0.7
    assert rep.margin == pytest.approx(expect, abs=1e-12)


def test_free_z_requires_window():
    fld = SplitVectorField(1, 1, lambda a, z: 2 * a, lambda a, z: -z)
    dom = BoxDomain([(-1, 1)], [ZBound.free()])
    with pytest.raises(ConfigError):
        check_hyp2(fld, dom)
    rep = check_hyp2(fld, dom, z_window={0: (-2.0, 2.0)})
    assert rep.passed
    assert any("window" in n for n in rep.notes)


def test_hyp2star_orders():
    rep2 = check_hyp2star(toy_field(), toy_domain(), r=2)
    # r-line for the toy is alpha = 2 with no competition, so the
    # combined margin stays pinned at the first-order line
    assert rep2.margin == pytest.approx(1.0, abs=1e-9)
    assert rep2.inequality_id == "hyp2star_r2"
    with pytest.raises(ConfigError):
        check_hyp2star(toy_field(), toy_domain(), r=0)


def test_hyp2star_monotone_in_r():
    fld = toy_field()
    dom = toy_domain()
    rates = torus_rates()
    margins = [check_hyp2star(fld, dom, r=r, rates=rates).margin
               for r in range(1, 7)]
    assert all(m2 <= m1 + 1e-15 for m1, m2 in zip(margins, margins[1:]))


def test_max_certified_order_torus_envelope():
    # hand evaluation: alpha=5, ell=0.49*sqrt(1.01), dag=0.7 gives the
    # r-line 4.3 - 1.19244...*r, positive through r=3 and negative at r=4
    fld = toy_field()
    dom = toy_domain()
    rates = torus_rates()
    r_max = max_certified_order(fld, dom, rates=rates)
    assert r_max == 3
    assert check_hyp2star(fld, dom, r=3, rates=rates).passed
    assert not check_hyp2star(fld, dom, r=4, rates=rates).passed


def test_max_certified_order_zero_when_hyp2_fails():
    rates = RateProfile(alpha=lambda a, z: 1.0, ell=lambda a, z: 2.0,
                        dzf_norm=lambda a, z: 0.0, dag_norm=lambda a, z: 0.0)
    assert max_certified_order(toy_field(), toy_domain(), rates=rates) == 0


def test_max_certified_order_respects_cap():
    # decoupled toy never loses the r-line, so the cap binds
    assert max_certified_order(toy_field(), toy_domain(), r_cap=6) == 6


class FakeGraph:
    m = 1

    def __init__(self, slope=0.5):
        self.zs = np.linspace(0.0, 2 * np.pi, 32, endpoint=False)
        self.slope = slope

    def nodes_z(self):
        return self.zs[:, None]

    def nodes_h(self):
        return np.sin(self.zs)[:, None] * self.slope

    def nodes_dh(self):
        return np.cos(self.zs)[:, None, None] * self.slope


def test_hyp5_slope_precondition():
    fld = toy_field()
    rep = check_hyp5(fld, FakeGraph(), eta=0.6, r=2)
    assert rep.passed
    assert rep.inequality_id == "hyp5_r2"
    with pytest.raises(HypothesisError):
        check_hyp5(fld, FakeGraph(), eta=0.4, r=2)


def test_hyp5_needs_derivatives():
    class NoDh(FakeGraph):
        def nodes_dh(self):
            return None

    with pytest.raises(ConfigError):
        check_hyp5(toy_field(), NoDh(), eta=0.6, r=2)


def test_hyp5_tube_samples_count():
    g = FakeGraph()
    rep = check_hyp5(toy_field(), g, eta=0.6, r=1, tube_radius=0.01)
    # node centers plus +- offsets along the single a- and z-direction
    assert rep.samples == 5 * len(g.zs)


def test_grid_rates_shapes():
    A, Z, alpha, ell, dzf, dag, notes = grid_rates(
        toy_field(), toy_domain(), grid_density=9)
    assert A.shape == (81, 1) and Z.shape == (81, 1)
    for arr in (alpha, ell, dzf, dag):
        assert arr.shape == (81,)
    assert notes == ()


def test_report_consistency_guard():
    with pytest.raises(AssertionError):
        CheckReport("x", passed=True, margin=-1.0, worst_point=None, samples=1)
