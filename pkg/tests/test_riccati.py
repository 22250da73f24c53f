import numpy as np
import pytest

from conekit.core import BoxDomain, SplitVectorField, ZBound
from conekit.errors import ConfigError, RiccatiBlowup
from conekit.hypotheses import check_hyp2
from conekit.integrate import BLOWN, RAN_TO_END
from conekit.riccati import (lift_level1, riccati_batch, riccati_integrate,
                             _bunvec, _bvec)


def toy_field():
    # invariant graph a = sin(z)/2 with frozen base (g = 0); the matrix
    # flow reduces to V' = 2V - cos(z) at fixed z
    return SplitVectorField(1, 1, lambda a, z: 2 * a - np.sin(z),
                            lambda a, z: 0.0 * z)


def toy_h(Z):
    return np.sin(Z) / 2


def test_vec_helpers_roundtrip():
    rng = np.random.default_rng(3)
    V = rng.standard_normal((5, 3, 2))
    v = _bvec(V)
    assert v.shape == (5, 6)
    # column stacking: first column first
    assert np.array_equal(v[0, :3], V[0, :, 0])
    assert np.array_equal(_bunvec(v, 3, 2), V)


def test_backward_toy_matches_closed_form():
    # backward from V=0 over time T: V(T) = cos(z)/2 * (1 - exp(-2T))
    z0, T = 0.7, 3.0
    path = riccati_integrate(toy_field(), toy_h, [z0], [[0.0]], -T, tol=1e-10)
    assert path.direction == -1
    assert path.times[0] == 0.0 and path.times[-1] == pytest.approx(T)
    expect = np.cos(z0) / 2 * (1 - np.exp(-2 * T))
    assert path.end()[0, 0] == pytest.approx(expect, abs=1e-9)
    # base coordinate is frozen for the toy
    assert np.max(np.abs(path.z - z0)) < 1e-12


def test_backward_contraction_rate():
    # the terminal error against the equilibrium slope decays at rate 2
    z0 = 0.3
    vinf = np.cos(z0) / 2
    e = []
    for T in (1.0, 2.0):
        path = riccati_integrate(toy_field(), toy_h, [z0], [[0.0]], -T,
                                 tol=1e-11)
        e.append(abs(vinf - path.end()[0, 0]))
    assert e[1] / e[0] == pytest.approx(np.exp(-2.0), rel=1e-4)


def test_linear_field_with_moving_base():
    # f = 2a + z, g = -z: V' = 3V + 1, invariant slope -1/3
    fld = SplitVectorField(1, 1, lambda a, z: 2 * a + z, lambda a, z: -z)
    path = riccati_integrate(fld, lambda Z: -Z / 3.0, [0.5], [[0.0]], -3.0,
                             tol=1e-10)
    expect = -(1 - np.exp(-9.0)) / 3.0
    assert path.end()[0, 0] == pytest.approx(expect, abs=1e-8)
    # the reversed base leg expands z
    assert path.z[-1, 0] == pytest.approx(0.5 * np.exp(3.0), rel=1e-7)


def test_zero_coupling_stays_zero():
    fld = SplitVectorField(1, 1, lambda a, z: 2 * a, lambda a, z: -z)
    path = riccati_integrate(fld, lambda Z: 0.0 * Z, [1.0], [[0.0]], -2.0)
    assert np.max(np.abs(path.V)) < 1e-12


def test_finite_time_escape_raises():
    # f = z, g = -a gives V' = V^2 + 1, escaping at t = pi/2
    fld = SplitVectorField(1, 1, lambda a, z: z, lambda a, z: -a)
    with pytest.raises(RiccatiBlowup, match="norm cap"):
        riccati_integrate(fld, lambda Z: 0.0 * Z, [0.3], [[0.0]], 2.0,
                          norm_cap=1e6)


def test_batch_matches_single_and_flags_blowups():
    zs = np.linspace(0.0, 2 * np.pi, 8, endpoint=False)[:, None]
    V0 = np.zeros((8, 1, 1))
    res = riccati_batch(toy_field(), toy_h, zs, V0, -2.0, tol=1e-10)
    assert np.all(res.code == RAN_TO_END)
    expect = np.cos(zs[:, 0]) / 2 * (1 - np.exp(-4.0))
    assert np.max(np.abs(res.V[:, 0, 0] - expect)) < 1e-8

    fld = SplitVectorField(1, 1, lambda a, z: z, lambda a, z: -a)
    res = riccati_batch(fld, lambda Z: 0.0 * Z, np.zeros((2, 1)),
                        np.zeros((2, 1, 1)), 2.0, norm_cap=1e3)
    assert np.all(res.code == BLOWN)
    assert np.all(res.t_reached < 1.8)


def test_lift_toy_drift_and_rates():
    lift = lift_level1(toy_field(), toy_h, sigma1=0.5)
    zeta = np.linspace(-3.0, 3.0, 11)[:, None]
    v = np.linspace(-1.0, 1.0, 11)[:, None]
    out = lift.field1.f(v, zeta)
    # the drift is assembled from sampled Jacobian blocks, so agreement
    # is limited by finite-difference roundoff
    assert np.max(np.abs(out - (2 * v - np.cos(0.5 * zeta)))) < 1e-9
    assert np.max(np.abs(lift.field1.g(v, zeta))) == 0.0
    assert np.max(np.abs(lift.alpha1(zeta) - 2.0)) < 1e-8
    assert np.max(np.abs(lift.ell1(zeta))) < 1e-8


def test_lift_base_rescaling():
    lift = lift_level1(toy_field(), toy_h, sigma1=0.25)
    A, Z = lift.base(np.array([[2.0]]))
    assert Z[0, 0] == pytest.approx(0.5)
    assert A[0, 0] == pytest.approx(np.sin(0.5) / 2)


def test_lift_jacobian_matches_fd():
    M = np.array([[2.5, 0.3], [0.1, 3.0]])

    def f(a, z):
        drive = np.stack([np.sin(z[..., 0]), np.cos(z[..., 0])], axis=-1)
        return a @ M.T + drive

    def g(a, z):
        return (0.2 * a[..., :1] - 0.5 * z + 0.1 * a[..., 1:2]
                + 0.05 * a[..., :1] * a[..., 1:2])

    fld = SplitVectorField(2, 1, f, g)
    lift = lift_level1(fld, lambda Z: 0.1 * np.concatenate(
        [np.sin(Z), np.cos(Z)], axis=-1), sigma1=0.7)
    rng = np.random.default_rng(8)
    v = rng.standard_normal((4, 2))
    zeta = rng.uniform(-2, 2, size=(4, 1))
    jac = lift.field1.d_af(v, zeta)
    step = 1e-6
    for j in range(2):
        dv = np.zeros(2)
        dv[j] = step
        fd = (lift.field1.f(v + dv, zeta) - lift.field1.f(v - dv, zeta)) / (
            2 * step)
        assert np.max(np.abs(jac[:, :, j] - fd)) < 1e-6


def test_lift_default_sigma_rule():
    # unscaled drift has zeta-slope sup |sin| = 1, so cr=1 gives
    # sigma1 = 1 / (2 * 1.25) = 0.4
    lift = lift_level1(toy_field(), toy_h, cr=1.0,
                       zeta_samples=np.linspace(0.0, 2 * np.pi, 64,
                                                endpoint=False))
    assert lift.sigma1 == pytest.approx(0.4, rel=1e-6)
    assert lift.lip_estimate == pytest.approx(1.0, rel=1e-6)


def test_lift_config_errors():
    with pytest.raises(ConfigError):
        lift_level1(toy_field(), toy_h)  # default rule without cr/samples
    with pytest.raises(ConfigError):
        lift_level1(toy_field(), toy_h, sigma1=0.0)


def test_lifted_system_passes_first_order_check():
    lift = lift_level1(toy_field(), toy_h, sigma1=0.5)
    dom = BoxDomain([(-1.0, 1.0)], [ZBound.periodic(2 * np.pi / 0.5)])
    rep = check_hyp2(lift.field1, dom, c1=1.0)
    assert rep.passed
    assert 0.49 < rep.margin < 0.51
