"""Built-in example systems.

Each registry entry packages a ready-to-run split system: the vector
field, the box domain it is certified on, a rate profile of closed-form
bounds that dominate the sampled rates, and a dictionary of
machine-checkable facts (known graphs, known margins, known fixed-point
classifications).  `audit_system` replays every fact against the
checker it refers to and returns one report per fact, which is what the
test suite and the command-line audit run.

Registered systems:

  decoupled_toy        da/dt = 2a - sin z, dz/dt = 0; graph known in
                       closed form (h = sin(z) / 2).
  torus_family         scaled two-angle torus flow with quadratic radial
                       expansion; constant rate bounds hold everywhere.
  weak_counterexample  damped pendulum-style system whose expansion rate
                       is negative; the cone checks must fail, yet it
                       has hyperbolic fixed points.
  rapid_osc            drift + forcing system with a fast second angle
                       and an auxiliary interval coordinate; rates come
                       from pointwise envelope bounds.
  persistence_toy      slow normal form with one expanding and one
                       contracting direction and small documented
                       perturbations; persistence_toy_reversed is its
                       time reversal with the roles of p and q swapped.

The registry is read-only after import; `register_system` is the
extension point for user-defined entries.
"""

import math
from dataclasses import dataclass, field as _field

import numpy as np

from .core import BoxDomain, RateProfile, SplitVectorField, ZBound
from .errors import ConfigError
from .hypotheses import CheckReport, check_hyp2, grid_rates, max_certified_order
from .manifold import compute_graph_shoot
from .regions import (
    PersistenceConstants,
    RapidOscSpec,
    best_torus_slack,
    counterexample_fixed_points,
    k_epsilon,
    persistence_thresholds,
    q_membership,
    rapid_osc_condition,
)

__all__ = [
    "SystemSpec",
    "register_system",
    "system_names",
    "get_spec",
    "build_system",
    "audit_system",
]


@dataclass(frozen=True)
class SystemSpec:
    """Registry entry: defaults, builder, and the facts the system ships with.

    build takes the full parameter map as keyword arguments and returns
    (SplitVectorField, BoxDomain, RateProfile).  facts hold expectations
    the audit suite knows how to check; numeric expectations are stored
    as (value, tolerance) pairs, one-sided ones as plain floats.
    """

    name: str
    summary: str
    parameters: dict
    build: object
    facts: dict = _field(default_factory=dict)


_REGISTRY = {}
_AUDITS = {}


def register_system(spec, audit=None):
    """Add a SystemSpec to the registry; the extension point for new systems."""
    if not isinstance(spec, SystemSpec):
        raise ConfigError("register_system expects a SystemSpec")
    if spec.name in _REGISTRY:
        raise ConfigError(f"system {spec.name!r} is already registered")
    if not callable(spec.build):
        raise ConfigError("SystemSpec.build must be callable")
    _REGISTRY[spec.name] = spec
    if audit is not None:
        _AUDITS[spec.name] = audit
    return spec


def system_names():
    return tuple(sorted(_REGISTRY))


def get_spec(name):
    try:
        return _REGISTRY[name]
    except KeyError:
        known = ", ".join(system_names())
        raise ConfigError(f"unknown system {name!r}; registered: {known}") from None


def build_system(name, **overrides):
    """Instantiate a registered system, overriding selected parameters.

    Returns (field, domain, rates).  Unknown parameter names and values
    outside the documented ranges raise ConfigError.
    """
    spec = get_spec(name)
    bad = sorted(set(overrides) - set(spec.parameters))
    if bad:
        raise ConfigError(
            f"system {name!r} takes no parameter {bad[0]!r}; "
            f"accepted: {', '.join(sorted(spec.parameters))}")
    params = dict(spec.parameters)
    for key, val in overrides.items():
        params[key] = float(val)
    return spec.build(**params)


def audit_system(name, **overrides):
    """Re-check every shipped fact of one system; one report per fact."""
    spec = get_spec(name)
    audit = _AUDITS.get(name)
    if audit is None:
        return ()
    triple = build_system(name, **overrides)
    return tuple(audit(spec, *triple))


# report helper for discrete or tolerance-style facts
def _fact(fact_id, margin, worst=None, samples=1, notes=()):
    return CheckReport(
        inequality_id=fact_id,
        passed=bool(margin > 0.0),
        margin=float(margin),
        worst_point=worst,
        samples=int(samples),
        notes=tuple(notes),
    )


def _within(fact_id, observed, expected_pair, notes=()):
    expected, tol = expected_pair
    err = abs(observed - expected)
    return _fact(fact_id, tol - err,
                 notes=(f"observed={observed:.12g}",
                        f"expected={expected:.12g}") + tuple(notes))


def _rates_dominated(field, domain, rates, grid_density=None):
    """Worst slack of the closed-form bounds over sampled true rates."""
    A, Z, alpha, ell, dzf, dag, _ = grid_rates(field, domain, grid_density)
    pa = np.broadcast_to(np.asarray(rates.alpha(A, Z), dtype=float), alpha.shape)
    pl = np.broadcast_to(np.asarray(rates.ell(A, Z), dtype=float), ell.shape)
    pf = np.broadcast_to(np.asarray(rates.dzf_norm(A, Z), dtype=float), dzf.shape)
    pg = np.broadcast_to(np.asarray(rates.dag_norm(A, Z), dtype=float), dag.shape)
    slacks = np.stack([alpha - pa, pl - ell, pf - dzf, pg - dag])
    worst = float(np.min(slacks))
    # FD rate extraction carries O(fd_step^2) noise; a hair below zero on
    # an exactly tight bound is still a pass
    fuzz = 64.0 * field.fd_step
    return worst, len(alpha), fuzz


def _const(value):
    value = float(value)
    return lambda A, Z: np.full(np.shape(A)[:-1], value)


# ---------------------------------------------------------------------------
# decoupled_toy: da/dt = 2a - sin z, dz/dt = 0
# ---------------------------------------------------------------------------

def _build_decoupled_toy():
    def f(a, z):
        return 2.0 * a - np.sin(z)

    def g(a, z):
        return np.zeros_like(z)

    field = SplitVectorField(
        1, 1, f, g,
        jac_aa=lambda a, z: np.broadcast_to(2.0, a.shape[:-1] + (1, 1)),
        jac_az=lambda a, z: -np.cos(z)[..., None, :],
        jac_za=lambda a, z: np.zeros(a.shape[:-1] + (1, 1)),
        jac_zz=lambda a, z: np.zeros(z.shape[:-1] + (1, 1)),
        name="decoupled_toy")
    domain = BoxDomain([(-1.0, 1.0)], [ZBound.periodic(2.0 * math.pi)])
    rates = RateProfile(
        alpha=_const(2.0),
        ell=_const(0.0),
        dzf_norm=lambda A, Z: np.abs(np.cos(Z[..., 0])),
        dag_norm=_const(0.0))
    return field, domain, rates


def _known_h_decoupled(z):
    z = np.asarray(z, dtype=float)
    return 0.5 * np.sin(z)


def _known_dh_decoupled(z):
    z = np.asarray(z, dtype=float)
    return 0.5 * np.cos(z)


def _audit_decoupled(spec, field, domain, rates):
    reports = []
    check = check_hyp2(field, domain, rates=rates)
    reports.append(_within("fact_hyp2_margin", check.margin,
                           spec.facts["hyp2_margin"]))
    order = max_certified_order(field, domain, rates=rates)
    reports.append(_fact(
        "fact_max_order", 1.0 if order == spec.facts["max_order"] else -1.0,
        notes=(f"observed={order}", f"expected={spec.facts['max_order']}")))
    graph = compute_graph_shoot(field, domain, grid_density=33)
    err = float(np.max(np.abs(
        graph.nodes_h()[:, 0] - spec.facts["known_h"](graph.nodes_z()[:, 0]))))
    reports.append(_fact("fact_known_h", spec.facts["h_tolerance"] - err,
                         samples=len(graph.nodes_h()),
                         notes=(f"max_error={err:.3g}",)))
    worst, count, fuzz = _rates_dominated(field, domain, rates)
    reports.append(_fact("fact_rate_bounds", worst + fuzz, samples=count,
                         notes=(f"worst_slack={worst:.3g}",)))
    return reports


register_system(
    SystemSpec(
        name="decoupled_toy",
        summary="scalar expansion over a frozen angle; graph known in closed form",
        parameters={},
        build=_build_decoupled_toy,
        facts={
            "hyp2_margin": (1.0, 1e-12),
            "max_order": 10,  # order scan cap: every r-line has full slack
            "known_h": _known_h_decoupled,
            "known_dh": _known_dh_decoupled,
            "h_tolerance": 1e-5,
        },
    ),
    audit=_audit_decoupled)


# ---------------------------------------------------------------------------
# torus_family: radial expansion over two rescaled angles
# ---------------------------------------------------------------------------

def _build_torus_family(beta, omega, k, gamma, delta):
    for label, val in (("beta", beta), ("k", k), ("gamma", gamma),
                       ("delta", delta)):
        if not val > 0.0:
            raise ConfigError(f"torus_family needs {label} > 0, got {val:g}")

    def f(a, z):
        R = a[..., 0]
        return (R * (8.0 * beta - R) + np.sin(k * z[..., 0])
                + np.sin(k * gamma * z[..., 1]))[..., None]

    def g(a, z):
        R = a[..., 0]
        g1 = (beta / k) * R + (beta ** 2 / k) * np.sin(k * z[..., 0]) * np.sin(
            k * gamma * z[..., 1])
        g2 = np.full_like(R, omega / (k * gamma))
        return np.stack([g1, g2], axis=-1)

    def jac_aa(a, z):
        return (8.0 * beta - 2.0 * a[..., 0])[..., None, None]

    def jac_az(a, z):
        d1 = k * np.cos(k * z[..., 0])
        d2 = k * gamma * np.cos(k * gamma * z[..., 1])
        return np.stack([d1, d2], axis=-1)[..., None, :]

    def jac_za(a, z):
        col = np.stack([np.full(a.shape[:-1], beta / k),
                        np.zeros(a.shape[:-1])], axis=-1)
        return col[..., :, None]

    def jac_zz(a, z):
        s1, c1 = np.sin(k * z[..., 0]), np.cos(k * z[..., 0])
        s2, c2 = (np.sin(k * gamma * z[..., 1]),
                  np.cos(k * gamma * z[..., 1]))
        out = np.zeros(z.shape[:-1] + (2, 2))
        out[..., 0, 0] = beta ** 2 * c1 * s2
        out[..., 0, 1] = beta ** 2 * gamma * s1 * c2
        return out

    field = SplitVectorField(1, 2, f, g, jac_aa=jac_aa, jac_az=jac_az,
                             jac_za=jac_za, jac_zz=jac_zz,
                             name="torus_family")
    domain = BoxDomain(
        [(-delta, delta)],
        [ZBound.periodic(2.0 * math.pi / k),
         ZBound.periodic(2.0 * math.pi / (k * gamma))])
    # constant envelopes: sym D_R f >= 8b - 2d on |R| < d, the coupling
    # term obeys ||D_theta g|| <= b^2 sqrt(1 + g^2), ||D_theta f|| <=
    # k sqrt(1 + g^2), and ||D_R g|| = b / k exactly
    root = math.sqrt(1.0 + gamma ** 2)
    rates = RateProfile(
        alpha=_const(8.0 * beta - 2.0 * delta),
        ell=_const(beta ** 2 * root),
        dzf_norm=_const(k * root),
        dag_norm=_const(beta / k))
    return field, domain, rates


def _audit_torus(spec, field, domain, rates):
    reports = []
    check = check_hyp2(field, domain, rates=rates)
    reports.append(_within("fact_hyp2_margin", check.margin,
                           spec.facts["hyp2_margin"]))
    order = max_certified_order(field, domain, rates=rates)
    reports.append(_fact(
        "fact_max_order", 1.0 if order == spec.facts["max_order"] else -1.0,
        notes=(f"observed={order}", f"expected={spec.facts['max_order']}")))
    q = q_membership(*spec.facts["q_point"])
    worst = min(tol - abs(q.slacks[key] - val)
                for key, (val, tol) in spec.facts["q_slacks"].items())
    reports.append(_fact("fact_q_slacks", worst,
                         notes=tuple(f"{key}={q.slacks[key]:.6g}"
                                     for key in sorted(q.slacks))))
    beta_out = spec.facts["infeasible_beta"]
    slack = best_torus_slack(beta_out, 1)
    reports.append(_fact("fact_infeasible_beta", -slack,
                         notes=(f"beta={beta_out:g}",
                                f"best_slack={slack:.6g}")))
    worst, count, fuzz = _rates_dominated(field, domain, rates)
    reports.append(_fact("fact_rate_bounds", worst + fuzz, samples=count,
                         notes=(f"worst_slack={worst:.3g}",)))
    return reports


register_system(
    SystemSpec(
        name="torus_family",
        summary="two-angle torus flow with quadratic radial expansion",
        parameters={"beta": 1.0, "omega": 0.0, "k": 1.0, "gamma": 0.1,
                    "delta": 0.3},
        build=_build_torus_family,
        facts={
            # 7.4 - 2 sqrt(1.01) - 1 at the default parameters
            "hyp2_margin": (4.390024875775822, 1e-9),
            "max_order": 3,  # at the default delta, k; the feasible-order
                             # scan over all (delta, k) reaches further
            "q_point": (1.0, 0.3, 1.0, 1),
            "q_slacks": {"diameter": (0.31, 1e-12), "order_1": (4.4, 1e-12)},
            "infeasible_beta": 0.2,
        },
    ),
    audit=_audit_torus)


# ---------------------------------------------------------------------------
# weak_counterexample: dw/dt = -eps w + alpha^2 sin theta, dtheta/dt = w
# ---------------------------------------------------------------------------

def _build_weak_counterexample(eps, alpha):
    if not eps > 0.0:
        raise ConfigError(f"weak_counterexample needs eps > 0, got {eps:g}")
    if not 0.0 <= alpha <= eps:
        raise ConfigError(
            f"weak_counterexample needs 0 <= alpha <= eps, got alpha={alpha:g}")

    def f(a, z):
        return -eps * a + alpha ** 2 * np.sin(z)

    def g(a, z):
        return np.broadcast_to(a, z.shape).copy()

    field = SplitVectorField(
        1, 1, f, g,
        jac_aa=lambda a, z: np.broadcast_to(-eps, a.shape[:-1] + (1, 1)),
        jac_az=lambda a, z: (alpha ** 2 * np.cos(z))[..., None, :],
        jac_za=lambda a, z: np.ones(a.shape[:-1] + (1, 1)),
        jac_zz=lambda a, z: np.zeros(z.shape[:-1] + (1, 1)),
        name="weak_counterexample")
    domain = BoxDomain([(-1.0, 1.0)], [ZBound.periodic(2.0 * math.pi)])
    rates = RateProfile(
        alpha=_const(-eps),
        ell=_const(0.0),
        dzf_norm=lambda A, Z: alpha ** 2 * np.abs(np.cos(Z[..., 0])),
        dag_norm=_const(1.0))
    return field, domain, rates


def _audit_counterexample(spec, field, domain, rates):
    reports = []
    check = check_hyp2(field, domain, rates=rates)
    expected, tol = spec.facts["hyp2_margin"]
    err = abs(check.margin - expected)
    # the fact here is FAILURE of the cone inequality at a known margin
    ok = (not check.passed) and err < tol
    reports.append(_fact("fact_hyp2_fails", tol - err if ok else -1.0,
                         notes=(f"observed={check.margin:.12g}",
                                f"expected={expected:.12g}")))
    eps = spec.facts["eps"]
    alpha = spec.facts["alpha"]
    points = counterexample_fixed_points(eps, alpha)
    expect = spec.facts["fixed_points"]
    worst = 1.0
    notes = []
    if len(points) != len(expect):
        worst = -1.0
    else:
        for info, (theta, label, eigs) in zip(points, expect):
            err = abs(info.point[1] - theta)
            err = max(err, float(np.max(np.abs(
                np.asarray(info.eigenvalues) - np.asarray(eigs)))))
            if info.classification != label:
                worst = -1.0
            worst = min(worst, spec.facts["eig_tolerance"] - err)
            notes.append(f"theta={theta:.6g}:{info.classification}")
    reports.append(_fact("fact_fixed_points", worst, samples=len(points),
                         notes=tuple(notes)))
    return reports


_GOLDEN = math.sqrt(5.0)

register_system(
    SystemSpec(
        name="weak_counterexample",
        summary="negative expansion rate with hyperbolic fixed points",
        parameters={"eps": 0.1, "alpha": 0.1},
        build=_build_weak_counterexample,
        facts={
            # alpha = -eps makes the margin -(eps + alpha^2 + 1) exactly
            "hyp2_margin": (-1.11, 1e-12),
            "eps": 0.1,
            "alpha": 0.1,
            "fixed_points": (
                (0.0, "saddle",
                 ((_GOLDEN - 1.0) / 20.0, -(_GOLDEN + 1.0) / 20.0)),
                (math.pi, "stable_spiral",
                 (complex(-0.05, -math.sqrt(3.0) / 20.0),
                  complex(-0.05, math.sqrt(3.0) / 20.0))),
            ),
            "eig_tolerance": 1e-10,
        },
    ),
    audit=_audit_counterexample)


# ---------------------------------------------------------------------------
# rapid_osc: drift + forcing over a fast angle, auxiliary interval coordinate
# ---------------------------------------------------------------------------

def _osc_drift(sigma):
    return 4.0 + np.cos(sigma)


def _osc_forcing(sigma):
    return np.sin(sigma)


def _osc_d_drift(sigma):
    return -np.sin(sigma)


def _osc_d_forcing(sigma):
    return np.cos(sigma)


def _build_rapid_osc(mu, k, delta, omega):
    if not 0.0 < mu <= 1.0:
        raise ConfigError(f"rapid_osc needs 0 < mu <= 1, got {mu:g}")
    if not 0.0 < delta <= 1.0:
        raise ConfigError(f"rapid_osc needs 0 < delta <= 1, got {delta:g}")
    if not k > 0.0:
        raise ConfigError(f"rapid_osc needs k > 0, got {k:g}")
    if not omega > 0.0:
        raise ConfigError(f"rapid_osc needs omega > 0, got {omega:g}")

    spec_osc = RapidOscSpec(_osc_drift, _osc_forcing,
                            d_delta=_osc_d_drift, d_lam=_osc_d_forcing)
    span = (spec_osc.E1 - delta, spec_osc.E2 + delta)

    def f(a, z):
        sigma = k * z[..., 0]
        return (_osc_drift(sigma) * a[..., 0] + _osc_forcing(sigma)
                + z[..., 2] * mu * np.sin(omega * z[..., 1]))[..., None]

    def g(a, z):
        g1 = (a[..., 0] + z[..., 2] * mu * np.cos(omega * z[..., 1])) / k
        g2 = np.full(a.shape[:-1], 1.0 / mu ** 2)
        g3 = np.zeros(a.shape[:-1])
        return np.stack([g1, g2, g3], axis=-1)

    def jac_aa(a, z):
        return _osc_drift(k * z[..., 0])[..., None, None]

    def jac_az(a, z):
        sigma = k * z[..., 0]
        d1 = k * (_osc_d_drift(sigma) * a[..., 0] + _osc_d_forcing(sigma))
        d2 = z[..., 2] * mu * omega * np.cos(omega * z[..., 1])
        d3 = mu * np.sin(omega * z[..., 1])
        return np.stack([d1, d2, d3], axis=-1)[..., None, :]

    def jac_za(a, z):
        col = np.zeros(a.shape[:-1] + (3,))
        col[..., 0] = 1.0 / k
        return col[..., :, None]

    def jac_zz(a, z):
        out = np.zeros(z.shape[:-1] + (3, 3))
        out[..., 0, 1] = -z[..., 2] * mu * omega * np.sin(omega * z[..., 1]) / k
        out[..., 0, 2] = mu * np.cos(omega * z[..., 1]) / k
        return out

    field = SplitVectorField(1, 3, f, g, jac_aa=jac_aa, jac_az=jac_az,
                             jac_za=jac_za, jac_zz=jac_zz, name="rapid_osc")
    domain = BoxDomain(
        [span],
        [ZBound.periodic(2.0 * math.pi / k),
         ZBound.periodic(2.0 * math.pi / omega),
         ZBound.interval(-2.0, 2.0)])

    # pointwise envelopes: the drift bounds sym D_rho f from below; the
    # off-block norms collect the worst combination of the forcing slope,
    # the oscillator amplitude mu, and the auxiliary coordinate range
    reach = max(abs(span[0]), abs(span[1]))

    def alpha(A, Z):
        return _osc_drift(k * Z[..., 0])

    def dzf(A, Z):
        sigma = k * Z[..., 0]
        slope = k * (np.abs(_osc_d_drift(sigma)) * reach
                     + np.abs(_osc_d_forcing(sigma)))
        return np.sqrt(slope ** 2 + 4.0 * mu ** 2 * omega ** 2 + mu ** 2)

    rates = RateProfile(
        alpha=alpha,
        ell=_const(mu * math.sqrt(1.0 + 4.0 * omega ** 2) / k),
        dzf_norm=dzf,
        dag_norm=_const(1.0 / k))
    return field, domain, rates


def _audit_rapid_osc(spec, field, domain, rates):
    reports = []
    osc = RapidOscSpec(_osc_drift, _osc_forcing,
                       d_delta=_osc_d_drift, d_lam=_osc_d_forcing)
    reports.append(_within("fact_osc_E", osc.E, spec.facts["E"]))
    reports.append(_within("fact_osc_L", osc.L, spec.facts["L"]))
    for r, pair in sorted(spec.facts["osc_margins"].items()):
        cond = rapid_osc_condition(osc, r)
        reports.append(_within(f"fact_osc_margin_r{r}", cond.margin, pair))
    r_edge = spec.facts["osc_order_max"]
    ok = (rapid_osc_condition(osc, r_edge).margin > 0.0
          and rapid_osc_condition(osc, r_edge + 1).margin <= 0.0)
    reports.append(_fact("fact_osc_order_max", 1.0 if ok else -1.0,
                         notes=(f"last_passing_order={r_edge}",)))
    check = check_hyp2(field, domain, rates=rates)
    reports.append(_within("fact_hyp2_margin", check.margin,
                           spec.facts["hyp2_margin"]))
    worst, count, fuzz = _rates_dominated(field, domain, rates)
    reports.append(_fact("fact_rate_bounds", worst + fuzz, samples=count,
                         notes=(f"worst_slack={worst:.3g}",)))
    return reports


register_system(
    SystemSpec(
        name="rapid_osc",
        summary="slow drift certified against a fast angular forcing",
        parameters={"mu": 0.05, "k": 0.8, "delta": 0.3, "omega": 1.0},
        build=_build_rapid_osc,
        facts={
            "E": (0.2581988897471611, 1e-9),
            "L": (1.0327955589886444, 1e-9),
            "osc_margins": {
                1: (0.9674690073815411, 1e-9),
                2: (0.8441753282214948, 1e-9),
                3: (0.6530353685509507, 1e-9),
            },
            "osc_order_max": 6,
            # envelope margin over the default sampling grid; the worst
            # sample sits near sigma = 3.49 on the low-drift side
            "hyp2_margin": (0.7591830183911266, 1e-9),
        },
    ),
    audit=_audit_rapid_osc)


# ---------------------------------------------------------------------------
# persistence_toy: slow normal form with documented perturbation bounds
# ---------------------------------------------------------------------------

_NF_SCALE = 0.05
_NF_SIGMA = 1.0
_NF_EXPONENTS = {"mu": 0.5, "nu": 0.75, "gamma_exp": 1.0}
_NF_ORDER = 2
_NF_DELTA_CAP = 0.5
# documented perturbation bounds on |p|, |q| < delta <= _NF_DELTA_CAP;
# padded ~10% over the sampled suprema so they are comfortably valid
_NF_CONSTANTS = {
    "C1": 1.1 * _NF_SCALE,
    "C2": 2.2 * _NF_SCALE,
    "C3": 1.65 * _NF_SCALE,
    "C4": 1.1 * _NF_SCALE,
}


def _nf_P1(p, q, zeta):
    return _NF_SCALE * p * q * np.cos(zeta)


def _nf_Q1(p, q, zeta):
    return _NF_SCALE * p * p * np.sin(zeta)


def _nf_Z1(p, q, zeta):
    return 0.5 * _NF_SCALE * (p * p + q * q)


def _nf_P2(p, q, zeta, theta):
    return _NF_SCALE * np.cos(zeta + theta)


def _nf_Q2(p, q, zeta, theta):
    return _NF_SCALE * np.sin(zeta - theta)


def _nf_Z2(p, q, zeta, theta):
    return _NF_SCALE * np.cos(theta)


def _nf_Th1(p, q, zeta):
    return _NF_SCALE * (np.sin(zeta) + 0.5 * (p + q))


def _nf_Th2(p, q, zeta, theta):
    return _NF_SCALE * np.sin(theta + zeta)


def _persistence_constants(r=_NF_ORDER):
    return PersistenceConstants(
        sigma=_NF_SIGMA, r=r, **_NF_CONSTANTS, **_NF_EXPONENTS)


def _resolve_k(eps):
    # k = 0 asks for the balanced scaling from the threshold machinery
    return k_epsilon(eps, _persistence_constants())


def _persistence_profile(eps, k, delta0):
    """Closed-form envelopes for the normal form on the working box.

    Derived from the documented perturbation bounds alone, so they are
    valid for both orientations.  The working coordinates halve one slow
    variable and divide the angle by k, which is where the factors of 2
    and k come from.  Entry bounds for the z-block Jacobian feed a
    symmetric 3 x 3 eigenvalue bound (valid because x^T M x only grows
    when entries are replaced by their absolute bounds); the off-diagonal
    blocks take direct row norms.
    """
    sig = _NF_SIGMA
    c1, c2 = _NF_CONSTANTS["C1"], _NF_CONSTANTS["C2"]
    c4 = _NF_CONSTANTS["C4"]
    mu = _NF_EXPONENTS["mu"]
    nu = _NF_EXPONENTS["nu"]
    ga = _NF_EXPONENTS["gamma_exp"]
    small = c2 * delta0 + eps ** mu * c4  # slow-variable derivative budget
    alpha = eps * (sig - small)
    dzf = eps * math.hypot(2.0 * small,
                           math.hypot(c1 * delta0 ** 2 + eps ** mu * c4,
                                      eps ** mu * c4 * k))
    theta_row = (eps ** nu + eps ** (1.0 + ga)) * c4 / k
    dag = math.sqrt((0.5 * eps * small) ** 2 + (eps * small) ** 2
                    + theta_row ** 2)
    sym = np.array([
        [-alpha,
         0.5 * eps * (0.5 * (c1 * delta0 ** 2 + eps ** mu * c4) + 2.0 * small),
         0.5 * (0.5 * eps ** (1.0 + mu) * c4 * k + 2.0 * theta_row)],
        [0.0,
         eps * (c1 * delta0 ** 2 + eps ** mu * c4),
         0.5 * (eps ** (1.0 + mu) * c4 * k + theta_row)],
        [0.0, 0.0, eps ** (1.0 + ga) * c4]])
    sym = np.triu(sym) + np.triu(sym, 1).T
    ell = float(np.linalg.eigvalsh(sym)[-1])
    return RateProfile(alpha=_const(alpha), ell=_const(ell),
                       dzf_norm=_const(dzf), dag_norm=_const(dag))


def _build_persistence(eps, k, delta0, reversed_roles):
    if not 0.0 < eps <= 1.0:
        raise ConfigError(f"persistence_toy needs 0 < eps <= 1, got {eps:g}")
    if k < 0.0:
        raise ConfigError(f"persistence_toy needs k >= 0, got {k:g}")
    if not 0.0 < delta0 <= _NF_DELTA_CAP:
        raise ConfigError(
            f"persistence_toy needs 0 < delta0 <= {_NF_DELTA_CAP:g}, "
            f"got {delta0:g}")
    if k == 0.0:
        k = _resolve_k(eps)
    s = _NF_SIGMA
    mu = _NF_EXPONENTS["mu"]
    nu = _NF_EXPONENTS["nu"]
    ga = _NF_EXPONENTS["gamma_exp"]
    e1m = eps ** (1.0 + mu)

    # forward orientation: a = p, z = (half of q, zeta, theta / k);
    # reversed orientation: time-reversed field with a = q, z = (half of
    # p, zeta, theta / k), so the contracting direction becomes the
    # expanding one
    def unpack(a, z):
        lead = a[..., 0]
        other = 2.0 * z[..., 0]
        zeta = z[..., 1]
        theta = k * z[..., 2]
        if reversed_roles:
            return other, lead, zeta, theta  # (p, q, ...)
        return lead, other, zeta, theta

    def f(a, z):
        p, q, zeta, theta = unpack(a, z)
        if reversed_roles:
            val = (eps * (s * q - _nf_Q1(p, q, zeta))
                   - e1m * _nf_Q2(p, q, zeta, theta))
        else:
            val = (eps * (s * p + _nf_P1(p, q, zeta))
                   + e1m * _nf_P2(p, q, zeta, theta))
        return val[..., None]

    def g(a, z):
        p, q, zeta, theta = unpack(a, z)
        if reversed_roles:
            g1 = -(eps * (s * 0.5 * p + 0.5 * _nf_P1(p, q, zeta))
                   + 0.5 * e1m * _nf_P2(p, q, zeta, theta))
            flip = -1.0
        else:
            g1 = (eps * (-s * 0.5 * q + 0.5 * _nf_Q1(p, q, zeta))
                  + 0.5 * e1m * _nf_Q2(p, q, zeta, theta))
            flip = 1.0
        g2 = flip * (eps * (1.0 + _nf_Z1(p, q, zeta))
                     + e1m * _nf_Z2(p, q, zeta, theta))
        g3 = flip * (1.0 + eps ** nu * _nf_Th1(p, q, zeta)
                     + eps ** (1.0 + ga) * _nf_Th2(p, q, zeta, theta)) / k
        return np.stack([g1, g2, g3], axis=-1)

    name = "persistence_toy_reversed" if reversed_roles else "persistence_toy"
    field = SplitVectorField(1, 3, f, g, name=name)
    domain = BoxDomain(
        [(-delta0, delta0)],
        [ZBound.interval(-0.5 * delta0, 0.5 * delta0),
         ZBound.periodic(2.0 * math.pi),
         ZBound.periodic(2.0 * math.pi / k)])
    rates = _persistence_profile(eps, k, delta0)
    return field, domain, rates


def _sample_ball(count, delta, seed=0):
    rng = np.random.default_rng(seed)
    p = rng.uniform(-delta, delta, count)
    q = rng.uniform(-delta, delta, count)
    zeta = rng.uniform(0.0, 2.0 * math.pi, count)
    theta = rng.uniform(0.0, 2.0 * math.pi, count)
    return p, q, zeta, theta


def _fd(fn, args, i, step=1e-6):
    hi = list(args)
    lo = list(args)
    hi[i] = hi[i] + step
    lo[i] = lo[i] - step
    return (fn(*hi) - fn(*lo)) / (2.0 * step)


def _audit_normal_form_bounds(delta=_NF_DELTA_CAP, count=4096):
    """Sampled suprema of the perturbations against the documented bounds.

    Returns the smallest relative slack over the four bound families.
    """
    p, q, zeta, theta = _sample_ball(count, delta)
    small = (_nf_P1, _nf_Q1, _nf_Z1)
    bounded = (_nf_P2, _nf_Q2, _nf_Z2, _nf_Th2)
    c1 = max(float(np.max(np.abs(fn(p, q, zeta)))) for fn in small)
    c1 = max(c1, *(float(np.max(np.abs(_fd(fn, (p, q, zeta), 2))))
                   for fn in small))
    c2 = max(float(np.max(np.abs(_fd(fn, (p, q, zeta), i))))
             for fn in small for i in (0, 1))
    c3 = max(float(np.max(np.abs(fn(p, q, zeta, theta)))) for fn in bounded)
    c3 = max(c3, float(np.max(np.abs(_nf_Th1(p, q, zeta)))))
    c4 = max(float(np.max(np.abs(_fd(fn, (p, q, zeta, theta), i))))
             for fn in bounded for i in range(4))
    c4 = max(c4, *(float(np.max(np.abs(_fd(_nf_Th1, (p, q, zeta), i))))
                   for i in range(3)))
    slacks = {
        "C1": (_NF_CONSTANTS["C1"] * delta ** 2 - c1)
        / (_NF_CONSTANTS["C1"] * delta ** 2),
        "C2": (_NF_CONSTANTS["C2"] * delta - c2) / (_NF_CONSTANTS["C2"] * delta),
        "C3": (_NF_CONSTANTS["C3"] - c3) / _NF_CONSTANTS["C3"],
        "C4": (_NF_CONSTANTS["C4"] - c4) / _NF_CONSTANTS["C4"],
    }
    return slacks


def _audit_persistence(spec, field, domain, rates):
    reports = []
    slacks = _audit_normal_form_bounds()
    worst_key = min(slacks, key=slacks.get)
    reports.append(_fact(
        "fact_normal_form_bounds", slacks[worst_key], samples=4096,
        notes=tuple(f"{key}={val:.4g}" for key, val in sorted(slacks.items()))))
    consts = _persistence_constants()
    eps_star, delta_star = persistence_thresholds(consts, _NF_DELTA_CAP)
    lo, hi = spec.facts["eps_star_range"]
    reports.append(_fact(
        "fact_thresholds", min(eps_star - lo, hi - eps_star),
        notes=(f"eps_star={eps_star:.6g}", f"delta_star={delta_star:.6g}")))
    eps = spec.facts["eps"]
    reports.append(_within("fact_balanced_k", _resolve_k(eps),
                           spec.facts["k_balanced"]))
    check = check_hyp2(field, domain, rates=rates)
    reports.append(_within("fact_hyp2_margin", check.margin,
                           spec.facts["hyp2_margin"]))
    worst, count, fuzz = _rates_dominated(field, domain, rates,
                                          grid_density=7)
    reports.append(_fact("fact_rate_bounds", worst + fuzz, samples=count,
                         notes=(f"worst_slack={worst:.3g}",)))
    return reports


_PERSISTENCE_FACTS = {
    "constants": dict(sigma=_NF_SIGMA, r=_NF_ORDER,
                      **_NF_CONSTANTS, **_NF_EXPONENTS),
    "delta_cap": _NF_DELTA_CAP,
    "eps_star_range": (0.1, 0.2),
    "eps": 0.1,
    "k_balanced": (3.6557068113185363, 1e-9),
    "hyp2_margin": (0.06997249134857071, 1e-9),
}

register_system(
    SystemSpec(
        name="persistence_toy",
        summary="slow expanding/contracting normal form with documented bounds",
        parameters={"eps": 0.1, "k": 0.0, "delta0": 0.3},
        build=lambda eps, k, delta0: _build_persistence(eps, k, delta0, False),
        facts=dict(_PERSISTENCE_FACTS, partner="persistence_toy_reversed"),
    ),
    audit=_audit_persistence)

register_system(
    SystemSpec(
        name="persistence_toy_reversed",
        summary="time reversal of persistence_toy with p and q swapped",
        parameters={"eps": 0.1, "k": 0.0, "delta0": 0.3},
        build=lambda eps, k, delta0: _build_persistence(eps, k, delta0, True),
        facts=dict(_PERSISTENCE_FACTS, partner="persistence_toy"),
    ),
    audit=_audit_persistence)
