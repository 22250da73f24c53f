"""End-to-end acceptance gate.

Nine criteria, one test and one printed PASS/FAIL line each:

1. feasible-interval table for orders 1..7 against the published
   endpoints (+- 0.005), order 8 empty, under five minutes;
2. strict nestedness of those seven intervals;
3. weakly damped counterexample: two equilibria with closed-form
   eigenvalues to 1e-10 and the node/spiral flip at alpha = eps/2;
4. manifold command on the decoupled system: node height and slope
   errors below 1e-5, Lipschitz margin >= 0.49;
5. torus graph at (beta, omega) = (1, 0.5): residual, Lipschitz,
   periodicity, and shoot/transform agreement;
6. cone lemmas on 100 random pairs per certified system, zero failures;
7. cocycle residual under 100*tol and the vec/Kronecker identity on
   1000 random triples;
8. balanced-k optimality, exponent admissibility, positive thresholds,
   and the two-graph intersection contracting at ratio <= 1/2;
9. rapid-oscillation constants against a brute-force oracle and the
   constant-coefficient degenerate case.
"""

import math
import time

import numpy as np
import pytest

from conekit import (PersistenceConstants, RapidOscSpec, beta_projection,
                     build_system, check_hyp2, cocycle_probe,
                     compute_graph_shoot, compute_graph_transform,
                     cone_invariance_probe, counterexample_fixed_points,
                     get_spec, intersect_graphs, invariance_residual,
                     k_epsilon, lipschitz_audit, periodicity_audit,
                     persistence_thresholds, rapid_osc_condition,
                     separation_probe)
from conekit.cli import _sample_cone_pairs
from conekit.errors import ConfigError
from conekit.linalg import kron, vec
from conekit.tables import read_graph
from conekit import cli

# published endpoints of the order-r feasibility intervals (Table 1)
TABLE1 = {
    1: (0.395, 7.248),
    2: (0.404, 3.887),
    3: (0.420, 2.542),
    4: (0.441, 1.849),
    5: (0.472, 1.412),
    6: (0.518, 1.093),
    7: (0.634, 0.781),
}

CERTIFIED = ("decoupled_toy", "torus_family", "rapid_osc",
             "persistence_toy", "persistence_toy_reversed")


def _verdict(criterion, ok, detail):
    print(f"acceptance criterion {criterion}: "
          f"{'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {criterion}: {detail}"


@pytest.fixture(scope="module")
def projection():
    t0 = time.time()
    intervals = {r: beta_projection(r, resolution=1e-3) for r in range(1, 9)}
    return intervals, time.time() - t0


def test_criterion_1_interval_table(projection):
    intervals, elapsed = projection
    worst = 0.0
    for r, (lo, hi) in TABLE1.items():
        iv = intervals[r]
        assert not iv.empty, f"order {r} came back empty"
        worst = max(worst, abs(iv.lo - lo), abs(iv.hi - hi))
    ok = worst <= 0.005 and intervals[8].empty and elapsed < 300.0
    _verdict(1, ok, f"worst endpoint error {worst:.2g}, "
             f"order 8 empty={intervals[8].empty}, {elapsed:.1f}s")


def test_criterion_2_strict_nestedness(projection):
    intervals, _ = projection
    ok = True
    for r in range(1, 7):
        outer, inner = intervals[r], intervals[r + 1]
        ok = ok and outer.lo < inner.lo and inner.hi < outer.hi
    _verdict(2, ok, "interval r+1 strictly inside interval r for r=1..6")


def test_criterion_3_counterexample_eigenvalues():
    eps = alpha = 0.1
    infos = {round(fp.point[1], 6): fp
             for fp in counterexample_fixed_points(eps, alpha)}
    ok = len(infos) == 2
    detail = [f"{len(infos)} equilibria"]

    worst = 0.0
    for theta, sign in ((0.0, -1.0), (round(math.pi, 6), +1.0)):
        fp = infos[theta]
        # closed-form roots of lambda^2 + eps lambda + sign alpha^2
        disc = eps * eps - 4.0 * sign * alpha * alpha
        if disc >= 0.0:
            roots = [(-eps + math.sqrt(disc)) / 2.0,
                     (-eps - math.sqrt(disc)) / 2.0]
        else:
            im = math.sqrt(-disc) / 2.0
            roots = [complex(-eps / 2.0, -im), complex(-eps / 2.0, im)]
        roots = sorted(map(complex, roots), key=lambda v: (-v.real, v.imag))
        got = sorted(fp.eigenvalues, key=lambda v: (-v.real, v.imag))
        worst = max(worst, *(abs(a - b) for a, b in zip(got, roots)))
    ok = ok and worst < 1e-10
    detail.append(f"eigenvalue error {worst:.2g}")

    ok = ok and infos[0.0].classification == "saddle"
    ok = ok and infos[round(math.pi, 6)].classification == "stable_spiral"
    flipped = {round(fp.point[1], 6): fp.classification
               for fp in counterexample_fixed_points(eps, 0.03)}
    ok = ok and flipped[round(math.pi, 6)] == "stable_node"
    detail.append(f"flip at alpha<eps/2 -> {flipped[round(math.pi, 6)]}")
    _verdict(3, ok, "; ".join(detail))


def test_criterion_4_manifold_oracle(tmp_path, capsys):
    out = tmp_path / "g.tsv"
    code = cli.main(["manifold", "--system", "decoupled_toy",
                     "--t-back", "8", "--output", str(out)])
    stdout = capsys.readouterr().out
    summary = dict(item.split("=", 1) for line in stdout.splitlines()
                   if line.startswith("summary ")
                   for item in line.split()[1:])
    graph = read_graph(out)
    Z = graph.nodes_z()[:, 0]
    h_err = float(np.max(np.abs(graph.nodes_h()[:, 0] - 0.5 * np.sin(Z))))
    dh_err = float(np.max(np.abs(graph.nodes_dh()[:, 0, 0]
                                 - 0.5 * np.cos(Z))))
    lip_margin = float(summary["margin"])
    ok = (code == 0 and h_err < 1e-5 and dh_err < 1e-5
          and lip_margin >= 0.49)
    _verdict(4, ok, f"h error {h_err:.2g}, Dh error {dh_err:.2g}, "
             f"Lipschitz margin {lip_margin:.4f}")


def test_criterion_5_torus_graph():
    field, domain, rates = build_system("torus_family", beta=1.0, omega=0.5)
    r2 = check_hyp2(field, domain, rates=rates)
    assert r2.passed, "shipped auxiliary parameters must certify hyp2"
    shoot = compute_graph_shoot(field, domain, grid_density=17, tol=1e-8,
                                ode_tol=1e-9)
    transform = compute_graph_transform(field, domain, grid_density=17,
                                        tol=1e-8, ode_tol=1e-9)
    agree = float(np.max(np.abs(shoot.nodes_h() - transform.nodes_h())))
    residual = invariance_residual(field, shoot, t_probe=1.0, ode_tol=1e-9)
    lip = lipschitz_audit(shoot, seed=0)
    wrap = periodicity_audit(shoot)
    ok = (residual < 1e-3 and lip.passed and wrap < 1e-4 and agree < 1e-4)
    _verdict(5, ok, f"residual {residual:.2g}, Lipschitz pass={lip.passed}, "
             f"periodicity {wrap:.2g}, method agreement {agree:.2g}")


def test_criterion_6_cone_lemma_suite():
    failures = []
    for name in CERTIFIED:
        field, domain, rates = build_system(name)
        r2 = check_hyp2(field, domain, rates=rates)
        assert r2.passed, f"{name} should be certified"
        t_end = min(1.0, 2.0 / r2.margin)
        rng = np.random.default_rng(20260815)
        for k, (x1, x2) in enumerate(_sample_cone_pairs(domain, 100, rng)):
            trace = cone_invariance_probe(field, x1, x2, t_end,
                                          ode_tol=1e-9, domain=domain)
            if float(np.min(trace.gauges)) < 0.0:
                failures.append(f"{name}[{k}]: gauge left the cone")
            sep = separation_probe(field, x1, x2, r2.margin / 2.0, t_end,
                                   ode_tol=1e-9, domain=domain)
            if not sep.passed:
                failures.append(f"{name}[{k}]: separation margin "
                                f"{sep.margin:.3g}")
    ok = not failures
    _verdict(6, ok, f"500 pairs across {len(CERTIFIED)} systems, "
             f"{len(failures)} failures"
             + (f"; first: {failures[0]}" if failures else ""))


def test_criterion_7_cocycle_and_vectorization():
    tol = 1e-9
    rng = np.random.default_rng(5)
    worst_split = 0.0
    for name in ("decoupled_toy", "persistence_toy"):
        field, domain, rates = build_system(name)
        for _ in range(6):
            z = np.array([rng.uniform(0.0, b.period)
                          if b.kind == "periodic"
                          else rng.uniform(b.lo, b.hi)
                          for b in domain.z_bounds])
            a = 0.1 * (domain.a_lo + domain.a_hi)
            tau, t = rng.uniform(0.2, 1.0, 2)
            from conekit import Point
            worst_split = max(worst_split, cocycle_probe(
                field, Point(np.atleast_1d(a), z), tau, t, tol))
    cocycle_ok = worst_split < 100.0 * tol

    worst_vec = 0.0
    for _ in range(1000):
        p, q, r_ = rng.integers(1, 6, size=3)
        A = rng.normal(size=(p, q))
        P = rng.normal(size=(q, r_))
        B = rng.normal(size=(r_, p))
        lhs = vec(A @ P @ B)
        rhs = kron(B.T, A) @ vec(P)
        worst_vec = max(worst_vec, float(np.max(np.abs(lhs - rhs))))
    vec_ok = worst_vec < 1e-13
    _verdict(7, cocycle_ok and vec_ok,
             f"worst cocycle defect {worst_split:.2g} (gate {100 * tol:g}), "
             f"worst vec identity error {worst_vec:.2g}")


def test_criterion_8_weak_hyperbolicity_thresholds():
    spec = get_spec("persistence_toy")
    consts = PersistenceConstants(**spec.facts["constants"])

    # balanced k against a 1000-point log-grid minimizer of A k + B / k
    eps = spec.facts["eps"]
    a_w = eps ** consts.mu * consts.K5
    b_w = (eps ** (consts.nu - 1.0) * consts.K6
           + eps ** consts.gamma_exp * consts.K7)
    grid = np.geomspace(1e-3, 1e4, 1000)
    objective = a_w * grid + b_w / grid
    k_best = k_epsilon(eps, consts)
    obj_best = a_w * k_best + b_w / k_best
    rel = abs(float(np.min(objective)) - obj_best) / obj_best
    k_ok = rel <= 1e-3

    with pytest.raises(ConfigError):
        PersistenceConstants(**{**spec.facts["constants"],
                                "mu": 0.4, "nu": 0.5})
    eps_star, delta_star = persistence_thresholds(
        consts, spec.facts["delta_cap"])
    thresh_ok = eps_star > 0.0 and delta_star > 0.0

    # the two twin graphs intersect along a contracting fixed section
    k = spec.facts["k_balanced"][0]
    fwd = build_system("persistence_toy")
    rev = build_system("persistence_toy_reversed")
    g_fwd = compute_graph_shoot(fwd[0], fwd[1], grid_density=7, tol=1e-10,
                                ode_tol=1e-11)
    g_rev = compute_graph_shoot(rev[0], rev[1], grid_density=7, tol=1e-10,
                                ode_tol=1e-11)

    def section(graph):
        def fn(u, zeta, theta):
            u = np.asarray(u, dtype=float)
            pts = np.stack([0.5 * np.ravel(u),
                            np.ravel(np.broadcast_to(zeta, u.shape)),
                            np.ravel(np.broadcast_to(theta, u.shape)) / k],
                           axis=-1)
            return graph.h_at(pts)[:, 0].reshape(u.shape)
        return fn

    res = intersect_graphs(section(g_fwd), section(g_rev),
                           np.linspace(0.0, 2.0 * math.pi, 9),
                           np.linspace(0.0, 2.0 * math.pi, 9),
                           tol=1e-12, lip_box=(-0.28, 0.28))
    intersect_ok = res.ratio_max <= 0.5

    ok = k_ok and thresh_ok and intersect_ok
    _verdict(8, ok, f"k objective gap {rel:.2g}, eps*={eps_star:.4f}, "
             f"intersection defect ratio {res.ratio_max:.3f} over "
             f"{res.iterations} sweeps")


def test_criterion_9_rapid_oscillation_oracle():
    spec = RapidOscSpec(lambda s: 4.0 + math.cos(s), math.sin)
    sig = np.linspace(0.0, 2.0 * np.pi, 10_000, endpoint=False)
    drift = 4.0 + np.cos(sig)
    forcing = np.sin(sig)
    e_brute = float(np.max(np.abs(-forcing / drift)))
    l_brute = float(np.max(np.abs(-np.sin(sig)) * e_brute
                           + np.abs(np.cos(sig))))
    worst = max(abs(spec.E - e_brute), abs(spec.L - l_brute))
    margins_ok = True
    for r in (1, 2, 3):
        margin_brute = (float(np.min(drift))
                        - (r + 1) / math.sqrt(r) * math.sqrt(l_brute))
        got = rapid_osc_condition(spec, r).margin
        worst = max(worst, abs(got - margin_brute))
        margins_ok = margins_ok and abs(got - margin_brute) < 1e-4
    osc_ok = worst < 1e-4 and margins_ok

    flat = RapidOscSpec(lambda s: 2.0, lambda s: 0.7)
    orders = [rapid_osc_condition(flat, r).passed for r in range(1, 11)]
    flat_ok = flat.L == 0.0 and all(orders)
    _verdict(9, osc_ok and flat_ok,
             f"worst oracle deviation {worst:.2g}, constant case L={flat.L} "
             f"certified through r={len(orders)}")
