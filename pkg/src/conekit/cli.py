"""Batch command-line front end.

Subcommands run hypothesis checks, compute graphs and parameter
regions, and emit tab-delimited tables (or key=value records) plus one
machine-readable summary line on stdout.  Configuration comes from
flags, from a JSON file via --config (flags win), or both.  With
--plot-dir a matplotlib figure is rendered next to the table output.

Exit codes: 0 success, 2 configuration error, 3 hypothesis or property
failure, 4 numeric failure.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field as data_field
from pathlib import Path

import numpy as np

from . import plots, tables
from .core import Point, hyp1_bound
from .errors import ConfigError, HypothesisError, NumericError
from .hypotheses import (
    CheckReport,
    check_hyp2,
    check_hyp2star,
    check_hyp5,
    max_certified_order,
)
from .integrate import cocycle_probe, integrate_batch, variational
from .manifold import (
    compute_graph_shoot,
    compute_graph_transform,
    cone_invariance_probe,
    derivative_field,
    lipschitz_audit,
    periodicity_audit,
    separation_probe,
)
from .regions import (
    PersistenceConstants,
    best_torus_slack,
    beta_projection,
    counterexample_fixed_points,
    k_epsilon,
    kappa,
    persistence_thresholds,
)
from .systems import build_system, get_spec, system_names
from .systems import audit_system as _audit_system
from .util import WORKERS_ENV, parallel_map

__all__ = ["RunConfig", "main", "run"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_NUMERIC = 4

COMMANDS = ("check", "region", "manifold", "audit", "counterexample",
            "persist", "plotdata")

# built-in defaults; a config file overrides these, flags override both
_OPTION_DEFAULTS = {
    "check": {"order": 0, "c1": 0.0, "eta": 0.5, "tube_radius": 0.05,
              "fd_rates": False, "no_graph": False, "t_back": 0.0},
    "region": {"orders": "1-8", "resolution": 1e-3},
    "manifold": {"method": "shoot", "t_probe": 0.0, "t_back": 0.0},
    "audit": {"pairs": 32, "t_end": 0.0, "splits": 8, "fd_tol": 1e-3},
    "counterexample": {},
    "persist": {"delta_cap": 0.0, "eps_count": 33, "eps_floor": 1e-3},
    "plotdata": {"beta_count": 25, "beta_max": 7.5, "omega_count": 5,
                 "omega_max": 1.0, "order_cap": 10},
}


@dataclass
class RunConfig:
    """One resolved invocation: what to run, on what, where to put it."""

    command: str
    system: str = ""
    parameters: dict = data_field(default_factory=dict)
    grid_density: int = 0          # 0 -> per-module default
    tol: float = 1e-8
    ode_tol: float = 1e-9
    output: str = ""               # "" -> stdout
    fmt: str = "table"             # "table" | "records"
    plot_dir: str = ""
    workers: int = 0               # 0 -> environment setting
    seed: int = 0
    options: dict = data_field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; "
                              f"choose one of {', '.join(COMMANDS)}")
        if self.fmt not in ("table", "records"):
            raise ConfigError("format must be 'table' or 'records'")
        if not (self.tol > 0.0 and self.ode_tol > 0.0):
            raise ConfigError("tolerances must be positive")
        if self.grid_density < 0:
            raise ConfigError("grid density must be nonnegative")
        if self.workers < 0:
            raise ConfigError("worker count must be nonnegative")
        if self.system and self.system not in system_names():
            raise ConfigError(
                f"unknown system {self.system!r}; registered: "
                + ", ".join(system_names()))
        base = dict(_OPTION_DEFAULTS[self.command])
        unknown = set(self.options) - set(base)
        if unknown:
            raise ConfigError(
                f"command {self.command!r} takes no option(s) "
                + ", ".join(sorted(unknown)))
        base.update(self.options)
        self.options = base

    def opt(self, key):
        return self.options[key]


# -- config assembly -----------------------------------------------------------

def _parse_params(items):
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"parameter {item!r} is not key=value")
        try:
            out[key] = float(val)
        except ValueError:
            raise ConfigError(f"parameter {key!r} needs a numeric value, "
                              f"got {val!r}")
    return out


def _parse_orders(text):
    """'1-8' or '1,3,5' (mixable) -> tuple of ints."""
    orders = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            orders.extend(range(int(lo), int(hi) + 1))
        elif part:
            orders.append(int(part))
    if not orders or any(r < 1 for r in orders):
        raise ConfigError(f"bad order list {text!r}")
    return tuple(orders)


def _load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


_COMMON_KEYS = {
    "system": "", "grid_density": 0, "tol": 1e-8, "ode_tol": 1e-9,
    "output": "", "format": "table", "plot_dir": "", "workers": 0,
    "seed": 0,
}


def _config_from_args(args):
    file_cfg = _load_config(args.config) if getattr(args, "config", None) else {}
    command = getattr(args, "command", None) or file_cfg.get("command")
    if not command:
        raise ConfigError("no command given (on the command line or in "
                          "the config file)")
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    known = (set(_COMMON_KEYS) | {"command", "parameters"}
             | set(_OPTION_DEFAULTS[command]))
    stray = set(file_cfg) - known
    if stray:
        raise ConfigError(
            f"config file has unknown key(s) for {command!r}: "
            + ", ".join(sorted(stray)))

    def pick(key, default, cast=None):
        val = getattr(args, key, None)
        if val is None:
            val = file_cfg.get(key, default)
        return cast(val) if cast is not None and val is not None else val

    parameters = dict(file_cfg.get("parameters") or {})
    for key, val in parameters.items():
        if not isinstance(val, (int, float)):
            raise ConfigError(f"parameter {key!r} must be numeric")
        parameters[key] = float(val)
    parameters.update(_parse_params(getattr(args, "param", None)))

    options = {}
    for key, default in _OPTION_DEFAULTS[command].items():
        val = getattr(args, key, None)
        if val is None:
            val = file_cfg.get(key, default)
        options[key] = type(default)(val)

    return RunConfig(
        command=command,
        system=pick("system", "", str),
        parameters=parameters,
        grid_density=pick("grid_density", 0, int),
        tol=pick("tol", 1e-8, float),
        ode_tol=pick("ode_tol", 1e-9, float),
        output=pick("output", "", str),
        fmt=pick("format", "table", str),
        plot_dir=pick("plot_dir", "", str),
        workers=pick("workers", 0, int),
        seed=pick("seed", 0, int),
        options=options,
    )


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--system", help="registered system name")
    common.add_argument("--param", action="append", metavar="KEY=VALUE",
                        help="system parameter override (repeatable)")
    common.add_argument("--config", help="JSON config file; flags override")
    common.add_argument("--grid-density", type=int, dest="grid_density")
    common.add_argument("--tol", type=float)
    common.add_argument("--ode-tol", type=float, dest="ode_tol")
    common.add_argument("--output", help="table file (default: stdout)")
    common.add_argument("--format", choices=("table", "records"))
    common.add_argument("--plot-dir", dest="plot_dir",
                        help="also render a figure into this directory")
    common.add_argument("--workers", type=int,
                        help=f"worker threads (or set {WORKERS_ENV})")
    common.add_argument("--seed", type=int)

    parser = argparse.ArgumentParser(
        prog="conekit",
        description="cone-condition checks and invariant graph computation")
    parser.add_argument("--config", help="JSON config file naming a command")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("check", parents=[common],
                       help="hypothesis audits on one system")
    p.add_argument("--order", type=int, help="check this order (0: scan)")
    p.add_argument("--c1", type=float, help="required first-order gap")
    p.add_argument("--eta", type=float, help="slope bound for the graph check")
    p.add_argument("--tube-radius", type=float, dest="tube_radius")
    p.add_argument("--fd-rates", action="store_const", const=True,
                   dest="fd_rates", help="sample rates by finite differences "
                   "instead of the registered closed forms")
    p.add_argument("--no-graph", action="store_const", const=True,
                   dest="no_graph", help="skip the graph-relative check")
    p.add_argument("--t-back", type=float, dest="t_back")

    p = sub.add_parser("region", parents=[common],
                       help="feasible beta intervals per order")
    p.add_argument("--orders", help="orders, e.g. 1-8 or 1,2,5")
    p.add_argument("--resolution", type=float)

    p = sub.add_parser("manifold", parents=[common],
                       help="compute and audit an invariant graph")
    p.add_argument("--method", choices=("shoot", "transform"))
    p.add_argument("--t-probe", type=float, dest="t_probe")
    p.add_argument("--t-back", type=float, dest="t_back")

    p = sub.add_parser("audit", parents=[common],
                       help="property suite on one system")
    p.add_argument("--pairs", type=int, help="random cone pairs to track")
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--splits", type=int, help="random cocycle splits")
    p.add_argument("--fd-tol", type=float, dest="fd_tol")

    sub.add_parser("counterexample", parents=[common],
                   help="fixed points of the weakly damped system")

    p = sub.add_parser("persist", parents=[common],
                       help="weak-hyperbolicity thresholds and k curve")
    p.add_argument("--delta-cap", type=float, dest="delta_cap")
    p.add_argument("--eps-count", type=int, dest="eps_count")
    p.add_argument("--eps-floor", type=float, dest="eps_floor")

    p = sub.add_parser("plotdata", parents=[common],
                       help="certified-order sweep over the torus parameters")
    p.add_argument("--beta-count", type=int, dest="beta_count")
    p.add_argument("--beta-max", type=float, dest="beta_max")
    p.add_argument("--omega-count", type=int, dest="omega_count")
    p.add_argument("--omega-max", type=float, dest="omega_max")
    p.add_argument("--order-cap", type=int, dest="order_cap")
    return parser


# -- shared helpers -------------------------------------------------------------

def _require_system(cfg):
    if not cfg.system:
        raise ConfigError(f"command {cfg.command!r} needs --system")
    return build_system(cfg.system, **cfg.parameters)


def _density(cfg):
    return cfg.grid_density or None


def _emit(cfg, columns, rows, units=None, comments=()):
    if cfg.fmt == "table":
        text = tables.format_table(columns, rows, units=units,
                                   comments=comments)
    else:
        text = tables.format_records(columns, rows, comments=comments)
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)


def _summary(command, status, **kv):
    parts = [f"summary command={command}", f"status={status}"]
    parts += [f"{k}={tables.format_value(v)}" for k, v in kv.items()]
    print(" ".join(parts))


def _plot_path(cfg, stem):
    if not cfg.plot_dir:
        return ""
    os.makedirs(cfg.plot_dir, exist_ok=True)
    return os.path.join(cfg.plot_dir, f"{stem}.png")


def _report_rows(reports):
    columns = ("check", "passed", "margin", "samples")
    rows = [(r.inequality_id, int(r.passed), r.margin, r.samples)
            for r in reports]
    return columns, rows


def _sample_cone_pairs(domain, count, rng):
    """Seeded pairs strictly inside the cone, anchored inside the box."""
    n, m = domain.n, domain.m
    a_mid = 0.5 * (domain.a_lo + domain.a_hi)
    a_half = 0.5 * (domain.a_hi - domain.a_lo)
    pairs = []
    for _ in range(count):
        a1 = a_mid + 0.5 * a_half * rng.uniform(-1.0, 1.0, n)
        z1 = np.empty(m)
        for j, b in enumerate(domain.z_bounds):
            if b.kind == "periodic":
                z1[j] = rng.uniform(0.0, b.period)
            elif b.kind == "interval":
                mid, half = 0.5 * (b.lo + b.hi), 0.5 * (b.hi - b.lo)
                z1[j] = mid + 0.5 * half * rng.uniform(-1.0, 1.0)
            else:
                z1[j] = rng.uniform(-1.0, 1.0)
        da = rng.normal(size=n)
        da *= 0.2 * float(np.min(a_half)) / np.linalg.norm(da)
        dz = rng.normal(size=m)
        dz *= 0.5 * np.linalg.norm(da) / np.linalg.norm(dz)
        pairs.append((Point(a1, z1), Point(a1 + da, z1 + dz)))
    return pairs


# -- commands -------------------------------------------------------------------

def cmd_check(cfg):
    """Hyp 1/2/2*/graph-relative audits; exit 3 when any fails."""
    field, domain, rates = _require_system(cfg)
    use_rates = None if cfg.opt("fd_rates") else rates
    gd = _density(cfg)
    reports = []

    d = hyp1_bound(domain)
    reports.append(CheckReport(
        inequality_id="hyp1", passed=d > 0.0, margin=float(d),
        worst_point=None, samples=1,
        notes=("finite cone-section diameter bound",)))

    r2 = check_hyp2(field, domain, grid_density=gd, c1=cfg.opt("c1"),
                    rates=use_rates)
    reports.append(r2)

    order = int(cfg.opt("order"))
    if order:
        r_star = order
        reports.append(check_hyp2star(field, domain, order, grid_density=gd,
                                      rates=use_rates))
    else:
        r_star = max_certified_order(field, domain, grid_density=gd,
                                     rates=use_rates)
        reports.append(CheckReport(
            inequality_id="max_order", passed=r_star > 0,
            margin=float(r_star) if r_star > 0 else -1.0, worst_point=None,
            samples=1, notes=(f"largest certified order r={r_star}",)))
        if r_star >= 1:
            reports.append(check_hyp2star(field, domain, r_star,
                                          grid_density=gd, rates=use_rates))

    if r2.passed and not cfg.opt("no_graph"):
        t_back = cfg.opt("t_back") or min(2.0 / r2.margin, 5.0)
        if field.n == 1:
            graph = compute_graph_shoot(field, domain, grid_density=gd,
                                        tol=cfg.tol, ode_tol=cfg.ode_tol)
        else:
            graph = compute_graph_transform(field, domain, grid_density=gd,
                                            tol=cfg.tol, ode_tol=cfg.ode_tol)
        graph = derivative_field(field, graph, t_back, ode_tol=cfg.ode_tol)
        reports.append(check_hyp5(field, graph, eta=cfg.opt("eta"),
                                  r=max(r_star, 1),
                                  tube_radius=cfg.opt("tube_radius")))

    for rep in reports:
        print(rep.to_record())
    if cfg.output:
        columns, rows = _report_rows(reports)
        _emit(cfg, columns, rows,
              comments=(f"check system={cfg.system}",))
    path = _plot_path(cfg, f"check_{cfg.system}")
    if path:
        plots.plot_reports(reports, path, title=f"checks: {cfg.system}")
    ok = all(r.passed for r in reports)
    _summary("check", "pass" if ok else "fail", system=cfg.system,
             margin=min(r.margin for r in reports))
    return EXIT_OK if ok else EXIT_HYPOTHESIS


def cmd_region(cfg):
    """Feasible beta interval per requested order."""
    orders = _parse_orders(cfg.opt("orders"))
    resolution = float(cfg.opt("resolution"))
    intervals = [beta_projection(r, resolution=resolution) for r in orders]
    rows = [(iv.r,
             float("nan") if iv.empty else iv.lo,
             float("nan") if iv.empty else iv.hi,
             0.0 if iv.empty else iv.hi - iv.lo,
             int(iv.empty), iv.resolution)
            for iv in intervals]
    _emit(cfg, ("r", "beta_lo", "beta_hi", "width", "empty", "resolution"),
          rows, comments=("feasible beta intervals per order",))
    path = _plot_path(cfg, "region")
    if path:
        plots.plot_intervals(intervals, path)
    widths = [row[3] for row in rows if not row[4]]
    _summary("region", "done", rows=len(rows),
             empty=sum(row[4] for row in rows),
             margin=min(widths) if widths else 0.0)
    return EXIT_OK


def cmd_manifold(cfg):
    """Compute the graph, write its node table, audit it."""
    field, domain, rates = _require_system(cfg)
    gd = _density(cfg)
    method = cfg.opt("method")
    t_probe = cfg.opt("t_probe") or None
    if method == "transform" or field.n > 1:
        graph = compute_graph_transform(field, domain, grid_density=gd,
                                        tol=cfg.tol, ode_tol=cfg.ode_tol,
                                        t_probe=t_probe)
    else:
        graph = compute_graph_shoot(field, domain, grid_density=gd,
                                    tol=cfg.tol, ode_tol=cfg.ode_tol,
                                    t_probe=t_probe)
    margin = float(graph.meta["margin_estimate"])
    t_back = cfg.opt("t_back") or min(2.0 / margin, 5.0)
    graph = derivative_field(field, graph, t_back, ode_tol=cfg.ode_tol)

    residual = graph.residual
    lip = lipschitz_audit(graph, seed=cfg.seed)
    try:
        wrap = periodicity_audit(graph)
        wrap_note = tables.format_value(wrap)
    except ConfigError:
        wrap = None
        wrap_note = "n/a"

    out = cfg.output or f"{cfg.system}_graph.tsv"
    params = " ".join(f"{k}={tables.format_value(v)}"
                      for k, v in sorted(cfg.parameters.items()))
    tables.write_graph(out, graph,
                       comments=(f"system {cfg.system}" +
                                 (f" {params}" if params else ""),))
    print(f"graph nodes={len(graph.nodes_z())} file={out}")
    print(f"residual t_probe={graph.meta.get('t_probe', 0.0):.6g} "
          f"worst={tables.format_value(residual)}")
    print(lip.to_record())
    print(f"periodicity deviation={wrap_note}")
    path = _plot_path(cfg, f"manifold_{cfg.system}")
    if path:
        plots.plot_graph(graph, path, title=f"{cfg.system}: height field")
    ok = lip.passed and (wrap is None or wrap < 1.0)
    _summary("manifold", "pass" if ok else "fail", system=cfg.system,
             residual=residual, margin=lip.margin, file=out)
    return EXIT_OK if ok else EXIT_HYPOTHESIS


def _riccati_vs_fd(field, graph, margin, ode_tol, fd_tol, rng, samples=6):
    """Matrix Riccati transport vs finite differences of the flow map.

    The Riccati solution is evaluated through its linear-fractional
    representation: the variational cocycle (integrated from the
    Jacobian blocks) acts projectively on the starting slope.  The
    second route assembles the same cocycle by Richardson finite
    differences of the nonlinear flow, using no Jacobians anywhere;
    both transport the identical slope along the identical trajectory.
    """
    Z = graph.nodes_z()
    dh = graph.nodes_dh()
    pick = rng.choice(len(Z), size=min(samples, len(Z)), replace=False)
    t = min(0.5 / margin, 1.0)
    n, m = field.n, field.m
    eye = np.eye(n + m)

    def act(Q, V0):
        num = Q[:n, :n] @ V0 + Q[:n, n:]
        den = Q[n:, :n] @ V0 + Q[n:, n:]
        return np.linalg.solve(den.T, num.T).T

    worst = 0.0
    for i in pick:
        z0 = Z[i]
        V0 = dh[i]
        a0 = graph.h_at(z0[None])[0]
        x0 = np.concatenate([a0, z0])
        Q_var = variational(field, Point(a0, z0), t, ode_tol).Q[-1]

        def flow_jac(s):
            states = x0[None, :] + np.concatenate([eye * s, -eye * s])
            res = integrate_batch(field, states[:, :n], states[:, n:], t,
                                  ode_tol)
            fin = np.concatenate([res.a, res.z], axis=-1)
            return (fin[:n + m] - fin[n + m:]).T / (2.0 * s)

        Q_fd = (4.0 * flow_jac(5e-4) - flow_jac(1e-3)) / 3.0
        worst = max(worst,
                    float(np.max(np.abs(act(Q_var, V0) - act(Q_fd, V0)))))
    return CheckReport(
        inequality_id="riccati_vs_fd", passed=fd_tol - worst > 0.0,
        margin=fd_tol - worst, worst_point=None, samples=len(pick),
        notes=(f"worst transport disagreement {worst:.6g}", f"t={t:.3g}"))


def cmd_audit(cfg):
    """Cone invariance, separation, cocycle, slope cross-check, facts."""
    field, domain, rates = _require_system(cfg)
    gd = _density(cfg)
    rng = np.random.default_rng(cfg.seed)
    reports = []

    r2 = check_hyp2(field, domain, grid_density=gd, rates=rates)
    reports.append(r2)

    if r2.passed:
        margin = r2.margin
        t_end = cfg.opt("t_end") or min(1.0, 2.0 / margin)
        pairs = _sample_cone_pairs(domain, int(cfg.opt("pairs")), rng)
        gauge_min, nonmono = math.inf, 0
        sep_margin, sep_samples = math.inf, 0
        for x1, x2 in pairs:
            trace = cone_invariance_probe(field, x1, x2, t_end,
                                          ode_tol=cfg.ode_tol, domain=domain)
            gauge_min = min(gauge_min, float(np.min(trace.gauges)))
            nonmono += int(not trace.monotone)
            rep = separation_probe(field, x1, x2, margin / 2.0, t_end,
                                   ode_tol=cfg.ode_tol, domain=domain)
            sep_margin = min(sep_margin, rep.margin)
            sep_samples += rep.samples
        reports.append(CheckReport(
            inequality_id="cone_invariance", passed=gauge_min > 0.0,
            margin=gauge_min, worst_point=None, samples=len(pairs),
            notes=(f"non-monotone traces {nonmono}",)))
        reports.append(CheckReport(
            inequality_id="separation", passed=sep_margin > 0.0,
            margin=sep_margin, worst_point=None, samples=sep_samples,
            notes=(f"gap constant {margin / 2.0:.6g}",)))
    else:
        reports.append(CheckReport(
            inequality_id="cone_invariance", passed=False, margin=r2.margin,
            worst_point=None, samples=0,
            notes=("skipped: no certified first-order margin",)))

    graph = None
    if r2.passed and field.n == 1:
        small = min(gd, 9) if gd else (17 if field.m <= 2 else 5)
        graph = compute_graph_shoot(field, domain, grid_density=small,
                                    tol=cfg.tol, ode_tol=cfg.ode_tol)
        graph = derivative_field(field, graph, min(2.0 / r2.margin, 5.0),
                                 ode_tol=cfg.ode_tol)

    worst_split = 0.0
    for _ in range(int(cfg.opt("splits"))):
        z = np.array([rng.uniform(0.0, b.period) if b.kind == "periodic"
                      else rng.uniform(-1.0, 1.0) if b.kind == "free"
                      else rng.uniform(b.lo, b.hi)
                      for b in domain.z_bounds])
        # anchor on the invariant graph where one is available so the
        # probe legs stay trapped; off-graph starts can escape the box
        if graph is not None:
            a0 = graph.h_at(z[None])[0]
        else:
            a0 = 0.5 * (domain.a_lo + domain.a_hi)
        x = Point(a0, z)
        tau, t = rng.uniform(0.2, 1.0, 2)
        worst_split = max(worst_split,
                          cocycle_probe(field, x, tau, t, cfg.ode_tol))
    cocycle_gate = 100.0 * cfg.ode_tol
    reports.append(CheckReport(
        inequality_id="cocycle", passed=cocycle_gate - worst_split > 0.0,
        margin=cocycle_gate - worst_split, worst_point=None,
        samples=int(cfg.opt("splits")),
        notes=(f"worst relative defect {worst_split:.6g}",)))

    if graph is not None:
        reports.append(_riccati_vs_fd(field, graph, r2.margin, cfg.ode_tol,
                                      float(cfg.opt("fd_tol")), rng))

    if not cfg.parameters:
        reports.extend(_audit_system(cfg.system))

    for rep in reports:
        print(rep.to_record())
    if cfg.output:
        columns, rows = _report_rows(reports)
        _emit(cfg, columns, rows, comments=(f"audit system={cfg.system}",))
    path = _plot_path(cfg, f"audit_{cfg.system}")
    if path:
        plots.plot_reports(reports, path, title=f"audit: {cfg.system}")
    ok = all(r.passed for r in reports)
    _summary("audit", "pass" if ok else "fail", system=cfg.system,
             margin=min(r.margin for r in reports))
    return EXIT_OK if ok else EXIT_HYPOTHESIS


def cmd_counterexample(cfg):
    """Fixed points and eigenvalues of the weakly damped system."""
    eps = cfg.parameters.get("eps", 0.1)
    alpha = cfg.parameters.get("alpha", 0.1)
    infos = counterexample_fixed_points(eps, alpha)
    rows = []
    for fp in infos:
        w, theta = fp.point
        e0, e1 = fp.eigenvalues
        rows.append((w, theta, fp.classification,
                     e0.real, e0.imag, e1.real, e1.imag))
    _emit(cfg, ("w", "theta", "class", "re0", "im0", "re1", "im1"), rows,
          comments=(f"equilibria at eps={tables.format_value(eps)} "
                    f"alpha={tables.format_value(alpha)}",))
    path = _plot_path(cfg, "counterexample")
    if path:
        field, domain, _ = build_system("weak_counterexample", eps=eps,
                                        alpha=alpha)
        plots.plot_fixed_points(field, domain, infos, path)
    gap = min(abs(e.real) for fp in infos for e in fp.eigenvalues)
    _summary("counterexample", "done", count=len(infos), margin=gap)
    return EXIT_OK


def cmd_persist(cfg):
    """Thresholds and the balanced-k curve for a normal-form system."""
    name = cfg.system or "persistence_toy"
    spec = get_spec(name)
    if "constants" not in spec.facts:
        raise ConfigError(f"system {name!r} ships no persistence constants")
    consts = PersistenceConstants(**spec.facts["constants"])
    delta_cap = cfg.opt("delta_cap") or float(spec.facts["delta_cap"])
    eps_star, delta_star = persistence_thresholds(consts, delta_cap)

    count = int(cfg.opt("eps_count"))
    floor = float(cfg.opt("eps_floor"))
    if not 0.0 < floor < 1.0:
        raise ConfigError("eps floor must lie in (0, 1)")
    eps_grid = np.geomspace(floor, 1.0, count)
    rows = []
    for eps in eps_grid:
        k = k_epsilon(eps, consts)
        delta = 2.0 * consts.C3 / consts.sigma * eps ** consts.mu
        gap = kappa(eps, k, delta, consts)
        wall = (consts.sigma * delta - consts.C1 * delta ** 2
                - eps ** consts.mu * consts.C3)
        feasible = int(gap > 0.0 and wall > 0.0 and delta <= delta_cap)
        rows.append((eps, k, delta, gap, feasible))
    _emit(cfg, ("eps", "k_eps", "delta", "rate_gap", "feasible"), rows,
          comments=(f"thresholds for {name}: "
                    f"eps_star={tables.format_value(eps_star)} "
                    f"delta_star={tables.format_value(delta_star)}",))
    print(f"eps_star={eps_star:.17g} delta_star={delta_star:.17g}")
    path = _plot_path(cfg, f"persist_{name}")
    if path:
        plots.plot_threshold_curve(eps_grid, [r[1] for r in rows],
                                   [r[3] for r in rows], eps_star, path)
    _summary("persist", "done", system=name, margin=eps_star,
             delta_star=delta_star)
    return EXIT_OK


def cmd_plotdata(cfg):
    """Certified order over the (beta, omega) lattice of the torus family.

    The rate bounds do not involve omega, so the order column repeats
    across the omega axis; the sweep keeps the plane layout for direct
    figure rendering.
    """
    b_count, b_max = int(cfg.opt("beta_count")), float(cfg.opt("beta_max"))
    o_count, o_max = int(cfg.opt("omega_count")), float(cfg.opt("omega_max"))
    cap = int(cfg.opt("order_cap"))
    if b_count < 1 or o_count < 1 or b_max <= 0 or cap < 1:
        raise ConfigError("sweep counts and ranges must be positive")
    betas = np.linspace(b_max / b_count, b_max, b_count)
    omegas = np.linspace(0.0, o_max, o_count)

    def order_at(beta):
        best = 0
        for r in range(1, cap + 1):
            if best_torus_slack(beta, r) <= 0.0:
                break
            best = r
        return best

    orders = np.array(parallel_map(order_at, betas))
    rows = [(b, w, int(orders[i] > 0), int(orders[i]))
            for i, b in enumerate(betas) for w in omegas]
    _emit(cfg, ("beta", "omega", "exists", "order"), rows,
          comments=("certified order sweep (order independent of omega)",))
    path = _plot_path(cfg, "plotdata")
    if path:
        grid = np.tile(orders[:, None], (1, o_count))
        plots.plot_parameter_sweep(betas, omegas, grid, path)
    _summary("plotdata", "done", rows=len(rows), margin=int(orders.max()))
    return EXIT_OK


_DISPATCH = {
    "check": cmd_check,
    "region": cmd_region,
    "manifold": cmd_manifold,
    "audit": cmd_audit,
    "counterexample": cmd_counterexample,
    "persist": cmd_persist,
    "plotdata": cmd_plotdata,
}


def run(cfg):
    """Execute one resolved configuration; returns the exit code."""
    if cfg.workers:
        os.environ[WORKERS_ENV] = str(cfg.workers)
    return _DISPATCH[cfg.command](cfg)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_CONFIG
        return EXIT_OK if code == 0 else EXIT_CONFIG
    command = "?"
    try:
        cfg = _config_from_args(args)
        command = cfg.command
        return run(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _summary(command, "error", exit=EXIT_CONFIG)
        return EXIT_CONFIG
    except HypothesisError as exc:
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        _summary(command, "error", exit=EXIT_HYPOTHESIS)
        return EXIT_HYPOTHESIS
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        _summary(command, "error", exit=EXIT_NUMERIC)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
