"""Invariant graphs over the tangential coordinates: construction and audits.

A graph manifold stores heights a = h(z) (and optionally slopes Dh) on a
rectangular lattice and evaluates them anywhere via cubic interpolation
with wrap padding on periodic axes.

Two independent constructions are provided.  Shooting exploits the exit
dichotomy on an isolating box: for scalar a, the initial height whose
trajectory never leaves through the top or bottom face is found by
bisection, node by node, in one lockstep batch.  The graph transform
iterates the flow map on candidate graphs: ride the base field along the
current graph for time tau, pull the landed graph point back with the
full flow, and re-anchor at the starting node; the normal gap makes the
node-value map a contraction whose fixed point is the invariant graph.

Everything downstream (derivative transport, cone and separation probes,
periodicity and Lipschitz audits, fixed-section intersection) consumes
the same container.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import NdBSpline, make_interp_spline

from .core import cone_gauge
from .errors import (ConfigError, GraphComputationError, HypothesisError,
                     LipschitzPrecondition, UnsupportedDimension)
from .hypotheses import CheckReport, check_hyp2
from .integrate import BLOWN, EXITED, _drive, integrate, integrate_batch
from .riccati import riccati_batch

__all__ = [
    "GraphManifold",
    "FaceReport",
    "BoundaryReport",
    "classify_boundary",
    "compute_graph_shoot",
    "compute_graph_transform",
    "invariance_residual",
    "lipschitz_audit",
    "periodicity_audit",
    "derivative_field",
    "cone_invariance_probe",
    "separation_probe",
    "ConeTrace",
    "IntersectResult",
    "intersect_graphs",
]

_PAD = 3  # wrap copies per side; keeps the cubic stencil smooth at the seam


class GraphManifold:
    """Sampled graph a = h(z) on a rectangular lattice.

    z_axes: per-coordinate strictly increasing sample arrays.
    periods: per-coordinate period or None; a periodic axis may include
    the wrapped endpoint (then the duplicate sample is dropped for
    interpolation but kept for the periodicity audit).
    h_values: (*grid_shape, n); dh_values: (*grid_shape, n, m) or None;
    residuals: (*grid_shape,) invariance defects or None.
    """

    def __init__(self, z_axes, h_values, periods=None, dh_values=None,
                 residuals=None, meta=None, name=""):
        self.z_axes = tuple(np.asarray(ax, dtype=float) for ax in z_axes)
        self.m = len(self.z_axes)
        for ax in self.z_axes:
            if ax.ndim != 1 or len(ax) < 2 or np.any(np.diff(ax) <= 0):
                raise ConfigError("each lattice axis must be a strictly "
                                  "increasing 1-d array with >= 2 samples")
        self.periods = tuple(periods) if periods is not None else (None,) * self.m
        if len(self.periods) != self.m:
            raise ConfigError("periods must give one entry per z-axis")
        self.h_values = np.asarray(h_values, dtype=float)
        grid = tuple(len(ax) for ax in self.z_axes)
        if self.h_values.shape[:-1] != grid or self.h_values.ndim != self.m + 1:
            raise ConfigError(f"h_values must have shape {grid} + (n,)")
        self.n = self.h_values.shape[-1]
        self.dh_values = None
        if dh_values is not None:
            self.dh_values = np.asarray(dh_values, dtype=float)
            if self.dh_values.shape != grid + (self.n, self.m):
                raise ConfigError("dh_values must have shape grid + (n, m)")
        self.residuals = None
        if residuals is not None:
            self.residuals = np.asarray(residuals, dtype=float)
            if self.residuals.shape != grid:
                raise ConfigError("residuals must have the grid shape")
        self.meta = dict(meta) if meta else {}
        self.name = name
        self._h_interp = self._build_interp(self.h_values)
        self._dh_interp = (self._build_interp(self.dh_values)
                           if self.dh_values is not None else None)

    # -- lattice ------------------------------------------------------------
    @property
    def grid_shape(self):
        return tuple(len(ax) for ax in self.z_axes)

    def _axis_inclusive(self, j):
        p = self.periods[j]
        if p is None:
            return False
        ax = self.z_axes[j]
        return abs((ax[-1] - ax[0]) - p) <= 1e-9 * max(1.0, p)

    def nodes_z(self):
        grids = np.meshgrid(*self.z_axes, indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=-1)

    def nodes_h(self):
        return self.h_values.reshape(-1, self.n)

    def nodes_dh(self):
        if self.dh_values is None:
            return None
        return self.dh_values.reshape(-1, self.n, self.m)

    @property
    def residual(self):
        """Worst recorded invariance defect, or None if never measured."""
        if self.residuals is None:
            return None
        vals = self.residuals[np.isfinite(self.residuals)]
        return float(np.max(vals)) if vals.size else None

    def with_derivatives(self, dh_values, extra_meta=None):
        meta = dict(self.meta)
        if extra_meta:
            meta.update(extra_meta)
        return GraphManifold(self.z_axes, self.h_values, self.periods,
                             dh_values=dh_values, residuals=self.residuals,
                             meta=meta, name=self.name)

    def with_residuals(self, residuals, extra_meta=None):
        meta = dict(self.meta)
        if extra_meta:
            meta.update(extra_meta)
        return GraphManifold(self.z_axes, self.h_values, self.periods,
                             dh_values=self.dh_values, residuals=residuals,
                             meta=meta, name=self.name)

    # -- interpolation ------------------------------------------------------
    def _build_interp(self, data):
        """Tensor-product interpolating spline with wrap padding.

        Built by fitting an interpolating 1-d spline along each axis in
        turn (exact at the nodes, unlike the approximating grid
        interpolators); periodic axes get _PAD wrapped copies per side so
        the stencil is smooth across the seam.  Out-of-range queries are
        gated by the caller; the spline itself would extrapolate.
        """
        axes = []
        c = np.asarray(data, dtype=float)
        for j, ax in enumerate(self.z_axes):
            p = self.periods[j]
            if p is None:
                axes.append(ax)
                continue
            if self._axis_inclusive(j):
                ax = ax[:-1]
                c = np.take(c, np.arange(len(ax)), axis=j)
            k = min(_PAD, len(ax))
            idx = np.concatenate([np.arange(len(ax) - k, len(ax)),
                                  np.arange(len(ax)),
                                  np.arange(k)])
            c = np.take(c, idx, axis=j)
            axes.append(np.concatenate([ax[-k:] - p, ax, ax[:k] + p]))
        order = 3 if all(len(ax) >= 4 for ax in axes) else 1
        knots = []
        for j, ax in enumerate(axes):
            spl = make_interp_spline(ax, np.moveaxis(c, j, 0), k=order,
                                     axis=0)
            knots.append(spl.t)
            c = np.moveaxis(spl.c, 0, j)
        return NdBSpline(tuple(knots), c, order)

    def _canonical(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if z.shape[-1] != self.m:
            raise ConfigError("query dimension does not match the lattice")
        q = np.array(z, copy=True)
        for j, ax in enumerate(self.z_axes):
            p = self.periods[j]
            if p is not None:
                q[:, j] = ax[0] + np.mod(q[:, j] - ax[0], p)
            else:
                lo, hi = ax[0], ax[-1]
                slack = 1e-9 * max(1.0, hi - lo)
                near = (q[:, j] >= lo - slack) & (q[:, j] <= hi + slack)
                q[near, j] = np.clip(q[near, j], lo, hi)
        return q

    def covers(self, z):
        """True per query point when every non-periodic coordinate is sampled."""
        q = self._canonical(z)
        ok = np.ones(len(q), dtype=bool)
        for j, ax in enumerate(self.z_axes):
            if self.periods[j] is None:
                ok &= (q[:, j] >= ax[0]) & (q[:, j] <= ax[-1])
        return ok

    def _gate(self, q):
        # Integrator stage points riding the graph can overshoot a boundary
        # node microscopically; tolerate extrapolation up to half the edge
        # cell and reject anything farther as a genuine domain escape.
        for j, ax in enumerate(self.z_axes):
            if self.periods[j] is not None:
                continue
            lo = ax[0] - 0.5 * (ax[1] - ax[0])
            hi = ax[-1] + 0.5 * (ax[-1] - ax[-2])
            bad = (q[:, j] < lo) | (q[:, j] > hi)
            if np.any(bad):
                i = int(np.flatnonzero(bad)[0])
                raise GraphComputationError(
                    f"graph queried outside its sampled lattice: coordinate "
                    f"{j} = {q[i, j]:.6g} not in [{ax[0]:.6g}, {ax[-1]:.6g}]")
        return q

    def h_at(self, z):
        """Graph heights at a (B, m) block of base points, shape (B, n)."""
        return self._h_interp(self._gate(self._canonical(z)))

    def dh_at(self, z):
        if self._dh_interp is None:
            raise ConfigError("graph carries no derivative samples")
        return self._dh_interp(self._gate(self._canonical(z)))

    def __repr__(self):
        extras = []
        if self.dh_values is not None:
            extras.append("dh")
        if self.residual is not None:
            extras.append(f"residual={self.residual:.3g}")
        tail = (", " + ", ".join(extras)) if extras else ""
        return (f"GraphManifold(grid={self.grid_shape}, n={self.n}"
                f"{tail})")


# -- boundary behaviour -----------------------------------------------------

@dataclass
class FaceReport:
    label: str
    kind: str          # "exit" | "entry" | "mixed"
    min_speed: float   # outward speeds over the face sample
    max_speed: float
    samples: int


@dataclass
class BoundaryReport:
    faces: dict

    @property
    def isolating(self):
        """All a-faces exit; no bounded z-face can be crossed outward."""
        for fr in self.faces.values():
            if fr.label.startswith("a") and fr.kind != "exit":
                return False
            if fr.label.startswith("z") and fr.kind not in ("entry",
                                                            "tangent"):
                return False
        return True

    def summary(self):
        parts = [f"{fr.label}:{fr.kind}" for fr in self.faces.values()]
        return " ".join(parts)


def _face_lattice(axes):
    grids = np.meshgrid(*axes, indexing="ij") if axes else []
    if not grids:
        return np.zeros((1, 0))
    return np.stack([g.reshape(-1) for g in grids], axis=-1)


def classify_boundary(field, domain, samples_per_face=9, z_window=None):
    """Sample outward speeds on every bounded face of the box.

    A face is "exit" when the outward speed is positive at every sample,
    "entry" when negative at every sample, "mixed" otherwise.
    """
    a_axes = domain.a_axes(samples_per_face)
    z_axes = domain.z_axes(samples_per_face, z_window=z_window)
    faces = {}
    for i in range(domain.n):
        rest = a_axes[:i] + a_axes[i + 1:] + z_axes
        lat = _face_lattice(rest)
        for s, bound, tag in ((+1.0, domain.a_hi[i], "hi"),
                              (-1.0, domain.a_lo[i], "lo")):
            A = np.insert(lat[:, :domain.n - 1], i, bound, axis=1)
            Z = lat[:, domain.n - 1:]
            speed = s * field.f(A, Z)[:, i]
            faces[f"a{i}_{tag}"] = _face_report(f"a{i}_{tag}", speed)
    for j, b in enumerate(domain.z_bounds):
        if b.kind != "interval":
            continue
        rest = a_axes + z_axes[:j] + z_axes[j + 1:]
        lat = _face_lattice(rest)
        for s, bound, tag in ((+1.0, b.hi, "hi"), (-1.0, b.lo, "lo")):
            A = lat[:, :domain.n]
            Z = np.insert(lat[:, domain.n:], j, bound, axis=1)
            speed = s * field.g(A, Z)[:, j]
            faces[f"z{j}_{tag}"] = _face_report(f"z{j}_{tag}", speed)
    return BoundaryReport(faces=faces)


def _face_report(label, speed):
    mn, mx = float(np.min(speed)), float(np.max(speed))
    if mn > 0:
        kind = "exit"
    elif mx < 0:
        kind = "entry"
    elif mx == 0:
        # outward speed never positive: the face cannot be crossed
        kind = "tangent"
    else:
        kind = "mixed"
    return FaceReport(label=label, kind=kind, min_speed=mn, max_speed=mx,
                      samples=len(speed))


# -- construction: shooting -------------------------------------------------

def _margin_or_raise(field, domain, z_window, what):
    rep = check_hyp2(field, domain, grid_density=9, z_window=z_window)
    if not rep.passed:
        raise HypothesisError(
            f"{what} needs a positive first-order margin; got "
            f"{rep.margin:.6g} (worst sample {rep.worst_point})")
    return rep.margin


def _graph_axes(domain, grid_density, z_window):
    if grid_density is None:
        grid_density = 33 if domain.n + domain.m <= 3 else 9
    axes = domain.z_axes(grid_density, z_window=z_window,
                         periodic_endpoint=True)
    periods = tuple(b.period if b.kind == "periodic" else None
                    for b in domain.z_bounds)
    return axes, periods


def _outcomes(field, domain, a_vals, z_nodes, t_horizon, ode_tol):
    """Exit dichotomy per node: -1 bottom, +1 top, 0 survived."""
    res = integrate_batch(field, a_vals[:, None], z_nodes, t_horizon,
                          ode_tol, domain=domain)
    out = np.zeros(len(a_vals), dtype=int)
    exited = res.code == EXITED
    labels = np.array(domain.face_labels)
    if np.any(exited):
        lab = labels[res.face_idx[exited]]
        side = np.where(lab == "a0_hi", 1, np.where(lab == "a0_lo", -1, 9))
        if np.any(side == 9):
            bad = np.flatnonzero(exited)[side == 9]
            raise GraphComputationError(
                f"{len(bad)} shot trajectories left through a z-face "
                f"(first at node {bad[0]}, face "
                f"{lab[side == 9][0]}); the box is not isolating in "
                "practice")
        out[exited] = side
    return out


def compute_graph_shoot(field, domain, grid_density=None, t_horizon=None,
                        tol=1e-8, ode_tol=1e-9, precheck=True, z_window=None,
                        t_probe=None):
    """Invariant graph by per-node bisection on the exit dichotomy.

    Scalar normal coordinate only.  Trajectories started above the graph
    leave through the top face, below through the bottom; the bisection
    narrows the starting height until the bracket is below tol (relative
    to the box width).  A trajectory that survives the whole horizon is
    accepted immediately: the normal expansion makes its height accurate
    to width * exp(-margin * t_horizon).
    """
    if field.n != 1:
        raise UnsupportedDimension(
            "shooting needs a scalar normal coordinate; use the graph "
            "transform for n > 1")
    margin = _margin_or_raise(field, domain, z_window, "shooting")
    if t_horizon is None:
        t_horizon = 20.0 / margin
    if t_probe is None:
        # keep the flight short enough that the normal expansion does not
        # swamp the node accuracy
        t_probe = min(1.0, 2.0 / margin)
    if precheck:
        br = classify_boundary(field, domain, samples_per_face=5,
                               z_window=z_window)
        if not br.isolating:
            raise HypothesisError(
                "the box is not isolating: " + br.summary())

    axes, periods = _graph_axes(domain, grid_density, z_window)
    grid = tuple(len(ax) for ax in axes)
    z_nodes = _face_lattice(axes)
    N = len(z_nodes)
    a_lo, a_hi = float(domain.a_lo[0]), float(domain.a_hi[0])
    width0 = a_hi - a_lo
    tol_abs = tol * max(1.0, width0)

    lo = np.full(N, a_lo)
    hi = np.full(N, a_hi)
    h = np.full(N, np.nan)
    resolved = np.zeros(N, dtype=bool)

    # coarse sweep: bracket each node and catch dichotomy violations
    fracs = np.arange(1, 6) / 6.0
    probe_out = np.empty((len(fracs), N), dtype=int)
    for k, fr in enumerate(fracs):
        probe_out[k] = _outcomes(field, domain, np.full(N, a_lo + fr * width0),
                                 z_nodes, t_horizon, ode_tol)
    if np.any(np.diff(probe_out, axis=0) < 0):
        bad = int(np.flatnonzero(np.any(np.diff(probe_out, axis=0) < 0,
                                        axis=0))[0])
        raise GraphComputationError(
            f"exit side is not monotone in the starting height at node "
            f"{bad} (z = {z_nodes[bad]}); no graph dichotomy")
    for k, fr in enumerate(fracs):
        av = a_lo + fr * width0
        lo[probe_out[k] < 0] = av
        hi_new = probe_out[k] > 0
        hi[hi_new & (hi > av)] = av
        survived = (probe_out[k] == 0) & ~resolved
        h[survived] = av
        resolved |= survived

    rounds = 0
    while True:
        open_idx = np.flatnonzero(~resolved & (hi - lo > tol_abs))
        if open_idx.size == 0:
            break
        rounds += 1
        mid = 0.5 * (lo[open_idx] + hi[open_idx])
        out = _outcomes(field, domain, mid, z_nodes[open_idx], t_horizon,
                        ode_tol)
        lo[open_idx[out < 0]] = mid[out < 0]
        hi[open_idx[out > 0]] = mid[out > 0]
        done = out == 0
        h[open_idx[done]] = mid[done]
        resolved[open_idx[done]] = True
    h[~resolved] = 0.5 * (lo[~resolved] + hi[~resolved])

    graph = GraphManifold(axes, h.reshape(grid + (1,)), periods,
                          meta={"method": "shoot", "t_horizon": t_horizon,
                                "margin_estimate": margin,
                                "bisection_rounds": rounds},
                          name=field.name)
    res, notes = _node_residuals(field, graph, domain, t_probe, ode_tol)
    meta = {"t_probe": t_probe}
    if notes:
        meta["residual_notes"] = notes
    return graph.with_residuals(res.reshape(grid), extra_meta=meta)


# -- construction: graph transform -------------------------------------------

def _base_leg(field, graph, z0, tau, ode_tol):
    """Flow z' = g(h(z), z) from a (B, m) block for time tau (tau < 0 reverses)."""
    sign = 1.0 if tau >= 0 else -1.0

    def fun(y):
        return sign * field.g(graph.h_at(y), y)

    y_fin, _, _, _, _, _, _ = _drive(fun, np.asarray(z0, dtype=float),
                                     abs(float(tau)), ode_tol)
    return y_fin


def compute_graph_transform(field, domain, grid_density=None, tau=None,
                            tol=1e-8, ode_tol=1e-9, max_iter=200,
                            precheck=True, z_window=None, init=None,
                            t_probe=None):
    """Invariant graph as the fixed point of the time-tau flow transform.

    One sweep rides the base field along the current graph for tau, then
    pulls the landed graph point back with the full reversed flow; the
    returned height is re-anchored at the starting node.  The normal gap
    contracts the node values geometrically, so the sweep-to-sweep change
    is driven below tol.
    """
    margin = _margin_or_raise(field, domain, z_window, "the graph transform")
    if tau is None:
        tau = 0.5 / margin
    if t_probe is None:
        t_probe = min(1.0, 2.0 / margin)
    if precheck:
        br = classify_boundary(field, domain, samples_per_face=5,
                               z_window=z_window)
        if not br.isolating:
            raise HypothesisError(
                "the box is not isolating: " + br.summary())

    axes, periods = _graph_axes(domain, grid_density, z_window)
    grid = tuple(len(ax) for ax in axes)
    z_nodes = _face_lattice(axes)
    N = len(z_nodes)

    if init is None:
        h = np.tile(domain.a_center(), (N, 1))
    elif callable(init):
        h = np.atleast_2d(np.asarray(init(z_nodes), dtype=float))
    else:
        h = np.asarray(init, dtype=float).reshape(N, field.n).copy()

    width = float(np.max(domain.a_hi - domain.a_lo))
    changes = []
    for it in range(1, max_iter + 1):
        graph = GraphManifold(axes, h.reshape(grid + (field.n,)), periods)
        y = _base_leg(field, graph, z_nodes, tau, ode_tol)
        back = integrate_batch(field, graph.h_at(y), y, -tau, ode_tol)
        h_new = back.a
        change = float(np.max(np.abs(h_new - h)))
        changes.append(change)
        h = h_new
        if change < tol:
            break
        if change > 5.0 * width:
            raise GraphComputationError(
                f"graph transform diverged at sweep {it} "
                f"(change {change:.3g} vs box width {width:.3g})")
    else:
        raise GraphComputationError(
            f"graph transform did not settle within {max_iter} sweeps; "
            f"last changes {[f'{c:.3g}' for c in changes[-4:]]}")

    contraction = None
    prev = [c for c in changes[:-1] if c > 0]
    if len(changes) >= 2 and prev:
        contraction = changes[-1] / prev[-1]
    graph = GraphManifold(axes, h.reshape(grid + (field.n,)), periods,
                          meta={"method": "transform", "tau": tau,
                                "margin_estimate": margin,
                                "sweeps": len(changes),
                                "contraction_estimate": contraction},
                          name=field.name)
    res, notes = _node_residuals(field, graph, domain, t_probe, ode_tol)
    meta = {"t_probe": t_probe}
    if notes:
        meta["residual_notes"] = notes
    return graph.with_residuals(res.reshape(grid), extra_meta=meta)


# -- audits -------------------------------------------------------------------

def _node_residuals(field, graph, domain, t_probe, ode_tol):
    """Per-node invariance defect |a(t) - h(z(t))| after a short free flight."""
    z0 = graph.nodes_z()
    a0 = graph.nodes_h()
    res = integrate_batch(field, a0, z0, t_probe, ode_tol, domain=domain)
    ok = graph.covers(res.z)
    out = np.full(len(z0), np.nan)
    if np.any(ok):
        out[ok] = np.linalg.norm(res.a[ok] - graph.h_at(res.z[ok]), axis=-1)
    notes = []
    if np.any(~ok):
        notes.append(f"{int(np.sum(~ok))} probe endpoints left the sampled "
                     "window; their defects are not measured")
    return out, notes


def invariance_residual(field, graph, domain=None, t_probe=1.0, ode_tol=1e-9,
                        details=False):
    """Worst invariance defect of the graph under a time-t_probe flight.

    Points are launched from the nodes; each defect is the distance from
    the landed state to the graph over the landed base point.  With a
    domain the flight stops at the boundary and the defect is measured
    at the crossing.
    """
    res, notes = _node_residuals(field, graph, domain, t_probe, ode_tol)
    finite = res[np.isfinite(res)]
    worst = float(np.max(finite)) if finite.size else np.nan
    if details:
        return worst, res, tuple(notes)
    return worst


def lipschitz_audit(graph, extra_pairs=256, seed=0):
    """Sampled Lipschitz ratio of the graph; margin is 1 - max ratio.

    Checks every adjacent node pair along each axis (with the wrap pair
    on periodic axes) plus a seeded batch of random node pairs, using
    the periodic base distance.
    """
    Z = graph.nodes_z()
    H = graph.nodes_h()
    grid = graph.grid_shape
    idx = np.arange(len(Z)).reshape(grid)
    pairs = []
    for ax in range(graph.m):
        lead = np.take(idx, np.arange(1, grid[ax]), axis=ax).reshape(-1)
        base = np.take(idx, np.arange(0, grid[ax] - 1), axis=ax).reshape(-1)
        pairs.append(np.stack([base, lead], axis=-1))
        if graph.periods[ax] is not None and not graph._axis_inclusive(ax):
            first = np.take(idx, [0], axis=ax).reshape(-1)
            last = np.take(idx, [grid[ax] - 1], axis=ax).reshape(-1)
            pairs.append(np.stack([last, first], axis=-1))
    pairs = np.concatenate(pairs, axis=0)
    if extra_pairs:
        rng = np.random.default_rng(seed)
        cand = rng.integers(0, len(Z), size=(int(extra_pairs), 2))
        cand = cand[cand[:, 0] != cand[:, 1]]
        pairs = np.concatenate([pairs, cand], axis=0)

    dz = Z[pairs[:, 1]] - Z[pairs[:, 0]]
    for ax in range(graph.m):
        p = graph.periods[ax]
        if p is not None:
            dz[:, ax] = np.mod(dz[:, ax] + 0.5 * p, p) - 0.5 * p
    dist = np.linalg.norm(dz, axis=-1)
    keep = dist > 1e-12
    dh = np.linalg.norm(H[pairs[:, 1]] - H[pairs[:, 0]], axis=-1)
    ratios = dh[keep] / dist[keep]
    i = int(np.argmax(ratios))
    worst_pair = pairs[keep][i]
    margin = float(1.0 - np.max(ratios))
    return CheckReport(
        inequality_id="lipschitz", passed=margin > 0.0, margin=margin,
        worst_point=Z[worst_pair[0]], samples=int(keep.sum()),
        notes=(f"max_ratio={np.max(ratios):.6g}",))


def periodicity_audit(graph):
    """Max height mismatch between the two wrapped ends of each periodic axis.

    Meaningful only when the lattice carries the wrapped endpoint as an
    independently computed sample; an exclusive lattice would compare a
    node with itself.
    """
    devs = []
    for ax in range(graph.m):
        if graph.periods[ax] is None:
            continue
        if not graph._axis_inclusive(ax):
            continue
        first = np.take(graph.h_values, 0, axis=ax)
        last = np.take(graph.h_values, graph.grid_shape[ax] - 1, axis=ax)
        devs.append(float(np.max(np.abs(first - last))))
    if not devs:
        raise ConfigError(
            "no periodic axis carries an independently sampled endpoint; "
            "build the graph on an endpoint-inclusive lattice to audit "
            "periodicity")
    return max(devs)


def derivative_field(field, graph, t_back, ode_tol=1e-9, norm_cap=50.0,
                     slope_limit=1.0):
    """Graph slopes by backward transport of the zero matrix.

    Ride the base field forward for t_back from each node, then run the
    matrix flow backward along the retraced leg starting from V = 0; the
    value arriving at the node approximates Dh there, with error decaying
    like exp(-gap * t_back).  Returns a new graph carrying dh samples.
    """
    z0 = graph.nodes_z()
    y = _base_leg(field, graph, z0, float(t_back), ode_tol)
    res = riccati_batch(field, graph.h_at, y,
                        np.zeros((len(z0), field.n, field.m)),
                        -float(t_back), tol=ode_tol, norm_cap=norm_cap)
    if np.any(res.code == BLOWN):
        k = int(np.sum(res.code == BLOWN))
        raise GraphComputationError(
            f"matrix transport escaped the norm cap on {k} nodes; "
            "shorten t_back or enlarge the cap")
    dz = res.z - z0
    for ax in range(graph.m):
        p = graph.periods[ax]
        if p is not None:
            dz[:, ax] = np.mod(dz[:, ax] + 0.5 * p, p) - 0.5 * p
    retrace = float(np.max(np.abs(dz)))
    if retrace > 1e-3:
        raise GraphComputationError(
            f"backward base leg failed to retrace its node (worst drift "
            f"{retrace:.3g}); the transport values are not anchored")
    slopes = np.linalg.norm(res.V, ord=2, axis=(-2, -1))
    worst = float(np.max(slopes))
    if worst >= slope_limit:
        raise HypothesisError(
            f"computed slope {worst:.6g} reaches the cone bound "
            f"{slope_limit:g}; the graph is not cone-compatible")
    grid = graph.grid_shape
    dh = res.V.reshape(grid + (field.n, field.m))
    return graph.with_derivatives(
        dh, extra_meta={"t_back": float(t_back), "max_slope": worst,
                        "retrace_drift": retrace})


# -- two-point probes ---------------------------------------------------------

@dataclass
class ConeTrace:
    times: np.ndarray
    gauges: np.ndarray
    ok: bool
    monotone: bool
    truncated: bool


def _pair_states(field, x1, x2, t_end, steps, ode_tol, domain):
    t_stop = float(t_end)
    truncated = False
    if domain is not None:
        for x in (x1, x2):
            tr = integrate(field, x, t_end, ode_tol, domain=domain)
            if tr.exit_event is not None:
                t_stop = min(t_stop, tr.exit_event[0])
                truncated = True
    times = np.linspace(0.0, t_stop, int(steps))
    tr1 = integrate(field, x1, t_stop, ode_tol, t_eval=times)
    tr2 = integrate(field, x2, t_stop, ode_tol, t_eval=times)
    return times, tr1, tr2, truncated


def cone_invariance_probe(field, x1, x2, t_end, steps=20, ode_tol=1e-9,
                          domain=None, rtol=1e-7):
    """Track the cone gauge |da|^2 - |dz|^2 of a pair along the flow.

    The pair must start with a nonnegative gauge; invariance predicts the
    gauge stays nonnegative and nondecreasing.  With a domain the probe
    is truncated at the first boundary crossing of either trajectory.
    """
    g0 = cone_gauge(x1, x2)
    if g0 < 0:
        raise ConfigError("the pair does not start inside the cone")
    times, tr1, tr2, truncated = _pair_states(field, x1, x2, t_end, steps,
                                              ode_tol, domain)
    da = tr1.a - tr2.a
    dz = tr1.z - tr2.z
    gauges = np.sum(da * da, axis=-1) - np.sum(dz * dz, axis=-1)
    scale = np.sum(da * da, axis=-1) + np.sum(dz * dz, axis=-1)
    ok = bool(np.all(gauges >= -rtol * scale))
    slack = rtol * np.maximum(scale[1:], scale[:-1])
    monotone = bool(np.all(np.diff(gauges) >= -slack))
    return ConeTrace(times=times, gauges=gauges, ok=ok and monotone,
                     monotone=monotone, truncated=truncated)


def separation_probe(field, x1, x2, c1, t_end, steps=20, ode_tol=1e-9,
                     domain=None):
    """Check |da(t)| >= |da(0)| exp(c1 t) along the pair, strictly.

    Margin is the worst surplus over the checkpoints after t = 0; the
    gauge must be nonnegative at the start.
    """
    if cone_gauge(x1, x2) < 0:
        raise ConfigError("the pair does not start inside the cone")
    times, tr1, tr2, truncated = _pair_states(field, x1, x2, t_end, steps,
                                              ode_tol, domain)
    sep = np.linalg.norm(tr1.a - tr2.a, axis=-1)
    floor = sep[0] * np.exp(c1 * times)
    surplus = (sep - floor)[1:]
    i = int(np.argmin(surplus))
    margin = float(surplus[i])
    notes = ("truncated at the domain boundary",) if truncated else ()
    return CheckReport(
        inequality_id="separation", passed=margin > 0.0, margin=margin,
        worst_point=float(times[1 + i]), samples=len(surplus), notes=notes)


# -- fixed-section intersection ----------------------------------------------

@dataclass
class IntersectResult:
    p: np.ndarray
    q: np.ndarray
    zeta: np.ndarray
    theta: np.ndarray
    iterations: int
    defects: np.ndarray
    ratio_max: float
    lip_p: float
    lip_q: float


def _lip_sample(fn, lip_box, zeta_axis, theta_axis, samples, rng):
    lo, hi = lip_box
    u = rng.uniform(lo, hi, size=(samples, 2))
    keep = np.abs(u[:, 0] - u[:, 1]) > 1e-9 * max(1.0, hi - lo)
    u = u[keep]
    zt = rng.uniform(zeta_axis[0], zeta_axis[-1], size=len(u))
    th = rng.uniform(theta_axis[0], theta_axis[-1], size=len(u))
    num = np.abs(np.asarray(fn(u[:, 0], zt, th), dtype=float)
                 - np.asarray(fn(u[:, 1], zt, th), dtype=float))
    return float(np.max(num / np.abs(u[:, 0] - u[:, 1])))


def intersect_graphs(P, Q, zeta_axis, theta_axis, tol=1e-12, max_iter=80,
                     lip_box=(-1.0, 1.0), lip_samples=200, seed=0):
    """Common zero section of two transverse graphs p = P(q, .), q = Q(p, .).

    Both maps must be Lipschitz in the opposing fast variable with
    constant at most 1/2 over lip_box (sampled; violation raises).  The
    simultaneous substitution then contracts in the sup + sup norm at
    rate at most 1/2, and the iteration returns the fixed section on the
    (zeta, theta) lattice.
    """
    zeta_axis = np.asarray(zeta_axis, dtype=float)
    theta_axis = np.asarray(theta_axis, dtype=float)
    rng = np.random.default_rng(seed)
    lip_p = _lip_sample(P, lip_box, zeta_axis, theta_axis, lip_samples, rng)
    lip_q = _lip_sample(Q, lip_box, zeta_axis, theta_axis, lip_samples, rng)
    if max(lip_p, lip_q) > 0.5 + 1e-9:
        raise LipschitzPrecondition(
            f"sampled Lipschitz constants ({lip_p:.4g}, {lip_q:.4g}) "
            "exceed 1/2; the substitution map need not contract")

    Zg, Tg = np.meshgrid(zeta_axis, theta_axis, indexing="ij")
    p = np.zeros_like(Zg)
    q = np.zeros_like(Zg)
    defects = []
    for it in range(1, max_iter + 1):
        p_new = np.asarray(P(q, Zg, Tg), dtype=float)
        q_new = np.asarray(Q(p, Zg, Tg), dtype=float)
        defect = float(np.max(np.abs(p_new - p) + np.abs(q_new - q)))
        defects.append(defect)
        p, q = p_new, q_new
        if defect <= tol:
            break
    else:
        raise GraphComputationError(
            f"fixed-section iteration did not reach tol={tol:g} within "
            f"{max_iter} sweeps (last defect {defects[-1]:.3g})")
    defects = np.array(defects)
    floor = 1e3 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(p)))
                                            + float(np.max(np.abs(q))))
    sig = defects[defects > floor]
    ratio_max = float(np.max(sig[1:] / sig[:-1])) if len(sig) >= 2 else 0.0
    return IntersectResult(p=p, q=q, zeta=zeta_axis, theta=theta_axis,
                           iterations=len(defects), defects=defects,
                           ratio_max=ratio_max, lip_p=lip_p, lip_q=lip_q)
