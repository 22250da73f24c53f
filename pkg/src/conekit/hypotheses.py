"""Rate extraction and inequality margins over sampling grids.

The split system is cone-compatible when the expansion rate of the a-block
dominates the base rates: with

    alpha(x) = lambda_min(sym D_a f),   ell(x) = lambda_max(sym D_z g),

and the spectral norms of the off-diagonal blocks, the first-order
inequality reads

    alpha >= ell + ||D_z f|| + ||D_a g|| + c1,

and the order-r refinement (needed for C^r graphs)

    alpha >= r ell + (r + 1) ||D_a g|| + c_r.

Along a known graph with slope bound eta the off-block weight relaxes to

    alpha >= r ell + (r + 1) eta ||D_a g|| + c_r.

Checkers sample a rectangular grid (closed intervals for bounded
coordinates, one period for periodic ones, a declared window for free
ones) and report the worst margin; passed means margin > 0.
"""

from dataclasses import dataclass

import numpy as np

from .core import BoxDomain, Point, RateProfile, SplitVectorField
from .errors import ConfigError, HypothesisError

__all__ = [
    "CheckReport",
    "pointwise_rates",
    "grid_rates",
    "check_hyp2",
    "check_hyp2star",
    "check_hyp5",
    "max_certified_order",
]


@dataclass
class CheckReport:
    """Outcome of one inequality check: margin, worst sample, bookkeeping."""

    inequality_id: str
    passed: bool
    margin: float
    worst_point: object
    samples: int
    notes: tuple = ()

    def __post_init__(self):
        # the pass flag is the margin sign, nothing else
        assert self.passed == (self.margin > 0.0)

    def to_record(self):
        worst = self.worst_point
        if isinstance(worst, Point):
            worst = "(" + ",".join(f"{v:.6g}" for v in worst.as_state()) + ")"
        elif isinstance(worst, (tuple, list, np.ndarray)):
            worst = "(" + ",".join(f"{float(v):.6g}" for v in np.atleast_1d(worst)) + ")"
        elif worst is None:
            worst = "-"
        else:
            worst = f"{float(worst):.6g}"
        line = (f"check={self.inequality_id} passed={int(self.passed)} "
                f"margin={self.margin:.9g} samples={self.samples} worst={worst}")
        if self.notes:
            line += " notes=" + ";".join(self.notes)
        return line


def _sym_rates(field, A, Z):
    """Batched pointwise rates from the four Jacobian blocks."""
    daf = field.d_af(A, Z)
    dzg = field.d_zg(A, Z)
    sym_f = 0.5 * (daf + np.swapaxes(daf, -1, -2))
    sym_g = 0.5 * (dzg + np.swapaxes(dzg, -1, -2))
    alpha = np.linalg.eigvalsh(sym_f)[..., 0]
    ell = np.linalg.eigvalsh(sym_g)[..., -1]
    dzf = np.linalg.svd(field.d_zf(A, Z), compute_uv=False)[..., 0]
    dag = np.linalg.svd(field.d_ag(A, Z), compute_uv=False)[..., 0]
    return alpha, ell, dzf, dag


def pointwise_rates(field: SplitVectorField, x: Point):
    """The four rates at a single point.

    alpha is the tightest constant with <a', D_a f a'> >= alpha |a'|^2,
    ell the tightest with <z', D_z g z'> <= ell |z'|^2; the off-block
    norms are spectral.
    """
    A, Z = x.a[None, :], x.z[None, :]
    alpha, ell, dzf, dag = _sym_rates(field, A, Z)
    return {
        "alpha": float(alpha[0]),
        "ell": float(ell[0]),
        "dzf_norm": float(dzf[0]),
        "dag_norm": float(dag[0]),
    }


def _default_density(field):
    return 33 if field.n + field.m <= 3 else 9


def _product_grid(axes):
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=-1)


def grid_rates(field, domain, grid_density=None, z_window=None, rates=None):
    """Sample the four rate maps on the domain lattice.

    Returns (A, Z, alpha, ell, dzf, dag, notes).  When `rates` (a
    RateProfile) is given its closed-form maps are evaluated instead of
    the Jacobian-derived ones.
    """
    if grid_density is None:
        grid_density = _default_density(field)
    a_axes = domain.a_axes(grid_density)
    z_axes = domain.z_axes(grid_density, z_window=z_window)
    notes = []
    for j, b in enumerate(domain.z_bounds):
        if b.kind == "free":
            lo, hi = z_window[j]
            notes.append(f"free z{j} sampled on declared window [{lo:g},{hi:g}]")
    pts = _product_grid(a_axes + z_axes)
    A = pts[:, : domain.n]
    Z = pts[:, domain.n:]
    if rates is not None:
        vals = (np.asarray(rates.alpha(A, Z), dtype=float),
                np.asarray(rates.ell(A, Z), dtype=float),
                np.asarray(rates.dzf_norm(A, Z), dtype=float),
                np.asarray(rates.dag_norm(A, Z), dtype=float))
        alpha, ell, dzf, dag = (np.broadcast_to(v, (len(A),)).astype(float)
                                for v in vals)
    else:
        alpha, ell, dzf, dag = _sym_rates(field, A, Z)
    return A, Z, alpha, ell, dzf, dag, tuple(notes)


def _report(ineq_id, margins, A, Z, notes):
    i = int(np.argmin(margins))
    margin = float(margins[i])
    return CheckReport(
        inequality_id=ineq_id,
        passed=margin > 0.0,
        margin=margin,
        worst_point=Point(A[i], Z[i]),
        samples=len(margins),
        notes=notes,
    )


def check_hyp2(field, domain, grid_density=None, c1=0.0, rates=None,
               z_window=None):
    """First-order cone-compatibility margin over the sampling grid.

    With c1=0 the reported margin is the supremum admissible gap
    constant; passed means the inequality holds strictly at every
    sample.
    """
    A, Z, alpha, ell, dzf, dag, notes = grid_rates(
        field, domain, grid_density, z_window, rates)
    margins = alpha - ell - dzf - dag - c1
    return _report("hyp2", margins, A, Z, notes)


def check_hyp2star(field, domain, r, cr=0.0, grid_density=None, rates=None,
                   z_window=None):
    """Order-r margin: both the first-order line (raw) and the r-line must hold.

    The reported margin is the pointwise minimum of the two lines, so
    passed means the full order-r hypothesis holds on the grid.
    """
    r = int(r)
    if r < 1:
        raise ConfigError("order r must be >= 1")
    A, Z, alpha, ell, dzf, dag, notes = grid_rates(
        field, domain, grid_density, z_window, rates)
    line1 = alpha - ell - dzf - dag
    liner = alpha - r * ell - (r + 1) * dag - cr
    margins = np.minimum(line1, liner)
    return _report(f"hyp2star_r{r}", margins, A, Z, notes)


def check_hyp5(field, graph, eta, r, cr=0.0, grid_density=None,
               tube_radius=0.05, higher_derivatives_bounded=True):
    """Graph-relative order-r margin on a tube around a computed graph.

    The graph must carry derivative samples certifying ||Dh|| < eta; a
    violated slope bound is a precondition failure.  Boundedness of the
    higher derivatives cannot be sampled and enters as a caller
    attestation recorded in the report notes.

    Sample points are the graph nodes plus axis offsets of size
    tube_radius in every a- and z-direction.
    """
    r = int(r)
    if r < 1:
        raise ConfigError("order r must be >= 1")
    eta = float(eta)
    dh = graph.nodes_dh()
    if dh is None:
        raise ConfigError(
            "graph carries no derivative samples; compute them before "
            "checking the graph-relative hypothesis")
    slopes = np.linalg.norm(dh, ord=2, axis=(-2, -1))
    if float(np.max(slopes)) >= eta:
        raise HypothesisError(
            f"slope bound violated: max ||Dh|| = {np.max(slopes):.6g} >= "
            f"eta = {eta:.6g}")

    Zn = graph.nodes_z()
    Hn = graph.nodes_h()
    if grid_density is not None:
        stride = max(1, len(Zn) // int(grid_density) ** graph.m)
        Zn = Zn[::stride]
        Hn = Hn[::stride]
    n, m = Hn.shape[1], Zn.shape[1]
    A_list = [Hn]
    Z_list = [Zn]
    for i in range(n):
        for s in (+1.0, -1.0):
            off = np.zeros(n)
            off[i] = s * tube_radius
            A_list.append(Hn + off)
            Z_list.append(Zn)
    for j in range(m):
        for s in (+1.0, -1.0):
            off = np.zeros(m)
            off[j] = s * tube_radius
            A_list.append(Hn)
            Z_list.append(Zn + off)
    A = np.concatenate(A_list, axis=0)
    Z = np.concatenate(Z_list, axis=0)
    alpha, ell, dzf, dag = _sym_rates(field, A, Z)
    margins = alpha - r * ell - (r + 1) * eta * dag - cr
    notes = (f"tube_radius={tube_radius:g}",
             "higher derivative bound attested by caller"
             if higher_derivatives_bounded
             else "higher derivative bound NOT attested")
    return _report(f"hyp5_r{r}", margins, A, Z, notes)


def max_certified_order(field, domain, grid_density=None, min_margin=0.0,
                        r_cap=10, rates=None, z_window=None):
    """Largest order r whose margin clears min_margin on the grid (0 if none).

    Rates are sampled once; margins are non-increasing in r, so the scan
    stops at the first failure and caps at r_cap.
    """
    A, Z, alpha, ell, dzf, dag, _ = grid_rates(
        field, domain, grid_density, z_window, rates)
    line1 = float(np.min(alpha - ell - dzf - dag))
    if line1 < min_margin or line1 <= 0.0:
        return 0
    r_max = 1
    for r in range(2, int(r_cap) + 1):
        mr = float(np.min(np.minimum(line1, alpha - r * ell - (r + 1) * dag)))
        if mr < min_margin or mr <= 0.0:
            break
        r_max = r
    return r_max
