"""Shared vocabulary for split systems.

State space is a product R^n x R^m with coordinates x = (a, z).  The a-block
is the expanding (graph-valued) direction, the z-block the base direction.
This module holds the value types everything else consumes: points, box
domains with periodic/free z-directions, vector fields in split form with
Jacobian blocks, pointwise rate profiles, and the squared cone gauge.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConfigError, DimensionMismatch, UnboundedDomain

__all__ = [
    "Point",
    "ZBound",
    "BoxDomain",
    "SplitVectorField",
    "RateProfile",
    "cone_gauge",
    "in_cone",
    "hyp1_bound",
]


@dataclass(frozen=True, eq=False)
class Point:
    """A state x = (a, z) with a in R^n, z in R^m."""

    a: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        if a.ndim != 1 or z.ndim != 1 or a.size < 1 or z.size < 1:
            raise DimensionMismatch("a and z must be nonempty 1-d arrays")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(z))):
            raise ConfigError("point coordinates must be finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "z", z)

    @property
    def n(self):
        return self.a.size

    @property
    def m(self):
        return self.z.size

    def as_state(self):
        """Flat state vector (a, z) of length n + m."""
        return np.concatenate([self.a, self.z])

    @classmethod
    def from_state(cls, y, n):
        y = np.asarray(y, dtype=float)
        return cls(y[..., :n], y[..., n:])

    def __repr__(self):
        return f"Point(a={self.a.tolist()}, z={self.z.tolist()})"


# z-direction kinds
INTERVAL = "interval"
PERIODIC = "periodic"
FREE = "free"


@dataclass(frozen=True)
class ZBound:
    """Extent of one z-coordinate: a finite interval, a period, or all of R."""

    kind: str
    lo: float = -math.inf
    hi: float = math.inf
    period: float = 0.0

    def __post_init__(self):
        if self.kind not in (INTERVAL, PERIODIC, FREE):
            raise ConfigError(f"unknown z-bound kind {self.kind!r}")
        if self.kind == INTERVAL:
            if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
                raise ConfigError("interval z-bound needs finite endpoints")
            if not self.lo < self.hi:
                raise ConfigError("interval z-bound needs lo < hi")
        if self.kind == PERIODIC and not self.period > 0.0:
            raise ConfigError("periodic z-bound needs period > 0")

    @classmethod
    def interval(cls, lo, hi):
        return cls(INTERVAL, lo=float(lo), hi=float(hi))

    @classmethod
    def periodic(cls, period):
        return cls(PERIODIC, period=float(period))

    @classmethod
    def free(cls):
        return cls(FREE)


class BoxDomain:
    """Product box: bounded open intervals in a, mixed extents in z.

    The a-extent must be bounded (the cone hypotheses need a finite
    diameter).  Periodic z-coordinates store a period; containment ignores
    them and distances along them use the straight-line lift, never the
    wrapped metric.  `wrap_z` produces the canonical representative in
    [0, p) for interpolation lookups.
    """

    def __init__(self, a_bounds, z_bounds):
        a_bounds = tuple((float(lo), float(hi)) for lo, hi in a_bounds)
        if not a_bounds:
            raise ConfigError("need at least one a-coordinate")
        for lo, hi in a_bounds:
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise UnboundedDomain("a-extent must be bounded in every coordinate")
            if not lo < hi:
                raise ConfigError("a-bounds need lo < hi")
        zb = []
        for b in z_bounds:
            if isinstance(b, ZBound):
                zb.append(b)
            else:
                zb.append(ZBound.interval(*b))
        if not zb:
            raise ConfigError("need at least one z-coordinate")
        self.a_bounds = a_bounds
        self.z_bounds = tuple(zb)
        self.a_lo = np.array([lo for lo, _ in a_bounds])
        self.a_hi = np.array([hi for _, hi in a_bounds])
        # face table: a-faces first, then bounded-z faces
        labels = []
        for i in range(self.n):
            labels.append(f"a{i}_hi")
            labels.append(f"a{i}_lo")
        for j, b in enumerate(self.z_bounds):
            if b.kind == INTERVAL:
                labels.append(f"z{j}_hi")
                labels.append(f"z{j}_lo")
        self.face_labels = tuple(labels)

    @property
    def n(self):
        return len(self.a_bounds)

    @property
    def m(self):
        return len(self.z_bounds)

    def a_diameter(self):
        """Euclidean diameter of the a-box."""
        return float(np.linalg.norm(self.a_hi - self.a_lo))

    def a_center(self):
        return 0.5 * (self.a_lo + self.a_hi)

    def boundary_excess(self, a, z):
        """Signed distance past the worst face, batched.

        Returns (excess, face_index); excess > 0 means the state lies
        outside the box, face_index addresses `face_labels`.
        """
        a = np.asarray(a, dtype=float)
        z = np.asarray(z, dtype=float)
        cols = []
        for i in range(self.n):
            cols.append(a[..., i] - self.a_hi[i])
            cols.append(self.a_lo[i] - a[..., i])
        for j, b in enumerate(self.z_bounds):
            if b.kind == INTERVAL:
                cols.append(z[..., j] - b.hi)
                cols.append(b.lo - z[..., j])
        exc = np.stack(cols, axis=-1)
        idx = np.argmax(exc, axis=-1)
        return np.take_along_axis(exc, idx[..., None], axis=-1)[..., 0], idx

    def contains(self, x, tol=0.0):
        """True when the point lies inside the box (periodic/free dims always do)."""
        exc, _ = self.boundary_excess(x.a, x.z)
        return bool(exc <= tol)

    def wrap_z(self, z):
        """Canonical representative of z with periodic coordinates in [0, p)."""
        z = np.array(z, dtype=float, copy=True)
        for j, b in enumerate(self.z_bounds):
            if b.kind == PERIODIC:
                z[..., j] = np.mod(z[..., j], b.period)
        return z

    def a_axes(self, density):
        """Per-a-coordinate sample arrays covering the closed box."""
        density = _axis_densities(density, self.n)
        return [np.linspace(lo, hi, d) for (lo, hi), d in zip(self.a_bounds, density)]

    def z_axes(self, density, z_window=None, periodic_endpoint=False):
        """Per-z-coordinate sample arrays.

        Interval dims span the closed interval; periodic dims span one
        period (with or without the right endpoint); free dims require a
        caller-declared window (lo, hi) in `z_window` (a dict keyed by
        coordinate index).
        """
        density = _axis_densities(density, self.m)
        axes = []
        for j, (b, d) in enumerate(zip(self.z_bounds, density)):
            if b.kind == INTERVAL:
                axes.append(np.linspace(b.lo, b.hi, d))
            elif b.kind == PERIODIC:
                if periodic_endpoint:
                    axes.append(np.linspace(0.0, b.period, d))
                else:
                    axes.append(np.linspace(0.0, b.period, d, endpoint=False))
            else:
                if z_window is None or j not in z_window:
                    raise ConfigError(
                        f"z-coordinate {j} is unbounded: declare a sampling window"
                    )
                lo, hi = z_window[j]
                axes.append(np.linspace(float(lo), float(hi), d))
        return axes

    def __repr__(self):
        return f"BoxDomain(a_bounds={self.a_bounds}, z_bounds={self.z_bounds})"


def _axis_densities(density, ndim):
    if np.isscalar(density):
        return [int(density)] * ndim
    density = [int(d) for d in density]
    if len(density) != ndim:
        raise ConfigError("per-axis density list has wrong length")
    return density


class SplitVectorField:
    """Vector field in split form: da/dt = f(a, z), dz/dt = g(a, z).

    f and g must be vectorized over a leading batch axis: inputs shaped
    (..., n) and (..., m) produce outputs of matching leading shape.
    Jacobian blocks are optional; missing blocks fall back to central
    finite differences with per-coordinate step fd_step * (1 + |coord|).
    """

    def __init__(self, n, m, f, g, jac_aa=None, jac_az=None, jac_za=None,
                 jac_zz=None, fd_step=1e-6, name=""):
        self.n = int(n)
        self.m = int(m)
        if self.n < 1 or self.m < 1:
            raise DimensionMismatch("need n >= 1 and m >= 1")
        self.f = f
        self.g = g
        self._jac = {"aa": jac_aa, "az": jac_az, "za": jac_za, "zz": jac_zz}
        self.fd_step = float(fd_step)
        self.name = name

    # -- right-hand sides -------------------------------------------------
    def rhs(self, a, z):
        """Concatenated state derivative, shape (..., n+m)."""
        a = np.asarray(a, dtype=float)
        z = np.asarray(z, dtype=float)
        return np.concatenate(
            [np.asarray(self.f(a, z), dtype=float),
             np.asarray(self.g(a, z), dtype=float)], axis=-1)

    def rhs_state(self, y):
        y = np.asarray(y, dtype=float)
        return self.rhs(y[..., : self.n], y[..., self.n:])

    # -- Jacobian blocks ---------------------------------------------------
    def d_af(self, a, z):
        return self._block("aa", a, z)

    def d_zf(self, a, z):
        return self._block("az", a, z)

    def d_ag(self, a, z):
        return self._block("za", a, z)

    def d_zg(self, a, z):
        return self._block("zz", a, z)

    def full_jacobian(self, a, z):
        """Assembled (n+m) x (n+m) Jacobian of (f, g), batched."""
        top = np.concatenate([self.d_af(a, z), self.d_zf(a, z)], axis=-1)
        bot = np.concatenate([self.d_ag(a, z), self.d_zg(a, z)], axis=-1)
        return np.concatenate([top, bot], axis=-2)

    def _block(self, key, a, z):
        a = np.asarray(a, dtype=float)
        z = np.asarray(z, dtype=float)
        fn = self._jac[key]
        if fn is not None:
            return np.asarray(fn(a, z), dtype=float)
        comp = self.f if key in ("aa", "az") else self.g
        wrt_a = key in ("aa", "za")
        return _fd_block(comp, a, z, wrt_a, self.fd_step)

    def reversed(self):
        """Field of the time-reversed system (all signs flipped)."""
        neg = {}
        for key, fn in self._jac.items():
            neg[key] = None if fn is None else _negate(fn)
        return SplitVectorField(
            self.n, self.m,
            _negate(self.f), _negate(self.g),
            jac_aa=neg["aa"], jac_az=neg["az"], jac_za=neg["za"],
            jac_zz=neg["zz"], fd_step=self.fd_step,
            name=self.name + "[reversed]" if self.name else "")


def _negate(fn):
    return lambda a, z: -np.asarray(fn(a, z), dtype=float)


def _fd_block(comp, a, z, wrt_a, fd_step):
    """Central finite-difference Jacobian of comp w.r.t. a or z, batched."""
    var = a if wrt_a else z
    width = var.shape[-1]
    cols = []
    for j in range(width):
        h = fd_step * (1.0 + np.abs(var[..., j]))
        vp = np.array(var, copy=True)
        vm = np.array(var, copy=True)
        vp[..., j] = vp[..., j] + h
        vm[..., j] = vm[..., j] - h
        if wrt_a:
            fp = comp(vp, z)
            fm = comp(vm, z)
        else:
            fp = comp(a, vp)
            fm = comp(a, vm)
        cols.append((np.asarray(fp, dtype=float) - np.asarray(fm, dtype=float))
                    / (2.0 * h)[..., None])
    return np.stack(cols, axis=-1)


@dataclass
class RateProfile:
    """Pointwise rate maps and the certified constants that go with them.

    alpha, ell, dzf_norm, dag_norm take batched (a, z) arrays and return
    the expansion rate, the base contraction rate, and the off-block
    spectral norms.  c1 and cr are the cone-gap constants, eta the graph
    slope bound, r the smoothness order the profile certifies.
    """

    alpha: object
    ell: object
    dzf_norm: object
    dag_norm: object
    c1: float = 0.0
    cr: float = 0.0
    eta: float = 1.0
    r: int = 1

    def at(self, x: Point):
        """All four rates at a single point."""
        a, z = x.a[None, :], x.z[None, :]
        return {
            "alpha": float(np.asarray(self.alpha(a, z))[0]),
            "ell": float(np.asarray(self.ell(a, z))[0]),
            "dzf_norm": float(np.asarray(self.dzf_norm(a, z))[0]),
            "dag_norm": float(np.asarray(self.dag_norm(a, z))[0]),
        }


def cone_gauge(x1: Point, x2: Point):
    """Squared cone gauge ||a2 - a1||^2 - ||z2 - z1||^2.

    Nonnegative exactly when x2 lies in the a-dominated cone with vertex
    x1 (and vice versa; the gauge is symmetric).
    """
    if x1.n != x2.n or x1.m != x2.m:
        raise DimensionMismatch("points live in different split spaces")
    da = x2.a - x1.a
    dz = x2.z - x1.z
    return float(da @ da - dz @ dz)


def in_cone(vertex: Point, x: Point, tol=0.0):
    """True when x lies in the cone anchored at vertex (gauge >= -tol)."""
    return cone_gauge(vertex, x) >= -float(tol)


def hyp1_bound(domain: BoxDomain):
    """Smallest ball radius d that contains every in-domain cone section.

    Inside the cone the z-offset is dominated by the a-offset, so the
    section diameter is set by the a-box alone: d equals the Euclidean
    diameter of the a-extent.  Unbounded a-extent has no finite d.
    """
    if not all(math.isfinite(lo) and math.isfinite(hi) for lo, hi in domain.a_bounds):
        raise UnboundedDomain("hyp1_bound needs a bounded a-extent")
    return domain.a_diameter()
