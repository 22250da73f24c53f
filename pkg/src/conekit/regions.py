"""Parameter-region certification for the bundled applications.

Three independent pieces of machinery live here:

* the feasible beta intervals of the cubic torus family, obtained by
  projecting a three-inequality system in (beta, delta, k) onto beta;
* the rapid-oscillation margin Delta(sigma) - ((r+1)/sqrt(r)) sqrt(L)
  for averaged systems whose drift and forcing are periodic in sigma;
* the weak-hyperbolicity picture: the rate-gap function kappa, its
  optimal angular scaling k_epsilon, the persistence thresholds
  (eps*, delta*), and the planar fixed-point classification for the
  weakly damped counterexample  w' = -eps w + alpha^2 sin theta,
  theta' = w.

The torus inequalities, for order r and auxiliary box half-width delta
and angular scaling k, are

    diameter:  delta (8 beta - delta) - 2          > 0
    order 1:   8 beta - 2 delta - beta^2 - k - beta/k     > 0
    order r:   8 beta - 2 delta - r beta^2 - (r+1) beta/k > 0   (r >= 2)

and the beta interval for each r collects the beta with a feasible
(delta, k) pair.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, HypothesisError, NumericError
from .hypotheses import CheckReport
from .util import parallel_map

__all__ = [
    "TorusFamilyParams",
    "QMembership",
    "RegionInterval",
    "RapidOscSpec",
    "PersistenceConstants",
    "FixedPointInfo",
    "q_membership",
    "beta_projection",
    "rapid_osc_condition",
    "kappa",
    "k_epsilon",
    "persistence_thresholds",
    "counterexample_fixed_points",
]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

# search box for the beta projection; the published intervals sit well
# inside it and the inequalities are smooth there
BETA_BOX = (0.0, 10.0)
DELTA_BOX = (0.0, 4.0)
K_BOX = (0.0, 20.0)
COARSE_BETA = 400
SEED_GRID = 64


@dataclass(frozen=True)
class TorusFamilyParams:
    """Parameters of the cubic torus family plus its auxiliary scalings.

    beta and omega are the physical parameters; k rescales the first
    angle, gamma the second, and delta is the half-width of the band
    around the slow sheet on which the rates are certified.
    """

    beta: float
    omega: float = 0.0
    k: float = 1.0
    gamma: float = 0.1
    delta: float = 0.3

    def __post_init__(self):
        if self.beta <= 0 or self.delta <= 0 or self.k <= 0 or self.gamma <= 0:
            raise ConfigError("beta, delta, k, gamma must be positive")


@dataclass(frozen=True)
class QMembership:
    """Outcome of the torus inequalities at one (beta, delta, k, r).

    Truthy iff every active inequality holds strictly; slacks maps each
    inequality label to its margin.
    """

    passed: bool
    slacks: dict

    def __bool__(self):
        return self.passed


def _torus_slacks(beta, delta, k, r):
    s_diam = delta * (8.0 * beta - delta) - 2.0
    s_one = 8.0 * beta - 2.0 * delta - beta**2 - k - beta / k
    slacks = {"diameter": s_diam, "order_1": s_one}
    if r >= 2:
        slacks[f"order_{r}"] = (8.0 * beta - 2.0 * delta - r * beta**2
                                - (r + 1) * beta / k)
    return slacks


def q_membership(beta, delta, k, r):
    """Check the three torus inequalities at one parameter point.

    The order-r line is active only for r >= 2 (at r = 1 it coincides
    with a weaker form of the order-1 line and is skipped).
    """
    if beta <= 0 or delta <= 0 or k <= 0:
        raise ConfigError("beta, delta, k must be positive")
    if int(r) != r or r < 1:
        raise ConfigError(f"order r must be an integer >= 1, got {r}")
    slacks = _torus_slacks(float(beta), float(delta), float(k), int(r))
    return QMembership(all(s > 0.0 for s in slacks.values()), slacks)


@dataclass(frozen=True)
class RegionInterval:
    """One row of the beta-projection table."""

    r: int
    lo: float
    hi: float
    resolution: float
    empty: bool = False

    def __post_init__(self):
        if not self.empty and not self.lo < self.hi:
            raise ConfigError("nonempty interval needs lo < hi")

    def to_record(self):
        if self.empty:
            return f"r={self.r} empty=1 resolution={self.resolution:.9g}"
        return (f"r={self.r} lo={self.lo:.9g} hi={self.hi:.9g} "
                f"resolution={self.resolution:.9g}")


def _golden_max(fn, a, b, iters=90):
    """Maximize a scalar unimodal function on [a, b]."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


def _grid_seeded_max(fn, lo, hi, seed_grid=SEED_GRID):
    """Coarse grid to bracket the peak, then golden-section polish.

    Each slice handed in here is concave (a min of concave branches),
    so the polished value is the true one-dimensional maximum.
    """
    xs = np.linspace(hi / seed_grid, hi, seed_grid)
    vals = [fn(x) for x in xs]
    j = int(np.argmax(vals))
    a = xs[j - 1] if j > 0 else max(lo, 1e-12)
    b = xs[j + 1] if j + 1 < seed_grid else xs[-1]
    return _golden_max(fn, a, b)


def best_torus_slack(beta, r, k_box=K_BOX, delta_box=DELTA_BOX):
    """sup over (delta, k) of the worst torus-inequality slack at beta.

    k enters only the two rate lines and both carry the same -2 delta
    term, so the sup nests: maximize the rate lines over k at delta = 0,
    then maximize min(diameter slack, shifted rate value - 2 delta) over
    delta.  Both one-dimensional slices are concave.
    """
    beta = float(beta)

    def rate_lines(k):
        v = 8.0 * beta - beta**2 - k - beta / k
        if r >= 2:
            v = min(v, 8.0 * beta - r * beta**2 - (r + 1) * beta / k)
        return v

    _, rate_peak = _grid_seeded_max(rate_lines, k_box[0], k_box[1])

    def over_delta(d):
        return min(d * (8.0 * beta - d) - 2.0, rate_peak - 2.0 * d)

    _, best = _grid_seeded_max(over_delta, delta_box[0], delta_box[1])
    return best


def beta_projection(r, resolution=1e-3):
    """Interval of beta admitting a feasible (delta, k) pair at order r.

    Coarse sweep over beta locates the feasible range, then each
    endpoint is refined by bisection on the feasibility probe down to
    the requested resolution.  An empty interval is a valid outcome
    (expected for r >= 8).
    """
    if int(r) != r or r < 1:
        raise ConfigError(f"order r must be an integer >= 1, got {r}")
    if resolution <= 0:
        raise ConfigError("resolution must be positive")
    r = int(r)
    betas = np.linspace(BETA_BOX[1] / COARSE_BETA, BETA_BOX[1], COARSE_BETA)
    feasible = np.array(
        parallel_map(lambda b: best_torus_slack(b, r) > 0.0, betas))
    if not feasible.any():
        return RegionInterval(r=r, lo=math.nan, hi=math.nan,
                              resolution=resolution, empty=True)
    first = int(np.argmax(feasible))
    last = len(feasible) - int(np.argmax(feasible[::-1])) - 1

    def probe(b):
        return b > 0 and best_torus_slack(b, r) > 0.0

    def refine(b_out, b_in):
        # walk outward first: the coarse sweep can miss a sliver
        step = abs(b_in - b_out)
        direction = math.copysign(1.0, b_in - b_out)
        while b_out > 0 and probe(b_out):
            b_out, b_in = b_out - direction * step, b_out
        while abs(b_in - b_out) > resolution:
            mid = 0.5 * (b_in + b_out)
            if probe(mid):
                b_in = mid
            else:
                b_out = mid
        return 0.5 * (b_in + b_out)

    lo = refine(betas[max(first - 1, 0)], betas[first])
    hi = refine(betas[min(last + 1, len(betas) - 1)], betas[last])
    return RegionInterval(r=r, lo=lo, hi=hi, resolution=resolution)


# --------------------------------------------------------------------------
# rapid oscillations


def _parabolic_extremum(xs, vals, j, period=None, mode="max"):
    """Refine a sampled extremum with the parabola through three points.

    Returns (x, value) at the vertex; falls back to the raw sample when
    the neighbors do not bracket a proper extremum (kinks, plateaus).
    """
    n = len(xs)
    jm, jp = (j - 1) % n, (j + 1) % n
    fm, f0, fp = vals[jm], vals[j], vals[jp]
    if mode == "min":
        fm, f0, fp = -fm, -f0, -fp
    denom = fm - 2.0 * f0 + fp
    if denom >= 0 or not (f0 >= fm and f0 >= fp):
        return xs[j], vals[j]
    shift = 0.5 * (fm - fp) / denom
    shift = min(max(shift, -1.0), 1.0)
    value = f0 - 0.25 * (fm - fp) * shift
    h = (xs[1] - xs[0]) if n > 1 else 0.0
    x = xs[j] + shift * h
    if period is not None:
        x = x % period
    return x, (-value if mode == "min" else value)


class RapidOscSpec:
    """Sampled drift/forcing pair for a rapidly forced scalar layer.

    delta and lam are callables of the angle sigma on [0, 2pi],
    periodic; d_delta / d_lam are their derivatives (central differences
    on the sample grid when omitted).  Construction derives

        E1 = min(-lam/delta), E2 = max(-lam/delta), E = max(|E1|, |E2|),
        L  = max(|d_delta| E + |d_lam|),

    the equilibrium-range and slope constants the certification needs.
    """

    def __init__(self, delta, lam, d_delta=None, d_lam=None, samples=4096):
        if samples < 16:
            raise ConfigError("need at least 16 sigma samples")
        self.samples = int(samples)
        self.sigma = np.linspace(0.0, 2.0 * np.pi, self.samples,
                                 endpoint=False)
        self.delta_samples = np.asarray([float(delta(s)) for s in self.sigma])
        self.lam_samples = np.asarray([float(lam(s)) for s in self.sigma])
        if np.min(self.delta_samples) <= 0.0:
            worst = self.sigma[int(np.argmin(self.delta_samples))]
            raise HypothesisError(
                f"drift must stay positive; failed near sigma={worst:.6g}")
        h = self.sigma[1] - self.sigma[0]
        if d_delta is not None:
            self.d_delta_samples = np.asarray(
                [float(d_delta(s)) for s in self.sigma])
        else:
            self.d_delta_samples = (np.roll(self.delta_samples, -1)
                                    - np.roll(self.delta_samples, 1)) / (2 * h)
        if d_lam is not None:
            self.d_lam_samples = np.asarray(
                [float(d_lam(s)) for s in self.sigma])
        else:
            self.d_lam_samples = (np.roll(self.lam_samples, -1)
                                  - np.roll(self.lam_samples, 1)) / (2 * h)

        period = 2.0 * np.pi
        ratio = -self.lam_samples / self.delta_samples
        _, self.E1 = _parabolic_extremum(self.sigma, ratio,
                                         int(np.argmin(ratio)),
                                         period, mode="min")
        _, self.E2 = _parabolic_extremum(self.sigma, ratio,
                                         int(np.argmax(ratio)),
                                         period, mode="max")
        self.E = max(abs(self.E1), abs(self.E2))
        slope = (np.abs(self.d_delta_samples) * self.E
                 + np.abs(self.d_lam_samples))
        _, self.L = _parabolic_extremum(self.sigma, slope,
                                        int(np.argmax(slope)),
                                        period, mode="max")
        self.L = max(self.L, 0.0)

    def min_drift(self):
        """min over sigma of delta(sigma), refined, with its location."""
        j = int(np.argmin(self.delta_samples))
        return _parabolic_extremum(self.sigma, self.delta_samples, j,
                                   2.0 * np.pi, mode="min")


def rapid_osc_condition(spec: RapidOscSpec, r):
    """Margin of the order-r certification for a rapidly forced layer.

    The drift must dominate the slope constant:
        margin = min over sigma of delta(sigma) - ((r+1)/sqrt(r)) sqrt(L).
    """
    if int(r) != r or r < 1:
        raise ConfigError(f"order r must be an integer >= 1, got {r}")
    r = int(r)
    sigma_min, drift_min = spec.min_drift()
    margin = drift_min - (r + 1) / math.sqrt(r) * math.sqrt(spec.L)
    return CheckReport(
        inequality_id=f"rapid_osc_r{r}",
        passed=margin > 0.0,
        margin=float(margin),
        worst_point=float(sigma_min),
        samples=spec.samples,
        notes=(f"E={spec.E:.9g}", f"L={spec.L:.9g}"),
    )


# --------------------------------------------------------------------------
# weak hyperbolicity


@dataclass(frozen=True)
class PersistenceConstants:
    """Constants of the slow normal form around a weakly attracting loop.

    sigma is the leading normal rate; C1..C4 bound the quadratic,
    derivative, remainder, and coupling terms; mu, nu, gamma_exp are the
    smallness exponents of the perturbation; r the smoothness order
    sought.  The derived K table weights each correction in kappa.
    Exponent admissibility (mu > 0, gamma_exp > 0, 0 <= nu <= 1,
    mu + nu > 1) is enforced here so every downstream threshold
    computation can rely on it.
    """

    sigma: float
    C1: float
    C2: float
    C3: float
    C4: float
    mu: float
    nu: float
    gamma_exp: float
    r: int = 1
    K1: float = field(init=False)
    K2: float = field(init=False)
    K3: float = field(init=False)
    K4: float = field(init=False)
    K5: float = field(init=False)
    K6: float = field(init=False)
    K7: float = field(init=False)

    def __post_init__(self):
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        if min(self.C1, self.C2, self.C3, self.C4) < 0:
            raise ConfigError("C1..C4 must be nonnegative")
        if int(self.r) != self.r or self.r < 1:
            raise ConfigError(f"order r must be an integer >= 1, got {self.r}")
        if self.mu <= 0 or self.gamma_exp <= 0:
            raise ConfigError("exponents mu and gamma_exp must be positive")
        if not 0.0 <= self.nu <= 1.0:
            raise ConfigError("exponent nu must lie in [0, 1]")
        if self.mu + self.nu <= 1.0:
            raise ConfigError(
                "exponents too weak: mu + nu must exceed 1, got "
                f"mu={self.mu} nu={self.nu}")
        r = self.r
        object.__setattr__(self, "K1", 4.5 * (r + 1) * self.C2)
        object.__setattr__(self, "K2", (1.5 * r + 1) * self.C1)
        object.__setattr__(self, "K3", (6 * r + 5.5) * self.C4)
        object.__setattr__(self, "K4", r * self.C4)
        object.__setattr__(self, "K5", (1.5 * r + 1) * self.C4)
        object.__setattr__(self, "K6", (4 * r + 1) * self.C4)
        object.__setattr__(self, "K7", (4 * r + 1) * self.C4)


def kappa(eps, k, delta, consts: PersistenceConstants):
    """Rate gap of the rescaled normal form at box half-width delta.

    Positive kappa means the expansion of the normal coordinate beats
    the tangential rates with room for the order-r cone argument:

        kappa = eps sigma - eps (K1 d + K2 d^2 + eps^mu K3 + eps^g K4
                + k eps^mu K5 + (eps^(nu-1) K6 + eps^g K7) / k).
    """
    if eps <= 0 or k <= 0:
        raise ConfigError("eps and k must be positive")
    c = consts
    correction = (c.K1 * delta + c.K2 * delta**2 + eps**c.mu * c.K3
                  + eps**c.gamma_exp * c.K4 + k * eps**c.mu * c.K5
                  + (eps**(c.nu - 1.0) * c.K6 + eps**c.gamma_exp * c.K7) / k)
    return eps * c.sigma - eps * correction


def k_epsilon(eps, consts: PersistenceConstants):
    """Angular scaling minimizing the k-dependent part of kappa.

    The k terms are A k + B / k with A = eps^mu K5 and
    B = eps^(nu-1) K6 + eps^gamma K7, minimized at k = sqrt(B / A) with
    value 2 sqrt(A B).
    """
    if eps <= 0:
        raise ConfigError("eps must be positive")
    c = consts
    a_weight = eps**c.mu * c.K5
    b_weight = eps**(c.nu - 1.0) * c.K6 + eps**c.gamma_exp * c.K7
    if a_weight == 0.0 or b_weight == 0.0:
        raise ConfigError(
            "degenerate k objective: both k coefficients must be positive")
    return math.sqrt(b_weight / a_weight)


def _threshold_feasible(eps, consts, delta_cap):
    delta = 2.0 * consts.C3 / consts.sigma * eps**consts.mu
    if delta > delta_cap:
        return False
    # normal speed at the box wall must point outward
    if consts.sigma * delta - consts.C1 * delta**2 - eps**consts.mu * consts.C3 <= 0:
        return False
    return kappa(eps, k_epsilon(eps, consts), delta, consts) > 0.0


def persistence_thresholds(consts: PersistenceConstants, delta_cap,
                           eps_ceiling=1.0, eps_floor=1e-12):
    """Largest workable eps and its box half-width delta = 2 C3/sigma eps^mu.

    Every correction term in kappa grows with eps (mu + nu > 1 makes the
    1/k term do so as well), so feasibility is an interval (0, eps*) and
    bisection applies.  Returns (eps_star, delta_star); eps_star equals
    eps_ceiling when even the ceiling is feasible.
    """
    if delta_cap <= 0:
        raise ConfigError("delta_cap must be positive")
    if not 0 < eps_floor < eps_ceiling:
        raise ConfigError("need 0 < eps_floor < eps_ceiling")
    if consts.C3 == 0 or consts.C4 == 0:
        raise ConfigError(
            "thresholds need positive C3 and C4 (degenerate otherwise)")

    def feasible(eps):
        return _threshold_feasible(eps, consts, delta_cap)

    if feasible(eps_ceiling):
        eps_star = eps_ceiling
    elif not feasible(eps_floor):
        raise NumericError(
            f"no feasible eps above the floor {eps_floor:.3g}; "
            "constants leave no rate gap")
    else:
        lo, hi = math.log(eps_floor), math.log(eps_ceiling)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if feasible(math.exp(mid)):
                lo = mid
            else:
                hi = mid
        eps_star = math.exp(lo)
    delta_star = 2.0 * consts.C3 / consts.sigma * eps_star**consts.mu
    return eps_star, delta_star


# --------------------------------------------------------------------------
# weakly damped counterexample


@dataclass(frozen=True)
class FixedPointInfo:
    """One equilibrium of the damped pendulum-type plane system."""

    point: tuple
    eigenvalues: np.ndarray
    classification: str


def counterexample_fixed_points(eps, alpha):
    """Equilibria of w' = -eps w + alpha^2 sin theta, theta' = w.

    Returns the equilibria on w = 0 at theta = 0 and theta = pi with
    eigenvalues of the assembled Jacobian [[-eps, alpha^2 cos theta],
    [1, 0]].  theta = 0 is a saddle for alpha > 0; theta = pi is a
    stable spiral when alpha > eps/2 and a stable node otherwise.
    alpha = 0 collapses the pair into a circle of equilibria and both
    entries carry the degenerate label.
    """
    if eps <= 0:
        raise ConfigError("eps must be positive")
    if not 0.0 <= alpha <= eps:
        raise ConfigError("alpha must lie in [0, eps]")
    out = []
    for theta in (0.0, math.pi):
        jac = np.array([[-eps, alpha**2 * math.cos(theta)], [1.0, 0.0]])
        eig = np.linalg.eigvals(jac)
        eig = eig[np.lexsort((eig.imag, -eig.real))]
        if alpha == 0.0:
            label = "degenerate"
        elif theta == 0.0:
            label = "saddle"
        else:
            # discriminant of lambda^2 + eps lambda + alpha^2
            label = "stable_spiral" if eps**2 < 4 * alpha**2 else "stable_node"
        out.append(FixedPointInfo(point=(0.0, theta),
                                  eigenvalues=eig,
                                  classification=label))
    return out
