"""Adaptive time stepping for split systems.

One embedded Dormand-Prince 5(4) driver serves three front ends:

* `integrate`       -- a single trajectory with dense-output sampling and
                       first-boundary-crossing detection,
* `integrate_batch` -- many trajectories advanced in lockstep with one
                       shared adaptive step (the error norm is the max over
                       still-active members); members freeze individually
                       at domain exit or at a norm cap,
* `variational`     -- trajectory plus its matrix cocycle Q(t, x), obtained
                       by co-integrating dQ/dt = DF(x(t)) Q from Q(0) = I.

Negative t_end integrates the time-reversed field; reported times are the
internal clock of that run (increasing from 0 to |t_end|).
Boundary crossings are located by bisection on the quartic dense output to
1e-10 in time.
"""

from dataclasses import dataclass

import numpy as np

from .core import BoxDomain, Point, SplitVectorField
from .errors import ConfigError, IntegrationError

__all__ = [
    "Trajectory",
    "BatchResult",
    "VariationalPath",
    "integrate",
    "integrate_batch",
    "variational",
    "cocycle_probe",
]

# Dormand-Prince 5(4) tableau, FSAL form
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, 0] = 1 / 5
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
_B5 = _A[6].copy()  # 5th-order weights; stage 7 is f at the new point
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
               -17253 / 339200, 22 / 525, -1 / 40])
# quartic dense-output coefficients for the same pair
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_TIME_LOCATE_TOL = 1e-10  # bisection width for boundary-crossing times
_MAX_STEPS = 2_000_000

# batch member status codes
RAN_TO_END = 0
EXITED = 1
BLOWN = 2


@dataclass
class Trajectory:
    """Numerical trajectory of a split system.

    times increase strictly from 0; for a time-reversed run (t_end < 0)
    they are the clock of the reversed field.  exit_event is
    (time, face_label) for the first boundary crossing, or None.
    """

    times: np.ndarray
    a: np.ndarray
    z: np.ndarray
    exit_event: tuple
    direction: int
    error_estimate: float

    @property
    def states(self):
        return [Point(self.a[i], self.z[i]) for i in range(len(self.times))]

    def end(self):
        return Point(self.a[-1], self.z[-1])


@dataclass
class BatchResult:
    """Lockstep batch outcome: final states plus per-member exit data."""

    a: np.ndarray          # (B, n) state at t_reached
    z: np.ndarray          # (B, m)
    t_reached: np.ndarray  # (B,)
    code: np.ndarray       # (B,) RAN_TO_END / EXITED / BLOWN
    face_idx: np.ndarray   # (B,) index into domain.face_labels, -1 if none
    rec_times: object = None   # (K,) accepted-step times when recording
    rec_states: object = None  # (K, B, dim)


@dataclass
class VariationalPath:
    """Trajectory together with its cocycle matrices Q(t)."""

    times: np.ndarray
    a: np.ndarray
    z: np.ndarray
    Q: np.ndarray  # (T, n+m, n+m)

    def end(self):
        return Point(self.a[-1], self.z[-1])


def _error_norm(err_vec, y0, y1, tol):
    sc = tol + tol * np.maximum(np.abs(y0), np.abs(y1))
    return np.sqrt(np.mean((err_vec / sc) ** 2, axis=-1))


def _initial_step(fun, y0, tol, t_span):
    """Cheap two-evaluation starting step (curvature probe along Euler)."""
    f0 = fun(y0)
    sc = tol + tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / sc) ** 2))
    d1 = np.sqrt(np.mean((f0 / sc) ** 2))
    h0 = 1e-6 if d1 < 1e-12 else 0.01 * d0 / d1
    h0 = min(max(h0, 1e-12), t_span)
    y1 = y0 + h0 * f0
    f1 = fun(y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / sc) ** 2)) / h0
    dmax = max(d1, d2)
    h1 = (0.01 / dmax) ** 0.2 if dmax > 1e-15 else max(1e-6, h0 * 1e3)
    return min(100 * h0, h1, t_span), f0


def _dense(y0, K, h, theta):
    """Quartic dense output at fraction theta in [0, 1], per member.

    y0: (B, d), K: (7, B, d), theta: (B,).
    """
    powers = np.stack([theta, theta ** 2, theta ** 3, theta ** 4], axis=-1)
    w = powers @ _P.T  # (B, 7)
    return y0 + h * np.einsum("bs,sbd->bd", w, K)


def _locate_crossing(y0, K, h, excess_fn):
    """Bisect theta in (0, 1] for the boundary crossing of each member.

    Assumes theta=0 is inside (excess <= 0) and theta=1 outside.  Returns
    (theta, state, face_idx) with the state just past the crossing.
    """
    B = y0.shape[0]
    lo = np.zeros(B)
    hi = np.ones(B)
    while h * np.max(hi - lo) > _TIME_LOCATE_TOL:
        mid = 0.5 * (lo + hi)
        exc, _ = excess_fn(_dense(y0, K, h, mid))
        out = exc > 0.0
        hi = np.where(out, mid, hi)
        lo = np.where(out, lo, mid)
    yc = _dense(y0, K, h, hi)
    _, face = excess_fn(yc)
    return hi, yc, face


class _Controller:
    """Hairer-style PI step-size controller."""

    def __init__(self):
        self.facold = 1e-4

    def next_h(self, err, h, accepted):
        fac11 = max(err, 1e-10) ** 0.17
        if not accepted:
            return h / min(5.0, fac11 / 0.9)
        fac = max(0.1, min(5.0, fac11 / self.facold ** 0.04 / 0.9))
        self.facold = max(err, 1e-4)
        return h / fac


def _drive(fun, y0, t_end, tol, excess_fn=None, norm_cap=None, record=False,
           t_eval=None, max_step=np.inf, cap_cols=None):
    """Advance a (B, dim) block from t=0 to t_end > 0.

    Returns (y_final, t_reached, code, face_idx, eval_samples, recording,
    worst_error).  Members freeze at boundary crossings (EXITED) and, when
    norm_cap is set, on sup-norm escape or non-finite values (BLOWN);
    without a cap, non-finite values force step halving and eventually an
    IntegrationError.  cap_cols restricts the escape norm to a column
    slice (so bookkeeping coordinates with large legitimate ranges do
    not trip the cap).
    """
    if not tol > 0:
        raise ConfigError("integrator tolerance must be positive")
    y0 = np.asarray(y0, dtype=float)
    B, _ = y0.shape
    t_end = float(t_end)

    t_now = np.full(B, t_end)
    y_fin = y0.copy()
    code = np.full(B, RAN_TO_END, dtype=int)
    face = np.full(B, -1, dtype=int)

    if excess_fn is not None:
        exc0, f0 = excess_fn(y0)
        outside = exc0 > 0.0
        code[outside] = EXITED
        face[outside] = f0[outside]
        t_now[outside] = 0.0
    active = np.flatnonzero(code == RAN_TO_END)

    eval_out = []
    eval_idx = 0
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        while eval_idx < len(t_eval) and t_eval[eval_idx] <= 0.0:
            eval_out.append((float(t_eval[eval_idx]), y0[0].copy()))
            eval_idx += 1

    recording = [(0.0, y0.copy())] if record else None

    if t_end == 0.0 or active.size == 0:
        if active.size:
            t_now[active] = 0.0
        return y_fin, t_now, code, face, eval_out, recording, 0.0

    ctrl = _Controller()
    y = y0[active]
    t = 0.0
    h, k1 = _initial_step(fun, y, tol, t_end)
    h = min(h, max_step)
    worst = 0.0

    for _ in range(_MAX_STEPS):
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow at t={t:.6g}")
        clipped = t + h >= t_end
        if clipped:
            h = t_end - t

        # one embedded step over the active block
        K = np.empty((7,) + y.shape)
        K[0] = k1
        for i in range(1, 7):
            yi = y + h * np.tensordot(_A[i, :i], K[:i], axes=1)
            K[i] = fun(yi)
        y1 = y + h * np.tensordot(_B5[:6], K[:6], axes=1)

        finite = np.all(np.isfinite(y1), axis=-1) & np.all(
            np.isfinite(K[6]), axis=-1)
        if not np.all(finite):
            if norm_cap is not None:
                # freeze diverged members at their last good state
                bad = ~finite
                idx = active[bad]
                code[idx] = BLOWN
                y_fin[idx] = y[bad]
                t_now[idx] = t
                active = active[finite]
                y = y[finite]
                k1 = k1[finite]
                if active.size == 0:
                    break
            h *= 0.5
            continue

        err = float(np.max(_error_norm(h * np.tensordot(_E, K, axes=1),
                                       y, y1, tol)))
        if not np.isfinite(err) or err > 1.0:
            h = ctrl.next_h(1.0 if not np.isfinite(err) else err, h,
                            accepted=False)
            continue

        worst = max(worst, err)
        t_new = t + h

        if t_eval is not None:
            while eval_idx < len(t_eval) and t_eval[eval_idx] <= t_new + 1e-15:
                theta = min((t_eval[eval_idx] - t) / h, 1.0)
                ys = _dense(y[:1], K[:, :1], h, np.array([theta]))
                eval_out.append((float(t_eval[eval_idx]), ys[0].copy()))
                eval_idx += 1

        if excess_fn is not None:
            exc, _ = excess_fn(y1)
            crossed = exc > 0.0
            if np.any(crossed):
                sub = np.flatnonzero(crossed)
                th, yc, fc = _locate_crossing(y[sub], K[:, sub], h, excess_fn)
                idx = active[sub]
                code[idx] = EXITED
                face[idx] = fc
                y_fin[idx] = yc
                t_now[idx] = t + th * h
                keep = ~crossed
                active = active[keep]
                y1 = y1[keep]
                K = K[:, keep]

        if norm_cap is not None and active.size:
            probe = y1 if cap_cols is None else y1[:, cap_cols]
            big = np.max(np.abs(probe), axis=-1) > norm_cap
            if np.any(big):
                idx = active[big]
                code[idx] = BLOWN
                y_fin[idx] = y1[big]
                t_now[idx] = t_new
                keep = ~big
                active = active[keep]
                y1 = y1[keep]
                K = K[:, keep]

        t = t_new
        y = y1
        if active.size == 0:
            break
        if record:
            snap = y_fin.copy()
            snap[active] = y
            recording.append((t, snap))
        if clipped:
            y_fin[active] = y
            break

        k1 = K[6]  # FSAL, rows already compacted alongside y1
        h = min(ctrl.next_h(err, h, accepted=True), max_step)
    else:
        raise IntegrationError("exceeded maximum step count")

    return y_fin, t_now, code, face, eval_out, recording, worst


def _split_excess(domain, n, m):
    if domain is None:
        return None

    def check(y):
        return domain.boundary_excess(y[..., :n], y[..., n: n + m])

    return check


def integrate(field: SplitVectorField, x0: Point, t_end, tol,
              domain: BoxDomain = None, t_eval=None, max_step=np.inf):
    """Integrate one trajectory of the split system.

    Parameters
    ----------
    field : SplitVectorField
    x0 : Point
    t_end : float
        Horizon; a negative value runs the time-reversed field for |t_end|.
    tol : float
        Local error tolerance (used as both absolute and relative).
    domain : BoxDomain, optional
        When given, stop at the first boundary crossing and report it.
    t_eval : array, optional
        Times in [0, |t_end|] to sample via dense output; default is the
        accepted step times.

    Returns
    -------
    Trajectory
    """
    if x0.n != field.n or x0.m != field.m:
        raise ConfigError("initial point does not match field dimensions")
    direction = 1
    if t_end < 0:
        field = field.reversed()
        t_end = -t_end
        direction = -1

    record = t_eval is None
    y_fin, t_now, code, face, eval_out, recording, worst = _drive(
        field.rhs_state, x0.as_state()[None, :], t_end, tol,
        excess_fn=_split_excess(domain, field.n, field.m),
        record=record, t_eval=t_eval, max_step=max_step)

    if code[0] == EXITED:
        exit_event = (float(t_now[0]), domain.face_labels[face[0]])
        t_stop = t_now[0]
    else:
        exit_event = None
        t_stop = t_end

    if record:
        ts = np.array([s[0] for s in recording])
        ys = np.stack([s[1][0] for s in recording])
        keep = ts <= t_stop + 1e-15
        ts, ys = ts[keep], ys[keep]
        if exit_event is not None and ts[-1] < t_stop:
            ts = np.append(ts, t_stop)
            ys = np.vstack([ys, y_fin[0][None, :]])
    else:
        pairs = [(tv, yv) for tv, yv in eval_out if tv <= t_stop + 1e-15]
        if not pairs:
            pairs = [(0.0, x0.as_state())]
        ts = np.array([p[0] for p in pairs])
        ys = np.stack([p[1] for p in pairs])

    n = field.n
    return Trajectory(times=ts, a=ys[:, :n], z=ys[:, n:], exit_event=exit_event,
                      direction=direction, error_estimate=worst * tol)


def integrate_batch(field: SplitVectorField, a0, z0, t_end, tol,
                    domain: BoxDomain = None, norm_cap=None, record=False,
                    max_step=np.inf):
    """Advance a block of initial states in lockstep.

    a0, z0 are (B, n) and (B, m).  All members share one adaptive step
    sized by the worst active member; a member that crosses the domain
    boundary (or, with norm_cap set, escapes in sup norm) freezes at its
    crossing state and time while the rest continue.  Negative t_end runs
    the reversed field; reported times are the reversed-run clock.
    """
    a0 = np.atleast_2d(np.asarray(a0, dtype=float))
    z0 = np.atleast_2d(np.asarray(z0, dtype=float))
    if a0.shape[0] != z0.shape[0]:
        raise ConfigError("a0 and z0 batch sizes differ")
    if a0.shape[1] != field.n or z0.shape[1] != field.m:
        raise ConfigError("batch blocks do not match field dimensions")
    if t_end < 0:
        field = field.reversed()
        t_end = -t_end

    y0 = np.concatenate([a0, z0], axis=1)
    y_fin, t_now, code, face, _, recording, _ = _drive(
        field.rhs_state, y0, t_end, tol,
        excess_fn=_split_excess(domain, field.n, field.m),
        norm_cap=norm_cap, record=record, max_step=max_step)

    n = field.n
    rec_t = rec_y = None
    if record:
        rec_t = np.array([s[0] for s in recording])
        rec_y = np.stack([s[1] for s in recording])
    return BatchResult(a=y_fin[:, :n], z=y_fin[:, n:], t_reached=t_now,
                       code=code, face_idx=face, rec_times=rec_t,
                       rec_states=rec_y)


def variational(field: SplitVectorField, x0: Point, t_end, tol):
    """Trajectory plus cocycle: co-integrate dQ/dt = DF(x(t)) Q, Q(0) = I.

    The cocycle composes along the flow: Q(tau + t, x) =
    Q(tau, flow(t, x)) Q(t, x).  Negative t_end differentiates the
    reversed flow.
    """
    if x0.n != field.n or x0.m != field.m:
        raise ConfigError("initial point does not match field dimensions")
    if t_end < 0:
        field = field.reversed()
        t_end = -t_end
    d = field.n + field.m

    def fun(y):
        x = y[..., :d]
        Q = y[..., d:].reshape(y.shape[:-1] + (d, d))
        dx = field.rhs_state(x)
        J = field.full_jacobian(x[..., : field.n], x[..., field.n:])
        dQ = J @ Q
        return np.concatenate([dx, dQ.reshape(y.shape[:-1] + (d * d,))],
                              axis=-1)

    y0 = np.concatenate([x0.as_state(), np.eye(d).reshape(-1)])
    _, _, _, _, _, recording, _ = _drive(fun, y0[None, :], t_end, tol,
                                         record=True)
    ts = np.array([s[0] for s in recording])
    ys = np.stack([s[1][0] for s in recording])
    Q = ys[:, d:].reshape(len(ts), d, d)
    return VariationalPath(times=ts, a=ys[:, : field.n],
                           z=ys[:, field.n: d], Q=Q)


def cocycle_probe(field: SplitVectorField, x: Point, tau, t, tol):
    """Relative defect of the cocycle composition identity at one split.

    Compares Q(tau + t, x) against Q(tau, flow(t, x)) Q(t, x); the defect
    is normalized by max(1, ||Q(tau + t, x)||) so expanding systems are
    judged on matching digits, not absolute entries.
    """
    leg1 = variational(field, x, t, tol)
    leg2 = variational(field, leg1.end(), tau, tol)
    direct = variational(field, x, tau + t, tol)
    composed = leg2.Q[-1] @ leg1.Q[-1]
    ref = np.linalg.norm(direct.Q[-1], 2)
    return float(np.linalg.norm(direct.Q[-1] - composed, 2) / max(1.0, ref))
