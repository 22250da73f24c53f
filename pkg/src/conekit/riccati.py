"""Transport of graph-derivative candidates and the first tangent lift.

A candidate derivative V of an invariant graph a = h(z) rides the base
flow z' = g(h(z), z) and obeys the matrix equation

    V' = D_a f V - V D_z g - V D_a g V + D_z f

with all blocks evaluated at (h(z), z).  Integrated backward from V = 0
the flow forgets its terminal condition at the gap rate, so the value it
reaches approximates Dh at the start node.

Stacking v = vec(V) turns the same equation into a split system on
R^{nm} x K: after rescaling the base coordinate by sigma the drift

    f1(v, zeta) = (Im (x) D_a f - (D_z g)^T (x) In) v
                  - (Im (x) (V D_a g)) v + vec(D_z f),
    g1(v, zeta) = g(h(sigma zeta), sigma zeta) / sigma

inherits a positive gap whenever the base system clears the order-1
graph inequality, which is how derivative graphs are certified one
order at a time.
"""

from dataclasses import dataclass

import numpy as np

from .core import SplitVectorField
from .errors import ConfigError, RiccatiBlowup
from .hypotheses import _sym_rates
from .integrate import BLOWN, _drive

__all__ = [
    "MatrixPath",
    "RiccatiBatch",
    "riccati_integrate",
    "riccati_batch",
    "LiftedSystem",
    "lift_level1",
]


def _bvec(V):
    """Column-stack the trailing matrix axes: (..., n, m) -> (..., n*m)."""
    shape = V.shape
    return np.swapaxes(V, -1, -2).reshape(shape[:-2] + (shape[-1] * shape[-2],))


def _bunvec(v, n, m):
    """Inverse of _bvec: (..., n*m) -> (..., n, m)."""
    return np.swapaxes(v.reshape(v.shape[:-1] + (m, n)), -1, -2)


def _bkron(A, B):
    """Batched Kronecker product on the trailing two axes."""
    p, q = A.shape[-2:]
    r, s = B.shape[-2:]
    out = np.einsum("...ij,...kl->...ikjl", A, B)
    return out.reshape(out.shape[:-4] + (p * r, q * s))


def _blocks(field, h, Z):
    A = np.asarray(h(Z), dtype=float)
    return (A,
            field.d_af(A, Z), field.d_zf(A, Z),
            field.d_ag(A, Z), field.d_zg(A, Z))


def _matrix_rhs(daf, dzf, dag, dzg, V):
    return daf @ V - V @ dzg - V @ (dag @ V) + dzf


def _coupled_fun(field, h, sign=1.0):
    n, m = field.n, field.m

    def fun(y):
        Z = y[:, :m]
        V = _bunvec(y[:, m:], n, m)
        A, daf, dzf, dag, dzg = _blocks(field, h, Z)
        dz = field.g(A, Z)
        dV = _matrix_rhs(daf, dzf, dag, dzg, V)
        return sign * np.concatenate([dz, _bvec(dV)], axis=-1)

    return fun


@dataclass
class MatrixPath:
    """Matrix flow samples along one base trajectory.

    times increase from 0 regardless of direction; direction is -1 for
    backward runs.
    """

    times: np.ndarray
    z: np.ndarray
    V: np.ndarray
    direction: int

    def end(self):
        return self.V[-1]


@dataclass
class RiccatiBatch:
    z: np.ndarray
    V: np.ndarray
    t_reached: np.ndarray
    code: np.ndarray


def riccati_integrate(field, h, z0, V0, t_end, tol=1e-9, norm_cap=1e6):
    """Run the matrix flow from one node; negative t_end runs backward.

    h maps a (B, m) block of base coordinates to (B, n) graph heights.
    Escape past norm_cap (or a non-finite value) raises RiccatiBlowup
    with the last resolved time; the flow has finite-time escape in
    general, so the cap is part of the contract rather than a tuning
    knob.
    """
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    V0 = np.asarray(V0, dtype=float).reshape(field.n, field.m)
    direction = 1
    t_stop = float(t_end)
    if t_stop < 0:
        direction = -1
        t_stop = -t_stop
    fun = _coupled_fun(field, h, sign=float(direction))
    y0 = np.concatenate([z0, _bvec(V0)])[None, :]
    y_fin, t_now, code, _, _, rec, _ = _drive(
        fun, y0, t_stop, tol, norm_cap=float(norm_cap), record=True,
        cap_cols=slice(field.m, None))
    if code[0] == BLOWN:
        raise RiccatiBlowup(
            f"matrix flow escaped norm cap {norm_cap:g} near t={t_now[0]:.6g}"
            f" (direction {direction:+d})")
    times = np.array([t for t, _ in rec])
    ys = np.stack([y for _, y in rec])[:, 0, :]
    m = field.m
    return MatrixPath(times=times, z=ys[:, :m],
                      V=_bunvec(ys[:, m:], field.n, field.m),
                      direction=direction)


def riccati_batch(field, h, z0, V0, t_end, tol=1e-9, norm_cap=1e6):
    """Lockstep matrix flow from (B, m) nodes; blow-ups are flagged, not raised."""
    z0 = np.asarray(z0, dtype=float)
    V0 = np.asarray(V0, dtype=float)
    sign = 1.0 if t_end >= 0 else -1.0
    fun = _coupled_fun(field, h, sign=sign)
    y0 = np.concatenate([z0, _bvec(V0)], axis=-1)
    y_fin, t_now, code, _, _, _, _ = _drive(
        fun, y0, abs(float(t_end)), tol, norm_cap=float(norm_cap),
        cap_cols=slice(field.m, None))
    m = field.m
    return RiccatiBatch(z=y_fin[:, :m],
                        V=_bunvec(y_fin[:, m:], field.n, field.m),
                        t_reached=t_now, code=code)


@dataclass
class LiftedSystem:
    """Split system carrying derivative candidates over a rescaled base."""

    field1: SplitVectorField
    sigma1: float
    eta: float
    alpha1: object
    ell1: object
    base: object
    lip_estimate: float = None


def lift_level1(field, h0, sigma1=None, eta=1.0, cr=None, zeta_samples=None,
                v_samples=8, seed=0):
    """Build the tangent lift of `field` over the graph h0.

    With sigma1=None the rescaling is chosen from a sampled Lipschitz
    bound L1 of the unscaled drift so that sigma1 * L1 <= cr / 2 (with a
    25% safety factor, capped at 1); that rule needs cr and a
    zeta_samples lattice.  eta is the slope bound assumed for the
    candidate matrices and enters the lifted rate maps

        alpha1 = alpha - ell - 2 eta |D_a g|,   ell1 = ell + eta |D_a g|.
    """
    n, m = field.n, field.m
    nm = n * m

    def drift(v, zeta, scale):
        Z = scale * np.asarray(zeta, dtype=float)
        V = _bunvec(np.asarray(v, dtype=float), n, m)
        _, daf, dzf, dag, dzg = _blocks(field, h0, Z)
        return _bvec(_matrix_rhs(daf, dzf, dag, dzg, V))

    if sigma1 is None:
        if cr is None or zeta_samples is None:
            raise ConfigError(
                "the default rescaling rule needs cr and zeta_samples")
        zeta_samples = np.asarray(zeta_samples, dtype=float)
        if zeta_samples.ndim == 1:
            zeta_samples = zeta_samples[:, None]
        rng = np.random.default_rng(seed)
        vs = rng.standard_normal((int(v_samples), nm))
        norms = np.linalg.norm(_bunvec(vs, n, m), ord=2, axis=(-2, -1))
        vs = vs * (eta / np.maximum(norms, 1e-12))[:, None]
        vs = np.concatenate([np.zeros((1, nm)), vs], axis=0)
        step = 1e-5
        L1 = 0.0
        for v in vs:
            vb = np.broadcast_to(v, (len(zeta_samples), nm))
            jac = np.empty((len(zeta_samples), nm, m))
            for j in range(m):
                dz = np.zeros(m)
                dz[j] = step
                jac[:, :, j] = (drift(vb, zeta_samples + dz, 1.0)
                                - drift(vb, zeta_samples - dz, 1.0)) / (2 * step)
            L1 = max(L1, float(np.max(
                np.linalg.norm(jac, ord=2, axis=(-2, -1)))))
        if L1 <= 0:
            sigma1 = 1.0
        else:
            sigma1 = min(1.0, float(cr) / (2.0 * 1.25 * L1))
        lip = L1
    else:
        lip = None
    sigma1 = float(sigma1)
    if not sigma1 > 0:
        raise ConfigError("sigma1 must be positive")

    def f1(v, zeta):
        return drift(v, zeta, sigma1)

    def g1(v, zeta):
        Z = sigma1 * np.asarray(zeta, dtype=float)
        A = np.asarray(h0(Z), dtype=float)
        return field.g(A, Z) / sigma1

    def jac_vv(v, zeta):
        Z = sigma1 * np.asarray(zeta, dtype=float)
        V = _bunvec(np.asarray(v, dtype=float), n, m)
        _, daf, _, dag, dzg = _blocks(field, h0, Z)
        eye_m = np.broadcast_to(np.eye(m), dzg.shape)
        eye_n = np.broadcast_to(np.eye(n), daf.shape)
        return (_bkron(eye_m, daf)
                - _bkron(np.swapaxes(dzg, -1, -2), eye_n)
                - _bkron(eye_m, V @ dag)
                - _bkron(np.swapaxes(dag @ V, -1, -2), eye_n))

    field1 = SplitVectorField(nm, m, f1, g1, jac_aa=jac_vv,
                              name=(field.name + "+lift") if field.name
                              else "lift")

    def base(zeta):
        Z = sigma1 * np.asarray(zeta, dtype=float)
        return np.asarray(h0(Z), dtype=float), Z

    def alpha1(zeta):
        A, Z = base(zeta)
        alpha, ell, _, dag = _sym_rates(field, A, Z)
        return alpha - ell - 2.0 * eta * dag

    def ell1(zeta):
        A, Z = base(zeta)
        _, ell, _, dag = _sym_rates(field, A, Z)
        return ell + eta * dag

    return LiftedSystem(field1=field1, sigma1=sigma1, eta=float(eta),
                        alpha1=alpha1, ell1=ell1, base=base,
                        lip_estimate=lip)
