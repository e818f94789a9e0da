"""Bogoliubov propagators of time-dependent quadratic Hamiltonians.

The Hamiltonian is ``H = sum Delta_ij a_i^dag a_j + (i/2) sum (zeta_kl a_k^dag a_l^dag - h.c.)``
(hbar = 1), so ``da/dt = -i Delta a + zeta a^dag``. Writing
``R = (a, a^dag)`` this is ``dR/dt = -i A R`` with

    A = [[Delta, i zeta], [i zeta^*, -Delta^*]]

and the propagator is the time-ordered product ``K = prod exp(-i dt A_j)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .core_linalg import matrix_exp, validate_symplectic
from .errors import NumericError, PreconditionError
from .gaussian_state import BogoliubovPropagator, state_from_propagator

HERMITIAN_TOL = 1e-12
STEP_NORM = 0.05


def _check_grid(times: np.ndarray) -> float:
    if times.ndim != 1 or times.size < 2:
        raise PreconditionError("time grid needs at least two samples")
    dt = np.diff(times)
    if np.any(dt <= 0):
        raise PreconditionError("time grid must be strictly increasing")
    h = float(dt.mean())
    if np.max(np.abs(dt - h)) > 1e-9 * max(abs(h), 1e-300) * times.size:
        raise PreconditionError("time grid must be uniform")
    return h


@dataclass(frozen=True)
class QuadraticHamiltonianTrajectory:
    """Samples of Delta(t) (Hermitian) and zeta(t) (symmetric) on a uniform grid.

    Optional ``delta_mid``/``zeta_mid`` hold exact midpoint samples; without
    them midpoints are linearly interpolated.
    """

    times: np.ndarray
    delta: np.ndarray
    zeta: np.ndarray
    delta_mid: Optional[np.ndarray] = None
    zeta_mid: Optional[np.ndarray] = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        d = np.asarray(self.delta, dtype=complex)
        z = np.asarray(self.zeta, dtype=complex)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "zeta", z)
        _check_grid(t)
        if d.ndim != 3 or d.shape != z.shape or d.shape[0] != t.size or d.shape[1] != d.shape[2]:
            raise PreconditionError(
                f"delta/zeta must have shape (n_t, l, l) matching the grid; got {d.shape}, {z.shape}")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(z))):
            raise PreconditionError("trajectory has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(d))), float(np.max(np.abs(z))))
        herm = float(np.max(np.abs(d - np.conj(np.swapaxes(d, 1, 2)))))
        sym = float(np.max(np.abs(z - np.swapaxes(z, 1, 2))))
        if herm > HERMITIAN_TOL * scale:
            raise PreconditionError(f"Delta is not Hermitian (max deviation {herm:.3e})")
        if sym > HERMITIAN_TOL * scale:
            raise PreconditionError(f"zeta is not symmetric (max deviation {sym:.3e})")
        for name in ("delta_mid", "zeta_mid"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=complex)
                if v.shape != (t.size - 1,) + d.shape[1:]:
                    raise PreconditionError(f"{name} has shape {v.shape}")
                object.__setattr__(self, name, v)

    @property
    def modes(self) -> int:
        return self.delta.shape[1]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @staticmethod
    def from_functions(delta_fn: Callable[[float], np.ndarray], zeta_fn: Callable[[float], np.ndarray],
                       t0: float, tf: float, steps: Optional[int] = None) -> "QuadraticHamiltonianTrajectory":
        """Sample callables on a grid. Without ``steps`` the grid obeys
        ``dt * max ||A|| <= 0.05``."""
        if steps is None:
            probe = np.linspace(t0, tf, 65)
            amax = max(float(np.linalg.norm(generator(np.atleast_2d(delta_fn(t)), np.atleast_2d(zeta_fn(t))), 2))
                       for t in probe)
            steps = max(1, int(np.ceil((tf - t0) * amax / STEP_NORM)))
        times = np.linspace(t0, tf, steps + 1)
        mids = 0.5 * (times[1:] + times[:-1])
        ev = lambda f, ts: np.array([np.atleast_2d(f(t)) for t in ts], dtype=complex)
        return QuadraticHamiltonianTrajectory(times, ev(delta_fn, times), ev(zeta_fn, times),
                                              ev(delta_fn, mids), ev(zeta_fn, mids))

    def midpoints(self) -> tuple[np.ndarray, np.ndarray]:
        d = self.delta_mid if self.delta_mid is not None else 0.5 * (self.delta[1:] + self.delta[:-1])
        z = self.zeta_mid if self.zeta_mid is not None else 0.5 * (self.zeta[1:] + self.zeta[:-1])
        return d, z


def generator(delta: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """Block matrix A with ``dR/dt = -i A R`` for ``R = (a, a^dag)``."""
    return np.block([[delta, 1j * zeta], [1j * zeta.conj(), -delta.conj()]])


def _blocks(K: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = K.shape[0] // 2
    V = 0.5 * (K[:n, :n] + K[n:, n:].conj())
    W = 0.5 * (K[:n, n:] + K[n:, :n].conj())
    return V, W


def _resymplectify(K: np.ndarray) -> np.ndarray:
    # K Z K^H = Z; X = Z K^H Z K = I for exact K, and K X^{-1/2} restores it to first order
    n = K.shape[0] // 2
    Z = np.diag(np.r_[np.ones(n), -np.ones(n)])
    X = Z @ K.conj().T @ Z @ K
    E = X - np.eye(2 * n)
    return K @ (np.eye(2 * n) - 0.5 * E + 0.375 * E @ E)


def trotter_propagate(traj: QuadraticHamiltonianTrajectory, midpoint: bool = True,
                      tol: float = 1e-8) -> BogoliubovPropagator:
    """Time-ordered product of short-time exponentials.

    ``midpoint=False`` samples the left end of each step, the literal
    product form; the default midpoint rule is second order.
    """
    if midpoint:
        dmid, zmid = traj.midpoints()
    else:
        dmid, zmid = traj.delta[:-1], traj.zeta[:-1]
    h = traj.dt
    K = np.eye(2 * traj.modes, dtype=complex)
    for d, z in zip(dmid, zmid):
        K = matrix_exp(-1j * h * generator(d, z)) @ K
        if not np.all(np.isfinite(K)):
            raise NumericError("propagator became non-finite")
    V, W = _blocks(K)
    _, r1, r2 = validate_symplectic(V, W, np.inf)
    if max(r1, r2) > 0.5 * tol:
        V, W = _blocks(_resymplectify(np.block([[V, W], [W.conj(), V.conj()]])))
        _, r1, r2 = validate_symplectic(V, W, np.inf)
        if max(r1, r2) > tol * max(1.0, float(np.linalg.norm(V)) ** 2):
            raise NumericError(f"symplectic drift {max(r1, r2):.3e} exceeds tolerance")
    return BogoliubovPropagator(V, W, float(traj.times[0]), float(traj.times[-1]))


def propagate_with_error(delta_fn, zeta_fn, t0: float, tf: float,
                         steps: Optional[int] = None) -> tuple[BogoliubovPropagator, float]:
    """Propagate with the default step rule and estimate the error by one
    step halving (max abs change of the moments N and M)."""
    coarse = QuadraticHamiltonianTrajectory.from_functions(delta_fn, zeta_fn, t0, tf, steps)
    n = coarse.times.size - 1
    fine = QuadraticHamiltonianTrajectory.from_functions(delta_fn, zeta_fn, t0, tf, 2 * n)
    Kc, Kf = trotter_propagate(coarse), trotter_propagate(fine)
    sc, sf = state_from_propagator(Kc), state_from_propagator(Kf)
    err = max(float(np.max(np.abs(sc.N - sf.N))), float(np.max(np.abs(sc.M - sf.M))))
    # second-order scheme: the fine result is off by about a third of the difference
    return Kf, err / 3.0


def compose(K2: BogoliubovPropagator, K1: BogoliubovPropagator) -> BogoliubovPropagator:
    """Propagator of K1 followed by K2."""
    if K1.modes != K2.modes:
        raise PreconditionError("cannot compose propagators of different sizes")
    V = K2.V @ K1.V + K2.W @ K1.W.conj()
    W = K2.V @ K1.W + K2.W @ K1.V.conj()
    return BogoliubovPropagator(V, W, K1.t_i, K2.t_f)


def invert_propagator(K: BogoliubovPropagator, tol: float = 1e-8) -> BogoliubovPropagator:
    """Inverse map: ``V -> V^H`` and ``W -> -W^T``."""
    ok, r1, r2 = validate_symplectic(K.V, K.W, tol)
    if not ok:
        raise PreconditionError(f"propagator is not symplectic: residuals {r1:.3e}, {r2:.3e}")
    return BogoliubovPropagator(K.V.conj().T, -K.W.T, K.t_f, K.t_i)


def magnus1_joint_amplitude(traj: QuadraticHamiltonianTrajectory, atol: float = 1e-14) -> np.ndarray:
    """First Magnus term ``J = int zeta dt`` (trapezoid rule).

    The trajectory must have ``Delta = 0``; use :func:`rotating_frame` first.
    """
    if np.max(np.abs(traj.delta)) > atol:
        raise PreconditionError("magnus1_joint_amplitude needs Delta = 0; apply rotating_frame first")
    J = np.trapezoid(traj.zeta, traj.times, axis=0)
    return 0.5 * (J + J.T)


def _frame_unitary(delta: np.ndarray, tau: float) -> np.ndarray:
    w, q = np.linalg.eigh(delta)
    return (q * np.exp(1j * w * tau)) @ q.conj().T


def rotating_frame(traj: QuadraticHamiltonianTrajectory, atol: float = 1e-12) -> QuadraticHamiltonianTrajectory:
    """Interaction picture with respect to a constant Delta.

    With ``U(t) = exp(i Delta (t - t0))`` the new pairing matrix is
    ``U zeta U^T``; the full propagator is ``free_propagator(Delta, T)``
    composed after the propagator of the returned trajectory.
    """
    d0 = traj.delta[0]
    if np.max(np.abs(traj.delta - d0)) > atol * max(1.0, float(np.max(np.abs(d0)))):
        raise PreconditionError("rotating_frame needs a time-independent Delta")
    if traj.delta_mid is not None and np.max(np.abs(traj.delta_mid - d0)) > atol * max(1.0, float(np.max(np.abs(d0)))):
        raise PreconditionError("rotating_frame needs a time-independent Delta")
    t0 = traj.times[0]

    def tilt(ts, zs):
        out = np.empty_like(zs)
        for k, (t, z) in enumerate(zip(ts, zs)):
            U = _frame_unitary(d0, t - t0)
            out[k] = U @ z @ U.T
        return out

    zeros = np.zeros_like(traj.delta)
    mids = 0.5 * (traj.times[1:] + traj.times[:-1])
    zmid = None if traj.zeta_mid is None else tilt(mids, traj.zeta_mid)
    dmid = None if traj.delta_mid is None else np.zeros_like(traj.delta_mid)
    return replace(traj, delta=zeros, zeta=tilt(traj.times, traj.zeta), delta_mid=dmid, zeta_mid=zmid)


def free_propagator(delta: np.ndarray, t0: float, tf: float) -> BogoliubovPropagator:
    """Passive rotation ``a -> exp(-i Delta (tf - t0)) a``."""
    delta = np.atleast_2d(np.asarray(delta, dtype=complex))
    V = _frame_unitary(delta, -(tf - t0))
    return BogoliubovPropagator(V, np.zeros_like(V), t0, tf)


def nondegenerate_embed(V_bb, W_bc, W_cb, V_cc) -> BogoliubovPropagator:
    """Embed two-beam blocks, ``b -> V_bb b + W_bc c^dag`` and
    ``c -> V_cc c + W_cb b^dag``, into a propagator over l_b + l_c modes."""
    V_bb, W_bc, W_cb, V_cc = (np.atleast_2d(np.asarray(x, dtype=complex)) for x in (V_bb, W_bc, W_cb, V_cc))
    lb, lc = V_bb.shape[0], V_cc.shape[0]
    if V_bb.shape != (lb, lb) or V_cc.shape != (lc, lc) or W_bc.shape != (lb, lc) or W_cb.shape != (lc, lb):
        raise PreconditionError(
            f"inconsistent block shapes {V_bb.shape}, {W_bc.shape}, {W_cb.shape}, {V_cc.shape}")
    V = np.zeros((lb + lc, lb + lc), complex)
    W = np.zeros_like(V)
    V[:lb, :lb] = V_bb
    V[lb:, lb:] = V_cc
    W[:lb, lb:] = W_bc
    W[lb:, :lb] = W_cb
    return BogoliubovPropagator(V, W)


@dataclass(frozen=True)
class NondegenerateTrajectory:
    """Two-beam Hamiltonian ``Delta_b b^dag b + Delta_c c^dag c + i (zeta_bc b^dag c^dag - h.c.)``."""

    times: np.ndarray
    delta_b: np.ndarray
    delta_c: np.ndarray
    zeta_bc: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        _check_grid(t)
        object.__setattr__(self, "times", t)
        for name in ("delta_b", "delta_c", "zeta_bc"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=complex))
        for name in ("delta_b", "delta_c"):
            d = getattr(self, name)
            if np.max(np.abs(d - np.conj(np.swapaxes(d, 1, 2)))) > HERMITIAN_TOL * max(1.0, np.max(np.abs(d))):
                raise PreconditionError(f"{name} is not Hermitian")


def trotter_propagate_nondegenerate(traj: NondegenerateTrajectory) -> BogoliubovPropagator:
    """Propagate ``(b, c^dag)`` with the reduced generator and embed the result.

    ``d/dt (b, c^dag) = [[-i Delta_b, zeta], [zeta^H, i Delta_c^*]] (b, c^dag)``.
    """
    lb = traj.delta_b.shape[1]
    h = float(traj.times[1] - traj.times[0])
    P = np.eye(lb + traj.delta_c.shape[1], dtype=complex)
    mid = lambda x: 0.5 * (x[1:] + x[:-1])
    for db, dc, z in zip(mid(traj.delta_b), mid(traj.delta_c), mid(traj.zeta_bc)):
        G = np.block([[-1j * db, z], [z.conj().T, 1j * dc.conj()]])
        P = matrix_exp(h * G) @ P
    K = nondegenerate_embed(P[:lb, :lb], P[:lb, lb:], P[lb:, :lb].conj(), P[lb:, lb:].conj())
    return replace(K, t_i=float(traj.times[0]), t_f=float(traj.times[-1]))
