"""Gaussian states described by their moments N, M and displacement beta.

Conventions: ``N[i, j] = <a_i^dag a_j>``, ``M[i, j] = <a_i a_j>`` and
quadratures ``q = (a + a^dag)/sqrt(2)``, ``p = -i (a - a^dag)/sqrt(2)``
so that the vacuum has quadrature variance 1/2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core_linalg import (
    CLAMP_RELATIVE,
    as_cmat,
    joint_bogoliubov_svd,
    matrix_exp,
    takagi_autonne,
    unitary_log,
    validate_symplectic,
)
from .errors import MixedStateError, PreconditionError

STATE_SCHEMA = "squeezesim.gaussian_state/1"


@dataclass(frozen=True)
class BogoliubovPropagator:
    """Heisenberg map ``a -> V a + W a^dag`` between times ``t_i`` and ``t_f``."""

    V: np.ndarray
    W: np.ndarray
    t_i: float = 0.0
    t_f: float = 0.0

    @property
    def modes(self) -> int:
        return self.V.shape[0]

    def residuals(self) -> tuple[float, float]:
        _, r1, r2 = validate_symplectic(self.V, self.W, np.inf)
        return r1, r2

    def is_symplectic(self, tol: float = 1e-8) -> bool:
        return max(self.residuals()) <= tol

    def block(self) -> np.ndarray:
        """The 2l x 2l matrix K acting on (a, a^dag)."""
        return np.block([[self.V, self.W], [self.W.conj(), self.V.conj()]])

    @staticmethod
    def identity(n: int, t: float = 0.0) -> "BogoliubovPropagator":
        return BogoliubovPropagator(np.eye(n, dtype=complex), np.zeros((n, n), complex), t, t)

    def to_dict(self) -> dict:
        return {"V": _enc(self.V), "W": _enc(self.W), "t_i": self.t_i, "t_f": self.t_f}


@dataclass(frozen=True)
class GaussianState:
    N: np.ndarray
    M: np.ndarray
    beta: np.ndarray
    labels: tuple = ()

    @property
    def mode_count(self) -> int:
        return self.N.shape[0]

    @staticmethod
    def vacuum(n: int, labels: Sequence = ()) -> "GaussianState":
        return GaussianState(np.zeros((n, n), complex), np.zeros((n, n), complex),
                             np.zeros(n, complex), tuple(labels))

    def quadrature_covariance(self) -> np.ndarray:
        """Symmetrized covariance of ``(q_1..q_l, p_1..p_l)``."""
        n = self.mode_count
        C = self._gram()
        R = np.block([[np.eye(n), np.eye(n)], [-1j * np.eye(n), 1j * np.eye(n)]]) / np.sqrt(2)
        return np.real(R @ C @ R.conj().T)

    def _gram(self) -> np.ndarray:
        # <z z^dag> for z = (a, a^dag) with the displacement removed
        n = self.mode_count
        return np.block([[np.eye(n) + self.N.T, self.M], [self.M.conj(), self.N]])

    def physicality(self) -> float:
        """Smallest eigenvalue of ``V + (i/2) Omega`` (non-negative if physical)."""
        n = self.mode_count
        Vq = self.quadrature_covariance()
        Om = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
        return float(np.min(np.linalg.eigvalsh(Vq + 0.5j * Om)))

    def check(self, tol: float = 1e-8) -> None:
        scale = max(1.0, float(np.linalg.norm(self.N)), float(np.linalg.norm(self.M)))
        if np.linalg.norm(self.N - self.N.conj().T) > tol * scale:
            raise PreconditionError("N is not Hermitian")
        if np.linalg.norm(self.M - self.M.T) > tol * scale:
            raise PreconditionError("M is not symmetric")
        lam = self.physicality()
        if lam < -tol * scale:
            raise PreconditionError(f"state violates the uncertainty relation (min eig {lam:.3e})")

    def total_photons(self) -> float:
        return float(np.real(np.trace(self.N)) + np.vdot(self.beta, self.beta).real)

    def to_dict(self) -> dict:
        return {
            "schema": STATE_SCHEMA,
            "mode_count": self.mode_count,
            "N": _enc(self.N),
            "M": _enc(self.M),
            "beta": [[float(z.real), float(z.imag)] for z in self.beta],
            "labels": [str(x) for x in self.labels],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_dict(d: dict) -> "GaussianState":
        if d.get("schema") != STATE_SCHEMA:
            raise PreconditionError(f"unsupported state schema {d.get('schema')!r}")
        beta = np.array([complex(a, b) for a, b in d["beta"]], dtype=complex)
        return GaussianState(_dec(d["N"]), _dec(d["M"]), beta, tuple(d.get("labels", ())))

    @staticmethod
    def from_json(s: str) -> "GaussianState":
        return GaussianState.from_dict(json.loads(s))


def _enc(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.atleast_2d(m)]


def _dec(rows) -> np.ndarray:
    return np.array([[complex(a, b) for a, b in row] for row in rows], dtype=complex)


@dataclass(frozen=True)
class SchmidtData:
    r: np.ndarray
    J: np.ndarray
    F: Optional[np.ndarray] = None
    F_b: Optional[np.ndarray] = None
    F_c: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)


def _require_symplectic(K: BogoliubovPropagator, tol: float) -> None:
    ok, r1, r2 = validate_symplectic(K.V, K.W, tol)
    if not ok:
        raise PreconditionError(f"propagator is not symplectic: residuals {r1:.3e}, {r2:.3e}")


def state_from_propagator(K: BogoliubovPropagator, tol: float = 1e-8,
                          labels: Sequence = ()) -> GaussianState:
    """Moments of ``U|vac>``: ``N = W^* W^T`` and ``M = W V^T``."""
    _require_symplectic(K, tol)
    N = K.W.conj() @ K.W.T
    M = K.W @ K.V.T
    return GaussianState(0.5 * (N + N.conj().T), 0.5 * (M + M.T),
                         np.zeros(K.modes, complex), tuple(labels))


def _asinh_r(s: np.ndarray) -> np.ndarray:
    return 0.5 * np.arcsinh(2.0 * np.asarray(s, dtype=float))


def degenerate_joint_amplitude(state: GaussianState, tol: float = 1e-6) -> SchmidtData:
    """Schmidt data of a pure single-beam squeezed state from its moments."""
    M = as_cmat(state.M, "M")
    tk = takagi_autonne(0.5 * (M + M.T), tol=1e-8)
    r = _asinh_r(tk.values)
    F = tk.F
    N_expect = (F.conj() * np.sinh(r) ** 2) @ F.T
    scale = max(1.0, float(np.linalg.norm(state.N)))
    res = float(np.linalg.norm(state.N - N_expect))
    if res > tol * scale:
        raise MixedStateError(
            f"mixed state: N differs from the pure-state prediction by {res:.3e} "
            f"(relative tolerance {tol:.1e})")
    return SchmidtData(r=r, J=(F * r) @ F.T, F=F)


def nondegenerate_joint_amplitude(M_bc) -> SchmidtData:
    """Schmidt data from the cross moment ``M_bc = F_b D F_c^T``."""
    M_bc = as_cmat(M_bc, "M_bc")
    U, d, Vh = np.linalg.svd(M_bc)
    if d.size and d[0] > 0:
        d = np.where(d < CLAMP_RELATIVE * d[0], 0.0, d)
    r = _asinh_r(d)
    F_b = U[:, : d.size]
    F_c = Vh[: d.size].T
    return SchmidtData(r=r, J=(F_b * r) @ F_c.T, F_b=F_b, F_c=F_c)


def propagator_from_takagi(F: np.ndarray, r: np.ndarray) -> BogoliubovPropagator:
    """Pure squeezer with ``V = F cosh(r) F^H`` and ``W = F sinh(r) F^T``."""
    V = (F * np.cosh(r)) @ F.conj().T
    W = (F * np.sinh(r)) @ F.T
    return BogoliubovPropagator(V, W)


def low_gain_state(J_bar) -> tuple[GaussianState, SchmidtData]:
    """State of the exponentiated first-order Magnus unitary for ``J_bar``."""
    J_bar = as_cmat(J_bar, "J_bar")
    tk = takagi_autonne(J_bar, tol=1e-10)
    K = propagator_from_takagi(tk.F, tk.values)
    state = state_from_propagator(K)
    return state, SchmidtData(r=tk.values, J=J_bar, F=tk.F)


def apply_loss(state: GaussianState, L=None, eta=None, tol: float = 1e-10) -> GaussianState:
    """Loss channel. Pass a transmission matrix ``L`` or a uniform ``eta``.

    ``eta`` may also be a per-mode vector, which is the diagonal ``L`` with
    amplitude transmissions ``sqrt(eta)``.
    """
    if (L is None) == (eta is None):
        raise PreconditionError("apply_loss takes exactly one of L or eta")
    if eta is not None:
        e = np.asarray(eta, dtype=float)
        if np.any(e < 0) or np.any(e > 1):
            raise PreconditionError(f"eta must lie in [0, 1], got {eta}")
        if e.ndim == 0:
            return GaussianState(float(e) * state.N, float(e) * state.M,
                                 np.sqrt(float(e)) * state.beta, state.labels)
        L = np.diag(np.sqrt(e))
    L = as_cmat(L, "L")
    sv = np.linalg.svd(L, compute_uv=False)
    if sv[0] > 1 + tol:
        raise PreconditionError(f"unphysical loss matrix: largest singular value {sv[0]:.6g} > 1")
    N = L.conj() @ state.N @ L.T
    M = L @ state.M @ L.T
    return GaussianState(0.5 * (N + N.conj().T), 0.5 * (M + M.T), L @ state.beta, state.labels)


def apply_passive(state: GaussianState, U, tol: float = 1e-10) -> GaussianState:
    """Passive linear optics ``a -> U a``."""
    U = as_cmat(U, "U")
    n = U.shape[0]
    dev = np.linalg.norm(U @ U.conj().T - np.eye(n))
    if dev > tol * max(1.0, np.sqrt(n)):
        raise PreconditionError(f"apply_passive needs a unitary; ||UU^H - I|| = {dev:.3e}")
    return apply_loss(state, L=U, tol=max(tol, 1e-9))


def seed_coherent(K: BogoliubovPropagator, alpha, tol: float = 1e-8) -> np.ndarray:
    """Output displacement ``V alpha + W alpha^*`` for a coherent seed."""
    _require_symplectic(K, tol)
    a = np.asarray(alpha, dtype=complex).reshape(-1)
    if a.size != K.modes:
        raise PreconditionError(f"alpha has {a.size} entries, propagator has {K.modes} modes")
    return K.V @ a + K.W @ a.conj()


def recover_passive_factor(F, G, tol: float = 1e-10) -> np.ndarray:
    """Hermitian ``phi = -i log(G^H F^H)`` of the vacuum-preserving factor.

    With ``U0 = exp(-i sum phi_jk a_j^dag a_k)`` following the squeezer built
    from ``(F, r)``, the product reproduces the propagator ``(V, W)``. The
    squeezer has ``V = F cosh(r) F^H``, hence ``F^H`` rather than ``F^*``.
    """
    F = as_cmat(F, "F")
    G = as_cmat(G, "G")
    for name, X in (("F", F), ("G", G)):
        dev = np.linalg.norm(X @ X.conj().T - np.eye(X.shape[0]))
        if dev > 1e-8:
            raise PreconditionError(f"{name} is not unitary (deviation {dev:.3e})")
    return unitary_log(G.conj().T @ F.conj().T, tol=max(tol, 1e-10))


def compose_passive(K_sq: BogoliubovPropagator, phi: np.ndarray) -> BogoliubovPropagator:
    """Propagator of ``U_sq U0`` where ``U0^dag a U0 = exp(-i phi) a``."""
    P = matrix_exp(-1j * np.asarray(phi, dtype=complex))
    return BogoliubovPropagator(K_sq.V @ P, K_sq.W @ P.conj(), K_sq.t_i, K_sq.t_f)


def decompose_propagator(K: BogoliubovPropagator, tol: float = 1e-8):
    """Return ``(F, r, phi)`` such that squeezer(F, r) followed by U0(phi) gives K."""
    F, G, r = joint_bogoliubov_svd(K.V, K.W, tol)
    return F, r, recover_passive_factor(F, G)
