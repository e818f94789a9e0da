"""Matrix-product-state simulation of one nonlinear resonance emitting into
a discretized waveguide.

Time step ``j`` applies the resonator gate, a beamsplitter of angle
``theta = gamma sqrt(dt / v)`` between the resonator and waveguide bin ``j``
and then swaps the two, so every gate is nearest-neighbour. The resonator
starts on site 0 and ends on the last site; bin ``j`` ends on site ``j``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core_linalg import matrix_exp
from .errors import NumericError, PreconditionError
from .gaussian_state import BogoliubovPropagator, state_from_propagator
from .propagator import generator

SATURATION = 1e-6
Coef = Union[complex, Callable[[float], complex]]


def ladder(c: int) -> np.ndarray:
    """Truncated annihilation operator."""
    return np.diag(np.sqrt(np.arange(1, c, dtype=float)), 1).astype(complex)


@dataclass
class MPSState:
    """Site tensors of shape ``(D_left, c, D_right)``."""

    tensors: list
    cutoff: int
    eps: float = 1e-10
    D_max: int = 32
    discarded: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    @property
    def sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @classmethod
    def product(cls, vectors: Sequence[np.ndarray], **kw) -> "MPSState":
        c = len(vectors[0])
        return cls([np.asarray(v, dtype=complex).reshape(1, c, 1) for v in vectors], c, **kw)

    def norm_squared(self) -> float:
        E = np.ones((1, 1), dtype=complex)
        for A in self.tensors:
            E = np.einsum("ab,asc,bsd->cd", E, A.conj(), A)
        return float(np.real(E[0, 0]))

    def total_discarded(self) -> float:
        return float(sum(self.discarded))

    def to_dense(self) -> np.ndarray:
        if self.cutoff ** self.sites > 2**22:
            raise PreconditionError("state too large for dense contraction")
        T = self.tensors[0]
        for A in self.tensors[1:]:
            T = np.tensordot(T, A, axes=(-1, 0))
        return T.reshape(T.shape[1:-1])


def _truncate(s: np.ndarray, eps: float, D_max: int) -> int:
    """Number of singular values kept."""
    w = s**2
    total = float(w.sum())
    if total == 0.0:
        return 1
    tail = np.cumsum(w[::-1])[::-1]  # tail[k] = weight of s[k:]
    keep = s.size
    for k in range(1, s.size):
        if tail[k] <= eps * total:
            keep = k
            break
    return max(1, min(keep, D_max))


def tensor_to_mps(T, eps: float = 0.0) -> MPSState:
    """Sequential SVD sweep; recontraction error at most ``eps ||T||``."""
    T = np.asarray(T, dtype=complex)
    if T.ndim < 1 or T.size > 2**20:
        raise PreconditionError("tensor_to_mps expects a dense tensor with at most 2^20 entries")
    dims = T.shape
    if len(set(dims)) != 1:
        raise PreconditionError("all sites must share one physical dimension")
    L = T.ndim
    norm = float(np.linalg.norm(T))
    budget = (eps * norm) ** 2 / max(L - 1, 1)
    tensors = []
    rest = T.reshape(1, -1)
    for k in range(L - 1):
        Dl = rest.shape[0]
        mat = rest.reshape(Dl * dims[k], -1)
        U, s, Vh = np.linalg.svd(mat, full_matrices=False)
        rank = int(np.sum(s > 1e-14 * max(s[0], 1e-300))) if s.size else 0
        keep = max(rank, 1)
        while keep > 1 and float(np.sum(s[keep - 1:] ** 2)) <= budget:
            keep -= 1
        tensors.append(U[:, :keep].reshape(Dl, dims[k], keep))
        rest = s[:keep, None] * Vh[:keep]
    tensors.append(rest.reshape(rest.shape[0], dims[-1], 1))
    return MPSState(tensors, dims[0], eps=eps)


@dataclass(frozen=True)
class CavityWaveguideModel:
    """Resonator parameters, waveguide discretization and Fock cutoff.

    ``h_nl`` is a tuple of ``(coef, p, q)`` meaning ``coef(t) a^dag^p a^q``
    (units of frequency, hbar = 1); the sum must be Hermitian.
    """

    delta: float
    gamma: float
    v: float
    dt: float
    n_bins: int
    cutoff: int = 8
    h_nl: tuple = ()
    t0: float = 0.0
    D_max: int = 32
    eps: float = 1e-10
    initial_photons: int = 0
    weight_budget: float = 1e-6
    saturation: float = SATURATION

    @property
    def theta(self) -> float:
        return self.gamma * np.sqrt(self.dt / self.v)

    @property
    def decay_rate(self) -> float:
        return self.gamma**2 / (2 * self.v)

    def check(self) -> None:
        if self.v <= 0 or self.dt <= 0 or self.n_bins < 1 or self.cutoff < 2:
            raise PreconditionError("model needs v > 0, dt > 0, n_bins >= 1 and cutoff >= 2")
        if self.gamma < 0 or self.D_max < 1 or self.eps < 0:
            raise PreconditionError("model needs gamma >= 0, D_max >= 1 and eps >= 0")
        if self.theta > 0.5:
            raise PreconditionError(f"per-step beamsplitter angle {self.theta:.3g} is not small")
        if not 0 <= self.initial_photons < self.cutoff:
            raise PreconditionError("initial resonator photon number must be below the cutoff")
        for term in self.h_nl:
            if len(term) != 3 or term[1] < 0 or term[2] < 0:
                raise PreconditionError(f"bad H_NL term {term!r}; expected (coef, p, q)")
        H = self.resonator_hamiltonian(self.t0)
        if np.linalg.norm(H - H.conj().T) > 1e-12 * max(1.0, np.linalg.norm(H)):
            raise PreconditionError("resonator Hamiltonian is not Hermitian")

    @property
    def degree(self) -> int:
        return max((p + q for _, p, q in self.h_nl), default=0)

    def coef(self, term, t: float) -> complex:
        c = term[0]
        return complex(c(t)) if callable(c) else complex(c)

    def resonator_hamiltonian(self, t: float) -> np.ndarray:
        a = ladder(self.cutoff)
        ad = a.conj().T
        H = self.delta * ad @ a
        for term in self.h_nl:
            _, p, q = term
            H = H + self.coef(term, t) * np.linalg.matrix_power(ad, p) @ np.linalg.matrix_power(a, q)
        return H


def _beamsplitter_swap(c: int, theta: float) -> np.ndarray:
    """SWAP . exp(i theta (psi^dag a + a^dag psi)) in basis (res, bin) -> (bin, res)."""
    a = ladder(c)
    ident = np.eye(c)
    A = np.kron(a, ident)  # resonator
    P = np.kron(ident, a)  # bin
    B = matrix_exp(1j * theta * (P.conj().T @ A + A.conj().T @ P))
    swap = np.zeros((c * c, c * c))
    for i in range(c):
        for j in range(c):
            swap[j * c + i, i * c + j] = 1.0
    return swap @ B


def simulate_cavity_mps(model: CavityWaveguideModel) -> MPSState:
    model.check()
    c, n = model.cutoff, model.n_bins
    start = np.zeros(c)
    start[model.initial_photons] = 1.0
    vac = np.zeros(c)
    vac[0] = 1.0
    mps = MPSState.product([start] + [vac] * n, eps=model.eps, D_max=model.D_max)
    gate = _beamsplitter_swap(c, model.theta)
    num = np.arange(c)
    for j in range(n):
        t = model.t0 + j * model.dt
        V = matrix_exp(-1j * model.dt * model.resonator_hamiltonian(t))
        A = np.einsum("ab,lbr->lar", V, mps.tensors[j])
        B = mps.tensors[j + 1]
        Dl = A.shape[0]
        th = np.einsum("lar,rbs->lab", A, B).reshape(Dl, c * c)
        th = (th @ gate.T).reshape(Dl, c, c)  # (left, bin, resonator)
        p_bin = np.sum(np.abs(th) ** 2, axis=(0, 2))
        p_res = np.sum(np.abs(th) ** 2, axis=(0, 1))
        U, s, Vh = np.linalg.svd(th.reshape(Dl * c, c), full_matrices=False)
        keep = _truncate(s, model.eps, model.D_max)
        w = float(np.sum(s[keep:] ** 2))
        mps.tensors[j] = U[:, :keep].reshape(Dl, c, keep)
        mps.tensors[j + 1] = (s[:keep, None] * Vh[:keep]).reshape(keep, c, 1)
        mps.discarded.append(w)
        tot = max(float(p_res.sum()), 1e-300)
        mps.trace.append({"step": j, "t": t, "n_resonator": float(num @ p_res / tot),
                          "n_bin": float(num @ p_bin / tot), "bond": keep, "discarded": w,
                          "top_level": float(max(p_res[-1], p_bin[-1]) / tot)})
        top = mps.trace[-1]["top_level"]
        if top > model.saturation:
            raise NumericError(f"Fock cutoff {c} saturated at step {j}: top-level population {top:.2e}")
    if mps.total_discarded() > model.weight_budget:
        worst = sorted(((r["discarded"], r["step"]) for r in mps.trace), reverse=True)[:5]
        warnings.warn(f"discarded weight {mps.total_discarded():.3e} exceeds budget "
                      f"{model.weight_budget:.1e}; largest (weight, step): {worst}", RuntimeWarning)
    return mps


# ---------------------------------------------------------------- expectations

def _transfer(E, A, O=None):
    tmp = np.tensordot(E, A.conj(), axes=(0, 0))  # (b, t, c)
    if O is not None:
        A = np.einsum("ts,bsd->btd", O, A)
    return np.tensordot(tmp, A, axes=((0, 1), (0, 1)))


def _envs(mps: MPSState):
    L = [np.ones((1, 1), dtype=complex)]
    for A in mps.tensors:
        L.append(_transfer(L[-1], A))
    R = [np.ones((1, 1), dtype=complex)]
    for A in reversed(mps.tensors):
        R.append(np.einsum("asc,bsd,cd->ab", A.conj(), A, R[-1]))
    return L, R[::-1]


def mps_expectation(mps: MPSState, op, site: int) -> complex:
    """``<psi| O |psi>`` for a one-site (c x c) or two-site (c^2 x c^2) operator."""
    op = np.asarray(op, dtype=complex)
    c = mps.cutoff
    two = op.shape == (c * c, c * c)
    if op.shape != (c, c) and not two:
        raise PreconditionError(f"operator shape {op.shape} does not match cutoff {c}")
    last = mps.sites - (2 if two else 1)
    if not 0 <= site <= last:
        raise PreconditionError(f"site {site} out of range 0..{last}")
    E = np.ones((1, 1), dtype=complex)
    for A in mps.tensors[:site]:
        E = _transfer(E, A)
    if two:
        A, B = mps.tensors[site], mps.tensors[site + 1]
        th = np.einsum("lar,rbs->labs", A, B)
        Dl, Dr = th.shape[0], th.shape[3]
        oth = (op @ th.transpose(1, 2, 0, 3).reshape(c * c, -1)).reshape(c, c, Dl, Dr).transpose(2, 0, 1, 3)
        E = np.einsum("ab,astc,bstd->cd", E, th.conj(), oth)
        rest = mps.tensors[site + 2:]
    else:
        E = _transfer(E, mps.tensors[site], op)
        rest = mps.tensors[site + 1:]
    for A in rest:
        E = _transfer(E, A)
    return complex(E[0, 0])


def occupations(mps: MPSState) -> np.ndarray:
    L, R = _envs(mps)
    num = np.diag(np.arange(mps.cutoff)).astype(complex)
    return np.array([np.real(np.einsum("ab,atc,ts,bsd,cd->", L[k], A.conj(), num, A, R[k + 1]))
                     for k, A in enumerate(mps.tensors)])


def pairings(mps: MPSState) -> np.ndarray:
    """``<a_i a_j>`` for all site pairs."""
    L, R = _envs(mps)
    a = ladder(mps.cutoff)
    n = mps.sites
    out = np.zeros((n, n), dtype=complex)
    close = lambda E, k: complex(np.einsum("cd,cd->", E, R[k + 1]))
    for i in range(n):
        out[i, i] = close(_transfer(L[i], mps.tensors[i], a @ a), i)
        E = _transfer(L[i], mps.tensors[i], a)
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = close(_transfer(E, mps.tensors[j], a), j)
            E = _transfer(E, mps.tensors[j])
    return out


# ---------------------------------------------------------------- Gaussian check

def gaussian_sites_propagator(model: CavityWaveguideModel) -> BogoliubovPropagator:
    """Bogoliubov propagator of the same gate sequence, in MPS site order."""
    if model.degree > 2:
        raise PreconditionError(f"Gaussian cross-check needs a quadratic H_NL (degree {model.degree})")
    for _, p, q in model.h_nl:
        if p + q == 1:
            raise PreconditionError("linear drive terms are not supported by the Bogoliubov check")
    n = model.n_bins + 1
    V = np.eye(n, dtype=complex)
    W = np.zeros((n, n), dtype=complex)
    th = model.theta
    bs = np.array([[np.cos(th), 1j * np.sin(th)], [1j * np.sin(th), np.cos(th)]])
    for j in range(model.n_bins):
        t = model.t0 + j * model.dt
        d, z = model.delta, 0j
        for term in model.h_nl:
            _, p, q = term
            if (p, q) == (1, 1):
                d += model.coef(term, t).real
            elif (p, q) == (2, 0):
                z += -2j * model.coef(term, t)
        K = matrix_exp(-1j * model.dt * generator(np.array([[d]]), np.array([[z]])))
        vg, wg = K[0, 0], K[0, 1]
        r = 0  # mode 0 is the resonator, modes 1.. are bins
        V[r], W[r] = vg * V[r] + wg * W[r].conj(), vg * W[r] + wg * V[r].conj()
        rows = [0, j + 1]
        V[rows], W[rows] = bs @ V[rows], bs @ W[rows]
    order = list(range(1, n)) + [0]
    return BogoliubovPropagator(V[order], W[order], model.t0, model.t0 + model.n_bins * model.dt)


@dataclass(frozen=True)
class CrosscheckReport:
    max_dev_n: float
    max_dev_m: float
    n_mps: np.ndarray
    n_gauss: np.ndarray
    m_mps: np.ndarray
    m_gauss: np.ndarray
    ok: bool

    @property
    def max_deviation(self) -> float:
        return max(self.max_dev_n, self.max_dev_m)


def gaussian_crosscheck(model: CavityWaveguideModel, tol: float = 1e-3, strict: bool = False,
                        mps: Optional[MPSState] = None) -> CrosscheckReport:
    """Compare per-site ``<n>`` and pairings with the Bogoliubov solution."""
    K = gaussian_sites_propagator(model)
    st = state_from_propagator(K)
    if mps is None:
        mps = simulate_cavity_mps(model)
    n_m, m_m = occupations(mps), pairings(mps)
    n_g, m_g = np.real(np.diag(st.N)), st.M
    dn, dm = float(np.max(np.abs(n_m - n_g))), float(np.max(np.abs(m_m - m_g)))
    rep = CrosscheckReport(dn, dm, n_m, n_g, m_m, m_g, max(dn, dm) <= tol)
    if strict and not rep.ok:
        raise NumericError(f"MPS and Gaussian results disagree: max |dn| {dn:.3e}, max |dm| {dm:.3e}\n"
                           f"n_mps   = {np.array2string(n_m, precision=6)}\n"
                           f"n_gauss = {np.array2string(n_g, precision=6)}")
    return rep
