"""Dense complex linear algebra used throughout the package.

Takagi-Autonne factorization, the joint SVD of a Bogoliubov pair (V, W),
symplectic residuals, a Pade matrix exponential and a Hermitian logarithm
of unitaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import schur

from .errors import NumericError, PreconditionError

CLAMP_RELATIVE = 1e-12


def as_cmat(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite complex 2-D array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.size == 0:
        raise PreconditionError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise PreconditionError(f"{name} has non-finite entries")
    return m


def _require_square(m: np.ndarray, name: str) -> None:
    if m.shape[0] != m.shape[1]:
        raise PreconditionError(f"{name} must be square, got shape {m.shape}")


def _scale(a: np.ndarray) -> float:
    return max(1.0, float(np.linalg.norm(a)))


@dataclass(frozen=True)
class TakagiResult:
    F: np.ndarray
    values: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.F * self.values) @ self.F.T


def _clusters(s: np.ndarray, rtol: float) -> list[tuple[int, int]]:
    # s is sorted descending; group runs of (near) equal values
    out = []
    start = 0
    smax = s[0] if s.size else 0.0
    for k in range(1, s.size + 1):
        if k == s.size or s[k - 1] - s[k] > rtol * max(smax, 1e-300):
            out.append((start, k))
            start = k
    return out


def _sqrt_normal(z: np.ndarray) -> np.ndarray:
    """Principal square root of a normal (here: symmetric unitary) matrix."""
    # complex Schur form of a normal matrix is diagonal
    T, q = schur(z, output="complex")
    return (q * np.sqrt(np.diag(T))) @ q.conj().T


def takagi_autonne(A, tol: float = 1e-10) -> TakagiResult:
    """Factor a complex symmetric matrix as ``A = F diag(r) F^T``.

    ``F`` is unitary and ``r`` is non-negative and sorted descending. The
    factor comes from an SVD ``A = U S V^H``; the unitary ``Z = V^H U^*``
    is block diagonal over clusters of equal singular values and symmetric
    inside each nonzero cluster, so ``F = U sqrt(Z)`` works cluster by cluster.
    """
    A = as_cmat(A, "A")
    _require_square(A, "A")
    scale = _scale(A)
    asym = np.linalg.norm(A - A.T)
    if asym > tol * scale:
        raise PreconditionError(f"takagi_autonne needs a symmetric input; ||A - A^T|| = {asym:.3e}")
    A = 0.5 * (A + A.T)
    U, s, Vh = np.linalg.svd(A)
    if s.size and s[0] > 0:
        s = np.where(s < CLAMP_RELATIVE * s[0], 0.0, s)
    Z = Vh @ U.conj()
    F = U.copy()
    for a, b in _clusters(s, 1e-9):
        if s[a] == 0.0:
            continue
        zc = Z[a:b, a:b]
        zc = 0.5 * (zc + zc.T)
        # re-unitarize the symmetrized block through its polar factor
        u, _, vh = np.linalg.svd(zc)
        zc = u @ vh
        F[:, a:b] = U[:, a:b] @ _sqrt_normal(zc)
    res = TakagiResult(F=F, values=s)
    err = np.linalg.norm(res.reconstruct() - A)
    if err > max(tol, 1e-9) * scale:
        raise NumericError(f"Takagi reconstruction failed, residual {err:.3e}")
    return res


def validate_symplectic(V, W, tol: float = 1e-8) -> tuple[bool, float, float]:
    """Return ``(ok, ||W V^T - V W^T||, ||V^* V^T - W^* W^T - I||)``.

    Norms are Frobenius norms.
    """
    V = as_cmat(V, "V")
    W = as_cmat(W, "W")
    _require_square(V, "V")
    if V.shape != W.shape:
        raise PreconditionError(f"V and W shapes differ: {V.shape} vs {W.shape}")
    r1 = float(np.linalg.norm(W @ V.T - V @ W.T))
    r2 = float(np.linalg.norm(V.conj() @ V.T - W.conj() @ W.T - np.eye(V.shape[0])))
    return (r1 <= tol and r2 <= tol), r1, r2


def joint_bogoliubov_svd(V, W, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Simultaneous decomposition ``V = F cosh(r) G``, ``W = F sinh(r) G^*``.

    ``F`` follows from the Takagi factorization of ``M = W V^T``, whose
    values are ``sinh(r) cosh(r)``; then ``G = cosh(r)^{-1} F^H V``.
    """
    V = as_cmat(V, "V")
    W = as_cmat(W, "W")
    ok, r1, r2 = validate_symplectic(V, W, tol)
    if not ok:
        raise PreconditionError(f"(V, W) is not symplectic: residuals {r1:.3e}, {r2:.3e}")
    M = W @ V.T
    M = 0.5 * (M + M.T)
    tk = takagi_autonne(M, tol=max(tol, 1e-10) * _scale(M))
    r = 0.5 * np.arcsinh(2.0 * tk.values)
    F = tk.F
    G = (F.conj().T @ V) / np.cosh(r)[:, None]
    scale = max(_scale(V), _scale(W))
    eV = np.linalg.norm((F * np.cosh(r)) @ G - V)
    eW = np.linalg.norm((F * np.sinh(r)) @ G.conj() - W)
    if max(eV, eW) > tol * scale:
        raise NumericError(f"joint SVD residuals too large: V {eV:.3e}, W {eW:.3e}")
    return F, G, r


# Pade coefficients and theta bounds for scaling and squaring (1-norm based)
_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
         960960.0, 16380.0, 182.0, 1.0),
}
_THETA = {3: 1.495585217958292e-2, 5: 2.539398330063230e-1, 7: 9.504178996162932e-1,
          9: 2.097847961257068e0, 13: 5.371920351148152e0}


def _pade_uv(A: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    b = _PADE[m]
    n = A.shape[0]
    ident = np.eye(n, dtype=A.dtype)
    A2 = A @ A
    if m != 13:
        powers = [ident, A2]
        for _ in range(2, m // 2 + 1):
            powers.append(powers[-1] @ A2)
        u = sum(b[2 * k + 1] * powers[k] for k in range(m // 2 + 1))
        v = sum(b[2 * k] * powers[k] for k in range(m // 2 + 1))
        return A @ u, v
    A4 = A2 @ A2
    A6 = A4 @ A2
    u = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    v = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    return u, v


def matrix_exp(A) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Pade core."""
    A = as_cmat(A, "A")
    _require_square(A, "A")
    norm1 = float(np.max(np.sum(np.abs(A), axis=0)))
    if norm1 == 0.0:
        return np.eye(A.shape[0], dtype=complex)
    for m in (3, 5, 7, 9):
        if norm1 <= _THETA[m]:
            u, v = _pade_uv(A, m)
            return np.linalg.solve(v - u, v + u)
    s = max(0, int(np.ceil(np.log2(norm1 / _THETA[13]))))
    u, v = _pade_uv(A / 2.0**s, 13)
    X = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        X = X @ X
    if not np.all(np.isfinite(X)):
        raise NumericError(f"matrix_exp overflow (1-norm of input {norm1:.3e})")
    return X


def unitary_log(U, tol: float = 1e-10) -> np.ndarray:
    """Hermitian ``phi`` with ``exp(i phi) = U``, principal branch."""
    U = as_cmat(U, "U")
    _require_square(U, "U")
    n = U.shape[0]
    dev = np.linalg.norm(U @ U.conj().T - np.eye(n))
    if dev > tol * max(1.0, np.sqrt(n)) * 100:
        raise PreconditionError(f"unitary_log needs a unitary input; ||UU^H - I|| = {dev:.3e}")
    T, Q = schur(U, output="complex")
    theta = np.angle(np.diag(T))
    phi = (Q * theta) @ Q.conj().T
    return 0.5 * (phi + phi.conj().T)
