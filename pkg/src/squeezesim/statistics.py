"""Measurable numbers from Gaussian states.

Photon-number moments use the Gaussian (Wick) factorization of fourth
moments, so everything here is valid for mixed states produced by loss.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import PreconditionError
from .gaussian_state import GaussianState, apply_loss

HBAR = 1.054571817e-34
STRUCTURE_TOL = 1e-9


@dataclass(frozen=True)
class PhotonMoments:
    mean: np.ndarray
    variance: np.ndarray
    covariance: np.ndarray
    total_mean: float
    total_variance: float


def _require_undisplaced(state: GaussianState) -> None:
    if np.max(np.abs(state.beta), initial=0.0) > 0:
        raise PreconditionError("photon statistics formulas assume a zero-mean state (beta = 0)")


def photon_number_moments(state: GaussianState) -> PhotonMoments:
    """Means, variances and covariances of the mode photon numbers."""
    _require_undisplaced(state)
    N, M = state.N, state.M
    n = np.real(np.diag(N))
    cov = np.abs(M) ** 2 + np.abs(N) ** 2
    np.fill_diagonal(cov, np.abs(np.diag(M)) ** 2 + n * (n + 1.0))
    return PhotonMoments(mean=n, variance=np.diag(cov).copy(), covariance=cov,
                         total_mean=float(n.sum()), total_variance=float(cov.sum()))


@dataclass(frozen=True)
class SchmidtStatistics:
    mean: float
    variance: float
    K: float
    vacuum: bool


def schmidt_statistics(r) -> SchmidtStatistics:
    """Total photon statistics and Schmidt number from squeezing parameters."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 0):
        raise PreconditionError("squeezing parameters must be non-negative")
    n = np.sinh(r) ** 2
    s4 = float(np.sum(n**2))
    if s4 == 0.0:
        return SchmidtStatistics(0.0, 0.0, 1.0, True)
    return SchmidtStatistics(float(n.sum()), float(np.sum(2 * n * (1 + n))),
                             float(n.sum() ** 2 / s4), False)


Partition = Union[int, tuple]


def _split(state: GaussianState, partition: Partition) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays of the b and c beams.

    ``partition`` is either the size of the b beam (first modes) or a pair of
    index sequences / label sequences.
    """
    n = state.mode_count
    if isinstance(partition, (int, np.integer)):
        ib, ic = np.arange(int(partition)), np.arange(int(partition), n)
    else:
        pb, pc = partition
        lab = list(state.labels)
        idx = lambda seq: np.array([lab.index(x) if not isinstance(x, (int, np.integer)) else int(x)
                                    for x in seq], dtype=int)
        ib, ic = idx(pb), idx(pc)
    if ib.size == 0 or ic.size == 0 or np.intersect1d(ib, ic).size:
        raise PreconditionError("partition must split the modes into two non-empty disjoint beams")
    return ib, ic


def _check_nondegenerate(state: GaussianState, ib, ic) -> None:
    scale = max(1.0, float(np.max(np.abs(state.N))), float(np.max(np.abs(state.M))))
    leak = max(float(np.max(np.abs(state.N[np.ix_(ib, ic)]))),
               float(np.max(np.abs(state.M[np.ix_(ib, ib)]))),
               float(np.max(np.abs(state.M[np.ix_(ic, ic)]))))
    if leak > STRUCTURE_TOL * scale:
        raise PreconditionError(
            f"state is not of non-degenerate (twin-beam) form; cross/self-pairing leak {leak:.3e}")


def _normal_second(N, M, rows, cols) -> float:
    # sum over i in rows, j in cols of <a_i^dag a_j^dag a_j a_i>
    Nb = N[np.ix_(rows, cols)]
    return float(np.real(np.sum(np.real(np.diag(N)[rows])) * np.sum(np.real(np.diag(N)[cols])))
                 + np.sum(np.abs(Nb) ** 2) + np.sum(np.abs(M[np.ix_(rows, cols)]) ** 2))


@dataclass(frozen=True)
class Coherence:
    g2_b: float
    g2_c: float
    g11: float
    eta_b: float
    eta_c: float
    mean_b: float
    mean_c: float


def coherence_functions(state: GaussianState, partition: Partition) -> Coherence:
    """Beam-wise g2, cross-beam g11 and Klyshko efficiencies.

    The efficiency is ``<N_b> (g11 - g2_b)``; for a lossless twin beam
    ``g11 - g2 = 1/<N>`` so this is the transmission of beam b.
    """
    _require_undisplaced(state)
    ib, ic = _split(state, partition)
    _check_nondegenerate(state, ib, ic)
    N, M = state.N, state.M
    nb = float(np.sum(np.real(np.diag(N)[ib])))
    nc = float(np.sum(np.real(np.diag(N)[ic])))
    if nb <= 0 or nc <= 0:
        raise PreconditionError("coherence functions are undefined for an empty beam")
    g2b = _normal_second(N, M, ib, ib) / nb**2
    g2c = _normal_second(N, M, ic, ic) / nc**2
    g11 = _normal_second(N, M, ib, ic) / (nb * nc)
    return Coherence(g2b, g2c, g11, nb * (g11 - g2b), nc * (g11 - g2c), nb, nc)


def loss_invariance_check(state: GaussianState, eta_b: float, eta_c: float,
                          partition: Partition, tol: float = 1e-10) -> dict:
    """Apply per-beam loss and compare coherence functions before and after."""
    ib, ic = _split(state, partition)
    eta = np.ones(state.mode_count)
    eta[ib], eta[ic] = eta_b, eta_c
    before = coherence_functions(state, (ib, ic))
    after = coherence_functions(apply_loss(state, eta=eta), (ib, ic))
    dev = max(abs(before.g2_b - after.g2_b), abs(before.g2_c - after.g2_c), abs(before.g11 - after.g11))
    # lossless efficiency is 1 only for pure twin beams, so compare ratios
    rec_b = after.eta_b / before.eta_b
    rec_c = after.eta_c / before.eta_c
    return {"before": before, "after": after, "max_deviation": dev, "ok": dev <= tol,
            "recovered_eta_b": rec_b, "recovered_eta_c": rec_c}


@dataclass(frozen=True)
class HomodyneResult:
    variance: float
    minimum: float
    maximum: float
    phi_min: float


def homodyne_variance(state: GaussianState, alpha, phi: float = 0.0, tol: float = 1e-10) -> HomodyneResult:
    """Quadrature variance for local-oscillator mode ``alpha`` (vacuum = 1)."""
    alpha = np.asarray(alpha, dtype=complex).ravel()
    if alpha.size != state.mode_count:
        raise PreconditionError(f"LO has {alpha.size} entries for {state.mode_count} modes")
    if abs(np.linalg.norm(alpha) - 1.0) > tol:
        raise PreconditionError(f"LO vector must be normalized, |alpha| = {np.linalg.norm(alpha):.12f}")
    n = float(np.real(alpha @ state.N @ alpha.conj()))
    m = complex(alpha.conj() @ state.M @ alpha.conj())
    v = 1.0 + 2.0 * n + 2.0 * np.real(np.exp(2j * phi) * m)
    return HomodyneResult(float(v), 1.0 + 2.0 * n - 2.0 * abs(m), 1.0 + 2.0 * n + 2.0 * abs(m),
                          float((np.pi - np.angle(m)) / 2.0 % np.pi))


def vacuum_power_waveguide(omega_p: float, beta2: float, length: float) -> float:
    """``hbar w_P / (3 sqrt(2 pi |beta2| L))``; ``beta2`` in s^2/m at w_P/2."""
    if omega_p <= 0 or beta2 == 0 or length <= 0:
        raise PreconditionError("waveguide vacuum power needs w_P > 0, beta2 != 0 and L > 0")
    return HBAR * omega_p / (3.0 * np.sqrt(2.0 * np.pi * abs(beta2) * length))


def vacuum_power_ring(omega_f: float, q: float) -> float:
    """``hbar w_F^2 / (8 Q_F)``."""
    if omega_f <= 0 or q <= 0:
        raise PreconditionError("ring vacuum power needs w_F > 0 and Q > 0")
    return HBAR * omega_f**2 / (8.0 * q)


def vacuum_power(geometry: dict) -> float:
    """Dispatch on ``geometry['kind']`` (``waveguide`` or ``ring``)."""
    kind = geometry.get("kind")
    if kind == "waveguide":
        return vacuum_power_waveguide(geometry["omega_p"], geometry["beta2"], geometry["length"])
    if kind == "ring":
        return vacuum_power_ring(geometry["omega_f"], geometry["q"])
    raise PreconditionError(f"unknown geometry kind {kind!r}")
