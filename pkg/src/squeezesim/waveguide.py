"""Squeezing in nonlinear waveguides.

Fields are expanded on a discrete wavevector grid ``kappa_j = j dk`` around
each band's carrier, with modes ``a_j = sqrt(dk) b(kappa_j)``. The
coupled operator equations then read ``d/dt (a_1, a_2^dag) = i A (a_1,
a_2^dag)`` with

    A = [[Delta_1, zeta], [-zeta^*, -Delta_2^*]]
    Delta_J = -omega_J(kappa) delta + 2 (dk / sqrt(2 pi)) M_J(kappa_j - kappa_j')
    zeta    = (dk / sqrt(2 pi)) S(kappa_j + kappa_j')

where ``S`` and ``M`` are the spatial Fourier transforms of the pump-dressed
couplings. Everything runs in a frame moving with a reference velocity
(the pump's by default), which only subtracts ``v_ref kappa`` from every
dispersion relation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import erfi

from .errors import PreconditionError, NumericError
from .gaussian_state import (BogoliubovPropagator, GaussianState, SchmidtData,
                             nondegenerate_joint_amplitude, state_from_propagator)
from .propagator import nondegenerate_embed
from .statistics import HBAR, schmidt_statistics

KINDS = ("SPDC-DSV", "SPDC-NDSV", "SFWM-SP-DSV", "SFWM-SP-NDSV", "SFWM-DP-DSV", "SFWM-DP-NDSV")
S_GAUSSIAN = 0.193
SQRT2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class Band:
    """Carrier frequency, group velocity, GVD ``v'`` and attenuation rate."""

    omega: float
    v: float
    v2: float = 0.0
    rho: float = 0.0

    def dispersion(self, kappa: np.ndarray) -> np.ndarray:
        return self.v * kappa + 0.5 * self.v2 * kappa**2


@dataclass(frozen=True)
class PumpPulse:
    """Gaussian pump ``A exp(-(x - x_c - v t)^2 / (4 tau^2 v^2))`` with
    ``int |psi|^2 dx = n_photons``; ``tau`` is the temporal width used for
    the spectrum ``exp(-tau^2 (omega - omega_P)^2)``."""

    band: str
    tau: float
    n_photons: float
    center: float = 0.0

    def envelope(self, x: np.ndarray, t: float, v: float) -> np.ndarray:
        amp = np.sqrt(self.n_photons / (SQRT2PI * self.tau * v))
        return amp * np.exp(-((x - self.center - v * t) ** 2) / (4.0 * self.tau**2 * v**2)) + 0j


# required generation coefficient and the bands each kind needs
_REQUIRED = {
    "SPDC-DSV": ("SSP", ("P", "S")),
    "SPDC-NDSV": ("SIP", ("P", "S", "I")),
    "SFWM-SP-DSV": ("PPPP", ("P",)),
    "SFWM-SP-NDSV": ("SIPP", ("P", "S", "I")),
    "SFWM-DP-DSV": ("SSP1P2", ("P1", "P2", "S")),
    "SFWM-DP-NDSV": ("SIP1P2", ("P1", "P2", "S", "I")),
}


@dataclass(frozen=True)
class WaveguideProcess:
    """One of the six waveguide processes.

    ``coefficients`` holds the channel couplings keyed by band labels, for
    example ``SIPP``, ``PPPP``, ``PSPS`` or ``P1SP1S``; missing SPM/XPM
    entries are treated as zero. ``profile`` shapes the nonlinearity along
    the guide: ``uniform`` over ``[-L/2, L/2]`` or ``gaussian``, which has
    the same integral and gives a Gaussian phase-matching function
    ``exp(-s q^2 L^2 / 4)``.
    """

    kind: str
    bands: dict
    coefficients: dict
    length: float
    pumps: tuple
    profile: str = "uniform"
    s: float = S_GAUSSIAN
    hbar: float = HBAR

    def __post_init__(self):
        object.__setattr__(self, "pumps", tuple(self.pumps))
        problems = self.problems()
        if problems:
            raise PreconditionError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if self.kind not in KINDS:
            return [f"unknown process kind {self.kind!r}; expected one of {', '.join(KINDS)}"]
        key, need = _REQUIRED[self.kind]
        for b in need:
            if b not in self.bands:
                out.append(f"{self.kind} needs band {b}")
        for name, band in self.bands.items():
            if not band.v > 0:
                out.append(f"band {name}: group velocity must be positive")
            if band.rho < 0:
                out.append(f"band {name}: attenuation must be non-negative")
        if key not in self.coefficients:
            out.append(f"{self.kind} needs coefficient {key}")
        if not self.length > 0:
            out.append("length must be positive")
        if self.profile not in ("uniform", "gaussian"):
            out.append(f"profile must be 'uniform' or 'gaussian', got {self.profile!r}")
        if self.profile == "gaussian" and not self.s > 0:
            out.append("gaussian profile needs s > 0")
        want = sorted(self.pump_bands)
        have = sorted(p.band for p in self.pumps)
        if have != want:
            out.append(f"{self.kind} needs pumps on bands {want}, got {have}")
        for p in self.pumps:
            if not (p.tau > 0 and p.n_photons >= 0):
                out.append(f"pump {p.band}: tau must be positive and n_photons non-negative")
        if not out:
            out.extend(self._energy_problems())
        return out

    def _energy_problems(self, rtol: float = 1e-9) -> list[str]:
        w = {k: b.omega for k, b in self.bands.items()}
        lhs = rhs = None
        if self.kind == "SPDC-DSV":
            lhs, rhs = 2 * w["S"], w["P"]
        elif self.kind == "SPDC-NDSV":
            lhs, rhs = w["S"] + w["I"], w["P"]
        elif self.kind == "SFWM-SP-NDSV":
            lhs, rhs = w["S"] + w["I"], 2 * w["P"]
        elif self.kind == "SFWM-DP-DSV":
            lhs, rhs = 2 * w["S"], w["P1"] + w["P2"]
        elif self.kind == "SFWM-DP-NDSV":
            lhs, rhs = w["S"] + w["I"], w["P1"] + w["P2"]
        if lhs is not None and abs(lhs - rhs) > rtol * max(abs(rhs), 1e-300):
            return [f"energy matching violated for {self.kind}: {lhs:.12g} vs {rhs:.12g}"]
        return []

    @property
    def degenerate(self) -> bool:
        return self.kind.endswith("-DSV")

    @property
    def pump_bands(self) -> tuple:
        return ("P1", "P2") if "-DP-" in self.kind else ("P",)

    @property
    def generated_bands(self) -> tuple:
        if self.kind == "SFWM-SP-DSV":
            return ("P",)
        return ("S",) if self.degenerate else ("S", "I")

    def pump(self, band: str) -> PumpPulse:
        return next(p for p in self.pumps if p.band == band)

    def coef(self, key: str) -> float:
        return float(self.coefficients.get(key, 0.0))

    def nonlinear_profile(self, x: np.ndarray) -> np.ndarray:
        L = self.length
        if self.profile == "uniform":
            return ((x >= -L / 2) & (x <= L / 2)).astype(float)
        return np.exp(-(x**2) / (self.s * L**2)) / np.sqrt(np.pi * self.s)

    def reference_velocity(self) -> float:
        return float(np.mean([self.bands[b].v for b in self.pump_bands]))

    def _wbar(self, names) -> tuple[float, float]:
        om = np.prod([self.bands[n].omega for n in names]) ** 0.25
        vv = np.prod([self.bands[n].v for n in names]) ** 0.25
        return float(om), float(vv)

    def source_fields(self, x: np.ndarray, pumps: dict) -> tuple[np.ndarray, dict]:
        """``S~(x)`` and ``{band: M~_J(x)}`` for pump samples ``pumps[band]`` on ``x``."""
        g = self.nonlinear_profile(x)
        h = self.hbar
        b = self.bands
        k = self.kind
        M = {name: np.zeros(x.shape) for name in self.generated_bands}
        if k == "SPDC-DSV":
            S = self.coef("SSP") / h * g * pumps["P"]
        elif k == "SPDC-NDSV":
            S = self.coef("SIP") / h * g * pumps["P"]
        elif k == "SFWM-SP-DSV":
            c = self.coef("PPPP") * h * b["P"].omega * b["P"].v ** 2
            S = c * g * pumps["P"] ** 2
            M["P"] = c * g * np.abs(pumps["P"]) ** 2
        elif k == "SFWM-SP-NDSV":
            om, vv = self._wbar(("S", "I", "P", "P"))
            S = self.coef("SIPP") * h * om * vv**2 * g * pumps["P"] ** 2
            for J in ("S", "I"):
                c = self.coef(f"P{J}P{J}") * h * np.sqrt(b["P"].omega * b[J].omega) * b["P"].v * b[J].v
                M[J] = c * g * np.abs(pumps["P"]) ** 2
        else:
            gen = self.generated_bands
            key = "SSP1P2" if self.degenerate else "SIP1P2"
            om, vv = self._wbar((gen[0], gen[-1], "P1", "P2"))
            S = 2 * self.coef(key) * h * om * vv**2 * g * pumps["P1"] * pumps["P2"]
            for J in gen:
                acc = np.zeros(x.shape)
                for P in ("P1", "P2"):
                    c = self.coef(f"{P}{J}{P}{J}") * h * np.sqrt(b[P].omega * b[J].omega) * b[P].v * b[J].v
                    acc = acc + c * np.abs(pumps[P]) ** 2
                M[J] = g * acc
        return np.asarray(S, dtype=complex), M


@dataclass(frozen=True)
class KappaGrid:
    dk: float
    n: int

    def __post_init__(self):
        if not (self.dk > 0 and self.n >= 1):
            raise PreconditionError("kappa grid needs dk > 0 and n >= 1")

    @property
    def kappa(self) -> np.ndarray:
        return np.arange(-self.n, self.n + 1) * self.dk

    @property
    def size(self) -> int:
        return 2 * self.n + 1

    @property
    def half_window(self) -> float:
        return self.n * self.dk

    @staticmethod
    def from_window(half_window: float, points: int = 129) -> "KappaGrid":
        if points < 3 or points % 2 == 0:
            raise PreconditionError("grid needs an odd number of points >= 3")
        n = (points - 1) // 2
        return KappaGrid(half_window / n, n)

    @staticmethod
    def default(process: WaveguideProcess, points: int = 129) -> "KappaGrid":
        """Half-window ``8 / (v_mean tau)``."""
        vm = np.mean([process.bands[b].v for b in process.generated_bands])
        tau = min(p.tau for p in process.pumps)
        return KappaGrid.from_window(8.0 / (vm * tau), points)

    def check_window(self, process: WaveguideProcess) -> None:
        tau = min(p.tau for p in process.pumps)
        for b in process.generated_bands:
            need = 6.0 / (process.bands[b].v * tau)
            if self.half_window < need * (1 - 1e-12):
                raise PreconditionError(
                    f"kappa window {self.half_window:.4g} is narrower than 6/(v_{b} tau) = {need:.4g}")


def default_y_grid(process: WaveguideProcess, grid: KappaGrid, t0: float, tf: float) -> np.ndarray:
    """Uniform grid in the co-moving coordinate ``y = x - v_ref t`` covering
    every pump over ``[t0, tf]`` and resolving wavevectors up to ``2 kappa_max``."""
    vref = process.reference_velocity()
    lo, hi = np.inf, -np.inf
    dy = np.pi / (8.0 * grid.half_window)
    for p in process.pumps:
        v = process.bands[p.band].v
        dy = min(dy, p.tau * v / 10.0)
        for t in (t0, tf):
            c = p.center + (v - vref) * t
            lo, hi = min(lo, c - 8 * p.tau * v), max(hi, c + 8 * p.tau * v)
    n = int(np.ceil((hi - lo) / dy)) + 1
    return np.linspace(lo, hi, n)


def _analytic_pumps(process: WaveguideProcess) -> bool:
    if process.kind.startswith("SPDC"):
        return all(process.bands[b].v2 == 0 for b in process.pump_bands)
    nl = sum(abs(process.coef(k)) for k in ("PPPP", "P1P1P1P1", "P2P2P2P2", "P1P2P1P2"))
    return nl == 0 and all(process.bands[b].v2 == 0 for b in process.pump_bands)


def evolve_pump_meanfield(process: WaveguideProcess, y: np.ndarray, times: np.ndarray,
                          frame_velocity: Optional[float] = None, max_phase: float = 0.05,
                          substeps: Optional[int] = None) -> dict:
    """Classical pump envelopes on ``y = x - v_frame t`` at each of ``times``.

    Split-step Fourier: the linear part (walk-off relative to the frame and
    GVD) is exact in Fourier space; SPM/XPM are applied as exact phase
    steps in a symmetric splitting. The grid is treated as periodic.
    Returns ``{band: array (len(times), len(y))}``.
    """
    y = np.asarray(y, dtype=float)
    times = np.asarray(times, dtype=float)
    vf = process.reference_velocity() if frame_velocity is None else float(frame_velocity)
    names = process.pump_bands
    b = process.bands
    if _analytic_pumps(process):
        return {n: np.array([process.pump(n).envelope(y + vf * t, t, b[n].v) for t in times]) for n in names}
    dy = y[1] - y[0]
    if np.max(np.abs(np.diff(y) - dy)) > 1e-9 * abs(dy) * y.size:
        raise PreconditionError("split-step needs a uniform y grid")
    k = 2 * np.pi * np.fft.fftfreq(y.size, d=dy)
    h = process.hbar
    if process.kind.startswith("SPDC"):
        spm = {n: 0.0 for n in names}
        xpm = 0.0
    elif "-SP-" in process.kind:
        spm = {"P": process.coef("PPPP") * h * b["P"].omega * b["P"].v ** 2}
        xpm = 0.0
    else:
        spm = {n: process.coef(n * 4 if len(n) == 1 else f"{n}{n}{n}{n}") * h * b[n].omega * b[n].v ** 2
               for n in names}
        xpm = 2 * process.coef("P1P2P1P2") * h * np.sqrt(b["P1"].omega * b["P2"].omega) * b["P1"].v * b["P2"].v
    t0 = times[0]
    psi = {n: process.pump(n).envelope(y + vf * t0, t0, b[n].v) for n in names}
    out = {n: np.empty((times.size, y.size), complex) for n in names}
    for n in names:
        out[n][0] = psi[n]
    lin = lambda n, dt: np.exp(-1j * ((b[n].v - vf) * k + 0.5 * b[n].v2 * k**2) * dt)
    for m in range(1, times.size):
        span = times[m] - times[m - 1]
        if span < 0:
            raise PreconditionError("pump time samples must be non-decreasing")
        peak = sum(abs(spm[n]) * np.max(np.abs(psi[n])) ** 2 for n in names)
        peak += abs(xpm) * sum(np.max(np.abs(psi[n])) ** 2 for n in names)
        need = max(1, int(np.ceil(peak * span / max_phase)))
        ns = need if substeps is None else int(substeps)
        if ns < need:
            raise PreconditionError(
                f"{ns} pump substeps give a nonlinear phase step {peak * span / ns:.3g} rad > {max_phase}")
        if span == 0:
            for n in names:
                out[n][m] = psi[n]
            continue
        dt = span / ns
        half = {n: lin(n, dt / 2) for n in names}
        for _ in range(ns):
            psi = {n: np.fft.ifft(half[n] * np.fft.fft(psi[n])) for n in names}
            inten = {n: np.abs(psi[n]) ** 2 for n in names}
            new = {}
            for n in names:
                phase = spm[n] * inten[n]
                if len(names) == 2:
                    other = names[1] if n == names[0] else names[0]
                    phase = phase + xpm * inten[other]
                new[n] = psi[n] * np.exp(1j * phase * dt)
            psi = {n: np.fft.ifft(half[n] * np.fft.fft(new[n])) for n in names}
        for n in names:
            out[n][m] = psi[n]
    return out


@dataclass(frozen=True)
class KappaGenerator:
    """Blocks of the coupled-mode generator ``d/dt (a_1, a_2^dag) = i A (...)``.

    ``delta[band]`` is Hermitian, ``zeta`` is (for one band) symmetric and is
    indexed ``[band_1 index, band_2 index]``.
    """

    delta: dict
    zeta: np.ndarray
    bands: tuple

    def hamiltonian_blocks(self) -> tuple[dict, np.ndarray]:
        """Same dynamics as ``H = a^dag Delta a + (i/2)(a^dag zeta a^dag - h.c.)``:
        ``Delta_H = -Delta`` and ``zeta_H = i zeta``."""
        return {k: -v for k, v in self.delta.items()}, 1j * self.zeta


class _Fourier:
    """Riemann-sum transform ``F(q) = (1/sqrt(2 pi)) int e^{-i q y} f(y) dy`` at ``q = m dk``."""

    def __init__(self, y: np.ndarray, grid: KappaGrid):
        self.y = y
        w = np.gradient(y) if y.size > 1 else np.ones(1)
        q = np.arange(-2 * grid.n, 2 * grid.n + 1) * grid.dk
        self.E = np.exp(-1j * np.outer(q, y)) * (w / SQRT2PI)
        j = np.arange(grid.size)
        self.hankel = j[:, None] + j[None, :]
        self.toeplitz = j[:, None] - j[None, :] + 2 * grid.n

    def sum_matrix(self, f: np.ndarray) -> np.ndarray:
        return (self.E @ f)[self.hankel]

    def diff_matrix(self, f: np.ndarray) -> np.ndarray:
        return (self.E @ f)[self.toeplitz]


def build_kappa_generator(process: WaveguideProcess, pump_fields: dict, grid: KappaGrid,
                          y: np.ndarray, t: float, frame_velocity: Optional[float] = None,
                          _ft: Optional[_Fourier] = None) -> KappaGenerator:
    """Discretized generator at time ``t``.

    ``pump_fields[band]`` are samples on the co-moving grid ``y`` at ``t``;
    the nonlinearity is evaluated at the lab position ``y + v_ref t``.
    """
    y = np.asarray(y, dtype=float)
    vf = process.reference_velocity() if frame_velocity is None else float(frame_velocity)
    for nme in process.pump_bands:
        if np.shape(pump_fields[nme]) != y.shape:
            raise PreconditionError(f"pump {nme} has {np.shape(pump_fields[nme])} samples for a y grid of {y.shape}")
    ft = _ft if _ft is not None else _Fourier(y, grid)
    S, M = process.source_fields(y + vf * t, {k: np.asarray(v) for k, v in pump_fields.items()})
    c = grid.dk / SQRT2PI
    kap = grid.kappa
    delta = {}
    for band in process.generated_bands:
        d = -np.diag(process.bands[band].dispersion(kap) - vf * kap).astype(complex)
        if np.any(M[band] != 0):
            Mq = ft.diff_matrix(M[band])
            d = d + 2 * c * 0.5 * (Mq + Mq.conj().T)
        delta[band] = d
    z = c * ft.sum_matrix(S)
    return KappaGenerator(delta, z, process.generated_bands)


def _phase_half(d: np.ndarray, h: float) -> np.ndarray:
    """``exp(-i h Delta_H / 2)`` for Hermitian ``Delta_H``; vector if diagonal."""
    if np.count_nonzero(d - np.diag(np.diag(d))) == 0:
        return np.exp(-0.5j * h * np.real(np.diag(d)))
    w, q = np.linalg.eigh(d)
    return (q * np.exp(-0.5j * h * w)) @ q.conj().T


def _apply_left(U: np.ndarray, X: np.ndarray) -> np.ndarray:
    return U[:, None] * X if U.ndim == 1 else U @ X


def _hyperbolic(z: np.ndarray, h: float) -> np.ndarray:
    """``exp(h [[0, z], [z^H, 0]])`` through the SVD of ``z``."""
    l1, l2 = z.shape
    U, s, Vh = np.linalg.svd(z, full_matrices=False)
    V = Vh.conj().T
    ch, sh = np.cosh(h * s), np.sinh(h * s)
    out = np.empty((l1 + l2, l1 + l2), complex)
    out[:l1, :l1] = np.eye(l1) + (U * (ch - 1)) @ U.conj().T
    out[l1:, l1:] = np.eye(l2) + (V * (ch - 1)) @ Vh
    out[:l1, l1:] = (U * sh) @ Vh
    out[l1:, :l1] = (V * sh) @ U.conj().T
    return out


def _step_matrix(dH: dict, zH: np.ndarray, bands: tuple, h: float) -> np.ndarray:
    """Strang step for ``d/dt R = G R``. ``R = (a_1, a_2^dag)`` with
    ``G = [[-i Delta_1, zeta_H'], [zeta_H'^H, i Delta_2^*]]``."""
    b1, b2 = bands[0], bands[-1]
    # in the Hamiltonian convention the pairing enters as -i * (i zeta) = zeta (coupled-mode zeta)
    z = -1j * zH
    l1 = z.shape[0]
    p1 = _phase_half(dH[b1], h)
    p2 = np.conj(_phase_half(dH[b2], h))
    X = _hyperbolic(z, h)
    if p1.ndim == 1 and p2.ndim == 1:
        d = np.concatenate([p1, p2])
        return d[:, None] * X * d[None, :]
    D = np.zeros_like(X)
    D[:l1, :l1] = np.diag(p1) if p1.ndim == 1 else p1
    D[l1:, l1:] = np.diag(p2) if p2.ndim == 1 else p2
    return D @ X @ D


@dataclass
class WaveguideResult:
    state: GaussianState
    propagator: Optional[BogoliubovPropagator]
    grid: KappaGrid
    bands: tuple
    times: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def M_bc(self) -> np.ndarray:
        n = self.grid.size
        return self.state.M[:n, n:]


def solve_waveguide(process: WaveguideProcess, grid: KappaGrid, times: np.ndarray,
                    y: Optional[np.ndarray] = None, lossy: Optional[bool] = None,
                    symmetric_loss: bool = False, tol: float = 1e-8) -> WaveguideResult:
    """Propagate vacuum through the guide.

    Lossless runs return the Bogoliubov propagator; with ``rho > 0`` on a
    generated band the moments are propagated instead and each unitary step
    is followed by ``N -> eta N``, ``M -> sqrt(eta eta') M``.
    """
    times = np.asarray(times, dtype=float)
    dts = np.diff(times)
    if times.size < 2 or np.any(dts <= 0):
        raise PreconditionError("time grid must be strictly increasing with at least two samples")
    grid.check_window(process)
    if y is None:
        y = default_y_grid(process, grid, times[0], times[-1])
    bands = process.generated_bands
    rho = {b: process.bands[b].rho for b in bands}
    if lossy is None:
        lossy = any(r > 0 for r in rho.values())
    mids = 0.5 * (times[1:] + times[:-1])
    pumps = evolve_pump_meanfield(process, y, mids)
    ft = _Fourier(y, grid)
    n = grid.size
    b1, b2 = bands[0], bands[-1]
    P = np.eye(2 * n, dtype=complex)
    C = np.zeros((2 * n, 2 * n), complex)
    C[:n, :n] = np.eye(n)
    eta_of = lambda dt, f: (np.exp(-rho[b1] * dt * f), np.exp(-rho[b2] * dt * f))

    def lose(C, e1, e2):
        C[:n, :n] = np.eye(n) + e1 * (C[:n, :n] - np.eye(n))
        C[:n, n:] *= np.sqrt(e1 * e2)
        C[n:, :n] *= np.sqrt(e1 * e2)
        C[n:, n:] *= e2
        return C

    for k, tm in enumerate(mids):
        gen = build_kappa_generator(process, {b: pumps[b][k] for b in process.pump_bands}, grid, y, tm, _ft=ft)
        dH, zH = gen.hamiltonian_blocks()
        step = _step_matrix(dH, zH, bands, dts[k])
        if lossy:
            if symmetric_loss:
                C = lose(C, *eta_of(dts[k], 0.5))
            C = step @ C @ step.conj().T
            C = lose(C, *eta_of(dts[k], 0.5 if symmetric_loss else 1.0))
        else:
            P = step @ P
        if not np.all(np.isfinite(P)) or not np.all(np.isfinite(C)):
            raise NumericError(f"non-finite propagator at t = {tm:.6g}")
    labels = tuple(f"{b}:{j}" for b in dict.fromkeys((b1, b2)) for j in range(n))
    if lossy:
        N1 = (C[:n, :n] - np.eye(n)).T
        if process.degenerate:
            state = GaussianState(0.5 * (N1 + N1.conj().T), 0.5 * (C[:n, n:] + C[:n, n:].T), np.zeros(n, complex), labels)
        else:
            Mbc = C[:n, n:]
            N = np.zeros((2 * n, 2 * n), complex)
            M = np.zeros_like(N)
            N[:n, :n], N[n:, n:] = N1, C[n:, n:]
            M[:n, n:], M[n:, :n] = Mbc, Mbc.T
            state = GaussianState(0.5 * (N + N.conj().T), M, np.zeros(2 * n, complex), labels)
        return WaveguideResult(state, None, grid, bands, times, {"y": y})
    if process.degenerate:
        K = BogoliubovPropagator(P[:n, :n], P[:n, n:], times[0], times[-1])
    else:
        K = nondegenerate_embed(P[:n, :n], P[:n, n:], P[n:, :n].conj(), P[n:, n:].conj())
        K = BogoliubovPropagator(K.V, K.W, times[0], times[-1])
    r1, r2 = K.residuals()
    scale = max(1.0, float(np.linalg.norm(K.V, 2)) ** 2)
    if max(r1, r2) > tol * scale:
        raise NumericError(f"symplectic drift {max(r1, r2):.3e} exceeds tolerance")
    state = state_from_propagator(K, tol=tol * scale, labels=labels)
    return WaveguideResult(state, K, grid, bands, times, {"y": y})


# --- analytic separable example -------------------------------------------------

def schmidt_width(tau: float, v_p: float, v_j: float, length: float, s: float = S_GAUSSIAN) -> float:
    """``tau_J = sqrt(s (1/v_J - 1/v_P)^2 L^2 / 4 + tau^2 / 2)``."""
    return float(np.sqrt(s * (1 / v_j - 1 / v_p) ** 2 * length**2 / 4 + tau**2 / 2))


def separability_residual(tau, v_p, v_s, v_i, length, s=S_GAUSSIAN) -> float:
    """Cross term of the Gaussian JSA exponent; zero for a separable JSA."""
    return float(s * (1 / v_s - 1 / v_p) * (1 / v_i - 1 / v_p) * length**2 / 4 + tau**2 / 2)


def phi0(omega: np.ndarray, tau_j: float) -> np.ndarray:
    return np.sqrt(tau_j / np.sqrt(np.pi / 2)) * np.exp(-(omega**2) * tau_j**2)


def phi1(omega: np.ndarray, tau_j: float) -> np.ndarray:
    return np.sqrt(3.0) * phi0(omega, tau_j) * erfi(np.sqrt(2.0 / 3.0) * tau_j * omega)


@dataclass(frozen=True)
class LowGainJSA:
    omega_s: np.ndarray
    omega_i: np.ndarray
    J: np.ndarray
    xi0: float
    tau_s: float
    tau_i: float
    separable: bool


def analytic_lowgain_jsa(tau: float, v_p: float, v_s: float, v_i: float, length: float, phi: float,
                         omega_s: np.ndarray, omega_i: Optional[np.ndarray] = None, s: float = S_GAUSSIAN,
                         require_separable: bool = False, tol: float = 1e-9) -> LowGainJSA:
    """First-order (no time ordering) JSA with a Gaussian phase-matching function.

    ``J(W1, W2) = (Phi tau / 2 pi) exp(-s (W1/v_S + W2/v_I - (W1+W2)/v_P)^2 L^2/4)
    exp(-tau^2 (W1+W2)^2 / 2)``; ``xi0`` is the single Schmidt value of the
    separable case.
    """
    omega_s = np.asarray(omega_s, dtype=float)
    omega_i = omega_s if omega_i is None else np.asarray(omega_i, dtype=float)
    cross = separability_residual(tau, v_p, v_s, v_i, length, s)
    separable = abs(cross) <= tol * max(tau**2, 1e-300)
    if require_separable and not separable:
        raise PreconditionError(
            f"separability condition violated (cross term {cross:.3e}); v_S - v_P and v_I - v_P "
            "must have opposite signs with s (1/v_S-1/v_P)(1/v_I-1/v_P) L^2/4 = -tau^2/2")
    W1, W2 = np.meshgrid(omega_s, omega_i, indexing="ij")
    arg = W1 / v_s + W2 / v_i - (W1 + W2) / v_p
    J = phi * tau / (2 * np.pi) * np.exp(-s * arg**2 * length**2 / 4) * np.exp(-(tau**2) * (W1 + W2) ** 2 / 2)
    ts = schmidt_width(tau, v_p, v_s, length, s)
    ti = schmidt_width(tau, v_p, v_i, length, s)
    xi0 = phi * tau / (2 * np.sqrt(2 * np.pi * ts * ti))
    return LowGainJSA(omega_s, omega_i, J, float(xi0), ts, ti, separable)


@dataclass(frozen=True)
class Magnus3Result:
    xi_plus: float
    xi_minus: float
    theta: float
    L: np.ndarray
    f0_s: np.ndarray
    f1_s: np.ndarray
    f0_i: np.ndarray
    f1_i: np.ndarray
    n_pairs: float
    K: float

    @property
    def schmidt_values(self) -> np.ndarray:
        return np.array([abs(self.xi_plus), abs(self.xi_minus)])


def magnus3_matrix(xi: float) -> np.ndarray:
    a = xi**3 / (4 * np.sqrt(3.0))
    return np.array([[xi + xi**3 / 12, -1j * a], [1j * a, -(xi**3) / 12]])


def magnus3_schmidt(xi: float, tau_s: float, tau_i: float, omega: np.ndarray) -> Magnus3Result:
    """Schmidt decomposition of the JSA with the leading time-ordering correction.

    ``J = u_S L u_I^H`` in the orthonormal basis ``(phi_0, phi_1)``; the
    Schmidt values are ``|xi_+-|`` with ``xi_+- = (xi/2)(1 +- sqrt(1 + xi^2/3 + xi^4/9))``.
    """
    if xi < 0:
        raise PreconditionError("xi must be non-negative")
    omega = np.asarray(omega, dtype=float)
    root = np.sqrt(1 + xi**2 / 3 + xi**4 / 9)
    xp, xm = xi / 2 * (1 + root), xi / 2 * (1 - root)
    theta = float(np.arctan2(xi**2, 2 * np.sqrt(3.0) * (1 + xi**2 / 6)))
    c, sn = np.cos(theta / 2), 1j * np.sin(theta / 2)
    R = np.array([[c, sn], [sn, c]])
    L = magnus3_matrix(xi)
    Ld = R.conj().T @ L @ R
    if abs(Ld[0, 1]) + abs(Ld[1, 0]) > 1e-12 * max(1.0, xi**3):
        # fall back to the eigenvectors of L; R(theta) should already diagonalize it
        w, Q = np.linalg.eigh(L)
        R = Q[:, ::-1]
    us = np.stack([phi0(omega, tau_s), phi1(omega, tau_s)], axis=1) @ R
    ui = np.stack([phi0(omega, tau_i), phi1(omega, tau_i)], axis=1) @ R
    st = schmidt_statistics([abs(xp), abs(xm)])
    return Magnus3Result(float(xp), float(xm), theta, L, us[:, 0], us[:, 1], ui[:, 0], ui[:, 1],
                         st.mean, st.K)


@dataclass(frozen=True)
class JSADiagnostics:
    kappa: np.ndarray
    jsa: np.ndarray
    schmidt: SchmidtData
    n_pairs: float
    K: float
    vacuum: bool


def jsa_diagnostics(source, grid: KappaGrid) -> JSADiagnostics:
    """Continuous JSA on the kappa grid from a two-beam state or ``M_bc``.

    ``JSA = sum_l r_l F_b[:, l] F_c[:, l] / dk``, which is the squeezing
    kernel of the output in wavevector density units.
    """
    if isinstance(source, WaveguideResult):
        source = source.state
    if isinstance(source, GaussianState):
        n = grid.size
        if source.mode_count != 2 * n:
            raise PreconditionError(f"state has {source.mode_count} modes; grid needs {2 * n}")
        M_bc = source.M[:n, n:]
    else:
        M_bc = np.asarray(source, dtype=complex)
        if M_bc.shape != (grid.size, grid.size):
            raise PreconditionError(f"M_bc shape {M_bc.shape} does not match the grid ({grid.size})")
    sd = nondegenerate_joint_amplitude(M_bc)
    jsa = (sd.F_b * sd.r) @ sd.F_c.T / grid.dk
    st = schmidt_statistics(sd.r)
    return JSADiagnostics(grid.kappa, jsa, sd, st.mean, st.K, st.vacuum)


def write_jsa_csv(path, omega1: np.ndarray, omega2: np.ndarray, jsa: np.ndarray) -> None:
    """CSV with header ``omega1,omega2,re,im`` and 17 significant digits."""
    with open(path, "w", newline="\n") as fh:
        fh.write("omega1,omega2,re,im\n")
        for a, w1 in enumerate(omega1):
            for b, w2 in enumerate(omega2):
                z = jsa[a, b]
                fh.write(f"{w1:.17g},{w2:.17g},{z.real:.17g},{z.imag:.17g}\n")


@dataclass(frozen=True)
class SeparableSetup:
    process: WaveguideProcess
    grid: KappaGrid
    times: np.ndarray
    xi_bar: float


def separable_example(phi: float, length: float = 10.0, tau: float = 1.0, s: float = S_GAUSSIAN,
                      half_window: float = 8.0, points: int = 129, t_span: float = 20.0,
                      dt: float = 0.02) -> SeparableSetup:
    """Dimensionless SP-SFWM guide engineered for a separable low-gain JSA.

    Units ``tau = v_P = hbar = N_P = 1``. Signal and idler inverse group
    velocities are ``1 -+ a`` with ``a L = sqrt(2/s) tau``, so that
    ``tau_S = tau_I = tau`` and ``xi_bar = Phi / (2 sqrt(2 pi))``. GVD, SPM
    and XPM are off.
    """
    a = np.sqrt(2.0 / s) * tau / length
    if a >= 1:
        raise PreconditionError("length too short for the separable configuration")
    omega_bar = 1.0
    bands = {"P": Band(1.0, 1.0), "S": Band(1.0, 1 / (1 + a)), "I": Band(1.0, 1 / (1 - a))}
    # Phi = gamma hbar omega_bar N_P L / tau
    gamma = phi * tau / (length * omega_bar)
    proc = WaveguideProcess("SFWM-SP-NDSV", bands, {"SIPP": gamma}, length,
                            (PumpPulse("P", tau, 1.0),), profile="gaussian", s=s, hbar=1.0)
    grid = KappaGrid.from_window(half_window, points)
    steps = int(round(2 * t_span / dt))
    times = np.linspace(-t_span, t_span, steps + 1)
    return SeparableSetup(proc, grid, times, float(phi / (2 * np.sqrt(2 * np.pi))))
