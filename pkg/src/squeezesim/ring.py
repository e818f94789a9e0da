"""Point-coupled ring resonators: linear metrics, pumps, Green functions
and the two-time moments of the out-coupled squeezed light.

The generated fields live in a 2-vector ``x = (c_1, c_2^dag)``. For the
degenerate schemes (DP-SFWM, degenerate SPDC) both entries refer to the
same resonance. Channel couplings ``gamma_J`` are taken real and positive,
``gamma_J = sqrt(2 v_J Gamma_J)``; any phase can be absorbed in the channel
fields.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Optional, Union

import numpy as np
from scipy.optimize import fsolve

from .errors import NumericError, PreconditionError
from .statistics import HBAR

SCHEMES = {
    # scheme: (pump bands, generated bands)
    "SP-SFWM": (("P",), ("S", "I")),
    "DP-SFWM": (("P1", "P2"), ("S",)),
    "SPDC": (("SH",), ("F1", "F2")),
    "SPDC-degenerate": (("SH",), ("F",)),
}
LAMBDA_PRESET = 5.0  # 1/s, typical ring nonlinear parameter
RK4_STABILITY = 2.5
STEADY_TOL = 1e-12


@dataclass(frozen=True)
class Resonance:
    omega: float
    gamma: float  # channel damping Gamma_J
    gamma_ph: float = 0.0
    v: float = 1.0

    def __post_init__(self):
        if self.gamma < 0 or self.gamma_ph < 0 or self.v <= 0:
            raise PreconditionError("resonance rates must be >= 0 and v > 0")

    @property
    def gamma_bar(self) -> float:
        return self.gamma + self.gamma_ph

    @property
    def coupling(self) -> float:
        return float(np.sqrt(2.0 * self.v * self.gamma))


@dataclass(frozen=True)
class RingModel:
    resonances: Mapping[str, Resonance]
    length: float = 1.0
    lam: complex = 0.0
    eta: float = 0.0  # SPM
    zeta: float = 0.0  # XPM
    detunings: Mapping[str, float] = field(default_factory=dict)
    delta_ring: float = 0.0

    def __post_init__(self):
        if self.length <= 0:
            raise PreconditionError("ring length must be positive")

    def res(self, band: str) -> Resonance:
        try:
            return self.resonances[band]
        except KeyError:
            raise PreconditionError(f"ring model has no resonance {band!r}") from None

    def detuning(self, band: str) -> float:
        return float(self.detunings.get(band, 0.0))

    def check_scheme(self, scheme: str) -> tuple[tuple, tuple]:
        if scheme not in SCHEMES:
            raise PreconditionError(f"unknown scheme {scheme!r}; expected one of {sorted(SCHEMES)}")
        pumps, gens = SCHEMES[scheme]
        for b in pumps + gens:
            self.res(b)
        for b in gens:
            if self.res(b).gamma_bar <= 0:
                raise PreconditionError(f"resonance {b} takes part in the dynamics but has zero damping")
        return pumps, gens

    def to_dict(self) -> dict:
        return {"resonances": {k: asdict(r) for k, r in self.resonances.items()},
                "length": self.length, "lam": [complex(self.lam).real, complex(self.lam).imag],
                "eta": self.eta, "zeta": self.zeta, "detunings": dict(self.detunings),
                "delta_ring": self.delta_ring}


# ---------------------------------------------------------------- linear optics

def transmission(res: Resonance, omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    return (res.omega - omega + 1j * (res.gamma - res.gamma_ph)) / (res.omega - omega - 1j * res.gamma_bar)


def linear_ring_metrics(model: RingModel, band: str, omega) -> dict:
    """Transfer function, quality factors, finesse and field enhancement.

    ``FE2`` is the on-resonance intracavity intensity ratio of the model,
    ``|gamma|^2 / (Gamma_bar^2 L)``; it reduces to ``F/pi`` at critical
    coupling and to ``2F/pi`` without intrinsic loss.
    """
    r = model.res(band)
    if r.gamma_bar <= 0:
        raise PreconditionError(f"resonance {band} has zero linewidth")
    fin = np.pi * r.v / (r.gamma_bar * model.length)
    return {
        "T": transmission(r, omega),
        "Q_loaded": r.omega / (2 * r.gamma_bar),
        "Q_int": r.omega / (2 * r.gamma_ph) if r.gamma_ph > 0 else np.inf,
        "Q_ext": r.omega / (2 * r.gamma) if r.gamma > 0 else np.inf,
        "finesse": fin,
        "FE2": r.coupling**2 / (r.gamma_bar**2 * model.length),
        "FE2_crit": fin / np.pi,
        "FE2_over": 2 * fin / np.pi,
    }


def gamma_from_sigma(sigma: float, v: float, length: float) -> float:
    """``|gamma|^2`` from the self-coupling constant of the phenomenological model."""
    if not 0 < sigma <= 1:
        raise PreconditionError(f"gamma_from_sigma needs 0 < sigma <= 1, got {sigma}")
    if v <= 0 or length <= 0:
        raise PreconditionError("gamma_from_sigma needs v > 0 and length > 0")
    return 2.0 * v**2 * (1.0 - sigma) / length


def spm_shift_per_photon(omega: float, length: float, K: float, hbar: float = HBAR) -> float:
    """Resonance shift per intracavity photon; a red shift for ``K > 0``."""
    return -(3.0 / hbar) * (hbar * omega / (2.0 * length)) ** 2 * K


# ---------------------------------------------------------------- pumps

Drive = Union[complex, Callable[[float], complex]]


def sampled(times, values) -> Callable[[float], complex]:
    """Linear interpolation of complex samples on a grid."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=complex)
    return lambda s: complex(np.interp(s, t, v.real) + 1j * np.interp(s, t, v.imag))


def _as_fn(d) -> Callable[[float], complex]:
    if callable(d):
        return d
    c = complex(d)
    return lambda s: c


def _pump_rhs(model: RingModel, scheme: str, pumps: tuple):
    coup = [model.res(b).coupling for b in pumps]
    lin = [model.res(b).gamma_bar + 1j * model.detuning(b) for b in pumps]
    eta, zeta = model.eta, model.zeta
    nonlinear = scheme in ("SP-SFWM", "DP-SFWM")

    def rhs(beta: np.ndarray, psi: np.ndarray) -> np.ndarray:
        n = np.abs(beta) ** 2
        out = np.empty_like(beta)
        for k in range(beta.size):
            a = lin[k]
            if nonlinear:
                a = a - 2j * eta * n[k] - 1j * zeta * (n.sum() - n[k])
            out[k] = -a * beta[k] - 1j * coup[k] * psi[k]
        return out

    return rhs


@dataclass(frozen=True)
class PumpSolution:
    times: np.ndarray
    beta: dict

    def functions(self) -> dict:
        return {b: sampled(self.times, v) for b, v in self.beta.items()}


def pump_cavity_dynamics(model: RingModel, scheme: str, drives: Mapping[str, Drive], times,
                         beta0: Optional[Mapping[str, complex]] = None) -> PumpSolution:
    """RK4 integration of the classical intracavity pump amplitude(s)."""
    pumps, _ = model.check_scheme(scheme)
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise PreconditionError("pump time grid must be increasing with at least two points")
    fns = [_as_fn(drives.get(b, 0.0)) for b in pumps]
    rhs = _pump_rhs(model, scheme, pumps)
    b = np.array([complex((beta0 or {}).get(p, 0.0)) for p in pumps])
    out = np.empty((t.size, len(pumps)), dtype=complex)
    out[0] = b
    psi = lambda s: np.array([f(s) for f in fns], dtype=complex)
    for i in range(t.size - 1):
        h = t[i + 1] - t[i]
        p0, ph, p1 = psi(t[i]), psi(t[i] + h / 2), psi(t[i + 1])
        k1 = rhs(b, p0)
        k2 = rhs(b + h / 2 * k1, ph)
        k3 = rhs(b + h / 2 * k2, ph)
        k4 = rhs(b + h * k3, p1)
        b = b + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = b
    if not np.all(np.isfinite(out)):
        raise NumericError("pump integration diverged; reduce the time step")
    return PumpSolution(t, {p: out[:, k] for k, p in enumerate(pumps)})


def _sp_branches(G: float, D: float, eta: float, drive2: float) -> list[float]:
    # n (G^2 + (D - 2 eta n)^2) = drive2, real non-negative roots
    if eta == 0:
        return [drive2 / (G**2 + D**2)]
    c = [4 * eta**2, -4 * eta * D, G**2 + D**2, -drive2]
    roots = np.roots(c)
    scale = max(abs(drive2), 1e-300)
    out = []
    for z in roots:
        if abs(z.imag) > 1e-6 * max(1.0, abs(z.real)):
            continue
        n = max(z.real, 0.0)
        for _ in range(50):
            f = n * (G**2 + (D - 2 * eta * n) ** 2) - drive2
            df = G**2 + (D - 2 * eta * n) ** 2 - 4 * eta * n * (D - 2 * eta * n)
            if df == 0:
                break
            step = f / df
            n -= step
            if abs(step) <= 1e-16 * max(abs(n), 1e-300):
                break
        if n >= 0 and abs(n * (G**2 + (D - 2 * eta * n) ** 2) - drive2) <= 1e-10 * scale:
            out.append(float(n))
    out.sort()
    dedup = []
    for n in out:
        if not dedup or abs(n - dedup[-1]) > 1e-9 * max(n, 1e-300):
            dedup.append(n)
    return dedup


def cw_steady_state(model: RingModel, scheme: str, drives: Mapping[str, complex]) -> list[dict]:
    """All steady-state branches of the pump amplitude(s) under CW drive.

    Each branch is a dict band -> beta. More than one entry means the
    drive sits in a bistable region.
    """
    pumps, _ = model.check_scheme(scheme)
    rhs = _pump_rhs(model, scheme, pumps)
    psi = np.array([complex(drives.get(b, 0.0)) for b in pumps])
    src = np.array([model.res(b).coupling for b in pumps]) * psi
    G = np.array([model.res(b).gamma_bar for b in pumps])
    D = np.array([model.detuning(b) for b in pumps])
    if np.any(G <= 0):
        raise PreconditionError("CW steady state needs nonzero pump damping")
    nonlinear = scheme in ("SP-SFWM", "DP-SFWM")
    eta, zeta = (model.eta, model.zeta) if nonlinear else (0.0, 0.0)

    def beta_of(n):
        eff = G + 1j * D - 2j * eta * n - 1j * zeta * (n.sum() - n)
        return -1j * src / eff

    if len(pumps) == 1:
        cands = [np.array([n]) for n in _sp_branches(G[0], D[0], eta, abs(src[0]) ** 2)]
    else:
        d2 = np.abs(src) ** 2
        sc = np.maximum(d2, 1e-300)

        def F(n):
            det = D - 2 * eta * n - zeta * (n.sum() - n)
            return (n * (G**2 + det**2) - d2) / sc

        lin = d2 / (G**2 + D**2)
        top = max(float(np.max(lin)), float(np.max(d2 / G**2)))
        starts = [lin] + [np.array([a, b]) for a in np.linspace(0, top, 7) for b in np.linspace(0, top, 7)]
        cands = []
        for s0 in starts:
            n, info, ier, _ = fsolve(F, s0, full_output=True, xtol=1e-14)
            if ier != 1 or np.any(n < 0) or np.max(np.abs(F(n))) > 1e-10:
                continue
            if not any(np.allclose(n, c, rtol=1e-8, atol=1e-300) for c in cands):
                cands.append(n)
        cands.sort(key=lambda n: tuple(n))
    out = []
    scale = max(float(np.max(np.abs(src))), 1e-300)
    for n in cands:
        b = beta_of(n)
        res = float(np.max(np.abs(rhs(b, psi)))) / scale
        if res > STEADY_TOL * 1e3:
            continue
        out.append({p: complex(b[k]) for k, p in enumerate(pumps)})
    if not out:
        raise NumericError("no CW steady state found")
    return out


# ---------------------------------------------------------------- generator

@dataclass(frozen=True)
class RingGenerator:
    """``dx/dt = M(t) x`` for the generated fields plus their damping rates."""

    fn: Callable[[float], np.ndarray]
    degenerate: bool
    channels: tuple
    gamma: tuple  # channel damping per entry of x
    gamma_bar: tuple
    scheme: str = "custom"

    def __call__(self, t: float) -> np.ndarray:
        return self.fn(t)

    @classmethod
    def custom(cls, fn, gamma, gamma_bar, degenerate=True, channels=None):
        g = (gamma, gamma) if np.isscalar(gamma) else tuple(gamma)
        gb = (gamma_bar, gamma_bar) if np.isscalar(gamma_bar) else tuple(gamma_bar)
        ch = channels or (("S",) if degenerate else ("S", "I"))
        return cls(fn, degenerate, tuple(ch), tuple(map(float, g)), tuple(map(float, gb)))


def build_ring_generator(scheme: str, model: RingModel, beta: Mapping[str, Drive]) -> RingGenerator:
    """The 2x2 generator for the scheme, given pump amplitude(s) in time."""
    pumps, gens = model.check_scheme(scheme)
    bf = [_as_fn(beta.get(p, 0.0)) for p in pumps]
    lam, zeta, dr = complex(model.lam), model.zeta, model.delta_ring
    r1, r2 = model.res(gens[0]), model.res(gens[-1])
    g1, g2 = r1.gamma_bar, r2.gamma_bar

    if scheme == "SP-SFWM":
        dp = model.detuning("P")

        def fn(t):
            b = bf[0](t)
            n = abs(b) ** 2
            ph = np.exp(-1j * dr * t)
            return np.array([[-g1 - 1j * dp + 1j * zeta * n, 1j * lam * b * b * ph],
                             [-1j * np.conj(lam) * np.conj(b * b) / ph, -g2 + 1j * dp - 1j * zeta * n]])
    elif scheme == "DP-SFWM":
        dbar = 0.5 * (model.detuning("P1") + model.detuning("P2"))

        def fn(t):
            b1, b2 = bf[0](t), bf[1](t)
            n = abs(b1) ** 2 + abs(b2) ** 2
            ph = np.exp(-1j * dr * t)
            return np.array([[-g1 - 1j * dbar + 1j * zeta * n, 2j * lam * b1 * b2 * ph],
                             [-2j * np.conj(lam * b1 * b2) / ph, -g1 + 1j * dbar - 1j * zeta * n]])
    else:
        lam_eff = 2 * lam if scheme == "SPDC-degenerate" else lam
        half = 0.5 * (model.detuning("SH") - dr)

        def fn(t):
            b = bf[0](t)
            return np.array([[-g1 - 1j * half, 1j * lam_eff * b],
                             [-1j * np.conj(lam_eff * b), -g2 + 1j * half]])

    degenerate = len(gens) == 1
    return RingGenerator(fn, degenerate, gens, (r1.gamma, r2.gamma), (g1, g2), scheme)


# ---------------------------------------------------------------- Green function

@dataclass(frozen=True)
class GreenFunction:
    """RK4 solution of ``dG/dt = M G`` stored as one-step maps.

    ``steps[k]`` advances from ``t_k`` to ``t_{k+1}``; ``Phi`` is the
    fundamental matrix from the first grid time. ``M`` and ``M_half`` hold
    the generator on the grid and at midpoints.
    """

    times: np.ndarray
    steps: np.ndarray
    Phi: np.ndarray
    M: np.ndarray
    M_half: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def G(self, i: int, j: int) -> np.ndarray:
        """``G(t_i, t_j)``; backward propagation for ``i < j`` by inversion."""
        if i < j:
            return np.linalg.inv(self.G(j, i))
        out = np.eye(2, dtype=complex)
        for k in range(j, i):
            out = self.steps[k] @ out
        return out

    def fundamental_inverse(self) -> np.ndarray:
        """``Psi = Phi^{-1}`` on the grid; fails on long, strongly damped spans."""
        try:
            Psi = np.linalg.inv(self.Phi)
        except np.linalg.LinAlgError:
            raise NumericError("fundamental matrix is singular to working precision; shorten the span") from None
        if not np.all(np.isfinite(Psi)):
            raise NumericError("fundamental matrix inverse overflowed; shorten the span")
        return Psi


def _uniform(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise PreconditionError("time grid needs at least two points")
    d = np.diff(t)
    if np.any(d <= 0) or np.max(np.abs(d - d.mean())) > 1e-9 * abs(d.mean()):
        raise PreconditionError("time grid must be uniform and increasing")
    return t


def green_function(Mfun: Callable[[float], np.ndarray], times) -> GreenFunction:
    """RK4 solution of ``dG/dt = M(t) G`` from ``G(t_0, t_0) = I``."""
    t = _uniform(times)
    h = t[1] - t[0]
    n = t.size
    Mg = np.array([np.asarray(Mfun(s), dtype=complex) for s in t])
    Mh = np.array([np.asarray(Mfun(s + h / 2), dtype=complex) for s in t[:-1]])
    if Mg.shape[1:] != (2, 2):
        raise PreconditionError(f"generator must return 2x2 matrices, got {Mg.shape[1:]}")
    worst = h * max(float(np.max(np.linalg.norm(Mg, 2, axis=(1, 2)))),
                    float(np.max(np.linalg.norm(Mh, 2, axis=(1, 2)))))
    if worst > RK4_STABILITY:
        raise PreconditionError(f"time step too large for RK4: max ||M|| dt = {worst:.3g}")
    # one RK4 step of a linear ODE is a matrix polynomial in the samples
    ident = np.eye(2)
    k1 = Mg[:-1]
    k2 = Mh @ (ident + h / 2 * k1)
    k3 = Mh @ (ident + h / 2 * k2)
    k4 = Mg[1:] @ (ident + h * k3)
    steps = ident + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    Phi = np.empty((n, 2, 2), dtype=complex)
    Phi[0] = ident
    for i in range(n - 1):
        Phi[i + 1] = steps[i] @ Phi[i]
    if not np.all(np.isfinite(Phi)):
        raise NumericError("Green function integration overflowed")
    return GreenFunction(t, steps, Phi, Mg, Mh)


# ---------------------------------------------------------------- moments

def cavity_covariance(gen: "RingGenerator", gf: GreenFunction) -> np.ndarray:
    """Equal-time ``Sigma(t) = <x x^dag>`` from the Lyapunov equation.

    ``dSigma/dt = M Sigma + Sigma M^dag + diag(2 Gamma_bar_1, 0)``, starting
    from cavity vacuum ``diag(1, 0)``; RK4 with the generator samples
    stored in ``gf``.
    """
    h = gf.dt
    Q = np.diag([2.0 * gen.gamma_bar[0], 0.0]).astype(complex)
    f = lambda M, S: M @ S + S @ M.conj().T + Q
    S = np.diag([1.0, 0.0]).astype(complex)
    out = np.empty((gf.times.size, 2, 2), dtype=complex)
    out[0] = S
    for i in range(gf.times.size - 1):
        Ma, Mh, Mb = gf.M[i], gf.M_half[i], gf.M[i + 1]
        k1 = f(Ma, S)
        k2 = f(Mh, S + h / 2 * k1)
        k3 = f(Mh, S + h / 2 * k2)
        k4 = f(Mb, S + h * k3)
        S = S + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        S = 0.5 * (S + S.conj().T)
        if not np.all(np.abs(S) < 1e150):
            raise NumericError(f"cavity covariance diverged at t = {gf.times[i + 1]:.6g}; "
                               "the pump may be above threshold")
        out[i + 1] = S
    return out


def _hermitian_fill(U: np.ndarray) -> np.ndarray:
    # U valid on and above the diagonal
    out = np.triu(U) + np.triu(U, 1).conj().T
    d = np.real(np.diag(out))
    np.fill_diagonal(out, d)
    return out


@dataclass(frozen=True)
class TwoTimeMoments:
    """Output-field moments on a time grid; ``N[ch]`` and ``M[(ch1, ch2)]``.

    ``N[ch][i, j] = <a^dag(t_i) a(t_j)>`` and ``M[..][i, j] = <a(t_i) a(t_j)>``
    for flux-normalized output fields ``a = sqrt(v) psi_>``.
    """

    times: np.ndarray
    N: dict
    M: dict
    degenerate: bool

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def photon_numbers(self) -> dict:
        return {k: float(np.real(np.trapezoid(np.diag(v), dx=self.dt))) for k, v in self.N.items()}

    def hermiticity_residual(self) -> float:
        return max(float(np.max(np.abs(v - v.conj().T))) for v in self.N.values())

    def symmetry_residual(self) -> float:
        if not self.degenerate:
            return 0.0
        return max(float(np.max(np.abs(v - v.T))) for v in self.M.values())


def ring_moments(gen: "RingGenerator", gf: GreenFunction, method: str = "regression") -> TwoTimeMoments:
    """Two-time moments of the out-coupled fields for vacuum inputs.

    The cavity starts in vacuum at the first grid time. ``regression``
    propagates equal-time cavity moments forward with the Green function
    (stable for any span); ``integral`` evaluates the noise integrals via
    ``G(t, tau) = Phi(t) Phi(tau)^{-1}`` and is kept as an independent check.
    """
    if method == "integral":
        return _moments_integral(gen, gf)
    if method != "regression":
        raise PreconditionError(f"unknown moment method {method!r}")
    Sig = cavity_covariance(gen, gf)
    rho = np.stack([Sig[:, 0, 0] - 1.0, Sig[:, 0, 1].conj()])  # <c_1^dag x>, shape (2, n)
    sv = Sig[:, :, 1].T.copy()  # <x x_2^dag>
    n = gf.times.size
    A = np.zeros((n, n), dtype=complex)  # A[i, j] = [G(t_j, t_i) rho_i]_1, i <= j
    B = np.zeros((n, n), dtype=complex)  # [G(t_j, t_i) rho_i]_2
    C = np.zeros((n, n), dtype=complex)  # [G(t_j, t_i) s_i]_1
    D = np.zeros((n, n), dtype=complex)  # [G(t_j, t_i) s_i]_2
    Vr = np.zeros((2, n), dtype=complex)
    Vs = np.zeros((2, n), dtype=complex)
    for j in range(n):
        Vr[:, j] = rho[:, j]
        Vs[:, j] = sv[:, j]
        A[: j + 1, j], B[: j + 1, j] = Vr[0, : j + 1], Vr[1, : j + 1]
        C[: j + 1, j], D[: j + 1, j] = Vs[0, : j + 1], Vs[1, : j + 1]
        if j < n - 1:
            Vr[:, : j + 1] = gf.steps[j] @ Vr[:, : j + 1]
            Vs[:, : j + 1] = gf.steps[j] @ Vs[:, : j + 1]
    if not all(np.all(np.isfinite(X)) for X in (A, B, C, D)):
        raise NumericError("two-time moments overflowed; the pump may be above threshold")
    Gs, Gi = gen.gamma
    if gen.degenerate:
        N = 2 * Gs * _hermitian_fill(A)
        low = -2 * Gs * C  # M[j, i] for j >= i
        M = np.triu(low, 1).T + np.triu(low, 1) + np.diag(np.diag(low))
        ch = gen.channels[0]
        return TwoTimeMoments(gf.times, {ch: N}, {(ch, ch): M}, True)
    N1 = 2 * Gs * _hermitian_fill(A)
    N2 = 2 * Gi * _hermitian_fill(D.conj())
    g = -2 * np.sqrt(Gs * Gi)
    M = g * (np.triu(B.conj(), 1) + np.triu(C, 1).T)
    np.fill_diagonal(M, g * 0.5 * (np.diag(B).conj() + np.diag(C)))
    s_, i_ = gen.channels
    return TwoTimeMoments(gf.times, {s_: N1, i_: N2}, {(s_, i_): M}, False)


def output_photon_flux(gen: "RingGenerator", gf: GreenFunction) -> dict:
    """Equal-time ``N(t, t)`` per channel from the cavity covariance alone."""
    Sig = cavity_covariance(gen, gf)
    n1 = 2 * gen.gamma[0] * (np.real(Sig[:, 0, 0]) - 1.0)
    if gen.degenerate:
        return {gen.channels[0]: n1}
    return {gen.channels[0]: n1, gen.channels[1]: 2 * gen.gamma[1] * np.real(Sig[:, 1, 1])}


def default_time_grid(gen: "RingGenerator", t0: float = 0.0, span: Optional[float] = None,
                      points: int = 2048) -> np.ndarray:
    gmin = min(gen.gamma_bar)
    if gmin <= 0:
        raise PreconditionError("default grid needs positive damping")
    return np.linspace(t0, t0 + (span if span is not None else 12.0 / gmin), points)


# Green-function integral form, an independent derivation used for checks

def _cumtrapz(y: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * h * (y[1:] + y[:-1]), axis=0)
    return out


def _min_index_form(left: np.ndarray, C: np.ndarray, right: np.ndarray) -> np.ndarray:
    """``X[i, j] = sum_kl left[i, k] C[min(i, j), k, l] right[j, l]``."""
    n = left.shape[0]
    lower = left @ np.einsum("jkl,jl->jk", C, right).T  # valid for i >= j
    upper = np.einsum("ik,ikl->il", left, C) @ right.T  # valid for i <= j
    i, j = np.indices((n, n))
    return np.where(i >= j, lower, upper)


def _step_term(Phi, Psi, a: int, b: int, conj: bool) -> np.ndarray:
    """``G_ab(t_j, t_i) theta(t_j - t_i)`` on the (i, j) grid, theta(0) = 1/2."""
    X = np.einsum("jk,ik->ij", Phi[:, a, :], Psi[:, :, b])
    if conj:
        X = X.conj()
    n = X.shape[0]
    i, j = np.indices((n, n))
    return X * np.where(j > i, 1.0, np.where(j == i, 0.5, 0.0))


def _moments_integral(gen, gf: GreenFunction) -> TwoTimeMoments:
    h = gf.dt
    Phi, Psi = gf.Phi, gf.fundamental_inverse()
    Gs, Gi = gen.gamma
    Gbs, Gbi = gen.gamma_bar

    def cum(a, b, ca, cb):
        x = Psi[:, :, a].conj() if ca else Psi[:, :, a]
        y = Psi[:, :, b].conj() if cb else Psi[:, :, b]
        return _cumtrapz(np.einsum("nk,nl->nkl", x, y), h)

    P1, P2 = Phi[:, 0, :], Phi[:, 1, :]
    A = cum(1, 1, True, False)
    N1 = 2 * Gs * (2 * Gbi * _min_index_form(P1.conj(), A, P1)
                   + np.outer(Phi[:, 0, 1].conj(), Phi[:, 0, 1]))
    if gen.degenerate:
        B = cum(0, 1, False, False)
        M = 2 * Gs * (_step_term(Phi, Psi, 0, 1, False)
                      - 2 * Gbs * _min_index_form(P1, B, P1)
                      - np.outer(Phi[:, 0, 0], Phi[:, 0, 1]))
        ch = gen.channels[0]
        return TwoTimeMoments(gf.times, {ch: N1}, {(ch, ch): M}, True)
    C = cum(0, 0, False, True)
    N2 = 2 * Gi * (2 * Gbs * _min_index_form(P2, C, P2.conj())
                   + np.outer(Phi[:, 1, 0], Phi[:, 1, 0].conj()))
    M = 2 * np.sqrt(Gs * Gi) * (_step_term(Phi, Psi, 1, 0, True)
                                - 2 * Gbs * _min_index_form(P1, C, P2.conj())
                                - np.outer(Phi[:, 0, 0], Phi[:, 1, 0].conj()))
    s_, i_ = gen.channels
    return TwoTimeMoments(gf.times, {s_: N1, i_: N2}, {(s_, i_): M}, False)


# ---------------------------------------------------------------- spectra

@dataclass(frozen=True)
class SqueezingSpectrum:
    omega: np.ndarray
    S_min: np.ndarray
    S_max: np.ndarray
    S_at_phi: np.ndarray
    phi: float
    window: tuple

    def uncertainty_product(self) -> np.ndarray:
        return self.S_min * self.S_max


def _stationarity(X: np.ndarray, shift: int) -> float:
    a = X[:-shift, :-shift]
    b = X[shift:, shift:]
    return float(np.max(np.abs(a - b)) / max(float(np.max(np.abs(X))), 1e-300))


def squeezing_spectrum(mom: TwoTimeMoments, phi: float = 0.0, omega=None, start: Optional[int] = None,
                       stationarity_tol: float = 1e-3) -> SqueezingSpectrum:
    """Two-sideband quadrature noise from stationary two-time moments.

    A Hann window over the grid tail ``[start, n)`` (default: second half)
    defines sideband modes ``A_W = sum_k c_k e^{i W t_k} a(t_k) dt`` with
    ``sum |c_k|^2 dt = 1``; then
    ``S = 1 + N(W) + N(-W) + 2 Re[e^{-2i phi} <A_W A_{-W}>]``.
    """
    n = mom.times.size
    a = n // 2 if start is None else int(start)
    if not 0 <= a < n - 8:
        raise PreconditionError("spectrum window needs at least 8 samples")
    h = mom.dt
    t = mom.times[a:]
    L = t.size
    if mom.degenerate:
        ch = next(iter(mom.N))
        Np, Nm, Mx = mom.N[ch][a:, a:], mom.N[ch][a:, a:], mom.M[(ch, ch)][a:, a:]
    else:
        (s, i), Mx = next(iter(mom.M.items()))
        Np, Nm, Mx = mom.N[s][a:, a:], mom.N[i][a:, a:], Mx[a:, a:]
    shift = max(1, L // 4)
    dev = max(_stationarity(Np, shift), _stationarity(Nm, shift), _stationarity(Mx, shift))
    if dev > stationarity_tol:
        raise PreconditionError(f"moments are not stationary over the window (relative drift {dev:.2e})")
    T = t[-1] - t[0]
    if omega is None:
        omega = 2 * np.pi / T * np.arange(-(L // 16), L // 16 + 1)
    omega = np.asarray(omega, dtype=float)
    w = np.sin(np.pi * np.arange(L) / (L - 1)) ** 2
    norm = np.sqrt(np.sum(w**2) * h)
    tc = t - t[0]
    Cp = (w * h / norm)[:, None] * np.exp(1j * np.outer(tc, omega))
    Cm = (w * h / norm)[:, None] * np.exp(-1j * np.outer(tc, omega))
    n_plus = np.real(np.einsum("kw,kl,lw->w", Cp.conj(), Np, Cp))
    n_minus = np.real(np.einsum("kw,kl,lw->w", Cm.conj(), Nm, Cm))
    m = np.einsum("kw,kl,lw->w", Cp, Mx, Cm)
    base = 1.0 + n_plus + n_minus
    smin, smax = base - 2 * np.abs(m), base + 2 * np.abs(m)
    sphi = base + 2 * np.real(np.exp(-2j * phi) * m)
    if np.any(smin < 0):
        raise NumericError(f"negative squeezing spectrum (min {smin.min():.3e}); grid too coarse")
    return SqueezingSpectrum(omega, smin, smax, sphi, float(phi),
                             ("hann", float(t[0]), float(t[-1]), L))


def write_spectrum_csv(path, spec: SqueezingSpectrum) -> None:
    kind, t0, t1, L = spec.window
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# window={kind} t0={t0!r} t1={t1!r} samples={L} phi={spec.phi!r}\n")
        fh.write("# S = 1 + N(W,W) + N(-W,-W) + 2 Re[exp(-2i phi) M(W,-W)]; vacuum = 1\n")
        fh.write("omega,S_min,S_max,S_at_phi\n")
        for row in zip(spec.omega, spec.S_min, spec.S_max, spec.S_at_phi):
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def dopo_spectrum(eps: float, gamma: float, gamma_bar: float, omega) -> tuple[np.ndarray, np.ndarray]:
    """Below-threshold degenerate OPO: (squeezed, anti-squeezed) spectra."""
    omega = np.asarray(omega, dtype=float)
    eta = gamma / gamma_bar
    sq = 1 - eta * 4 * gamma_bar * eps / ((gamma_bar + eps) ** 2 + omega**2)
    anti = 1 + eta * 4 * gamma_bar * eps / ((gamma_bar - eps) ** 2 + omega**2)
    return sq, anti


# ---------------------------------------------------------------- delta pump

@dataclass(frozen=True)
class DeltaPump:
    S: np.ndarray
    times: np.ndarray
    f0: np.ndarray
    report: dict


def delta_pump_analytic(mu: float, gamma_bar: float, times=None) -> DeltaPump:
    """Instantaneous real pump: cavity S matrix and the single ringdown mode."""
    mu = float(mu)
    if gamma_bar <= 0:
        raise PreconditionError("delta pump needs a positive linewidth")
    S = np.array([[np.cosh(mu), np.sinh(mu)], [np.sinh(mu), np.cosh(mu)]])
    if times is None:
        times = np.linspace(-2.0 / gamma_bar, 12.0 / gamma_bar, 1401)
    t = np.asarray(times, dtype=float)
    step = np.where(t > 0, 1.0, np.where(t == 0, 0.5, 0.0))
    f0 = np.sqrt(2 * gamma_bar) * np.exp(-gamma_bar * np.where(t > 0, t, 0.0)) * step
    report = {"r": [abs(mu)], "mean_photons": float(np.sinh(mu) ** 2), "K": 1.0}
    return DeltaPump(S, t, f0, report)
