import numpy as np
import pytest

from squeezesim.errors import PreconditionError
from squeezesim.statistics import coherence_functions
from squeezesim.waveguide import (Band, KappaGrid, PumpPulse, WaveguideProcess, analytic_lowgain_jsa,
                                  build_kappa_generator, evolve_pump_meanfield, jsa_diagnostics,
                                  magnus3_schmidt, phi0, phi1, separable_example, solve_waveguide,
                                  write_jsa_csv)


def sp_process(v2=0.0, spm=0.0, n_photons=1.0, length=10.0, tau=1.0, rho=0.0):
    bands = {"P": Band(1.0, 1.0, v2), "S": Band(0.9, 0.8, 0.0, rho), "I": Band(1.1, 1.25, 0.0, rho)}
    return WaveguideProcess("SFWM-SP-NDSV", bands, {"SIPP": 0.1, "PPPP": spm}, length,
                            (PumpPulse("P", tau, n_photons),), hbar=1.0)


@pytest.fixture(scope="module")
def lowgain():
    s = separable_example(0.3, points=65, dt=0.05)
    return s, solve_waveguide(s.process, s.grid, s.times)


def test_process_validation():
    with pytest.raises(PreconditionError, match="energy matching"):
        WaveguideProcess("SFWM-SP-NDSV", {"P": Band(1, 1), "S": Band(0.9, 1), "I": Band(1.0, 1)},
                         {"SIPP": 1.0}, 1.0, (PumpPulse("P", 1.0, 1.0),))
    with pytest.raises(PreconditionError, match="needs coefficient"):
        WaveguideProcess("SPDC-DSV", {"P": Band(2, 1), "S": Band(1, 1)}, {}, 1.0, (PumpPulse("P", 1.0, 1.0),))


def test_pump_rigid_translation():
    # negligible SPM forces the split-step path; the pulse walks off at v_P - v_frame
    proc = sp_process(spm=1e-14)
    y = np.linspace(-40, 40, 1024, endpoint=False)
    t = np.array([0.0, 5.0])
    out = evolve_pump_meanfield(proc, y, t, frame_velocity=0.6)
    expect = proc.pump("P").envelope(y + 0.6 * 5.0, 5.0, 1.0)
    assert np.max(np.abs(out["P"][1] - expect)) <= 1e-9


def test_pump_dispersive_broadening():
    v2, T = 0.8, 6.0
    proc = sp_process(v2=v2)
    y = np.linspace(-60, 60, 2048, endpoint=False)
    out = evolve_pump_meanfield(proc, y, np.array([0.0, T]))["P"][1]
    sig2 = 1.0                      # (tau v)^2
    st2 = sig2 + 0.5j * v2 * T
    amp = np.sqrt(1.0 / np.sqrt(2 * np.pi))
    expect = amp * np.sqrt(sig2 / st2) * np.exp(-y**2 / (4 * st2))
    assert np.max(np.abs(out - expect)) <= 1e-6 * amp


def test_pump_self_phase_modulation():
    g, T = 0.7, 3.0
    proc = sp_process(spm=g)
    y = np.linspace(-30, 30, 600, endpoint=False)
    out = evolve_pump_meanfield(proc, y, np.array([0.0, T]))["P"]
    assert np.max(np.abs(np.abs(out[1]) - np.abs(out[0]))) <= 1e-12
    # phase = gamma hbar w_P v_P^2 |psi|^2 t with hbar = w_P = v_P = 1
    want = g * np.abs(out[0]) ** 2 * T
    got = np.angle(out[1] / out[0])
    mask = np.abs(out[0]) > 1e-3
    assert np.max(np.abs(got[mask] - want[mask])) <= 1e-10


def test_pump_norm_conserved():
    proc = sp_process(v2=0.5, spm=2.0)
    y = np.linspace(-50, 50, 1024, endpoint=False)
    out = evolve_pump_meanfield(proc, y, np.linspace(0, 4, 5))["P"]
    norms = np.sum(np.abs(out) ** 2, axis=1) * (y[1] - y[0])
    assert np.max(np.abs(norms - norms[0])) <= 1e-8
    assert norms[0] == pytest.approx(1.0, rel=1e-8)


def test_generator_without_pump():
    proc = sp_process(n_photons=0.0)
    grid = KappaGrid.from_window(8.0, 17)
    y = np.linspace(-20, 20, 101)
    gen = build_kappa_generator(proc, {"P": np.zeros(101, complex)}, grid, y, 0.0)
    assert np.all(gen.zeta == 0)
    for band, d in gen.delta.items():
        assert np.count_nonzero(d - np.diag(np.diag(d))) == 0
        kap = grid.kappa
        assert np.allclose(np.diag(d), -(proc.bands[band].v - 1.0) * kap)


def test_generator_cw_pump_is_antidiagonal():
    grid = KappaGrid(0.25, 6)
    ny = 64
    period = 2 * np.pi / grid.dk
    y = -period / 2 + np.arange(ny) * period / ny
    proc = sp_process(length=1e6)  # uniform profile covering the whole grid
    gen = build_kappa_generator(proc, {"P": np.full(ny, 0.3 + 0j)}, grid, y, 0.0)
    j = np.arange(grid.size)
    off = (j[:, None] + j[None, :]) != 2 * grid.n
    assert np.max(np.abs(gen.zeta[off])) <= 1e-12 * np.max(np.abs(gen.zeta))
    assert np.max(np.abs(gen.zeta[~off])) > 0


def test_generator_hermitian_for_random_pump(rng):
    bands = {"P": Band(1.0, 1.0), "S": Band(1.0, 1.0)}
    proc = WaveguideProcess("SFWM-SP-DSV", bands, {"PPPP": 0.4}, 10.0, (PumpPulse("P", 1.0, 1.0),), hbar=1.0)
    grid = KappaGrid.from_window(6.0, 21)
    y = np.linspace(-15, 15, 301)
    pump = rng.standard_normal(301) + 1j * rng.standard_normal(301)
    gen = build_kappa_generator(proc, {"P": pump}, grid, y, 0.3)
    d = gen.delta["P"]
    assert np.max(np.abs(d - d.conj().T)) <= 1e-12
    assert np.max(np.abs(gen.zeta - gen.zeta.T)) <= 1e-12
    with pytest.raises(PreconditionError):
        build_kappa_generator(proc, {"P": pump[:10]}, grid, y, 0.3)


def test_zero_pump_gives_vacuum():
    s = separable_example(0.0, points=33, dt=0.1)
    res = solve_waveguide(s.process, s.grid, s.times)
    assert np.max(np.abs(res.state.N)) <= 1e-14 and np.max(np.abs(res.state.M)) <= 1e-14


def test_lowgain_separable(lowgain):
    s, res = lowgain
    d = jsa_diagnostics(res, s.grid)
    assert d.K <= 1.001
    assert d.n_pairs == pytest.approx(np.sinh(s.xi_bar) ** 2, rel=0.01)
    assert d.schmidt.r[1] / d.schmidt.r[0] <= 1e-3


def test_lossless_beams_balanced(lowgain):
    s, res = lowgain
    n = s.grid.size
    nb = np.trace(res.state.N[:n, :n]).real
    nc = np.trace(res.state.N[n:, n:]).real
    assert abs(nb - nc) <= 1e-8


def test_grid_refinement(lowgain):
    s, res = lowgain
    fine = separable_example(0.3, points=129, dt=0.05)
    n1 = jsa_diagnostics(res, s.grid).n_pairs
    n2 = jsa_diagnostics(solve_waveguide(fine.process, fine.grid, fine.times), fine.grid).n_pairs
    assert abs(n2 - n1) <= 0.005 * n2


def test_lossy_path_without_loss_matches(lowgain):
    s, res = lowgain
    lossy = solve_waveguide(s.process, s.grid, s.times, lossy=True)
    assert lossy.propagator is None
    assert np.max(np.abs(lossy.state.N - res.state.N)) <= 1e-10
    assert np.max(np.abs(lossy.state.M - res.state.M)) <= 1e-10


def _with_loss(proc, rho):
    bands = dict(proc.bands)
    for b in ("S", "I"):
        bands[b] = Band(bands[b].omega, bands[b].v, bands[b].v2, rho)
    return WaveguideProcess(proc.kind, bands, proc.coefficients, proc.length, proc.pumps,
                            proc.profile, proc.s, proc.hbar)


def test_uniform_loss():
    s = separable_example(1.0, points=33, dt=0.1)
    n = s.grid.size
    c0 = coherence_functions(solve_waveguide(s.process, s.grid, s.times).state, n)
    dev = []
    for rho in (0.002, 0.001):
        c1 = coherence_functions(solve_waveguide(_with_loss(s.process, rho), s.grid, s.times).state, n)
        # pairs are born near t = 0 and see loss over the remaining half of the run
        assert c1.mean_b == pytest.approx(np.exp(-rho * s.times[-1]) * c0.mean_b, rel=1e-3)
        assert c1.mean_c == pytest.approx(c1.mean_b, rel=1e-10)
        dev.append((c1.g2_b - c0.g2_b, c1.g11 - c0.g11))
    # loss during generation shifts g2 and g11 at first order in rho only
    (g2a, g11a), (g2b, g11b) = dev
    assert abs(g2a) <= 0.003 and g2a / g2b == pytest.approx(2.0, rel=0.05)
    assert g11a / g11b == pytest.approx(2.0, rel=0.1)


def test_analytic_jsa():
    w = np.linspace(-8, 8, 401)
    s = separable_example(4.0)
    a = 1 / s.process.bands["S"].v - 1
    j = analytic_lowgain_jsa(1.0, 1.0, 1 / (1 + a), 1 / (1 - a), 10.0, 4.0, w)
    assert j.separable
    assert j.xi0 == pytest.approx(0.797885, abs=1e-6)
    assert np.max(np.abs(analytic_lowgain_jsa(1.0, 1.0, 1 / (1 + a), 1 / (1 - a), 10.0, 1e-12, w).J)) <= 1e-12
    dw = w[1] - w[0]
    assert np.sum(phi0(w, j.tau_s) ** 2) * dw == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(PreconditionError):
        analytic_lowgain_jsa(1.0, 1.0, 0.8, 0.9, 10.0, 1.0, w, require_separable=True)


def test_magnus3_limits():
    w = np.linspace(-10, 10, 2001)
    r = magnus3_schmidt(0.0, 1.0, 1.0, w)
    assert r.xi_plus == 0 and r.xi_minus == 0 and r.theta == 0
    r = magnus3_schmidt(1e-4, 1.0, 1.0, w)
    assert r.xi_plus == pytest.approx(1e-4, rel=1e-8) and abs(r.xi_minus) <= 1e-12


def test_magnus3_closed_form():
    xi = 0.797885
    r = magnus3_schmidt(xi, 1.0, 1.0, np.linspace(-10, 10, 2001))
    root = np.sqrt(1 + xi**2 / 3 + xi**4 / 9)
    assert r.xi_plus == pytest.approx(xi / 2 * (1 + root), rel=1e-14)
    assert r.xi_plus == pytest.approx(0.846263, abs=1e-6)
    assert r.xi_minus == pytest.approx(-0.048378, abs=1e-6)
    assert np.allclose(r.schmidt_values, [0.846263, 0.048378], atol=1e-6)
    # the Schmidt values are the singular values of the 2x2 matrix L
    assert np.allclose(np.linalg.svd(r.L, compute_uv=False), r.schmidt_values, atol=1e-12)


def test_magnus3_functions_orthonormal():
    w = np.linspace(-10, 10, 4001)
    dw = w[1] - w[0]
    r = magnus3_schmidt(0.8, 1.0, 1.3, w)
    for f0, f1 in ((r.f0_s, r.f1_s), (r.f0_i, r.f1_i)):
        G = np.array([[np.vdot(a, b) * dw for b in (f0, f1)] for a in (f0, f1)])
        assert np.allclose(G, np.eye(2), atol=1e-6)
    assert np.sum(phi1(w, 1.0) ** 2) * dw == pytest.approx(1.0, abs=1e-6)


def test_jsa_diagnostics_vacuum_and_shape():
    grid = KappaGrid.from_window(4.0, 9)
    d = jsa_diagnostics(np.zeros((9, 9)), grid)
    assert d.vacuum and d.K == 1.0 and np.all(d.jsa == 0)
    with pytest.raises(PreconditionError):
        jsa_diagnostics(np.zeros((8, 9)), grid)


def test_write_jsa_csv(tmp_path):
    p = tmp_path / "j.csv"
    write_jsa_csv(p, np.array([0.0, 1.0]), np.array([2.0, 3.0]), np.array([[1, 2j], [3, 4 + 1j]]))
    lines = p.read_text().splitlines()
    assert lines[0] == "omega1,omega2,re,im"
    assert lines[1:] == ["0,2,1,0", "0,3,0,2", "1,2,3,0", "1,3,4,1"]
