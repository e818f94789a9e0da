import numpy as np
import pytest
from scipy.stats import unitary_group

from squeezesim.errors import MixedStateError, PreconditionError
from squeezesim.gaussian_state import (BogoliubovPropagator, GaussianState, apply_loss, apply_passive,
                                       compose_passive, decompose_propagator, degenerate_joint_amplitude,
                                       low_gain_state, nondegenerate_joint_amplitude, propagator_from_takagi,
                                       recover_passive_factor, seed_coherent, state_from_propagator)
from squeezesim.propagator import QuadraticHamiltonianTrajectory, nondegenerate_embed, trotter_propagate


def scalar(r):
    return BogoliubovPropagator(np.array([[np.cosh(r)]]), np.array([[np.sinh(r)]]))


def random_propagator(rng, l, steps=8):
    times = np.linspace(0, 1, steps + 1)
    d = rng.standard_normal((steps + 1, l, l)) + 1j * rng.standard_normal((steps + 1, l, l))
    z = rng.standard_normal((steps + 1, l, l)) + 1j * rng.standard_normal((steps + 1, l, l))
    d = 0.5 * (d + np.conj(np.swapaxes(d, 1, 2)))
    z = 0.3 * (z + np.swapaxes(z, 1, 2))
    return trotter_propagate(QuadraticHamiltonianTrajectory(times, d, z))


def test_scalar_moments():
    st = state_from_propagator(scalar(1.0))
    assert st.N[0, 0].real == pytest.approx(1.381098, abs=1e-6)
    assert st.M[0, 0].real == pytest.approx(1.813430, abs=1e-6)


def test_identity_gives_vacuum():
    st = state_from_propagator(BogoliubovPropagator.identity(3))
    assert np.all(st.N == 0) and np.all(st.M == 0)


def test_twin_beam_embedding():
    r = 0.5
    K = nondegenerate_embed([[np.cosh(r)]], [[np.sinh(r)]], [[np.sinh(r)]], [[np.cosh(r)]])
    st = state_from_propagator(K)
    assert np.allclose(st.N, np.sinh(r) ** 2 * np.eye(2))
    assert np.allclose(st.M, 0.5 * np.sinh(2 * r) * np.array([[0, 1], [1, 0]]))


def test_state_rejects_non_symplectic():
    with pytest.raises(PreconditionError):
        state_from_propagator(BogoliubovPropagator(np.eye(2), 0.1 * np.eye(2)))


def test_degenerate_amplitude_scalar():
    st = GaussianState(np.array([[np.sinh(1) ** 2]]), np.array([[1.813430]]), np.zeros(1))
    sd = degenerate_joint_amplitude(st, tol=1e-5)
    assert sd.r[0] == pytest.approx(1.0, abs=1e-6)
    vac = degenerate_joint_amplitude(GaussianState.vacuum(2))
    assert np.allclose(vac.r, 0) and np.allclose(vac.J, 0)


def test_degenerate_amplitude_round_trip(rng):
    K = random_propagator(rng, 3)
    st = state_from_propagator(K)
    sd = degenerate_joint_amplitude(st)
    st2 = state_from_propagator(propagator_from_takagi(sd.F, sd.r))
    assert np.max(np.abs(st2.N - st.N)) <= 1e-8
    assert np.max(np.abs(st2.M - st.M)) <= 1e-8


def test_degenerate_amplitude_flags_mixed_state():
    st = apply_loss(state_from_propagator(scalar(1.0)), eta=0.5)
    with pytest.raises(MixedStateError):
        degenerate_joint_amplitude(st)


def test_nondegenerate_amplitude():
    sd = nondegenerate_joint_amplitude(np.diag([0.5 * np.sinh(2), 0, 0]))
    assert np.allclose(sd.r, [1, 0, 0], atol=1e-12)
    assert np.allclose(nondegenerate_joint_amplitude(np.zeros((2, 2))).r, 0)


def test_low_gain_state():
    st, _ = low_gain_state(np.zeros((2, 2)))
    assert np.allclose(st.N, 0) and np.allclose(st.M, 0)
    st, _ = low_gain_state(np.array([[0.1]]))
    assert st.N[0, 0].real == pytest.approx(np.sinh(0.1) ** 2, rel=1e-12)
    assert st.M[0, 0].real == pytest.approx(0.5 * np.sinh(0.2), rel=1e-12)


def test_low_gain_w_close_to_j(rng):
    J = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    J = J + J.T
    J *= 0.05 / np.linalg.norm(J)
    _, sd = low_gain_state(J)
    K = propagator_from_takagi(sd.F, sd.r)
    assert np.linalg.norm(K.W - J) / np.linalg.norm(J) <= 0.002


def test_apply_loss_cases():
    st = state_from_propagator(scalar(1.0))
    same = apply_loss(st, eta=1.0)
    assert np.allclose(same.N, st.N) and np.allclose(same.M, st.M)
    gone = apply_loss(st, eta=0.0)
    assert np.allclose(gone.N, 0) and np.allclose(gone.M, 0)
    half = apply_loss(st, eta=0.5)
    assert half.N[0, 0].real == pytest.approx(0.690549, abs=1e-6)
    assert half.M[0, 0].real == pytest.approx(0.906715, abs=1e-6)
    with pytest.raises(PreconditionError):
        apply_loss(st, eta=1.5)
    with pytest.raises(PreconditionError):
        apply_loss(st, L=np.array([[1.2]]))


def test_apply_passive(rng):
    st = state_from_propagator(random_propagator(rng, 3))
    same = apply_passive(st, np.eye(3))
    assert np.allclose(same.N, st.N) and np.allclose(same.M, st.M)
    P = np.eye(3)[[1, 0, 2]]
    sw = apply_passive(st, P)
    assert np.allclose(sw.N, st.N[np.ix_([1, 0, 2], [1, 0, 2])])
    assert np.allclose(sw.M, st.M[np.ix_([1, 0, 2], [1, 0, 2])])
    U = unitary_group.rvs(3, random_state=rng)
    assert np.trace(apply_passive(st, U).N).real == pytest.approx(np.trace(st.N).real, abs=1e-12)
    with pytest.raises(PreconditionError):
        apply_passive(st, 2 * np.eye(3))


def test_seed_coherent():
    assert np.allclose(seed_coherent(scalar(1.0), [0]), 0)
    assert seed_coherent(scalar(1.0), [1.0])[0].real == pytest.approx(np.e, abs=1e-12)
    # weak twin beam: seeding the idler with nu displaces the signal by about J nu^*
    r, nu = 0.01, 0.3 + 0.4j
    K = nondegenerate_embed([[np.cosh(r)]], [[np.sinh(r)]], [[np.sinh(r)]], [[np.cosh(r)]])
    out = seed_coherent(K, [0, nu])
    assert abs(out[0] - r * np.conj(nu)) <= r**2


def test_recover_passive_factor():
    U = unitary_group.rvs(3, random_state=np.random.default_rng(4))
    # a pure squeezer has G = F^H
    assert np.allclose(recover_passive_factor(U, U.conj().T), 0, atol=1e-12)
    th = 0.4
    # V = cosh(r) e^{i th} needs U0 = exp(+i th a^dag a), i.e. phi = -th
    phi = recover_passive_factor(np.array([[1.0]]), np.array([[np.exp(1j * th)]]))
    assert phi[0, 0].real == pytest.approx(-th, abs=1e-12)


def test_decompose_round_trip(rng):
    K = random_propagator(rng, 3)
    F, r, phi = decompose_propagator(K)
    K2 = compose_passive(propagator_from_takagi(F, r), phi)
    assert np.max(np.abs(K2.V - K.V)) <= 1e-8
    assert np.max(np.abs(K2.W - K.W)) <= 1e-8


def test_state_json_round_trip(rng):
    st = state_from_propagator(random_propagator(rng, 2))
    back = GaussianState.from_json(st.to_json())
    assert np.array_equal(back.N, st.N) and np.array_equal(back.M, st.M)
    with pytest.raises(PreconditionError):
        GaussianState.from_dict({"schema": "other"})


def test_physicality(rng):
    st = state_from_propagator(random_propagator(rng, 3))
    st.check()
    bad = GaussianState(np.zeros((1, 1)), np.array([[0.5]]), np.zeros(1))
    with pytest.raises(PreconditionError):
        bad.check()
