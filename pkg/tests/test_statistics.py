import numpy as np
import pytest

from squeezesim.errors import PreconditionError
from squeezesim.gaussian_state import (BogoliubovPropagator, GaussianState, apply_loss, propagator_from_takagi,
                                       state_from_propagator)
from squeezesim.propagator import nondegenerate_embed
from squeezesim.statistics import (HBAR, coherence_functions, homodyne_variance, loss_invariance_check,
                                   photon_number_moments, schmidt_statistics, vacuum_power,
                                   vacuum_power_ring, vacuum_power_waveguide)


def twin(r):
    c, s = np.cosh(np.atleast_1d(r)), np.sinh(np.atleast_1d(r))
    return state_from_propagator(nondegenerate_embed(np.diag(c), np.diag(s), np.diag(s), np.diag(c)))


def single(r):
    return state_from_propagator(BogoliubovPropagator(np.array([[np.cosh(r)]]), np.array([[np.sinh(r)]])))


def test_vacuum_moments():
    m = photon_number_moments(GaussianState.vacuum(3))
    assert np.all(m.mean == 0) and np.all(m.covariance == 0)


def test_single_mode_moments():
    m = photon_number_moments(single(1.0))
    assert m.mean[0] == pytest.approx(1.381098, abs=1e-6)
    n = np.sinh(1.0) ** 2
    assert m.variance[0] == pytest.approx(2 * n * (1 + n), rel=1e-12)
    assert m.variance[0] == pytest.approx(6.577058, abs=1e-6)


def test_twin_beam_difference_has_no_noise():
    m = photon_number_moments(twin(1.0))
    c = m.covariance
    assert c[0, 0] + c[1, 1] - 2 * c[0, 1] == pytest.approx(0, abs=1e-12)


def test_moments_reject_displacement():
    st = GaussianState(np.zeros((1, 1)), np.zeros((1, 1)), np.array([0.1]))
    with pytest.raises(PreconditionError):
        photon_number_moments(st)


def test_schmidt_statistics():
    assert schmidt_statistics([0.7]).K == pytest.approx(1.0)
    assert schmidt_statistics([1.0, 1.0]).K == pytest.approx(2.0)
    r = np.array([1.0, 0.5])
    n = np.sinh(r) ** 2
    assert schmidt_statistics(r).K == pytest.approx(n.sum() ** 2 / (n**2).sum(), rel=1e-14)
    assert schmidt_statistics(r).K == pytest.approx(1.378589, abs=1e-6)
    vac = schmidt_statistics([0, 0])
    assert vac.vacuum and vac.K == 1.0
    with pytest.raises(PreconditionError):
        schmidt_statistics([-0.1])


def test_schmidt_matches_mode_moments():
    r = np.array([0.8, 0.3, 0.1])
    s = schmidt_statistics(r)
    # a degenerate squeezer with the same Schmidt values
    m = photon_number_moments(state_from_propagator(propagator_from_takagi(np.eye(3), r)))
    assert s.mean == pytest.approx(m.total_mean, rel=1e-12)
    assert s.variance == pytest.approx(m.total_variance, rel=1e-12)


def test_coherence_single_schmidt_mode():
    c = coherence_functions(twin(0.6), 1)
    assert c.g2_b == pytest.approx(2.0, abs=1e-12)
    assert c.g2_c == pytest.approx(2.0, abs=1e-12)
    assert c.eta_b == pytest.approx(1.0, abs=1e-12)


def test_coherence_two_equal_modes():
    assert coherence_functions(twin([0.4, 0.4]), ([0, 1], [2, 3])).g2_b == pytest.approx(1.5, abs=1e-12)


def test_g11_at_low_gain():
    r = np.arcsinh(np.sqrt(0.1))
    c = coherence_functions(twin(r), 1)
    assert c.g11 == pytest.approx(2 + 1 / 0.1, abs=1e-10)  # 12 at <N> = 0.1


def test_coherence_rejects_degenerate_state():
    with pytest.raises(PreconditionError):
        coherence_functions(state_from_propagator(BogoliubovPropagator(
            np.cosh(0.3) * np.eye(2), np.sinh(0.3) * np.eye(2))), 1)


def test_loss_invariance():
    st = twin(0.7)
    res = loss_invariance_check(st, 0.3, 0.7, 1)
    assert res["ok"]
    assert res["recovered_eta_b"] == pytest.approx(0.3, abs=1e-9)
    assert res["recovered_eta_c"] == pytest.approx(0.7, abs=1e-9)
    assert res["after"].mean_b == pytest.approx(0.3 * res["before"].mean_b, rel=1e-12)


def test_homodyne():
    assert homodyne_variance(GaussianState.vacuum(2), [1, 0]).variance == pytest.approx(1.0)
    h = homodyne_variance(single(1.0), [1.0])
    assert h.minimum == pytest.approx(np.exp(-2), rel=1e-12)
    assert h.maximum == pytest.approx(np.exp(2), rel=1e-12)
    assert homodyne_variance(single(1.0), [1.0], phi=h.phi_min).variance == pytest.approx(np.exp(-2), rel=1e-10)
    joint = homodyne_variance(twin(0.5), np.array([1, 1]) / np.sqrt(2))
    assert joint.minimum == pytest.approx(np.exp(-1), rel=1e-12)
    with pytest.raises(PreconditionError):
        homodyne_variance(single(1.0), [2.0])


def test_homodyne_degrades_with_loss():
    lossy = apply_loss(single(1.0), eta=0.5)
    assert homodyne_variance(lossy, [1.0]).minimum == pytest.approx(0.5 * np.exp(-2) + 0.5, rel=1e-12)


def test_vacuum_power_ring():
    w, q = 1.2153e15, 1e6
    p = vacuum_power_ring(w, q)
    assert p == pytest.approx(HBAR * w**2 / (8 * q), rel=1e-14)
    assert p == pytest.approx(1.95e-11, rel=2e-3)
    assert vacuum_power_ring(w, 2 * q) == pytest.approx(p / 2)
    assert vacuum_power({"kind": "ring", "omega_f": w, "q": q}) == p


def test_vacuum_power_waveguide():
    p = vacuum_power_waveguide(2.4e15, 1e-25, 1e-2)
    assert vacuum_power_waveguide(2.4e15, 1e-25, 1e-2 / 16) == pytest.approx(4 * p)
    assert vacuum_power_waveguide(2.4e15, -1e-25, 1e-2) == pytest.approx(p)
    with pytest.raises(PreconditionError):
        vacuum_power({"kind": "slab"})
