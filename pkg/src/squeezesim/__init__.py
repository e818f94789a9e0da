"""Gaussian squeezed-light simulation: Bogoliubov propagators, waveguide and
ring-resonator sources, and a matrix-product-state resonator model."""

__version__ = "0.1.0"

from .errors import (MixedStateError, NumericError, PreconditionError, SqueezeSimError,
                     ValidationError)
from .core_linalg import (joint_bogoliubov_svd, matrix_exp, takagi_autonne, unitary_log,
                          validate_symplectic)
from .gaussian_state import (BogoliubovPropagator, GaussianState, apply_loss, apply_passive,
                             decompose_propagator, degenerate_joint_amplitude, low_gain_state,
                             nondegenerate_joint_amplitude, state_from_propagator)
from .propagator import (QuadraticHamiltonianTrajectory, compose, generator, invert_propagator,
                         rotating_frame, trotter_propagate)
from .statistics import (coherence_functions, homodyne_variance, loss_invariance_check,
                         photon_number_moments, schmidt_statistics, vacuum_power)
from .waveguide import (KappaGrid, WaveguideProcess, jsa_diagnostics, magnus3_schmidt,
                        separable_example, solve_waveguide)
from .ring import (Resonance, RingModel, build_ring_generator, cw_steady_state, green_function,
                   linear_ring_metrics, ring_moments, squeezing_spectrum)
from .mps_cavity import CavityWaveguideModel, gaussian_crosscheck, simulate_cavity_mps
