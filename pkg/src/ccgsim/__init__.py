"""Measurement-feedback classical gravity channel simulators."""

from .params import (CCGParams, UnitScales, derive_sigma_pair,
                     derive_sigma_single, from_internal, to_internal)
from .gravity import (ParticleConfig, force_jacobian, force_jacobian_asymmetry,
                      kick_vector, kick_vectors, mean_force, mean_forces,
                      moment_rate_contributions, phi_reg, smeared_force_oracle)
from .diffusion import DiffusionTensor, diffusion_far, diffusion_mc
from .mc import MCEstimate, MCSettings, rng_for
from .grids import (GridAxis, GridDensityMatrix, GridWavefunction,
                    ProductWavefunction, gaussian_packet)
from .channel import (apply_channel_1p, apply_channel_2p, channel_1p_decay_rate,
                      com_reduction_check, evolve_1p_master, two_particle_kernel)
from .trajectories import (HarmonicPinning, TrajectoryEnsemble, evolve_trajectory,
                           jump_event, run_ensemble, sample_record)
from .ktm import (ConfinedTwoMassSetup, GaussianMomentState, LinearizedGenerator,
                  build_generator, compare_with_trajectories, evolve_moments,
                  moment_series)
from .decoherence import (CoherenceRate, R_factor, SphereSpec, f_deviation,
                          force_near_sphere, I_first_order, sphere_pair_rate_mc,
                          sphere_test_potential, two_mass_rate)

__version__ = "0.1.0"
