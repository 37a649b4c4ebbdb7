"""Spectral simulation and large-deviation checks for radial stochastic 2D flows on the disk."""
__version__ = "0.1.0"

from .spectral import (EigenBasis, EigenMode, NoiseSpec, bessel_j, build_basis, eval_field,
                       find_bessel_zeros, rkhs_norm_sq, semigroup_apply, sobolev_norm, v_norm)
from .sde import (ControlPath, ModelParams, Trajectory, euler_skeleton, mild_forcing,
                  simulate, simulate_radial_ns, simulate_radial_sg, tilted_simulate)
from .diagnostics import (CorrectorSpec, KatoSpec, corrector_build, corrector_scaling_check,
                          energy_balance_gap, energy_residual_euler, energy_residual_ns,
                          energy_residual_sg, kato_functional)
from .ldp import (EstimatorResult, RareEventSpec, estimate_rare_event, laplace_functional,
                  ldp_convergence_study, optimal_terminal_control, rate_functional,
                  terminal_ball_rate)
from .fitting import SlopeFit, fit_slope
