"""Kinetic Monte Carlo laboratory for Glauber+Kawasaki interface dynamics.

A numpy/scipy library that simulates spin-flip + particle-exchange dynamics
on discrete tori around a flat two-layer interface, and checks the analytic
objects of the scaling limit: the stationary profile, the standing wave and
interface shape, the limit noise strength, fluctuation-field covariances,
and the exact algebraic identities (generator adjoint, cylinder expansions,
discrete flows) behind them.
"""

from .potential import (PotentialParams, StandingWave, InterfaceShape,
                        standing_wave, interface_shape, noise_strength,
                        v, v_prime, v_double_prime, flip_rate, mean_flip_rate,
                        chi, QuadratureError)
from .profile import (ProfileGrid, DiscreteProfile, solve_two_layer_profile,
                      discretize_profile, stationarity_residual, constant_profile,
                      reference_wave_profile, reaction_mean, minimal_period,
                      ProfileError)
from .lattice import (Configuration, sample_product_measure, measure_weight,
                      exchange_ratio, flip_ratio, save_snapshot, load_snapshot)
from .dynamics import (SimParams, SimResult, simulate, simulate_reference,
                       invariant_measure_check, verify_rate_bookkeeping,
                       kernel_state_from_seed, EventBudgetExceeded)
from .fields import (TestFunction, GaussianBump, OddBump, CompactBump,
                     FourierFactor, scale_map, cell_average, bind,
                     fluctuation_field, theory_covariance, mean_density_profile)
from .spectral import (SLOperator, assemble_operator, ground_eigenvalue,
                       semigroup_apply, heat_semigroup, TorusShape,
                       mode_covariance, covariance_mode_sum,
                       covariance_double_integral, sup_norm_growth_bound)
from .identities import (CylinderFunction, reaction_observable,
                         high_degree_part, linear_response_coefficient,
                         centered_reaction_gap, expansion_decomposition,
                         adjoint_tables, adjoint_one, brute_force_adjoint,
                         generator_matrix, AdjointTables)
from .flows import (Flow, build_flow, block_weights, double_block_weights,
                    block_average, split_by_block_average, gradient_coupling,
                    maximal_point, block_scales, scale_function)
from .harness import (ExperimentConfig, CovarianceReport, CovarianceEntry,
                      run_experiment, shape_report, jackknife_cov,
                      default_test_functions)

__version__ = "0.1.0"
