"""spo: schedule path optimization for adiabatic quantum annealing of QUBO problems.

Find annealing schedules that maximize the minimum spectral gap by adding
bounded, slew-limited local control terms to the standard linear
interpolation, and validate them by simulating the time-dependent Schrodinger
evolution and measuring ground-state success probability.
"""
__version__ = "0.1.0"

from .errors import (DegenerateGapError, EigensolverError, InstanceFormatError,
                     NormDriftError, ScheduleConstraintError, SpoError,
                     SubproblemError)
from .pauli import (PauliOperator, PauliTerm, QuboInstance, assemble,
                    build_driver_hamiltonian, build_final_hamiltonian,
                    build_local_basis, random_instance, read_instance,
                    write_instance)
from .schedule import (PerturbationCoefficients, Schedule, Violation,
                       linear_schedule, quadratic_random_schedule,
                       read_schedule_csv, sample_coefficients, validate,
                       write_schedule_csv)
from .spectrum import (SpectrumProfile, adiabatic_condition, gap_profile,
                       ground_fidelity_profile, lowest_eigenpairs, min_gap,
                       profile_from_matrices, write_profile_csv)
from .direct import DirectConfig, DirectReport, gap_gradient, optimize_direct
from .convex import (ConvexConfig, ConvexReport, Projectors, SubproblemSolution,
                     build_projectors, optimize_convex, solve_subproblem)
from .dynamics import (EvolutionResult, driver_ground_state, evolve,
                       evolve_dense_reference, success_probability)
from .experiments import (MiningRecord, PerturbationRecord, SpoComparison,
                          StudySummary, compare_spo, epsilon_sweep,
                          find_interior_min_instances, find_liftable_instances,
                          mine_hard_instances, run_perturbation_study)
