"""Dynamics of two two-level atoms coupled to a two-mode field in a Kerr
medium, with Stark shifts and intensity-dependent coupling.

The closed-form propagation lives in kerrcavity.solver, independent
fixed-step integrators in kerrcavity.oracle, field statistics and atomic
entanglement measures in kerrcavity.observables, and grid sweeps plus the
bundled parameter presets in kerrcavity.sweep.
"""

from .errors import (ComplexRootsError, ConfigError, DegenerateRootsError,
                     ExponentCapError, KerrCavityError, LambdaZeroError,
                     StepTooLargeError, TruncationLeakError,
                     ZeroMeanPhotonNumberError)
from .model import (BranchCoefficients, CoherentWeights, DeformationFn,
                    FockTruncation, ModelParams, branch_coefficients,
                    branch_grid, choose_truncation, coherent_weight,
                    coherent_weights, field_weights, resolve_truncation)
from .observables import (AtomDensity, FieldMoment, JointPND, atom_density,
                          atom_density_from_state, field_moment, g2_zero,
                          joint_pnd, linear_entropy, mandel_q,
                          quadrature_squeezing)
from .oracle import (CTrajectory, FullTrajectory, TruncatedState,
                     build_hamiltonian, initial_product_state, integrate_full,
                     integrate_pre_rwa, integrate_rwa, state_from_amplitudes)
from .solver import (AmplitudeSet, BranchWeights, ClosedFormEvolution,
                     CubicData, amplitudes_at, branch_weights, cubic_data,
                     solve_cubic)
from .sweep import (PRESET_IDS, ObservableRecord, SweepResult, SweepSpec,
                    figure_preset, run_sweep)
from .validation import closed_vs_rwa_max_delta, validation_report

__version__ = "0.1.0"
