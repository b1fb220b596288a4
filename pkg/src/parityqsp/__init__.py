"""Generalized parity measurements on a cavity mode, built from
qubit-based signal processing: phase synthesis, measurement operators,
device-level scheduling, open-system simulation and error budgets."""

__version__ = "0.1.0"

from .cavity_qed import (DeviceParams, JumpChannel, ProtocolSchedule, Segment,
                         derive_params, hamiltonian_terms, idle_schedule,
                         jump_operators, processing_generator, schedule_cat)
from .dynamics import (ExperimentResult, TrajectoryRecord,
                       lindblad_evolve, measure_qubit, propagate_unitary,
                       run_cat_experiment, trajectory_run)
from .errors import (DegenerateOutcomeError, IntegratorFailure,
                     InvalidArgumentError, InvalidComparisonError,
                     SingularParametersError, StepSizeViolation,
                     TruncationError, UnsupportedInputError,
                     UnsupportedModulusError)
from .fock_space import (FockSpaceConfig, cat_reference, coherent_state,
                         default_dim, fidelity, joint_state, leaked_weight,
                         parity_projector, photon_distribution, ptrace_qubit)
from .parity_measurement import (CrtPlan, PovmPair, QspPovm, crt_plan,
                                 delta_error, delta_report, ideal_measurement,
                                 qsp_povm, qsp_protocol_unitary,
                                 sequential_povm, signal_unitary)
from .perturbation import (PERTURBATION_CHANNELS, PerturbationReport,
                           compare_with_full, modified_jump,
                           perturbative_estimates, slot_weights)
from .phase_synthesis import (SynthesisReport, analytic_phases, cost,
                              optimize_phases, target_g)
from .qubit_algebra import (PhaseSequence, compose_qsp, expm2, real_protocol,
                            response, rot_x, rot_z)

__all__ = [
    "__version__",
    "CrtPlan", "DeviceParams", "DegenerateOutcomeError", "ExperimentResult",
    "FockSpaceConfig",
    "IntegratorFailure", "InvalidArgumentError", "InvalidComparisonError",
    "JumpChannel", "PERTURBATION_CHANNELS", "PerturbationReport",
    "PhaseSequence", "PovmPair", "ProtocolSchedule", "QspPovm",
    "Segment", "SingularParametersError", "StepSizeViolation",
    "SynthesisReport", "TrajectoryRecord", "TruncationError",
    "UnsupportedInputError",
    "UnsupportedModulusError",
    "analytic_phases", "cat_reference", "coherent_state", "compare_with_full",
    "compose_qsp",
    "cost", "crt_plan", "default_dim", "delta_error", "delta_report",
    "derive_params", "expm2", "fidelity", "hamiltonian_terms",
    "ideal_measurement", "idle_schedule", "joint_state", "jump_operators",
    "leaked_weight", "lindblad_evolve", "measure_qubit", "modified_jump",
    "optimize_phases",
    "parity_projector", "perturbative_estimates", "photon_distribution",
    "processing_generator",
    "propagate_unitary", "ptrace_qubit", "qsp_povm", "qsp_protocol_unitary",
    "real_protocol", "response", "rot_x", "rot_z", "run_cat_experiment",
    "schedule_cat", "sequential_povm", "signal_unitary", "slot_weights",
    "target_g", "trajectory_run",
]
