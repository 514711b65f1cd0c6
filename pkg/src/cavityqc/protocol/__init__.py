"""Pulse programs: calibrated crossings, schedules and named gate protocols."""
from .schedule import (AtomPulse, Checkpoint, Device, EventKind, Itinerary, PhaseCorrection,
                       PulseEvent, Schedule, atom_phase, execute, flip_ge, flip_ig, hadamard_ge,
                       hadamard_ig, ideal_pair_unitary, logical_occupations, product_inputs)
from .calibration import (CalibrationResult, calibrate_pulse, calibrated_drive,
                          resonant_area_omega0, resonant_area_tau, resonant_transfer)
from .gates import (DeutschResult, MeasuredProtocol, atom_source_statistics, chain_layout, cnot,
                    cnot_atom_to_cavity, cnot_cavity_to_atom, cnot_inv, cnot_inv_measured,
                    deutsch, deutsch_ideal, deutsch_schedule, dressed_trace, excite_on_vacuum,
                    ghz_decode, ghz_encode, hadamard_phase_matrix, idle_crossing, ladder_pulse,
                    memory_swap, not_phase_matrix, not_phase_theta, one_qubit_hadamard,
                    one_qubit_not, pair_schedule, qpg, qpg_checkpoint_fidelities, resonant_2pi,
                    stark_crossing, toffoli, toffoli_n)
