"""Simulation toolkit for deterministic quantum state transfer between microwave cavity memories."""

from .calibration import (
    RECEIVER,
    SENDER,
    ConversionCalibration,
    DeviceParams,
    fit_calibration,
    g_of_pumps,
    read_calibration_table,
    stark_shifts,
    synthesize_samples,
    write_calibration_table,
)
from .codes import (
    CodeSpec,
    LossChannelSpec,
    apply_loss,
    binomial_code,
    break_even_sweep,
    cardinal_states,
    fit_alternative_channels,
    fit_effective_kerr,
    fock_code,
    loss_angle,
    mean_fidelity,
    optimize_theta_c,
    parity_correct,
)
from .errors import (
    CalibrationRangeError,
    ConfigError,
    FitError,
    InfeasiblePulseError,
    IntegrationError,
    ReconstructionError,
    TruncationError,
)
from .fock import (
    FockOperator,
    QuantumState,
    annihilation,
    beamsplitter_unitary,
    coherent_state,
    fidelity,
    make_fock,
    partial_trace,
    passive_split,
    tensor,
)
from .pulses import PumpWaveform, WavepacketSpec, default_wavepacket, synthesize_capture, synthesize_release
from .tomography import (
    entanglement_metrics,
    mle_reconstruct,
    process_fidelity,
    process_matrix,
    uncondition,
    wigner,
)
from .transfer import ChannelSpec, EfficiencyBudget, default_transfer, simulate_transfer

__version__ = "0.1.0"

__all__ = [
    "RECEIVER",
    "SENDER",
    "ConversionCalibration",
    "DeviceParams",
    "fit_calibration",
    "g_of_pumps",
    "read_calibration_table",
    "stark_shifts",
    "synthesize_samples",
    "write_calibration_table",
    "CodeSpec",
    "LossChannelSpec",
    "apply_loss",
    "binomial_code",
    "break_even_sweep",
    "cardinal_states",
    "fit_alternative_channels",
    "fit_effective_kerr",
    "fock_code",
    "loss_angle",
    "mean_fidelity",
    "optimize_theta_c",
    "parity_correct",
    "CalibrationRangeError",
    "ConfigError",
    "FitError",
    "InfeasiblePulseError",
    "IntegrationError",
    "ReconstructionError",
    "TruncationError",
    "FockOperator",
    "QuantumState",
    "annihilation",
    "beamsplitter_unitary",
    "coherent_state",
    "fidelity",
    "make_fock",
    "partial_trace",
    "passive_split",
    "tensor",
    "entanglement_metrics",
    "mle_reconstruct",
    "process_fidelity",
    "process_matrix",
    "uncondition",
    "wigner",
    "PumpWaveform",
    "WavepacketSpec",
    "default_wavepacket",
    "synthesize_capture",
    "synthesize_release",
    "ChannelSpec",
    "EfficiencyBudget",
    "default_transfer",
    "simulate_transfer",
]
