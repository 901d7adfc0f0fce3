"""Sender to line to receiver transfer, efficiency budget and success bookkeeping.

The cascaded equations of motion are linear, so integrating them once with a
unit memory amplitude gives the complex amplitudes ``r`` (left in the sender
memory) and ``t`` (arriving in the receiver memory).  The quantum channel on
any initial state is then the passive split ``a_s -> r a_s' + t a_r' + e env``.

Transmon excitation and pulse miscalibration are not simulated dynamically;
they enter as end-of-pulse amplitude factors ``sqrt(eta)`` on ``t`` and as
success probabilities.  Memory phases are removed by default, equivalent to
a calibrated frame update on each memory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb

from .calibration import RECEIVER, SENDER, ConversionCalibration, DeviceParams
from .dynamics import CascadeRecord, DriveSchedule, integrate_cascade, schedule_from_pumps
from .errors import IntegrationError
from .fock import QuantumState, make_fock, mean_photon_number, passive_split
from .pulses import (
    DEFAULT_CARRIER_DETUNING,
    DEFAULT_DT,
    DEFAULT_DURATION,
    DEFAULT_XI2,
    PumpWaveform,
    WavepacketSpec,
    default_wavepacket,
    synthesize_capture,
    synthesize_release,
)


@dataclass(frozen=True)
class ChannelSpec:
    """Transmission line between the modules; ``delay`` is documentation only."""

    eta_tx: float = 0.85
    delay: float = 0.0
    circulator_ideal: bool = True

    def __post_init__(self):
        if not 0.0 <= self.eta_tx <= 1.0:
            raise ValueError("eta_tx must lie in [0, 1]")
        if self.delay < 0:
            raise ValueError("delay must be non-negative")


@dataclass(frozen=True)
class EfficiencyBudget:
    """Phenomenological loss budget; the truncations set the pulse design targets."""

    eta_trunc_s: float = 0.99
    eta_excite_s: float = 0.98
    eta_miscal_s: float = 0.98
    eta_tx: float = 0.85
    eta_trunc_r: float = 0.99
    eta_excite_r: float = 0.94
    eta_miscal_r: float = 0.99
    p_success_s: float = 0.78 / 0.87
    p_success_r: float = 0.87

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def eta_release(self) -> float:
        return self.eta_trunc_s * self.eta_excite_s * self.eta_miscal_s

    @property
    def eta_capture(self) -> float:
        return self.eta_trunc_r * self.eta_excite_r * self.eta_miscal_r

    @property
    def eta_total(self) -> float:
        return self.eta_release * self.eta_tx * self.eta_capture

    @property
    def p_success(self) -> float:
        return self.p_success_s * self.p_success_r

    @property
    def amplitude_factor(self) -> float:
        """Non-simulated factors applied to the transmitted amplitude."""
        return float(np.sqrt(self.eta_excite_s * self.eta_miscal_s * self.eta_excite_r * self.eta_miscal_r))

    @classmethod
    def ideal(cls, eta_trunc: float = 0.9999) -> "EfficiencyBudget":
        return cls(eta_trunc, 1.0, 1.0, 1.0, eta_trunc, 1.0, 1.0, 1.0, 1.0)


@dataclass(frozen=True)
class Node:
    """One module with its calibration and pump waveform (``None`` means pumps off)."""

    params: DeviceParams
    cal: ConversionCalibration
    waveform: PumpWaveform | None

    def schedule(self, n_steps: int, dt: float) -> DriveSchedule:
        if self.waveform is None:
            return DriveSchedule.off(n_steps, dt)
        return schedule_from_pumps(self.cal, self.waveform.samples, self.waveform.static_amplitude,
                                   self.waveform.grid_dt)


def prepare_nodes(
    budget: EfficiencyBudget | None = None,
    sender_params: DeviceParams = SENDER,
    receiver_params: DeviceParams = RECEIVER,
    sender_cal: ConversionCalibration | None = None,
    receiver_cal: ConversionCalibration | None = None,
    energy_fraction: float = 1.0,
    duration: float = DEFAULT_DURATION,
    dt: float = DEFAULT_DT,
    carrier_detuning: float = DEFAULT_CARRIER_DETUNING,
    xi2: complex = DEFAULT_XI2,
    capture: bool = True,
) -> tuple[Node, Node, WavepacketSpec]:
    """Synthesize release and capture waveforms for a unit stored photon number."""
    budget = budget or EfficiencyBudget()
    sender_cal = sender_cal or ConversionCalibration.from_device(sender_params)
    receiver_cal = receiver_cal or ConversionCalibration.from_device(receiver_params)
    spec = default_wavepacket(duration, energy_fraction, budget.eta_trunc_s, 1.0, carrier_detuning, dt)
    release = synthesize_release(sender_params, sender_cal, spec, 1.0, xi2)
    catch = None
    if capture:
        catch = synthesize_capture(receiver_params, receiver_cal, spec, budget.eta_trunc_r, xi2)
    return Node(sender_params, sender_cal, release), Node(receiver_params, receiver_cal, catch), spec


@dataclass(frozen=True)
class TransferOutcome:
    """Trajectories, efficiencies and the received quantum state of one transfer."""

    record: CascadeRecord
    r: complex
    t: complex
    eta_measured: float
    reflected_fraction: float
    received_state: QuantumState
    p_success: float
    incident_energy: float
    joint_state: QuantumState | None = None
    budget: EfficiencyBudget = field(default_factory=EfficiencyBudget)

    @property
    def times(self):
        return self.record.times

    @property
    def a_s(self):
        return self.record.a_s

    @property
    def b_s(self):
        return self.record.b_s

    @property
    def a_r(self):
        return self.record.a_r

    @property
    def b_r(self):
        return self.record.b_r

    @property
    def b_line(self):
        return self.record.b_line


def _run_classical(sender: Node, receiver: Node | None, channel: ChannelSpec) -> CascadeRecord:
    if sender.waveform is None:
        raise IntegrationError("the sender needs a release waveform")
    n, dt = sender.waveform.n_steps, sender.waveform.grid_dt
    if receiver is not None and receiver.waveform is not None:
        if receiver.waveform.n_steps != n or not np.isclose(receiver.waveform.grid_dt, dt, rtol=1e-12, atol=0.0):
            raise IntegrationError("sender and receiver waveforms are on different grids")
    r_params = receiver.params if receiver is not None else sender.params
    r_drive = receiver.schedule(n, dt) if receiver is not None else None
    return integrate_cascade(sender.params, sender.schedule(n, dt), r_params, r_drive, channel.eta_tx)


def simulate_transfer(
    sender: Node,
    receiver: Node | None,
    channel: ChannelSpec,
    initial: QuantumState,
    budget: EfficiencyBudget | None = None,
    correct_phase: bool = True,
    joint: bool = False,
) -> TransferOutcome:
    """Transfer ``initial`` (a sender-memory state) and return the received state.

    Trajectories in the outcome are for a unit initial memory amplitude; they
    scale linearly with the amplitude of a classical input.
    """
    budget = budget or EfficiencyBudget(eta_tx=channel.eta_tx)
    if len(initial.subsystems) != 1:
        raise ValueError("initial state must be a single-mode sender-memory state")
    rec = _run_classical(sender, receiver, channel)
    r = complex(rec.a_s[-1])
    t = complex(rec.a_r[-1]) * budget.amplitude_factor
    if correct_phase:
        r, t = complex(abs(r)), complex(abs(t))

    received = passive_split(initial, [t])
    n_in = mean_photon_number(initial)
    eta = mean_photon_number(received) / n_in if n_in > 0 else abs(t) ** 2

    incident = float(np.trapezoid(np.abs(rec.b_line) ** 2, dx=rec.times[1] - rec.times[0]))
    if incident > 0:
        absorbed = incident - rec.reflected[-1]
        reflected = rec.reflected[-1] + absorbed * (1.0 - budget.eta_excite_r)
        reflected_fraction = float(reflected / incident)
    else:
        reflected_fraction = 0.0

    joint_state = passive_split(initial, [r, t]) if joint else None
    return TransferOutcome(
        record=rec, r=r, t=t, eta_measured=float(eta), reflected_fraction=reflected_fraction,
        received_state=received, p_success=budget.p_success, incident_energy=incident,
        joint_state=joint_state, budget=budget,
    )


def simulate_half_release_entanglement(
    sender_params: DeviceParams = SENDER,
    receiver_params: DeviceParams = RECEIVER,
    channel: ChannelSpec | None = None,
    budget: EfficiencyBudget | None = None,
    dim: int = 5,
    energy_fraction: float = 0.5,
    **node_kwargs,
) -> TransferOutcome:
    """Release half of a stored photon and catch it with the unchanged capture pulse.

    The outcome's ``joint_state`` is the sender-memory x receiver-memory
    density matrix on ``dim`` levels each.
    """
    channel = channel or ChannelSpec()
    budget = budget or EfficiencyBudget(eta_tx=channel.eta_tx)
    sender, receiver, _ = prepare_nodes(budget, sender_params, receiver_params,
                                        energy_fraction=energy_fraction, **node_kwargs)
    return simulate_transfer(sender, receiver, channel, make_fock(1, dim), budget, joint=True)


def _loss_populations(p_in: np.ndarray, transmissivity: float) -> np.ndarray:
    d = len(p_in)
    n = np.arange(d)
    # P(k | m) = C(m, k) T^k (1-T)^(m-k)
    kernel = comb(n[None, :], n[:, None]) * transmissivity ** n[:, None] * (1 - transmissivity) ** (
        np.clip(n[None, :] - n[:, None], 0, None)
    )
    kernel = np.where(n[:, None] <= n[None, :], kernel, 0.0)
    return kernel @ p_in


def truncate_and_measure(outcome: TransferOutcome, t_cut: float, initial: QuantumState | None = None) -> dict:
    """Memory populations if the protocol is stopped at ``t_cut``.

    Energy still in the communication modes at ``t_cut`` leaks out once the
    pumps stop, so only the memory amplitudes count.  Budget factors are
    end-of-pulse quantities and are not applied here.
    """
    rec = outcome.record
    if not 0.0 <= t_cut <= rec.times[-1] * (1 + 1e-12):
        raise ValueError("t_cut lies outside the pulse")
    a_s = np.interp(t_cut, rec.times, np.abs(rec.a_s) ** 2)
    a_r = np.interp(t_cut, rec.times, np.abs(rec.a_r) ** 2)
    a0 = abs(rec.a_s[0]) ** 2
    initial = initial if initial is not None else make_fock(1, 4)
    p_in = initial.populations()
    ps = _loss_populations(p_in, min(a_s / a0, 1.0))
    pr = _loss_populations(p_in, min(a_r / a0, 1.0))
    n = np.arange(len(p_in))
    return {
        "t": float(t_cut),
        "sender_p0": float(ps[0]), "sender_p1": float(ps[1]) if len(ps) > 1 else 0.0,
        "receiver_p0": float(pr[0]), "receiver_p1": float(pr[1]) if len(pr) > 1 else 0.0,
        "sender_nbar": float(n @ ps), "receiver_nbar": float(n @ pr),
    }


def population_trace(outcome: TransferOutcome, initial: QuantumState | None = None, every: int = 1) -> list[dict]:
    return [truncate_and_measure(outcome, t, initial) for t in outcome.record.times[::every]]


def apply_success_bounds(value: float, p_success: float) -> float:
    """Deterministic worst-case lower bound ``p_success * value`` of a heralded figure."""
    if not 0.0 <= value <= 1.0 or not 0.0 <= p_success <= 1.0:
        raise ValueError("value and p_success must lie in [0, 1]")
    return value * p_success


# --------------------------------------------------------------------------
# transmission-loss estimate from steady-state populations


def received_population_ratio(kappa_s: float, kappa_r: float, eta_tx: float, delta_r: float) -> float:
    """``n_r / n_s`` for a steadily driven sender output mode feeding the receiver output mode."""
    if kappa_r <= 0:
        raise ValueError("kappa_r must be positive")
    return kappa_s * kappa_r * eta_tx / ((kappa_r / 2) ** 2 + delta_r**2)


def stark_population_transfer_estimate(n_s: float, n_r: float, kappa_s: float, kappa_r: float,
                                       delta_r: float) -> float:
    """Invert the steady-state population ratio for the line efficiency."""
    if kappa_r <= 0:
        raise ValueError("kappa_r must be positive")
    if n_s <= 0:
        raise ValueError("n_s must be positive")
    return n_r / n_s * ((kappa_r / 2) ** 2 + delta_r**2) / (kappa_s * kappa_r)


def simulate_steady_state_drive(params_s: DeviceParams, params_r: DeviceParams, channel: ChannelSpec,
                                delta_r: float, drive: complex = 1e3, duration: float = 10e-6,
                                dt: float = 2e-9) -> tuple[float, float]:
    """Drive the sender communication mode with a constant tone; return steady ``(n_s, n_r)``.

    The tone enters through a weak port, so the line carries only the field
    radiated by the sender mode.
    """
    n = int(round(duration / dt))
    s_drive = DriveSchedule.off(n, dt)
    zeros = np.zeros(2 * n + 1)
    r_drive = DriveSchedule(zeros.astype(complex), zeros, np.full(2 * n + 1, float(delta_r)), dt)
    ext = np.full(2 * n + 1, complex(drive))
    rec = integrate_cascade(params_s.lossless(), s_drive, params_r.lossless(), r_drive, channel.eta_tx,
                            a_s0=0.0, drive_b_s=ext)
    return float(abs(rec.b_s[-1]) ** 2), float(abs(rec.b_r[-1]) ** 2)


def default_transfer(budget: EfficiencyBudget | None = None, initial: QuantumState | None = None,
                     **node_kwargs) -> TransferOutcome:
    """Transfer with the shipped device constants and budget."""
    budget = budget or EfficiencyBudget()
    sender, receiver, _ = prepare_nodes(budget, **node_kwargs)
    initial = initial if initial is not None else make_fock(1, 10)
    return simulate_transfer(sender, receiver, ChannelSpec(eta_tx=budget.eta_tx), initial, budget)


__all__ = [
    "ChannelSpec", "EfficiencyBudget", "Node", "TransferOutcome", "prepare_nodes", "simulate_transfer",
    "simulate_half_release_entanglement", "truncate_and_measure", "population_trace",
    "apply_success_bounds", "received_population_ratio", "stark_population_transfer_estimate",
    "simulate_steady_state_drive", "default_transfer",
]
