"""Pump-waveform synthesis for shaped release and capture.

Given the target field ``b(t)`` of the communication mode, the ``b``
equation of motion fixes ``g^* a`` at every instant:

    release:  g^* a = b' + i delta_b b + (kappa_out/2) b,    b = b_out / sqrt(kappa_out)
    capture:  g^* a = b' + i delta_b b - (kappa_out/2) b,    b = b_in  / sqrt(kappa_out)

(the capture form follows from demanding zero reflected field).  With
``g = g0 xi1 xi2`` and ``delta_b`` linear in ``x = |xi1|^2``, taking the modulus
squared turns this into a quadratic for ``x`` whose smaller root is the
physical branch.  ``xi1`` then follows from the phase of ``g^* a``, and the
memory amplitude ``a`` is advanced with RK4.  The ``xi1`` phase therefore
tracks the Stark shift of the memory automatically.

The capture is solved from a virtual initial memory amplitude
``|a(0)|^2 = 1/eta_trunc - 1`` per unit incident energy.  Because the lossless
receiver is a unitary linear map, the same waveform acting on an empty
memory absorbs exactly ``eta_trunc`` of the incident energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .calibration import MHZ, XI_SQ_MAX, ConversionCalibration, DeviceParams
from .dynamics import integrate_module, schedule_from_pumps
from .errors import InfeasiblePulseError

DEFAULT_DURATION = 6e-6
DEFAULT_DT = 2e-9
DEFAULT_RING_TIME = 200e-9
DEFAULT_CARRIER_DETUNING = -1.3 * MHZ
DEFAULT_XI2 = complex(np.sqrt(XI_SQ_MAX))
DEFAULT_ETA_TRUNC_CAPTURE = 0.95


@dataclass(frozen=True)
class WavepacketSpec:
    """Target traveling wavepacket ``b_out(t) = envelope(t) exp(-i carrier_detuning t)``.

    ``envelope`` is sampled on ``t_k = k dt`` for ``k = 0..N`` in units of
    sqrt(photons/s); its squared integral is the emitted photon number.
    """

    envelope: np.ndarray
    dt: float
    carrier_detuning: float = DEFAULT_CARRIER_DETUNING
    energy_fraction: float = 1.0

    def __post_init__(self):
        env = np.asarray(self.envelope, dtype=float)
        if env.ndim != 1 or len(env) < 2:
            raise ValueError("envelope must be a 1-D array with at least two samples")
        if np.any(env < 0):
            raise ValueError("envelope must be non-negative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0.0 < self.energy_fraction <= 1.0 and self.energy_fraction != 0.0:
            raise ValueError("energy_fraction must lie in (0, 1]")
        env = env.copy()
        env.flags.writeable = False
        object.__setattr__(self, "envelope", env)

    @property
    def n_steps(self) -> int:
        return len(self.envelope) - 1

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def energy(self) -> float:
        return float(np.trapezoid(self.envelope**2, dx=self.dt))

    def field(self) -> np.ndarray:
        return self.envelope * np.exp(-1j * self.carrier_detuning * self.times)

    def scaled(self, factor: float) -> "WavepacketSpec":
        return WavepacketSpec(self.envelope * factor, self.dt, self.carrier_detuning, self.energy_fraction)

    def field_and_derivative(self) -> tuple[np.ndarray, np.ndarray]:
        """``b_out`` and its time derivative at grid points and half steps (length ``2N+1``)."""
        t = self.times
        fine_t = np.arange(2 * self.n_steps + 1) * (self.dt / 2)
        spline = CubicSpline(t, self.envelope)
        env, denv = spline(fine_t), spline(fine_t, 1)
        env[::2] = self.envelope
        phase = np.exp(-1j * self.carrier_detuning * fine_t)
        return env * phase, (denv - 1j * self.carrier_detuning * env) * phase


def default_wavepacket(
    duration: float = DEFAULT_DURATION,
    energy_fraction: float = 1.0,
    eta_trunc: float = 1.0,
    stored_energy: float = 1.0,
    carrier_detuning: float = DEFAULT_CARRIER_DETUNING,
    dt: float = DEFAULT_DT,
) -> WavepacketSpec:
    """``sin^2(pi t / T)`` envelope carrying ``energy_fraction * eta_trunc * stored_energy`` photons."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    n = int(round(duration / dt))
    if n < 4 or not np.isclose(n * dt, duration, rtol=1e-9, atol=0.0):
        raise ValueError(f"duration {duration} is not a multiple of dt {dt}")
    t = np.arange(n + 1) * dt
    shape = np.sin(np.pi * t / duration) ** 2
    shape[0] = shape[-1] = 0.0
    target = energy_fraction * eta_trunc * stored_energy
    norm = np.trapezoid(shape**2, dx=dt)
    return WavepacketSpec(shape * np.sqrt(target / norm), dt, carrier_detuning, energy_fraction)


@dataclass(frozen=True)
class PumpWaveform:
    """Sampled pump envelope ``xi1(t)`` with a constant ``xi2`` during ``[0, T]``.

    ``xi2`` rings up during ``[-ring_time, 0]`` and down during
    ``[T, T + ring_time]`` with a C1 ``sin^2`` profile; ``xi1`` vanishes there,
    so no conversion happens outside ``[0, T]``.  ``pump_detuning`` and
    ``relative_detuning`` document the pump placement; they are absorbed in
    the rotating frame.
    """

    samples: np.ndarray
    static_amplitude: complex
    grid_dt: float
    ring_time: float = DEFAULT_RING_TIME
    role: str = "release"
    residual: float = float("nan")
    pump_detuning: float = 0.0
    relative_detuning: float = 0.0
    memory: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex).copy()
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def n_steps(self) -> int:
        return len(self.samples) - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.grid_dt

    @property
    def duration(self) -> float:
        return self.n_steps * self.grid_dt

    def xi2_profile(self, t) -> np.ndarray:
        """``xi2`` at arbitrary times, including the ring-up and ring-down."""
        t = np.asarray(t, dtype=float)
        T, tr = self.duration, self.ring_time
        env = np.ones_like(t)
        if tr > 0:
            up = (t >= -tr) & (t < 0)
            env[up] = np.sin(0.5 * np.pi * (t[up] + tr) / tr) ** 2
            down = (t > T) & (t <= T + tr)
            env[down] = np.cos(0.5 * np.pi * (t[down] - T) / tr) ** 2
        env[(t < -tr) | (t > T + tr)] = 0.0
        return env * self.static_amplitude

    @classmethod
    def zero(cls, n_steps: int, dt: float, xi2: complex = DEFAULT_XI2, role: str = "release") -> "PumpWaveform":
        return cls(np.zeros(n_steps + 1, dtype=complex), xi2, dt, role=role, residual=0.0)


def _invert(
    params: DeviceParams,
    cal: ConversionCalibration,
    b: np.ndarray,
    bdot: np.ndarray,
    dt: float,
    a0: complex,
    xi2: complex,
    kappa_sign: float,
) -> tuple[np.ndarray, np.ndarray]:
    """March ``a`` forward, solving for ``|xi1|^2`` at each evaluation point.

    ``b`` and ``bdot`` are given at grid points and half steps.  Returns
    ``(xi1, a)`` on the grid.
    """
    kappa, kappa0 = params.kappa_out, params.kappa_0
    A1, A2 = cal.stark_a
    B1, B2 = cal.stark_b
    p2 = abs(xi2) ** 2
    c_a = A2 * p2
    c_b = B2 * p2
    gx = cal.g0 * xi2
    K0 = abs(gx) ** 2
    P_all = bdot + kappa_sign * 0.5 * kappa * b
    n = (len(b) - 1) // 2
    times = np.arange(2 * n + 1) * (dt / 2)

    def solve(i, a):
        """Return (x, Q) where Q = g^* a, or raise if infeasible."""
        P, bb = P_all[i], b[i]
        b2 = abs(bb) ** 2
        Pc = P + 1j * c_b * bb
        gamma = abs(Pc) ** 2
        if gamma == 0.0:
            return 0.0, 0.0j
        K = K0 * abs(a) ** 2
        q = (P.conjugate() * bb).imag
        beta = 2 * B1 * (c_b * b2 - q) - K
        alpha = B1**2 * b2
        disc = beta * beta - 4 * alpha * gamma
        if disc < 0 or beta >= 0:
            raise InfeasiblePulseError(
                f"no pump amplitude reproduces the wavepacket at t = {times[i]:.4g} s", time=float(times[i])
            )
        x = 2 * gamma / (-beta + np.sqrt(disc))
        return x, P + 1j * (B1 * x + c_b) * bb

    def rhs(i, a):
        x, Q = solve(i, a)
        g = (Q / a).conjugate() if Q != 0 else 0.0
        return -g * b[i] - 1j * (A1 * x + c_a) * a - 0.5 * kappa0 * a

    a_grid = np.empty(n + 1, dtype=complex)
    xi1 = np.empty(n + 1, dtype=complex)
    a = complex(a0)
    half = 0.5 * dt
    limit = cal.xi_sq_max * (1 + 1e-9)
    for k in range(n + 1):
        i = 2 * k
        x, Q = solve(i, a)
        if x > limit:
            raise InfeasiblePulseError(
                f"required |xi1|^2 = {x:.4g} exceeds the calibrated range {cal.xi_sq_max:g} "
                f"(|g|/2pi = {abs(gx) * np.sqrt(x) / (2 * np.pi) / 1e3:.4g} kHz) at t = {k * dt:.4g} s",
                time=k * dt,
            )
        a_grid[k] = a
        xi1[k] = _xi1_from(Q, cal, xi2, a) if Q != 0 else 0.0
        if k == n:
            break
        k1 = rhs(i, a)
        k2 = rhs(i + 1, a + half * k1)
        k3 = rhs(i + 1, a + half * k2)
        k4 = rhs(i + 2, a + dt * k3)
        a = a + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if a == 0 or not np.isfinite(a):
            raise InfeasiblePulseError(f"memory emptied before t = {(k + 1) * dt:.4g} s", time=(k + 1) * dt)
    return xi1, a_grid


def _xi1_from(Q: complex, cal: ConversionCalibration, xi2: complex, a: complex) -> complex:
    # g^* a = Q  with  g = g0 xi1 xi2   =>   xi1 = conj(Q / a) / (g0 xi2)
    return (Q / a).conjugate() / (cal.g0 * xi2)


def _forward_residual(params, cal, waveform: PumpWaveform, a0: complex, target: np.ndarray, b_in=None) -> float:
    """Relative L2 mismatch between the simulated output field and ``target``."""
    drive = schedule_from_pumps(cal, waveform.samples, waveform.static_amplitude, waveform.grid_dt)
    rec = integrate_module(params, drive, a0=a0, b_in=b_in)
    norm = np.linalg.norm(target)
    if norm == 0:
        return float(np.linalg.norm(rec.b_out_s))
    return float(np.linalg.norm(rec.b_out_s - target) / norm)


def synthesize_release(
    params: DeviceParams,
    cal: ConversionCalibration,
    spec: WavepacketSpec,
    stored_energy: float = 1.0,
    xi2: complex = DEFAULT_XI2,
    ring_time: float = DEFAULT_RING_TIME,
) -> PumpWaveform:
    """Pump envelope that releases ``spec`` from a memory holding ``stored_energy`` photons.

    The returned waveform carries ``residual``, the relative L2 error of a
    forward simulation against the requested field.
    """
    if stored_energy <= 0:
        raise ValueError("stored_energy must be positive")
    if spec.energy() == 0:
        return PumpWaveform.zero(spec.n_steps, spec.dt, xi2, "release")
    bout, dbout = spec.field_and_derivative()
    sk = np.sqrt(params.kappa_out)
    a0 = np.sqrt(stored_energy)
    xi1, a = _invert(params, cal, bout / sk, dbout / sk, spec.dt, a0, xi2, +1.0)
    wf = PumpWaveform(xi1, xi2, spec.dt, ring_time, "release", memory=a)
    res = _forward_residual(params, cal, wf, a0, spec.field())
    return PumpWaveform(xi1, xi2, spec.dt, ring_time, "release", residual=res, memory=a)


def synthesize_capture(
    params: DeviceParams,
    cal: ConversionCalibration,
    incoming: WavepacketSpec,
    eta_trunc_r: float = DEFAULT_ETA_TRUNC_CAPTURE,
    xi2: complex = DEFAULT_XI2,
    ring_time: float = DEFAULT_RING_TIME,
) -> PumpWaveform:
    """Pump envelope that absorbs ``eta_trunc_r`` of the incident packet without reflection.

    Only the shape and carrier of ``incoming`` matter: the packet is
    normalized first, so any positive rescaling gives the same waveform.
    ``residual`` is the reflected-field L2 norm relative to the incident one,
    evaluated for the virtual initial memory amplitude the design assumes.
    """
    if not 0.0 < eta_trunc_r < 1.0:
        raise ValueError("eta_trunc_r must lie in (0, 1)")
    energy = incoming.energy()
    if energy == 0:
        return PumpWaveform.zero(incoming.n_steps, incoming.dt, xi2, "capture")
    unit = incoming.scaled(1.0 / np.sqrt(energy))
    bin_, dbin = unit.field_and_derivative()
    sk = np.sqrt(params.kappa_out)
    a_virtual = np.sqrt(1.0 / eta_trunc_r - 1.0)
    xi1, a = _invert(params, cal, bin_ / sk, dbin / sk, unit.dt, a_virtual, xi2, -1.0)
    wf = PumpWaveform(xi1, xi2, unit.dt, ring_time, "capture", memory=a)
    res = _forward_residual(params, cal, wf, a_virtual, np.zeros(unit.n_steps + 1), b_in=bin_)
    res /= np.linalg.norm(unit.field())
    return PumpWaveform(xi1, xi2, unit.dt, ring_time, "capture", residual=res, memory=a)


_WAVEFORM_HEADER = "t [s], xi1_re, xi1_im, xi2_re, xi2_im [dimensionless, sqrt circulating photons]"


def export_waveform(path: str | Path, waveform: PumpWaveform, include_ring: bool = True) -> None:
    """Write ``(t, xi1_re, xi1_im, xi2_re, xi2_im)`` rows, including the ``xi2`` ramps if asked."""
    t = waveform.times
    xi1 = waveform.samples
    if include_ring and waveform.ring_time > 0:
        n_ring = max(int(round(waveform.ring_time / waveform.grid_dt)), 1)
        pre = -np.arange(n_ring, 0, -1) * waveform.grid_dt
        post = t[-1] + np.arange(1, n_ring + 1) * waveform.grid_dt
        t = np.concatenate([pre, t, post])
        xi1 = np.concatenate([np.zeros(n_ring), xi1, np.zeros(n_ring)])
    xi2 = waveform.xi2_profile(t)
    data = np.column_stack([t, xi1.real, xi1.imag, xi2.real, xi2.imag])
    np.savetxt(path, data, delimiter=",", header=_WAVEFORM_HEADER, fmt="%.12g")


def import_waveform(path: str | Path, role: str = "release", ring_time: float = DEFAULT_RING_TIME) -> PumpWaveform:
    """Read a table written by :func:`export_waveform` back into a waveform on ``[0, T]``."""
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    t = data[:, 0]
    body = t >= -1e-15
    xi2 = data[body, 3] + 1j * data[body, 4]
    plateau = np.abs(xi2) >= np.max(np.abs(xi2)) * (1 - 1e-12)
    keep = np.flatnonzero(body)[plateau]
    dt = float(np.median(np.diff(t)))
    xi1 = data[keep, 1] + 1j * data[keep, 2]
    return PumpWaveform(xi1, complex(xi2[plateau][0]), dt, ring_time, role)
