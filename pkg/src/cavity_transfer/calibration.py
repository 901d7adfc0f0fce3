"""Device constants and the pump-to-coupling calibration.

Pump amplitudes are dimensionless "circulating photon" amplitudes, so
``|xi|**2`` is a photon number.  All rates are angular (rad/s).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CalibrationRangeError, FitError

TWO_PI = 2.0 * np.pi
KHZ = TWO_PI * 1e3
MHZ = TWO_PI * 1e6

#: peak conversion rate (rad/s) reachable at the edge of the calibrated range
G_MAX = TWO_PI * 400e3
#: calibrated range bound on each pump power, in circulating photons
XI_SQ_MAX = 50.0


@dataclass(frozen=True)
class DeviceParams:
    """Hamiltonian and damping constants of one module (memory ``a``, output ``b``, transmon ``t``)."""

    omega_a: float
    omega_b: float
    omega_t: float
    chi_ab: float
    chi_at: float
    chi_bt: float
    chi_aa: float
    chi_bb: float
    chi_tt: float
    kappa_out: float
    kappa_0: float
    T1_a: float
    T2R_a: float
    T1_t: float
    T2R_t: float
    p_excite_static: float
    n_thermal_a: float = 0.0
    name: str = "module"

    def __post_init__(self):
        for field_name in ("kappa_out", "kappa_0", "T1_a", "T2R_a", "T1_t", "T2R_t"):
            if getattr(self, field_name) < 0:
                raise ValueError(f"{field_name} must be non-negative")
        if not 0.0 <= self.p_excite_static <= 1.0:
            raise ValueError("p_excite_static must lie in [0, 1]")

    def with_updates(self, **changes) -> "DeviceParams":
        return replace(self, **changes)

    def lossless(self) -> "DeviceParams":
        """Copy with intrinsic memory decay switched off."""
        return replace(self, kappa_0=0.0)


def _module(name, fa, fb, ft, chi_ab_khz, chi_at_mhz, chi_bt_mhz, chi_aa_khz, chi_bb_khz, chi_tt_mhz,
            t1a_us, t2ra_us, t1b_us, t1t_us, t2rt_us, p_exc, nth):
    return DeviceParams(
        omega_a=fa * MHZ, omega_b=fb * MHZ, omega_t=ft * MHZ,
        chi_ab=chi_ab_khz * KHZ, chi_at=chi_at_mhz * MHZ, chi_bt=chi_bt_mhz * MHZ,
        chi_aa=chi_aa_khz * KHZ, chi_bb=chi_bb_khz * KHZ, chi_tt=chi_tt_mhz * MHZ,
        kappa_out=1.0 / (t1b_us * 1e-6), kappa_0=1.0 / (t1a_us * 1e-6),
        T1_a=t1a_us * 1e-6, T2R_a=t2ra_us * 1e-6, T1_t=t1t_us * 1e-6, T2R_t=t2rt_us * 1e-6,
        p_excite_static=p_exc, n_thermal_a=nth, name=name,
    )


SENDER = _module("sender", 4219.3, 10031.5, 6156.1, -16.0, -2.86, -2.4, -8.0, -8.0, -183.43,
                 460.0, 102.0, 0.14, 26.0, 12.0, 0.195, 0.166)
RECEIVER = _module("receiver", 4269.6, 10031.5, 6417.6, -12.0, -2.29, -2.18, -5.0, -6.0, -196.17,
                   770.0, 130.0, 0.11, 27.0, 12.0, 0.209, 0.172)


@dataclass(frozen=True)
class ConversionCalibration:
    """Bilinear conversion model ``g = g0 xi1 xi2`` plus linear Stark map.

    ``delta_a = stark_a[0] |xi1|^2 + stark_a[1] |xi2|^2`` and
    ``delta_b = stark_b[0] |xi1|^2 + stark_b[1] |xi2|^2``, both evaluated at the
    instantaneous amplitudes.
    """

    g0: complex
    stark_a: tuple[float, float]
    stark_b: tuple[float, float]
    xi_sq_max: float = XI_SQ_MAX
    model_order: str = "bilinear"
    residual_norm: float = 0.0

    @classmethod
    def from_device(cls, params: DeviceParams, g_max: float = G_MAX, xi_sq_max: float = XI_SQ_MAX):
        """Default map: ``|g| = g_max`` when both pumps sit at the range edge."""
        return cls(
            g0=complex(g_max / xi_sq_max),
            stark_a=(2.0 * params.chi_aa, params.chi_ab),
            stark_b=(params.chi_ab, 2.0 * params.chi_bb),
            xi_sq_max=xi_sq_max,
        )

    def without_stark(self) -> "ConversionCalibration":
        return replace(self, stark_a=(0.0, 0.0), stark_b=(0.0, 0.0))

    @property
    def g_max(self) -> float:
        return abs(self.g0) * self.xi_sq_max


def _check_range(cal: ConversionCalibration, xi, label: str) -> None:
    power = np.abs(np.asarray(xi)) ** 2
    if np.any(power > cal.xi_sq_max * (1 + 1e-9)):
        raise CalibrationRangeError(
            f"|{label}|^2 = {np.max(power):.4g} exceeds the calibrated range {cal.xi_sq_max:g}"
        )


def g_of_pumps(cal: ConversionCalibration, xi1, xi2):
    """Conversion rate (rad/s); refuses amplitudes outside the calibrated range."""
    _check_range(cal, xi1, "xi1")
    _check_range(cal, xi2, "xi2")
    g = cal.g0 * np.asarray(xi1, dtype=complex) * np.asarray(xi2, dtype=complex)
    return complex(g) if g.ndim == 0 else g


def stark_shifts(cal: ConversionCalibration, xi1, xi2):
    """``(delta_a, delta_b)`` in rad/s."""
    p1 = np.abs(np.asarray(xi1)) ** 2
    p2 = np.abs(np.asarray(xi2)) ** 2
    da = cal.stark_a[0] * p1 + cal.stark_a[1] * p2
    db = cal.stark_b[0] * p1 + cal.stark_b[1] * p2
    if np.ndim(da) == 0:
        return float(da), float(db)
    return da, db


@dataclass(frozen=True)
class CalibrationSample:
    xi1: complex
    xi2: complex
    g: complex
    delta_a: float
    delta_b: float


def synthesize_samples(
    cal: ConversionCalibration,
    xi1_values: Sequence[complex],
    xi2_values: Sequence[complex],
    noise: float = 0.0,
    rng: np.random.Generator | None = None,
) -> list[CalibrationSample]:
    """Synthetic calibration data on the product grid of pump amplitudes.

    ``noise`` is a relative Gaussian standard deviation applied independently
    to each measured quantity.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    out = []
    for x1 in xi1_values:
        for x2 in xi2_values:
            g = g_of_pumps(cal, x1, x2)
            da, db = stark_shifts(cal, x1, x2)
            if noise:
                g = g * (1 + noise * rng.standard_normal()) + 1j * noise * abs(g) * rng.standard_normal()
                da *= 1 + noise * rng.standard_normal()
                db *= 1 + noise * rng.standard_normal()
            out.append(CalibrationSample(complex(x1), complex(x2), complex(g), float(da), float(db)))
    return out


def fit_calibration(samples: Iterable[CalibrationSample], xi_sq_max: float = XI_SQ_MAX) -> ConversionCalibration:
    """Least-squares fit of ``g0`` and the four Stark coefficients."""
    samples = list(samples)
    if len(samples) < 4:
        raise FitError(f"need at least 4 samples, got {len(samples)}")
    xi1 = np.array([s.xi1 for s in samples], dtype=complex)
    xi2 = np.array([s.xi2 for s in samples], dtype=complex)
    g = np.array([s.g for s in samples], dtype=complex)
    da = np.array([s.delta_a for s in samples], dtype=float)
    db = np.array([s.delta_b for s in samples], dtype=float)

    design = np.column_stack([np.abs(xi1) ** 2, np.abs(xi2) ** 2])
    if np.linalg.matrix_rank(design) < 2:
        raise FitError("samples do not span both pump axes")
    prod = xi1 * xi2
    if not np.any(np.abs(prod) > 0):
        raise FitError("no sample has both pumps on; g0 is undetermined")

    g0 = np.vdot(prod, g) / np.vdot(prod, prod)
    coef_a, *_ = np.linalg.lstsq(design, da, rcond=None)
    coef_b, *_ = np.linalg.lstsq(design, db, rcond=None)
    resid = np.concatenate([np.abs(g - g0 * prod), design @ coef_a - da, design @ coef_b - db])
    return ConversionCalibration(
        g0=complex(g0),
        stark_a=(float(coef_a[0]), float(coef_a[1])),
        stark_b=(float(coef_b[0]), float(coef_b[1])),
        xi_sq_max=xi_sq_max,
        residual_norm=float(np.linalg.norm(resid)),
    )


_TABLE_COLUMNS = ("xi1_re", "xi1_im", "xi2_re", "xi2_im", "g_re", "g_im", "delta_a", "delta_b")


def write_calibration_table(path: str | Path, samples: Iterable[CalibrationSample]) -> None:
    rows = [
        (s.xi1.real, s.xi1.imag, s.xi2.real, s.xi2.imag, s.g.real, s.g.imag, s.delta_a, s.delta_b)
        for s in samples
    ]
    header = (
        "pump amplitudes dimensionless (sqrt circulating photons); g, delta_a, delta_b in rad/s\n"
        + ",".join(_TABLE_COLUMNS)
    )
    np.savetxt(path, np.array(rows, dtype=float).reshape(-1, 8), delimiter=",", header=header, fmt="%.17g")


def read_calibration_table(path: str | Path) -> list[CalibrationSample]:
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape[1] != 8:
        raise ValueError(f"expected 8 columns {_TABLE_COLUMNS}, got {data.shape[1]}")
    return [
        CalibrationSample(complex(r[0], r[1]), complex(r[2], r[3]), complex(r[4], r[5]), float(r[6]), float(r[7]))
        for r in data
    ]
