from dataclasses import replace

import numpy as np
import pytest

from cavity_transfer.calibration import MHZ, RECEIVER, SENDER, ConversionCalibration
from cavity_transfer.dynamics import integrate_module, schedule_from_pumps
from cavity_transfer.errors import InfeasiblePulseError
from cavity_transfer.pulses import (
    PumpWaveform,
    default_wavepacket,
    export_waveform,
    import_waveform,
    synthesize_capture,
    synthesize_release,
)

CAL_S = ConversionCalibration.from_device(SENDER)
CAL_R = ConversionCalibration.from_device(RECEIVER)


def _spectral_width(field, dt):
    spec = np.abs(np.fft.fft(field, 16 * len(field))) ** 2
    nu = np.fft.fftfreq(16 * len(field), dt)
    mean = np.sum(nu * spec) / spec.sum()
    return np.sqrt(np.sum((nu - mean) ** 2 * spec) / spec.sum())


def _emit(params, cal, wf, a0=1.0, b_in=None):
    drive = schedule_from_pumps(cal, wf.samples, wf.static_amplitude, wf.grid_dt)
    return integrate_module(params, drive, a0, b_in)


def test_wavepacket_energy_and_shape():
    spec = default_wavepacket(6e-6, 0.5, 0.99)
    assert spec.energy() == pytest.approx(0.495, rel=1e-12)
    assert spec.envelope[0] == 0.0 and spec.envelope[-1] == 0.0
    assert np.argmax(spec.envelope) == spec.n_steps // 2


def test_wavepacket_grid_must_divide_duration():
    with pytest.raises(ValueError):
        default_wavepacket(6e-6, dt=7e-9)


def test_release_reproduces_target_field():
    spec = default_wavepacket(6e-6, 1.0, 0.99)
    wf = synthesize_release(SENDER, CAL_S, spec)
    rec = _emit(SENDER, CAL_S, wf)
    err = np.linalg.norm(rec.b_out_s - spec.field()) / np.linalg.norm(spec.field())
    assert err < 1e-6
    assert wf.residual == pytest.approx(err, rel=1e-6)
    assert np.max(np.abs(wf.samples) ** 2) <= CAL_S.xi_sq_max


def test_release_error_is_fourth_order_in_dt():
    errs = []
    for dt in (8e-9, 4e-9):
        spec = default_wavepacket(6e-6, 1.0, 0.99, dt=dt)
        errs.append(synthesize_release(SENDER, CAL_S, spec).residual)
    assert 10 < errs[0] / errs[1] < 24


def test_release_empties_memory_to_truncation():
    spec = default_wavepacket(6e-6, 1.0, 0.9)
    wf = synthesize_release(SENDER.lossless(), CAL_S, spec)
    rec = _emit(SENDER.lossless(), CAL_S, wf)
    assert abs(rec.a_s[-1]) ** 2 == pytest.approx(0.1, abs=1e-4)


def test_capture_absorbs_truncation_fraction():
    spec = default_wavepacket(6e-6, 1.0, 1.0)
    wf = synthesize_capture(RECEIVER.lossless(), CAL_R, spec, 0.95)
    _, bin_ = spec.field(), spec.field_and_derivative()[0]
    rec = _emit(RECEIVER.lossless(), CAL_R, wf, 0.0, bin_)
    assert abs(rec.a_s[-1]) ** 2 == pytest.approx(0.95, abs=1e-3)
    assert wf.residual < 1e-6


def test_capture_ignores_packet_scale():
    spec = default_wavepacket(6e-6, 1.0, 1.0)
    w1 = synthesize_capture(RECEIVER, CAL_R, spec, 0.95)
    w2 = synthesize_capture(RECEIVER, CAL_R, spec.scaled(0.3), 0.95)
    assert np.allclose(w1.samples, w2.samples, atol=1e-10)


def test_capture_needs_valid_truncation():
    spec = default_wavepacket(6e-6)
    with pytest.raises(ValueError):
        synthesize_capture(RECEIVER, CAL_R, spec, 1.0)


def test_zero_energy_gives_zero_pump():
    spec = default_wavepacket(6e-6, 1.0, 1.0).scaled(0.0)
    wf = synthesize_release(SENDER, CAL_S, spec)
    assert np.all(wf.samples == 0)


def test_infeasible_request_reports_time():
    cal = ConversionCalibration.from_device(SENDER, xi_sq_max=5.0)
    with pytest.raises(InfeasiblePulseError) as info:
        synthesize_release(SENDER, cal, default_wavepacket(6e-6, 1.0, 0.99), xi2=np.sqrt(5.0))
    assert 0 < info.value.time < 6e-6


def test_short_pulse_is_infeasible():
    with pytest.raises(InfeasiblePulseError):
        synthesize_release(SENDER, CAL_S, default_wavepacket(0.4e-6, 1.0, 0.99))


def test_stark_compensation_keeps_spectrum_narrow():
    spec = default_wavepacket(6e-6, 1.0, 0.9, carrier_detuning=-1.0 * MHZ)
    target = _spectral_width(spec.field(), spec.dt)
    wf = synthesize_release(SENDER, CAL_S, spec)
    compensated = _spectral_width(_emit(SENDER, CAL_S, wf).b_out_s, spec.dt)
    static_only = replace(CAL_S, stark_a=(0.0, CAL_S.stark_a[1]), stark_b=(0.0, CAL_S.stark_b[1]))
    wf_bad = synthesize_release(SENDER, static_only, spec)
    uncompensated = _spectral_width(_emit(SENDER, CAL_S, wf_bad).b_out_s, spec.dt)
    assert compensated == pytest.approx(target, rel=1e-4)
    assert uncompensated > 1.1 * target


def test_xi2_ramps_are_smooth():
    wf = PumpWaveform.zero(100, 2e-9, xi2=2.0)
    tr = wf.ring_time
    assert wf.xi2_profile(np.array([-tr]))[0] == 0.0
    assert wf.xi2_profile(np.array([0.0]))[0] == 2.0
    eps = 1e-12
    slope = (wf.xi2_profile(np.array([-eps]))[0] - wf.xi2_profile(np.array([-2 * eps]))[0]) / eps
    assert abs(slope) < 1e-3 / tr


def test_waveform_export_round_trip(tmp_path):
    spec = default_wavepacket(6e-6, 1.0, 0.99)
    wf = synthesize_release(SENDER, CAL_S, spec)
    path = tmp_path / "release.csv"
    export_waveform(path, wf)
    back = import_waveform(path)
    assert back.n_steps == wf.n_steps
    assert back.grid_dt == pytest.approx(wf.grid_dt)
    assert np.allclose(back.samples, wf.samples, rtol=1e-10, atol=1e-12)
    assert back.static_amplitude == pytest.approx(wf.static_amplitude)
