import numpy as np
import pytest
from scipy.special import comb

from cavity_transfer.codes import (
    LossChannelSpec,
    apply_loss,
    binomial_code,
    bloch_trajectory,
    break_even_sweep,
    cardinal_states,
    collapse_time,
    fit_alternative_channels,
    fit_effective_kerr,
    fock_code,
    kerr_evolve,
    logical_bloch_vector,
    loss_angle,
    mean_fidelity,
    optimize_theta_c,
    parity_correct,
)
from cavity_transfer.errors import FitError, TruncationError
from cavity_transfer.fock import QuantumState, fidelity, make_fock, mean_photon_number

KHZ = 2 * np.pi * 1e3


def _rho(ket):
    return QuantumState.from_ket(ket)


def test_code_definitions():
    f, b = fock_code(), binomial_code()
    assert abs(np.vdot(b.logical_zero, b.logical_one)) < 1e-12
    assert f.mean_photon_number == pytest.approx(0.5)
    assert b.mean_photon_number == pytest.approx(2.0)
    assert np.allclose(cardinal_states(f)[2][:2], [1 / np.sqrt(2), 1 / np.sqrt(2)])


@pytest.mark.parametrize("code", [fock_code(), binomial_code()])
def test_cardinal_geometry(code):
    kets = cardinal_states(code)
    overlaps = np.array([[abs(np.vdot(a, b)) ** 2 for b in kets] for a in kets])
    expected = np.full((6, 6), 0.5)
    np.fill_diagonal(expected, 1.0)
    for i in range(0, 6, 2):
        expected[i, i + 1] = expected[i + 1, i] = 0.0
    assert np.allclose(overlaps, expected, atol=1e-12)


def test_loss_angle_endpoints():
    assert loss_angle(0.0) == 0.0
    assert loss_angle(1.0) == pytest.approx(np.pi)
    assert np.all(np.diff([loss_angle(p) for p in np.linspace(0, 1, 50)]) > 0)


def test_single_photon_loss():
    out = apply_loss(make_fock(1, 4), 0.26)
    assert np.allclose(np.diag(out.matrix)[:2], [0.26, 0.74], atol=1e-12)
    vac = apply_loss(make_fock(0, 4), 0.7)
    assert vac.populations()[0] == pytest.approx(1.0)


def test_four_photon_loss_is_binomial():
    p = 0.3
    out = apply_loss(make_fock(4, 6), p)
    k = np.arange(5)
    assert np.allclose(out.populations()[:5], comb(4, k) * (1 - p) ** k * p ** (4 - k), atol=1e-12)


def test_loss_needs_headroom():
    with pytest.raises(TruncationError):
        apply_loss(make_fock(3, 4), 0.1)


def test_loss_scales_mean_photon_number():
    state = _rho(cardinal_states(binomial_code())[2])
    out = apply_loss(state, 0.2)
    assert mean_photon_number(out) == pytest.approx(0.8 * mean_photon_number(state), rel=1e-12)


@pytest.mark.parametrize("variant", ["thermal_gain", "dephasing_mix"])
def test_loss_variants_are_valid_channels(variant):
    spec = LossChannelSpec(0.2, variant, n_bath=0.1, weight=0.3)
    out = apply_loss(_rho(cardinal_states(binomial_code())[4]), spec)
    assert np.trace(out.matrix).real == pytest.approx(1.0, abs=1e-10)


def test_kerr_identity_and_phase():
    state = _rho(cardinal_states(binomial_code())[2])
    assert np.allclose(kerr_evolve(state, 0.0, 6e-6).matrix, state.matrix)
    assert collapse_time(8.8 * KHZ, 1.0) == pytest.approx(28.4e-6, rel=0.01)


def test_effective_kerr_round_trip():
    chi = 10.8 * KHZ
    prepared = [_rho(k) for k in cardinal_states(binomial_code())]
    received = [kerr_evolve(s, chi, 6e-6) for s in prepared]
    assert fit_effective_kerr(prepared, received) / KHZ == pytest.approx(10.8, abs=0.1)
    with pytest.raises(FitError):
        fit_effective_kerr([], [])


def test_parity_correction_maps_single_loss_back():
    code = binomial_code()
    out = parity_correct(make_fock(1, 8))
    assert fidelity(code.logical_zero, out) == pytest.approx(1.0, abs=1e-12)
    out3 = parity_correct(make_fock(3, 8))
    assert fidelity(code.logical_one, out3) == pytest.approx(1.0, abs=1e-12)


def test_parity_correction_leaves_codespace_alone():
    for ket in cardinal_states(binomial_code()):
        assert fidelity(ket, parity_correct(_rho(ket), 0.0)) == pytest.approx(1.0, abs=1e-12)


def test_parity_correction_rejects_high_tail():
    with pytest.raises(TruncationError):
        parity_correct(make_fock(6, 8))


def test_theta_c_is_optimal_and_continuous():
    assert optimize_theta_c(0.0) == pytest.approx(0.0, abs=1e-6)
    thetas = [optimize_theta_c(p) for p in (0.01, 0.02, 0.04)]
    assert np.all(np.diff(thetas) > 0) or np.all(np.diff(thetas) < 0)
    p = 0.26
    theta = optimize_theta_c(p)
    best = mean_fidelity(binomial_code(), p, True, theta)
    for dtheta in (-0.01, 0.01):
        assert mean_fidelity(binomial_code(), p, True, theta + dtheta) <= best


def test_sweep_is_monotone_and_vanishes_at_unity():
    result = break_even_sweep(np.linspace(0.5, 1.0, 11))
    table = result.as_array()
    assert np.allclose(table[-1, 1:4], 0.0, atol=1e-12)
    for col in (1, 2, 3):
        assert np.all(np.diff(table[:, col]) <= 1e-12)


def test_sweep_workers_agree():
    etas = [0.6, 0.7, 0.8]
    serial = break_even_sweep(etas).as_array()
    pooled = break_even_sweep(etas, workers=2).as_array()
    assert np.array_equal(serial, pooled)


def test_sweep_rejects_bad_grid():
    with pytest.raises(ValueError):
        break_even_sweep([0.0, 0.5])


def test_bloch_trajectories():
    fock = fock_code()
    start = bloch_trajectory(fock, "+X", [1.0])[0]
    assert np.allclose(start, [1, 0, 0], atol=1e-12)
    for label in ("+Z", "-Z"):
        assert np.allclose(bloch_trajectory(fock, label, [0.0])[0], [0, 0, 1], atol=1e-12)


def test_binomial_small_loss_contraction_is_isotropic():
    code = binomial_code()
    lengths = [np.linalg.norm(bloch_trajectory(code, i, [0.9])[0]) for i in range(6)]
    assert max(lengths) / min(lengths) - 1 < 0.05


def test_bloch_vector_of_logical_states():
    code = binomial_code()
    assert np.allclose(logical_bloch_vector(_rho(code.logical_zero), code), [0, 0, 1])
    assert np.allclose(logical_bloch_vector(_rho(code.logical_one), code), [0, 0, -1])


def test_alternative_channels_on_pure_loss():
    code = binomial_code()
    kets = cardinal_states(code)
    measured = [apply_loss(_rho(k), 0.26) for k in kets]
    report = fit_alternative_channels(kets, measured)
    assert report.pure_loss.params["p_loss"] == pytest.approx(0.26, abs=1e-4)
    assert report.dephasing.params["weight"] < 1e-3
    assert report.thermal_gain.params["weight"] < 1e-3
    assert all(abs(v) < 0.01 for v in report.improvements.values())


def test_alternative_channels_need_two_states():
    ket = cardinal_states(fock_code())[0]
    with pytest.raises(FitError):
        fit_alternative_channels([ket], [_rho(ket)])
