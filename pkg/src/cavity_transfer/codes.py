"""Logical encodings, photon loss, Kerr evolution and parity-based correction.

Loss is modeled as a beamsplitter of angle ``theta = 2 arccos sqrt(1 - p_loss)``
mixing the mode with a vacuum ancilla, followed by a trace over the ancilla.
The correction for the binomial code maps the odd-parity (one photon lost)
branch back into the code space and rotates the even branch between ``|0>``
and ``|4>`` to undo the no-jump back-action.

Bloch vectors use ``z = <0_L|rho|0_L> - <1_L|rho|1_L>`` so that ``+Z = |0_L>``
is the north pole.  Projection onto the code space is not renormalized, so
leakage out of the code space shrinks the vector.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from .errors import FitError, TruncationError
from .fock import (
    QuantumState,
    apply_unitary,
    beamsplitter_unitary,
    fidelity,
    kerr_unitary,
    parity_operator,
    partial_trace,
    tensor,
    thermal_state,
)

CODE_DIM = 8
CARDINAL_LABELS = ("+Z", "-Z", "+X", "-X", "+Y", "-Y")


@dataclass(frozen=True)
class CodeSpec:
    """Two orthonormal logical kets in a ``dim``-level Fock space."""

    name: str
    logical_zero: np.ndarray
    logical_one: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.logical_zero, dtype=complex)
        o = np.asarray(self.logical_one, dtype=complex)
        if z.shape != o.shape or z.ndim != 1:
            raise ValueError("logical kets must be 1-D arrays of equal length")
        if abs(np.linalg.norm(z) - 1) > 1e-12 or abs(np.linalg.norm(o) - 1) > 1e-12:
            raise ValueError("logical kets must be normalized")
        if abs(np.vdot(z, o)) > 1e-12:
            raise ValueError("logical kets must be orthogonal")
        for arr in (z, o):
            arr.flags.writeable = False
        object.__setattr__(self, "logical_zero", z)
        object.__setattr__(self, "logical_one", o)

    @property
    def dim(self) -> int:
        return len(self.logical_zero)

    @property
    def mean_photon_number(self) -> float:
        """Mean photon number averaged over the six cardinal states."""
        n = np.arange(self.dim)
        return float(np.mean([np.dot(n, np.abs(k) ** 2) for k in cardinal_states(self)]))

    def basis(self) -> np.ndarray:
        """``dim x 2`` matrix whose columns are ``|0_L>`` and ``|1_L>``."""
        return np.column_stack([self.logical_zero, self.logical_one])


def _ket(dim: int, amps: dict[int, complex]) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    for n, c in amps.items():
        if n >= dim:
            raise TruncationError(f"level {n} does not fit in dimension {dim}")
        v[n] = c
    return v


def fock_code(dim: int = CODE_DIM) -> CodeSpec:
    return CodeSpec("fock", _ket(dim, {0: 1}), _ket(dim, {1: 1}))


def binomial_code(dim: int = CODE_DIM) -> CodeSpec:
    s = 1 / np.sqrt(2)
    return CodeSpec("binomial", _ket(dim, {2: 1}), _ket(dim, {0: s, 4: s}))


def get_code(name: str, dim: int = CODE_DIM) -> CodeSpec:
    codes = {"fock": fock_code, "binomial": binomial_code}
    if name not in codes:
        raise KeyError(f"unknown code {name!r}; choose from {sorted(codes)}")
    return codes[name](dim)


def cardinal_states(code: CodeSpec) -> list[np.ndarray]:
    """Kets of ``+Z, -Z, +X, -X, +Y, -Y`` (``+Z = |0_L>``)."""
    z, o = code.logical_zero, code.logical_one
    s = 1 / np.sqrt(2)
    return [z, o, s * (z + o), s * (z - o), s * (z + 1j * o), s * (z - 1j * o)]


def cardinal_density_matrices(code: CodeSpec) -> list[QuantumState]:
    return [QuantumState.from_ket(k) for k in cardinal_states(code)]


# --------------------------------------------------------------------------
# loss channels


def loss_angle(p_loss: float) -> float:
    """Beamsplitter angle removing photons with probability ``p_loss``."""
    if not 0.0 <= p_loss <= 1.0:
        raise ValueError("p_loss must lie in [0, 1]")
    return float(2.0 * np.arccos(np.sqrt(1.0 - p_loss)))


@dataclass(frozen=True)
class LossChannelSpec:
    """Photon loss with optional extra mechanisms.

    ``variant`` is ``"pure_loss"``, ``"thermal_gain"`` (the ancilla is a
    thermal state with ``n_bath`` photons, mixed in with probability
    ``weight``) or ``"dephasing_mix"`` (parity flip applied with probability
    ``weight`` after loss).
    """

    p_loss: float
    variant: str = "pure_loss"
    n_bath: float = 0.0
    weight: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p_loss <= 1.0:
            raise ValueError("p_loss must lie in [0, 1]")
        if self.variant not in ("pure_loss", "thermal_gain", "dephasing_mix"):
            raise ValueError(f"unknown loss variant {self.variant!r}")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError("weight must lie in [0, 1]")
        if self.n_bath < 0:
            raise ValueError("n_bath must be non-negative")

    @property
    def theta(self) -> float:
        return loss_angle(self.p_loss)


def _beamsplitter_with_ancilla(state: QuantumState, theta: float, ancilla: QuantumState) -> QuantumState:
    joint = tensor(state, ancilla)
    u = beamsplitter_unitary(theta, (state.dim, ancilla.dim))
    return partial_trace(apply_unitary(joint, u), 0)


def _pad(state: QuantumState, dim: int) -> QuantumState:
    m = np.zeros((dim, dim), dtype=complex)
    m[: state.dim, : state.dim] = state.matrix
    return QuantumState(m)


def _crop(state: QuantumState, dim: int) -> QuantumState:
    m = state.matrix[:dim, :dim]
    tr = np.trace(m).real
    return QuantumState(m / tr)


def _check_headroom(state: QuantumState) -> None:
    if state.populations()[-1] > 1e-12:
        raise TruncationError("the top Fock level is occupied; enlarge the truncation")


def apply_loss(state: QuantumState, spec: LossChannelSpec | float) -> QuantumState:
    """Apply the loss channel to a single-mode state (``spec`` may be a bare ``p_loss``)."""
    if not isinstance(spec, LossChannelSpec):
        spec = LossChannelSpec(float(spec))
    if len(state.subsystems) != 1:
        raise ValueError("apply_loss expects a single-mode state")
    _check_headroom(state)
    d = state.dim
    out = _beamsplitter_with_ancilla(state, spec.theta, thermal_state(0.0, d))
    if spec.variant == "dephasing_mix" and spec.weight > 0:
        par = parity_operator(d).matrix
        m = (1 - spec.weight) * out.matrix + spec.weight * par @ out.matrix @ par
        out = QuantumState(m)
    elif spec.variant == "thermal_gain" and spec.weight > 0:
        big = d + 6
        warm = _beamsplitter_with_ancilla(_pad(state, big), spec.theta, thermal_state(spec.n_bath, big))
        m = (1 - spec.weight) * out.matrix + spec.weight * _crop(warm, d).matrix
        out = QuantumState(m)
    return out


def kerr_evolve(state: QuantumState, chi: float, t: float) -> QuantumState:
    """Self-Kerr evolution ``exp(-i (chi/2) n(n-1) t)``; ``chi`` in rad/s."""
    return apply_unitary(state, kerr_unitary(chi, t, state.dim))


def kerr_loss_evolve(state: QuantumState, chi: float, t: float, p_loss: float, slices: int = 16) -> QuantumState:
    """Interleave Kerr evolution and loss in ``slices`` equal steps."""
    if slices < 1:
        raise ValueError("slices must be positive")
    p_step = 1.0 - (1.0 - p_loss) ** (1.0 / slices)
    u = kerr_unitary(chi, t / slices, state.dim)
    for _ in range(slices):
        state = apply_loss(apply_unitary(state, u), p_step)
    return state


def collapse_time(chi: float, n_mean: float) -> float:
    """Kerr phase-collapse time ``pi / (2 sqrt(n) chi)``."""
    if chi == 0 or n_mean <= 0:
        return float("inf")
    return float(np.pi / (2 * np.sqrt(n_mean) * abs(chi)))


def _mean_fid_states(kets: Sequence[np.ndarray], states: Sequence[QuantumState]) -> float:
    return float(np.mean([fidelity(k, s) for k, s in zip(kets, states)]))


def fit_effective_kerr(
    prepared: Sequence[QuantumState | np.ndarray],
    received: Sequence[QuantumState],
    t: float = 6e-6,
    chi_max: float = 2 * np.pi * 30e3,
    step: float = 2 * np.pi * 0.05e3,
) -> float:
    """Single Kerr rate (rad/s) that best maps the prepared onto the received states.

    Scans ``[0, chi_max]`` in ``step`` increments, then refines the best cell
    with a bounded scalar minimization of the mean infidelity.
    """
    if len(prepared) == 0 or len(received) == 0:
        raise FitError("need at least one prepared/received pair")
    if len(prepared) != len(received):
        raise FitError("prepared and received lists differ in length")
    prep = [p if isinstance(p, QuantumState) else QuantumState.from_ket(p) for p in prepared]
    d = prep[0].dim
    n = np.arange(d, dtype=float)
    phase_rate = 0.5 * n * (n - 1) * t

    def cost(chi):
        u = np.exp(-1j * chi * phase_rate)
        total = 0.0
        for p, r in zip(prep, received):
            rho = (u[:, None] * p.matrix) * u.conj()[None, :]
            total += fidelity(QuantumState(rho), r)
        return 1.0 - total / len(prep)

    grid = np.arange(0.0, chi_max + 0.5 * step, step)
    costs = np.array([cost(c) for c in grid])
    i = int(np.argmin(costs))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if hi <= lo:
        return float(grid[i])
    res = minimize_scalar(cost, bounds=(lo, hi), method="bounded", options={"xatol": 1e-3})
    return float(res.x if res.fun <= costs[i] else grid[i])


# --------------------------------------------------------------------------
# parity-based correction


def _correction_ops(dim: int, theta_c: float) -> tuple[np.ndarray, np.ndarray]:
    """Even-branch rotation and odd-branch isometry (as full ``dim x dim`` matrices)."""
    if dim < 5:
        raise TruncationError("parity correction needs at least five Fock levels")
    even = np.zeros((dim, dim), dtype=complex)
    for k in range(0, dim, 2):
        even[k, k] = 1.0
    c, s = np.cos(theta_c), np.sin(theta_c)
    even[0, 0], even[4, 0] = c, s
    even[0, 4], even[4, 4] = -s, c
    odd = np.zeros((dim, dim), dtype=complex)
    odd[2, 1] = 1.0
    odd[0, 3] = odd[4, 3] = 1 / np.sqrt(2)
    for k in range(5, dim, 2):
        odd[k, k] = 1.0
    return even, odd


def parity_correct(state: QuantumState, theta_c: float = 0.0, tail_tol: float = 1e-6) -> QuantumState:
    """Split by photon-number parity, map both branches back to the binomial code space."""
    d = state.dim
    if d < 5:
        raise TruncationError("parity correction needs at least five Fock levels")
    tail = float(np.sum(state.populations()[5:]))
    if tail > tail_tol:
        raise TruncationError(f"population {tail:.3g} above n = 4 exceeds the tolerance {tail_tol:g}")
    even, odd = _correction_ops(d, theta_c)
    rho = state.matrix
    pe = np.diag((np.arange(d) % 2 == 0).astype(float))
    po = np.eye(d) - pe
    out = even @ (pe @ rho @ pe) @ even.conj().T + odd @ (po @ rho @ po) @ odd.conj().T
    return QuantumState(out)


def _lossy_cardinals(code: CodeSpec, p_loss: float) -> list[QuantumState]:
    return [apply_loss(QuantumState.from_ket(k), p_loss) for k in cardinal_states(code)]


def mean_fidelity(code: CodeSpec, p_loss: float, corrected: bool = False, theta_c: float = 0.0) -> float:
    kets = cardinal_states(code)
    lossy = _lossy_cardinals(code, p_loss)
    if corrected:
        lossy = [parity_correct(s, theta_c) for s in lossy]
    return _mean_fid_states(kets, lossy)


def _corrected_cost_factory(code: CodeSpec, p_loss: float):
    kets = cardinal_states(code)
    lossy = [s.matrix for s in _lossy_cardinals(code, p_loss)]
    d = code.dim
    pe = np.diag((np.arange(d) % 2 == 0).astype(float))
    po = np.eye(d) - pe
    _, odd = _correction_ops(d, 0.0)
    odd_fid = [np.vdot(k, odd @ (po @ r @ po) @ odd.conj().T @ k).real for k, r in zip(kets, lossy)]
    even_blocks = [pe @ r @ pe for r in lossy]

    def infidelity(theta_c):
        even, _ = _correction_ops(d, theta_c)
        f = [np.vdot(k, even @ e @ even.conj().T @ k).real + fo for k, e, fo in zip(kets, even_blocks, odd_fid)]
        return 1.0 - float(np.mean(f))

    return infidelity


def optimize_theta_c(p_loss: float, code: CodeSpec | None = None, tol: float = 1e-6) -> float:
    """Even-branch rotation angle in ``[-pi/2, pi/2]`` minimizing the mean infidelity."""
    if not 0.0 <= p_loss < 1.0:
        raise ValueError("p_loss must lie in [0, 1)")
    code = code or binomial_code()
    cost = _corrected_cost_factory(code, p_loss)
    grid = np.linspace(-np.pi / 2, np.pi / 2, 181)
    vals = np.array([cost(x) for x in grid])
    i = int(np.argmin(vals))
    if i == 0 or i == len(grid) - 1:
        return float(grid[i])
    res = minimize_scalar(cost, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden",
                          options={"xtol": tol})
    theta = float(np.clip(res.x, -np.pi / 2, np.pi / 2))
    if abs(theta) < tol:
        theta = 0.0
    return theta


def corrected_infidelity(p_loss: float, code: CodeSpec | None = None) -> tuple[float, float]:
    """``(infidelity, theta_c)`` after correction with the optimal angle."""
    code = code or binomial_code()
    theta = optimize_theta_c(p_loss, code)
    return _corrected_cost_factory(code, p_loss)(theta), theta


@dataclass(frozen=True)
class SweepRow:
    eta: float
    infid_fock: float
    infid_binomial: float
    infid_corrected: float
    theta_c_opt: float


@dataclass(frozen=True)
class BreakEvenResult:
    rows: list[SweepRow] = field(default_factory=list)
    crossing_eta: float | None = None

    def as_array(self) -> np.ndarray:
        return np.array([[r.eta, r.infid_fock, r.infid_binomial, r.infid_corrected, r.theta_c_opt]
                         for r in self.rows])


def _sweep_point(eta: float) -> SweepRow:
    p = 1.0 - eta
    f_fock = 1.0 - mean_fidelity(fock_code(), p)
    f_bin = 1.0 - mean_fidelity(binomial_code(), p)
    if p >= 1.0:
        corr, theta = f_bin, 0.0
    else:
        corr, theta = corrected_infidelity(p)
    return SweepRow(float(eta), f_fock, f_bin, corr, theta)


def break_even_crossing(lo: float = 0.5, hi: float = 0.95) -> float | None:
    """Efficiency where the corrected binomial and Fock infidelities are equal."""

    def gap(eta):
        row = _sweep_point(eta)
        return row.infid_fock - row.infid_corrected

    g_lo, g_hi = gap(lo), gap(hi)
    if np.sign(g_lo) == np.sign(g_hi):
        return None
    return float(brentq(gap, lo, hi, xtol=1e-8))


def break_even_sweep(etas: Sequence[float], workers: int | None = None) -> BreakEvenResult:
    """Infidelity table over ``etas``; ``workers > 1`` fans out over a process pool."""
    etas = [float(e) for e in etas]
    if any(not 0.0 < e <= 1.0 for e in etas):
        raise ValueError("efficiencies must lie in (0, 1]")
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, etas))
    else:
        rows = [_sweep_point(e) for e in etas]
    crossing = None
    gaps = [r.infid_fock - r.infid_corrected for r in rows]
    for (r0, g0), (r1, g1) in zip(zip(rows, gaps), zip(rows[1:], gaps[1:])):
        if g0 == 0:
            crossing = r0.eta
            break
        if np.sign(g0) != np.sign(g1):
            crossing = float(brentq(lambda e: (lambda r: r.infid_fock - r.infid_corrected)(_sweep_point(e)),
                                    min(r0.eta, r1.eta), max(r0.eta, r1.eta), xtol=1e-8))
            break
    return BreakEvenResult(rows, crossing)


# --------------------------------------------------------------------------
# Bloch trajectories


def logical_bloch_vector(state: QuantumState, code: CodeSpec) -> np.ndarray:
    """Bloch vector of the code-space block (not renormalized)."""
    basis = code.basis()
    m = basis.conj().T @ state.matrix @ basis
    return np.array([2 * m[0, 1].real, -2 * m[0, 1].imag, (m[0, 0] - m[1, 1]).real])


def bloch_trajectory(code: CodeSpec, cardinal: int | str, etas: Sequence[float]) -> list[np.ndarray]:
    """Bloch vectors of one cardinal state after loss ``1 - eta`` for each ``eta``."""
    idx = CARDINAL_LABELS.index(cardinal) if isinstance(cardinal, str) else int(cardinal)
    ket = cardinal_states(code)[idx]
    rho = QuantumState.from_ket(ket)
    return [logical_bloch_vector(apply_loss(rho, 1.0 - float(eta)), code) for eta in etas]


# --------------------------------------------------------------------------
# alternative loss mechanisms


@dataclass(frozen=True)
class ChannelFit:
    model: str
    params: dict
    mean_fidelity: float
    converged: bool


@dataclass(frozen=True)
class AlternativeChannelReport:
    pure_loss: ChannelFit
    dephasing: ChannelFit
    thermal_gain: ChannelFit

    @property
    def improvements(self) -> dict:
        base = self.pure_loss.mean_fidelity
        return {
            "dephasing": self.dephasing.mean_fidelity - base,
            "thermal_gain": self.thermal_gain.mean_fidelity - base,
        }


def fit_alternative_channels(
    prepared: Sequence[np.ndarray],
    measured: Sequence[QuantumState],
    n_bath_max: float = 0.5,
) -> AlternativeChannelReport:
    """Fit pure loss, loss plus parity dephasing, and loss plus thermal gain.

    Each model is fitted by minimizing the mean infidelity between the
    modeled and the measured states.  A tiny penalty on the mixing weight
    picks the smallest weight when the data cannot distinguish it.
    """
    if len(prepared) != len(measured):
        raise FitError("prepared and measured lists differ in length")
    if len(measured) < 2:
        raise FitError("need at least two states to separate loss mechanisms")
    prep = [QuantumState.from_ket(k) if not isinstance(k, QuantumState) else k for k in prepared]

    def mean_fid(spec):
        out = [apply_loss(p, spec) for p in prep]
        return float(np.mean([fidelity(o, m) for o, m in zip(out, measured)]))

    res0 = minimize_scalar(lambda p: -mean_fid(LossChannelSpec(p)), bounds=(0.0, 0.999), method="bounded",
                           options={"xatol": 1e-7})
    p0 = float(res0.x)
    pure = ChannelFit("pure_loss", {"p_loss": p0}, -float(res0.fun), bool(res0.success))

    def fit2(variant, x0, bounds, to_spec):
        def obj(x):
            return -mean_fid(to_spec(x)) + 1e-6 * x[-1]

        res = minimize(obj, x0, method="L-BFGS-B", bounds=bounds)
        spec = to_spec(res.x)
        return spec, res

    spec_d, res_d = fit2("dephasing_mix", [p0, 0.0], [(0.0, 0.999), (0.0, 0.5)],
                         lambda x: LossChannelSpec(float(x[0]), "dephasing_mix", weight=float(x[1])))
    deph = ChannelFit("dephasing_mix", {"p_loss": spec_d.p_loss, "weight": spec_d.weight},
                      mean_fid(spec_d), bool(res_d.success))
    spec_t, res_t = fit2("thermal_gain", [p0, 0.1, 0.0], [(0.0, 0.999), (0.0, n_bath_max), (0.0, 0.5)],
                         lambda x: LossChannelSpec(float(x[0]), "thermal_gain", n_bath=float(x[1]),
                                                   weight=float(x[2])))
    therm = ChannelFit("thermal_gain", {"p_loss": spec_t.p_loss, "n_bath": spec_t.n_bath, "weight": spec_t.weight},
                       mean_fid(spec_t), bool(res_t.success))
    return AlternativeChannelReport(pure, deph, therm)
