"""Synthetic tomography, reconstruction, entanglement measures and process matrices.

Wigner values follow the displaced-parity identity
``W(alpha) = (2/pi) Tr[rho D(alpha) P D(alpha)^dag]``, which is centered on
``alpha0`` for a coherent state ``|alpha0>``.  Displacements are evaluated
in a padded Fock space so matrix elements near the state's truncation are
accurate.

Reconstructions maximize a Gaussian likelihood (least squares) over density
matrices with accelerated projected gradient steps; the projection onto
unit-trace positive matrices clips the eigenvalue spectrum onto the simplex.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import sqrtm

from .errors import ReconstructionError, TruncationError
from .fock import QuantumState, annihilation

BELL_KET = np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2)  # (|10> + |01>)/sqrt(2), order |s r>
DEFAULT_RATE = 1.0 / 140e-6


# --------------------------------------------------------------------------
# Wigner functions


@dataclass(frozen=True)
class WignerSample:
    alphas: np.ndarray
    values: np.ndarray
    noise_sigma: float = 0.0
    grid_shape: tuple[int, int] | None = None

    def integral(self) -> float:
        """Trapezoidal phase-space integral (requires a rectangular grid)."""
        if self.grid_shape is None:
            raise ValueError("integral needs a rectangular grid sample")
        ny, nx = self.grid_shape
        a = self.alphas.reshape(ny, nx)
        w = self.values.reshape(ny, nx)
        x = a[0, :].real
        y = a[:, 0].imag
        return float(np.trapezoid(np.trapezoid(w, x, axis=1), y))

    def normalized(self) -> "WignerSample":
        return WignerSample(self.alphas, self.values / self.integral(), self.noise_sigma, self.grid_shape)


def wigner_grid(alpha_max: float = 2.5, points: int = 51) -> tuple[np.ndarray, tuple[int, int]]:
    x = np.linspace(-alpha_max, alpha_max, points)
    xx, yy = np.meshgrid(x, x)
    return (xx + 1j * yy).ravel(), (points, points)


@lru_cache(maxsize=16)
def _quadrature_eig(n: int) -> tuple[np.ndarray, np.ndarray]:
    a = annihilation(n)
    h = 1j * (a.conj().T - a)  # Hermitian generator: exp(r (a^dag - a)) = exp(-i r h)
    w, v = np.linalg.eigh(h)
    w.flags.writeable = False
    v.flags.writeable = False
    return w, v


def _pad_dim(dim: int, alpha_max: float) -> int:
    return int(max(2 * dim, dim + 12 * alpha_max**2 + 40))


def displaced_parity_ops(alphas: np.ndarray, dim: int) -> np.ndarray:
    """``(2/pi) D(alpha) P D(alpha)^dag`` restricted to ``dim`` levels, one per alpha."""
    alphas = np.asarray(alphas, dtype=complex).ravel()
    n_pad = _pad_dim(dim, float(np.max(np.abs(alphas))) if alphas.size else 0.0)
    w, v = _quadrature_eig(n_pad)
    parity = (-1.0) ** np.arange(n_pad)
    levels = np.arange(dim)
    vd = v[:dim, :]
    out = np.empty((len(alphas), dim, dim), dtype=complex)
    for k, alpha in enumerate(alphas):
        r, phi = abs(alpha), np.angle(alpha)
        x_rows = (vd * np.exp(-1j * r * w)) @ v.conj().T  # rows < dim of exp(r (a^dag - a))
        # D = R(phi) X R(phi)^dag with R = exp(i phi n); the right phase cancels against P's diagonal
        d_rows = np.exp(1j * phi * levels)[:, None] * x_rows
        out[k] = (2 / np.pi) * (d_rows * parity) @ d_rows.conj().T
    return out


def wigner(
    state: QuantumState,
    alphas: np.ndarray | None = None,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
    grid_shape: tuple[int, int] | None = None,
) -> WignerSample:
    """Sample the Wigner function on ``alphas`` (default: 51 x 51 grid up to 2.5)."""
    if alphas is None:
        alphas, grid_shape = wigner_grid()
    if len(state.subsystems) != 1:
        raise ValueError("wigner expects a single-mode state")
    if state.populations()[-1] > 1e-6:
        raise TruncationError("the top Fock level is occupied; the truncation is too small")
    ops = displaced_parity_ops(alphas, state.dim)
    vals = np.einsum("kij,ji->k", ops, state.matrix).real
    if noise_sigma > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        vals = vals + noise_sigma * rng.standard_normal(vals.shape)
    return WignerSample(np.asarray(alphas, dtype=complex).ravel(), vals, noise_sigma, grid_shape)


# --------------------------------------------------------------------------
# constrained least-squares reconstruction


def project_to_density_matrix(m: np.ndarray) -> np.ndarray:
    """Closest (Frobenius) unit-trace positive matrix to the Hermitian part of ``m``."""
    h = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(h)
    # Euclidean projection of the spectrum onto the probability simplex
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, len(u) + 1)
    cond = u - (css - 1) / k > 0
    rho_idx = k[cond][-1]
    tau = (css[rho_idx - 1] - 1) / rho_idx
    p = np.clip(w - tau, 0, None)
    return (v * p) @ v.conj().T


@dataclass(frozen=True)
class Reconstruction:
    state: QuantumState
    cost: float
    iterations: int
    converged: bool


def _fit_density_matrix(ops: np.ndarray, data: np.ndarray, weights: np.ndarray | None, dim: int,
                        max_iter: int, tol: float, subsystems: tuple[int, ...] = ()) -> Reconstruction:
    if data.size == 0:
        raise ReconstructionError("no data to reconstruct from")
    if data.size != len(ops):
        raise ReconstructionError("data and measurement operators differ in length")
    if weights is None:
        weights = np.ones(data.size)
    # Tr[O rho] = O^T.ravel() . rho.ravel()
    a = ops.transpose(0, 2, 1).reshape(len(ops), -1)
    sw = np.sqrt(weights)
    aw = a * sw[:, None]
    # informational completeness on Hermitian matrices: real-linear rank must be dim^2
    basis = []
    for i in range(dim):
        for j in range(dim):
            e = np.zeros((dim, dim), dtype=complex)
            if i == j:
                e[i, i] = 1
            elif i < j:
                e[i, j] = e[j, i] = 1
            else:
                e[i, j], e[j, i] = 1j, -1j
            basis.append((aw @ e.ravel()).real)
    if np.linalg.matrix_rank(np.array(basis).T) < dim * dim:
        raise ReconstructionError("measurement set is not informationally complete for this dimension")
    step = 1.0 / (2 * np.linalg.norm(aw, 2) ** 2)
    dw = data * sw
    ops_w = ops * sw[:, None, None]

    def cost_grad(rho):
        resid = (aw @ rho.ravel()).real - dw
        grad = 2 * np.tensordot(resid, ops_w, axes=1)
        return float(resid @ resid), grad

    rho = np.eye(dim, dtype=complex) / dim
    y = rho.copy()
    t_k = 1.0
    prev = cost_grad(rho)[0]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        _, g = cost_grad(y)
        g = 0.5 * (g + g.conj().T)
        new = project_to_density_matrix(y - step * g)
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t_k * t_k))
        y = new + ((t_k - 1) / t_next) * (new - rho)
        c_new = cost_grad(new)[0]
        if c_new > prev:  # restart momentum when the objective goes up
            y, t_next = new.copy(), 1.0
        improvement = prev - c_new
        rho, t_k, prev = new, t_next, c_new
        if 0 <= improvement < tol and it > 10:
            converged = True
            break
    if not converged:
        raise ReconstructionError(f"reconstruction did not converge within {max_iter} iterations")
    state = QuantumState(0.5 * (rho + rho.conj().T), subsystems)
    return Reconstruction(state, prev, it, converged)


def mle_reconstruct(sample: WignerSample, dim: int, weights: np.ndarray | None = None,
                    max_iter: int = 5000, tol: float = 1e-10) -> Reconstruction:
    """Density matrix on ``dim`` levels best reproducing the Wigner samples."""
    if sample.values.size == 0:
        raise ReconstructionError("no data to reconstruct from")
    if sample.values.size < dim * dim:
        raise ReconstructionError(f"need at least {dim * dim} Wigner points for dimension {dim}")
    ops = displaced_parity_ops(sample.alphas, dim)
    return _fit_density_matrix(ops, np.asarray(sample.values, float), weights, dim, max_iter, tol)


# joint two-qubit measurements ------------------------------------------------

_ROTATIONS = {
    "I": np.eye(2, dtype=complex),
    "Y90": np.array([[1, -1], [1, 1]], dtype=complex) / np.sqrt(2),
    "X90": np.array([[1, -1j], [-1j, 1]], dtype=complex) / np.sqrt(2),
}
JOINT_BASES = [(a, b) for a in ("I", "Y90", "X90") for b in ("I", "Y90", "X90")]


def joint_measurement_operators() -> np.ndarray:
    """POVM elements ``U^dag |jk><jk| U`` for the nine joint bases, four outcomes each."""
    ops = []
    for ra, rb in JOINT_BASES:
        u = np.kron(_ROTATIONS[ra], _ROTATIONS[rb])
        for o in range(4):
            proj = np.zeros((4, 4), dtype=complex)
            proj[o, o] = 1
            ops.append(u.conj().T @ proj @ u)
    return np.array(ops)


def joint_probabilities(joint: QuantumState | np.ndarray) -> np.ndarray:
    """Outcome probabilities (9 bases x 4 outcomes) of a two-qubit state."""
    m = qubit_block(joint)
    ops = joint_measurement_operators()
    return np.einsum("kij,ji->k", ops, m).real.reshape(9, 4)


def mle_reconstruct_joint(probabilities: np.ndarray, max_iter: int = 5000, tol: float = 1e-12) -> Reconstruction:
    """Two-qubit density matrix from the 9 x 4 joint outcome probabilities."""
    p = np.asarray(probabilities, dtype=float).ravel()
    if p.size == 0:
        raise ReconstructionError("no data to reconstruct from")
    if p.size != 36:
        raise ReconstructionError(f"expected 36 joint probabilities, got {p.size}")
    return _fit_density_matrix(joint_measurement_operators(), p, None, 4, max_iter, tol, (2, 2))


# --------------------------------------------------------------------------
# entanglement measures


@dataclass(frozen=True)
class UnconditionedState:
    """Observed two-qubit block after folding in heralding failures.

    ``matrix`` has trace ``1 - failure_weight``; the missing weight sits in
    the unobserved dimension that was truncated away.
    """

    matrix: np.ndarray
    failure_weight: float

    def as_state(self) -> QuantumState:
        return QuantumState(self.matrix / np.trace(self.matrix).real, (2, 2))


def qubit_block(joint, leakage_tol: float = 1e-3) -> np.ndarray:
    """4 x 4 block on ``{|0>,|1>}^2``; raises if more than ``leakage_tol`` lies outside."""
    if isinstance(joint, UnconditionedState):
        return joint.matrix
    if isinstance(joint, QuantumState):
        dims = joint.subsystems
        if len(dims) != 2:
            raise ValueError("expected a two-mode joint state")
        d1, d2 = dims
        idx = [i * d2 + j for i in range(2) for j in range(2)]
        m = joint.matrix[np.ix_(idx, idx)]
        leak = 1.0 - np.trace(m).real
        if leak > leakage_tol:
            raise ReconstructionError(f"population {leak:.3g} outside the two-qubit block")
        return m / np.trace(m).real
    m = np.asarray(joint, dtype=complex)
    if m.shape != (4, 4):
        raise ValueError("expected a 4 x 4 matrix")
    return m


def concurrence(m: np.ndarray) -> float:
    """Wootters concurrence; homogeneous of degree one in ``m``."""
    yy = np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]])
    tilde = yy @ m.conj() @ yy
    sq = sqrtm(m)
    lam = np.sqrt(np.clip(np.sort(np.linalg.eigvals(sq @ tilde @ sq).real)[::-1], 0, None))
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def partial_transpose(m: np.ndarray, dims=(2, 2), sub: int = 1) -> np.ndarray:
    d1, d2 = dims
    t = m.reshape(d1, d2, d1, d2)
    t = t.transpose(0, 3, 2, 1) if sub == 1 else t.transpose(2, 1, 0, 3)
    return t.reshape(d1 * d2, d1 * d2)


def log_negativity(m: np.ndarray, dims=(2, 2)) -> float:
    """``log2 || m^Gamma ||_1``, clamped at zero."""
    ev = np.linalg.eigvalsh(partial_transpose(m, dims))
    return float(max(0.0, np.log2(np.sum(np.abs(ev)))))


@dataclass(frozen=True)
class EntanglementMetrics:
    fidelity_to_bell: float
    concurrence: float
    purity: float
    log_negativity: float
    generation_rate: float
    ebit_rate: float
    p_success_ent: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def entanglement_metrics(joint, p_success: float = 1.0, rate: float = DEFAULT_RATE) -> EntanglementMetrics:
    """Bell fidelity, concurrence, purity, log-negativity and ebit rate ``p R E_N``."""
    if not 0.0 <= p_success <= 1.0:
        raise ValueError("p_success must lie in [0, 1]")
    if rate < 0:
        raise ValueError("rate must be non-negative")
    m = qubit_block(joint)
    f = float(np.vdot(BELL_KET, m @ BELL_KET).real)
    c = concurrence(m)
    g = float(np.trace(m @ m).real)
    en = log_negativity(m)
    return EntanglementMetrics(f, c, g, en, rate, p_success * rate * en, p_success)


def uncondition(joint, p_excite_s: float, p_excite_r: float) -> UnconditionedState:
    """Fold heralding failures back in.

    A run is kept only when neither transmon is excited, so the failure
    weight is ``1 - (1 - p_excite_s)(1 - p_excite_r)``.  The state is embedded
    with that weight in an extra unobserved dimension, renormalized, and the
    extra dimension truncated away.
    """
    for p in (p_excite_s, p_excite_r):
        if not 0.0 <= p <= 1.0:
            raise ValueError("excitation probabilities must lie in [0, 1]")
    m = qubit_block(joint)
    w = 1.0 - (1.0 - p_excite_s) * (1.0 - p_excite_r)
    big = np.zeros((5, 5), dtype=complex)
    big[:4, :4] = (1.0 - w) * m / np.trace(m).real
    big[4, 4] = w
    big /= np.trace(big).real
    return UnconditionedState(big[:4, :4].copy(), w)


# --------------------------------------------------------------------------
# process matrices

_UNITS = [np.array([[1, 0], [0, 0]]), np.array([[0, 1], [0, 0]]), np.array([[0, 0], [1, 0]]),
          np.array([[0, 0], [0, 1]])]


@dataclass(frozen=True)
class ProcessMatrix:
    """Map from 2 x 2 logical to d x d physical density matrices.

    ``chi[i, j]`` is the image of the logical matrix unit ``|i><j|``; the
    Choi matrix ``sum_ij |i><j| (x) chi[i, j]`` has trace 2.
    """

    chi: np.ndarray
    d: int = 5
    info: dict = field(default_factory=dict)

    def choi(self) -> np.ndarray:
        c = np.zeros((2 * self.d, 2 * self.d), dtype=complex)
        for i in range(2):
            for j in range(2):
                c[i * self.d:(i + 1) * self.d, j * self.d:(j + 1) * self.d] = self.chi[i, j]
        return c

    def apply(self, logical: np.ndarray) -> np.ndarray:
        return np.einsum("ij,ijkl->kl", np.asarray(logical), self.chi)


def process_matrix(prepared: Sequence[np.ndarray], received: Sequence[QuantumState | np.ndarray],
                   d: int = 5) -> ProcessMatrix:
    """Linear-inversion estimate from logical inputs to physical outputs, projected onto CP maps.

    ``prepared`` holds 2 x 2 logical density matrices (or logical kets of
    length 2); ``received`` the physical output states, cropped to ``d`` levels.
    """
    if len(prepared) != len(received) or not prepared:
        raise ReconstructionError("need matching, non-empty input and output lists")
    coeffs, outs = [], []
    for p, r in zip(prepared, received):
        p = np.asarray(p, dtype=complex)
        if p.ndim == 1:
            p = np.outer(p, p.conj())
        coeffs.append([p[0, 0], p[0, 1], p[1, 0], p[1, 1]])
        m = r.matrix if isinstance(r, QuantumState) else np.asarray(r, dtype=complex)
        outs.append(m[:d, :d].ravel())
    c = np.array(coeffs)
    if np.linalg.matrix_rank(c) < 4:
        raise ReconstructionError("logical inputs do not span the 2 x 2 operator space")
    sol, *_ = np.linalg.lstsq(c, np.array(outs), rcond=None)
    chi = np.zeros((2, 2, d, d), dtype=complex)
    for k, (i, j) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        chi[i, j] = sol[k].reshape(d, d)
    pm = ProcessMatrix(chi, d)
    choi = pm.choi()
    choi = 0.5 * (choi + choi.conj().T)
    w, v = np.linalg.eigh(choi)
    clipped = float(-np.sum(w[w < 0]))
    choi = (v * np.clip(w, 0, None)) @ v.conj().T
    chi2 = np.zeros_like(chi)
    for i in range(2):
        for j in range(2):
            chi2[i, j] = choi[i * d:(i + 1) * d, j * d:(j + 1) * d]
    return ProcessMatrix(chi2, d, {"clipped_negativity": clipped})


def process_matrix_from_channel(channel, encoder: np.ndarray, d: int = 5) -> ProcessMatrix:
    """Exact process matrix of ``channel`` (a function on physical density matrices) after encoding.

    ``encoder`` is the ``n x 2`` isometry whose columns are the logical kets.
    The off-diagonal units are assembled by polarization from pure states, so
    ``channel`` only ever sees valid density matrices.
    """
    e0, e1 = encoder[:, 0], encoder[:, 1]

    def image(ket):
        return np.asarray(channel(np.outer(ket, ket.conj())), dtype=complex)[:d, :d]

    chi = np.zeros((2, 2, d, d), dtype=complex)
    chi[0, 0] = image(e0)
    chi[1, 1] = image(e1)
    plus, minus = image((e0 + e1) / np.sqrt(2)), image((e0 - e1) / np.sqrt(2))
    plus_i, minus_i = image((e0 + 1j * e1) / np.sqrt(2)), image((e0 - 1j * e1) / np.sqrt(2))
    # |0><1| = (P+ - P-)/2 + i (P+i - P-i)/2
    chi[0, 1] = 0.5 * (plus - minus) + 0.5j * (plus_i - minus_i)
    chi[1, 0] = chi[0, 1].conj().T
    return ProcessMatrix(chi, d)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def process_fidelity(chi_m: ProcessMatrix, chi_i: ProcessMatrix) -> float:
    """``(1/4) (Tr sqrt(sqrt(chi_i) chi_m sqrt(chi_i)))^2`` on trace-2 Choi matrices."""
    if chi_m.d != chi_i.d:
        raise ValueError("process matrices have different physical dimensions")
    si = _psd_sqrt(chi_i.choi())
    inner = si @ chi_m.choi() @ si
    w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(0.25 * np.sum(np.sqrt(np.clip(w, 0, None))) ** 2)
