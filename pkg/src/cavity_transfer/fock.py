"""Truncated Fock-space states, operators and channels.

All matrices are dense ``complex128`` arrays.  Joint states use the
row-major (``np.kron``) ordering of their subsystems, so for two modes the
basis index of ``|n1, n2>`` is ``n1 * d2 + n2``.

Beamsplitter phase convention
-----------------------------
``beamsplitter_unitary(theta)`` is ``exp(-i H)`` with
``H = -(i theta / 2) (a1^dag a2 - a1 a2^dag)``.  Under it
``a1^dag -> cos(theta/2) a1^dag + sin(theta/2) a2^dag``, so ``theta = pi/2``
sends ``|1,0>`` to ``(|1,0> + |0,1>)/sqrt(2)`` with a +1 relative phase and
``theta = pi`` sends ``|1,0>`` to ``|0,1>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import TruncationError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10


def _frozen(matrix: np.ndarray) -> np.ndarray:
    matrix = np.array(matrix, dtype=np.complex128, copy=True)
    matrix.flags.writeable = False
    return matrix


@dataclass(frozen=True)
class QuantumState:
    """Density matrix on a (possibly joint) truncated Fock space.

    Construction validates Hermiticity, unit trace and positivity.  Eigenvalues
    in ``[-1e-10, 0)`` are clipped to zero and the matrix renormalized; more
    negative eigenvalues raise ``ValueError``.
    """

    matrix: np.ndarray
    subsystems: tuple[int, ...] = field(default=())

    def __post_init__(self):
        rho = np.asarray(self.matrix, dtype=np.complex128)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {rho.shape}")
        dim = rho.shape[0]
        subsystems = tuple(int(d) for d in self.subsystems) or (dim,)
        if int(np.prod(subsystems)) != dim:
            raise ValueError(f"subsystem dims {subsystems} do not multiply to {dim}")

        asym = np.max(np.abs(rho - rho.conj().T)) if dim else 0.0
        if asym > HERMITIAN_TOL:
            raise ValueError(f"matrix is not Hermitian (max deviation {asym:.3g})")
        rho = 0.5 * (rho + rho.conj().T)

        tr = np.trace(rho).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace must be 1, got {tr!r}")

        evals, evecs = np.linalg.eigh(rho)
        if evals[0] < -PSD_TOL:
            raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {evals[0]:.3g})")
        if evals[0] < 0:
            evals = np.clip(evals, 0.0, None)
            rho = (evecs * evals) @ evecs.conj().T
            rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.trace(rho).real

        object.__setattr__(self, "matrix", _frozen(rho))
        object.__setattr__(self, "subsystems", subsystems)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_ket(cls, ket: Sequence[complex], subsystems: Sequence[int] = ()) -> "QuantumState":
        psi = np.asarray(ket, dtype=np.complex128)
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise ValueError("cannot build a state from the zero vector")
        psi = psi / norm
        return cls(np.outer(psi, psi.conj()), tuple(subsystems))

    def expect(self, operator) -> complex:
        op = operator.matrix if isinstance(operator, FockOperator) else np.asarray(operator)
        return complex(np.trace(self.matrix @ op))

    def populations(self) -> np.ndarray:
        return np.clip(np.diag(self.matrix).real, 0.0, None)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def is_pure(self, tol: float = 1e-10) -> bool:
        return abs(self.purity() - 1.0) < tol


@dataclass(frozen=True)
class FockOperator:
    """A linear operator on a truncated Fock space."""

    matrix: np.ndarray
    subsystems: tuple[int, ...] = field(default=())

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        subsystems = tuple(int(d) for d in self.subsystems) or (m.shape[0],)
        if int(np.prod(subsystems)) != m.shape[0]:
            raise ValueError(f"subsystem dims {subsystems} do not multiply to {m.shape[0]}")
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "subsystems", subsystems)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dag(self) -> "FockOperator":
        return FockOperator(self.matrix.conj().T, self.subsystems)

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            return FockOperator(self.matrix @ other.matrix, self.subsystems)
        return self.matrix @ other

    def unitarity_error(self) -> float:
        m = self.matrix
        return float(np.linalg.norm(m.conj().T @ m - np.eye(self.dim), ord=2))


# --------------------------------------------------------------------------
# elementary operators (raw arrays)


@lru_cache(maxsize=64)
def _annihilation(dim: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(np.complex128)
    a.flags.writeable = False
    return a


def annihilation(dim: int) -> np.ndarray:
    """Truncated annihilation operator ``a`` with ``a|n> = sqrt(n)|n-1>``."""
    if dim < 1:
        raise ValueError("dim must be positive")
    return _annihilation(int(dim))


def number_operator(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(np.complex128)


def _check_level(n: int, dim: int) -> None:
    if dim < 1:
        raise ValueError("dim must be positive")
    if not 0 <= n < dim:
        raise TruncationError(f"photon number {n} out of range for dimension {dim}")


# --------------------------------------------------------------------------
# states


def make_fock(n: int, dim: int) -> QuantumState:
    """Pure number state ``|n><n|``."""
    _check_level(n, dim)
    ket = np.zeros(dim, dtype=np.complex128)
    ket[n] = 1.0
    return QuantumState.from_ket(ket)


def fock_ket(n: int, dim: int) -> np.ndarray:
    _check_level(n, dim)
    ket = np.zeros(dim, dtype=np.complex128)
    ket[n] = 1.0
    return ket


def coherent_ket(alpha: complex, dim: int) -> np.ndarray:
    """Normalized truncated coherent-state amplitudes.

    Raises ``TruncationError`` when ``|alpha|^2 > dim / 4``.
    """
    alpha = complex(alpha)
    if abs(alpha) ** 2 > dim / 4:
        raise TruncationError(f"|alpha|^2 = {abs(alpha) ** 2:.3g} exceeds dim/4 = {dim / 4:.3g}")
    n = np.arange(dim)
    # log-space Poisson amplitudes avoid overflow of alpha**n / sqrt(n!)
    log_fact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, dim)))))
    if alpha == 0:
        ket = np.zeros(dim, dtype=np.complex128)
        ket[0] = 1.0
        return ket
    mag = np.exp(n * np.log(abs(alpha)) - 0.5 * log_fact - 0.5 * abs(alpha) ** 2)
    ket = mag * np.exp(1j * n * np.angle(alpha))
    return ket / np.linalg.norm(ket)


def coherent_state(alpha: complex, dim: int) -> QuantumState:
    return QuantumState.from_ket(coherent_ket(alpha, dim))


def thermal_state(n_mean: float, dim: int) -> QuantumState:
    """Truncated, renormalized thermal state with mean occupation ``n_mean``."""
    if n_mean < 0:
        raise ValueError("n_mean must be non-negative")
    if n_mean == 0:
        return make_fock(0, dim)
    ratio = n_mean / (1.0 + n_mean)
    p = ratio ** np.arange(dim)
    return QuantumState(np.diag(p / p.sum()).astype(np.complex128))


def tensor(*states: QuantumState) -> QuantumState:
    rho = np.array([[1.0 + 0j]])
    dims: list[int] = []
    for s in states:
        rho = np.kron(rho, s.matrix)
        dims.extend(s.subsystems)
    return QuantumState(rho, tuple(dims))


def mean_photon_number(state: QuantumState) -> float:
    if len(state.subsystems) != 1:
        raise ValueError("mean_photon_number expects a single-mode state")
    return float(np.dot(np.arange(state.dim), state.populations()))


# --------------------------------------------------------------------------
# operators


def parity_operator(dim: int) -> FockOperator:
    return FockOperator(np.diag((-1.0) ** np.arange(dim)))


def kerr_unitary(chi: float, t: float, dim: int) -> FockOperator:
    """``exp(-i (chi/2) n(n-1) t)`` on the diagonal; ``chi`` in rad/s, ``t`` in s."""
    n = np.arange(dim, dtype=float)
    return FockOperator(np.diag(np.exp(-0.5j * chi * n * (n - 1) * t)))


def displacement(alpha: complex, dim: int) -> FockOperator:
    """``exp(alpha a^dag - alpha^* a)`` of the truncated generator.

    Exactly unitary on the truncated space; matrix elements near the
    truncation edge deviate from the infinite-dimensional operator, so
    callers needing accurate elements should work in a padded space.
    """
    a = annihilation(dim)
    gen = alpha * a.conj().T - np.conj(alpha) * a
    return FockOperator(expm(gen))


@lru_cache(maxsize=256)
def _beamsplitter(theta: float, d1: int, d2: int) -> np.ndarray:
    a1 = np.kron(annihilation(d1), np.eye(d2))
    a2 = np.kron(np.eye(d1), annihilation(d2))
    h = -0.5j * theta * (a1.conj().T @ a2 - a1 @ a2.conj().T)
    u = expm(-1j * h)
    u.flags.writeable = False
    return u


def beamsplitter_unitary(theta: float, dims: Sequence[int] | int) -> FockOperator:
    """Two-mode beamsplitter acting on ``d x d`` (see module docstring for the phase convention)."""
    if isinstance(dims, (int, np.integer)):
        dims = (int(dims), int(dims))
    d1, d2 = (int(d) for d in dims)
    if d1 != d2:
        raise ValueError(f"beamsplitter ports must have equal dimension, got {d1} and {d2}")
    return FockOperator(_beamsplitter(float(theta), d1, d2), (d1, d2))


# --------------------------------------------------------------------------
# channels


def apply_unitary(state: QuantumState, unitary) -> QuantumState:
    u = unitary.matrix if isinstance(unitary, FockOperator) else np.asarray(unitary)
    return QuantumState(u @ state.matrix @ u.conj().T, state.subsystems)


def apply_kraus(state: QuantumState, kraus: Iterable[np.ndarray], subsystems: Sequence[int] = ()) -> QuantumState:
    out = None
    for k in kraus:
        term = k @ state.matrix @ k.conj().T
        out = term if out is None else out + term
    if out is None:
        raise ValueError("no Kraus operators given")
    return QuantumState(out, tuple(subsystems) or (out.shape[0],))


def partial_trace(state: QuantumState, keep: int | Sequence[int]) -> QuantumState:
    """Reduce a joint state to the subsystem(s) listed in ``keep``."""
    dims = state.subsystems
    if len(dims) < 2:
        raise ValueError("partial_trace needs a joint state with at least two subsystems")
    keep_list = [keep] if isinstance(keep, (int, np.integer)) else list(keep)
    for k in keep_list:
        if not 0 <= k < len(dims):
            raise IndexError(f"subsystem index {k} out of range for {len(dims)} subsystems")
    keep_list = sorted(set(int(k) for k in keep_list))
    n = len(dims)
    rho = state.matrix.reshape(dims + dims)
    # einsum subscripts: row indices, column indices; traced axes share a letter
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = [letters[i] for i in range(n)]
    cols = [letters[n + i] if i in keep_list else letters[i] for i in range(n)]
    out = "".join(rows[i] for i in keep_list) + "".join(cols[i] for i in keep_list)
    reduced = np.einsum("".join(rows) + "".join(cols) + "->" + out, rho)
    kept_dims = tuple(dims[i] for i in keep_list)
    size = int(np.prod(kept_dims))
    return QuantumState(reduced.reshape(size, size), kept_dims)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``.

    Either argument may be a ``QuantumState``, a density matrix, or a ket
    (1-D array), in which case the cheaper ``<psi|sigma|psi>`` is used.
    """
    r = rho.matrix if isinstance(rho, QuantumState) else np.asarray(rho, dtype=np.complex128)
    s = sigma.matrix if isinstance(sigma, QuantumState) else np.asarray(sigma, dtype=np.complex128)
    if r.ndim == 1 and s.ndim == 1:
        return float(abs(np.vdot(r, s)) ** 2)
    if r.ndim == 1:
        return float(np.real(np.vdot(r, s @ r)))
    if s.ndim == 1:
        return float(np.real(np.vdot(s, r @ s)))
    sr = _psd_sqrt(r)
    inner = sr @ s @ sr
    w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)


def passive_split(state: QuantumState, amplitudes: Sequence[complex], dim: int | None = None) -> QuantumState:
    """Distribute a single mode over several output modes and an environment.

    The input mode operator maps to ``sum_k c_k b_k + e b_env`` with
    ``e = sqrt(1 - sum |c_k|^2)``; the environment is traced out.  A single
    amplitude gives the pure-loss channel with transmissivity ``|c|^2``.  The
    output lives on ``dim``-level modes (default: the input dimension), which
    is exact because no output mode can exceed the input photon number.
    """
    if len(state.subsystems) != 1:
        raise ValueError("passive_split expects a single-mode input state")
    c = np.asarray(amplitudes, dtype=complex).ravel()
    total = float(np.sum(np.abs(c) ** 2))
    if total > 1 + 1e-12:
        raise ValueError(f"output amplitudes carry more than unit power ({total:.6g})")
    e = np.sqrt(max(0.0, 1.0 - total))
    d_in = state.dim
    d = d_in if dim is None else int(dim)
    if d < d_in:
        support = np.flatnonzero(state.populations() > 1e-14)
        if support.size and support[-1] >= d:
            raise TruncationError(f"output dimension {d} cannot hold input support up to n = {support[-1]}")
    m = len(c)
    log_fact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, d_in)))))
    out_dim = d**m
    strides = [d ** (m - 1 - i) for i in range(m)]
    kraus = [np.zeros((out_dim, d_in), dtype=complex) for _ in range(d_in)]

    def compositions(total_n, parts):
        if parts == 1:
            yield (total_n,)
            return
        for first in range(total_n + 1):
            for rest in compositions(total_n - first, parts - 1):
                yield (first,) + rest

    for n in range(d_in):
        for l_env in range(n + 1):
            if l_env and e == 0:
                continue
            for ks in compositions(n - l_env, m):
                if any(k >= d for k in ks):
                    continue
                coef = np.exp(0.5 * (log_fact[n] - log_fact[l_env] - sum(log_fact[k] for k in ks)))
                for ck, k in zip(c, ks):
                    coef = coef * ck**k
                coef = coef * e**l_env
                row = sum(k * s for k, s in zip(ks, strides))
                kraus[l_env][row, n] += coef
    return apply_kraus(state, kraus, (d,) * m)
