"""Dense complex linear algebra for small quantum registers.

States, channels and measurements are thin immutable wrappers around numpy
arrays. Every constructor validates its physical invariants, so any object
that exists is known to be a valid density matrix / CPTP map / POVM.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import unitary_group

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_FLOOR = -1e-10
UNITARY_TOL = 1e-10
COMPLETENESS_TOL = 1e-10
NORM_TOL = 1e-12

MAX_DIM = 16

# Register factorization: electron (outer) x nuclear (inner).
ELECTRON = "electron"
NUCLEAR = "nuclear"


class QuantumStateError(ValueError):
    """An array failed a physical-validity check."""


class DimensionError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _check_square(m: np.ndarray, what: str) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{what} must be a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise QuantumStateError(f"{what} has non-finite entries")


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator.

    The wrapped array is read-only. Use :meth:`from_array` with ``validate=False``
    only for intermediate values that are checked later.
    """

    __slots__ = ("_m",)

    def __init__(self, matrix, validate: bool = True):
        m = _frozen(matrix)
        if validate:
            self._validate(m)
        self._m = m

    @staticmethod
    def _validate(m: np.ndarray) -> None:
        _check_square(m, "density matrix")
        if m.shape[0] > MAX_DIM:
            raise DimensionError(f"dimension {m.shape[0]} exceeds cap {MAX_DIM}")
        if not is_hermitian(m):
            raise QuantumStateError("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_TOL:
            raise QuantumStateError(f"density matrix trace {tr.real:.15g} != 1")
        lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if lam[0] < PSD_FLOOR:
            raise QuantumStateError(f"density matrix has eigenvalue {lam[0]:.3e} < 0")

    @classmethod
    def from_pure(cls, psi) -> "DensityMatrix":
        v = psi.amplitudes if isinstance(psi, PureState) else np.asarray(psi, dtype=complex)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim) / dim)

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    def purity(self) -> float:
        return float(np.real(np.trace(self._m @ self._m)))

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self._m)).copy()

    def coherence(self, a: int, b: int) -> complex:
        """Amplitude-ratio coherence ``rho[b, a]``; its argument is the phase of |b> relative to |a>."""
        return complex(self._m[b, a])

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self._m, dtype=dtype)

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim})"


class PureState:
    __slots__ = ("_v",)

    def __init__(self, amplitudes):
        v = np.array(amplitudes, dtype=complex).ravel()
        if not np.all(np.isfinite(v)):
            raise QuantumStateError("state vector has non-finite entries")
        if abs(np.linalg.norm(v) - 1.0) > NORM_TOL:
            raise QuantumStateError(f"state vector norm {np.linalg.norm(v):.15g} != 1")
        v.setflags(write=False)
        self._v = v

    @classmethod
    def normalized(cls, amplitudes) -> "PureState":
        v = np.asarray(amplitudes, dtype=complex)
        return cls(v / np.linalg.norm(v))

    @property
    def amplitudes(self) -> np.ndarray:
        return self._v

    @property
    def dim(self) -> int:
        return self._v.shape[0]

    def density(self) -> DensityMatrix:
        return DensityMatrix.from_pure(self)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """CPTP map given by Kraus operators with sum K^dagger K = I."""

    operators: tuple

    def __post_init__(self):
        ops = tuple(_frozen(k) for k in self.operators)
        if not ops:
            raise QuantumStateError("Kraus channel needs at least one operator")
        d = ops[0].shape[0]
        for k in ops:
            _check_square(k, "Kraus operator")
            if k.shape[0] != d:
                raise DimensionError("Kraus operators have mixed dimensions")
        total = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(total - np.eye(d))) > COMPLETENESS_TOL:
            raise QuantumStateError("Kraus set is not complete (sum K^dag K != I)")
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    def adjoint(self, observable: np.ndarray) -> np.ndarray:
        """Heisenberg-picture action on an observable."""
        return sum(k.conj().T @ observable @ k for k in self.operators)

    @classmethod
    def identity(cls, dim: int) -> "KrausChannel":
        return cls((np.eye(dim),))

    @classmethod
    def from_schur(cls, damping: np.ndarray, basis: np.ndarray | None = None) -> "KrausChannel":
        """Channel rho -> W (D o (W^dag rho W)) W^dag for a PSD damping matrix D with unit diagonal.

        ``basis`` is the unitary W whose columns define the frame in which the
        element-wise damping acts (computational basis when omitted).
        """
        d = np.asarray(damping, dtype=complex)
        lam, vecs = np.linalg.eigh(0.5 * (d + d.conj().T))
        if lam[0] < PSD_FLOOR:
            raise QuantumStateError("damping matrix is not positive semidefinite")
        ops = []
        for val, vec in zip(lam, vecs.T):
            if val <= 1e-15:
                continue
            k = np.diag(np.sqrt(val) * vec)
            if basis is not None:
                k = basis @ k @ basis.conj().T
            ops.append(k)
        # eigh roundoff leaves sum K^dag K off the identity by ~1e-16
        return cls(tuple(ops))


class Povm:
    __slots__ = ("elements", "labels")

    def __init__(self, elements: Sequence, labels: Sequence | None = None):
        els = tuple(_frozen(e) for e in elements)
        if not els:
            raise QuantumStateError("POVM needs at least one element")
        d = els[0].shape[0]
        for e in els:
            _check_square(e, "POVM element")
            if e.shape[0] != d:
                raise DimensionError("POVM elements have mixed dimensions")
            if not is_hermitian(e, 1e-10):
                raise QuantumStateError("POVM element is not Hermitian")
            if np.linalg.eigvalsh(0.5 * (e + e.conj().T))[0] < PSD_FLOOR:
                raise QuantumStateError("POVM element is not positive semidefinite")
        if np.max(np.abs(sum(els) - np.eye(d))) > COMPLETENESS_TOL:
            raise QuantumStateError("POVM elements do not sum to the identity")
        self.elements = els
        self.labels = tuple(labels) if labels is not None else tuple(range(len(els)))
        if len(self.labels) != len(els):
            raise ValueError("one label per POVM element required")

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @classmethod
    def projective(cls, basis: np.ndarray, labels: Sequence | None = None) -> "Povm":
        """Projectors onto the columns of a unitary ``basis``."""
        b = np.asarray(basis, dtype=complex)
        return cls([np.outer(b[:, i], b[:, i].conj()) for i in range(b.shape[1])], labels)

    @classmethod
    def computational(cls, dim: int) -> "Povm":
        return cls.projective(np.eye(dim))


def _as_matrix(state) -> np.ndarray:
    return state.matrix if isinstance(state, DensityMatrix) else np.asarray(state, dtype=complex)


def apply_unitary(state: DensityMatrix, u) -> DensityMatrix:
    u = np.asarray(u, dtype=complex)
    _check_square(u, "unitary")
    if u.shape[0] != state.dim:
        raise DimensionError(f"unitary dim {u.shape[0]} != state dim {state.dim}")
    if not is_unitary(u):
        raise QuantumStateError("operator is not unitary")
    return DensityMatrix(u @ state.matrix @ u.conj().T)


def apply_channel(state: DensityMatrix, ch: KrausChannel) -> DensityMatrix:
    if ch.dim != state.dim:
        raise DimensionError(f"channel dim {ch.dim} != state dim {state.dim}")
    rho = state.matrix
    out = np.zeros_like(rho)
    for k in ch.operators:
        out += k @ rho @ k.conj().T
    return DensityMatrix(out)


def outcome_pdf(state: DensityMatrix, povm: Povm) -> np.ndarray:
    """Outcome probabilities Tr(E_k rho), clipped to [0, 1]."""
    if povm.dim != state.dim:
        raise DimensionError(f"POVM dim {povm.dim} != state dim {state.dim}")
    rho = state.matrix
    # Tr(E rho) = sum_ij E_ij rho_ji
    p = np.array([np.real(np.sum(e * rho.T)) for e in povm.elements])
    if p.min() < -1e-12:
        raise QuantumStateError(f"negative outcome probability {p.min():.3e}")
    return np.clip(p, 0.0, 1.0)


def tensor(*mats) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out


def partial_trace(state: DensityMatrix, keep: str) -> DensityMatrix:
    """Reduced state of the electron or nuclear qubit of the 4-level register."""
    if state.dim != 4:
        raise DimensionError(f"partial_trace supports the 2x2 register only, got dim {state.dim}")
    r = state.matrix.reshape(2, 2, 2, 2)  # (e, n, e', n')
    if keep == ELECTRON:
        red = np.einsum("injn->ij", r)
    elif keep == NUCLEAR:
        red = np.einsum("eiej->ij", r)
    else:
        raise ValueError(f"unknown subsystem {keep!r}; expected {ELECTRON!r} or {NUCLEAR!r}")
    return DensityMatrix(red)


def concurrence(state: DensityMatrix) -> float:
    """Wootters concurrence of a two-qubit state."""
    if state.dim != 4:
        raise DimensionError("concurrence is defined for two qubits")
    yy = np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]])
    w, v = np.linalg.eigh(state.matrix)
    root = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    m = root @ yy @ state.matrix.conj() @ yy @ root
    mu = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[::-1]
    # round-off eigenvalues would otherwise survive the square root as ~1e-8
    mu[mu < 1e-13 * max(mu[0], 1e-300)] = 0.0
    lam = np.sqrt(mu)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


# Common single-qubit gates used by tests and probe constructions.
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def phase_damping(dim: int, lam: float, pairs=None) -> KrausChannel:
    """Coherences between the listed level pairs shrink by (1 - lam).

    With ``pairs=None`` on a qubit this is the textbook phase-damping channel.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    if pairs is None:
        if dim != 2:
            raise ValueError("pairs must be given for dim > 2")
        pairs = [(0, 1)]
    # random-phase model: the second level of each pair picks up a phase kick
    d = np.ones((dim, dim), dtype=complex)
    for a, b in pairs:
        d[a, b] = d[b, a] = 1.0 - lam
    return KrausChannel.from_schur(d)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary."""
    return unitary_group.rvs(dim, random_state=rng)


def random_channel(dim: int, n_ops: int, rng: np.random.Generator) -> KrausChannel:
    """Kraus operators cut from a Haar-random isometry of dim -> n_ops * dim."""
    v = unitary_group.rvs(dim * n_ops, random_state=rng)[:, :dim]
    return KrausChannel(tuple(v[k * dim:(k + 1) * dim] for k in range(n_ops)))


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Ginibre-distributed mixed state of the given rank (full rank by default)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho).real)
