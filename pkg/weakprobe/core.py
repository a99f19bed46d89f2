"""
Core linear algebra and quantum state types.

Dense complex matrices (numpy ``complex128`` arrays) carry every operator and
state. The measured system is always the left tensor factor and the probe the
right one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple, Union
import logging

import numpy as np

from .errors import (
    DegenerateSelectionError,
    DimensionMismatchError,
    InvalidObservableError,
    InvalidStateError,
)

logger = logging.getLogger(__name__)

# Tolerance for algebraic identities
ATOL = 1e-10
# Tolerance for eigendecomposition residuals and positivity
EIG_ATOL = 1e-8

ComplexMatrix = np.ndarray
MatrixLike = Union[np.ndarray, Sequence[Sequence[complex]]]


def as_matrix(data: MatrixLike) -> ComplexMatrix:
    """Return ``data`` as a read-only square complex128 matrix."""
    mat = np.array(data, dtype=np.complex128)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
        raise DimensionMismatchError(f"expected a non-empty square matrix, got shape {mat.shape}")
    mat.setflags(write=False)
    return mat


def allclose(a: ComplexMatrix, b: ComplexMatrix, atol: float = ATOL) -> bool:
    """Entry-wise comparison with an absolute tolerance only."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        return False
    return bool(np.max(np.abs(a - b), initial=0.0) <= atol)


def dagger(mat: ComplexMatrix) -> ComplexMatrix:
    return np.conj(np.transpose(mat))


def is_hermitian(mat: ComplexMatrix, atol: float = ATOL) -> bool:
    return allclose(mat, dagger(mat), atol)


def tensor(a: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    """Kronecker product with ``a`` (the measured system) as the left factor."""
    return as_matrix(np.kron(np.asarray(a), np.asarray(b)))


def identity(dim: int) -> ComplexMatrix:
    return as_matrix(np.eye(dim))


PAULI_X = as_matrix([[0, 1], [1, 0]])
PAULI_Y = as_matrix([[0, -1j], [1j, 0]])
PAULI_Z = as_matrix([[1, 0], [0, -1]])
PROJ_0 = as_matrix([[1, 0], [0, 0]])
PROJ_1 = as_matrix([[0, 0], [0, 1]])


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized state vector."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.size == 0:
            raise InvalidStateError("state vector is empty")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > ATOL:
            raise InvalidStateError(f"state vector norm^2 is {norm:.12g}, expected 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes: Iterable[complex]) -> "PureState":
        """Build a state after normalizing ``amplitudes``."""
        amps = np.array(list(amplitudes), dtype=np.complex128)
        norm = np.linalg.norm(amps)
        if norm <= ATOL:
            raise InvalidStateError("cannot normalize a zero vector")
        return cls(amps / norm)

    @classmethod
    def basis(cls, index: int, dim: int) -> "PureState":
        amps = np.zeros(dim, dtype=np.complex128)
        amps[index] = 1.0
        return cls(amps)

    @property
    def dim(self) -> int:
        return int(self.amplitudes.size)

    def projector(self) -> ComplexMatrix:
        return as_matrix(np.outer(self.amplitudes, np.conj(self.amplitudes)))

    def to_density(self) -> "DensityOperator":
        return DensityOperator(self.projector())

    def overlap(self, other: "PureState") -> complex:
        """Return <self|other>."""
        if other.dim != self.dim:
            raise DimensionMismatchError(f"state dims differ: {self.dim} vs {other.dim}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """
    Positive semidefinite operator with trace at most one.

    Post-selected probe states are sub-normalized, so any trace in [0, 1] is
    accepted here; callers that divide by the trace check it separately.
    """

    matrix: ComplexMatrix

    def __post_init__(self):
        mat = as_matrix(self.matrix)
        if not is_hermitian(mat):
            dev = float(np.max(np.abs(mat - dagger(mat))))
            raise InvalidStateError(f"density operator is not Hermitian (deviation {dev:.3e})")
        evals = np.linalg.eigvalsh(mat)
        if evals[0] < -EIG_ATOL:
            raise InvalidStateError(f"density operator has negative eigenvalue {evals[0]:.3e}")
        tr = float(np.trace(mat).real)
        if tr < -ATOL or tr > 1.0 + ATOL:
            raise InvalidStateError(f"density operator trace {tr:.12g} outside [0, 1]")
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(np.eye(dim) / dim)

    @classmethod
    def from_bloch(cls, x: float, y: float, z: float) -> "DensityOperator":
        """Qubit state (I + xX + yY + zZ)/2."""
        return cls((np.eye(2) + x * PAULI_X + y * PAULI_Y + z * PAULI_Z) / 2.0)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def normalized(self) -> "DensityOperator":
        tr = self.trace
        if tr <= ATOL:
            raise DegenerateSelectionError(
                f"cannot normalize a state with trace {tr:.3e}", trace=tr
            )
        return DensityOperator(self.matrix / tr)


StateLike = Union[PureState, DensityOperator]


def density_of(state: StateLike) -> DensityOperator:
    """Promote a pure state to its projector."""
    if isinstance(state, PureState):
        return state.to_density()
    return state


@dataclass(frozen=True, eq=False)
class Observable:
    """Hermitian operator together with its eigendecomposition."""

    matrix: ComplexMatrix
    eigenvalues: np.ndarray = field(init=False, repr=False, compare=False)
    eigenvectors: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mat = as_matrix(self.matrix)
        if not is_hermitian(mat):
            raise InvalidObservableError("observable matrix is not Hermitian")
        evals, evecs = np.linalg.eigh(mat)
        residual = float(np.max(np.abs(evecs @ np.diag(evals) @ dagger(evecs) - mat)))
        if residual > EIG_ATOL:
            raise InvalidObservableError(f"eigendecomposition residual {residual:.3e}")
        evals = np.array(evals, dtype=float)
        evecs = np.array(evecs, dtype=np.complex128)
        evals.setflags(write=False)
        evecs.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "eigenvalues", evals)
        object.__setattr__(self, "eigenvectors", evecs)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    def eigenvector(self, k: int) -> np.ndarray:
        """Column ``k`` of the eigenvector matrix."""
        return self.eigenvectors[:, k]

    def eigenprojectors(self) -> List[ComplexMatrix]:
        """Rank-1 projectors |k><k| of the solver-chosen eigenbasis."""
        return [as_matrix(np.outer(v, np.conj(v))) for v in self.eigenvectors.T]

    def eigenspaces(self, atol: float = EIG_ATOL) -> List[List[int]]:
        """Group eigenvector indices whose eigenvalues agree within ``atol``."""
        groups: List[List[int]] = []
        for k, lam in enumerate(self.eigenvalues):
            if groups and abs(lam - self.eigenvalues[groups[-1][0]]) <= atol:
                groups[-1].append(k)
            else:
                groups.append([k])
        return groups

    def spectral_projectors(self) -> List[Tuple[float, ComplexMatrix]]:
        """(eigenvalue, projector onto the full eigenspace) pairs."""
        result = []
        for group in self.eigenspaces():
            vecs = self.eigenvectors[:, group]
            result.append((float(np.mean(self.eigenvalues[group])), as_matrix(vecs @ dagger(vecs))))
        return result

    def populations(self, sigma: DensityOperator) -> np.ndarray:
        """Diagonal <k|sigma|k> in the eigenbasis (not normalized)."""
        _check_dims(sigma.dim, self.dim)
        diag = np.einsum("ik,ij,jk->k", np.conj(self.eigenvectors), sigma.matrix, self.eigenvectors)
        return np.real(diag)


def pauli_x() -> Observable:
    return Observable(PAULI_X)


def pauli_y() -> Observable:
    return Observable(PAULI_Y)


def pauli_z() -> Observable:
    return Observable(PAULI_Z)


def projector_observable(index: int, dim: int = 2) -> Observable:
    mat = np.zeros((dim, dim))
    mat[index, index] = 1.0
    return Observable(mat)


def _check_dims(got: int, expected: int) -> None:
    if got != expected:
        raise DimensionMismatchError(f"dimension {got} does not match {expected}")


def partial_trace_measured(rho: DensityOperator, dim_a: int, dim_b: int) -> DensityOperator:
    """Trace out the left (measured) factor of a ``dim_a x dim_b`` joint state."""
    if rho.dim != dim_a * dim_b:
        raise DimensionMismatchError(
            f"joint dimension {rho.dim} is not {dim_a} x {dim_b}"
        )
    blocks = np.asarray(rho.matrix).reshape(dim_a, dim_b, dim_a, dim_b)
    return DensityOperator(np.einsum("ijik->jk", blocks))


def _checked_trace(sigma: DensityOperator) -> float:
    tr = sigma.trace
    if tr <= ATOL:
        raise DegenerateSelectionError(
            f"state trace {tr:.3e} is below tolerance; post-selection never succeeds", trace=tr
        )
    return tr


def _real(value: complex, what: str) -> float:
    if abs(value.imag) > ATOL:
        raise InvalidObservableError(f"{what} has imaginary residue {value.imag:.3e}")
    return float(value.real)


def expectation(sigma: DensityOperator, M: Observable) -> float:
    """tr(sigma M) / tr(sigma)."""
    _check_dims(sigma.dim, M.dim)
    tr = _checked_trace(sigma)
    value = complex(np.trace(sigma.matrix @ M.matrix)) / tr
    return _real(value, "expectation value")


def operator_expectation(sigma: DensityOperator, op: ComplexMatrix) -> complex:
    """Normalized expectation of an arbitrary (not necessarily Hermitian) operator."""
    _check_dims(sigma.dim, np.asarray(op).shape[0])
    tr = _checked_trace(sigma)
    return complex(np.trace(sigma.matrix @ op)) / tr


def variance(sigma: DensityOperator, M: Observable) -> float:
    """<M^2> - <M>^2 for the normalized state."""
    mean = expectation(sigma, M)
    second = _real(operator_expectation(sigma, M.matrix @ M.matrix), "second moment")
    return second - mean * mean


def bloch_vector(sigma: DensityOperator) -> Tuple[float, float, float]:
    """Bloch coordinates of the trace-normalized qubit state."""
    if sigma.dim != 2:
        raise DimensionMismatchError(f"Bloch vector needs a qubit, got dimension {sigma.dim}")
    tr = _checked_trace(sigma)
    rho = sigma.matrix / tr
    x = float(np.trace(rho @ PAULI_X).real)
    y = float(np.trace(rho @ PAULI_Y).real)
    z = float(np.trace(rho @ PAULI_Z).real)
    return (x, y, z)


def dephase(sigma: DensityOperator, K: Observable) -> DensityOperator:
    """Remove coherences between distinct eigenspaces of ``K``."""
    _check_dims(sigma.dim, K.dim)
    out = sum(P @ sigma.matrix @ P for _, P in K.spectral_projectors())
    return DensityOperator(out)
