"""
Quantum channels in Kraus form.

Provides the channel type, the usual single-qubit noise presets, the
phase-noise constructor built from per-eigenvalue Kraus coefficients, and
predicates for the phase-noise and unital classes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence
import logging

import numpy as np

from .core import (
    ATOL,
    ComplexMatrix,
    DensityOperator,
    Observable,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    allclose,
    as_matrix,
    dagger,
    identity,
)
from .errors import DimensionMismatchError, InvalidChannelError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """Completely positive trace-preserving map sum_n E_n rho E_n^dagger."""

    kraus_ops: tuple

    def __post_init__(self):
        ops = tuple(as_matrix(op) for op in self.kraus_ops)
        if not ops:
            raise InvalidChannelError("a channel needs at least one Kraus operator")
        dim = ops[0].shape[0]
        if any(op.shape != (dim, dim) for op in ops):
            raise InvalidChannelError("Kraus operators have different dimensions")
        completeness = sum(dagger(op) @ op for op in ops)
        if not allclose(completeness, np.eye(dim)):
            dev = float(np.max(np.abs(completeness - np.eye(dim))))
            raise InvalidChannelError(f"Kraus completeness violated by {dev:.3e}")
        object.__setattr__(self, "kraus_ops", ops)

    @property
    def dim(self) -> int:
        return int(self.kraus_ops[0].shape[0])

    def __len__(self) -> int:
        return len(self.kraus_ops)

    def act(self, mat: ComplexMatrix) -> np.ndarray:
        """Apply the map to an arbitrary operator (used for basis probes)."""
        mat = np.asarray(mat)
        if mat.shape != (self.dim, self.dim):
            raise DimensionMismatchError(
                f"operator shape {mat.shape} does not match channel dimension {self.dim}"
            )
        return sum(op @ mat @ dagger(op) for op in self.kraus_ops)


def apply(chan: QuantumChannel, sigma: DensityOperator) -> DensityOperator:
    """Return sum_n E_n sigma E_n^dagger."""
    if sigma.dim != chan.dim:
        raise DimensionMismatchError(
            f"state dimension {sigma.dim} does not match channel dimension {chan.dim}"
        )
    out = chan.act(sigma.matrix)
    return DensityOperator((out + dagger(out)) / 2.0)


def compose(a: QuantumChannel, b: QuantumChannel) -> QuantumChannel:
    """Channel a o b (b acts first), Kraus list {A_m B_n}."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"cannot compose channels of dims {a.dim} and {b.dim}")
    return QuantumChannel(tuple(am @ bn for am in a.kraus_ops for bn in b.kraus_ops))


def hermitian_basis(dim: int) -> List[np.ndarray]:
    """Orthogonal basis of dim x dim Hermitian matrices (dim^2 elements)."""
    basis = []
    for j in range(dim):
        for k in range(dim):
            m = np.zeros((dim, dim), dtype=np.complex128)
            if j == k:
                m[j, j] = 1.0
            elif j < k:
                m[j, k] = m[k, j] = 1.0
            else:
                m[j, k] = 1j
                m[k, j] = -1j
            basis.append(m)
    return basis


def channels_equal(a: QuantumChannel, b: QuantumChannel, atol: float = ATOL) -> bool:
    """Compare two channels by their action on a Hermitian operator basis."""
    if a.dim != b.dim:
        return False
    return all(allclose(a.act(m), b.act(m), atol) for m in hermitian_basis(a.dim))


def is_unital(chan: QuantumChannel) -> bool:
    """True iff sum_n E_n E_n^dagger = I."""
    total = sum(op @ dagger(op) for op in chan.kraus_ops)
    return allclose(total, np.eye(chan.dim))


def is_phase_noise(chan: QuantumChannel, K: Observable) -> bool:
    """
    Check that the channel fixes every eigenprojector of K.

    Within a degenerate eigenspace the coherences |k><l| must be preserved as
    well, so the answer does not depend on how the eigensolver picked the
    basis of that subspace.
    """
    if chan.dim != K.dim:
        raise DimensionMismatchError(
            f"channel dimension {chan.dim} does not match observable dimension {K.dim}"
        )
    if not all(allclose(chan.act(proj), proj) for proj in K.eigenprojectors()):
        return False
    vecs = K.eigenvectors
    for group in K.eigenspaces():
        for k in group:
            for l in group:
                if k == l:
                    continue
                coherence = np.outer(vecs[:, k], np.conj(vecs[:, l]))
                if not allclose(chan.act(coherence), coherence):
                    return False
    return True


def make_phase_noise(K: Observable, coeffs) -> QuantumChannel:
    """
    Build the channel E_n = sum_k c_n(k) |k><k| in K's eigenbasis.

    Args:
        K: Coupling observable whose eigenbasis the Kraus operators share
        coeffs: Array of shape (n_kraus, dim) indexed in K's eigenvalue order;
            column k must have unit norm, and columns within one eigenspace
            of K must be equal

    Returns:
        Phase-noise channel with respect to K

    Raises:
        InvalidChannelError: unnormalized columns, or columns that differ
            inside a degenerate eigenspace
    """
    c = np.atleast_2d(np.array(coeffs, dtype=np.complex128))
    if c.shape[1] != K.dim:
        raise DimensionMismatchError(
            f"coefficient matrix has {c.shape[1]} columns, observable dimension is {K.dim}"
        )
    norms = np.sum(np.abs(c) ** 2, axis=0)
    if np.max(np.abs(norms - 1.0)) > ATOL:
        raise InvalidChannelError(
            f"sum_n |c_n(k)|^2 must be 1 for every k, got {np.round(norms, 12).tolist()}"
        )
    for group in K.eigenspaces():
        spread = float(np.max(np.abs(c[:, group] - c[:, [group[0]]])))
        if spread > ATOL:
            raise InvalidChannelError(
                f"eigenvalue {K.eigenvalues[group[0]]:.6g} is degenerate; its coefficient "
                f"columns {group} must be equal (differ by {spread:.3e})"
            )
    vecs = K.eigenvectors
    ops = tuple(vecs @ np.diag(row) @ dagger(vecs) for row in c)
    return QuantumChannel(ops)


# Presets

def identity_channel(dim: int = 2) -> QuantumChannel:
    return QuantumChannel((identity(dim),))


def _check_probability(name: str, value: float) -> None:
    if value < 0 or value > 1:
        raise InvalidChannelError(f"{name} must be in [0, 1], got {value}")


def phase_flip(p: float) -> QuantumChannel:
    """{sqrt(1-p) I, sqrt(p) Z}."""
    _check_probability("p", p)
    return QuantumChannel((np.sqrt(1.0 - p) * np.eye(2), np.sqrt(p) * PAULI_Z))


def bit_flip(p: float) -> QuantumChannel:
    """{sqrt(1-p) I, sqrt(p) X}."""
    _check_probability("p", p)
    return QuantumChannel((np.sqrt(1.0 - p) * np.eye(2), np.sqrt(p) * PAULI_X))


def depolarizing(p: float) -> QuantumChannel:
    """rho -> (1-p) rho + p I/2."""
    _check_probability("p", p)
    k0 = np.sqrt(max(0.0, 1.0 - 3.0 * p / 4.0))
    k1 = np.sqrt(max(0.0, p / 4.0))
    return QuantumChannel((k0 * np.eye(2), k1 * PAULI_X, k1 * PAULI_Y, k1 * PAULI_Z))


def z_rotation(phi: float) -> QuantumChannel:
    """Unitary exp(-i phi Z / 2)."""
    return QuantumChannel((np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)]),))


def amplitude_damping(gamma: float) -> QuantumChannel:
    _check_probability("gamma", gamma)
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - gamma)]])
    k1 = np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]])
    return QuantumChannel((k0, k1))


def mixed_unitary_channel(weights: Sequence[float], unitaries: Sequence[ComplexMatrix]) -> QuantumChannel:
    """sum_j p_j U_j rho U_j^dagger; always unital."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > ATOL:
        raise InvalidChannelError("mixture weights must be non-negative and sum to 1")
    return QuantumChannel(tuple(np.sqrt(p) * np.asarray(u) for p, u in zip(w, unitaries)))


PRESETS = {
    "identity": lambda _value=None: identity_channel(2),
    "phase-flip": phase_flip,
    "bit-flip": bit_flip,
    "depolarizing": depolarizing,
    "z-rotation": z_rotation,
    "amplitude-damping": amplitude_damping,
}


def make_preset(name: str, value: float = None) -> QuantumChannel:
    """Look up a named single-qubit preset."""
    try:
        factory = PRESETS[name]
    except KeyError:
        raise InvalidChannelError(
            f"unknown channel preset '{name}'; choose one of {', '.join(sorted(PRESETS))}"
        )
    if name != "identity" and value is None:
        raise InvalidChannelError(f"preset '{name}' needs a parameter")
    return factory(value)
