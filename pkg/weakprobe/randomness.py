"""
Seeded random states, observables and channels for property checks.

All generators take an explicit ``numpy.random.Generator`` so that the same
seed reproduces the same objects in tests and in ``weakprobe verify``.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy.stats import unitary_group

from .channels import QuantumChannel, make_phase_noise, mixed_unitary_channel
from .core import DensityOperator, Observable, PureState, dagger


def make_rng(seed, *stream) -> np.random.Generator:
    """Generator keyed by ``seed`` and an optional stream path."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary."""
    return unitary_group.rvs(dim, random_state=rng)


def random_pure_state(dim: int, rng: np.random.Generator) -> PureState:
    amps = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return PureState.from_amplitudes(amps)


def random_density(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> DensityOperator:
    """Random state of the given rank (full rank by default)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ dagger(g)
    rho = rho / np.trace(rho).real
    return DensityOperator((rho + dagger(rho)) / 2.0)


def random_observable(dim: int, rng: np.random.Generator, degenerate: bool = False) -> Observable:
    """Random Hermitian operator with eigenvalues in [-1, 1]."""
    evals = rng.uniform(-1.0, 1.0, size=dim)
    if degenerate and dim > 1:
        evals[1] = evals[0]
    u = random_unitary(dim, rng)
    mat = u @ np.diag(evals) @ dagger(u)
    return Observable((mat + dagger(mat)) / 2.0)


def random_phase_noise(K: Observable, rng: np.random.Generator, n_kraus: int = 3) -> QuantumChannel:
    """Random channel whose Kraus operators are diagonal in K's eigenbasis."""
    c = rng.normal(size=(n_kraus, K.dim)) + 1j * rng.normal(size=(n_kraus, K.dim))
    c = c / np.linalg.norm(c, axis=0, keepdims=True)
    # A degenerate eigenspace must see the same coefficients to preserve its coherences
    for group in K.eigenspaces():
        c[:, group] = c[:, [group[0]]]
    return make_phase_noise(K, c)


def random_unital_channel(dim: int, rng: np.random.Generator, n_unitaries: int = 3) -> QuantumChannel:
    """Random mixture of Haar unitaries."""
    weights = rng.dirichlet(np.ones(n_unitaries))
    unitaries = [random_unitary(dim, rng) for _ in range(n_unitaries)]
    return mixed_unitary_channel(weights, unitaries)


def random_setup(
    dim_measured: int,
    dim_probe: int,
    rng: np.random.Generator,
    theta: float = 0.0,
    min_probability: float = 0.2,
    mixed_selection: bool = False,
):
    """
    Random weak-measurement setup with a well-conditioned post-selection.

    Args:
        dim_measured: Dimension of the measured system
        dim_probe: Dimension of the probe
        rng: Random generator
        theta: Coupling strength
        min_probability: Reject selections with P(f|i) below this value
        mixed_selection: Use full-rank pre- and post-selected states

    Returns:
        WeakSetup
    """
    from .engine import WeakSetup

    while True:
        if mixed_selection:
            pre = random_density(dim_measured, rng)
            post = random_density(dim_measured, rng)
            prob = float(np.trace(pre.matrix @ post.matrix).real)
        else:
            pre = random_pure_state(dim_measured, rng)
            post = random_pure_state(dim_measured, rng)
            prob = abs(post.overlap(pre)) ** 2
        if prob >= min_probability:
            break
    return WeakSetup(
        pre=pre,
        post=post,
        A=random_observable(dim_measured, rng),
        K=random_observable(dim_probe, rng),
        theta=theta,
        probe=random_density(dim_probe, rng),
    )
