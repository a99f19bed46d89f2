"""
Weak measurement engine.

Weak values, the exact joint evolution of measured system and probe, the
first-order (effective evolution) predictions for probe shifts and SNR, the
noisy pipeline of probe channels, shot-level Monte Carlo, and the Bloch-ball
flow of qubit probes.

Conventions:
- the interaction is U(theta) = exp(-i theta A (x) K) with the measured
  system on the left;
- a mixed post-selection rho_f acts as the effect operator rho_f itself, so
  the success probability at theta = 0 is tr(rho_i rho_f).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union
import logging
import math

import numpy as np
from scipy.linalg import expm

from .channels import QuantumChannel, apply
from .core import (
    ATOL,
    EIG_ATOL,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    ComplexMatrix,
    DensityOperator,
    Observable,
    PureState,
    StateLike,
    as_matrix,
    bloch_vector,
    dagger,
    density_of,
    expectation,
    operator_expectation,
    partial_trace_measured,
    variance,
)
from .errors import (
    DimensionMismatchError,
    InsufficientStatisticsError,
    InvalidStateError,
    OrthogonalSelectionError,
)

logger = logging.getLogger(__name__)

# Smallest accepted |<f|i>|^2 (pure) or tr(rho_i rho_f) (mixed)
OVERLAP_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class WeakSetup:
    """Pre/post-selection, observables, coupling strength and probe state."""

    pre: StateLike
    post: StateLike
    A: Observable
    K: Observable
    theta: float
    probe: DensityOperator

    def __post_init__(self):
        dims = {self.pre.dim, self.post.dim, self.A.dim}
        if len(dims) != 1:
            raise DimensionMismatchError(
                f"measured-system dimensions disagree: pre {self.pre.dim}, "
                f"post {self.post.dim}, A {self.A.dim}"
            )
        if self.K.dim != self.probe.dim:
            raise DimensionMismatchError(
                f"probe dimensions disagree: K {self.K.dim}, probe {self.probe.dim}"
            )
        if isinstance(self.post, DensityOperator):
            evals = np.linalg.eigvalsh(self.post.matrix)
            if evals[-1] > 1.0 + EIG_ATOL:
                raise InvalidStateError("post-selection effect has an eigenvalue above 1")
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def dim_measured(self) -> int:
        return self.A.dim

    @property
    def dim_probe(self) -> int:
        return self.K.dim

    @property
    def is_pure_selection(self) -> bool:
        return isinstance(self.pre, PureState) and isinstance(self.post, PureState)

    def with_theta(self, theta: float) -> "WeakSetup":
        return WeakSetup(self.pre, self.post, self.A, self.K, theta, self.probe)

    def with_probe(self, probe: DensityOperator) -> "WeakSetup":
        return WeakSetup(self.pre, self.post, self.A, self.K, self.theta, probe)


@dataclass
class ShiftReport:
    """Exact versus first-order probe shift for one observable."""

    exact_shift: float
    first_order_shift: float
    success_probability: float
    snr_predicted: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class MonteCarloResult:
    """Aggregated shot statistics."""

    mean_shift: float
    empirical_snr: float
    accepted: int
    shots: int
    seed: int
    stddev: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class FlowVector:
    """Bloch point with the real- and imaginary-part driven velocities."""

    point: Tuple[float, float, float]
    velocity_re: Tuple[float, float, float]
    velocity_im: Tuple[float, float, float]


# Weak values

def weak_value(pre: PureState, post: PureState, A: Observable) -> complex:
    """<f|A|i> / <f|i>."""
    if not (pre.dim == post.dim == A.dim):
        raise DimensionMismatchError("pre, post and A must share a dimension")
    amplitude = post.overlap(pre)
    prob = abs(amplitude) ** 2
    if prob <= OVERLAP_FLOOR:
        raise OrthogonalSelectionError(prob, OVERLAP_FLOOR)
    numerator = complex(np.vdot(post.amplitudes, A.matrix @ pre.amplitudes))
    return numerator / amplitude


def weak_value_mixed(rho_i: DensityOperator, rho_f: DensityOperator, A: Observable) -> complex:
    """tr(rho_f A rho_i) / tr(rho_i rho_f)."""
    if not (rho_i.dim == rho_f.dim == A.dim):
        raise DimensionMismatchError("rho_i, rho_f and A must share a dimension")
    denom = complex(np.trace(rho_i.matrix @ rho_f.matrix))
    if denom.real <= OVERLAP_FLOOR:
        raise OrthogonalSelectionError(float(denom.real), OVERLAP_FLOOR)
    return complex(np.trace(rho_f.matrix @ A.matrix @ rho_i.matrix)) / denom


def setup_weak_value(setup: WeakSetup) -> complex:
    """Weak value of A for the setup's selections (pure or mixed)."""
    if setup.is_pure_selection:
        return weak_value(setup.pre, setup.post, setup.A)
    return weak_value_mixed(density_of(setup.pre), density_of(setup.post), setup.A)


def success_probability(setup: WeakSetup) -> float:
    """Post-selection probability without interaction, tr(rho_i F)."""
    if setup.is_pure_selection:
        return abs(setup.post.overlap(setup.pre)) ** 2
    return float(np.trace(density_of(setup.pre).matrix @ density_of(setup.post).matrix).real)


# Evolution

def interaction_unitary(A: Observable, K: Observable, theta: float) -> ComplexMatrix:
    """exp(-i theta A (x) K), via the product eigenbasis of A and K."""
    vecs = np.kron(A.eigenvectors, K.eigenvectors)
    evals = np.kron(A.eigenvalues, K.eigenvalues)
    phases = np.exp(-1j * theta * evals)
    return as_matrix(vecs @ np.diag(phases) @ dagger(vecs))


def _effect_root(post: StateLike) -> np.ndarray:
    """Square root of the post-selection effect operator."""
    if isinstance(post, PureState):
        return post.projector()
    evals, evecs = np.linalg.eigh(post.matrix)
    evals = np.clip(evals, 0.0, 1.0)
    return evecs @ np.diag(np.sqrt(evals)) @ dagger(evecs)


def _post_select(setup: WeakSetup, probe: DensityOperator) -> DensityOperator:
    dim_a, dim_b = setup.dim_measured, setup.dim_probe
    joint = np.kron(density_of(setup.pre).matrix, probe.matrix)
    U = interaction_unitary(setup.A, setup.K, setup.theta)
    evolved = U @ joint @ dagger(U)
    root = np.kron(_effect_root(setup.post), np.eye(dim_b))
    projected = root @ evolved @ root
    projected = (projected + dagger(projected)) / 2.0
    return partial_trace_measured(DensityOperator(_clip_trace(projected)), dim_a, dim_b)


def _clip_trace(mat: np.ndarray) -> np.ndarray:
    # Rounding can push a trace-one result a few ulps above one
    tr = float(np.trace(mat).real)
    if 1.0 < tr <= 1.0 + ATOL:
        return mat / tr
    return mat


def evolve_exact(setup: WeakSetup) -> Tuple[DensityOperator, float]:
    """
    Exact final probe state after interaction and post-selection.

    Builds the joint state pre (x) probe, applies U(theta) without any
    expansion, applies the post-selection effect and traces out the measured
    system.

    Returns:
        (sub-normalized final probe state, its trace)
    """
    sigma_f = _post_select(setup, setup.probe)
    return sigma_f, sigma_f.trace


def final_probe_state(
    setup: WeakSetup,
    pre_noise: Optional[QuantumChannel] = None,
    post_noise: Optional[QuantumChannel] = None,
) -> DensityOperator:
    """Probe state after optional noise, exact evolution and optional noise."""
    probe = setup.probe
    if pre_noise is not None:
        probe = apply(pre_noise, probe)
    sigma_f = _post_select(setup, probe)
    if post_noise is not None:
        sigma_f = apply(post_noise, sigma_f)
    return sigma_f


def noisy_pipeline(setup: WeakSetup, E_i: QuantumChannel, E_f: QuantumChannel) -> np.ndarray:
    """
    Final sub-normalized distribution p'_f(k) over K's eigenvectors with probe
    noise E_i before and E_f after the interaction.
    """
    for chan in (E_i, E_f):
        if chan.dim != setup.dim_probe:
            raise DimensionMismatchError(
                f"channel dimension {chan.dim} does not match probe dimension {setup.dim_probe}"
            )
    sigma_f = final_probe_state(setup, E_i, E_f)
    return setup.K.populations(sigma_f)


def lift_probe_channel(chan: QuantumChannel, dim_measured: int) -> QuantumChannel:
    """I (x) E acting on the joint system."""
    eye = np.eye(dim_measured)
    return QuantumChannel(tuple(np.kron(eye, op) for op in chan.kraus_ops))


def transition_operator(pre: PureState, post: PureState, U: ComplexMatrix, dim_probe: int) -> np.ndarray:
    """Probe operator <f|U|i> obtained by contracting the measured factor."""
    dim_a = pre.dim
    blocks = np.asarray(U).reshape(dim_a, dim_probe, dim_a, dim_probe)
    return np.einsum("a,ajck,c->jk", np.conj(post.amplitudes), blocks, pre.amplitudes)


def effective_evolution(
    pre: PureState, post: PureState, A: Observable, K: Observable, theta: float
) -> ComplexMatrix:
    """exp(-i theta <A>_w K); not unitary when Im <A>_w != 0."""
    w = weak_value(pre, post, A)
    return np.asarray(expm(-1j * theta * w * np.asarray(K.matrix)))


def effective_evolution_residual(
    pre: PureState, post: PureState, A: Observable, K: Observable, theta: float
) -> float:
    """Spectral norm of <f|U|i> - e^{i arg<f|i>} sqrt(P) U_eff(theta)."""
    U = interaction_unitary(A, K, theta)
    exact = transition_operator(pre, post, U, K.dim)
    amplitude = post.overlap(pre)
    approx = amplitude * effective_evolution(pre, post, A, K, theta)
    return float(np.linalg.norm(exact - approx, 2))


# First-order predictions

def _initial_probe(setup: WeakSetup) -> DensityOperator:
    return setup.probe.normalized()


def predict_shift(setup: WeakSetup, M: Observable) -> float:
    """
    First-order shift of <M>:
    theta Re<A>_w <i[K, M]>_i + theta Im<A>_w <{d K, d M}>_i.
    """
    if M.dim != setup.dim_probe:
        raise DimensionMismatchError(f"M dimension {M.dim} does not match probe {setup.dim_probe}")
    w = setup_weak_value(setup)
    sigma = _initial_probe(setup)
    K, Mm = setup.K.matrix, M.matrix
    commutator = operator_expectation(sigma, 1j * (K @ Mm - Mm @ K)).real
    mean_k = expectation(sigma, setup.K)
    mean_m = expectation(sigma, M)
    anticommutator = operator_expectation(sigma, K @ Mm + Mm @ K).real - 2.0 * mean_k * mean_m
    return setup.theta * (w.real * commutator + w.imag * anticommutator)


def exact_shift(setup: WeakSetup, M: Observable) -> float:
    """<M>_f - <M>_i from the exact evolution."""
    sigma_f, _ = evolve_exact(setup)
    return expectation(sigma_f, M) - expectation(setup.probe, M)


def predicted_snr(setup: WeakSetup, N: int) -> float:
    """2 theta Im<A>_w sqrt(N P(f|i) <(d K)^2>_i)."""
    if N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    w = setup_weak_value(setup)
    var_k = max(variance(_initial_probe(setup), setup.K), 0.0)
    return 2.0 * setup.theta * w.imag * math.sqrt(N * success_probability(setup) * var_k)


def shift_report(setup: WeakSetup, M: Optional[Observable] = None, N: int = 1) -> ShiftReport:
    M = setup.K if M is None else M
    return ShiftReport(
        exact_shift=exact_shift(setup, M),
        first_order_shift=predict_shift(setup, M),
        success_probability=success_probability(setup),
        snr_predicted=predicted_snr(setup, N),
    )


# Monte Carlo

MC_CHUNK_SIZE = 1 << 16


def _chunk_statistics(seed: int, chunk: int, n: int, cumulative: np.ndarray, shifts: np.ndarray):
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(chunk)]))
    u = rng.random(n)
    outcome = np.searchsorted(cumulative, u, side="right")
    accepted = outcome < len(shifts)
    values = shifts[outcome[accepted]]
    return int(accepted.sum()), float(values.sum()), float((values * values).sum())


def monte_carlo(
    setup: WeakSetup,
    M: Observable,
    N: int,
    seed: int,
    workers: int = 1,
    chunk_size: int = MC_CHUNK_SIZE,
    pre_noise: Optional[QuantumChannel] = None,
    post_noise: Optional[QuantumChannel] = None,
) -> MonteCarloResult:
    """
    Simulate N shots of the weak measurement.

    Each shot survives post-selection with probability tr sigma_f and, if it
    does, yields an eigenvalue of M drawn from the normalized final probe
    state. Shots are grouped in fixed-size chunks whose random streams are
    keyed by (seed, chunk index), so the result does not depend on
    ``workers``.

    Args:
        setup: Weak measurement setup
        M: Probe observable that is read out
        N: Number of shots
        seed: Integer seed
        workers: Thread count for chunk evaluation
        chunk_size: Shots per random stream
        pre_noise: Optional probe channel before the interaction
        post_noise: Optional probe channel after the interaction

    Returns:
        MonteCarloResult with mean shift, empirical SNR and accepted count
    """
    if N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    if M.dim != setup.dim_probe:
        raise DimensionMismatchError(f"M dimension {M.dim} does not match probe {setup.dim_probe}")
    sigma_f = final_probe_state(setup, pre_noise, post_noise)
    probs = np.clip(M.populations(sigma_f), 0.0, None)
    cumulative = np.cumsum(probs)
    shifts = M.eigenvalues - expectation(setup.probe, M)

    bounds = [(c, min(chunk_size, N - start)) for c, start in enumerate(range(0, N, chunk_size))]
    logger.debug("monte carlo: %d shots in %d chunks, %d workers", N, len(bounds), workers)
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            parts = list(executor.map(
                lambda b: _chunk_statistics(seed, b[0], b[1], cumulative, shifts), bounds
            ))
    else:
        parts = [_chunk_statistics(seed, c, n, cumulative, shifts) for c, n in bounds]

    accepted = sum(p[0] for p in parts)
    total = math.fsum(p[1] for p in parts)
    total_sq = math.fsum(p[2] for p in parts)
    if accepted == 0:
        raise InsufficientStatisticsError(
            f"no shot out of {N} survived post-selection (tr sigma_f = {sigma_f.trace:.3e})"
        )
    if accepted < 2:
        raise InsufficientStatisticsError(
            f"only {accepted} accepted shot; at least 2 are needed to estimate the spread",
            accepted=accepted,
        )
    mean = total / accepted
    var = max((total_sq - accepted * mean * mean) / (accepted - 1), 0.0)
    std = math.sqrt(var)
    if std > 0.0:
        snr = mean * math.sqrt(accepted) / std
    else:
        snr = 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
    return MonteCarloResult(
        mean_shift=mean, empirical_snr=snr, accepted=accepted, shots=N, seed=int(seed), stddev=std
    )


# Bloch flow

_PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


def bloch_flow_field(
    A: Observable,
    K: Observable,
    pre: PureState,
    post: PureState,
    grid: Sequence[DensityOperator],
    theta: float = 1.0,
) -> List[FlowVector]:
    """
    First-order flow of qubit probe states in the Bloch ball.

    For each grid state the velocity theta * d/dtheta of the normalized Bloch
    vector is split into the part proportional to Re<A>_w (unitary rotation
    generated by K) and the part proportional to Im<A>_w (non-unitary
    drift).
    """
    if K.dim != 2:
        raise DimensionMismatchError(f"flow field needs a qubit probe, got dimension {K.dim}")
    w = weak_value(pre, post, A)
    Km = K.matrix
    flow = []
    for sigma in grid:
        if sigma.dim != 2:
            raise DimensionMismatchError("flow-field grid states must be qubits")
        rho = sigma.normalized()
        mean_k = expectation(rho, K)
        point = bloch_vector(rho)
        v_re, v_im = [], []
        for P, coord in zip(_PAULIS, point):
            commutator = operator_expectation(rho, 1j * (Km @ P - P @ Km)).real
            anticommutator = operator_expectation(rho, Km @ P + P @ Km).real - 2.0 * mean_k * coord
            v_re.append(theta * w.real * commutator)
            v_im.append(theta * w.imag * anticommutator)
        flow.append(FlowVector(point, tuple(v_re), tuple(v_im)))
    return flow


def equatorial_grid(radii: Sequence[float], n_angles: int) -> List[DensityOperator]:
    """Qubit states in the z = 0 plane, plus the centre."""
    grid = [DensityOperator.maximally_mixed(2)]
    for r in radii:
        for phi in np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False):
            grid.append(DensityOperator.from_bloch(r * np.cos(phi), r * np.sin(phi), 0.0))
    return grid


def ball_grid(step: float) -> List[DensityOperator]:
    """Cubic lattice of Bloch vectors inside the unit ball."""
    ticks = np.arange(-1.0, 1.0 + 1e-12, step)
    grid = []
    for x in ticks:
        for y in ticks:
            for z in ticks:
                if x * x + y * y + z * z <= 1.0 + 1e-12:
                    grid.append(DensityOperator.from_bloch(x, y, z))
    return grid
