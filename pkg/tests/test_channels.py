import numpy as np
import pytest
from numpy.testing import assert_allclose
from pytest import raises

from weakprobe.channels import (
    QuantumChannel,
    amplitude_damping,
    apply,
    bit_flip,
    channels_equal,
    compose,
    depolarizing,
    hermitian_basis,
    identity_channel,
    is_phase_noise,
    is_unital,
    make_phase_noise,
    make_preset,
    phase_flip,
    z_rotation,
)
from weakprobe.core import DensityOperator, Observable, PureState, pauli_x, pauli_z
from weakprobe.errors import DimensionMismatchError, InvalidChannelError
from weakprobe.randomness import (
    random_density,
    random_observable,
    random_phase_noise,
    random_unital_channel,
)


class TestQuantumChannel:
    def test_completeness_enforced(self):
        with raises(InvalidChannelError):
            QuantumChannel((np.eye(2), np.eye(2)))

    def test_empty_kraus_list(self):
        with raises(InvalidChannelError):
            QuantumChannel(())

    def test_mixed_dimensions(self):
        with raises(InvalidChannelError):
            QuantumChannel((np.eye(2), np.eye(3)))

    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_apply_preserves_trace_and_positivity(self, rng, dim):
        chan = random_unital_channel(dim, rng)
        rho = random_density(dim, rng)
        out = apply(chan, rho)
        assert_allclose(out.trace, rho.trace, atol=1e-12)
        assert np.linalg.eigvalsh(out.matrix)[0] > -1e-12

    def test_apply_dimension_mismatch(self, rng):
        with raises(DimensionMismatchError):
            apply(identity_channel(2), random_density(3, rng))

    def test_compose_acts_right_to_left(self, rng):
        a = amplitude_damping(0.4)
        b = bit_flip(0.2)
        rho = random_density(2, rng)
        assert_allclose(apply(compose(a, b), rho).matrix, apply(a, apply(b, rho)).matrix, atol=1e-12)
        assert not channels_equal(compose(a, b), compose(b, a))

    def test_channels_equal_ignores_kraus_representation(self):
        # the same phase flip written with {I, Z} and with its unitary-mixed form
        p = 0.25
        alt = QuantumChannel((
            (np.sqrt(1 - p) * np.eye(2) + np.sqrt(p) * np.diag([1, -1])) / np.sqrt(2),
            (np.sqrt(1 - p) * np.eye(2) - np.sqrt(p) * np.diag([1, -1])) / np.sqrt(2),
        ))
        assert channels_equal(phase_flip(p), alt)

    def test_hermitian_basis_spans(self):
        basis = hermitian_basis(3)
        assert len(basis) == 9
        stacked = np.array([m.reshape(-1) for m in basis])
        assert np.linalg.matrix_rank(stacked) == 9


class TestPresets:
    def test_depolarizing_full_strength(self):
        out = apply(depolarizing(1.0), PureState.basis(0, 2).to_density())
        assert_allclose(out.matrix, np.eye(2) / 2, atol=1e-12)

    def test_depolarizing_contracts_bloch_vector(self):
        rho = DensityOperator.from_bloch(0.0, 0.0, 1.0)
        assert_allclose(apply(depolarizing(0.3), rho).matrix[0, 0].real, 0.5 + 0.5 * 0.7)

    def test_unitality(self):
        assert is_unital(depolarizing(0.4))
        assert is_unital(phase_flip(0.1))
        assert not is_unital(amplitude_damping(0.3))

    def test_z_rotation_matrix(self):
        (op,) = z_rotation(np.pi / 2).kraus_ops
        assert_allclose(op, np.diag([np.exp(-0.25j * np.pi), np.exp(0.25j * np.pi)]))

    def test_probability_range(self):
        with raises(InvalidChannelError):
            bit_flip(1.5)

    def test_make_preset(self):
        assert channels_equal(make_preset("phase-flip", 0.3), phase_flip(0.3))
        assert channels_equal(make_preset("identity"), identity_channel(2))
        with raises(InvalidChannelError):
            make_preset("teleport", 0.1)
        with raises(InvalidChannelError):
            make_preset("bit-flip")

    @pytest.mark.parametrize("p, q", [(0.2, 0.3), (0.05, 0.9), (0.5, 0.5)])
    def test_phase_flips_compose(self, p, q):
        assert channels_equal(compose(phase_flip(p), phase_flip(q)), phase_flip(p + q - 2 * p * q))

    @pytest.mark.parametrize("gamma", [0.0, 0.5, 1.0])
    def test_amplitude_damping_kraus_sum(self, gamma):
        chan = amplitude_damping(gamma)
        total = sum(E @ E.conj().T for E in chan.kraus_ops)
        assert_allclose(total, np.diag([1 + gamma, 1 - gamma]), atol=1e-12)
        completeness = sum(E.conj().T @ E for E in chan.kraus_ops)
        assert_allclose(completeness, np.eye(2), atol=1e-12)


class TestPhaseNoise:
    def test_presets_against_z(self):
        assert is_phase_noise(phase_flip(0.4), pauli_z())
        assert is_phase_noise(z_rotation(0.7), pauli_z())
        assert not is_phase_noise(bit_flip(0.4), pauli_z())
        assert not is_phase_noise(phase_flip(0.4), pauli_x())

    @pytest.mark.parametrize("dim", [2, 3])
    def test_random_phase_noise(self, rng, dim):
        K = random_observable(dim, rng)
        assert is_phase_noise(random_phase_noise(K, rng), K)

    def test_degenerate_subspace_coherences(self, rng):
        K = Observable(np.diag([1.0, 1.0, -1.0]))
        assert is_phase_noise(random_phase_noise(K, rng), K)
        # diagonal Kraus pair that dephases inside the eigenvalue-1 block
        s = 1 / np.sqrt(2)
        split = QuantumChannel((np.diag([s, s, 1.0]), np.diag([s, -s, 0.0])))
        assert not is_phase_noise(split, K)

    @pytest.mark.parametrize("coeffs", [
        [[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]],
        [[1.0, 1 / np.sqrt(2), 1 / np.sqrt(2)], [0.0, 1 / np.sqrt(2), -1 / np.sqrt(2)]],
    ])
    def test_degenerate_columns_must_agree(self, coeffs):
        K = Observable(np.diag([1.0, 1.0, -1.0]))
        with raises(InvalidChannelError, match="degenerate"):
            make_phase_noise(K, coeffs)

    def test_shared_degenerate_column_is_phase_noise(self):
        K = Observable(np.diag([1.0, 1.0, -1.0]))
        s = 1 / np.sqrt(2)
        # eigenvalue order is (-1, 1, 1)
        chan = make_phase_noise(K, [[1.0, s, s], [0.0, s, s]])
        assert is_phase_noise(chan, K)
        rho = DensityOperator(np.full((3, 3), 1.0 / 3.0))
        out = apply(chan, rho).matrix
        assert_allclose(out[0, 1], 1.0 / 3.0, atol=1e-12)
        assert_allclose(out[0, 2], s / 3.0, atol=1e-12)

    def test_fixes_populations(self, rng):
        K = random_observable(3, rng)
        rho = random_density(3, rng)
        out = apply(random_phase_noise(K, rng, n_kraus=4), rho)
        assert_allclose(K.populations(out), K.populations(rho), atol=1e-12)

    def test_coefficients_must_be_normalized(self):
        with raises(InvalidChannelError):
            make_phase_noise(pauli_z(), [[1.0, 0.5]])

    def test_coefficient_shape(self):
        with raises(DimensionMismatchError):
            make_phase_noise(pauli_z(), [[1.0, 1.0, 1.0]])

    def test_dimension_check(self):
        with raises(DimensionMismatchError):
            is_phase_noise(identity_channel(3), pauli_z())

    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_composition_stays_phase_noise(self, rng, dim):
        K = random_observable(dim, rng)
        chan = compose(random_phase_noise(K, rng), random_phase_noise(K, rng, n_kraus=2))
        assert is_phase_noise(chan, K)

    def test_remixed_degenerate_basis(self, rng, remixed_qutrit):
        first, second = remixed_qutrit
        chan = random_phase_noise(first, rng)
        assert is_phase_noise(chan, first)
        assert is_phase_noise(chan, second)
        assert not is_phase_noise(random_unital_channel(3, rng), second)
