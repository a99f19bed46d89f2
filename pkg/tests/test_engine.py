import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pytest import raises
from scipy.linalg import expm

from weakprobe.channels import bit_flip, identity_channel
from weakprobe.core import (
    DensityOperator,
    PureState,
    bloch_vector,
    dagger,
    dephase,
    expectation,
    pauli_z,
    projector_observable,
    variance,
)
from weakprobe.engine import (
    WeakSetup,
    ball_grid,
    bloch_flow_field,
    effective_evolution,
    effective_evolution_residual,
    equatorial_grid,
    evolve_exact,
    exact_shift,
    interaction_unitary,
    monte_carlo,
    noisy_pipeline,
    predict_shift,
    predicted_snr,
    setup_weak_value,
    shift_report,
    success_probability,
    transition_operator,
    weak_value,
    weak_value_mixed,
)
from weakprobe.errors import (
    DimensionMismatchError,
    InsufficientStatisticsError,
    OrthogonalSelectionError,
)
from weakprobe.experiment import MzConfig, mz_setup
from weakprobe.randomness import (
    random_density,
    random_observable,
    random_phase_noise,
    random_pure_state,
    random_setup,
)
from weakprobe.utils import loglog_slope


class TestWeakValue:
    def test_interferometer_quarter_phase(self, mz_quarter):
        w = weak_value(mz_quarter.pre, mz_quarter.post, mz_quarter.A)
        assert_allclose(w, 0.5 + 0.5j, atol=1e-12)
        assert_allclose(success_probability(mz_quarter), 0.5, atol=1e-12)

    def test_eigenstate_preselection_gives_eigenvalue(self, rng):
        A = random_observable(3, rng)
        eig = PureState(A.eigenvector(1))
        post = random_pure_state(3, rng)
        assert_allclose(weak_value(eig, post, A), A.eigenvalues[1], atol=1e-10)
        assert_allclose(weak_value(eig, eig, A).imag, 0.0, atol=1e-12)

    def test_orthogonal_selection(self):
        with raises(OrthogonalSelectionError) as err:
            weak_value(PureState.basis(0, 2), PureState.basis(1, 2), pauli_z())
        assert err.value.overlap == 0.0
        assert err.value.exit_code == 2

    def test_dark_port(self):
        setup = mz_setup(MzConfig(delta=math.pi))
        with raises(OrthogonalSelectionError):
            setup_weak_value(setup)

    def test_mixed_form_reduces_to_pure(self, rng):
        pre, post = random_pure_state(3, rng), random_pure_state(3, rng)
        A = random_observable(3, rng)
        assert_allclose(
            weak_value_mixed(pre.to_density(), post.to_density(), A), weak_value(pre, post, A), atol=1e-10
        )

    def test_dimension_mismatch(self, rng):
        with raises(DimensionMismatchError):
            weak_value(random_pure_state(2, rng), random_pure_state(3, rng), pauli_z())


class TestWeakSetup:
    def test_dimensions_checked(self, rng):
        with raises(DimensionMismatchError):
            WeakSetup(
                pre=random_pure_state(2, rng),
                post=random_pure_state(2, rng),
                A=pauli_z(),
                K=pauli_z(),
                theta=0.1,
                probe=random_density(3, rng),
            )

    def test_with_theta_keeps_everything_else(self, mz_quarter):
        other = mz_quarter.with_theta(0.3)
        assert other.theta == 0.3
        assert other.pre is mz_quarter.pre and other.probe is mz_quarter.probe


class TestEvolution:
    @pytest.mark.parametrize("dims", [(2, 2), (2, 3), (3, 2)])
    def test_interaction_is_unitary(self, rng, dims):
        A = random_observable(dims[0], rng)
        K = random_observable(dims[1], rng)
        U = interaction_unitary(A, K, 0.7)
        assert_allclose(U @ dagger(U), np.eye(dims[0] * dims[1]), atol=1e-12)

    def test_interaction_matches_matrix_exponential(self, rng):
        A = random_observable(2, rng, degenerate=False)
        K = random_observable(3, rng, degenerate=True)
        theta = 0.9
        direct = expm(-1j * theta * np.kron(A.matrix, K.matrix))
        assert_allclose(interaction_unitary(A, K, theta), direct, atol=1e-12)

    def test_zero_coupling_scales_probe(self, rng):
        setup = random_setup(2, 3, rng)
        sigma_f, tr = evolve_exact(setup)
        assert_allclose(tr, success_probability(setup), atol=1e-12)
        assert_allclose(sigma_f.matrix, tr * setup.probe.matrix, atol=1e-12)

    def test_final_trace_is_a_probability(self, rng):
        for _ in range(10):
            setup = random_setup(3, 2, rng, theta=float(rng.uniform(0, 3)))
            _, tr = evolve_exact(setup)
            assert -1e-12 <= tr <= 1.0 + 1e-12

    def test_first_order_residual_is_quadratic(self, rng):
        cases = [(random_setup(2, 2, rng), random_observable(2, rng)) for _ in range(10)]
        thetas = [1e-1, 1e-2, 1e-3]
        residuals = [
            np.mean([abs(exact_shift(s.with_theta(t), M) - predict_shift(s.with_theta(t), M)) for s, M in cases])
            for t in thetas
        ]
        assert abs(loglog_slope(thetas, residuals) - 2.0) <= 0.15

    def test_effective_evolution(self, rng):
        setup = random_setup(2, 2, rng)
        U_eff = effective_evolution(setup.pre, setup.post, setup.A, setup.K, 0.0)
        assert_allclose(U_eff, np.eye(2), atol=1e-14)
        small = effective_evolution_residual(setup.pre, setup.post, setup.A, setup.K, 1e-3)
        large = effective_evolution_residual(setup.pre, setup.post, setup.A, setup.K, 1e-2)
        assert small < 1e-5
        assert 50.0 < large / small < 200.0

    def test_transition_operator_at_zero_coupling(self, rng):
        setup = random_setup(2, 2, rng)
        U = interaction_unitary(setup.A, setup.K, 0.0)
        T = transition_operator(setup.pre, setup.post, U, 2)
        assert_allclose(T, setup.post.overlap(setup.pre) * np.eye(2), atol=1e-12)

    def test_post_selection_trace_is_first_order(self, rng):
        setups = [random_setup(2, 3, rng) for _ in range(10)]

        def trace_gap(setup, theta):
            _, tr = evolve_exact(setup.with_theta(theta))
            return tr - success_probability(setup)

        for setup in setups:
            theta = 1e-3
            w = setup_weak_value(setup)
            first_order = 2.0 * theta * success_probability(setup) * w.imag * expectation(setup.probe, setup.K)
            assert_allclose(trace_gap(setup, theta), first_order, atol=1e-4)

        gaps = [np.mean([abs(trace_gap(s, t)) for s in setups]) for t in (1e-3, 1e-4)]
        assert 5.0 < gaps[0] / gaps[1] < 20.0

    def test_variance_change_is_first_order(self, rng):
        setups = [random_setup(2, 3, rng) for _ in range(10)]

        def variance_gap(setup, theta):
            sigma_f, _ = evolve_exact(setup.with_theta(theta))
            return variance(sigma_f, setup.K) - variance(setup.probe, setup.K)

        def third_cumulant(setup):
            p = setup.K.populations(setup.probe)
            centred = setup.K.eigenvalues - p @ setup.K.eigenvalues
            return float(p @ centred ** 3)

        gaps = [np.mean([abs(variance_gap(s, t)) for s in setups]) for t in (1e-3, 1e-4)]
        assert 5.0 < gaps[0] / gaps[1] < 20.0

        thetas = [1e-1, 1e-2, 1e-3]
        residuals = [
            np.mean([
                abs(variance_gap(s, t) - 2.0 * t * setup_weak_value(s).imag * third_cumulant(s))
                for s in setups
            ])
            for t in thetas
        ]
        assert abs(loglog_slope(thetas, residuals) - 2.0) <= 0.15


class TestNoise:
    def test_phase_noise_leaves_distribution_unchanged(self, rng):
        for _ in range(20):
            setup = random_setup(2, 2, rng, theta=float(rng.uniform(0, 1)))
            E_i = random_phase_noise(setup.K, rng)
            E_f = random_phase_noise(setup.K, rng)
            sigma_f, _ = evolve_exact(setup)
            assert_allclose(noisy_pipeline(setup, E_i, E_f), setup.K.populations(sigma_f), atol=1e-12)

    def test_bit_flip_changes_distribution(self, mz_quarter):
        setup = mz_quarter.with_theta(0.2).with_probe(DensityOperator.from_bloch(0, 0, 0.6))
        clean = noisy_pipeline(setup, identity_channel(2), identity_channel(2))
        noisy = noisy_pipeline(setup, bit_flip(0.3), identity_channel(2))
        assert np.max(np.abs(clean - noisy)) > 1e-3

    def test_channel_dimension_checked(self, mz_quarter):
        with raises(DimensionMismatchError):
            noisy_pipeline(mz_quarter, identity_channel(3), identity_channel(2))

    def test_coherences_between_k_eigenspaces_do_not_matter(self, rng):
        for _ in range(10):
            setup = random_setup(2, 3, rng, theta=float(rng.uniform(0, 1)))
            dephased = setup.with_probe(dephase(setup.probe, setup.K))
            assert_allclose(exact_shift(dephased, setup.K), exact_shift(setup, setup.K), atol=1e-12)
            assert_allclose(predict_shift(dephased, setup.K), predict_shift(setup, setup.K), atol=1e-12)
            assert_allclose(predicted_snr(dephased, 100), predicted_snr(setup, 100), atol=1e-12)


class TestSnr:
    def test_predicted_snr_oracle(self, mz_quarter):
        setup = mz_quarter.with_theta(0.01)
        assert_allclose(predicted_snr(setup, 10 ** 6), 5.0 * math.sqrt(2.0), rtol=1e-9)

    def test_invalid_shot_count(self, mz_quarter):
        with raises(ValueError):
            predicted_snr(mz_quarter, 0)

    def test_mixed_probe_is_optimal(self, mz_quarter, rng):
        setup = mz_quarter.with_theta(0.01)
        best = abs(predicted_snr(setup, 1))
        for _ in range(200):
            probe = random_density(2, rng, rank=int(rng.integers(1, 3)))
            assert abs(predicted_snr(setup.with_probe(probe), 1)) <= best + 1e-12

    def test_shift_report(self, mz_quarter):
        report = shift_report(mz_quarter.with_theta(1e-3))
        assert_allclose(report.first_order_shift, 2e-3 * 0.5, rtol=1e-9)
        assert_allclose(report.exact_shift, report.first_order_shift, atol=1e-6)
        assert set(report.to_dict()) == {"exact_shift", "first_order_shift", "success_probability", "snr_predicted"}


class TestMonteCarlo:
    def test_same_seed_same_result(self, mz_quarter):
        setup = mz_quarter.with_theta(0.05)
        a = monte_carlo(setup, setup.K, 100_000, seed=7, chunk_size=30_000)
        b = monte_carlo(setup, setup.K, 100_000, seed=7, chunk_size=30_000, workers=4)
        assert a.to_dict() == b.to_dict()

    def test_different_seeds_differ(self, mz_quarter):
        setup = mz_quarter.with_theta(0.05)
        a = monte_carlo(setup, setup.K, 10_000, seed=1)
        b = monte_carlo(setup, setup.K, 10_000, seed=2)
        assert a.accepted != b.accepted or a.mean_shift != b.mean_shift

    def test_snr_matches_prediction(self, mz_quarter):
        setup = mz_quarter.with_theta(0.01)
        result = monte_carlo(setup, setup.K, 10 ** 6, seed=0)
        assert abs(result.empirical_snr - predicted_snr(setup, 10 ** 6)) <= 3.0
        assert abs(result.accepted / 10 ** 6 - 0.5) < 5e-3

    def test_dark_port_rejects_everything(self):
        setup = mz_setup(MzConfig(delta=math.pi)).with_theta(0.0)
        with raises(InsufficientStatisticsError) as err:
            monte_carlo(setup, setup.K, 1, seed=0)
        assert err.value.accepted == 0
        assert err.value.exit_code == 3

    def test_single_accepted_shot_is_rejected(self, mz_quarter):
        setup = mz_quarter.with_theta(0.0)
        singles = 0
        for seed in range(40):
            with raises(InsufficientStatisticsError) as err:
                monte_carlo(setup, setup.K, 1, seed=seed)
            if err.value.accepted == 1:
                singles += 1
                assert "at least 2" in str(err.value)
        assert singles > 0

    def test_invalid_shot_count(self, mz_quarter):
        with raises(ValueError):
            monte_carlo(mz_quarter, mz_quarter.K, 0, seed=0)


class TestFlowField:
    def test_origin_and_equatorial_uniformity(self, mz_quarter):
        s = mz_quarter
        flow = bloch_flow_field(s.A, s.K, s.pre, s.post, equatorial_grid([0.4, 0.8], 6))
        assert_allclose(flow[0].point, (0.0, 0.0, 0.0), atol=1e-15)
        assert_allclose(flow[0].velocity_re, (0.0, 0.0, 0.0), atol=1e-15)
        assert_allclose([f.velocity_im[2] for f in flow], 1.0, atol=1e-12)

    def test_real_weak_value_has_no_drift(self, mz_quarter):
        s = mz_quarter
        flow = bloch_flow_field(s.A, s.K, s.pre, s.pre, equatorial_grid([0.5], 4))
        assert_allclose([v for f in flow for v in f.velocity_im], 0.0, atol=1e-15)

    def test_ball_grid_inside_unit_ball(self):
        grid = ball_grid(0.5)
        assert all(np.linalg.eigvalsh(g.matrix)[0] >= -1e-12 for g in grid)
        assert len(grid) == 33

    def test_needs_qubit_probe(self, mz_quarter, rng):
        with raises(DimensionMismatchError):
            bloch_flow_field(
                mz_quarter.A, random_observable(3, rng), mz_quarter.pre, mz_quarter.post,
                [DensityOperator.maximally_mixed(2)],
            )

    def test_matches_finite_difference(self, rng):
        setup = random_setup(2, 2, rng)
        grid = [DensityOperator.from_bloch(0.0, 0.0, 0.0)] + equatorial_grid([0.7], 3) + [
            DensityOperator.from_bloch(0.2, -0.3, 0.6),
            DensityOperator.from_bloch(0.0, 0.0, -0.9),
        ]
        flow = bloch_flow_field(setup.A, setup.K, setup.pre, setup.post, grid)
        h = 1e-5
        for sigma, f in zip(grid, flow):
            ahead, _ = evolve_exact(setup.with_probe(sigma).with_theta(h))
            behind, _ = evolve_exact(setup.with_probe(sigma).with_theta(-h))
            derivative = (np.array(bloch_vector(ahead)) - np.array(bloch_vector(behind))) / (2 * h)
            assert_allclose(np.add(f.velocity_re, f.velocity_im), derivative, atol=1e-8)

    def test_rotation_of_plus_x(self):
        zero = PureState.basis(0, 2)
        (f,) = bloch_flow_field(
            projector_observable(0), pauli_z(), zero, zero, [DensityOperator.from_bloch(1.0, 0.0, 0.0)]
        )
        assert_allclose(f.point, (1.0, 0.0, 0.0), atol=1e-12)
        assert_allclose(f.velocity_re, (0.0, 2.0, 0.0), atol=1e-12)
        assert_allclose(f.velocity_im, (0.0, 0.0, 0.0), atol=1e-12)


class TestDegenerateBasisChoice:
    def test_results_ignore_basis_choice(self, rng, remixed_qutrit):
        first, second = remixed_qutrit
        base = random_setup(2, 3, rng, theta=0.05)
        a = WeakSetup(base.pre, base.post, base.A, first, base.theta, base.probe)
        b = WeakSetup(base.pre, base.post, base.A, second, base.theta, base.probe)
        assert_allclose(
            interaction_unitary(a.A, first, 0.4), interaction_unitary(b.A, second, 0.4), atol=1e-10
        )
        assert_allclose(exact_shift(a, first), exact_shift(b, second), atol=1e-10)
        assert_allclose(predict_shift(a, first), predict_shift(b, second), atol=1e-10)
        assert_allclose(predicted_snr(a, 1000), predicted_snr(b, 1000), atol=1e-9)
