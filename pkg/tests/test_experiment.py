import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pytest import raises

from weakprobe.channels import phase_flip
from weakprobe.config import load_run_config
from weakprobe.core import DensityOperator, expectation, pauli_z
from weakprobe.errors import DegenerateSelectionError, InvalidStateError
from weakprobe.experiment import (
    MEASURED_VISIBILITY,
    MzConfig,
    _output_state,
    analytic_outputs,
    coupling_from_angle,
    extract_weak_value,
    im_weak_value_visibility,
    max_im_weak_value,
    mz_setup,
    optimal_delta,
    sweep,
)
from weakprobe.engine import setup_weak_value
from weakprobe.randomness import random_unital_channel

EXAMPLE = Path(__file__).resolve().parent.parent / "config" / "weakprobe.example.yml"


class TestClosedForms:
    def test_quarter_phase(self):
        assert_allclose(im_weak_value_visibility(math.pi / 2), 0.5)

    @pytest.mark.parametrize("delta", [0.1, 1.0, 2.0, 2.9])
    def test_full_visibility_is_half_tangent(self, delta):
        assert_allclose(im_weak_value_visibility(delta, 1.0), math.tan(delta / 2) / 2)

    @pytest.mark.parametrize("delta", [0.3, 1.2, 2.5])
    @pytest.mark.parametrize("visibility", [1.0, 0.9])
    def test_engine_weak_value_agrees(self, delta, visibility):
        setup = mz_setup(MzConfig(delta=delta, visibility=visibility))
        assert_allclose(setup_weak_value(setup).imag, im_weak_value_visibility(delta, visibility), atol=1e-12)

    def test_peak_for_measured_visibility(self):
        peak = max_im_weak_value(MEASURED_VISIBILITY)
        assert_allclose(peak, 2.2909, atol=1e-3)
        assert abs(peak - 2.26) / 2.26 <= 0.03

    def test_optimal_delta_matches_closed_form(self):
        d = optimal_delta(MEASURED_VISIBILITY)
        assert_allclose(d, math.acos(-MEASURED_VISIBILITY), atol=1e-6)
        assert_allclose(im_weak_value_visibility(d, MEASURED_VISIBILITY), max_im_weak_value(MEASURED_VISIBILITY), rtol=1e-9)

    def test_optimal_delta_needs_imperfect_visibility(self):
        with raises(DegenerateSelectionError):
            optimal_delta(1.0)

    def test_plate_angle_convention(self):
        assert coupling_from_angle(0.1) == -0.2


class TestMzConfig:
    def test_defaults(self):
        cfg = MzConfig()
        assert len(cfg.theta_grid) == 9
        assert_allclose(max(cfg.theta_grid), math.radians(2.0))

    def test_visibility_range(self):
        with raises(InvalidStateError):
            MzConfig(visibility=1.2)

    def test_grid_must_be_symmetric(self):
        with raises(InvalidStateError):
            MzConfig(theta_grid=(0.0, 0.01, 0.02))

    def test_fit_order(self):
        with raises(InvalidStateError):
            MzConfig(fit_order=2)

    def test_probe_is_a_qubit(self):
        with raises(InvalidStateError):
            MzConfig(probe=DensityOperator.maximally_mixed(3))


class TestOutputs:
    @pytest.mark.parametrize("visibility", [1.0, 0.9])
    @pytest.mark.parametrize("probe", [DensityOperator.maximally_mixed(2), DensityOperator.from_bloch(0.3, 0.1, 0.4)])
    def test_simulation_matches_closed_form(self, visibility, probe):
        cfg = MzConfig(delta=1.1, visibility=visibility, probe=probe)
        for theta in cfg.theta_grid + (0.3,):
            sigma_f = _output_state(cfg, theta)
            power, z = analytic_outputs(cfg, theta)
            assert_allclose(sigma_f.trace, power, atol=1e-12)
            assert_allclose(expectation(sigma_f, pauli_z()) * sigma_f.trace, z, atol=1e-12)

    def test_unpolarized_closed_form(self):
        cfg = MzConfig(delta=0.8)
        t = 0.2
        power, z = analytic_outputs(cfg, t)
        assert_allclose(power, (1 + math.cos(0.8) * math.cos(2 * t)) / 2)
        assert_allclose(z, -math.sin(0.8) * math.sin(2 * t) / 2)


class TestExtraction:
    def test_quarter_phase_point(self):
        value, stderr = extract_weak_value(MzConfig())
        assert abs(value - 0.5) <= 1e-3
        assert stderr >= 0.0

    def test_zero_phase_gives_zero(self):
        value, _ = extract_weak_value(MzConfig(delta=0.0))
        assert abs(value) <= 1e-12

    def test_dark_port(self):
        with raises(DegenerateSelectionError):
            extract_weak_value(MzConfig(delta=math.pi))

    def test_cubic_fit_tracks_visibility_curve(self):
        template = MzConfig(visibility=MEASURED_VISIBILITY, fit_order=3)
        for r in sweep(list(np.linspace(0.0, 2.8, 15)), template):
            assert abs(r.extracted_im_weak_value - r.analytic_im_weak_value) <= 1e-2

    def test_cubic_fit_near_the_peak(self):
        template = MzConfig(visibility=MEASURED_VISIBILITY, fit_order=3)
        d = optimal_delta(MEASURED_VISIBILITY)
        value, _ = extract_weak_value(replace(template, delta=d))
        assert abs(value - max_im_weak_value(MEASURED_VISIBILITY)) <= 1e-2

    def test_linear_fit_bias_grows_towards_dark_port(self):
        template = MzConfig(visibility=MEASURED_VISIBILITY)
        near, far = sweep([1.0, 2.8], template)
        assert abs(near.extracted_im_weak_value - near.analytic_im_weak_value) < abs(
            far.extracted_im_weak_value - far.analytic_im_weak_value
        )

    def test_template_range_needs_cubic_fit(self):
        deltas = list(load_run_config(EXAMPLE).sweep.delta_values())
        assert len(deltas) == 57
        cubic = sweep(deltas, MzConfig(visibility=MEASURED_VISIBILITY, fit_order=3))
        linear = sweep(deltas, MzConfig(visibility=MEASURED_VISIBILITY))
        cubic_bias = max(abs(r.extracted_im_weak_value - r.analytic_im_weak_value) for r in cubic)
        linear_bias = max(abs(r.extracted_im_weak_value - r.analytic_im_weak_value) for r in linear)
        assert cubic_bias <= 1e-2
        assert linear_bias > 1e-2


class TestSweep:
    def test_order_and_columns(self):
        deltas = [2.0, 0.5, 1.0]
        records = sweep(deltas, MzConfig())
        assert [r.delta for r in records] == deltas
        assert list(records[0].to_row()) == ["delta_rad", "im_wv_extracted", "im_wv_analytic", "fit_stderr"]
        assert len(records[0].power_curve) == 9

    def test_workers_do_not_change_output(self):
        deltas = list(np.linspace(0.1, 2.5, 8))
        serial = [r.to_row() for r in sweep(deltas, MzConfig())]
        threaded = [r.to_row() for r in sweep(deltas, MzConfig(), workers=4)]
        assert serial == threaded

    def test_empty(self):
        with raises(ValueError):
            sweep([], MzConfig())

    def test_unital_noise_on_unpolarized_probe_is_invisible(self, rng):
        deltas = [0.5, 1.5, 2.5]
        clean = sweep(deltas, MzConfig())
        for _ in range(10):
            noisy = sweep(deltas, MzConfig(probe_noise=random_unital_channel(2, rng)))
            for a, b in zip(clean, noisy):
                assert_allclose(b.extracted_im_weak_value, a.extracted_im_weak_value, atol=1e-12)
                assert_allclose(b.power_curve, a.power_curve, atol=1e-12)

    def test_phase_noise_after_interaction_is_invisible(self):
        clean = extract_weak_value(MzConfig(delta=1.3))[0]
        noisy = extract_weak_value(MzConfig(delta=1.3, output_noise=phase_flip(0.4)))[0]
        assert_allclose(noisy, clean, atol=1e-12)
