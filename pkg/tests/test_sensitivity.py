import numpy as np
import pytest

from hygroplan import (
    BoundaryDesign,
    DomainError,
    Grid1D,
    fd_sensitivity_oracle,
    interp_space,
    relative_l2_difference,
    solve_sensitivities,
    wood_fibre,
)
from hygroplan.sensitivity import PARAMETERS, parameter_scale

HOUR = 3600.0


class TestParameterScale:
    def test_nominal_values(self, model):
        assert parameter_scale(model, "d0") == pytest.approx(2.33e-11)
        assert parameter_scale(model, "d1") == pytest.approx(5.68e-11)
        assert parameter_scale(model, "a") == pytest.approx(7.2e-11)

    def test_zero_advection_fallback_positive(self, model):
        m = model.with_transport(a=0.0)
        assert parameter_scale(m, "a") > 0.0

    def test_unknown_parameter(self, model):
        with pytest.raises(DomainError):
            parameter_scale(model, "d2")


class TestSolveSensitivities:
    def test_zero_initial_condition_exact(self, model, coarse_grid, step_design):
        _, fields = solve_sensitivities(model, step_design, coarse_grid)
        for f in fields:
            assert np.all(f.values[0] == 0.0)

    def test_shares_time_base_with_forward(self, model, coarse_grid, step_design):
        times = np.linspace(0.0, step_design.total_duration, 33)
        forward, fields = solve_sensitivities(
            model, step_design, coarse_grid, output_times=times
        )
        assert np.array_equal(forward.times, times)
        for f in fields:
            assert np.array_equal(f.times, times)
            assert f.values.shape == forward.values.shape
            assert np.all(np.isfinite(f.values))

    def test_equilibrium_diffusion_sensitivities_vanish(self, model, coarse_grid):
        # ambient equals initial and a = 0: u never moves, so changing the
        # permeability changes nothing (the drift parameter is different:
        # perturbing a disturbs the uniform state, so Theta_a != 0)
        m = model.with_transport(a=0.0)
        design = BoundaryDesign("eq", 0.33, ((24 * HOUR, 0.33),))
        _, fields = solve_sensitivities(m, design, coarse_grid, ("d0", "d1"))
        for f in fields:
            assert np.max(np.abs(f.values)) < 1e-5

    def test_sigma_u_pure_scaling(self, model, coarse_grid, step_design):
        times = np.linspace(0.0, step_design.total_duration, 17)
        _, f1 = solve_sensitivities(
            model, step_design, coarse_grid, ("d0",), output_times=times, sigma_u=0.02
        )
        _, f2 = solve_sensitivities(
            model, step_design, coarse_grid, ("d0",), output_times=times, sigma_u=0.04
        )
        assert np.array_equal(f1[0].values, 2.0 * f2[0].values)

    def test_param_order_respected(self, model, coarse_grid, step_design):
        _, fields = solve_sensitivities(
            model, step_design, coarse_grid, ("a", "d0")
        )
        assert [f.parameter for f in fields] == ["a", "d0"]

    def test_invalid_params(self, model, coarse_grid, step_design):
        with pytest.raises(DomainError):
            solve_sensitivities(model, step_design, coarse_grid, ())
        with pytest.raises(DomainError):
            solve_sensitivities(model, step_design, coarse_grid, ("d0", "d0"))
        with pytest.raises(DomainError):
            solve_sensitivities(model, step_design, coarse_grid, ("bogus",))
        with pytest.raises(DomainError):
            solve_sensitivities(model, step_design, coarse_grid, sigma_u=0.0)


class TestOracleAgreement:
    @pytest.mark.parametrize("parameter", PARAMETERS)
    def test_step_design_agreement(self, model, grid, step_design, parameter):
        times = np.linspace(0.0, step_design.total_duration, 97)
        _, fields = solve_sensitivities(
            model, step_design, grid, (parameter,), output_times=times
        )
        oracle = fd_sensitivity_oracle(
            model, step_design, grid, parameter, output_times=times
        )
        assert relative_l2_difference(fields[0], oracle) < 1e-3

    def test_multi_step_agreement(self, model, coarse_grid):
        design = BoundaryDesign(
            "mini", 0.10, ((12 * HOUR, 0.75), (12 * HOUR, 0.33), (12 * HOUR, 0.75))
        )
        times = np.linspace(0.0, design.total_duration, 73)
        _, fields = solve_sensitivities(
            model, design, coarse_grid, ("d1",), output_times=times
        )
        oracle = fd_sensitivity_oracle(
            model, design, coarse_grid, "d1", output_times=times
        )
        assert relative_l2_difference(fields[0], oracle) < 1e-3

    def test_equilibrium_oracle_zero(self, model, coarse_grid):
        m = model.with_transport(a=0.0)
        design = BoundaryDesign("eq", 0.33, ((24 * HOUR, 0.33),))
        times = np.linspace(0.0, design.total_duration, 25)
        oracle = fd_sensitivity_oracle(m, design, coarse_grid, "d0", output_times=times)
        # the finite difference amplifies integrator noise by 1/(2 delta),
        # so "zero" here means the tolerance floor, not machine zero
        assert np.max(np.abs(oracle.values)) < 1e-3


class TestOracleRobustness:
    def test_central_difference_step_insensitive(self, model, coarse_grid):
        design = BoundaryDesign("s1", 0.10, ((48 * HOUR, 0.33),))
        times = np.linspace(0.0, design.total_duration, 49)
        # extra-tight tolerances keep integrator noise below the O(step^2)
        # truncation difference being measured
        tight = (1e-10, 1e-12)
        f1 = fd_sensitivity_oracle(
            model, design, coarse_grid, "a", rel_step=1e-4,
            tolerances=tight, output_times=times,
        )
        f2 = fd_sensitivity_oracle(
            model, design, coarse_grid, "a", rel_step=1e-3,
            tolerances=tight, output_times=times,
        )
        assert relative_l2_difference(f1, f2) < 1e-4

    def test_one_sided_fallback_at_zero_drift(self, model, coarse_grid):
        # a = 0 forbids the downward perturbation, so the oracle degrades
        # to a one-sided difference with O(step) bias
        m = model.with_transport(a=0.0)
        design = BoundaryDesign("s1", 0.10, ((48 * HOUR, 0.33),))
        times = np.linspace(0.0, design.total_duration, 49)
        f1 = fd_sensitivity_oracle(
            m, design, coarse_grid, "a", rel_step=1e-4, output_times=times
        )
        f2 = fd_sensitivity_oracle(
            m, design, coarse_grid, "a", rel_step=1e-3, output_times=times
        )
        assert relative_l2_difference(f1, f2) < 2e-3

    def test_rel_step_out_of_range(self, model, coarse_grid, step_design):
        with pytest.raises(DomainError):
            fd_sensitivity_oracle(model, step_design, coarse_grid, "d0", rel_step=0.1)
        with pytest.raises(DomainError):
            fd_sensitivity_oracle(model, step_design, coarse_grid, "bogus")


class TestCorrelationSignature:
    def test_strong_d0_d1_time_correlation(self, model, grid):
        design = BoundaryDesign("s2", 0.10, ((200.0 * HOUR, 0.75),))
        times = np.linspace(0.0, design.total_duration, 201)
        _, fields = solve_sensitivities(
            model, design, grid, ("d0", "d1"), output_times=times
        )
        x_best = 0.0792
        t0 = interp_space(grid, fields[0].values, x_best)
        t1 = interp_space(grid, fields[1].values, x_best)
        corr = np.corrcoef(t0, t1)[0, 1]
        assert corr > 0.8
