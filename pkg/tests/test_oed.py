import numpy as np
import pytest

from hygroplan import (
    BoundaryDesign,
    DesignCatalog,
    DomainError,
    FisherResult,
    Grid1D,
    MeasurementPlan,
    catalog,
    fisher_matrix,
    prior_sweep,
    search_optimal_plan,
    solve_sensitivities,
    wood_fibre,
)
from hygroplan.sensitivity import SensitivityField

HOUR = 3600.0


def _synthetic_field(parameter, times, profile, grid):
    """Constant-in-space field whose time profile is given."""
    values = np.repeat(profile[:, None], grid.n_cells, axis=1)
    return SensitivityField(
        parameter=parameter,
        times=times,
        values=values,
        sigma_u=1.0,
        sigma_p=1.0,
        grid=grid,
    )


class TestMeasurementPlan:
    def test_valid(self):
        p = MeasurementPlan("s1", (0.05,), 100.0)
        assert p.sensor_positions == (0.05,)

    def test_invalid(self):
        with pytest.raises(DomainError):
            MeasurementPlan("s1", (), 100.0)
        with pytest.raises(DomainError):
            MeasurementPlan("s1", (0.0,), 100.0)
        with pytest.raises(DomainError):
            MeasurementPlan("s1", (0.05, 0.05), 100.0)
        with pytest.raises(DomainError):
            MeasurementPlan("s1", (0.05,), -1.0)


class TestFisherResultInvariants:
    def test_asymmetric_matrix_rejected(self):
        plan = MeasurementPlan("s1", (0.05,), 1.0)
        with pytest.raises(DomainError):
            FisherResult(
                plan=plan,
                params=("d0", "d1"),
                matrix=np.array([[1.0, 0.5], [0.4, 1.0]]),
                psi=0.75,
                correlation=np.eye(2),
            )

    def test_indefinite_matrix_rejected(self):
        plan = MeasurementPlan("s1", (0.05,), 1.0)
        with pytest.raises(DomainError):
            FisherResult(
                plan=plan,
                params=("d0", "d1"),
                matrix=np.array([[1.0, 2.0], [2.0, 1.0]]),
                psi=-3.0,
                correlation=np.eye(2),
            )


class TestDesignCatalog:
    def test_duplicate_ids_rejected(self):
        d = BoundaryDesign("dup", 0.1, ((10.0, 0.5),))
        with pytest.raises(DomainError):
            DesignCatalog(designs=(d, d))

    def test_unknown_id(self):
        with pytest.raises(DomainError):
            catalog().get("zz")


class TestFisherMatrixOracle:
    def test_linear_and_constant_profiles(self):
        # Theta1 = t, Theta2 = 1 on t in [0, 1]:
        # integrals give [[1/3, 1/2], [1/2, 1]], det 1/12, corr sqrt(3)/2
        grid = Grid1D(10, 0.08)
        t = np.linspace(0.0, 1.0, 2001)
        f1 = _synthetic_field("d0", t, t.copy(), grid)
        f2 = _synthetic_field("d1", t, np.ones_like(t), grid)
        plan = MeasurementPlan("s1", (0.04,), 1.0)
        res = fisher_matrix([f1, f2], plan, time_unit=1.0)
        assert res.matrix == pytest.approx(
            np.array([[1.0 / 3.0, 0.5], [0.5, 1.0]]), abs=1e-6
        )
        assert res.psi == pytest.approx(1.0 / 12.0, abs=1e-6)
        assert res.correlation[0, 1] == pytest.approx(np.sqrt(3.0) / 2.0, abs=1e-6)

    def test_zero_fields_give_zero_psi(self):
        grid = Grid1D(10, 0.08)
        t = np.linspace(0.0, 1.0, 11)
        z = _synthetic_field("d0", t, np.zeros_like(t), grid)
        plan = MeasurementPlan("s1", (0.04,), 1.0)
        res = fisher_matrix([z], plan, time_unit=1.0)
        assert res.psi == 0.0
        assert np.all(res.matrix == 0.0)

    def test_unit_field_single_parameter(self):
        grid = Grid1D(10, 0.08)
        t = np.linspace(0.0, 1.0, 11)
        f = _synthetic_field("d0", t, np.ones_like(t), grid)
        plan = MeasurementPlan("s1", (0.04,), 1.0)
        res = fisher_matrix([f], plan, time_unit=1.0)
        assert res.psi == pytest.approx(1.0, rel=1e-12)

    def test_two_sensors_sum(self):
        grid = Grid1D(10, 0.08)
        t = np.linspace(0.0, 1.0, 101)
        f = _synthetic_field("d0", t, np.ones_like(t), grid)
        one = fisher_matrix([f], MeasurementPlan("s1", (0.02,), 1.0), time_unit=1.0)
        two = fisher_matrix(
            [f], MeasurementPlan("s1", (0.02, 0.06), 1.0), time_unit=1.0
        )
        assert two.matrix[0, 0] == pytest.approx(2.0 * one.matrix[0, 0], rel=1e-12)

    def test_symmetry_exact(self, model, coarse_grid, step_design):
        _, fields = solve_sensitivities(model, step_design, coarse_grid, ("d0", "a"))
        plan = MeasurementPlan("step", (0.05,), step_design.total_duration)
        res = fisher_matrix(fields, plan)
        assert np.array_equal(res.matrix, res.matrix.T)

    def test_mismatched_bases_rejected(self):
        grid = Grid1D(10, 0.08)
        t1 = np.linspace(0.0, 1.0, 11)
        t2 = np.linspace(0.0, 1.0, 21)
        f1 = _synthetic_field("d0", t1, np.ones_like(t1), grid)
        f2 = _synthetic_field("d1", t2, np.ones_like(t2), grid)
        plan = MeasurementPlan("s1", (0.04,), 1.0)
        with pytest.raises(DomainError):
            fisher_matrix([f1, f2], plan)

    def test_sensor_outside_grid_rejected(self):
        grid = Grid1D(10, 0.08)
        t = np.linspace(0.0, 1.0, 11)
        f = _synthetic_field("d0", t, np.ones_like(t), grid)
        plan = MeasurementPlan("s1", (0.09,), 1.0)
        with pytest.raises(DomainError):
            fisher_matrix([f], plan)


class TestScaleEquivariance:
    def test_psi_scales_as_k_to_2m_and_argmax_invariant(
        self, model, coarse_grid, step_design
    ):
        _, fields = solve_sensitivities(
            model, step_design, coarse_grid, ("d0", "d1", "a")
        )
        k = 2.0
        scaled = [
            SensitivityField(
                parameter=f.parameter,
                times=f.times,
                values=k * f.values,
                sigma_u=f.sigma_u,
                sigma_p=f.sigma_p,
                grid=f.grid,
            )
            for f in fields
        ]
        positions = np.linspace(0.005, 0.075, 15)
        psi_base, psi_scaled = [], []
        for x in positions:
            plan = MeasurementPlan("step", (float(x),), step_design.total_duration)
            psi_base.append(fisher_matrix(fields, plan).psi)
            psi_scaled.append(fisher_matrix(scaled, plan).psi)
        psi_base = np.array(psi_base)
        psi_scaled = np.array(psi_scaled)
        assert psi_scaled == pytest.approx(k ** 6 * psi_base, rel=1e-12)
        assert np.argmax(psi_scaled) == np.argmax(psi_base)


class TestQuadratureConsistency:
    def test_doubling_output_density(self, model, coarse_grid, step_design):
        entries = []
        for n_out in (1001, 2001):
            times = np.linspace(0.0, step_design.total_duration, n_out)
            _, fields = solve_sensitivities(
                model, step_design, coarse_grid, ("d0", "d1"), output_times=times
            )
            plan = MeasurementPlan("step", (0.05,), step_design.total_duration)
            entries.append(fisher_matrix(fields, plan).matrix)
        rel = np.max(np.abs(entries[1] - entries[0]) / np.abs(entries[1]))
        assert rel < 5e-3


class TestSearchOptimalPlan:
    def test_single_step_d0_ranking(self, model, grid):
        results = search_optimal_plan(
            model, ("s1", "s2", "s3", "s4"), ("d0",), grid=grid
        )
        assert results[0].plan.design_id == "s2"
        assert results[0].psi > results[1].psi

    def test_accepts_design_objects(self, model, coarse_grid, step_design):
        results = search_optimal_plan(model, (step_design,), ("d0",), grid=coarse_grid)
        assert results[0].plan.design_id == "step"

    def test_deterministic(self, model, coarse_grid, step_design):
        a = search_optimal_plan(model, (step_design,), ("d0", "a"), grid=coarse_grid)
        b = search_optimal_plan(model, (step_design,), ("d0", "a"), grid=coarse_grid)
        assert a[0].psi == b[0].psi
        assert a[0].plan == b[0].plan

    def test_empty_subset_rejected(self, model):
        with pytest.raises(DomainError):
            search_optimal_plan(model, (), ("d0",))

    def test_bad_position_step(self, model, coarse_grid, step_design):
        with pytest.raises(DomainError):
            search_optimal_plan(
                model, (step_design,), ("d0",),
                position_grid_step=0.6, grid=coarse_grid,
            )


class TestPriorSweep:
    def test_degenerate_box_matches_direct_search(self, model, coarse_grid):
        designs = ("s1", "s2")
        tr = model.transport
        box = {"d0": (tr.d0, tr.d0), "d1": (tr.d1, tr.d1)}
        direct = search_optimal_plan(model, designs, ("d0",), grid=coarse_grid)
        sweep = prior_sweep(model, box, 3, designs, ("d0",), grid=coarse_grid)
        assert sweep.winner_counts == ((direct[0].plan.design_id, 3),)
        assert all(
            x == direct[0].plan.sensor_positions[0] for x in sweep.optimal_positions
        )

    def test_small_box_stable_winner(self, model, coarse_grid):
        tr = model.transport
        box = {"d0": (0.9 * tr.d0, 1.1 * tr.d0)}
        sweep = prior_sweep(
            model, box, 16, ("s1", "s2", "s3", "s4"), ("d0",), grid=coarse_grid
        )
        wins = dict(sweep.winner_counts)
        assert wins.get("s2", 0) >= 14

    def test_zero_samples_rejected(self, model):
        with pytest.raises(DomainError):
            prior_sweep(model, {}, 0, ("s1",), ("d0",))

    def test_unknown_parameter_rejected(self, model):
        with pytest.raises(DomainError):
            prior_sweep(model, {"dx": (0.0, 1.0)}, 2, ("s1",), ("d0",))

    def test_empty_interval_rejected(self, model):
        with pytest.raises(DomainError):
            prior_sweep(model, {"d0": (2.0, 1.0)}, 2, ("s1",), ("d0",))
