"""D-optimal planning of humidity-step experiments.

A measurement plan pairs one of the catalog boundary designs with sensor
positions inside the slab.  Plans are scored by the determinant (D-criterion)
of the Fisher information matrix assembled from the scaled sensitivity
fields: Phi_ij = sum over sensors of the time integral of Theta_i * Theta_j.
The search evaluates the criterion on a uniform grid of candidate positions
reusing one coupled forward/sensitivity solve per design, and a quasi-random
prior sweep reports how stable the winning design is under parameter
uncertainty.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import DomainError, SolverFailure
from .material import MaterialModel
from .sensitivity import PARAMETERS, SensitivityField, solve_sensitivities
from .solver import BoundaryDesign, Grid1D, interp_space

#: Time unit of the Fisher integrals (seconds).  A fixed, design-independent
#: unit keeps Psi O(1) and comparable between 200 h and 576 h schedules.
DEFAULT_TIME_UNIT = 3600.0

#: Dimensionless spacing of candidate sensor positions (fraction of L).
DEFAULT_POSITION_STEP = 0.01

_PSI_TIE_REL = 1e-12


@dataclass(frozen=True)
class MeasurementPlan:
    """One boundary design plus sensor positions and an observation horizon."""

    design_id: str
    sensor_positions: tuple
    horizon: float

    def __post_init__(self):
        pos = tuple(float(x) for x in self.sensor_positions)
        object.__setattr__(self, "sensor_positions", pos)
        if not pos:
            raise DomainError("a plan needs at least one sensor position")
        if any(x <= 0.0 for x in pos):
            raise DomainError("sensor positions must lie strictly inside (0, L)")
        if len(set(pos)) != len(pos):
            raise DomainError("sensor positions must be distinct")
        if self.horizon <= 0.0:
            raise DomainError("horizon must be positive")


@dataclass(frozen=True)
class FisherResult:
    """Fisher matrix, D-criterion and correlation matrix for one plan."""

    plan: MeasurementPlan
    params: tuple
    matrix: np.ndarray = field(compare=False)
    psi: float
    correlation: np.ndarray = field(compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError("Fisher matrix must be square")
        if not np.array_equal(m, m.T):
            raise DomainError("Fisher matrix must be symmetric")
        tol = 1e-10 * max(np.trace(m), 0.0) + 1e-300
        if np.linalg.eigvalsh(m).min() < -tol:
            raise DomainError("Fisher matrix must be positive semidefinite")
        if self.psi < -tol:
            raise DomainError("D-criterion must be nonnegative")


@dataclass(frozen=True)
class DesignCatalog:
    """The fixed set of boundary designs the facility can realize."""

    designs: tuple

    def __post_init__(self):
        ids = [d.id for d in self.designs]
        if len(set(ids)) != len(ids):
            raise DomainError("catalog design ids must be unique")

    @property
    def ids(self):
        return tuple(d.id for d in self.designs)

    def get(self, design_id: str) -> BoundaryDesign:
        for d in self.designs:
            if d.id == design_id:
                return d
        raise DomainError(f"unknown design id {design_id!r}")


def _trapezoid_weights(t):
    w = np.zeros_like(t)
    dt = np.diff(t)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def _check_shared_base(fields):
    first = fields[0]
    for f in fields[1:]:
        if f.grid != first.grid or not np.array_equal(f.times, first.times):
            raise DomainError("sensitivity fields are on different bases")
    return first


def _correlation_from(matrix):
    diag = np.sqrt(np.diag(matrix))
    denom = np.outer(diag, diag)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(denom > 0.0, matrix / np.where(denom > 0, denom, 1.0), 0.0)
    np.fill_diagonal(corr, 1.0)
    return corr


def fisher_matrix(
    sensitivities,
    plan: MeasurementPlan,
    params=None,
    time_unit: float = DEFAULT_TIME_UNIT,
) -> FisherResult:
    """Assemble the Fisher information matrix for one measurement plan.

    Phi_ij sums, over the plan's sensors, the trapezoidal time integral of
    Theta_i * Theta_j sampled at the sensor position.  Time is measured in
    ``time_unit`` seconds so the entries stay O(1).
    """
    fields = list(sensitivities)
    if not fields:
        raise DomainError("at least one sensitivity field is required")
    if params is None:
        params = tuple(f.parameter for f in fields)
    params = tuple(params)
    if params != tuple(f.parameter for f in fields):
        raise DomainError("params do not match the sensitivity fields")
    first = _check_shared_base(fields)
    length = first.grid.length
    if any(x >= length for x in plan.sensor_positions):
        raise DomainError("sensor positions must lie strictly inside (0, L)")

    w = _trapezoid_weights(first.times / time_unit)
    m = len(fields)
    matrix = np.zeros((m, m))
    for x in plan.sensor_positions:
        theta = np.stack([interp_space(first.grid, f.values, x) for f in fields])
        matrix += (theta * w) @ theta.T
    matrix = 0.5 * (matrix + matrix.T)
    psi = float(np.linalg.det(matrix)) if m > 1 else float(matrix[0, 0])
    return FisherResult(
        plan=plan,
        params=params,
        matrix=matrix,
        psi=max(psi, 0.0) if abs(psi) < 1e-300 else psi,
        correlation=_correlation_from(matrix),
    )


def _resolve_designs(catalog_subset, catalog):
    designs = []
    for entry in catalog_subset:
        if isinstance(entry, BoundaryDesign):
            designs.append(entry)
        else:
            if catalog is None:
                from .harness import catalog as default_catalog

                catalog = default_catalog()
            designs.append(catalog.get(entry))
    if not designs:
        raise DomainError("catalog subset must not be empty")
    return designs


def search_optimal_plan(
    model: MaterialModel,
    catalog_subset,
    params=PARAMETERS,
    position_grid_step: float = DEFAULT_POSITION_STEP,
    grid: Grid1D = None,
    catalog: DesignCatalog = None,
    tolerances=None,
    time_unit: float = DEFAULT_TIME_UNIT,
):
    """Rank designs by their best-position D-criterion.

    One coupled solve per design; Psi is then evaluated at every candidate
    sensor position (uniform grid of ``position_grid_step`` * L) from the
    stored fields.  Returns a list of FisherResult sorted by Psi descending;
    within one design, position ties resolve to the smallest X.
    """
    designs = _resolve_designs(catalog_subset, catalog)
    if grid is None:
        grid = Grid1D(100, 0.08)
    if not 0.0 < position_grid_step < 0.5:
        raise DomainError("position_grid_step must lie in (0, 0.5)")

    n_cand = int(round(1.0 / position_grid_step)) - 1
    candidates = (np.arange(n_cand) + 1) * position_grid_step * grid.length

    results = []
    for design in designs:
        kwargs = {} if tolerances is None else {"tolerances": tolerances}
        _, fields = solve_sensitivities(model, design, grid, params, **kwargs)
        w = _trapezoid_weights(fields[0].times / time_unit)
        # theta: (M, n_times, n_candidates)
        theta = np.stack(
            [interp_space(grid, f.values, candidates) for f in fields]
        )
        phi = np.einsum("itc,jtc->cij", theta * w[None, :, None], theta)
        phi = 0.5 * (phi + phi.transpose(0, 2, 1))
        psi = np.linalg.det(phi) if len(fields) > 1 else phi[:, 0, 0]
        best = psi.max()
        k = int(np.nonzero(psi >= best - _PSI_TIE_REL * abs(best))[0][0])
        plan = MeasurementPlan(
            design_id=design.id,
            sensor_positions=(float(candidates[k]),),
            horizon=design.total_duration,
        )
        results.append(
            FisherResult(
                plan=plan,
                params=tuple(f.parameter for f in fields),
                matrix=phi[k],
                psi=float(max(psi[k], 0.0)),
                correlation=_correlation_from(phi[k]),
            )
        )
    results.sort(key=lambda r: (-r.psi, r.plan.design_id))
    return results


@dataclass(frozen=True)
class PriorSweepResult:
    """Winning-design statistics over a quasi-random prior sample."""

    n_samples: int
    winner_counts: tuple  # ((design_id, count), ...) sorted by count desc
    optimal_positions: tuple  # X-degree of the winner, one per valid sample
    failures: tuple  # (sample_index, message)


def prior_sweep(
    model: MaterialModel,
    prior_box: dict,
    n_samples: int,
    catalog_subset,
    params=PARAMETERS,
    **search_kwargs,
) -> PriorSweepResult:
    """Rerun the design search over a Halton sample of the parameter box.

    ``prior_box`` maps transport parameter names to (low, high) intervals;
    unlisted parameters stay at the model's values.  Zero-width intervals
    pin a parameter.  Samples whose forward solve fails are recorded and
    skipped.  Deterministic for a fixed n_samples (unscrambled Halton).
    """
    if n_samples < 1:
        raise DomainError("n_samples must be at least 1")
    names = tuple(prior_box)
    for name in names:
        if name not in PARAMETERS:
            raise DomainError(f"unknown parameter {name!r} in prior box")
        lo, hi = prior_box[name]
        if hi < lo:
            raise DomainError(f"empty interval for {name!r}")
    lows = np.array([prior_box[n][0] for n in names], dtype=float)
    highs = np.array([prior_box[n][1] for n in names], dtype=float)

    if names:
        sampler = qmc.Halton(d=len(names), scramble=False)
        unit = sampler.random(n_samples)
    else:
        unit = np.zeros((n_samples, 0))
    points = lows + unit * (highs - lows)

    counts = {}
    positions = []
    failures = []
    for k in range(n_samples):
        sample = {n: float(points[k, i]) for i, n in enumerate(names)}
        try:
            trial = model.with_transport(**sample)
            ranked = search_optimal_plan(trial, catalog_subset, params, **search_kwargs)
        except (SolverFailure, DomainError) as exc:
            failures.append((k, str(exc)))
            continue
        winner = ranked[0]
        counts[winner.plan.design_id] = counts.get(winner.plan.design_id, 0) + 1
        positions.append(winner.plan.sensor_positions[0])
    ordered = tuple(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))
    return PriorSweepResult(
        n_samples=n_samples,
        winner_counts=ordered,
        optimal_positions=tuple(positions),
        failures=tuple(failures),
    )
