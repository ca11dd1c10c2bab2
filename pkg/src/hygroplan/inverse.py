"""Estimation of the transport coefficients from sensor records.

The unknowns (d0, d1, a) are recovered by bound-constrained least squares
on the mismatch between measured and simulated relative humidity at the
sensor positions.  Each dataset is bound to the subset of parameters it is
meant to inform, so the two-experiment protocol (one single-step record for
d0, one multi-step record for d1 and a) is expressed as block-coordinate
stages; a single joint fit is the special case where every dataset informs
every parameter.

Also provided: residual diagnostics, the linearized parameter CDF/PDF built
from a sensitivity value, the combined sensor/position uncertainty, and the
surface transfer coefficient regression from an evaporation mass series.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import DegenerateSensitivityError, DomainError, EstimationError, SolverFailure
from .material import MaterialModel, saturation_pressure
from .sensitivity import PARAMETERS, parameter_scale, solve_sensitivities
from .solver import (
    DEFAULT_TOLERANCES,
    FieldSolution,
    Grid1D,
    interp_space,
    sample_at,
    solve_forward,
)

#: Measurement standard deviation used for the parameter PDF, 0.15% RH.
DEFAULT_SIGMA_PDF = 0.0015

#: Default box constraints relative to the a-priori value per parameter.
DEFAULT_BOUND_FACTORS = {"d0": (0.01, 10.0), "d1": (0.01, 10.0), "a": (0.001, 10.0)}

_FAILED_RESIDUAL = 1e6


@dataclass(frozen=True)
class ExperimentDataset:
    """Sensor readings at one position under one boundary design."""

    design_id: str
    sensor_position: float
    times: np.ndarray = field(compare=False)
    readings: np.ndarray = field(compare=False)
    noise_sigma: float = 0.0
    unit: str = "rh"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        r = np.asarray(self.readings, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "readings", r)
        if t.ndim != 1 or t.shape != r.shape:
            raise DomainError("times and readings must be 1-d and aligned")
        if t.size < 1:
            raise DomainError("dataset must contain at least one sample")
        if np.any(np.diff(t) <= 0.0):
            raise DomainError("times must be strictly increasing")
        if self.unit not in ("rh", "pa"):
            raise DomainError("unit must be 'rh' or 'pa'")
        if self.unit == "rh" and (np.any(r <= 0.0) or np.any(r >= 1.0)):
            raise DomainError("relative-humidity readings must lie in (0, 1)")
        if self.sensor_position <= 0.0:
            raise DomainError("sensor position must be positive")
        if self.noise_sigma < 0.0:
            raise DomainError("noise_sigma must be nonnegative")

    def readings_fraction(self, p_sat: float) -> np.ndarray:
        """Readings as vapour pressure over saturation pressure."""
        if self.unit == "pa":
            return self.readings / p_sat
        return self.readings


def default_bounds(model: MaterialModel) -> dict:
    tr = model.transport
    out = {}
    for name, (lo_f, hi_f) in DEFAULT_BOUND_FACTORS.items():
        ref = getattr(tr, name)
        out[name] = (lo_f * ref, hi_f * ref)
    return out


@dataclass(frozen=True)
class EstimationProblem:
    """Datasets plus constraints defining one estimation run.

    ``datasets`` is a sequence of (ExperimentDataset, BoundaryDesign,
    informed-parameter labels).  ``bounds`` and ``initial_guess`` are keyed
    by parameter name; missing bounds fall back to the default box around
    the template's a-priori values.
    """

    datasets: tuple
    model_template: MaterialModel
    initial_guess: dict
    bounds: dict = None

    def __post_init__(self):
        ds = tuple((d, design, tuple(informs)) for d, design, informs in self.datasets)
        object.__setattr__(self, "datasets", ds)
        if not ds:
            raise DomainError("at least one dataset is required")
        bounds = dict(default_bounds(self.model_template))
        if self.bounds:
            bounds.update(self.bounds)
        object.__setattr__(self, "bounds", bounds)
        guess = dict(self.initial_guess)
        object.__setattr__(self, "initial_guess", guess)
        for name in PARAMETERS:
            if name not in guess:
                raise DomainError(f"initial guess missing {name!r}")
            lo, hi = bounds[name]
            if not lo < hi:
                raise DomainError(f"bounds for {name!r} must satisfy lo < hi")
            if not lo <= guess[name] <= hi:
                raise DomainError(f"initial guess for {name!r} outside bounds")
        for dataset, design, informs in ds:
            if not informs:
                raise DomainError("every dataset must inform at least one parameter")
            for name in informs:
                if name not in PARAMETERS:
                    raise DomainError(f"unknown parameter {name!r}")
            if dataset.design_id != design.id:
                raise DomainError("dataset design_id does not match its design")

    def parameter_vector(self) -> np.ndarray:
        return np.array([self.initial_guess[n] for n in PARAMETERS])


@dataclass(frozen=True)
class EstimationReport:
    """Outcome of one estimation run."""

    estimate: dict
    cost_initial: float
    cost_final: float
    forward_solve_count: int
    residuals: tuple  # one residual array per dataset, model order
    converged: bool
    cost_trace: tuple  # best cost after each objective evaluation

    def __post_init__(self):
        if self.cost_final > self.cost_initial * (1.0 + 1e-12) + 1e-300:
            raise DomainError("final cost exceeds the initial cost")
        if self.forward_solve_count <= 0:
            raise DomainError("forward solve count must be positive")


def _model_at(template: MaterialModel, p: np.ndarray) -> MaterialModel:
    return template.with_transport(**dict(zip(PARAMETERS, p)))


def _dataset_residual(dataset, design, model, grid, tolerances):
    sol = solve_forward(model, design, grid, tolerances, output_times=dataset.times)
    simulated = interp_space(grid, sol.values, dataset.sensor_position) / model.p_sat
    return dataset.readings_fraction(model.p_sat) - simulated


def cost(
    problem: EstimationProblem,
    p,
    grid: Grid1D = None,
    tolerances=DEFAULT_TOLERANCES,
) -> float:
    """Sum of squared residuals over all datasets, in humidity fraction units.

    A forward-solver failure makes the cost +inf rather than raising, so
    optimizers can retreat from pathological parameter regions.
    """
    p = np.asarray(p, dtype=float)
    if grid is None:
        grid = Grid1D(100, 0.08)
    model = _model_at(problem.model_template, p)
    total = 0.0
    for dataset, design, _ in problem.datasets:
        try:
            r = _dataset_residual(dataset, design, model, grid, tolerances)
        except (SolverFailure, DomainError):
            return float("inf")
        total += float(r @ r)
    return total


class _Budget:
    def __init__(self, limit):
        self.limit = limit
        self.used = 0

    def charge(self, n=1):
        self.used += n
        if self.used > self.limit:
            raise _BudgetExhausted


class _BudgetExhausted(Exception):
    pass


def estimate(
    problem: EstimationProblem,
    grid: Grid1D = None,
    tolerances=DEFAULT_TOLERANCES,
    jacobian: str = "sensitivity",
    max_forward_solves: int = 500,
    max_cycles: int = 60,
    ftol: float = 1e-8,
    xtol: float = 1e-8,
) -> EstimationReport:
    """Bound-constrained least-squares estimation of (d0, d1, a).

    Datasets sharing the same informed-parameter set form one stage; stages
    run in first-appearance order and the whole sequence is cycled until the
    cost stops improving, the tolerances are met, or the forward-solve
    budget is spent.  ``jacobian`` is either ``"sensitivity"`` (coupled
    sensitivity solves) or ``"fd"`` (finite differences inside the
    optimizer).
    """
    if jacobian not in ("sensitivity", "fd"):
        raise DomainError("jacobian must be 'sensitivity' or 'fd'")
    if grid is None:
        grid = Grid1D(100, 0.08)
    template = problem.model_template

    stages = []
    for dataset, design, informs in problem.datasets:
        for stage in stages:
            if stage[0] == informs:
                stage[1].append((dataset, design))
                break
        else:
            stages.append((informs, [(dataset, design)]))

    lo = np.array([problem.bounds[n][0] for n in PARAMETERS])
    hi = np.array([problem.bounds[n][1] for n in PARAMETERS])
    p = problem.parameter_vector()
    budget = _Budget(max_forward_solves)
    best = {"cost": float("inf"), "p": p.copy()}
    trace = []

    # per-dataset cost contributions at the current iterate; the stage
    # optimizer hands back its final residuals, so between-stage constants
    # never need an extra forward solve
    contrib = {}

    def full_cost(p_full):
        model = _model_at(template, p_full)
        total = 0.0
        for dataset, design, _ in problem.datasets:
            budget.charge()
            r = _dataset_residual(dataset, design, model, grid, tolerances)
            contrib[id(dataset)] = float(r @ r)
            total += float(r @ r)
        return total

    def record(c, p_full):
        if c < best["cost"]:
            best["cost"] = c
            best["p"] = p_full.copy()
        trace.append(best["cost"])

    try:
        cost_initial = full_cost(p)
    except _BudgetExhausted:
        raise EstimationError("forward-solve budget too small to evaluate the start")
    except (SolverFailure, DomainError) as exc:
        raise EstimationError(f"forward solve failed at the initial guess: {exc}")
    if not np.isfinite(cost_initial):
        raise EstimationError("initial guess gives a non-finite cost")
    record(cost_initial, p)

    converged = False
    # fixed reference scales for the cycle-acceleration step below
    pscale = np.abs(problem.parameter_vector())
    pscale[pscale == 0.0] = 1.0
    p_prev = None
    step_prev = None
    try:
        previous = cost_initial
        for _ in range(max_cycles):
            for informs, stage_sets in stages:
                idx = [PARAMETERS.index(n) for n in informs]
                scale = np.abs(p[idx])
                scale[scale == 0.0] = 1.0

                # datasets outside this stage contribute a constant cost
                rest_cost = sum(
                    contrib[id(d)]
                    for d, _, _ in problem.datasets
                    if not any(d is ds for ds, _ in stage_sets)
                )

                def residual_fun(xs, idx=idx, scale=scale, stage_sets=stage_sets,
                                 rest_cost=rest_cost):
                    p_trial = p.copy()
                    p_trial[idx] = xs * scale
                    model = _model_at(template, p_trial)
                    parts = []
                    ok = True
                    for dataset, design in stage_sets:
                        budget.charge()
                        try:
                            parts.append(
                                _dataset_residual(dataset, design, model, grid, tolerances)
                            )
                        except (SolverFailure, DomainError):
                            parts.append(
                                np.full(dataset.times.size, _FAILED_RESIDUAL)
                            )
                            ok = False
                    r = np.concatenate(parts)
                    if ok:
                        record(rest_cost + float(r @ r), p_trial)
                    return r

                def jac_fun(xs, idx=idx, scale=scale, stage_sets=stage_sets, informs=informs):
                    p_trial = p.copy()
                    p_trial[idx] = xs * scale
                    model = _model_at(template, p_trial)
                    blocks = []
                    for dataset, design in stage_sets:
                        budget.charge()
                        # field values are p_scale_m * du*/dp_m (sigma_u = 1)
                        _, fields = solve_sensitivities(
                            model, design, grid, informs, tolerances, dataset.times, 1.0
                        )
                        rows = np.empty((dataset.times.size, len(informs)))
                        for col, f in enumerate(fields):
                            rows[:, col] = -interp_space(
                                grid, f.values, dataset.sensor_position
                            )
                        blocks.append(rows)
                    jac = np.vstack(blocks)
                    # rescale from per-relative-change to optimizer coordinates
                    for col, name in enumerate(informs):
                        jac[:, col] *= scale[col] / parameter_scale(model, name)
                    return jac

                res = least_squares(
                    residual_fun,
                    x0=p[idx] / scale,
                    jac=jac_fun if jacobian == "sensitivity" else "2-point",
                    bounds=(lo[idx] / scale, hi[idx] / scale),
                    method="trf",
                    ftol=ftol,
                    xtol=xtol,
                    # stage accuracy only needs to beat the per-cycle
                    # improvement; many cheap cycles converge faster than
                    # few exhaustive ones when the blocks are correlated
                    max_nfev=5,
                )
                p[idx] = np.clip(res.x * scale, lo[idx], hi[idx])
                offset = 0
                for dataset, _ in stage_sets:
                    m_k = dataset.times.size
                    r_k = res.fun[offset:offset + m_k]
                    contrib[id(dataset)] = float(r_k @ r_k)
                    offset += m_k

            current = sum(contrib.values())
            record(current, p)

            # Aitken acceleration of the cycle fixed-point map: correlated
            # stages contract slowly along a shared valley, so when two
            # successive cycle steps are nearly parallel, jump ahead by the
            # geometric-series limit of the remaining steps.
            step = None if p_prev is None else (p - p_prev) / pscale
            if step is not None and step_prev is not None:
                denom = float(step_prev @ step_prev)
                rate = float(step @ step_prev) / denom if denom > 0.0 else 0.0
                if 0.2 < rate < 0.95:
                    p_try = np.clip(p + (p - p_prev) * rate / (1.0 - rate), lo, hi)
                    saved = dict(contrib)
                    try:
                        c_try = full_cost(p_try)
                    except (SolverFailure, DomainError):
                        c_try = float("inf")
                    if np.isfinite(c_try) and c_try < current:
                        record(c_try, p_try)
                        p = p_try
                        current = c_try
                        step = None  # the map restarts from the new point
                    else:
                        contrib.clear()
                        contrib.update(saved)
            p_prev = p.copy()
            step_prev = step

            if previous - current <= ftol * max(previous, 1e-30):
                converged = True
                break
            previous = current
    except _BudgetExhausted:
        pass

    p = best["p"]
    model = _model_at(template, p)
    residuals = []
    for dataset, design, _ in problem.datasets:
        try:
            residuals.append(_dataset_residual(dataset, design, model, grid, tolerances))
        except (SolverFailure, DomainError):
            residuals.append(np.full(dataset.times.size, np.nan))
    # the tracked cost can be slightly stale across stages; report the
    # exact cost at the returned point when it is available
    cost_final = float(sum(float(r @ r) for r in residuals))
    if not np.isfinite(cost_final):
        cost_final = float(best["cost"])
    return EstimationReport(
        estimate=dict(zip(PARAMETERS, (float(v) for v in p))),
        cost_initial=float(cost_initial),
        cost_final=cost_final,
        forward_solve_count=budget.used,
        residuals=tuple(residuals),
        converged=converged,
        cost_trace=tuple(trace),
    )


def residual_diagnostics(dataset: ExperimentDataset, solution: FieldSolution):
    """Residual series, lag-1 autocorrelation and RMS for one dataset.

    The model value is the stored field sampled at the sensor position and
    the dataset's times, converted to humidity fraction.
    """
    if dataset.times.size < 3:
        raise DomainError("at least 3 samples are needed for diagnostics")
    p_sat = solution.scaling.p_ref
    simulated = sample_at(solution, dataset.sensor_position, dataset.times) / p_sat
    r = dataset.readings_fraction(p_sat) - simulated
    rms = float(np.sqrt(np.mean(r**2)))
    a, b = r[:-1], r[1:]
    sa, sb = a - a.mean(), b - b.mean()
    denom = np.sqrt(float(sa @ sa) * float(sb @ sb))
    lag1 = float((sa @ sb) / denom) if denom > 0.0 else 0.0
    return r, lag1, rms


def parameter_cdf(u_value_cdf, u_nominal, theta, p_nominal, p_query):
    """Linearized CDF of a parameter from the measurement-value CDF.

    With the local model u = u_nominal + theta * (p - p_nominal), the
    parameter CDF is the measurement CDF evaluated along that line,
    mirrored when theta is negative.
    """
    if theta == 0.0:
        raise DegenerateSensitivityError("zero sensitivity: parameter unidentifiable")
    f = u_value_cdf(u_nominal + theta * (np.asarray(p_query) - p_nominal))
    return f if theta > 0.0 else 1.0 - f


def parameter_pdf_sigma(theta, sigma_u=DEFAULT_SIGMA_PDF):
    """Standard deviation of the linearized Gaussian parameter PDF."""
    if theta == 0.0:
        raise DegenerateSensitivityError("zero sensitivity: parameter unidentifiable")
    if sigma_u <= 0.0:
        raise DomainError("sigma_u must be positive")
    return sigma_u / abs(theta)


def parameter_pdf(p_query, p_nominal, theta, sigma_u=DEFAULT_SIGMA_PDF):
    """Gaussian PDF of the parameter under the linearized measurement model."""
    sigma_p = parameter_pdf_sigma(theta, sigma_u)
    q = (np.asarray(p_query, dtype=float) - p_nominal) / sigma_p
    return np.exp(-0.5 * q * q) / (sigma_p * np.sqrt(2.0 * np.pi))


def total_measurement_uncertainty(phi, dphi_dx, delta_x, delta_phi_sensor):
    """Combined humidity uncertainty from sensor accuracy and placement.

    Quadrature sum of the sensor term and the position term (local gradient
    times position uncertainty).
    """
    if phi <= 0.0:
        raise DomainError("phi must be positive")
    return float(np.hypot(dphi_dx * delta_x, delta_phi_sensor))


def estimate_h_from_mass_series(times, masses, T_water, T_ambient, phi_ambient, area):
    """Surface vapour transfer coefficient from an evaporation record.

    The flux is the least-squares slope of mass over time divided by the
    exchange area; the driving potential is the gap between saturation at
    the water temperature and the ambient partial pressure.
    """
    t = np.asarray(times, dtype=float)
    m = np.asarray(masses, dtype=float)
    if t.size < 3 or t.shape != m.shape:
        raise DomainError("at least 3 aligned samples are required")
    if area <= 0.0:
        raise DomainError("area must be positive")
    slope = np.polynomial.polynomial.polyfit(t, m, 1)[1]
    g = abs(slope) / area
    denom = saturation_pressure(T_water) - saturation_pressure(T_ambient) * phi_ambient
    if denom <= 0.0:
        raise DomainError("nonpositive vapour pressure gap")
    return float(g / denom)
