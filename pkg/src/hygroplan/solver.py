"""Dimensionless 1D forward solver for nonlinear moisture convection-diffusion.

Finite-volume in space on a uniform grid with Scharfetter-Gummel
(exponentially fitted) face fluxes, Robin inlet at x = 0, zero total flux at
x = L, integrated by the embedded adaptive Runge-Kutta pair in
:mod:`hygroplan.integrate`.  The integration state is kept O(1): vapour
pressure scaled by ``p_ref = P_s(T)`` and time by a diffusive reference
``t_ref = L^2 c(phi_mid) / d(phi_mid)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError, InvariantViolation, SolverFailure
from .integrate import march_segment
from .material import (
    MaterialModel,
    permeability,
    saturation_pressure,
    storage_coefficient,
)

DEFAULT_TOLERANCES = (1e-6, 1e-8)
DEFAULT_N_OUTPUT = 2001


@dataclass(frozen=True)
class Grid1D:
    """Uniform finite-volume grid on [0, length]."""

    n_cells: int
    length: float

    def __post_init__(self):
        if self.n_cells < 10:
            raise InvariantViolation("grid needs at least 10 cells")
        if self.length <= 0.0:
            raise InvariantViolation("grid length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def cell_centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def face_positions(self) -> np.ndarray:
        return np.arange(self.n_cells + 1) * self.dx


@dataclass(frozen=True)
class BoundaryDesign:
    """Piecewise-constant ambient humidity schedule at the exchange surface.

    ``schedule`` is a sequence of ``(duration_s, ambient_phi)`` segments
    applied after time zero; the slab starts equilibrated at ``initial_phi``.
    ``h`` is the surface vapour transfer coefficient [s/m].
    """

    id: str
    initial_phi: float
    schedule: tuple[tuple[float, float], ...]
    h: float = 9e-9
    ambient_T: float = 297.65

    def __post_init__(self):
        object.__setattr__(
            self,
            "schedule",
            tuple((float(d), float(p)) for d, p in self.schedule),
        )
        if not self.schedule:
            raise InvariantViolation("schedule must have at least one segment")
        for dur, phi in self.schedule:
            if dur <= 0.0:
                raise InvariantViolation("segment durations must be positive")
            if not 0.0 < phi < 1.0:
                raise InvariantViolation("ambient humidities must lie in (0, 1)")
        if not 0.0 < self.initial_phi < 1.0:
            raise InvariantViolation("initial humidity must lie in (0, 1)")
        if self.h < 0.0:
            raise InvariantViolation("transfer coefficient must be non-negative")

    @property
    def total_duration(self) -> float:
        return sum(d for d, _ in self.schedule)

    def ambient_phi(self, t: float) -> float:
        """Ambient relative humidity at time t >= 0."""
        if t < 0.0:
            return self.initial_phi
        acc = 0.0
        for dur, phi in self.schedule:
            acc += dur
            if t < acc:
                return phi
        return self.schedule[-1][1]

    def segment_times(self) -> np.ndarray:
        """Breakpoints 0, t1, ..., total_duration of the schedule."""
        return np.concatenate([[0.0], np.cumsum([d for d, _ in self.schedule])])

    @property
    def phi_levels(self) -> tuple[float, ...]:
        return (self.initial_phi,) + tuple(p for _, p in self.schedule)


@dataclass(frozen=True)
class Scaling:
    """Reference scales making the integrated state O(1)."""

    p_ref: float
    t_ref: float
    x_ref: float

    def __post_init__(self):
        if min(self.p_ref, self.t_ref, self.x_ref) <= 0.0:
            raise InvariantViolation("reference scales must be positive")


@dataclass(frozen=True)
class FieldSolution:
    """Vapour pressure P_v(x, t) on the output grid, plus solve metadata."""

    times: np.ndarray = field(compare=False)
    values: np.ndarray = field(compare=False)  # (n_times, n_cells) [Pa]
    scaling: Scaling
    grid: Grid1D
    accepted_step_count: int
    rejected_step_count: int


def make_scaling(model: MaterialModel, design: BoundaryDesign, grid: Grid1D) -> Scaling:
    """Diffusive reference scales for a scenario.

    ``phi_mid`` is the mean of the initial and scheduled humidity levels, so
    the time scale tracks the humidity range actually traversed.
    """
    phi_mid = float(np.mean(design.phi_levels))
    c_mid = storage_coefficient(model, phi_mid)
    d_mid = permeability(model, phi_mid)
    return Scaling(
        p_ref=model.p_sat,
        t_ref=grid.length**2 * c_mid / d_mid,
        x_ref=grid.length,
    )


def sg_face_flux(u_left: float, u_right: float, d_face: float, a: float, dx: float):
    """Scharfetter-Gummel face flux [kg/(m^2 s)].

    ``flux = (d/dx) * (B(-Pe) u_left - B(Pe) u_right)`` with the grid Peclet
    number ``Pe = a dx / d`` and Bernoulli function ``B(z) = z/(exp(z)-1)``.
    At Pe = 0 this is exactly the central diffusive difference.
    """
    if np.any(np.asarray(d_face) <= 0.0) or dx <= 0.0:
        raise DomainError("face permeability and spacing must be positive")
    pe = a * dx / np.asarray(d_face, dtype=float)
    return (d_face / dx) * (_bernoulli(-pe) * u_left - _bernoulli(pe) * u_right)


def _bernoulli(z):
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-5
    zs = np.where(small, 0.0, z)
    with np.errstate(invalid="ignore"):
        out = np.where(small, 1.0 - 0.5 * z + z * z / 12.0, np.divide(
            zs, np.expm1(zs), out=np.ones_like(zs), where=~small))
    return out if out.ndim else float(out)


def _ambient_pressure(design: BoundaryDesign, phi: float) -> float:
    return saturation_pressure(design.ambient_T) * phi


def assemble_rhs(state, model, design, grid, t, source=None):
    """Semi-discrete time derivative du/dt [Pa/s] of the cell states.

    Reference implementation of the same finite-volume operator the compiled
    kernels integrate; ``source`` is an optional volumetric moisture source
    [kg/(m^3 s)] per cell used for verification problems.
    """
    u = np.asarray(state, dtype=float)
    if u.ndim != 1 or u.shape[0] != grid.n_cells:
        raise DomainError("state length must match the grid")
    if np.any(u <= 0.0):
        raise DomainError("vapour pressure state must be positive")
    ps = model.p_sat
    phi = u / ps
    c = storage_coefficient(model, np.clip(phi, 0.0, 1.0))
    tr = model.transport
    dx = grid.dx

    j = np.empty(grid.n_cells + 1)
    # drift is oriented toward the exposed surface (negative x), which keeps
    # the scheme dissipative and the field within the ambient range
    pamb = _ambient_pressure(design, design.ambient_phi(t))
    db = tr.d0 + tr.d1 * phi[0]
    beta = (9.0 * u[0] - u[1]) / (3.0 * dx)
    q = 8.0 * db / (3.0 * dx) - tr.a + design.h
    us = (design.h * pamb + db * beta) / q
    j[0] = design.h * (pamb - us)
    d_face = tr.d0 + 0.5 * tr.d1 * (phi[:-1] + phi[1:])
    j[1:-1] = sg_face_flux(u[:-1], u[1:], d_face, -tr.a, dx)
    j[-1] = 0.0

    rhs = (j[:-1] - j[1:]) / (dx * c)
    if source is not None:
        rhs = rhs + np.asarray(source, dtype=float) / c
    return rhs


def _forward_args(model, design, grid, scaling, pamb, source=None):
    fp = np.ascontiguousarray(
        np.polynomial.polynomial.polyder(model.sorption.coeffs), dtype=float
    )
    if source is None:
        src = np.zeros(grid.n_cells)
    else:
        src = np.ascontiguousarray(source, dtype=float)
    tr = model.transport
    return (
        grid.dx,
        tr.d0,
        tr.d1,
        tr.a,
        design.h,
        float(pamb),
        scaling.p_ref,
        fp,
        src,
        scaling.t_ref,
    )


def default_output_times(design: BoundaryDesign, n: int = DEFAULT_N_OUTPUT) -> np.ndarray:
    return np.linspace(0.0, design.total_duration, n)


def _check_output_times(output_times, design):
    out = np.asarray(output_times, dtype=float)
    if out.ndim != 1 or out.size == 0:
        raise DomainError("output_times must be a non-empty 1D sequence")
    if np.any(np.diff(out) <= 0.0):
        raise DomainError("output_times must be strictly increasing")
    if out[0] < 0.0 or out[-1] > design.total_duration * (1 + 1e-12):
        raise DomainError("output_times must lie within the schedule duration")
    return out


def _integrate_segments(rhs, make_args, design, scaling, y0, tolerances, out_t):
    """Run the compiled integrator over each constant-ambient segment."""
    rtol, atol = tolerances
    seg = design.segment_times()
    y = np.ascontiguousarray(y0, dtype=float)
    rows = []
    acc_total = 0
    rej_total = 0
    for k in range(len(seg) - 1):
        t_lo, t_hi = seg[k], seg[k + 1]
        if k == 0:
            mask = (out_t >= t_lo) & (out_t <= t_hi)
        else:
            mask = (out_t > t_lo) & (out_t <= t_hi)
        args = make_args(design.schedule[k][1])
        try:
            y_out, acc, rej = march_segment(
                rhs,
                args,
                t_lo / scaling.t_ref,
                t_hi / scaling.t_ref,
                y,
                rtol,
                atol,
                out_t[mask] / scaling.t_ref,
            )
        except SolverFailure as exc:
            raise SolverFailure(
                str(exc),
                last_time=(exc.last_time or 0.0) * scaling.t_ref,
            ) from exc
        rows.append(y_out)
        acc_total += acc
        rej_total += rej
    return np.vstack(rows), acc_total, rej_total


def solve_forward(
    model: MaterialModel,
    design: BoundaryDesign,
    grid: Grid1D,
    tolerances=DEFAULT_TOLERANCES,
    output_times=None,
    source=None,
) -> FieldSolution:
    """Integrate the forward problem and report it at ``output_times``.

    Deterministic for fixed inputs and tolerances.  Raises
    :class:`SolverFailure` (carrying the last valid time) if the step size
    underflows.
    """
    if output_times is None:
        output_times = default_output_times(design)
    out_t = _check_output_times(output_times, design)
    scaling = make_scaling(model, design, grid)
    ps_amb = saturation_pressure(design.ambient_T)

    y0 = np.full(grid.n_cells, model.p_sat * design.initial_phi / scaling.p_ref)

    def make_args(phi_inf):
        return _forward_args(model, design, grid, scaling, ps_amb * phi_inf, source)

    y_hist, acc, rej = _integrate_segments(
        _kernels.forward_rhs, make_args, design, scaling, y0, tolerances, out_t
    )
    values = y_hist * scaling.p_ref
    if np.any(values <= 0.0):
        raise InvariantViolation("solution lost positivity")
    if source is None and np.any(values > 1.05 * model.p_sat):
        raise InvariantViolation("solution exceeds saturation beyond tolerance")
    return FieldSolution(
        times=out_t.copy(),
        values=values,
        scaling=scaling,
        grid=grid,
        accepted_step_count=acc,
        rejected_step_count=rej,
    )


def _interp_time(times, values, query_times):
    q = np.atleast_1d(np.asarray(query_times, dtype=float))
    if np.any(q < times[0] - 1e-9) or np.any(q > times[-1] * (1 + 1e-12) + 1e-9):
        raise DomainError("query times outside the stored range")
    if len(times) == 1:
        return np.repeat(values, len(q), axis=0)
    idx = np.clip(np.searchsorted(times, q), 1, len(times) - 1)
    t0 = times[idx - 1]
    t1 = times[idx]
    w = np.clip((q - t0) / (t1 - t0), 0.0, 1.0)
    return (1.0 - w)[:, None] * values[idx - 1] + w[:, None] * values[idx]


def interp_space(grid: Grid1D, values, x):
    """Linear interpolation between cell centres (constant beyond the outer
    centres), applied along the last axis of ``values``."""
    x_arr = np.asarray(x, dtype=float)
    scalar = x_arr.ndim == 0
    xq = np.atleast_1d(x_arr)
    if np.any(xq < 0.0) or np.any(xq > grid.length):
        raise DomainError(f"position {x} outside [0, {grid.length}]")
    centers = grid.cell_centers
    k = np.clip(np.searchsorted(centers, xq), 1, len(centers) - 1)
    x0, x1 = centers[k - 1], centers[k]
    w = np.clip((xq - x0) / (x1 - x0), 0.0, 1.0)
    out = (1.0 - w) * values[..., k - 1] + w * values[..., k]
    return out[..., 0] if scalar else out


def sample_at(solution: FieldSolution, x: float, times) -> np.ndarray:
    """Vapour pressure at position x [m] and the given times [s]."""
    vt = _interp_time(solution.times, solution.values, times)
    return interp_space(solution.grid, vt, x)
