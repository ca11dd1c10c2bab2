"""Scaled sensitivity fields of the vapour pressure w.r.t. (d0, d1, a).

The linearised sensitivity PDEs are obtained by differentiating the forward
equation and its boundary conditions with respect to each transport
parameter, including the chain-rule terms through the storage slope c(u)
and the permeability d(u).  They are integrated coupled with the forward
field in one state vector, sharing step-size control; the sensitivity
spatial operator uses central differencing.

Fields are reported as dimensionless ``Theta_m = (sigma_p / sigma_u) *
p_scale_m * d(u/p_ref)/d p_m``, i.e. per relative change of the parameter,
in units of the measurement standard deviation ``sigma_u`` (relative
humidity).  A central finite-difference oracle over two forward solves is
provided for verification.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError
from .integrate import march_segment
from .material import MaterialModel, permeability, saturation_pressure
from .solver import (
    DEFAULT_TOLERANCES,
    BoundaryDesign,
    FieldSolution,
    Grid1D,
    _check_output_times,
    _integrate_segments,
    default_output_times,
    make_scaling,
    solve_forward,
)

PARAMETERS = ("d0", "d1", "a")
_PARAM_CODES = {"d0": _kernels.PARAM_D0, "d1": _kernels.PARAM_D1, "a": _kernels.PARAM_A}

#: Default measurement standard deviation, 2% relative humidity.
DEFAULT_SIGMA_U = 0.02


@dataclass(frozen=True)
class SensitivityField:
    """Dimensionless sensitivity Theta(x, t) for one parameter."""

    parameter: str
    times: np.ndarray = field(compare=False)
    values: np.ndarray = field(compare=False)  # (n_times, n_cells)
    sigma_u: float
    sigma_p: float
    grid: Grid1D


def parameter_scale(model: MaterialModel, parameter: str) -> float:
    """Magnitude used to express sensitivities per relative parameter change.

    The nominal parameter value; for a nominal of zero (e.g. a pure-diffusion
    model) the natural advection scale ``d(1/2) / L`` falls back for ``a``
    and ``d(1/2)`` for the permeability coefficients (with L = 1 m left to
    the caller's grid, the permeability scale is used directly).
    """
    if parameter not in PARAMETERS:
        raise DomainError(f"unknown parameter {parameter!r}")
    tr = model.transport
    value = {"d0": tr.d0, "d1": tr.d1, "a": tr.a}[parameter]
    if value != 0.0:
        return abs(value)
    d_mid = permeability(model, 0.5)
    return d_mid if parameter in ("d0", "d1") else d_mid / 0.08


def _validate_params(params):
    params = tuple(params)
    if not params:
        raise DomainError("at least one parameter label is required")
    for p in params:
        if p not in PARAMETERS:
            raise DomainError(f"unknown parameter {p!r}")
    if len(set(params)) != len(params):
        raise DomainError("duplicate parameter labels")
    return params


def solve_sensitivities(
    model: MaterialModel,
    design: BoundaryDesign,
    grid: Grid1D,
    params=PARAMETERS,
    tolerances=DEFAULT_TOLERANCES,
    output_times=None,
    sigma_u: float = DEFAULT_SIGMA_U,
):
    """Integrate the forward PDE coupled with one sensitivity PDE per label.

    Returns ``(FieldSolution, [SensitivityField, ...])`` in the order of
    ``params``.  All sensitivities start at exactly zero (the initial
    condition does not depend on the parameters).
    """
    params = _validate_params(params)
    if sigma_u <= 0.0:
        raise DomainError("sigma_u must be positive")
    if output_times is None:
        output_times = default_output_times(design)
    out_t = _check_output_times(output_times, design)
    scaling = make_scaling(model, design, grid)
    ps_amb = saturation_pressure(design.ambient_T)

    n = grid.n_cells
    m = len(params)
    pcodes = np.array([_PARAM_CODES[p] for p in params], dtype=np.int64)
    pscales = np.array([parameter_scale(model, p) for p in params])

    fp = np.ascontiguousarray(
        np.polynomial.polynomial.polyder(model.sorption.coeffs), dtype=float
    )
    fpp = np.ascontiguousarray(
        np.polynomial.polynomial.polyder(model.sorption.coeffs, 2), dtype=float
    )
    if fpp.size == 0:
        fpp = np.zeros(1)
    tr = model.transport

    def make_args(phi_inf):
        return (
            grid.dx,
            tr.d0,
            tr.d1,
            tr.a,
            design.h,
            float(ps_amb * phi_inf),
            scaling.p_ref,
            fp,
            fpp,
            scaling.t_ref,
            pcodes,
            pscales,
        )

    y0 = np.zeros((1 + m) * n)
    y0[:n] = model.p_sat * design.initial_phi / scaling.p_ref

    y_hist, acc, rej = _integrate_segments(
        _kernels.coupled_rhs, make_args, design, scaling, y0, tolerances, out_t
    )

    forward = FieldSolution(
        times=out_t.copy(),
        values=y_hist[:, :n] * scaling.p_ref,
        scaling=scaling,
        grid=grid,
        accepted_step_count=acc,
        rejected_step_count=rej,
    )
    fields = []
    for b, p in enumerate(params):
        z = y_hist[:, (1 + b) * n : (2 + b) * n]
        fields.append(
            SensitivityField(
                parameter=p,
                times=out_t.copy(),
                values=z / sigma_u,
                sigma_u=sigma_u,
                sigma_p=1.0,
                grid=grid,
            )
        )
    return forward, fields


def fd_sensitivity_oracle(
    model: MaterialModel,
    design: BoundaryDesign,
    grid: Grid1D,
    parameter: str,
    rel_step: float = 1e-3,
    tolerances=None,
    output_times=None,
    sigma_u: float = DEFAULT_SIGMA_U,
) -> SensitivityField:
    """Central finite-difference reference for one sensitivity field.

    Two forward solves at tightened tolerances, perturbing the parameter by
    ``rel_step`` of its scale in each direction.  Independent of the coupled
    sensitivity integration.
    """
    if parameter not in PARAMETERS:
        raise DomainError(f"unknown parameter {parameter!r}")
    if not 1e-6 <= rel_step <= 1e-2:
        raise DomainError("rel_step must lie in [1e-6, 1e-2]")
    if output_times is None:
        output_times = default_output_times(design)
    if tolerances is None:
        # the finite difference divides out the step, so integration error
        # must stay well below delta * du/dp
        tolerances = (DEFAULT_TOLERANCES[0] / 100.0, DEFAULT_TOLERANCES[1] / 100.0)

    scale = parameter_scale(model, parameter)
    nominal = getattr(model.transport, parameter)
    delta = rel_step * scale

    # a >= 0 is a model invariant: fall back to a one-sided difference when
    # the downward perturbation would leave the admissible range
    lo = nominal - delta
    if parameter == "a" and lo < 0.0:
        lo = nominal
    sols = []
    for value in (nominal + delta, lo):
        perturbed = model.with_transport(**{parameter: value})
        sols.append(
            solve_forward(perturbed, design, grid, tolerances, output_times)
        )
    ps = model.p_sat
    span = (nominal + delta) - lo
    theta = scale * (sols[0].values - sols[1].values) / (span * ps * sigma_u)
    return SensitivityField(
        parameter=parameter,
        times=np.asarray(output_times, dtype=float).copy(),
        values=theta,
        sigma_u=sigma_u,
        sigma_p=1.0,
        grid=grid,
    )


def relative_l2_difference(a: SensitivityField, b: SensitivityField) -> float:
    """|| a - b ||_2 / || b ||_2 over the whole (x, t) output grid."""
    if a.values.shape != b.values.shape:
        raise DomainError("sensitivity fields are on different bases")
    ref = float(np.linalg.norm(b.values))
    if ref == 0.0:
        return float(np.linalg.norm(a.values))
    return float(np.linalg.norm(a.values - b.values)) / ref
