"""Moisture material model: sorption curve, permeability and advection.

The driving potential of the transport equation is the vapour pressure
``P_v``; the relative humidity is ``phi = P_v / P_s(T)``.  A material is
described by

* a sorption curve ``f(phi)`` [kg/m^3], the equilibrium moisture content,
  here a polynomial with zero constant term, strictly increasing on [0, 1];
* a moisture permeability ``d(phi) = d0 + d1 * phi`` [s];
* a constant advection coefficient ``a = v / (R_v * T)`` [s/m].

The moisture storage coefficient follows as ``c(phi) = f'(phi) / P_s(T)``
[kg/(m^3 Pa)].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvariantViolation

#: Specific gas constant of water vapour [J/(kg K)].
RV_WATER = 461.5

#: Default facility temperature, 24.5 degC [K].
DEFAULT_TEMPERATURE = 297.65

_MONOTONE_GRID = np.linspace(0.0, 1.0, 1001)


def saturation_pressure(temperature):
    """Saturation vapour pressure [Pa] via a Magnus-form correlation.

    ``P_s = 611.85 * exp(17.269 * theta / (theta + 237.3))`` with ``theta``
    the temperature in Celsius.  Valid for 233 K < T < 373 K; other standard
    correlations agree within ~1% over the humidity-lab range.
    """
    t = np.asarray(temperature, dtype=float)
    if np.any(t <= 233.0) or np.any(t >= 373.0):
        raise DomainError(f"temperature {temperature!r} K outside (233, 373)")
    theta = t - 273.15
    ps = 611.85 * np.exp(17.269 * theta / (theta + 237.3))
    return float(ps) if np.isscalar(temperature) else ps


@dataclass(frozen=True)
class SorptionCurve:
    """Polynomial sorption isotherm ``f(phi) = sum_k w_k phi^k`` [kg/m^3].

    ``coeffs`` is ordered from the constant term upward.  The constant term
    must be zero (a dry material holds no moisture) and the curve must be
    strictly increasing on [0, 1].
    """

    coeffs: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if len(coeffs) < 2 or len(coeffs) > 6:
            raise InvariantViolation("sorption polynomial degree must be in [1, 5]")
        if coeffs[0] != 0.0:
            raise InvariantViolation("sorption curve must satisfy f(0) = 0")
        if np.min(self.slope(_MONOTONE_GRID)) <= 0.0:
            raise InvariantViolation("sorption curve must be strictly increasing on [0, 1]")

    def value(self, phi):
        """Moisture content f(phi) [kg/m^3]."""
        return np.polynomial.polynomial.polyval(phi, self.coeffs)

    def slope(self, phi):
        """First derivative f'(phi) [kg/m^3]."""
        der = np.polynomial.polynomial.polyder(self.coeffs)
        return np.polynomial.polynomial.polyval(phi, der)

    def curvature(self, phi):
        """Second derivative f''(phi) [kg/m^3]."""
        der2 = np.polynomial.polynomial.polyder(self.coeffs, 2)
        return np.polynomial.polynomial.polyval(phi, der2)


@dataclass(frozen=True)
class TransportCoefficients:
    """Permeability line ``d(phi) = d0 + d1 phi`` [s] and advection ``a`` [s/m]."""

    d0: float
    d1: float
    a: float

    def __post_init__(self):
        if self.d0 <= 0.0:
            raise InvariantViolation("d0 must be positive")
        if self.d0 + self.d1 <= 0.0:
            raise InvariantViolation("d(phi) must stay positive on [0, 1]")
        if self.a < 0.0:
            raise InvariantViolation("advection coefficient must be non-negative")


@dataclass(frozen=True)
class MaterialModel:
    """Immutable bundle of material properties at a fixed temperature."""

    sorption: SorptionCurve
    transport: TransportCoefficients
    temperature: float = DEFAULT_TEMPERATURE
    gas_constant_rv: float = RV_WATER

    def __post_init__(self):
        if self.temperature <= 0.0:
            raise InvariantViolation("temperature must be positive (kelvin)")
        # fail early if the saturation correlation does not cover T
        saturation_pressure(self.temperature)

    @property
    def p_sat(self) -> float:
        """Saturation pressure at the model temperature [Pa]."""
        return saturation_pressure(self.temperature)

    def with_transport(self, d0=None, d1=None, a=None) -> "MaterialModel":
        """Copy with selected transport coefficients replaced."""
        t = self.transport
        return MaterialModel(
            sorption=self.sorption,
            transport=TransportCoefficients(
                d0=t.d0 if d0 is None else d0,
                d1=t.d1 if d1 is None else d1,
                a=t.a if a is None else a,
            ),
            temperature=self.temperature,
            gas_constant_rv=self.gas_constant_rv,
        )


def _check_phi(phi):
    p = np.asarray(phi, dtype=float)
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise DomainError(f"relative humidity {phi!r} outside [0, 1]")
    return p


def permeability(model: MaterialModel, phi):
    """Moisture permeability d(phi) = d0 + d1 phi [s]."""
    p = _check_phi(phi)
    d = model.transport.d0 + model.transport.d1 * p
    return float(d) if np.isscalar(phi) else d


def storage_coefficient(model: MaterialModel, phi):
    """Moisture storage coefficient c(phi) = f'(phi) / P_s(T) [kg/(m^3 Pa)]."""
    p = _check_phi(phi)
    c = model.sorption.slope(p) / model.p_sat
    if np.any(np.asarray(c) <= 0.0):
        raise InvariantViolation("storage coefficient must be positive")
    return float(c) if np.isscalar(phi) else c


def advection_to_velocity(model: MaterialModel) -> float:
    """Mass average velocity v = a * R_v * T [m/s], a derived diagnostic."""
    return model.transport.a * model.gas_constant_rv * model.temperature


def velocity_to_advection(model: MaterialModel, velocity: float) -> float:
    """Advection coefficient a = v / (R_v * T) [s/m] for a given velocity."""
    return velocity / (model.gas_constant_rv * model.temperature)


def wood_fibre() -> MaterialModel:
    """A-priori wood fibre properties from cup-method characterisation.

    Sorption ``f(phi) = 40 phi^3 - 49 phi^2 + 27.02 phi`` kg/m^3,
    permeability ``d = 2.33e-11 + 5.68e-11 phi`` s, advection
    ``a = 7.2e-11`` s/m, at 24.5 degC.
    """
    return MaterialModel(
        sorption=SorptionCurve((0.0, 27.02, -49.0, 40.0)),
        transport=TransportCoefficients(d0=2.33e-11, d1=5.68e-11, a=7.2e-11),
        temperature=DEFAULT_TEMPERATURE,
    )
