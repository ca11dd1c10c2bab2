"""Design catalog, synthetic sensors and scenario configuration.

The facility can condition a slab at 10, 33 or 75% relative humidity and
switch it between chambers, which yields exactly twenty boundary designs:
four single steps held for 200 h and two three-step families (10-33-75-33
and 10-75-33-75) with per-step durations of 1 to 8 days.  Synthetic
datasets are produced from a forward solve through a first-order sensor lag
and seeded Gaussian noise, so estimation can be exercised end to end
without the physical facility.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .inverse import ExperimentDataset
from .material import MaterialModel, wood_fibre
from .oed import DesignCatalog
from .solver import (
    DEFAULT_TOLERANCES,
    BoundaryDesign,
    Grid1D,
    sample_at,
    solve_forward,
)

_HOUR = 3600.0
_DAY = 86400.0

SINGLE_STEP_IDS = ("s1", "s2", "s3", "s4")
MULTI_STEP_IDS = tuple(f"m{k}" for k in range(1, 17))


@dataclass(frozen=True)
class SensorModel:
    """Humidity sensor: accuracy, first-order response and sampling."""

    noise_sigma: float = 0.02
    response_time: float = 0.0
    sampling_interval: float = 600.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0.0:
            raise DomainError("noise_sigma must be nonnegative")
        if self.sampling_interval <= 0.0:
            raise DomainError("sampling_interval must be positive")
        if self.response_time < 0.0:
            raise DomainError("response_time must be nonnegative")


def catalog() -> DesignCatalog:
    """The twenty boundary designs realisable by the two-chamber facility."""
    designs = [
        BoundaryDesign("s1", 0.10, ((200.0 * _HOUR, 0.33),)),
        BoundaryDesign("s2", 0.10, ((200.0 * _HOUR, 0.75),)),
        BoundaryDesign("s3", 0.33, ((200.0 * _HOUR, 0.75),)),
        BoundaryDesign("s4", 0.75, ((200.0 * _HOUR, 0.33),)),
    ]
    for k in range(1, 9):
        dur = k * _DAY
        designs.append(
            BoundaryDesign(f"m{k}", 0.10, ((dur, 0.33), (dur, 0.75), (dur, 0.33)))
        )
    for k in range(1, 9):
        dur = k * _DAY
        designs.append(
            BoundaryDesign(f"m{8 + k}", 0.10, ((dur, 0.75), (dur, 0.33), (dur, 0.75)))
        )
    return DesignCatalog(designs=tuple(designs))


def resolve_design_id(token: str) -> str:
    """Map a user-supplied design token to a catalog id.

    Accepts the catalog ids directly; bare numbers 1-4 refer to the
    single-step designs.
    """
    token = token.strip().lower()
    if token in SINGLE_STEP_IDS + MULTI_STEP_IDS:
        return token
    if token in ("1", "2", "3", "4"):
        return f"s{token}"
    raise DomainError(
        f"unknown design {token!r}: use s1-s4, m1-m16, or 1-4 for single steps"
    )


def first_order_lag(times, values, response_time: float):
    """Exact first-order low-pass of a sampled signal.

    Treats the input as locally constant over each sampling interval; a
    zero response time returns the input unchanged.
    """
    t = np.asarray(times, dtype=float)
    u = np.asarray(values, dtype=float)
    if response_time == 0.0:
        return u.copy()
    y = np.empty_like(u)
    y[0] = u[0]
    decay = np.exp(-np.diff(t) / response_time)
    for k in range(1, len(u)):
        y[k] = u[k] + (y[k - 1] - u[k]) * decay[k - 1]
    return y


def generate_synthetic_dataset(
    model: MaterialModel,
    design: BoundaryDesign,
    grid: Grid1D,
    sensor_x: float,
    sensor: SensorModel,
    tolerances=DEFAULT_TOLERANCES,
) -> ExperimentDataset:
    """Simulate one sensor record: solve, sample, lag-filter, add noise.

    Deterministic per sensor seed; readings are clipped to the open (0, 1)
    humidity interval.
    """
    if not 0.0 < sensor_x < grid.length:
        raise DomainError("sensor_x must lie strictly inside (0, L)")
    total = design.total_duration
    n = int(np.floor(total / sensor.sampling_interval))
    if n < 1:
        raise DomainError("sampling interval longer than the experiment")
    times = sensor.sampling_interval * np.arange(1, n + 1)
    solve_times = np.concatenate(([0.0], times))
    solution = solve_forward(model, design, grid, tolerances, solve_times)
    ideal = sample_at(solution, sensor_x, solve_times) / model.p_sat
    lagged = first_order_lag(solve_times, ideal, sensor.response_time)[1:]
    rng = np.random.default_rng(sensor.seed)
    noisy = lagged + rng.normal(0.0, sensor.noise_sigma, size=lagged.shape)
    readings = np.clip(noisy, 1e-6, 1.0 - 1e-6)
    return ExperimentDataset(
        design_id=design.id,
        sensor_position=float(sensor_x),
        times=times,
        readings=readings,
        noise_sigma=sensor.noise_sigma,
    )


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one CLI run needs: material, numerics, design, sensor."""

    model: MaterialModel
    grid: Grid1D
    tolerances: tuple
    design: BoundaryDesign
    sensor_x: float
    sensor: SensorModel
    out_dir: str = "."


def _get_float(section, key, fallback):
    raw = section.get(key)
    return fallback if raw is None else float(raw)


def load_scenario(path: str) -> ScenarioConfig:
    """Read a flat INI scenario file.

    Sections (all optional except [design] unless a design id is given on
    the command line): [material] d0/d1/a/temperature, [grid] n_cells and
    length, [solver] rtol and atol, [design] id or initial_phi plus
    schedule ("seconds:phi, seconds:phi, ..."), [sensor] x, noise_sigma,
    response_time, sampling_interval, seed, [output] dir.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    parser = configparser.ConfigParser()
    parser.read(path)

    base = wood_fibre()
    mat = parser["material"] if parser.has_section("material") else {}
    model = base.with_transport(
        d0=_get_float(mat, "d0", base.transport.d0),
        d1=_get_float(mat, "d1", base.transport.d1),
        a=_get_float(mat, "a", base.transport.a),
    )
    temperature = _get_float(mat, "temperature", model.temperature)
    if temperature != model.temperature:
        model = MaterialModel(
            sorption=model.sorption,
            transport=model.transport,
            temperature=temperature,
        )

    gsec = parser["grid"] if parser.has_section("grid") else {}
    grid = Grid1D(
        n_cells=int(_get_float(gsec, "n_cells", 100)),
        length=_get_float(gsec, "length", 0.08),
    )

    ssec = parser["solver"] if parser.has_section("solver") else {}
    tolerances = (
        _get_float(ssec, "rtol", DEFAULT_TOLERANCES[0]),
        _get_float(ssec, "atol", DEFAULT_TOLERANCES[1]),
    )

    dsec = parser["design"] if parser.has_section("design") else {}
    h = _get_float(dsec, "h", 9e-9)
    if "id" in dsec:
        design = catalog().get(resolve_design_id(dsec["id"]))
        if h != design.h:
            design = BoundaryDesign(design.id, design.initial_phi, design.schedule, h)
    elif "schedule" in dsec:
        steps = []
        for chunk in dsec["schedule"].split(","):
            dur, phi = chunk.split(":")
            steps.append((float(dur), float(phi)))
        design = BoundaryDesign(
            dsec.get("name", "custom"),
            float(dsec.get("initial_phi", 0.10)),
            tuple(steps),
            h,
        )
    else:
        raise DomainError("scenario [design] needs an 'id' or a 'schedule'")

    sn = parser["sensor"] if parser.has_section("sensor") else {}
    sensor = SensorModel(
        noise_sigma=_get_float(sn, "noise_sigma", 0.02),
        response_time=_get_float(sn, "response_time", 0.0),
        sampling_interval=_get_float(sn, "sampling_interval", 600.0),
        seed=int(_get_float(sn, "seed", 0)),
    )
    sensor_x = _get_float(sn, "x", 0.05)

    osec = parser["output"] if parser.has_section("output") else {}
    out_dir = osec.get("dir", ".") if hasattr(osec, "get") else "."
    return ScenarioConfig(
        model=model,
        grid=grid,
        tolerances=tolerances,
        design=design,
        sensor_x=sensor_x,
        sensor=sensor,
        out_dir=out_dir,
    )
