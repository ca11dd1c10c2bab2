"""Command-line entry point.

Subcommands: simulate, sensitivity, oed, sweep, synth, estimate, pdf.
Every subcommand writes plot-ready CSV files (no timestamps, fixed "%.12g"
number format), so identical configs and seeds give byte-identical outputs.
Exit codes: 0 success, 1 domain error, 2 solver or estimation failure,
64 usage error or missing configuration file.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import DomainError, EstimationError, SolverFailure
from .harness import (
    MULTI_STEP_IDS,
    SINGLE_STEP_IDS,
    SensorModel,
    catalog,
    generate_synthetic_dataset,
    load_scenario,
    resolve_design_id,
)
from .inverse import (
    EstimationProblem,
    ExperimentDataset,
    estimate,
    parameter_pdf,
    parameter_pdf_sigma,
)
from .material import wood_fibre
from .oed import prior_sweep, search_optimal_plan
from .sensitivity import PARAMETERS, solve_sensitivities
from .solver import (
    DEFAULT_TOLERANCES,
    Grid1D,
    interp_space,
    sample_at,
    solve_forward,
)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_SOLVER = 2
EXIT_USAGE = 64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; the contract wants 64
    def error(self, message):
        raise _UsageError(message)


def _fmt(value):
    if isinstance(value, str):
        return value
    return "%.12g" % float(value)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _parse_params(spec: str):
    params = tuple(tok.strip() for tok in spec.split(",") if tok.strip())
    for p in params:
        if p not in PARAMETERS:
            raise DomainError(f"unknown parameter {p!r}")
    if not params:
        raise DomainError("empty parameter list")
    return params


def _parse_designs(spec: str):
    spec = spec.strip().lower()
    if spec == "single":
        return SINGLE_STEP_IDS
    if spec == "multi":
        return MULTI_STEP_IDS
    if spec == "all":
        return SINGLE_STEP_IDS + MULTI_STEP_IDS
    return tuple(resolve_design_id(tok) for tok in spec.split(",") if tok.strip())


def _parse_assignments(spec: str):
    out = {}
    for tok in spec.split(","):
        tok = tok.strip()
        if not tok:
            continue
        name, _, raw = tok.partition("=")
        if name not in PARAMETERS:
            raise DomainError(f"unknown parameter {name!r}")
        out[name] = float(raw)
    return out


def _model_from(args):
    model = wood_fibre()
    if getattr(args, "material", None):
        model = model.with_transport(**_parse_assignments(args.material))
    return model


def _grid_from(args):
    return Grid1D(n_cells=args.n_cells, length=args.length)


def _out_path(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _cmd_simulate(args):
    if args.config:
        sc = load_scenario(args.config)
        model, grid, tolerances = sc.model, sc.grid, sc.tolerances
        design, sensor_x = sc.design, sc.sensor_x
    else:
        if args.design is None:
            raise _UsageError("simulate needs --design or --config")
        model = _model_from(args)
        grid = _grid_from(args)
        tolerances = DEFAULT_TOLERANCES
        design = catalog().get(resolve_design_id(args.design))
        sensor_x = args.sensor_x
    times = np.arange(0.0, design.total_duration + 0.5 * args.dt, args.dt)
    solution = solve_forward(model, design, grid, tolerances, times)
    phi = sample_at(solution, sensor_x, times) / model.p_sat
    path = _out_path(args, f"simulate_{design.id}.csv")
    _write_csv(path, ["time_s", "phi"], zip(times, phi))
    print(path)
    return EXIT_OK


def _cmd_sensitivity(args):
    model = _model_from(args)
    grid = _grid_from(args)
    design = catalog().get(resolve_design_id(args.design))
    params = _parse_params(args.params)
    times = np.arange(0.0, design.total_duration + 0.5 * args.dt, args.dt)
    _, fields = solve_sensitivities(
        model, design, grid, params, output_times=times
    )
    cols = [times]
    for f in fields:
        cols.append(interp_space(grid, f.values, args.sensor_x))
    path = _out_path(args, f"sensitivity_{design.id}.csv")
    _write_csv(
        path, ["time_s"] + [f"theta_{p}" for p in params], zip(*cols)
    )
    print(path)
    return EXIT_OK


def _rank_designs(model, design_ids, params, grid, jobs):
    # one coupled solve per design; evaluation order never affects output
    # order because results are re-sorted by the criterion afterwards
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(
                pool.map(
                    lambda did: search_optimal_plan(model, (did,), params, grid=grid),
                    design_ids,
                )
            )
        results = [r for chunk in chunks for r in chunk]
        results.sort(key=lambda r: (-r.psi, r.plan.design_id))
        return results
    return search_optimal_plan(model, design_ids, params, grid=grid)


def _cmd_oed(args):
    model = _model_from(args)
    grid = _grid_from(args)
    params = _parse_params(args.params)
    design_ids = _parse_designs(args.designs)
    results = _rank_designs(model, design_ids, params, grid, args.jobs)
    rows = []
    for rank, r in enumerate(results, start=1):
        row = [rank, r.plan.design_id, r.plan.sensor_positions[0], r.psi]
        for i in range(len(params)):
            for j in range(i + 1, len(params)):
                row.append(r.correlation[i, j])
        rows.append(row)
    header = ["rank", "design_id", "x_opt_m", "psi"]
    for i in range(len(params)):
        for j in range(i + 1, len(params)):
            header.append(f"corr_{params[i]}_{params[j]}")
    path = _out_path(args, "oed_ranking.csv")
    _write_csv(path, header, rows)
    print(path)
    return EXIT_OK


def _cmd_sweep(args):
    model = _model_from(args)
    grid = _grid_from(args)
    params = _parse_params(args.params)
    design_ids = _parse_designs(args.designs)
    if args.box:
        box = {}
        for tok in args.box.split(","):
            name, lo, hi = tok.strip().split(":")
            if name not in PARAMETERS:
                raise DomainError(f"unknown parameter {name!r}")
            box[name] = (float(lo), float(hi))
    else:
        tr = model.transport
        nominal = {"d0": tr.d0, "d1": tr.d1, "a": tr.a}
        box = {p: (0.9 * nominal[p], 1.1 * nominal[p]) for p in params}
    result = prior_sweep(model, box, args.n_samples, design_ids, params, grid=grid)
    path = _out_path(args, "sweep_winners.csv")
    _write_csv(
        path,
        ["design_id", "wins", "n_samples", "n_failures"],
        [
            [design_id, wins, result.n_samples, len(result.failures)]
            for design_id, wins in result.winner_counts
        ],
    )
    pos_path = _out_path(args, "sweep_positions.csv")
    _write_csv(
        pos_path,
        ["sample", "x_opt_m"],
        list(enumerate(result.optimal_positions)),
    )
    print(path)
    print(pos_path)
    return EXIT_OK


def _cmd_synth(args):
    if args.config:
        sc = load_scenario(args.config)
        model, grid, design = sc.model, sc.grid, sc.design
        sensor_x, sensor = sc.sensor_x, sc.sensor
        tolerances = sc.tolerances
    else:
        if args.design is None:
            raise _UsageError("synth needs --design or --config")
        model = _model_from(args)
        grid = _grid_from(args)
        design = catalog().get(resolve_design_id(args.design))
        sensor_x = args.sensor_x
        sensor = SensorModel(
            noise_sigma=args.noise_sigma,
            response_time=args.response_time,
            sampling_interval=args.sampling_interval,
            seed=args.seed,
        )
        tolerances = DEFAULT_TOLERANCES
    if args.seed is not None and sensor.seed != args.seed:
        sensor = SensorModel(
            noise_sigma=sensor.noise_sigma,
            response_time=sensor.response_time,
            sampling_interval=sensor.sampling_interval,
            seed=args.seed,
        )
    dataset = generate_synthetic_dataset(
        model, design, grid, sensor_x, sensor, tolerances
    )
    path = _out_path(args, f"synth_{design.id}.csv")
    _write_csv(path, ["time_s", "reading"], zip(dataset.times, dataset.readings))
    print(path)
    return EXIT_OK


def _read_dataset(spec: str):
    # FILE:DESIGN:X:PARAMS, e.g. run1.csv:s2:0.0796:d0 or run2.csv:m16:0.05:d1,a
    parts = spec.rsplit(":", 3)
    if len(parts) != 4:
        raise _UsageError(
            "--dataset takes FILE:DESIGN:SENSOR_X:PARAMS (params comma-joined)"
        )
    path, design_token, x_raw, informs_raw = parts
    if not os.path.isfile(path):
        raise _UsageError(f"dataset file not found: {path}")
    design = catalog().get(resolve_design_id(design_token))
    informs = _parse_params(informs_raw)
    times, readings = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            try:
                t = float(row[0])
            except ValueError:
                continue  # header line
            times.append(t)
            readings.append(float(row[1]))
    dataset = ExperimentDataset(
        design_id=design.id,
        sensor_position=float(x_raw),
        times=np.asarray(times),
        readings=np.asarray(readings),
    )
    return dataset, design, informs


def _cmd_estimate(args):
    model = _model_from(args)
    grid = _grid_from(args)
    triples = tuple(_read_dataset(spec) for spec in args.dataset)
    tr = model.transport
    guess = {"d0": tr.d0, "d1": tr.d1, "a": tr.a}
    if args.guess:
        guess.update(_parse_assignments(args.guess))
    bounds = None
    if args.bounds:
        bounds = {}
        for tok in args.bounds.split(","):
            name, lo, hi = tok.strip().split(":")
            bounds[name] = (float(lo), float(hi))
    problem = EstimationProblem(
        datasets=triples,
        model_template=model,
        initial_guess=guess,
        bounds=bounds,
    )
    report = estimate(
        problem,
        grid=grid,
        max_forward_solves=args.max_forward_solves,
    )
    path = _out_path(args, "estimate.csv")
    _write_csv(
        path,
        ["parameter", "value"],
        list(report.estimate.items())
        + [
            ("cost_initial", report.cost_initial),
            ("cost_final", report.cost_final),
            ("forward_solves", report.forward_solve_count),
            ("converged", int(report.converged)),
        ],
    )
    for k, (dataset, _, _) in enumerate(triples):
        res_path = _out_path(args, f"residuals_{k}_{dataset.design_id}.csv")
        _write_csv(
            res_path,
            ["time_s", "residual"],
            zip(dataset.times, report.residuals[k]),
        )
    print(path)
    return EXIT_OK


def _cmd_pdf(args):
    sigma_p = parameter_pdf_sigma(args.theta, args.sigma_u)
    lo = args.p_nominal - 5.0 * sigma_p
    hi = args.p_nominal + 5.0 * sigma_p
    p = np.linspace(lo, hi, args.n_points)
    density = parameter_pdf(p, args.p_nominal, args.theta, args.sigma_u)
    path = _out_path(args, "pdf.csv")
    _write_csv(path, ["p", "density"], zip(p, density))
    print(path)
    return EXIT_OK


def _add_common(parser):
    parser.add_argument("--material", help="override transport, e.g. d0=4e-11,a=8e-10")
    parser.add_argument("--n-cells", type=int, default=100)
    parser.add_argument("--length", type=float, default=0.08)


def build_parser():
    parser = _Parser(prog="hygroplan", description=__doc__)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out-dir", default=".")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("simulate", help="forward solve sampled at one position")
    _add_common(p)
    p.add_argument("--config")
    p.add_argument("--design")
    p.add_argument("--sensor-x", type=float, default=0.05)
    p.add_argument("--dt", type=float, default=3600.0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sensitivity", help="scaled sensitivities at one position")
    _add_common(p)
    p.add_argument("--design", required=True)
    p.add_argument("--sensor-x", type=float, default=0.05)
    p.add_argument("--params", default="d0,d1,a")
    p.add_argument("--dt", type=float, default=3600.0)
    p.set_defaults(func=_cmd_sensitivity)

    p = sub.add_parser("oed", help="rank designs by the D-criterion")
    _add_common(p)
    p.add_argument("--params", default="d0,d1,a")
    p.add_argument("--designs", default="all")
    p.set_defaults(func=_cmd_oed)

    p = sub.add_parser("sweep", help="design-ranking stability over a prior box")
    _add_common(p)
    p.add_argument("--params", default="d0,d1,a")
    p.add_argument("--designs", default="single")
    p.add_argument("--n-samples", type=int, default=8)
    p.add_argument("--box", help="name:lo:hi, comma separated")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("synth", help="synthetic noisy sensor dataset")
    _add_common(p)
    p.add_argument("--config")
    p.add_argument("--design")
    p.add_argument("--sensor-x", type=float, default=0.05)
    p.add_argument("--noise-sigma", type=float, default=0.02)
    p.add_argument("--response-time", type=float, default=0.0)
    p.add_argument("--sampling-interval", type=float, default=600.0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("estimate", help="fit transport parameters to datasets")
    _add_common(p)
    p.add_argument(
        "--dataset",
        action="append",
        required=True,
        metavar="FILE:DESIGN:SENSOR_X:PARAMS",
    )
    p.add_argument("--guess", help="starting point, e.g. d0=2e-11,d1=5e-11")
    p.add_argument("--bounds", help="name:lo:hi, comma separated")
    p.add_argument("--max-forward-solves", type=int, default=500)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("pdf", help="linearized parameter density")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--sigma-u", type=float, default=0.0015)
    p.add_argument("--p-nominal", type=float, required=True)
    p.add_argument("--n-points", type=int, default=201)
    p.set_defaults(func=_cmd_pdf)
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise _UsageError("a subcommand is required")
        if getattr(args, "seed", None) is None:
            args.seed = 0
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (SolverFailure, EstimationError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
