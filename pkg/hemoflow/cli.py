import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .apnn import (CollocationSet, TrainReport, VesselProblem, field_errors, initial_state,
                   parameter_errors, predict_fields, residual_grid, train, waveform_errors)
from .config import RunConfig
from .data_io import (FieldSnapshotSeries, WaveformDataset, load_field_csv, load_waveform_csv,
                      make_synthetic_dataset, resample_uniform, vessel_metadata, write_field_csv,
                      write_waveform_csv)
from .errors import ConfigurationError, HemoflowError, TrainingAborted
from .network import load_checkpoint
from .plotting import plot_field_map, plot_history, plot_waveforms
from .solver import simulate

__all__ = ["main", "build_parser"]

logger = logging.getLogger(__name__)


def build_parser():
    """Return the argument parser of the `hemoflow` command"""
    parser = argparse.ArgumentParser(
        prog="hemoflow",
        description="Viscoelastic 1D blood flow simulation and wall-parameter inference.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-step detail")
    commands = parser.add_subparsers(dest="command", required=True)

    def run_options(sub, config_required=True):
        sub.add_argument("--config", required=config_required,
                         help="run configuration (JSON); 'builtin:<name>' selects a packaged one")
        sub.add_argument("--seed", type=int, help="random seed (overrides the configuration)")
        sub.add_argument("--threads", type=int, help="gradient worker threads; 1 is bit-reproducible")
        sub.add_argument("--out", help="output directory (default: $HEMOFLOW_OUT or ./hemoflow-out)")
        sub.add_argument("--cells", type=int, help="number of finite-volume cells")
        sub.add_argument("--epochs", type=int, help="number of training epochs")
        sub.add_argument("--dataset", help="waveform CSV to train on")
        sub.add_argument("--checkpoint", help="checkpoint to resume from or evaluate")

    run_options(commands.add_parser("simulate", help="run the finite-volume solver"))
    run_options(commands.add_parser("generate-data", help="write a synthetic waveform dataset"))
    run_options(commands.add_parser("train", help="infer E0 and tau_r from a waveform dataset"))
    predict = commands.add_parser("predict", help="evaluate a trained network on a space-time grid")
    run_options(predict)
    predict.add_argument("--stations", type=int, help="number of evaluation stations")
    predict.add_argument("--times", type=int, help="number of evaluation times")
    plot = commands.add_parser("plot", help="draw figures from written CSV files")
    plot.add_argument("--reference", help="reference waveform CSV")
    plot.add_argument("--prediction", help="predicted field CSV, sampled at the reference station")
    plot.add_argument("--fields", help="field CSV to draw as space-time maps")
    plot.add_argument("--history", help="training report CSV")
    plot.add_argument("--config", help="run configuration for titles, reference lines and the output directory")
    plot.add_argument("--out", help="output directory (default: $HEMOFLOW_OUT or ./hemoflow-out)")
    return parser


def configure_logging(verbose):
    root = logging.getLogger("hemoflow")
    for handler in list(root.handlers):
        if getattr(handler, "hemoflow_cli", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    handler.hemoflow_cli = True
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def load_config(args):
    config = RunConfig.from_json(args.config)
    return config.with_overrides(
        seed=args.seed, threads=args.threads, out=args.out, cells=args.cells,
        epochs=args.epochs, dataset=args.dataset, checkpoint=args.checkpoint,
    )


def output_directory(path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_json(data, path):
    with open(path, "w") as file:
        json.dump(data, file, indent=2, sort_keys=True)
        file.write("\n")
    logger.info("wrote %s", path)
    return path


def last_cycle(config, n):
    period = config.inflow_profile().period
    end = config.solver.end_time
    if end < period:
        raise ConfigurationError(f"solver.end_time {end!r} is shorter than one cycle {period!r}")
    return np.linspace(end - period, end, n)


def cmd_simulate(config):
    """Run the solver; write the last-cycle fields, the midpoint waveform, a
    run summary and a space-time figure
    """
    out = output_directory(config.output)
    times = last_cycle(config, config.training.n_residual_times)
    result = simulate(config, output_times=np.union1d([0.0], times))
    dx = config.geometry.length / config.solver.n_cells
    first = result.times.searchsorted(times[0])
    fields = cycle_fields(result, slice(first, None))
    write_field_csv(fields, out / "fields.csv")
    station = 0.5 * config.geometry.length
    A, u, p = result.sample(station)
    waveform = station_waveform(station, result.times[first:], A[first:], u[first:], p[first:], config)
    write_waveform_csv(waveform, out / "waveform.csv")
    inflow = sum(r.inflow_volume for r in result.records)
    outflow = sum(r.outflow_volume for r in result.records)
    v0 = float(np.sum(result.A[:, 0]) * dx)
    v1 = float(np.sum(result.A[:, -1]) * dx)
    summary = dict(config.as_metadata())
    summary.update({
        "steps": result.steps,
        "inflow_volume": inflow,
        "outflow_volume": outflow,
        "mass_balance_error": abs(v1 - v0 - (inflow - outflow)) / v0,
    })
    write_json(summary, out / "summary.json")
    plot_field_map(fields, out / "fields.svg", title=config.name)
    return 0


def cycle_fields(result, index):
    return FieldSnapshotSeries(result.x, result.times[index], result.A[:, index], result.u[:, index], result.p[:, index])


def station_waveform(station, t, A, u, p, config):
    metadata = vessel_metadata(config)
    metadata["name"] = config.name
    return WaveformDataset(station, t, A, u, p, period=t[-1] - t[0], metadata=metadata, provenance="synthetic")


def cmd_generate_data(config):
    """Write the synthetic midpoint dataset and its full-field reference"""
    out = output_directory(config.output)
    dataset, fields = make_synthetic_dataset(config)
    write_waveform_csv(dataset, out / "dataset.csv")
    write_field_csv(fields, out / "reference_fields.csv")
    return 0


def training_samples(dataset, options):
    """Return the uniform samples of `dataset` to train on

    Synthetic data is resampled to `n_data_times` samples; measured data
    keeps its own sample count, resampled only if it is not uniform.
    """
    if dataset.provenance == "synthetic":
        if len(dataset) != options.n_data_times:
            return resample_uniform(dataset, options.n_data_times)
        return dataset
    steps = np.diff(dataset.t)
    if steps.size == 0 or np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        return dataset
    return resample_uniform(dataset, len(dataset))


def problem_for(config):
    if config.dataset is None:
        raise ConfigurationError("dataset is required (set it in the configuration or pass --dataset)")
    path = config.resolve(config.dataset)
    if not path.is_file():
        raise ConfigurationError(f"dataset file {str(path)!r} does not exist")
    dataset = training_samples(load_waveform_csv(path), config.training)
    problem = VesselProblem.for_dataset(config.geometry, config.wall.kind, config.E_inf, config.wall.rho, dataset)
    return dataset, problem


def reference_parameters(dataset):
    meta = dataset.metadata
    if isinstance(meta.get("tau_r"), float) and isinstance(meta.get("E0"), float):
        return {"tau_r": meta["tau_r"], "E0": meta["E0"]}
    return None


def evaluation_grid(config, dataset, n_stations=None, n_times=None):
    stations, count = residual_grid(dataset, config.geometry.length, config.training)
    if n_stations:
        stations = np.linspace(0.0, config.geometry.length, n_stations)
    t0 = dataset.physical_times()[0]
    times = np.linspace(t0, t0 + dataset.physical_period, n_times or count)
    return stations, times


def cmd_train(config):
    """Train the network; write the report, checkpoint, predictions,
    error summary and figures
    """
    out = output_directory(config.output)
    dataset, problem = problem_for(config)
    options = config.training
    stations, n_times = residual_grid(dataset, config.geometry.length, options)
    points = CollocationSet.build(dataset, problem, stations, n_times, options.initial_stations)
    rng = np.random.default_rng(config.seed)
    start = 0
    if config.checkpoint is not None and Path(config.checkpoint).is_file():
        saved = load_checkpoint(config.checkpoint)
        net, xi, adam, start = saved.net, saved.xi, saved.adam, saved.epoch
        if saved.rng_state is not None:
            rng.bit_generator.state = saved.rng_state
        logger.info("resuming from %s at epoch %d", config.checkpoint, start)
    else:
        net, xi, adam = initial_state(problem, options, rng, dataset.station)
    checkpoint = out / "checkpoint.npz"
    try:
        result = train(points, problem, options, net, xi, adam, start_epoch=start,
                       checkpoint=checkpoint, rng=rng, metadata=config.as_metadata())
    except TrainingAborted as error:
        raise TrainingAborted(f"{error} (last state in {error.checkpoint})", checkpoint=error.checkpoint) from None
    result.report.write_csv(out / "report.csv")
    reference = reference_parameters(dataset)
    plot_history(result.report, out / "history.svg", reference=reference)
    grid = evaluation_grid(config, dataset)
    fields = predict_fields(result.net, problem, *grid)
    write_field_csv(fields, out / "predicted_fields.csv")
    at_station = predict_fields(result.net, problem, [dataset.station], dataset.physical_times())
    plot_waveforms(dataset, at_station, out / "waveforms.svg", title=config.name)
    plot_field_map(fields, out / "predicted_fields.svg", title=config.name)
    tau_r, E0 = problem.physical(result.xi)
    summary = {"epochs": result.epoch, "tau_r": tau_r, "E0": E0, "station_errors": waveform_errors(result.net, problem, dataset)}
    if reference is not None:
        summary["parameter_errors"] = parameter_errors(problem, result.xi, reference["tau_r"], reference["E0"])
    reference_fields = config.resolve(config.dataset).with_name("reference_fields.csv")
    if reference_fields.is_file():
        summary["field_errors"] = field_errors(result.net, problem, load_field_csv(reference_fields))
    write_json(summary, out / "summary.json")
    logger.info("inferred tau_r=%.4g s, E0=%.4g Pa", tau_r, E0)
    return 0


def cmd_predict(config, n_stations=None, n_times=None):
    """Evaluate a checkpoint on a space-time grid and write the fields"""
    if config.checkpoint is None:
        raise ConfigurationError("checkpoint is required (set it in the configuration or pass --checkpoint)")
    out = output_directory(config.output)
    dataset, problem = problem_for(config)
    saved = load_checkpoint(config.checkpoint)
    fields = predict_fields(saved.net, problem, *evaluation_grid(config, dataset, n_stations, n_times))
    write_field_csv(fields, out / "predicted_fields.csv")
    plot_field_map(fields, out / "predicted_fields.svg", title=config.name)
    return 0


def plot_context(args):
    """Return the output directory, title and history reference lines of a
    `plot` invocation
    """
    if args.config is None:
        return args.out or os.environ.get("HEMOFLOW_OUT", "hemoflow-out"), None, None
    config = RunConfig.from_json(args.config).with_overrides(out=args.out)
    reference = None
    if config.wall.E0 is not None:
        wall = config.wall_model()
        reference = {"tau_r": wall.tau_r, "E0": wall.E0}
    return config.output, config.name, reference


def cmd_plot(args):
    """Draw the figures for whichever inputs are given"""
    if not (args.reference or args.fields or args.history):
        raise ConfigurationError("nothing to plot: pass --reference, --fields or --history")
    path, title, reference_lines = plot_context(args)
    out = output_directory(path)
    if args.reference:
        if not args.prediction:
            raise ConfigurationError("--reference needs --prediction")
        reference = load_waveform_csv(args.reference)
        prediction = load_field_csv(args.prediction)
        times = reference.physical_times()
        tolerance = 1e-9 * max(1.0, reference.physical_period)
        if prediction.t.shape != times.shape or not np.allclose(prediction.t, times, rtol=0.0, atol=tolerance):
            raise ConfigurationError("prediction times do not match the reference samples")
        column = int(np.argmin(np.abs(prediction.x - reference.station)))
        at_station = FieldSnapshotSeries(
            prediction.x[column:column + 1], prediction.t,
            prediction.A[column:column + 1], prediction.u[column:column + 1], prediction.p[column:column + 1],
        )
        errors = plot_waveforms(reference, at_station, out / "waveforms.svg", title=title)
        write_json(errors, out / "waveform_errors.json")
    if args.fields:
        plot_field_map(load_field_csv(args.fields), out / "fields.svg", title=title)
    if args.history:
        plot_history(TrainReport.from_csv(args.history), out / "history.svg", reference=reference_lines)
    return 0


def main(argv=None):
    """Run the `hemoflow` command; return the exit status

    Library errors and I/O failures give status 1 with a one-line message on
    standard error; usage errors give status 2.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit:
        return exit.code
    configure_logging(args.verbose)
    try:
        if args.command == "plot":
            return cmd_plot(args)
        config = load_config(args)
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "generate-data":
            return cmd_generate_data(config)
        if args.command == "train":
            return cmd_train(config)
        return cmd_predict(config, args.stations, args.times)
    except (HemoflowError, OSError) as error:
        logger.debug("command failed", exc_info=True)
        print(f"error: {error}", file=sys.stderr)
        return 1
