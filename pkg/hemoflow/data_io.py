import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, SchemaError

__all__ = [
    "WaveformDataset",
    "FieldSnapshotSeries",
    "load_waveform_csv",
    "write_waveform_csv",
    "load_field_csv",
    "write_field_csv",
    "resample_uniform",
    "normalize_cycle",
    "vessel_metadata",
    "make_synthetic_dataset",
]

logger = logging.getLogger(__name__)

PROVENANCES = ("synthetic", "measured")


def format_value(x):
    # repr() of a float reads back to the same double
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def parse_value(text):
    try:
        return float(text)
    except ValueError:
        return text


@dataclass(frozen=True, eq=False)
class WaveformDataset:
    """Area, velocity and optionally pressure waveforms at one station

    Values are in SI units unless the dataset was rescaled. `metadata`
    holds geometry and provenance details (e.g. `L0`, `rho`, `p0`), and,
    after `normalize_cycle()`, the inverse time map `t_phys = time_offset +
    time_scale * t`.
    """

    station: float
    t: np.ndarray
    A: np.ndarray
    u: np.ndarray
    p: np.ndarray = None
    period: float = None
    metadata: dict = field(default_factory=dict)
    provenance: str = "measured"

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        A = np.array(self.A, dtype=float)
        u = np.array(self.u, dtype=float)
        p = None if self.p is None else np.array(self.p, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise SchemaError("waveform needs at least 2 samples")
        if A.shape != t.shape or u.shape != t.shape or (p is not None and p.shape != t.shape):
            raise SchemaError("waveform columns must have equal length")
        for name, values in (("t", t), ("A", A), ("u", u), ("p", p)):
            if values is not None and not np.all(np.isfinite(values)):
                raise SchemaError(f"waveform column {name} is not finite")
        if np.any(np.diff(t) <= 0):
            raise SchemaError("waveform times must be strictly increasing")
        if np.any(A <= 0):
            raise SchemaError("waveform areas must be positive")
        period = float(t[-1] - t[0]) if self.period is None else float(self.period)
        if not period > 0 or t[-1] - t[0] > period * (1.0 + 1e-12):
            raise SchemaError(f"period {period!r} does not cover the samples")
        if self.provenance not in PROVENANCES:
            raise SchemaError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "station", float(self.station))
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "period", period)
        object.__setattr__(self, "metadata", dict(self.metadata))

    def __len__(self):
        """Return the number of samples"""
        return self.t.size

    @property
    def time_offset(self):
        """The physical time of `t = 0`"""
        return float(self.metadata.get("time_offset", 0.0))

    @property
    def time_scale(self):
        """The physical duration of one unit of `t`"""
        return float(self.metadata.get("time_scale", 1.0))

    @property
    def physical_period(self):
        """The cycle length in physical time"""
        return self.period * self.time_scale

    def physical_times(self):
        """Return the sample times in physical time"""
        return self.time_offset + self.time_scale * self.t

    def equals(self, other):
        """Return true if both datasets hold bit-identical values"""
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and np.array_equal(a, b)

        return (
            isinstance(other, WaveformDataset)
            and self.station == other.station
            and self.period == other.period
            and self.provenance == other.provenance
            and self.metadata == other.metadata
            and all(same(getattr(self, n), getattr(other, n)) for n in ("t", "A", "u", "p"))
        )

    def rescale(self, scales, *, inverse=False):
        op = scales.unscale if inverse else scales.scale
        return replace(
            self,
            station=op("length", self.station),
            t=op("time", self.t),
            A=op("area", self.A),
            u=op("velocity", self.u),
            p=None if self.p is None else op("pressure", self.p),
            period=op("time", self.period),
        )


@dataclass(frozen=True, eq=False)
class FieldSnapshotSeries:
    """Space-time fields on a rectangular grid

    `A`, `u` and `p` have shape `(len(x), len(t))`.
    """

    x: np.ndarray
    t: np.ndarray
    A: np.ndarray
    u: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.array(self.x, dtype=float))
        t = np.atleast_1d(np.array(self.t, dtype=float))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", t)
        for name in ("A", "u", "p"):
            values = np.array(getattr(self, name), dtype=float)
            if values.shape != (x.size, t.size):
                raise SchemaError(f"field {name} has shape {values.shape}, expected ({x.size}, {t.size})")
            if not np.all(np.isfinite(values)):
                raise SchemaError(f"field {name} is not finite")
            object.__setattr__(self, name, values)

    @property
    def shape(self):
        """The grid shape `(len(x), len(t))`"""
        return self.x.size, self.t.size

    def equals(self, other):
        """Return true if both series hold bit-identical values"""
        return isinstance(other, FieldSnapshotSeries) and all(
            getattr(self, n).shape == getattr(other, n).shape and np.array_equal(getattr(self, n), getattr(other, n))
            for n in ("x", "t", "A", "u", "p")
        )

    def rescale(self, scales, *, inverse=False):
        op = scales.unscale if inverse else scales.scale
        return FieldSnapshotSeries(
            op("length", self.x), op("time", self.t),
            op("area", self.A), op("velocity", self.u), op("pressure", self.p),
        )


def load_waveform_csv(path):
    """Read a waveform file

    The file starts with `#key=value` metadata lines (`station`, `period`
    and `provenance` are required), followed by the header `t,A,u` or
    `t,A,u,p` and one row per sample.

    Raises `SchemaError` with the offending (1-based) row on missing
    metadata or columns, malformed values, non-increasing times and
    non-positive areas.
    """
    metadata = {}
    rows = []
    header = None
    with open(path, newline="") as file:
        for row_number, line in enumerate(file, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition("=")
                if not sep:
                    raise SchemaError(f"{path}: malformed metadata at row {row_number}", row=row_number)
                metadata[key.strip()] = parse_value(value.strip())
                continue
            cells = next(csv.reader([line]))
            if header is None:
                header = [c.strip() for c in cells]
                if header not in (["t", "A", "u"], ["t", "A", "u", "p"]):
                    raise SchemaError(f"{path}: expected header 't,A,u[,p]' at row {row_number}", row=row_number)
                continue
            if len(cells) != len(header):
                raise SchemaError(f"{path}: expected {len(header)} columns at row {row_number}", row=row_number)
            try:
                values = [float(c) for c in cells]
            except ValueError:
                raise SchemaError(f"{path}: malformed value at row {row_number}", row=row_number) from None
            if not all(math.isfinite(v) for v in values):
                raise SchemaError(f"{path}: non-finite value at row {row_number}", row=row_number)
            if rows and values[0] <= rows[-1][1][0]:
                raise SchemaError(f"{path}: time not increasing at row {row_number}", row=row_number)
            if values[1] <= 0:
                raise SchemaError(f"{path}: non-positive area at row {row_number}", row=row_number)
            rows.append((row_number, values))
    if header is None:
        raise SchemaError(f"{path}: missing header")
    for key in ("station", "period", "provenance"):
        if key not in metadata:
            raise SchemaError(f"{path}: missing metadata {key!r}")
    if len(rows) < 2:
        raise SchemaError(f"{path}: need at least 2 samples")
    columns = np.array([values for _, values in rows]).T
    station = metadata.pop("station")
    period = metadata.pop("period")
    provenance = metadata.pop("provenance")
    return WaveformDataset(
        station, columns[0], columns[1], columns[2],
        columns[3] if len(header) == 4 else None,
        period=period, metadata=metadata, provenance=provenance,
    )


def write_waveform_csv(dataset, path):
    """Write `dataset` in the format read by `load_waveform_csv()`"""
    with open(path, "w", newline="") as file:
        file.write(f"#station={format_value(dataset.station)}\n")
        file.write(f"#period={format_value(dataset.period)}\n")
        file.write(f"#provenance={dataset.provenance}\n")
        for key, value in dataset.metadata.items():
            file.write(f"#{key}={format_value(value)}\n")
        writer = csv.writer(file, lineterminator="\n")
        columns = [dataset.t, dataset.A, dataset.u]
        header = ["t", "A", "u"]
        if dataset.p is not None:
            columns.append(dataset.p)
            header.append("p")
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([repr(float(v)) for v in row])
    return path


def load_field_csv(path):
    """Read a field file with columns `t,x,A,u,p`, one row per grid point

    Raises `SchemaError` with the row number on malformed rows or a grid
    that is not rectangular.
    """
    with open(path, newline="") as file:
        reader = csv.reader(file)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "x", "A", "u", "p"]:
            raise SchemaError(f"{path}: expected header 't,x,A,u,p'", row=1)
        rows = []
        for row_number, row in enumerate(reader, start=2):
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise SchemaError(f"{path}: malformed value at row {row_number}", row=row_number) from None
            if len(rows[-1]) != 5:
                raise SchemaError(f"{path}: expected 5 columns at row {row_number}", row=row_number)
    if not rows:
        raise SchemaError(f"{path}: no samples")
    data = np.array(rows)
    t = np.unique(data[:, 0])
    x = np.unique(data[:, 1])
    if data.shape[0] != t.size * x.size:
        raise SchemaError(f"{path}: grid is not rectangular")
    # Rows are ordered by time, then position
    order = np.lexsort((data[:, 1], data[:, 0]))
    data = data[order]
    fields = [data[:, k].reshape(t.size, x.size).T for k in (2, 3, 4)]
    return FieldSnapshotSeries(x, t, *fields)


def write_field_csv(fields, path):
    """Write `fields` with columns `t,x,A,u,p`, time-major"""
    with open(path, "w", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(["t", "x", "A", "u", "p"])
        for j, t in enumerate(fields.t):
            for i, x in enumerate(fields.x):
                writer.writerow([repr(float(v)) for v in (t, x, fields.A[i, j], fields.u[i, j], fields.p[i, j])])
    return path


def resample_uniform(dataset, n):
    """Return `dataset` resampled by monotone cubic interpolation onto `n`
    uniform times spanning one period from the first sample

    If the samples stop short of the period end, the first sample is
    repeated there to close the cycle.

    Raises `DomainError` if `n < 2`.
    """
    if n < 2:
        raise DomainError(f"need at least 2 resampling points, got {n!r}")
    t0 = dataset.t[0]
    end = t0 + dataset.period
    t = dataset.t
    columns = [dataset.A, dataset.u] + ([dataset.p] if dataset.p is not None else [])
    if t[-1] < end and not math.isclose(t[-1], end, rel_tol=1e-12, abs_tol=0.0):
        t = np.append(t, end)
        columns = [np.append(c, c[0]) for c in columns]
    times = np.linspace(t0, end, n)
    times[-1] = min(times[-1], t[-1])
    values = [PchipInterpolator(t, c, extrapolate=True)(times) for c in columns]
    return replace(
        dataset, t=times, A=values[0], u=values[1],
        p=values[2] if dataset.p is not None else None,
    )


def normalize_cycle(dataset):
    """Return `dataset` with its cycle mapped onto `[0, 1]`

    Times become `(t - t[0]) / period`. The inverse map is composed into
    the `time_offset` and `time_scale` metadata, so normalizing twice
    changes nothing.
    """
    t0 = dataset.t[0]
    T = dataset.period
    if t0 == 0.0 and T == 1.0:
        return dataset
    metadata = dict(dataset.metadata)
    metadata["time_offset"] = dataset.time_offset + dataset.time_scale * t0
    metadata["time_scale"] = dataset.time_scale * T
    return replace(dataset, t=(dataset.t - t0) / T, period=1.0, metadata=metadata)


def vessel_metadata(config):
    """Return the geometry, wall and grid description of `config` carried in
    the header of a synthetic waveform file

    The entries are what a reader needs to scale the waveforms again:
    vessel length, radii and thickness, pressures, blood density and the
    wall model.
    """
    geometry = config.geometry
    wall = config.wall_model()
    metadata = {
        "L0": geometry.length,
        "radius_in": geometry.radius_in,
        "radius_out": geometry.radius_out,
        "thickness": geometry.thickness,
        "p0": geometry.pressure,
        "p_out": geometry.outflow_pressure,
        "rho": wall.rho,
        "kind": wall.kind.handle,
        "E0": wall.E0,
        "E_inf": wall.E_inf,
        "eta": wall.eta,
        "tau_r": wall.tau_r,
        "n_cells": float(config.solver.n_cells),
        "cfl": config.solver.cfl,
    }
    if config.wall.c_ref is not None:
        metadata["c_ref"] = config.wall.c_ref
    return metadata


def make_synthetic_dataset(config, n_data=None, n_fields=None, station=None):
    """Simulate `config` and return the midpoint waveform of its last cycle
    and the full cell fields over that cycle

    The waveform has `n_data` uniform samples (the configured number of data
    times by default) at `station` (the vessel midpoint by default); the
    fields have `n_fields` times (the configured number of residual times).
    """
    from .solver import simulate

    n_data = config.training.n_data_times if n_data is None else n_data
    n_fields = config.training.n_residual_times if n_fields is None else n_fields
    geometry = config.geometry
    station = 0.5 * geometry.length if station is None else station
    period = config.inflow_profile().period
    end = config.solver.end_time
    start = end - period
    if start < 0:
        raise DomainError(f"simulated time {end!r} is shorter than one cycle {period!r}")
    data_times = np.linspace(start, end, n_data)
    field_times = np.linspace(start, end, n_fields)
    output_times = np.union1d(data_times, field_times)
    result = simulate(config, output_times=output_times)

    A, u, p = result.sample(station)
    di = np.searchsorted(result.times, data_times)
    dataset = WaveformDataset(
        station, data_times, A[di], u[di], p[di],
        period=period, metadata=vessel_metadata(config), provenance="synthetic",
    )
    fi = np.searchsorted(result.times, field_times)
    fields = FieldSnapshotSeries(result.x, field_times, result.A[:, fi], result.u[:, fi], result.p[:, fi])
    logger.info("synthetic dataset: %d samples at x=%.4g m, fields on %d cells x %d times",
                len(dataset), station, fields.shape[0], fields.shape[1])
    return dataset, fields
