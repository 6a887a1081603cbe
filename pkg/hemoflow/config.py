import json
import logging
import math
import os
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

from .apnn import LossWeights, TrainingOptions
from .boundary import InflowProfile, WindkesselRCR
from .errors import ConfigurationError, DomainError
from .imex import tableau_from_config
from .kind import WallKind
from .solver import Grid1D, Solver
from .vessel import VesselGeometry, WallModel, calibrate_E_inf

__all__ = [
    "UNITS",
    "quantity",
    "WallConfig",
    "BoundaryConfig",
    "SolverConfig",
    "RunConfig",
]

logger = logging.getLogger(__name__)

MMHG = 133.322387415

# Factors converting each accepted unit to SI
UNITS = {
    "pressure":   {"Pa": 1.0, "kPa": 1e3, "mmHg": MMHG},
    "length":     {"m": 1.0, "cm": 1e-2, "mm": 1e-3},
    "modulus":    {"Pa": 1.0, "kPa": 1e3, "MPa": 1e6, "GPa": 1e9},
    "viscosity":  {"Pa s": 1.0, "kPa s": 1e3},
    "resistance": {"Pa s/m3": 1.0, "MPa s/m3": 1e6},
    "compliance": {"m3/Pa": 1.0, "m3/GPa": 1e-9},
    "flow":       {"m3/s": 1.0, "mL/s": 1e-6},
    "time":       {"s": 1.0, "ms": 1e-3},
    "velocity":   {"m/s": 1.0},
    "density":    {"kg/m3": 1.0},
    "number":     {"1": 1.0},
}

BUILTIN = "builtin:"

MISSING = object()


def quantity(block, key, dimension, default=MISSING, *, prefix=""):
    """Return the SI value of `block[key]`

    The entry is a plain SI number or an object `{"value": v, "unit": u}`
    with `u` one of `UNITS[dimension]`. A missing entry yields `default`.

    Raises `ConfigurationError` naming the dotted key if the entry is
    missing without default, malformed, non-finite or in an unknown unit.
    """
    name = prefix + key
    if key not in block or block[key] is None:
        if default is MISSING:
            raise ConfigurationError(f"{name} is required")
        return default
    entry = block[key]
    if isinstance(entry, dict):
        unknown = set(entry) - {"value", "unit"}
        if unknown or "value" not in entry:
            raise ConfigurationError(f"{name} must be a number or a {{'value', 'unit'}} object")
        unit = entry.get("unit", next(iter(UNITS[dimension])))
        try:
            factor = UNITS[dimension][unit]
        except KeyError:
            raise ConfigurationError(f"{name} has unknown {dimension} unit {unit!r}") from None
        value = entry["value"]
    else:
        factor, value = 1.0, entry
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{name} must be numeric, got {value!r}")
    value = float(value) * factor
    if not math.isfinite(value):
        raise ConfigurationError(f"{name} must be finite")
    return value


def integer(block, key, default, *, prefix=""):
    value = block.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"{prefix}{key} must be an integer, got {value!r}")
    return value


def section(data, key, required=True):
    block = data.get(key)
    if block is None:
        if required:
            raise ConfigurationError(f"{key} block is required")
        return None
    if not isinstance(block, dict):
        raise ConfigurationError(f"{key} must be an object")
    return block


def check_keys(block, allowed, prefix):
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigurationError(f"unknown key {prefix}{unknown[0]}")


@dataclass(frozen=True)
class WallConfig:
    """Wall block: kind, moduli (Pa), viscosity (Pa s) or relaxation time
    (s), reference wave speed (m/s) and blood density (kg/m³)

    `E0` and the viscous parameters may be left out for training runs, which
    infer them; `E_inf` may be replaced by `c_ref`.
    """

    kind: WallKind = WallKind.ARTERY
    E0: float = None
    E_inf: float = None
    c_ref: float = None
    eta: float = None
    tau_r: float = None
    rho: float = 1060.0

    @classmethod
    def from_dict(cls, block):
        p = "wall."
        check_keys(block, ("kind", "E0", "E_inf", "c_ref", "eta", "tau_r", "rho"), p)
        try:
            kind = WallKind.parse(block.get("kind", "artery"))
        except ValueError as error:
            raise ConfigurationError(f"wall.kind: {error}") from None
        result = cls(
            kind,
            quantity(block, "E0", "modulus", None, prefix=p),
            quantity(block, "E_inf", "modulus", None, prefix=p),
            quantity(block, "c_ref", "velocity", None, prefix=p),
            quantity(block, "eta", "viscosity", None, prefix=p),
            quantity(block, "tau_r", "time", None, prefix=p),
            quantity(block, "rho", "density", 1060.0, prefix=p),
        )
        if result.E_inf is None and result.c_ref is None:
            raise ConfigurationError("wall.E_inf or wall.c_ref is required")
        if not result.rho > 0:
            raise ConfigurationError(f"wall.rho must be positive, got {result.rho!r}")
        return result


@dataclass(frozen=True)
class BoundaryConfig:
    """Boundary block: the inflow source and the RCR outlet (SI units)

    `inflow` is a constant flow rate (m³/s), a path to a `t,Q` CSV file
    (`builtin:` names a packaged file), or a Fourier description
    `{"mean", "cosines", "sines"}`.
    """

    inflow: object
    R1: float
    R2: float
    C: float
    period: float = None

    @classmethod
    def from_dict(cls, block):
        p = "boundary."
        check_keys(block, ("inflow", "R1", "R2", "C", "period"), p)
        if "inflow" not in block:
            raise ConfigurationError("boundary.inflow is required")
        inflow = block["inflow"]
        if isinstance(inflow, dict) and "mean" in inflow:
            check_keys(inflow, ("mean", "cosines", "sines"), "boundary.inflow.")
            inflow = {
                "mean": quantity(inflow, "mean", "flow", prefix="boundary.inflow."),
                "cosines": [float(v) for v in inflow.get("cosines", ())],
                "sines": [float(v) for v in inflow.get("sines", ())],
            }
        elif not isinstance(inflow, str):
            inflow = quantity(block, "inflow", "flow", prefix=p)
        result = cls(
            inflow,
            quantity(block, "R1", "resistance", prefix=p),
            quantity(block, "R2", "resistance", prefix=p),
            quantity(block, "C", "compliance", prefix=p),
            quantity(block, "period", "time", None, prefix=p),
        )
        for name in ("R1", "R2", "C"):
            if not getattr(result, name) > 0:
                raise ConfigurationError(f"boundary.{name} must be positive, got {getattr(result, name)!r}")
        if result.period is not None and not result.period > 0:
            raise ConfigurationError(f"boundary.period must be positive, got {result.period!r}")
        return result


@dataclass(frozen=True)
class SolverConfig:
    """Solver block: grid size, CFL number, simulated time (s) and
    reconstruction settings
    """

    n_cells: int = 12
    cfl: float = 0.9
    end_time: float = 20.0
    tableau: object = "ars443"
    weights: str = "z"
    epsilon: float = 1e-12

    def __post_init__(self):
        if self.n_cells < 3:
            raise ConfigurationError(f"solver.n_cells must be at least 3, got {self.n_cells!r}")
        if not 0 < self.cfl <= 1:
            raise ConfigurationError(f"solver.cfl must lie in (0, 1], got {self.cfl!r}")
        if not self.end_time > 0:
            raise ConfigurationError(f"solver.end_time must be positive, got {self.end_time!r}")
        if self.weights not in ("z", "js", "linear"):
            raise ConfigurationError(f"solver.weights must be 'z', 'js' or 'linear', got {self.weights!r}")
        if not self.epsilon > 0:
            raise ConfigurationError(f"solver.epsilon must be positive, got {self.epsilon!r}")
        object.__setattr__(self, "tableau", tableau_from_config(self.tableau))

    @classmethod
    def from_dict(cls, block):
        p = "solver."
        check_keys(block, ("n_cells", "cfl", "end_time", "tableau", "weights", "epsilon"), p)
        return cls(
            integer(block, "n_cells", 12, prefix=p),
            quantity(block, "cfl", "number", 0.9, prefix=p),
            quantity(block, "end_time", "time", 20.0, prefix=p),
            block.get("tableau", "ars443"),
            block.get("weights", "z"),
            quantity(block, "epsilon", "number", 1e-12, prefix=p),
        )


def training_from_dict(block):
    p = "training."
    names = {f.name for f in fields(TrainingOptions)}
    check_keys(block, names, p)
    values = dict(block)
    if "weights" in values:
        w = values["weights"]
        if not isinstance(w, dict):
            raise ConfigurationError("training.weights must be an object")
        check_keys(w, ("data", "residual", "boundary"), "training.weights.")
        values["weights"] = LossWeights(**{k: float(v) for k, v in w.items()})
    if "hidden" in values:
        values["hidden"] = tuple(int(n) for n in values["hidden"])
    for key in ("tau_r_guess", "E0_guess"):
        if key in values and not values[key] > 0:
            raise ConfigurationError(f"{p}{key} must be positive, got {values[key]!r}")
    try:
        return TrainingOptions(**values)
    except TypeError as error:
        raise ConfigurationError(f"invalid training block: {error}") from None


@dataclass(frozen=True)
class RunConfig:
    """A complete run description

    Physical values are in SI units. `base` is the directory relative file
    references are resolved against (the config file's directory).
    """

    geometry: VesselGeometry
    wall: WallConfig
    boundary: BoundaryConfig = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    training: TrainingOptions = field(default_factory=TrainingOptions)
    output: str = None
    seed: int = 0
    dataset: str = None
    checkpoint: str = None
    name: str = "run"
    base: str = "."

    def __post_init__(self):
        if self.output is None:
            object.__setattr__(self, "output", os.environ.get("HEMOFLOW_OUT", "hemoflow-out"))
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigurationError(f"seed must be a non-negative integer, got {self.seed!r}")

    @classmethod
    def from_dict(cls, data, base="."):
        """Construct a configuration from its JSON form

        Raises `ConfigurationError` naming the offending key.
        """
        if not isinstance(data, dict):
            raise ConfigurationError("configuration root must be an object")
        check_keys(data, ("name", "geometry", "wall", "boundary", "solver", "training",
                          "output", "seed", "dataset", "checkpoint"), "")
        g = section(data, "geometry")
        p = "geometry."
        check_keys(g, ("length", "radius_in", "radius_out", "thickness", "p0", "p_out"), p)
        try:
            geometry = VesselGeometry(
                quantity(g, "length", "length", prefix=p),
                quantity(g, "radius_in", "length", prefix=p),
                quantity(g, "radius_out", "length", prefix=p),
                quantity(g, "thickness", "length", prefix=p),
                quantity(g, "p0", "pressure", 0.0, prefix=p),
                quantity(g, "p_out", "pressure", 0.0, prefix=p),
            )
        except DomainError as error:
            raise ConfigurationError(f"geometry: {error}") from None
        wall = WallConfig.from_dict(section(data, "wall"))
        boundary = section(data, "boundary", required=False)
        solver = section(data, "solver", required=False) or {}
        training = section(data, "training", required=False) or {}
        output = section(data, "output", required=False) or {}
        check_keys(output, ("directory",), "output.")
        return cls(
            geometry,
            wall,
            None if boundary is None else BoundaryConfig.from_dict(boundary),
            SolverConfig.from_dict(solver),
            training_from_dict(training),
            output.get("directory"),
            integer(data, "seed", 0),
            data.get("dataset"),
            data.get("checkpoint"),
            str(data.get("name", "run")),
            str(base),
        )

    @classmethod
    def from_json(cls, path):
        """Read a configuration file; `builtin:` names a packaged one

        Raises `ConfigurationError` if the file is not valid JSON.
        """
        if isinstance(path, str) and path.startswith(BUILTIN):
            with resources.as_file(resources.files("hemoflow") / "data" / path[len(BUILTIN):]) as file:
                return cls.from_json(file)
        path = Path(path)
        try:
            with open(path) as file:
                data = json.load(file)
        except json.JSONDecodeError as error:
            raise ConfigurationError(f"{path}: invalid JSON: {error}") from None
        logger.debug("read configuration %s", path)
        return cls.from_dict(data, base=path.parent)

    def with_overrides(self, *, seed=None, threads=None, out=None, cells=None, epochs=None,
                       dataset=None, checkpoint=None):
        """Return a copy with the given command-line overrides applied"""
        config = self
        if seed is not None:
            config = replace(config, seed=seed)
        if out is not None:
            config = replace(config, output=str(out))
        if dataset is not None:
            config = replace(config, dataset=str(Path(dataset).resolve()))
        if checkpoint is not None:
            config = replace(config, checkpoint=str(Path(checkpoint).resolve()))
        if cells is not None:
            config = replace(config, solver=replace(config.solver, n_cells=cells))
        training = {}
        if threads is not None:
            training["threads"] = threads
        if epochs is not None:
            training["epochs"] = epochs
        if training:
            config = replace(config, training=replace(config.training, **training))
        return config

    def resolve(self, reference):
        """Return the path of a file reference relative to the config file"""
        if reference is None:
            return None
        path = Path(reference)
        return path if path.is_absolute() else Path(self.base) / path

    @property
    def E_inf(self):
        """The asymptotic modulus (Pa), calibrated from `c_ref` if not given"""
        if self.wall.E_inf is not None:
            return self.wall.E_inf
        return calibrate_E_inf(self.geometry, self.wall.rho, self.wall.c_ref, self.wall.kind)

    def wall_model(self):
        """Return the `WallModel` of the configured vessel

        Raises `ConfigurationError` if `E0` or the viscous parameters are
        missing or invalid.
        """
        wall = self.wall
        if wall.E0 is None:
            raise ConfigurationError("wall.E0 is required")
        if wall.eta is None and wall.tau_r is None:
            raise ConfigurationError("wall.eta or wall.tau_r is required")
        try:
            return WallModel.for_geometry(
                self.geometry, wall.kind, wall.E0, self.E_inf, rho=wall.rho, eta=wall.eta, tau_r=wall.tau_r,
            )
        except DomainError as error:
            raise ConfigurationError(f"wall: {error}") from None

    def inflow_profile(self):
        """Return the configured `InflowProfile`"""
        if self.boundary is None:
            raise ConfigurationError("boundary block is required")
        inflow = self.boundary.inflow
        period = self.boundary.period
        if isinstance(inflow, str):
            if inflow.startswith(BUILTIN):
                return InflowProfile.builtin(inflow[len(BUILTIN):])
            return InflowProfile.from_csv(self.resolve(inflow), period=period)
        if isinstance(inflow, dict):
            return InflowProfile.fourier(inflow["mean"], inflow["cosines"], inflow["sines"], period=period or 1.0)
        return InflowProfile.constant(inflow, period=period or 1.0)

    def windkessel(self):
        """Return a fresh `WindkesselRCR` whose distal pressure starts at `p0`"""
        if self.boundary is None:
            raise ConfigurationError("boundary block is required")
        b = self.boundary
        return WindkesselRCR(b.R1, b.R2, b.C, p_out=self.geometry.outflow_pressure, pressure=self.geometry.pressure)

    def grid(self):
        """Return the finite-volume grid"""
        return Grid1D(self.geometry, self.wall_model(), self.solver.n_cells)

    def build_solver(self):
        """Return the configured solver and its equilibrium initial state"""
        grid = self.grid()
        s = self.solver
        solver = Solver(
            grid, self.inflow_profile(), self.windkessel(),
            tableau=s.tableau, cfl=s.cfl, weights=s.weights, epsilon=s.epsilon,
        )
        return solver, grid.equilibrium(0.0)

    def as_metadata(self):
        """Return a flat description of the run for output headers"""
        return {
            "name": self.name,
            "seed": self.seed,
            "n_cells": self.solver.n_cells,
            "cfl": self.solver.cfl,
            "end_time": self.solver.end_time,
            "tableau": self.solver.tableau.name,
        }
