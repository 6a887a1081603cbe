import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, Variable, absolute, value_of
from .data_io import FieldSnapshotSeries, normalize_cycle
from .errors import ConfigurationError, NonFiniteError, SchemaError, TrainingAborted
from .network import InverseParams, MLPNet, forward_with_input_derivs, save_checkpoint
from .optim import AdamState, adam_step
from .scales import NonDimScales
from .utilities import mean_percentage_relative_error, pairwise_sum
from .vessel import tube_law_F, tube_law_G

__all__ = [
    "VesselProblem",
    "CollocationSet",
    "LossWeights",
    "LossValues",
    "EpochRecord",
    "TrainReport",
    "TrainingOptions",
    "TrainResult",
    "residuals",
    "elastic_residuals",
    "loss_data",
    "loss_residual",
    "loss_boundary",
    "total_loss",
    "evaluate_losses",
    "loss_gradient",
    "residual_grid",
    "initial_state",
    "train",
    "predict_fields",
    "waveform_errors",
    "field_errors",
    "parameter_errors",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class VesselProblem:
    """The vessel seen by the network, in dimensionless variables

    Positions are scaled by the vessel length and times by the cycle
    length, so both network inputs live in `[0, 1]`. `kind` supplies the
    tube-law exponents and `E_inf` is the fixed asymptotic modulus (Pa).
    """

    geometry: object
    kind: object
    E_inf: float
    scales: NonDimScales
    time_offset: float = 0.0

    @classmethod
    def for_dataset(cls, geometry, kind, E_inf, rho, dataset):
        """Return the problem whose area scale is the equilibrium area at the
        dataset's station and whose time scale is its cycle length
        """
        cycle = normalize_cycle(dataset)
        scales = NonDimScales.for_vessel(
            geometry.length, float(geometry.area(dataset.station)), rho, period=cycle.time_scale,
        )
        return cls(geometry, kind, E_inf, scales, cycle.time_offset)

    @property
    def strouhal(self):
        """The factor in front of scaled time derivatives"""
        return self.scales.strouhal

    @property
    def p0(self):
        """The scaled equilibrium pressure"""
        return self.geometry.pressure / self.scales.pressure

    @property
    def E_inf_hat(self):
        """The scaled asymptotic modulus"""
        return self.E_inf / self.scales.pressure

    def A0(self, x):
        """Return the scaled equilibrium area at scaled positions `x`"""
        return self.geometry.area(np.asarray(x) * self.scales.length) / self.scales.area

    def W(self, x):
        """Return the tube-law coefficient at scaled positions `x`"""
        return self.kind.coefficient(self.geometry.radius(np.asarray(x) * self.scales.length), self.geometry.thickness)

    def G(self, A, x):
        """Return the scaled inverse compliance `A_c G(A)`"""
        return tube_law_G(A, self.A0(x), self.kind, W=self.W(x))

    def F(self, A, x):
        """Return the scaled elastic pressure `F(A) / P_c`"""
        return tube_law_F(A, self.A0(x), self.p0, self.kind, W=self.W(x), modulus=self.E_inf_hat)

    def scale_time(self, t):
        """Return the scaled time of SI times `t`"""
        return (np.asarray(t, dtype=float) - self.time_offset) / self.scales.time

    def inverse_params(self, tau_r, E0):
        """Return `InverseParams` holding SI values `tau_r` (s) and `E0` (Pa)"""
        return InverseParams.from_values(
            self.scales.scale("relaxation", tau_r), self.scales.scale("modulus", E0),
        )

    def physical(self, xi):
        """Return the SI `(tau_r, E0)` of `xi`"""
        tau = float(value_of(xi.tau_r))
        E0 = float(value_of(xi.E0))
        return self.scales.unscale("relaxation", tau), self.scales.unscale("modulus", E0)


@dataclass(frozen=True, eq=False)
class CollocationSet:
    """Scaled training points

    Data points carry area and velocity targets at the measurement station;
    residual points cover every station and residual time, and double as
    positivity points; initial points sit at `t = 0` with equilibrium
    targets.
    """

    data_x: np.ndarray
    data_t: np.ndarray
    data_A: np.ndarray
    data_u: np.ndarray
    residual_x: np.ndarray
    residual_t: np.ndarray
    initial_x: np.ndarray
    initial_A: np.ndarray
    initial_p: np.ndarray

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float).ravel())
        if not (self.data_x.size == self.data_t.size == self.data_A.size == self.data_u.size):
            raise ConfigurationError("data point arrays must have equal length")
        if self.residual_x.size != self.residual_t.size:
            raise ConfigurationError("residual point arrays must have equal length")
        if not (self.initial_x.size == self.initial_A.size == self.initial_p.size):
            raise ConfigurationError("initial point arrays must have equal length")
        for name in ("data_x", "data_t", "residual_x", "residual_t", "initial_x"):
            values = getattr(self, name)
            if np.any((values < -1e-12) | (values > 1.0 + 1e-12)):
                raise ConfigurationError(f"{name} lies outside the scaled domain [0, 1]")

    @classmethod
    def build(cls, dataset, problem, stations, n_times=200, initial="measurement"):
        """Return the points for `dataset` (SI units) on `problem`

        Residual points are the product of `stations` (SI positions) and
        `n_times` uniform times over the cycle; initial points are placed at
        the measurement station only (`initial="measurement"`) or at every
        station (`"all"`).
        """
        if n_times < 1 or len(stations) < 1:
            raise ConfigurationError("need at least one residual station and time")
        dataset = normalize_cycle(dataset)
        L = problem.scales.length
        x_m = dataset.station / L
        data_t = dataset.t
        stations = np.asarray(stations, dtype=float) / L
        times = np.linspace(0.0, 1.0, n_times)
        rx, rt = np.meshgrid(stations, times, indexing="ij")
        if initial == "measurement":
            initial_x = np.array([x_m])
        elif initial == "all":
            initial_x = stations
        else:
            raise ConfigurationError(f"unknown initial-point placement {initial!r}")
        return cls(
            np.full(data_t.shape, x_m), data_t,
            problem.scales.scale("area", dataset.A), problem.scales.scale("velocity", dataset.u),
            rx.ravel(), rt.ravel(),
            initial_x, problem.A0(initial_x), np.full(initial_x.shape, problem.p0),
        )

    @property
    def sizes(self):
        """The numbers of data, residual and initial points"""
        return self.data_x.size, self.residual_x.size, self.initial_x.size

    def chunks(self, n):
        """Return `n` disjoint subsets, splitting every point family evenly"""
        def split(*arrays):
            return zip(*(np.array_split(a, n) for a in arrays))

        data = list(split(self.data_x, self.data_t, self.data_A, self.data_u))
        res = list(split(self.residual_x, self.residual_t))
        init = list(split(self.initial_x, self.initial_A, self.initial_p))
        result = []
        for d, r, i in zip(data, res, init):
            chunk = object.__new__(CollocationSet)
            for name, value in zip(self.__dataclass_fields__, d + r + i):
                object.__setattr__(chunk, name, value)
            result.append(chunk)
        return result

    def duplicated(self):
        """Return the set with every point listed twice"""
        return CollocationSet(*(np.tile(getattr(self, name), 2) for name in self.__dataclass_fields__))


@dataclass(frozen=True)
class LossWeights:
    """Weights of the data, residual and boundary loss terms"""

    data: float = 10.0
    residual: float = 1.0
    boundary: float = 1.0

    def __post_init__(self):
        for name in ("data", "residual", "boundary"):
            if not getattr(self, name) >= 0:
                raise ConfigurationError(f"loss weight {name} must be non-negative")


@dataclass(frozen=True)
class LossValues:
    """Values of the loss terms and their weighted total"""

    data: float
    residual: float
    boundary: float
    total: float


def residuals(net, xi, x, t, problem, params=None, *, tau_r=None, limit="hyperbolic", outputs=None):
    """Return the scaled residuals `(R1, R2, R3)` at points `(x, t)`

        R1 = S A_t + (A u)_x
        R2 = S (A u)_t + (A u²)_x + A p_x
        R3 = tau (S p_t + E0 G(A) (A u)_x) + (p - F(A))

    with `S` the Strouhal factor. `tau_r` overrides the scaled relaxation
    time of `xi` (`tau_r=0.0` gives `R3 = p - F(A)` exactly). With
    `limit="diffusive"` the third residual is the Kelvin-Voigt relation
    `p - F(A) + eta G(A) (A u)_x`.
    """
    o = outputs if outputs is not None else forward_with_input_derivs(net, x, t, params)
    S = problem.strouhal
    A, u, p = o.A, o.u, o.p
    q = A * u
    q_x = A * o.u_x + u * o.A_x
    R1 = S * o.A_t + q_x
    R2 = S * (A * o.u_t + u * o.A_t) + (u * q_x + q * o.u_x) + A * o.p_x
    G = problem.G(A, x)
    relaxed = p - problem.F(A, x)
    tau = xi.tau_r if tau_r is None else tau_r
    if limit == "hyperbolic":
        R3 = tau * (S * o.p_t + xi.E0 * G * q_x) + relaxed
    elif limit == "diffusive":
        E0 = xi.E0
        eta = tau * E0 * E0 / (E0 - problem.E_inf_hat)
        R3 = relaxed + eta * G * q_x
    else:
        raise ConfigurationError(f"unknown residual limit {limit!r}")
    return R1, R2, R3


def elastic_residuals(net, x, t, problem, params=None):
    """Return the residuals of the elastic system, pressure closed by
    `p = F(A)` and reported as `p - F(A)`
    """
    o = forward_with_input_derivs(net, x, t, params)
    S = problem.strouhal
    A, u = o.A, o.u
    q = A * u
    q_x = A * o.u_x + u * o.A_x
    R1 = S * o.A_t + q_x
    R2 = S * (A * o.u_t + u * o.A_t) + (u * q_x + q * o.u_x) + A * o.p_x
    return R1, R2, o.p - problem.F(A, x)


def mean_square(x, count=None):
    # Sum of squares divided by `count` (the size of `x` by default)
    count = x.shape[0] if count is None else count
    return (x * x).sum() / count


def loss_data(net, points, params=None, count=None):
    """Return the data loss: mean squared area error plus mean squared
    velocity error at the data points

    Pressure never enters.
    """
    A, u, _ = net(points.data_x, points.data_t, params)
    return mean_square(A - points.data_A, count) + mean_square(u - points.data_u, count)


def loss_residual(net, xi, points, problem, params=None, *, tau_r=None, limit="hyperbolic", count=None, outputs=None):
    """Return the residual loss `mean(R1²) + mean(R2²) + mean(R3²)` over the
    residual points
    """
    R1, R2, R3 = residuals(net, xi, points.residual_x, points.residual_t, problem, params,
                           tau_r=tau_r, limit=limit, outputs=outputs)
    return mean_square(R1, count) + mean_square(R2, count) + mean_square(R3, count)


def loss_boundary(net, points, params=None, counts=None, pressure=None):
    """Return the boundary loss: the positivity penalty `mean((|p| - p)²)`
    over the residual points plus the mean squared initial area and pressure
    mismatches

    `pressure` may hold the predicted pressures at the residual points.
    """
    n_res, n_init = (points.residual_x.size, points.initial_x.size) if counts is None else counts
    if pressure is None:
        _, _, pressure = net(points.residual_x, points.residual_t, params)
    result = mean_square(absolute(pressure) - pressure, n_res)
    if points.initial_x.size:
        A, _, p = net(points.initial_x, np.zeros_like(points.initial_x), params)
        result = result + mean_square(A - points.initial_A, n_init) + mean_square(p - points.initial_p, n_init)
    return result


def total_loss(data, residual, boundary, weights=LossWeights()):
    """Return `w_d L_d + w_r L_r + w_b L_b`"""
    return weights.data * data + weights.residual * residual + weights.boundary * boundary


def chunk_losses(net, xi, points, problem, params, weights, counts, tau_r=None):
    # Loss terms of one chunk, normalized by the counts of the full set
    n_data, n_res, n_init = counts
    zero = 0.0
    data = loss_data(net, points, params, n_data) if points.data_x.size else zero
    if points.residual_x.size:
        outputs = forward_with_input_derivs(net, points.residual_x, points.residual_t, params)
        residual = loss_residual(net, xi, points, problem, params, tau_r=tau_r, count=n_res, outputs=outputs)
        pressure = outputs.p
    else:
        residual = zero
        pressure = None
    if points.residual_x.size or points.initial_x.size:
        if pressure is None:
            pressure = np.zeros(0)
        boundary = loss_boundary(net, points, params, (n_res, n_init), pressure)
    else:
        boundary = zero
    return data, residual, boundary, total_loss(data, residual, boundary, weights)


def evaluate_losses(net, xi, points, problem, weights=LossWeights(), *, tau_r=None):
    """Return the `LossValues` of the network on `points`"""
    terms = chunk_losses(net, xi, points, problem, None, weights, points.sizes, tau_r)
    return LossValues(*(float(np.asarray(value_of(v))) for v in terms))


def chunk_gradient(net, xi, points, problem, weights, counts):
    tape = Tape()
    params = [tape.variable(p) for p in net.parameters()]
    log_xi = tape.variable(xi.as_array())
    xi_var = InverseParams(log_xi[0], log_xi[1])
    terms = chunk_losses(net, xi_var, points, problem, params, weights, counts)
    values = [np.asarray(value_of(v), dtype=float) for v in terms]
    total = terms[-1]
    if not isinstance(total, Variable):
        return values, [np.zeros_like(p) for p in net.parameters()], np.zeros(2)
    grads = tape.gradient(total, params + [log_xi])
    return values, grads[:-1], grads[-1]


def loss_gradient(net, xi, points, problem, weights=LossWeights(), threads=1):
    """Return the `LossValues` and the gradients of the total loss with
    respect to the network parameters and to `[log_tau_r, log_E0]`

    With `threads > 1` the points are split into that many chunks, evaluated
    concurrently and reduced by a pairwise sum in chunk order.

    Raises `NonFiniteError` naming the loss term or parameter group that is
    not finite.
    """
    counts = points.sizes
    if threads <= 1:
        results = [chunk_gradient(net, xi, points, problem, weights, counts)]
    else:
        chunks = points.chunks(threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: chunk_gradient(net, xi, c, problem, weights, counts), chunks))
    values = [float(pairwise_sum([r[0][k] for r in results])) for k in range(4)]
    for label, value in zip(("data", "residual", "boundary", "total"), values):
        if not math.isfinite(value):
            raise NonFiniteError(f"non-finite {label} loss", label=label)
    grads = [pairwise_sum([r[1][k] for r in results]) for k in range(len(results[0][1]))]
    grad_xi = pairwise_sum([r[2] for r in results])
    for label, g in zip(net.parameter_labels() + ["xi"], grads + [grad_xi]):
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for {label}", label=label)
    return LossValues(*values), grads, grad_xi


@dataclass(frozen=True)
class EpochRecord:
    """Loss terms and inferred SI parameters before an epoch's update"""

    epoch: int
    data: float
    residual: float
    boundary: float
    total: float
    tau_r: float
    E0: float


FIELDS = ("epoch", "L_d", "L_r", "L_b", "L", "tau_r", "E0")


@dataclass
class TrainReport:
    """Thinned training history"""

    records: list = field(default_factory=list)

    def append(self, record):
        self.records.append(record)

    @property
    def final(self):
        """The last record, or `None` for an empty report"""
        return self.records[-1] if self.records else None

    def column(self, name):
        """Return the history of one `EpochRecord` field as an array"""
        return np.array([getattr(r, name) for r in self.records])

    def write_csv(self, path):
        """Write the history with columns `epoch,L_d,L_r,L_b,L,tau_r,E0`"""
        with open(path, "w", newline="") as file:
            writer = csv.writer(file)
            writer.writerow(FIELDS)
            for r in self.records:
                writer.writerow([r.epoch] + [repr(float(v)) for v in (r.data, r.residual, r.boundary, r.total, r.tau_r, r.E0)])
        return path

    @classmethod
    def from_csv(cls, path):
        """Read a history written by `write_csv()`

        Raises `SchemaError` with the row number on malformed rows.
        """
        report = cls()
        with open(path, newline="") as file:
            reader = csv.reader(file)
            header = next(reader, None)
            if header is None or tuple(header) != FIELDS:
                raise SchemaError(f"{path}: expected header {','.join(FIELDS)}", row=1)
            for row_number, row in enumerate(reader, start=2):
                try:
                    report.append(EpochRecord(int(row[0]), *(float(v) for v in row[1:7])))
                except (IndexError, ValueError, TypeError):
                    raise SchemaError(f"{path}: malformed row {row_number}", row=row_number) from None
        return report


@dataclass(frozen=True)
class TrainingOptions:
    """Hyper-parameters of an APNN training run"""

    epochs: int = 200_000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weights: LossWeights = LossWeights()
    hidden: tuple = (32, 32, 32)
    n_data_times: int = 120
    n_residual_times: int = 200
    n_stations: int = 12
    initial_stations: str = "measurement"
    output_bias: str = "zero"
    tau_r_guess: float = 0.05
    E0_guess: float = 1.5
    log_every: int = 1000
    checkpoint_every: int = 0
    threads: int = 1
    freeze_network: bool = False

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigurationError(f"training.epochs must be non-negative, got {self.epochs!r}")
        if not self.learning_rate > 0:
            raise ConfigurationError(f"training.learning_rate must be positive, got {self.learning_rate!r}")
        if self.initial_stations not in ("measurement", "all"):
            raise ConfigurationError(f"training.initial_stations must be 'measurement' or 'all', got {self.initial_stations!r}")
        if self.output_bias not in ("zero", "equilibrium"):
            raise ConfigurationError(f"training.output_bias must be 'zero' or 'equilibrium', got {self.output_bias!r}")
        if self.threads < 1:
            raise ConfigurationError(f"threads must be at least 1, got {self.threads!r}")
        if self.log_every < 1:
            raise ConfigurationError(f"training.log_every must be positive, got {self.log_every!r}")
        if not isinstance(self.freeze_network, bool):
            raise ConfigurationError(f"training.freeze_network must be true or false, got {self.freeze_network!r}")

    @property
    def sizes(self):
        """The network layer widths"""
        return (2,) + tuple(self.hidden) + (3,)


@dataclass(frozen=True, eq=False)
class TrainResult:
    """Outcome of `train()`"""

    net: MLPNet
    xi: InverseParams
    adam: AdamState
    report: TrainReport
    epoch: int


def residual_grid(dataset, length, options):
    """Return the SI residual stations and the residual time count for
    `dataset` on a vessel of `length`

    A synthetic dataset keeps the cell centres of the grid it was simulated
    on (`n_cells` in its metadata, else `options.n_stations` cells) and the
    configured `n_residual_times`. Measured data gets `n_stations` uniform
    stations over `[0, length]` and one residual time per recorded sample.
    """
    if dataset.provenance == "synthetic":
        n = int(dataset.metadata.get("n_cells", options.n_stations))
        return (np.arange(n) + 0.5) * (length / n), options.n_residual_times
    return np.linspace(0.0, length, options.n_stations), len(dataset)


def initial_state(problem, options, rng, station=None):
    """Return the initial network, inverse parameters and optimizer state

    The relaxation time starts at `tau_r_guess` cycle lengths and `E0` at
    `E0_guess` times `E_inf`.
    """
    net = MLPNet.initialize(options.sizes, rng)
    if options.output_bias == "equilibrium":
        x = 0.5 if station is None else station / problem.scales.length
        net = net.with_output_bias(area=float(problem.A0(x)), pressure=problem.p0)
    xi = problem.inverse_params(options.tau_r_guess * problem.scales.time, options.E0_guess * problem.E_inf)
    adam = AdamState.zeros_like(
        net.parameters() + [xi.as_array()],
        labels=net.parameter_labels() + ["xi"],
        learning_rate=options.learning_rate, beta1=options.beta1, beta2=options.beta2, epsilon=options.epsilon,
    )
    return net, xi, adam


def train(points, problem, options, net, xi, adam, *, start_epoch=0, checkpoint=None, rng=None, metadata=None):
    """Run full-batch Adam over the network parameters and `xi`

    One epoch is one full-batch step. Records are kept every `log_every`
    epochs and at the last one. If `checkpoint` is a path, checkpoints are
    written every `checkpoint_every` epochs and at the end.

    With `freeze_network` the network keeps its parameters and only `xi`
    is updated.

    Raises `TrainingAborted` (after writing the last finite state to
    `checkpoint`) when a loss or gradient turns non-finite.
    """
    report = TrainReport()
    end = start_epoch + options.epochs
    epoch = start_epoch
    rng_state = None if rng is None else rng.bit_generator.state

    def save(at):
        if checkpoint is None:
            return None
        save_checkpoint(checkpoint, net, xi, adam, at, rng_state, metadata)
        logger.info("wrote checkpoint at epoch %d to %s", at, checkpoint)
        return checkpoint

    logger.info("training %d epochs on %d data and %d residual points", options.epochs, *points.sizes[:2])
    while epoch < end:
        try:
            losses, grads, grad_xi = loss_gradient(net, xi, points, problem, options.weights, options.threads)
            params, adam_next = adam_step(net.parameters() + [xi.as_array()], grads + [grad_xi], adam)
        except NonFiniteError as error:
            logger.error("training aborted at epoch %d: %s", epoch, error)
            path = save(epoch)
            raise TrainingAborted(f"training aborted at epoch {epoch}: {error}", checkpoint=path) from error
        if (epoch - start_epoch) % options.log_every == 0 or epoch == end - 1:
            tau_r, E0 = problem.physical(xi)
            report.append(EpochRecord(epoch, losses.data, losses.residual, losses.boundary, losses.total, tau_r, E0))
            logger.info("epoch %d: L=%.4e (L_d=%.3e, L_r=%.3e, L_b=%.3e), tau_r=%.4g s, E0=%.4g Pa",
                        epoch, losses.total, losses.data, losses.residual, losses.boundary, tau_r, E0)
        if not options.freeze_network:
            net = MLPNet.from_parameters(params[:-1])
        xi = InverseParams.from_array(params[-1])
        adam = adam_next
        epoch += 1
        if options.checkpoint_every and (epoch - start_epoch) % options.checkpoint_every == 0 and epoch < end:
            save(epoch)
    if options.epochs:
        save(epoch)
    return TrainResult(net, xi, adam, report, epoch)


def predict_fields(net, problem, x, t):
    """Return the SI fields predicted at SI stations `x` and times `t`"""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    gx, gt = np.meshgrid(x / problem.scales.length, problem.scale_time(t), indexing="ij")
    A, u, p = net(gx.ravel(), gt.ravel())
    shape = gx.shape
    scales = problem.scales
    return FieldSnapshotSeries(
        x, t,
        scales.unscale("area", A).reshape(shape),
        scales.unscale("velocity", u).reshape(shape),
        scales.unscale("pressure", p).reshape(shape),
    )


def waveform_errors(net, problem, dataset):
    """Return the mean percentage relative errors of the predicted `A`, `u`
    (and `p`, if the dataset has it) at the dataset's station
    """
    fields = predict_fields(net, problem, [dataset.station], dataset.physical_times())
    result = {
        "A": mean_percentage_relative_error(fields.A[0], dataset.A),
        "u": mean_percentage_relative_error(fields.u[0], dataset.u),
    }
    if dataset.p is not None:
        result["p"] = mean_percentage_relative_error(fields.p[0], dataset.p)
    return result


def field_errors(net, problem, reference):
    """Return the mean percentage relative errors over a full reference
    field series
    """
    fields = predict_fields(net, problem, reference.x, reference.t)
    return {name: mean_percentage_relative_error(getattr(fields, name), getattr(reference, name)) for name in ("A", "u", "p")}


def parameter_errors(problem, xi, tau_r, E0):
    """Return the percentage errors of the inferred SI parameters"""
    inferred_tau, inferred_E0 = problem.physical(xi)
    return {
        "tau_r": 100.0 * abs(inferred_tau - tau_r) / tau_r,
        "E0": 100.0 * abs(inferred_E0 - E0) / E0,
    }
