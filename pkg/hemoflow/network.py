import json
import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .autodiff import exp, log, sigmoid, softplus, tanh, value_of
from .errors import NonFiniteError, SchemaError
from .optim import AdamState

__all__ = [
    "MLPNet",
    "InverseParams",
    "FieldOutputs",
    "forward_with_input_derivs",
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_VERSION = 1

FieldOutputs = namedtuple("FieldOutputs", ["A", "u", "p", "A_x", "A_t", "u_x", "u_t", "p_x", "p_t"])


class MLPNet:
    """A fully connected tanh network mapping `(x, t)` to `(A, u, p)`

    Layers act on row vectors, `h @ W + b`. The area head passes through a
    softplus, so predicted areas are positive; the velocity and pressure
    heads are linear.
    """

    __slots__ = ("weights", "biases")

    def __init__(self, weights, biases):
        """Construct a network from per-layer weight matrices and bias vectors

        Raises `ValueError` if the shapes do not chain, the network is not
        2-in/3-out, or a parameter is not finite.
        """
        weights = [np.array(W, dtype=float) for W in weights]
        biases = [np.array(b, dtype=float) for b in biases]
        if not weights or len(weights) != len(biases):
            raise ValueError("need one bias vector per weight matrix")
        for i, (W, b) in enumerate(zip(weights, biases)):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise ValueError(f"layer {i} has inconsistent shapes {W.shape} and {b.shape}")
            if i and W.shape[0] != weights[i - 1].shape[1]:
                raise ValueError(f"layer {i} expects {W.shape[0]} inputs, previous layer gives {weights[i - 1].shape[1]}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i} has non-finite parameters")
        if weights[0].shape[0] != 2 or weights[-1].shape[1] != 3:
            raise ValueError("network must map 2 inputs to 3 outputs")
        self.weights = weights
        self.biases = biases

    @classmethod
    def initialize(cls, sizes=(2, 32, 32, 32, 3), rng=None):
        """Return a network with Glorot-uniform weights and zero biases

        `rng` is a `numpy.random.Generator` or a seed.
        """
        rng = np.random.default_rng(rng)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @classmethod
    def zeros(cls, sizes=(2, 32, 32, 32, 3)):
        """Return a network whose parameters are all zero"""
        weights = [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
        biases = [np.zeros(b) for b in sizes[1:]]
        return cls(weights, biases)

    @classmethod
    def from_parameters(cls, params):
        """Construct a network from the flat list `[W1, b1, W2, b2, ...]`"""
        return cls(params[0::2], params[1::2])

    def __repr__(self):
        """Return a short representation of the network"""
        return f"MLPNet(sizes={self.sizes!r})"

    @property
    def sizes(self):
        """The layer widths, inputs first"""
        return (self.weights[0].shape[0],) + tuple(W.shape[1] for W in self.weights)

    @property
    def n_parameters(self):
        """The total number of scalar parameters"""
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def parameters(self):
        """Return the flat parameter list `[W1, b1, W2, b2, ...]`"""
        result = []
        for W, b in zip(self.weights, self.biases):
            result.extend((W, b))
        return result

    def parameter_labels(self):
        """Return a label for every entry of `parameters()`"""
        result = []
        for i in range(len(self.weights)):
            result.extend((f"W{i + 1}", f"b{i + 1}"))
        return result

    def with_output_bias(self, area=None, pressure=None):
        """Return a copy whose output biases reproduce the given area and
        pressure when the last hidden layer is silent

        The area bias inverts the softplus head.
        """
        biases = [b.copy() for b in self.biases]
        if area is not None:
            if not area > 0:
                raise ValueError(f"area must be positive, got {area!r}")
            biases[-1][0] = math.log(math.expm1(area))
        if pressure is not None:
            biases[-1][2] = pressure
        return MLPNet([W.copy() for W in self.weights], biases)

    def __call__(self, x, t, params=None):
        """Return `(A, u, p)` at inputs `(x, t)`

        `params` replaces the stored parameters, e.g. with tape variables.
        """
        params = self.parameters() if params is None else params
        h = np.stack((np.atleast_1d(np.asarray(x, dtype=float)), np.atleast_1d(np.asarray(t, dtype=float))), axis=1)
        last = len(params) // 2 - 1
        for l in range(last + 1):
            z = h @ params[2 * l] + params[2 * l + 1]
            h = tanh(z) if l < last else z
        return softplus(h[:, 0]), h[:, 1], h[:, 2]


def forward_with_input_derivs(net, x, t, params=None):
    """Return the network outputs and their first partial derivatives with
    respect to `x` and `t`

    The two input tangents are pushed forward through every layer alongside
    the primal values; with tape variables as `params` the whole computation,
    tangents included, is recorded for reverse differentiation.
    """
    params = net.parameters() if params is None else params
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    h = np.stack((x, t), axis=1)
    dx = np.zeros_like(h)
    dx[:, 0] = 1.0
    dt = np.zeros_like(h)
    dt[:, 1] = 1.0
    last = len(params) // 2 - 1
    for l in range(last + 1):
        W, b = params[2 * l], params[2 * l + 1]
        z = h @ W + b
        dx = dx @ W
        dt = dt @ W
        if l < last:
            h = tanh(z)
            slope = 1.0 - h * h
            dx = slope * dx
            dt = slope * dt
        else:
            h = z
    slope = sigmoid(h[:, 0])
    return FieldOutputs(
        softplus(h[:, 0]), h[:, 1], h[:, 2],
        slope * dx[:, 0], slope * dt[:, 0],
        dx[:, 1], dt[:, 1],
        dx[:, 2], dt[:, 2],
    )


@dataclass(frozen=True, eq=False)
class InverseParams:
    """Learnable wall parameters, stored as logarithms of their scaled values

    Holds floats, or tape variables while a gradient is being recorded.
    """

    log_tau_r: object
    log_E0: object

    def __post_init__(self):
        for name in ("log_tau_r", "log_E0"):
            if not np.all(np.isfinite(value_of(getattr(self, name)))):
                raise NonFiniteError(f"{name} must be finite", label=name)

    @classmethod
    def from_values(cls, tau_r, E0):
        """Construct from positive scaled values"""
        if not (tau_r > 0 and E0 > 0):
            raise ValueError(f"tau_r and E0 must be positive, got {tau_r!r} and {E0!r}")
        return cls(math.log(tau_r), math.log(E0))

    @classmethod
    def from_array(cls, values):
        """Construct from the array `[log_tau_r, log_E0]`"""
        return cls(float(values[0]), float(values[1]))

    @property
    def tau_r(self):
        """The scaled relaxation time `exp(log_tau_r)`"""
        return exp(self.log_tau_r)

    @property
    def E0(self):
        """The scaled instantaneous modulus `exp(log_E0)`"""
        return exp(self.log_E0)

    def as_array(self):
        """Return `[log_tau_r, log_E0]`"""
        return np.array([float(value_of(self.log_tau_r)), float(value_of(self.log_E0))])


@dataclass(frozen=True, eq=False)
class Checkpoint:
    """Complete training state restored from a checkpoint file"""

    net: MLPNet
    xi: InverseParams
    adam: AdamState
    epoch: int
    rng_state: dict
    metadata: dict


def save_checkpoint(path, net, xi, adam, epoch, rng_state=None, metadata=None):
    """Write the training state to the `.npz` container at `path`

    Arrays are stored under `param_<i>`, `adam_m_<i>`, `adam_v_<i>` and
    `xi`; everything else goes into a JSON header.
    """
    header = {
        "version": CHECKPOINT_VERSION,
        "sizes": list(net.sizes),
        "epoch": int(epoch),
        "adam_step": int(adam.step),
        "adam": adam.hyper_parameters(),
        "rng_state": rng_state,
        "metadata": metadata or {},
    }
    arrays = {"xi": xi.as_array(), "header": np.array(json.dumps(header))}
    for i, p in enumerate(net.parameters()):
        arrays[f"param_{i}"] = p
    for i, (m, v) in enumerate(zip(adam.m, adam.v)):
        arrays[f"adam_m_{i}"] = m
        arrays[f"adam_v_{i}"] = v
    with open(path, "wb") as file:
        np.savez(file, **arrays)
    return path


def load_checkpoint(path):
    """Read a checkpoint written by `save_checkpoint()`

    Raises `SchemaError` if the file is not a checkpoint of a supported
    version.
    """
    with np.load(path, allow_pickle=False) as data:
        try:
            header = json.loads(str(data["header"]))
        except KeyError:
            raise SchemaError(f"{path}: not a checkpoint file") from None
        if header.get("version") != CHECKPOINT_VERSION:
            raise SchemaError(f"{path}: unsupported checkpoint version {header.get('version')!r}")
        count = 2 * (len(header["sizes"]) - 1)
        params = [data[f"param_{i}"] for i in range(count)]
        n_adam = sum(1 for key in data.files if key.startswith("adam_m_"))
        m = [data[f"adam_m_{i}"] for i in range(n_adam)]
        v = [data[f"adam_v_{i}"] for i in range(n_adam)]
        xi = InverseParams.from_array(data["xi"])
    net = MLPNet.from_parameters(params)
    adam = AdamState(m, v, step=header["adam_step"], labels=tuple(net.parameter_labels()) + ("xi",), **header["adam"])
    return Checkpoint(net, xi, adam, header["epoch"], header["rng_state"], header["metadata"])
