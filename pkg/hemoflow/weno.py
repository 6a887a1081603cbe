import numpy as np

from .errors import ConfigurationError

__all__ = ["weno3_faces", "weno3_reconstruct"]

BOUNDARIES = ("extrapolate", "periodic")
WEIGHTS    = ("z", "js", "linear")


def pad(q, boundary):
    """Return `q` with one ghost cell on each side along the last axis"""
    if boundary == "periodic":
        return np.concatenate((q[..., -1:], q, q[..., :1]), axis=-1)
    left = 2.0 * q[..., :1] - q[..., 1:2]
    right = 2.0 * q[..., -1:] - q[..., -2:-1]
    return np.concatenate((left, q, right), axis=-1)


def nonlinear_weights(d0, d1, b0, b1, weights, epsilon):
    if weights == "linear":
        return d0, d1
    if weights == "js":
        a0 = d0 / (epsilon + b0) ** 2
        a1 = d1 / (epsilon + b1) ** 2
    else:
        tau = np.abs(b0 - b1)
        a0 = d0 * (1.0 + (tau / (b0 + epsilon)) ** 2)
        a1 = d1 * (1.0 + (tau / (b1 + epsilon)) ** 2)
    total = a0 + a1
    return a0 / total, a1 / total


def weno3_faces(q, boundary="extrapolate", weights="z", epsilon=1e-12):
    """Return the third-order WENO values of each cell at its lower and
    upper faces

    `q` holds cell averages along its last axis (leading axes are treated as
    independent components). Returns `(lower, upper)`, both shaped like `q`.

    `weights="linear"` uses the ideal weights, which reproduce quadratic
    averages exactly and overshoot at jumps. The nonlinear `"z"` and `"js"`
    weights stay bounded at jumps and are only second order at smooth
    extrema.

    Raises `ConfigurationError` if there are fewer than 3 cells or an option
    is unknown.
    """
    q = np.asarray(q, dtype=float)
    n = q.shape[-1]
    if n < 3:
        raise ConfigurationError(f"WENO reconstruction needs at least 3 cells, got {n}")
    if boundary not in BOUNDARIES:
        raise ConfigurationError(f"unknown boundary treatment {boundary!r}")
    if weights not in WEIGHTS:
        raise ConfigurationError(f"unknown WENO weights {weights!r}")

    g = pad(q, boundary)
    qm = g[..., :-2]
    q0 = g[..., 1:-1]
    qp = g[..., 2:]

    b0 = (q0 - qm) ** 2
    b1 = (qp - q0) ** 2

    # Upper face: stencils {i-1, i} and {i, i+1} with ideal weights 1/3, 2/3
    w0, w1 = nonlinear_weights(1 / 3, 2 / 3, b0, b1, weights, epsilon)
    upper = w0 * (1.5 * q0 - 0.5 * qm) + w1 * (0.5 * q0 + 0.5 * qp)

    # Lower face mirrors the ideal weights
    w0, w1 = nonlinear_weights(2 / 3, 1 / 3, b0, b1, weights, epsilon)
    lower = w0 * (0.5 * qm + 0.5 * q0) + w1 * (1.5 * q0 - 0.5 * qp)

    return lower, upper


def weno3_reconstruct(q, boundary="extrapolate", weights="z", epsilon=1e-12):
    """Return the left and right states at every cell interface

    For `n` cells there are `n + 1` interfaces; `left[j]` is the trace of
    cell `j - 1` and `right[j]` the trace of cell `j`. On the two domain
    boundaries of a non-periodic grid the missing outer trace repeats the
    interior one, to be replaced by a boundary condition.
    """
    lower, upper = weno3_faces(q, boundary=boundary, weights=weights, epsilon=epsilon)
    if boundary == "periodic":
        left = np.concatenate((upper[..., -1:], upper), axis=-1)
        right = np.concatenate((lower, lower[..., :1]), axis=-1)
    else:
        left = np.concatenate((lower[..., :1], upper), axis=-1)
        right = np.concatenate((lower, upper[..., -1:]), axis=-1)
    return left, right
