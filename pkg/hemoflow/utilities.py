import math

import numpy as np

__all__ = [
    "only",
    "gauss_legendre",
    "pairwise_sum",
    "percentage_relative_error",
    "mean_percentage_relative_error",
    "relative_l2",
]


def only(x):
    """Return the only contained object of a length 1 collection

    Raises `ValueError` if the collection does not have length 1.
    """
    if (n := len(x)) != 1:
        raise ValueError(f"cannot demote size {n} collection to singular object")
    return x[0]


def gauss_legendre(n, a=0.0, b=1.0):
    """Return the `n`-point Gauss-Legendre nodes and weights on `[a, b]`"""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (nodes + 1.0), half * weights


def pairwise_sum(items):
    """Return the sum of `items` by a balanced pairwise tree

    The reduction order depends only on `len(items)`, which keeps sums of
    floating-point arrays reproducible for a fixed item count.
    """
    items = list(items)
    if not items:
        raise ValueError("cannot sum an empty collection")
    while len(items) > 1:
        paired = [items[i] + items[i + 1] for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            paired.append(items[-1])
        items = paired
    return items[0]


def percentage_relative_error(pred, ref):
    """Return the pointwise percentage relative error of `pred` against `ref`

    Errors are normalised by the magnitude of the reference mean, so signals
    that cross zero (velocity) do not produce unbounded values.
    """
    pred = np.asarray(pred, dtype=float)
    ref = np.asarray(ref, dtype=float)
    scale = abs(float(np.mean(ref)))
    if scale == 0.0:
        scale = float(np.max(np.abs(ref))) or 1.0
    return 100.0 * np.abs(pred - ref) / scale


def mean_percentage_relative_error(pred, ref):
    """Return the mean of `percentage_relative_error(pred, ref)`"""
    return float(np.mean(percentage_relative_error(pred, ref)))


def relative_l2(a, b):
    """Return `||a - b|| / ||b||` (the absolute norm if `b` vanishes)"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    num = math.sqrt(float(np.sum((a - b) ** 2)))
    den = math.sqrt(float(np.sum(b ** 2)))
    return num / den if den else num
