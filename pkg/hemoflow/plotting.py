import logging

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .utilities import mean_percentage_relative_error, only, percentage_relative_error

__all__ = [
    "plot_waveforms",
    "plot_field_map",
    "plot_history",
]

logger = logging.getLogger(__name__)

# Fixed salt and no date stamp make the SVG output byte-stable
plt.rcParams["svg.hashsalt"] = "hemoflow"
plt.rcParams["svg.fonttype"] = "none"

LABELS = {
    "A": ("area", "A [cm²]", 1e4),
    "u": ("velocity", "u [cm/s]", 1e2),
    "p": ("pressure", "p [mmHg]", 1.0 / 133.322387415),
}


def save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info("wrote %s", path)
    return path


def plot_waveforms(reference, prediction, path, title=None):
    """Draw reference and predicted waveforms at one station with their
    pointwise percentage relative errors below

    `reference` is a `WaveformDataset`; `prediction` a `FieldSnapshotSeries`
    at the same station and times. Returns the mean error per variable,
    which is also written into each panel. Raises `ValueError` if
    `prediction` holds more than one station.
    """
    t = reference.physical_times()
    names = ["A", "u"] + (["p"] if reference.p is not None else [])
    fig, axes = plt.subplots(2, len(names), figsize=(4.2 * len(names), 5.6), sharex=True, squeeze=False)
    errors = {}
    for j, name in enumerate(names):
        _, label, factor = LABELS[name]
        ref = getattr(reference, name)
        pred = only(getattr(prediction, name))
        errors[name] = mean_percentage_relative_error(pred, ref)
        top, bottom = axes[0, j], axes[1, j]
        top.plot(t, factor * ref, color="black", label="reference")
        top.plot(t, factor * pred, color="tab:red", linestyle="--", label="prediction")
        top.set_ylabel(label)
        top.text(0.98, 0.95, f"mean PRE {errors[name]:.3f}%", transform=top.transAxes, ha="right", va="top")
        bottom.plot(t, percentage_relative_error(pred, ref), color="tab:blue")
        bottom.set_ylabel("PRE [%]")
        bottom.set_xlabel("t [s]")
    axes[0, 0].legend(loc="upper left")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    save(fig, path)
    return errors


def plot_field_map(fields, path, title=None):
    """Draw space-time maps of the area, velocity and pressure fields"""
    fig, axes = plt.subplots(1, 3, figsize=(13.0, 3.8), squeeze=False)
    x = 100.0 * fields.x
    t = fields.t
    for ax, name in zip(axes[0], ("A", "u", "p")):
        _, label, factor = LABELS[name]
        values = factor * getattr(fields, name)
        if x.size > 1 and t.size > 1:
            mesh = ax.pcolormesh(t, x, values, shading="nearest", cmap="viridis")
            ax.set_xlim(t[0], t[-1])
            ax.set_ylim(x[0], x[-1])
        else:
            # Degenerate grid: one station or one time
            mesh = ax.imshow(values, aspect="auto", cmap="viridis", origin="lower",
                             extent=(t[0], t[-1] + 1e-12, x[0], x[-1] + 1e-12))
        fig.colorbar(mesh, ax=ax, label=label)
        ax.set_xlabel("t [s]")
        ax.set_ylabel("x [cm]")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return save(fig, path)


def plot_history(report, path, reference=None):
    """Draw the loss terms and inferred parameters of a training run

    `reference` may map `tau_r` and `E0` to their true values, drawn as
    horizontal lines.
    """
    epochs = report.column("epoch")
    fig, axes = plt.subplots(1, 3, figsize=(13.0, 3.6))
    for name, label in (("data", "$L_d$"), ("residual", "$L_r$"), ("boundary", "$L_b$"), ("total", "$L$")):
        values = np.maximum(report.column(name), np.finfo(float).tiny)
        axes[0].semilogy(epochs, values, label=label)
    axes[0].set_xlabel("epoch")
    axes[0].set_ylabel("loss")
    axes[0].legend()
    reference = reference or {}
    for ax, name, label, factor in ((axes[1], "tau_r", "τ_r [s]", 1.0), (axes[2], "E0", "E0 [MPa]", 1e-6)):
        ax.plot(epochs, factor * report.column(name), color="tab:red", label="inferred")
        if name in reference:
            ax.axhline(factor * reference[name], color="black", linestyle="--", label="reference")
        ax.set_xlabel("epoch")
        ax.set_ylabel(label)
        ax.legend()
    fig.tight_layout()
    return save(fig, path)
