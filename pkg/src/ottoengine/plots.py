"""Matplotlib renderings of simulation reports and sweep figures.

The CSV files remain the data contract; these renderers draw the same rows
into PNGs placed alongside them so a run is inspectable without extra tooling.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import BoundaryNorm, ListedColormap

from .qcore import DiscreteDistribution
from .sweep import SweepResult, SweepSpec

_REGIME_ORDER = ("Engine", "Accelerator", "Heater", "Other")
_REGIME_COLORS = ("#2a9d8f", "#e9c46a", "#e76f51", "#bdbdbd")


def render_work_distributions(
    dist_tpm: DiscreteDistribution, dist_dbn: DiscreteDistribution, path: str
) -> None:
    """Stem plot of the two work distributions on a shared value axis."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.vlines(dist_tpm.values, 0, dist_tpm.probs, color="#d62728",
              lw=2.2, alpha=0.8, label="TPM")
    ax.vlines(dist_dbn.values + 0.0, 0, dist_dbn.probs, color="#1f77b4",
              lw=1.2, alpha=0.9, label="DBN")
    ax.set_xlabel("w")
    ax.set_ylabel("P(w)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _column(results, name):
    vals = [r.values.get(name) for r in results]
    return np.array([np.nan if v is None else v for v in vals], dtype=float)


def _axis_values(results, pos):
    return np.array([r.params[pos][1] for r in results])


def _render_curves(spec, results, names, ylabel, path, ratio_to=None):
    x = _axis_values(results, 0)
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in names:
        y = _column(results, name)
        if ratio_to is not None:
            y = y / _column(results, ratio_to)
        ax.plot(x, y, marker="o", ms=3, label=name)
    if ratio_to is not None:
        ax.axhline(1.0, color="k", ls="--", lw=0.8)
    ax.set_xlabel(spec.axes[0].label)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _grid_view(spec, results, name):
    shape = spec.grid_shape()
    vals = _column(results, name).reshape(shape)
    xs = np.array(spec.axes[0].values)
    ys = np.array(spec.axes[1].values)
    return xs, ys, vals


def _render_contours(spec, results, names, path):
    fig, axes = plt.subplots(1, len(names), figsize=(5 * len(names), 4),
                             squeeze=False)
    for ax, name in zip(axes[0], names):
        xs, ys, vals = _grid_view(spec, results, name)
        m = ax.pcolormesh(xs, ys, vals.T, shading="nearest")
        fig.colorbar(m, ax=ax, label=name)
        ax.set_xlabel(spec.axes[0].label)
        ax.set_ylabel(spec.axes[1].label)
        ax.set_title(name)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _render_regimes(spec, results, names, path):
    cmap = ListedColormap(_REGIME_COLORS)
    norm = BoundaryNorm(np.arange(-0.5, len(_REGIME_ORDER)), cmap.N)
    fig, axes = plt.subplots(1, len(names), figsize=(5.5 * len(names), 4),
                             squeeze=False)
    shape = spec.grid_shape()
    for ax, name in zip(axes[0], names):
        codes = np.array(
            [_REGIME_ORDER.index(r.values[name]) if r.values[name] in _REGIME_ORDER
             else _REGIME_ORDER.index("Other")
             for r in results],
            dtype=float,
        ).reshape(shape)
        xs = np.array(spec.axes[0].values)
        ys = np.array(spec.axes[1].values)
        m = ax.pcolormesh(xs, ys, codes.T, cmap=cmap, norm=norm, shading="nearest")
        cbar = fig.colorbar(m, ax=ax, ticks=range(len(_REGIME_ORDER)))
        cbar.ax.set_yticklabels(_REGIME_ORDER)
        ax.set_xlabel(spec.axes[0].label)
        ax.set_ylabel(spec.axes[1].label)
        ax.set_title(name)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_figure(
    name: str, spec: SweepSpec, results: list[SweepResult], path: str
) -> None:
    """Draw the named preset figure from its sweep rows."""
    if name == "fig1":
        _render_curves(spec, results,
                       ("kl", "coherence_rho1", "coherence_rho3"),
                       "KL / coherence", path)
    elif name == "fig2":
        _render_curves(spec, results,
                       ("trace_distance_tpm", "trace_distance_dbn"),
                       "trace distance", path)
    elif name == "fig3a":
        _render_regimes(spec, results, ("regime_unmeasured", "regime_dbn"), path)
    elif name == "fig3b":
        _render_regimes(spec, results, ("regime_tpm",), path)
    elif name == "fig4":
        _render_curves(spec, results, ("eta2_tpm", "eta2_dbn"),
                       "eta2 / bound", path, ratio_to="bound")
    elif name in ("figS2", "figS3", "figS5"):
        _render_contours(spec, results, spec.outputs, path)
    elif name == "figS4":
        fig_results = results
        shape = spec.grid_shape()
        fig, axes = plt.subplots(1, 2, figsize=(11, 4))
        xs = np.array(spec.axes[0].values)
        ys = np.array(spec.axes[1].values)
        bound = _column(fig_results, "bound").reshape(shape)
        for ax, name_ in zip(axes, ("eta2_dbn", "eta2_tpm")):
            ratio = _column(fig_results, name_).reshape(shape) / bound
            m = ax.pcolormesh(xs, ys, ratio.T, shading="nearest")
            fig.colorbar(m, ax=ax, label=f"{name_} / bound")
            ax.contour(xs, ys, ratio.T, levels=[1.0], colors="w",
                       linestyles="dashed")
            ax.set_xlabel(spec.axes[0].label)
            ax.set_ylabel(spec.axes[1].label)
            ax.set_title(name_)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)
    else:
        raise ValueError(f"unknown figure name {name!r}")
