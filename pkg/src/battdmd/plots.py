"""File-backed figure rendering for command-line reports (Agg only, no display)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIG_DPI = 120


def _save(fig, path):
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)


def plot_record(series, path, title: str = "") -> None:
    """Voltage and current panels against elapsed hours."""
    hours = (series.t - series.t[0]) / 3600.0
    fig, (ax_v, ax_i) = plt.subplots(2, 1, sharex=True, figsize=(9, 5))
    ax_v.plot(hours, series.v, lw=0.8, color="tab:blue")
    ax_v.set_ylabel("voltage [V]")
    ax_v.grid(alpha=0.3)
    if title:
        ax_v.set_title(title)
    ax_i.plot(hours, series.i, lw=0.8, color="tab:orange")
    ax_i.set_ylabel("current [A]")
    ax_i.set_xlabel("time [h]")
    ax_i.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_forecast(t_s, measured, predicted, path, windows_s=(), title: str = "") -> None:
    """Measured vs forecast overlay, with optional zoomed elapsed-time windows."""
    t_s = np.asarray(t_s, dtype=float)
    elapsed_h = (t_s - t_s[0]) / 3600.0
    windows = [w for w in windows_s if np.any(
        (elapsed_h * 3600.0 >= w[0]) & (elapsed_h * 3600.0 <= w[1]))]
    n_zoom = len(windows)
    rows = 1 + (1 if n_zoom else 0)
    fig = plt.figure(figsize=(9, 3.2 * rows))
    ax = fig.add_subplot(rows, 1, 1)
    ax.plot(elapsed_h, measured, lw=0.8, color="k", label="measured")
    ax.plot(elapsed_h, predicted, lw=0.8, color="tab:red", ls="--", label="forecast")
    ax.set_xlabel("time [h]")
    ax.set_ylabel("voltage [V]")
    ax.grid(alpha=0.3)
    ax.legend(loc="best")
    if title:
        ax.set_title(title)
    for k, (a, b) in enumerate(windows):
        axz = fig.add_subplot(rows, n_zoom, n_zoom + 1 + k)
        mask = (elapsed_h * 3600.0 >= a) & (elapsed_h * 3600.0 <= b)
        axz.plot(elapsed_h[mask], np.asarray(measured)[mask], lw=0.8, color="k")
        axz.plot(elapsed_h[mask], np.asarray(predicted)[mask], lw=0.8, color="tab:red", ls="--")
        axz.set_title(f"{a / 3600.0:g}-{b / 3600.0:g} h", fontsize=9)
        axz.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_sweep(points, best, path, xlabel: str, title: str = "") -> None:
    """Residual against the swept parameter, best point highlighted."""
    params = [p.param for p in points]
    values = [p.rss for p in points]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(params, values, "o-", ms=4, color="tab:blue")
    if best is not None:
        best_rss = min(v for p, v in zip(params, values) if p == best)
        ax.plot([best], [best_rss], "s", ms=9, mfc="none", mec="tab:red",
                label=f"best {xlabel} = {best}")
        ax.legend(loc="best")
    if values and min(values) > 0:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("RSS [V$^2$]")
    ax.grid(alpha=0.3, which="both")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def plot_transfer(rows, path, title: str = "") -> None:
    """RSS per cycle, one line per model kind. rows: (cycle, kind, rss)."""
    kinds = sorted({kind for _, kind, _ in rows})
    fig, ax = plt.subplots(figsize=(7, 4))
    for kind in kinds:
        pts = sorted((cycle, value) for cycle, k, value in rows if k == kind)
        ax.plot([c for c, _ in pts], [v for _, v in pts], "o-", ms=5, label=kind)
    ax.set_xlabel("cycle")
    ax.set_ylabel("RSS [V$^2$]")
    ax.grid(alpha=0.3)
    ax.legend(loc="best")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def plot_poles(eigenvalues, path, title: str = "") -> None:
    """Operator poles on the complex plane with the unit circle."""
    w = np.asarray(eigenvalues)
    fig, ax = plt.subplots(figsize=(5, 5))
    theta = np.linspace(0.0, 2.0 * np.pi, 256)
    ax.plot(np.cos(theta), np.sin(theta), color="k", lw=0.8, ls="--")
    ax.scatter(w.real, w.imag, s=14, color="tab:blue")
    ax.set_aspect("equal")
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")
    ax.grid(alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)
