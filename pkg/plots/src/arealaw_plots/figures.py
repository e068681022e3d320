"""Figure builders: scaling scatter + bound line, convergence, rate histogram."""

from __future__ import annotations

import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .tables import SweepError, SweepTable  # noqa: E402


def build_area_figure(table: SweepTable):
    """Scatter of measured bits vs window duration, with the emitted bound line.

    One panel per (N, X) group; the bound line simply connects the
    (T_tot, bound_bits) points of the rows, so its endpoints are CSV values.
    """
    table.require("T_tot", "I_bits", "bound_bits", "N", "X")
    groups = table.groups("N", "X")
    fig, axes = plt.subplots(1, len(groups), squeeze=False,
                             figsize=(5.0 * len(groups), 3.6))
    for ax, ((n, x), rows) in zip(axes[0], sorted(groups.items())):
        rows = sorted(rows, key=lambda r: r["T_tot"])
        t = [r["T_tot"] for r in rows]
        ax.scatter(t, [r["I_bits"] for r in rows], s=18, label="measured I (bits)")
        ax.plot(t, [r["bound_bits"] for r in rows], "r-", label="bound_bits column")
        ax.set_xlabel("T_tot")
        ax.set_ylabel("bits")
        ax.set_title(f"N={n:g}, X={x:g}")
        ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def build_convergence_figure(table: SweepTable):
    """Log-log terminal-state error against the slice count."""
    table.require("m", "trotter_error")
    rows = sorted(table.rows, key=lambda r: r["m"])
    m = [r["m"] for r in rows]
    err = [r["trotter_error"] for r in rows]
    if len(m) == 1:
        warnings.warn("single-m table: plotting one point, no trend visible")
    positive = [(a, b) for a, b in zip(m, err) if b > 0]
    if not positive:
        raise SweepError("all trotter_error values are zero; nothing to plot")
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.loglog([a for a, _ in positive], [b for _, b in positive], "o-",
              label="trotter_error column")
    ax.set_xlabel("m (product-formula slices)")
    ax.set_ylabel("terminal-state error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def build_sie_figure(table: SweepTable):
    """Histogram of measured per-step entropy rates with the bound range."""
    table.require("rate_bits_per_time", "rate_bound_bits_per_time")
    rates = table.column("rate_bits_per_time")
    bounds = table.column("rate_bound_bits_per_time")
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.hist(rates, bins=24, label="measured |dS|/dt (bits/time)")
    ax.axvline(min(bounds), color="r", linestyle="--",
               label="smallest rate_bound_bits_per_time")
    ax.axvline(max(bounds), color="r", linestyle=":",
               label="largest rate_bound_bits_per_time")
    ax.set_xlabel("bits per unit time")
    ax.set_ylabel("count")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _save(fig, out_path: str | Path) -> Path:
    out = Path(out_path)
    fig.savefig(out)
    plt.close(fig)
    if not out.exists() or out.stat().st_size == 0:
        raise SweepError(f"failed to write {out}")
    return out


def plot_area_scaling(csv_path: str | Path, out_path: str | Path) -> Path:
    return _save(build_area_figure(SweepTable.read(csv_path)), out_path)


def plot_convergence(csv_path: str | Path, out_path: str | Path) -> Path:
    return _save(build_convergence_figure(SweepTable.read(csv_path)), out_path)


def plot_sie_histogram(csv_path: str | Path, out_path: str | Path) -> Path:
    return _save(build_sie_figure(SweepTable.read(csv_path)), out_path)
