"""PNG renderings of the report series (Agg canvas, no pyplot state)."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

# keep files reproducible across runs
_META = {"Software": None}


def _save(fig: Figure, path) -> None:
    FigureCanvasAgg(fig)
    fig.tight_layout()
    fig.savefig(path, format="png", dpi=100, metadata=_META)


def _ber_axis(ax, bers) -> np.ndarray:
    """Symlog-free BER axis: zero is drawn one decade left of the smallest BER."""
    bers = np.asarray(bers, dtype=float)
    pos = bers[bers > 0]
    floor = pos.min() / 10 if len(pos) else 1e-9
    ax.set_xscale("log")
    ax.set_xlabel("bit error rate")
    return np.where(bers > 0, bers, floor)


def rounding_study(path, series: Mapping[str, tuple[Sequence[float], Sequence[float]]]) -> None:
    fig = Figure(figsize=(5, 3.5))
    ax = fig.add_subplot()
    for name, (bers, acc) in series.items():
        ax.plot(_ber_axis(ax, bers), acc, marker="o", label=name)
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1)
    ax.legend(title="rounding")
    _save(fig, path)


def tolerance(path, bers, curves: Mapping[str, tuple[Sequence[float], Sequence[float]]], ber_th=None) -> None:
    fig = Figure(figsize=(5, 3.5))
    ax = fig.add_subplot()
    x = _ber_axis(ax, bers)
    for name, (mean, std) in curves.items():
        ax.errorbar(x, mean, yerr=std, marker="o", capsize=3, label=name)
    if ber_th is not None:
        ax.axvline(ber_th, color="grey", linestyle="--", label="BER threshold")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1)
    ax.legend()
    _save(fig, path)


def energy(path, voltages, saving: Mapping[str, Sequence[float]], speedup: Mapping[str, Sequence[float]]) -> None:
    fig = Figure(figsize=(9, 3.5))
    left, right = fig.add_subplot(1, 2, 1), fig.add_subplot(1, 2, 2)
    for name, ys in saving.items():
        left.plot(voltages, ys, marker="o", label=name)
    for name, ys in speedup.items():
        right.plot(voltages, ys, marker="o", label=name)
    left.set_ylabel("energy saving vs FP32 baseline at nominal")
    right.set_ylabel("throughput speed-up")
    for ax in (left, right):
        ax.set_xlabel("supply voltage (V)")
        ax.invert_xaxis()
        ax.legend(fontsize="small")
    _save(fig, path)


def selection_map(path, mus, epss, selected: Mapping[tuple[float, float], str]) -> None:
    names = sorted(set(selected.values()))
    grid = np.array([[names.index(selected[(m, e)]) for e in epss] for m in mus])
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    ax.imshow(grid, cmap="tab20", vmin=0, vmax=max(len(names) - 1, 1), origin="lower", aspect="auto")
    ax.set_xticks(range(len(epss)), [f"{e:g}" for e in epss])
    ax.set_yticks(range(len(mus)), [f"{m:g}" for m in mus])
    ax.set_xlabel("eps (energy weight)")
    ax.set_ylabel("mu (memory weight)")
    for i in range(len(mus)):
        for j in range(len(epss)):
            ax.text(j, i, names[grid[i, j]], ha="center", va="center", fontsize=6)
    _save(fig, path)


def rewards(path, mus, curves: Mapping[str, Sequence[float]], eps: float) -> None:
    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    for name, ys in curves.items():
        ax.plot(mus, ys, marker=".", label=name)
    ax.set_xlabel("mu (memory weight)")
    ax.set_ylabel(f"reward at eps={eps:g}")
    ax.legend(fontsize="x-small", ncol=2)
    _save(fig, path)
