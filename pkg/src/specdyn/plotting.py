"""Figure rendering for the experiment harness.

Every experiment writes its numbers to CSV first; the plot is a rendering
of exactly those numbers, so the CSV round-trips the figure.  Rendering
goes through matplotlib's Agg backend straight to SVG files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


@dataclass(frozen=True)
class Series:
    """One labelled line: x values, y values, and an optional marker style."""

    label: str
    x: tuple
    y: tuple
    marker: str = "o"


@dataclass(frozen=True)
class AxesSpec:
    xlabel: str = ""
    ylabel: str = ""
    title: str = ""
    ylog: bool = False
    xlog: bool = False
    extra: dict = field(default_factory=dict)


def render_plot(series_list: list[Series], axes: AxesSpec, path) -> None:
    """Render labelled line series to a self-contained SVG file.

    An empty series list still produces a valid figure with axes; a
    single-point series shows as a lone marker.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for s in series_list:
        ax.plot(s.x, s.y, marker=s.marker, markersize=3.5, linewidth=1.2,
                label=s.label)
    if axes.ylog:
        ax.set_yscale("log")
    if axes.xlog:
        ax.set_xscale("log")
    ax.set_xlabel(axes.xlabel)
    ax.set_ylabel(axes.ylabel)
    if axes.title:
        ax.set_title(axes.title)
    if series_list:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
