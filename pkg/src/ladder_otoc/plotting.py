"""Minimal line plots written as self-contained, byte-stable SVG."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_STYLES = ("-", "--", ":", "-.")


@dataclass(frozen=True)
class Curve:
    """``y`` against the panel's x column; ``band`` names a 1-sigma column."""

    y: str
    label: str
    style: str = "-"
    band: str | None = None


@dataclass(frozen=True)
class PlotSpec:
    x: str
    curves: tuple[Curve, ...]
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    group: str | None = None  # one line family per distinct value of this column
    logx: bool = False
    markers: bool = False


@dataclass(frozen=True, eq=False)
class Panel:
    name: str
    columns: tuple[str, ...]
    rows: list[Mapping[str, Any]] = field(repr=False)
    plot: PlotSpec | None = None


def _numeric(rows: Sequence[Mapping[str, Any]], key: str) -> list[float]:
    out = []
    for r in rows:
        v = r.get(key)
        try:
            out.append(float(v))
        except (TypeError, ValueError):
            out.append(math.nan)
    return out


def render_svg(panel: Panel) -> str:
    spec = panel.plot
    if spec is None:
        raise ValueError(f"panel {panel.name} has no plot spec")
    plt.rcParams["svg.hashsalt"] = "ladder-otoc"
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    groups: list[Any] = [None]
    if spec.group is not None:
        groups = list(dict.fromkeys(r.get(spec.group) for r in panel.rows))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for gi, g in enumerate(groups):
        rows = [r for r in panel.rows if spec.group is None or r.get(spec.group) == g]
        x = _numeric(rows, spec.x)
        color = colors[gi % len(colors)]
        for curve in spec.curves:
            y = _numeric(rows, curve.y)
            label = curve.label if g is None else f"{curve.label} ({spec.group}={g})"
            ax.plot(x, y, curve.style, color=color, label=label, marker="o" if spec.markers else None, ms=3)
            if curve.band is not None:
                s = _numeric(rows, curve.band)
                lo = [a - b for a, b in zip(y, s)]
                hi = [a + b for a, b in zip(y, s)]
                ax.fill_between(x, lo, hi, color=color, alpha=0.2, linewidth=0)
    if spec.logx:
        ax.set_xscale("log")
    ax.set_title(spec.title)
    ax.set_xlabel(spec.xlabel or spec.x)
    ax.set_ylabel(spec.ylabel)
    ax.legend(fontsize=6)
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return buf.getvalue()


def style(i: int) -> str:
    return _STYLES[i % len(_STYLES)]
