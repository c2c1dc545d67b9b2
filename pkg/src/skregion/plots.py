"""Figure rendering for region and boundary reports.

Figures are written straight to files (Agg backend, no display) next to
the delimited output the commands produce.  Axes follow the usual
rate-region convention: secret-message rate on x, secret-key rate on y.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .regions import RegionPolygon  # noqa: E402

_DPI = 150


def _save(fig, path: str | Path):
    # Pin metadata so seeded commands stay byte-identical across runs.
    fig.savefig(path, dpi=_DPI, metadata={"Software": "skregion"})
    plt.close(fig)


def _region_outline(poly: RegionPolygon) -> tuple[list[float], list[float]]:
    pts = list(poly.vertices) + [poly.vertices[0]]
    xs = [sm for _, sm in pts]
    ys = [sk for sk, _ in pts]
    return xs, ys


def plot_region(poly: RegionPolygon, path: str | Path, title: str = "rate region"):
    fig, ax = plt.subplots(figsize=(5, 4))
    xs, ys = _region_outline(poly)
    ax.fill(xs, ys, alpha=0.25, color="tab:blue")
    ax.plot(xs, ys, color="tab:blue", lw=1.5)
    ax.set_xlabel("$R_{SM}$ (bits/use)")
    ax.set_ylabel("$R_{SK}$ (bits/use)")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.set_xlim(left=0)
    ax.set_ylim(bottom=0)
    _save(fig, path)


def plot_boundary(
    points: list[tuple[float, float]], path: str | Path, title: str = "rate boundary"
):
    """Boundary given as (r_sk, r_sm) pairs."""
    fig, ax = plt.subplots(figsize=(5, 4))
    xs = [sm for _, sm in points]
    ys = [sk for sk, _ in points]
    ax.plot(xs, ys, color="tab:blue", lw=1.5)
    ax.fill_between(xs, ys, alpha=0.25, color="tab:blue")
    ax.set_xlabel("$R_{SM}$ (bits/use)")
    ax.set_ylabel("$R_{SK}$ (bits/use)")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.set_xlim(left=0)
    ax.set_ylim(bottom=0)
    _save(fig, path)


def plot_comparison(
    first: list[tuple[float, float]],
    second: list[tuple[float, float]],
    path: str | Path,
    labels: tuple[str, str] = ("first", "second"),
):
    fig, ax = plt.subplots(figsize=(5, 4))
    for pts, label, color in ((first, labels[0], "tab:blue"), (second, labels[1], "tab:orange")):
        xs = [sm for _, sm in pts]
        ys = [sk for sk, _ in pts]
        ax.plot(xs, ys, lw=1.5, label=label, color=color)
    ax.set_xlabel("$R_{SM}$ (bits/use)")
    ax.set_ylabel("$R_{SK}$ (bits/use)")
    ax.legend()
    ax.grid(True, alpha=0.3)
    ax.set_xlim(left=0)
    ax.set_ylim(bottom=0)
    _save(fig, path)
