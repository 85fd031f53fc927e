"""Figure rendering for sweep result CSVs.

The input schema is the sweep harness contract:

    model,estimator,n,d,sigma,trial,seed,instance_hash,overlap,objective,runtime_ms,iterations

Rows with an empty overlap cell are flagged error rows and are skipped.
Rendering never mutates the CSV, and the style is fixed, so repeated
renders of the same file are identical.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

REQUIRED_COLUMNS = ("model", "estimator", "n", "d", "sigma", "overlap")

NUMERIC_COLUMNS = {"n": int, "d": int, "sigma": float, "overlap": float}


class SchemaError(ValueError):
    """The CSV does not conform to the sweep schema; names the bad column."""


@dataclass
class PlotSpec:
    input_csv: str | Path
    output_path: str | Path
    threshold_markers: bool = True


@dataclass
class Row:
    model: str
    estimator: str
    n: int
    d: int
    sigma: float
    overlap: float


def load_rows(path: str | Path) -> list[Row]:
    """Parse the CSV, validating the schema and numeric fields."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in REQUIRED_COLUMNS:
            if col not in header:
                raise SchemaError(f"missing required column {col!r}")
        rows: list[Row] = []
        for lineno, raw in enumerate(reader, start=2):
            if raw.get("overlap", "") in ("", None):
                continue  # flagged error row
            values = {}
            for col, cast in NUMERIC_COLUMNS.items():
                try:
                    values[col] = cast(raw[col])
                except (TypeError, ValueError) as exc:
                    raise SchemaError(
                        f"column {col!r} has non-numeric value {raw[col]!r} on line {lineno}"
                    ) from exc
            if not 0.0 <= values["overlap"] <= 1.0:
                raise SchemaError(
                    f"column 'overlap' out of [0, 1] on line {lineno}: {values['overlap']}"
                )
            rows.append(
                Row(
                    model=raw["model"],
                    estimator=raw["estimator"],
                    n=values["n"],
                    d=values["d"],
                    sigma=values["sigma"],
                    overlap=values["overlap"],
                )
            )
    if not rows:
        raise SchemaError("no aggregatable rows in CSV")
    return rows


def _aggregate(rows: list[Row]):
    """mean/std overlap per (n, d, model, estimator, sigma)."""
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        groups.setdefault((r.n, r.d, r.model, r.estimator, r.sigma), []).append(r.overlap)
    out: dict[tuple, dict[str, list]] = {}
    for (n, d, model, estimator, sigma), overlaps in sorted(groups.items()):
        curve = out.setdefault((n, d), {}).setdefault((estimator, model), {"sigma": [], "mean": [], "std": []})
        curve["sigma"].append(sigma)
        curve["mean"].append(float(np.mean(overlaps)))
        curve["std"].append(float(np.std(overlaps)))
    return out


def render(spec: PlotSpec):
    """Render one panel per (n, d) group and save to ``spec.output_path``.

    Returns the matplotlib figure (also written to disk) so callers and
    tests can inspect it.
    """
    rows = load_rows(spec.input_csv)
    panels = _aggregate(rows)
    keys = sorted(panels)
    ncols = len(keys)
    fig, axes = plt.subplots(
        1, ncols, figsize=(6.0 * ncols, 4.5), squeeze=False, sharey=True
    )
    for ax, key in zip(axes[0], keys):
        n, d = key
        curves = panels[key]
        multiple_models = len({model for _, model in curves}) > 1
        for (estimator, model), curve in sorted(curves.items()):
            label = f"{estimator} [{model}]" if multiple_models else estimator
            sigma = np.asarray(curve["sigma"])
            mean = np.asarray(curve["mean"])
            std = np.asarray(curve["std"])
            ax.plot(sigma, mean, marker="o", markersize=3, label=label)
            ax.fill_between(sigma, mean - std, mean + std, alpha=0.2)
        if spec.threshold_markers:
            perfect = n ** (-2.0 / d)
            almost = n ** (-1.0 / d)
            ax.axvline(perfect, color="gray", linestyle="--", linewidth=1.0)
            ax.axvline(almost, color="black", linestyle="--", linewidth=1.0)
            ax.text(perfect, 0.02, "$n^{-2/d}$", rotation=90, fontsize=8, va="bottom")
            ax.text(almost, 0.02, "$n^{-1/d}$", rotation=90, fontsize=8, va="bottom")
        ax.set_xscale("log")
        ax.set_ylim(-0.05, 1.05)
        ax.set_xlabel("noise level")
        ax.set_title(f"n={n}, d={d}")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
    axes[0][0].set_ylabel("mean overlap")
    fig.tight_layout()
    fig.savefig(spec.output_path, dpi=150)
    return fig
