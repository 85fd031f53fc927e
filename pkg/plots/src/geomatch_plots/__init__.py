"""Render overlap-vs-noise figures from sweep CSV files."""

from geomatch_plots.render import PlotSpec, SchemaError, load_rows, render

__version__ = "0.1.0"

__all__ = ["PlotSpec", "SchemaError", "load_rows", "render", "__version__"]
