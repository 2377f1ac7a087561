"""Steklov spectra of the modified Helmholtz operator on planar domains."""

from . import analysis, analytic, cli, conjecture, dtn, fem, geometry, greens, mesh, pipeline

__version__ = "0.1.0"

__all__ = [
    "analysis",
    "analytic",
    "cli",
    "conjecture",
    "dtn",
    "fem",
    "geometry",
    "greens",
    "mesh",
    "pipeline",
    "__version__",
]
