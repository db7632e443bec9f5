"""Numerical laboratory for conformally flat asymptotically flat 3-metrics.

Builds harmonic coordinates on explicit metrics g = phi^4 * delta, evaluates
the harmonic-coordinate mass lower bound, extracts the almost-orthonormal
regular subregion, and measures its boundary area, cylinder volumes, chart
image coverage and geodesic diagnostics across a mass sweep.
"""

from afmass.conformal import AFParams, ConformalFactor, MetricGrid, build_conformal_factor

__all__ = [
    "AFParams",
    "ConformalFactor",
    "MetricGrid",
    "build_conformal_factor",
]

__version__ = "0.1.0"
