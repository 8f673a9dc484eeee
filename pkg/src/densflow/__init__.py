"""Geometry and dynamics on spaces of probability densities over flat tori.

The package couples three layers:

* spectral calculus on periodic grids (``grid``),
* the density manifold with its transport and information geometries,
  potential functionals, and the polar/Hopf-Cole transforms
  (``spaces``, ``potentials``, ``transforms``),
* time steppers for the induced fluid and quantum systems plus Casimir
  diagnostics (``dynamics_wo``, ``dynamics_fr``, ``quantum``,
  ``casimirs``), driven by the ``densflow`` command line (``cli``).
"""

from .grid import Grid, SpectralBlowupError, load_field, save_field
from .spaces import (
    ConvergenceError,
    Density,
    PositivityError,
    TangentDensity,
    ThetaFR,
    ThetaWO,
    WaveFunction,
    fr_distance,
    fr_geodesic,
    fr_gradient,
    fr_metric,
    fubini_study_metric,
    sasaki_fr_metric,
    sqrt_map,
    sqrt_map_inverse,
    weighted_poisson_solve,
    wo_gradient,
    wo_metric,
)

__all__ = [
    "Grid",
    "SpectralBlowupError",
    "save_field",
    "load_field",
    "Density",
    "TangentDensity",
    "ThetaWO",
    "ThetaFR",
    "WaveFunction",
    "PositivityError",
    "ConvergenceError",
    "fr_metric",
    "wo_metric",
    "weighted_poisson_solve",
    "wo_gradient",
    "fr_gradient",
    "sqrt_map",
    "sqrt_map_inverse",
    "fr_distance",
    "fr_geodesic",
    "sasaki_fr_metric",
    "fubini_study_metric",
]

__version__ = "0.1.0"
