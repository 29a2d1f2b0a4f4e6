"""Dissipative billiards in convex planar domains.

Computes the objects attached to the dissipative billiard map
f_lambda = H_lambda . f (elastic bounce followed by a fibre contraction of
the reflection sine): global and Birkhoff attractors on cell grids,
2-periodic orbit classification with bifurcation thresholds, invariant
manifolds of saddle orbits, normally contracted graph attractors under
strong dissipation, and upper/lower rotation numbers of the accessible
sets, including the phase transition as the dissipation strength varies.
"""

from ._kernels import backend_name
from .geometry import (
    BoundaryCurve,
    ChordResult,
    DkCertificate,
    EllipseSpec,
    check_pinched,
    chord,
    curve_from_spec,
    make_ellipse,
    make_flattened_oval,
    make_fourier_perturbed,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryCurve",
    "ChordResult",
    "DkCertificate",
    "EllipseSpec",
    "backend_name",
    "check_pinched",
    "chord",
    "curve_from_spec",
    "make_ellipse",
    "make_flattened_oval",
    "make_fourier_perturbed",
    "__version__",
]
