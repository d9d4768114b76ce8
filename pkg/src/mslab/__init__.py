"""Multiscale finite element laboratory for high-contrast elliptic problems.

Coarse spaces are built per oversampling patch by constrained local solves:
an element-based orthogonal-decomposition baseline (lod), repeated local
subspace iteration (lssi-n) and a local Krylov space of the patch solution
operator (lksi-n).  Spectral diagnostics verify the convergence theory.
"""

from . import coeff, fem, grid, localsolve, msbasis, msgalerkin, specdiag
from .errors import MsLabError

__all__ = [
    "coeff", "fem", "grid", "localsolve", "msbasis", "msgalerkin", "specdiag",
    "MsLabError",
]

__version__ = "0.1.0"
