"""peaklab: cut-cell numerics for a semilinear elliptic system.

Least-energy solutions of the pair of Poisson problems
-Lap u = v^{2/(N-2)}, -Lap v = u^p with zero Dirichlet data on both
components, their large-exponent concentration diagnostics
(normalized profiles, peak sets, energy curves), and the associated
Green-function and Robin-function machinery on balls, ellipsoids and
boxes in dimension N >= 3.
"""

__version__ = "0.1.0"

from . import _kernels  # noqa: F401  (backend selection happens on import)
