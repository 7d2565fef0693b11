"""Pure-NumPy stencil kernel, the fallback backend.

The accumulation order (diagonal first, then direction 0, 1, ...) is the
same as in the compiled kernel so both backends produce bit-identical
results.
"""

import numpy as np


def apply_stencil(diag, nbr_idx, nbr_coef, x, out=None):
    """out[i] = diag[i]*x[i] + sum_d nbr_coef[d,i]*x[nbr_idx[d,i]].

    Boundary directions are encoded as self-references with zero
    coefficient, so no masking is needed.
    """
    if out is None:
        out = np.empty_like(x)
    np.multiply(diag, x, out=out)
    for d in range(nbr_idx.shape[0]):
        out += nbr_coef[d] * x[nbr_idx[d]]
    return out
