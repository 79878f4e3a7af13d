"""Pure numpy implementation of the truncated jet product."""

import numpy as np


def jet_bmm(x, y, pa, pb, pc, starts, nmon):
    """Batched matrix product of jet-valued matrices.

    ``x`` has shape (B, I, J, M), ``y`` has shape (B, J, K, M); the result has
    shape (B, I, K, nmon).  Pairs ``(pa[q], pb[q])`` contribute to monomial
    ``pc[q]``; pairs are sorted by ``pc`` and ``starts`` marks each group.
    """
    if nmon == 1:
        return np.matmul(x[..., 0], y[..., 0])[..., None]
    xg = x[..., pa]
    yg = y[..., pb]
    if x.shape[2] == 1:
        z = xg * yg
    else:
        z = np.matmul(xg.transpose(0, 3, 1, 2), yg.transpose(0, 3, 1, 2))
        z = z.transpose(0, 2, 3, 1)
    return np.add.reduceat(z, starts, axis=-1)
