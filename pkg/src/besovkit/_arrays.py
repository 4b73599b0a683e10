"""Constant-shift sampling on uniform grids.

On a uniform lattice, evaluating the multilinear interpolant at every node
shifted by one fixed real vector uses the same interpolation weights at each
node, so the whole lookup reduces to 2^n slice-multiplies.
"""

from __future__ import annotations

import numpy as np


def bilinear_shift(arr: np.ndarray, shift, fill: float = 0.0) -> np.ndarray:
    """Sample `arr`'s multilinear interpolant at every node + `shift` (cells).

    Nodes whose stencil leaves the array entirely get `fill`; partially
    covered stencils treat the missing corners as carrying `fill`.
    """
    shift = np.atleast_1d(np.asarray(shift, dtype=float))
    n = arr.ndim
    base = np.floor(shift).astype(int)
    frac = shift - base
    acc = np.zeros(arr.shape, dtype=float)
    covered = np.zeros(arr.shape, dtype=float)
    for corner in np.ndindex(*(2,) * n):
        w = 1.0
        for d in range(n):
            w *= frac[d] if corner[d] else 1.0 - frac[d]
        if w == 0.0:
            continue
        src, dst, valid = [], [], True
        for d in range(n):
            o = base[d] + corner[d]
            size = arr.shape[d]
            src_lo, src_hi = max(0, o), min(size, size + o)
            if src_lo >= src_hi:
                valid = False
                break
            src.append(slice(src_lo, src_hi))
            dst.append(slice(src_lo - o, src_hi - o))
        if not valid:
            continue
        acc[tuple(dst)] += w * arr[tuple(src)]
        covered[tuple(dst)] += w
    if fill == 0.0:
        return acc
    out = acc.copy()
    partial = covered < 1.0 - 1e-12
    out[partial] = acc[partial] + (1.0 - covered[partial]) * fill
    return out
