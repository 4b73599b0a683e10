"""Sampled functions on uniform dyadic grids.

A SampledFunction stores node values over an axis-aligned box at spacing
2^-J; between nodes it IS its multilinear interpolant, and all quadrature is
midpoint-rule at grid resolution.
"""

from __future__ import annotations

import io
import math

import numpy as np

__all__ = ["SampledFunction", "dump_grid", "load_grid"]


class GridError(ValueError):
    pass


class SampledFunction:
    """Node values on a dyadic grid; evaluation is multilinear interpolation."""

    def __init__(self, lo, hi, level: int, values: np.ndarray):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape or np.any(self.hi <= self.lo):
            raise GridError("invalid bounding box")
        self.level = int(level)
        if self.level < 0:
            raise GridError("grid level must be >= 0")
        vals = np.asarray(values, dtype=float)
        expected = tuple(int(round((h - l) * 2.0 ** self.level)) + 1
                         for l, h in zip(self.lo, self.hi))
        if vals.shape != expected:
            raise GridError(f"value shape {vals.shape} != grid shape {expected}")
        if not np.all(np.isfinite(vals)):
            raise GridError("grid values must be finite")
        self.values = vals

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_callable(cls, lo, hi, level: int, fn) -> "SampledFunction":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        axes = [np.arange(int(round((h - l) * 2.0 ** level)) + 1) * 2.0 ** -level + l
                for l, h in zip(lo, hi)]
        if len(axes) == 1:
            vals = np.asarray(fn(axes[0]), dtype=float)
        else:
            X = np.meshgrid(*axes, indexing="ij")
            vals = np.asarray(fn(*X), dtype=float)
        return cls(lo, hi, level, vals)

    @classmethod
    def constant(cls, lo, hi, level: int, c: float) -> "SampledFunction":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        shape = tuple(int(round((h - l) * 2.0 ** level)) + 1
                      for l, h in zip(lo, hi))
        return cls(lo, hi, level, np.full(shape, float(c)))

    # -- basic geometry ----------------------------------------------------

    @property
    def dimension(self) -> int:
        return len(self.lo)

    @property
    def spacing(self) -> float:
        return 2.0 ** -self.level

    def node_axes(self) -> list[np.ndarray]:
        return [l + np.arange(n) * self.spacing
                for l, n in zip(self.lo, self.values.shape)]

    def node_points(self) -> np.ndarray:
        """All grid nodes as a (N, n) array in row-major order."""
        axes = self.node_axes()
        if self.dimension == 1:
            return axes[0][:, None]
        X = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([x.ravel() for x in X])

    def dilate(self, i: int) -> "SampledFunction":
        """The function x -> f(2^-i x) as a metadata-only view (i >= 0).

        Dyadic dilation maps grid nodes onto grid nodes exactly, so the value
        array is shared.
        """
        if i < 0 or i > self.level:
            raise GridError(f"dilation power must be in [0, {self.level}]")
        scale = 2.0 ** i
        return SampledFunction(self.lo * scale, self.hi * scale,
                               self.level - i, self.values)

    # -- evaluation --------------------------------------------------------

    def evaluate(self, points, extend: bool = False) -> np.ndarray:
        """Multilinear interpolation; exact on nodes.

        Out-of-box points raise unless `extend`, in which case they return 0
        (the zero-extension used for whole-space computations).
        """
        pts = np.asarray(points, dtype=float)
        squeeze = pts.ndim == 1 and self.dimension > 1 or (
            pts.ndim == 0 and self.dimension == 1)
        if self.dimension == 1:
            pts = pts.reshape(-1, 1)
        else:
            pts = np.atleast_2d(pts)
        if pts.shape[1] != self.dimension:
            raise GridError(f"points have dimension {pts.shape[1]}, grid {self.dimension}")
        tol = 1e-9 * self.spacing
        oob = ((pts < self.lo - tol) | (pts > self.hi + tol)).any(axis=1)
        if np.any(oob) and not extend:
            raise GridError("evaluation outside the bounding box")
        rel = (pts - self.lo) / self.spacing
        out = np.zeros(len(pts))
        inb = ~oob
        if np.any(inb):
            r = rel[inb]
            idx = np.floor(r).astype(int)
            shape = np.asarray(self.values.shape)
            idx = np.clip(idx, 0, shape - 2)
            frac = np.clip(r - idx, 0.0, 1.0)
            acc = np.zeros(idx.shape[0])
            for corner in np.ndindex(*(2,) * self.dimension):
                w = np.ones(idx.shape[0])
                gather = []
                for d in range(self.dimension):
                    w = w * (frac[:, d] if corner[d] else 1.0 - frac[:, d])
                    gather.append(idx[:, d] + corner[d])
                acc += w * self.values[tuple(gather)]
            out[inb] = acc
        result = out
        return float(result[0]) if squeeze else result

    def __call__(self, points, extend: bool = False):
        return self.evaluate(points, extend=extend)

    def scaled(self, c: float) -> "SampledFunction":
        return SampledFunction(self.lo, self.hi, self.level, c * self.values)

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())


def evaluate(f: SampledFunction, x) -> float | np.ndarray:
    """Functional form of SampledFunction.evaluate (errors outside the box)."""
    return f.evaluate(x)


# ---------------------------------------------------------------------------
# Text format: `grid J=<int> box=<x0,y0,x1,y1>` + row-major values
# ---------------------------------------------------------------------------


def dump_grid(f: SampledFunction) -> str:
    box = ",".join(f"{v:.12g}" for v in np.concatenate([f.lo, f.hi]))
    buf = io.StringIO()
    buf.write(f"grid J={f.level} box={box}\n")
    rows = f.values if f.dimension == 2 else f.values[:, None]
    for row in rows:
        buf.write(" ".join(f"{v:.17g}" for v in row) + "\n")
    return buf.getvalue()


def load_grid(text: str) -> SampledFunction:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("grid "):
        raise GridError("not a grid file (missing 'grid' header)")
    params = dict(tok.split("=") for tok in lines[0].split()[1:])
    level = int(params["J"])
    box = [float(v) for v in params["box"].split(",")]
    n = len(box) // 2
    lo, hi = box[:n], box[n:]
    rows = [np.array([float(v) for v in ln.split()]) for ln in lines[1:]]
    vals = np.vstack(rows) if n == 2 else np.concatenate(rows)
    return SampledFunction(lo, hi, level, vals)


def export_csv_slice(f: SampledFunction, axis: int = 0, index: int | None = None) -> str:
    """CSV rows `coord,value` of a 1D slice (full function when n=1)."""
    axes = f.node_axes()
    buf = io.StringIO()
    if f.dimension == 1:
        buf.write("x,value\n")
        for x, v in zip(axes[0], f.values):
            buf.write(f"{x:.12g},{v:.17g}\n")
        return buf.getvalue()
    if index is None:
        index = f.values.shape[1 - axis] // 2
    buf.write("coord,value\n")
    vals = f.values[:, index] if axis == 0 else f.values[index, :]
    for x, v in zip(axes[axis], vals):
        buf.write(f"{x:.12g},{v:.17g}\n")
    return buf.getvalue()
