"""Dyadic cubes, bounded Lipschitz domains in dimension 1 and 2, distance
fields, boundary discretization with arclength measure, and the geometric
measure estimates used by the Whitney and multiplier experiments.

Conventions: the cube with level j >= 0 and integer index m is centered at
2^-j * m and has side length 2^-(j-1).  For fixed j these cubes overlap
(adjacent indices share half a cube); the disjoint quadtree used by the
Whitney decomposition is the sub-family grown from even-index roots at
level 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._arrays import bilinear_shift

__all__ = [
    "DyadicCube",
    "LipschitzDomain",
    "PolygonDomain",
    "BoxDomain",
    "GraphDomain",
    "IntervalDomain",
    "HGauge",
    "distance_to_boundary",
    "segment_in_domain",
    "cubes_meeting",
    "omega_hj_measure",
    "hset_ratio_stats",
    "load_domain",
    "dump_domain",
]


class GeometryError(ValueError):
    """Invalid geometric input (self-intersecting polygon, bad gauge, ...)."""


# ---------------------------------------------------------------------------
# Dyadic cubes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DyadicCube:
    """Cube Q_{j,m}: center 2^-j * m, side length 2^(-j+1)."""

    level: int
    index: tuple[int, ...]

    def __post_init__(self):
        if self.level < 0:
            raise GeometryError(f"cube level must be >= 0, got {self.level}")

    @property
    def dimension(self) -> int:
        return len(self.index)

    @property
    def side(self) -> float:
        return 2.0 ** (-self.level + 1)

    @property
    def half_side(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.index, dtype=float) * 2.0 ** (-self.level)

    @property
    def diameter(self) -> float:
        return self.side * math.sqrt(self.dimension)

    def bounds(self, dilation: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
        """(lo, hi) corners of the cube dilated about its center."""
        c = self.center
        h = dilation * self.half_side
        return c - h, c + h

    def contains(self, points: np.ndarray, dilation: float = 1.0,
                 closed: bool = True) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo, hi = self.bounds(dilation)
        if closed:
            ok = (pts >= lo) & (pts <= hi)
        else:
            ok = (pts > lo) & (pts < hi)
        return ok.all(axis=1)

    def children(self) -> list["DyadicCube"]:
        """The 2^n disjoint half-size cubes tiling this cube.

        Child centers sit at parent center +- 2^-(j+1) per axis, which is
        index 2*m +- 1 at level j+1.
        """
        n = self.dimension
        out = []
        for corner in np.ndindex(*(2,) * n):
            idx = tuple(2 * self.index[d] + (2 * corner[d] - 1) for d in range(n))
            out.append(DyadicCube(self.level + 1, idx))
        return out

    def interior_intersects(self, other: "DyadicCube") -> bool:
        """Exact integer test whether two cube interiors overlap."""
        a, b = self, other
        if a.level > b.level:
            a, b = b, a
        shift = b.level - a.level
        for d in range(a.dimension):
            lo_a, hi_a = (a.index[d] - 1) << shift, (a.index[d] + 1) << shift
            lo_b, hi_b = b.index[d] - 1, b.index[d] + 1
            if hi_a <= lo_b or hi_b <= lo_a:
                return False
        return True


# ---------------------------------------------------------------------------
# Polyline helpers (vectorized over segments)
# ---------------------------------------------------------------------------


class Polyline:
    """Closed or open chain of 2D points with arclength bookkeeping."""

    def __init__(self, points: np.ndarray, closed: bool):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise GeometryError("polyline needs at least two 2D points")
        self.points = pts
        self.closed = closed
        seg_to = np.roll(pts, -1, axis=0) if closed else pts[1:]
        seg_from = pts if closed else pts[:-1]
        self.seg_a = seg_from
        self.seg_b = seg_to
        self.seg_vec = self.seg_b - self.seg_a
        self.seg_len = np.linalg.norm(self.seg_vec, axis=1)
        if np.any(self.seg_len <= 0):
            raise GeometryError("degenerate (zero-length) polyline segment")
        self.cum_len = np.concatenate([[0.0], np.cumsum(self.seg_len)])
        self.total_length = float(self.cum_len[-1])

    @property
    def node_weights(self) -> np.ndarray:
        """Arclength weight per node (half of each adjacent segment)."""
        if self.closed:
            prev_len = np.roll(self.seg_len, 1)
            return 0.5 * (prev_len + self.seg_len)
        w = np.zeros(len(self.points))
        w[:-1] += 0.5 * self.seg_len
        w[1:] += 0.5 * self.seg_len
        return w

    def point_at_arclength(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.closed:
            s = np.mod(s, self.total_length)
        idx = np.clip(np.searchsorted(self.cum_len, s, side="right") - 1,
                      0, len(self.seg_len) - 1)
        t = (s - self.cum_len[idx]) / self.seg_len[idx]
        return self.seg_a[idx] + t[:, None] * self.seg_vec[idx]

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Min distance from each point to the polyline (exact per segment)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if len(pts) * len(self.seg_a) <= 2_000_000:
            # broadcast segments x points
            w = pts[None, :, :] - self.seg_a[:, None, :]
            t = np.clip(np.einsum("spd,sd->sp", w, self.seg_vec)
                        / (self.seg_len ** 2)[:, None], 0.0, 1.0)
            proj = self.seg_a[:, None, :] + t[:, :, None] * self.seg_vec[:, None, :]
            d = np.linalg.norm(pts[None, :, :] - proj, axis=2)
            return d.min(axis=0)
        best = np.full(len(pts), np.inf)
        for a, v, L in zip(self.seg_a, self.seg_vec, self.seg_len):
            t = np.clip(((pts - a) @ v) / (L * L), 0.0, 1.0)
            d = np.linalg.norm(pts - (a + t[:, None] * v), axis=1)
            np.minimum(best, d, out=best)
        return best

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest boundary point and its arclength for each query point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        best = np.full(len(pts), np.inf)
        best_s = np.zeros(len(pts))
        best_xy = np.zeros_like(pts)
        for i, (a, v, L) in enumerate(zip(self.seg_a, self.seg_vec, self.seg_len)):
            t = np.clip(((pts - a) @ v) / (L * L), 0.0, 1.0)
            proj = a + t[:, None] * v
            d = np.linalg.norm(pts - proj, axis=1)
            better = d < best
            best[better] = d[better]
            best_s[better] = self.cum_len[i] + t[better] * L
            best_xy[better] = proj[better]
        return best_xy, best_s

    def clip_to_box(self, lo, hi) -> list[tuple[float, float]]:
        """Arclength intervals of the polyline inside the closed box [lo,hi].

        Liang-Barsky clipping per segment; exact for polylines.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        pieces = []
        for i, (a, v, L) in enumerate(zip(self.seg_a, self.seg_vec, self.seg_len)):
            t0, t1 = 0.0, 1.0
            ok = True
            for d in range(2):
                if v[d] == 0.0:
                    if a[d] < lo[d] or a[d] > hi[d]:
                        ok = False
                        break
                else:
                    ta = (lo[d] - a[d]) / v[d]
                    tb = (hi[d] - a[d]) / v[d]
                    if ta > tb:
                        ta, tb = tb, ta
                    t0 = max(t0, ta)
                    t1 = min(t1, tb)
                    if t0 > t1:
                        ok = False
                        break
            if ok and t1 > t0:
                pieces.append((self.cum_len[i] + t0 * L, self.cum_len[i] + t1 * L))
        return pieces

    def intersects_box(self, lo, hi) -> bool:
        return len(self.clip_to_box(lo, hi)) > 0

    def arclength_in_ball(self, center: np.ndarray, r: float) -> float:
        """Exact arclength of the polyline inside the closed euclidean ball."""
        c = np.asarray(center, dtype=float)
        total = 0.0
        for a, v, L in zip(self.seg_a, self.seg_vec, self.seg_len):
            # |a + t v - c|^2 <= r^2 on t in [0,1]
            w = a - c
            A = float(v @ v)
            B = 2.0 * float(w @ v)
            C = float(w @ w) - r * r
            disc = B * B - 4 * A * C
            if disc <= 0:
                continue
            sq = math.sqrt(disc)
            t0 = max(0.0, (-B - sq) / (2 * A))
            t1 = min(1.0, (-B + sq) / (2 * A))
            if t1 > t0:
                total += (t1 - t0) * L
        return total

    def distance_to_box(self, lo, hi) -> float:
        """Exact set distance between the polyline and the closed box."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        # vectorized Liang-Barsky over all segments
        t0 = np.zeros(len(self.seg_a))
        t1 = np.ones(len(self.seg_a))
        ok = np.ones(len(self.seg_a), dtype=bool)
        for d in range(2):
            a, v = self.seg_a[:, d], self.seg_vec[:, d]
            deg = v == 0.0
            ok &= ~deg | ((a >= lo[d]) & (a <= hi[d]))
            with np.errstate(divide="ignore", invalid="ignore"):
                ta = np.where(deg, 0.0, (lo[d] - a) / np.where(deg, 1.0, v))
                tb = np.where(deg, 1.0, (hi[d] - a) / np.where(deg, 1.0, v))
            t0 = np.maximum(t0, np.where(deg, 0.0, np.minimum(ta, tb)))
            t1 = np.minimum(t1, np.where(deg, 1.0, np.maximum(ta, tb)))
        if bool(np.any(ok & (t0 <= t1))):
            return 0.0
        # Min distance between two disjoint convex sets is attained with a
        # vertex of one of them involved, so endpoint/corner checks suffice.
        clipped = np.clip(self.points, lo, hi)
        d_end = float(np.linalg.norm(self.points - clipped, axis=1).min())
        corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]],
                            [hi[0], hi[1]], [lo[0], hi[1]]])
        d_corner = float(self.distance(corners).min())
        return min(d_end, d_corner)


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------


class LipschitzDomain:
    """Bounded domain in dimension 1 or 2 with a polyline boundary.

    Subclasses provide `contains` (closed membership) and carry the boundary
    as a polyline with arclength weights.  Distances are measured against the
    polyline, which is exact for the discretized object.
    """

    dimension: int
    is_convex: bool

    def contains(self, points) -> np.ndarray:
        raise NotImplementedError

    def distance_to_boundary(self, points) -> np.ndarray:
        raise NotImplementedError

    def signed_distance(self, points) -> np.ndarray:
        """Positive inside, negative outside, zero on the boundary."""
        d = self.distance_to_boundary(points)
        sign = np.where(self.contains(points), 1.0, -1.0)
        return sign * d

    @property
    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def boundary_intersects_box(self, lo, hi) -> bool:
        raise NotImplementedError

    def reflected(self, axis: int) -> "LipschitzDomain":
        raise NotImplementedError


class PolygonDomain(LipschitzDomain):
    """Simple polygon given by its closed vertex list (n=2).

    Geometric queries (membership, distance) run against the vertex
    polyline; the boundary attribute carries an arclength refinement of the
    same point set at `boundary_resolution`, dense enough for boundary
    functions and averages to resolve fine atoms.
    """

    dimension = 2

    def __init__(self, vertices, boundary_resolution: float | None = 2.0 ** -6):
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
            raise GeometryError("polygon needs at least three 2D vertices")
        if np.allclose(verts[0], verts[-1]):
            verts = verts[:-1]
        self.vertices = verts
        self.boundary_resolution = boundary_resolution
        self._geom = Polyline(verts, closed=True)
        pts = verts if boundary_resolution is None else \
            _refine_loop(verts, boundary_resolution)
        self.boundary = Polyline(pts, closed=True)
        if self._self_intersects():
            raise GeometryError("polygon is not simple (self-intersection)")
        self.is_convex = self._convexity()

    def _self_intersects(self) -> bool:
        a, b = self._geom.seg_a, self._geom.seg_b
        nseg = len(a)
        for i in range(nseg):
            for j in range(i + 1, nseg):
                if j == i or (j + 1) % nseg == i or (i + 1) % nseg == j:
                    continue  # adjacent segments share an endpoint
                if _segments_cross(a[i], b[i], a[j], b[j]):
                    return True
        return False

    def _convexity(self) -> bool:
        v = self._geom.seg_vec
        cross = v[:, 0] * np.roll(v, -1, axis=0)[:, 1] - v[:, 1] * np.roll(v, -1, axis=0)[:, 0]
        return bool(np.all(cross >= -1e-12) or np.all(cross <= 1e-12))

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = _ray_cast(pts, self._geom.seg_a, self._geom.seg_b)
        # closed domain: boundary points count as inside
        on_bd = self._geom.distance(pts) <= 1e-12
        return inside | on_bd

    def distance_to_boundary(self, points) -> np.ndarray:
        return self._geom.distance(points)

    @property
    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def boundary_intersects_box(self, lo, hi) -> bool:
        return self._geom.intersects_box(lo, hi)

    def reflected(self, axis: int) -> "PolygonDomain":
        verts = self.vertices.copy()
        verts[:, axis] *= -1.0
        return PolygonDomain(verts[::-1], self.boundary_resolution)


class BoxDomain(PolygonDomain):
    """Axis-aligned rectangle with O(1) membership and exact box distance.

    Used wherever the domain of a norm is just a function's bounding box;
    inherits the polygon boundary machinery (polyline, clipping, averages).
    """

    def __init__(self, lo, hi, boundary_resolution: float | None = 2.0 ** -6):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        super().__init__([[lo[0], lo[1]], [hi[0], lo[1]],
                          [hi[0], hi[1]], [lo[0], hi[1]]],
                         boundary_resolution)
        self.lo = lo
        self.hi = hi

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return ((pts >= self.lo) & (pts <= self.hi)).all(axis=1)

    def distance_to_boundary(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        below = self.lo - pts
        above = pts - self.hi
        out = np.maximum(np.maximum(below, above), 0.0)
        d_out = np.linalg.norm(out, axis=1)
        inside_margin = np.minimum(pts - self.lo, self.hi - pts).min(axis=1)
        return np.where(d_out > 0.0, d_out, np.maximum(inside_margin, 0.0))


class GraphDomain(PolygonDomain):
    """Region {(x', x_n) : psi(x') < x_n < psi(x') + H, |x'| < 1}.

    psi is sampled on a uniform grid over [-1, 1] with declared Lipschitz
    constant L; the domain is polygonized at construction (bottom graph,
    right wall, shifted top graph, left wall).
    """

    def __init__(self, u, psi, lipschitz_const: float, height: float):
        u = np.asarray(u, dtype=float)
        psi = np.asarray(psi, dtype=float)
        if u.ndim != 1 or u.shape != psi.shape or len(u) < 2:
            raise GeometryError("graph domain needs matching 1D sample arrays")
        if not (np.all(np.diff(u) > 0) and math.isclose(u[0], -1.0) and math.isclose(u[-1], 1.0)):
            raise GeometryError("graph samples must ascend from -1 to 1")
        du = np.diff(u)
        quot = np.abs(np.diff(psi)) / du
        if np.any(quot > lipschitz_const * (1 + 1e-12)):
            raise GeometryError(
                f"samples violate declared Lipschitz constant {lipschitz_const}: "
                f"max quotient {quot.max():.6g}")
        if height <= 0:
            raise GeometryError("graph domain height must be positive")
        self.u = u
        self.psi = psi
        self.lipschitz_const = float(lipschitz_const)
        self.height = float(height)
        bottom = np.column_stack([u, psi])
        top = np.column_stack([u[::-1], psi[::-1] + height])
        super().__init__(np.vstack([bottom, top]))
        self.is_convex = False

    def psi_at(self, x1) -> np.ndarray:
        return np.interp(np.asarray(x1, dtype=float), self.u, self.psi)

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        psi = self.psi_at(pts[:, 0])
        tol = 1e-12
        return ((np.abs(pts[:, 0]) <= 1.0 + tol)
                & (pts[:, 1] >= psi - tol)
                & (pts[:, 1] <= psi + self.height + tol))


class IntervalDomain(LipschitzDomain):
    """Bounded interval [a, b] (n=1); the boundary is the two endpoints."""

    dimension = 1
    is_convex = True

    def __init__(self, a: float, b: float):
        if not (b > a):
            raise GeometryError("interval needs a < b")
        self.a = float(a)
        self.b = float(b)

    def contains(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=float).reshape(-1)
        return (x >= self.a) & (x <= self.b)

    def distance_to_boundary(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=float).reshape(-1)
        return np.minimum(np.abs(x - self.a), np.abs(x - self.b))

    @property
    def bounding_box(self):
        return np.array([self.a]), np.array([self.b])

    def boundary_intersects_box(self, lo, hi) -> bool:
        lo, hi = np.asarray(lo).reshape(-1), np.asarray(hi).reshape(-1)
        return bool((lo[0] <= self.a <= hi[0]) or (lo[0] <= self.b <= hi[0]))

    @property
    def boundary_points(self) -> np.ndarray:
        return np.array([self.a, self.b])

    def reflected(self, axis: int = 0) -> "IntervalDomain":
        return IntervalDomain(-self.b, -self.a)


def _refine_loop(vertices: np.ndarray, resolution: float) -> np.ndarray:
    """Insert equally spaced points along each edge of a closed loop."""
    out = []
    nv = len(vertices)
    for i in range(nv):
        a, b = vertices[i], vertices[(i + 1) % nv]
        length = float(np.linalg.norm(b - a))
        pieces = max(1, int(math.ceil(length / resolution)))
        for k in range(pieces):
            out.append(a + (k / pieces) * (b - a))
    return np.asarray(out)


def _ray_cast(pts, seg_a, seg_b) -> np.ndarray:
    """Even-odd point-in-polygon, vectorized over points."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    for (ax, ay), (bx, by) in zip(seg_a, seg_b):
        cond = (ay > y) != (by > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xin = ax + (y - ay) * (bx - ax) / (by - ay)
        hit = cond & (x < xin)
        inside ^= hit
    return inside


def _segments_cross(a, b, c, d) -> bool:
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return (o1 * o2 < 0) and (o3 * o4 < 0)


# ---------------------------------------------------------------------------
# Gauge functions for h-sets
# ---------------------------------------------------------------------------


class HGauge:
    """Positive nondecreasing gauge on (0, 1], closed form t^d or tabulated.

    Tabulated gauges store values at dyadic arguments h(2^-i), i = 0..depth.
    """

    def __init__(self, exponent: float | None = None,
                 table: np.ndarray | None = None, scale: float = 1.0):
        if (exponent is None) == (table is None):
            raise GeometryError("provide exactly one of exponent / table")
        self.exponent = exponent
        self.scale = float(scale)
        if table is not None:
            tab = np.asarray(table, dtype=float)
            if np.any(tab <= 0):
                raise GeometryError("gauge values must be positive")
            if np.any(np.diff(tab) > 0):  # h(2^-i-1) <= h(2^-i)
                raise GeometryError("gauge must be nondecreasing in t")
            self.table = tab
        else:
            self.table = None

    @classmethod
    def power(cls, d: float, scale: float = 1.0) -> "HGauge":
        return cls(exponent=d, scale=scale)

    @property
    def depth(self) -> int | None:
        return None if self.table is None else len(self.table) - 1

    def at_dyadic(self, i: int) -> float:
        """h(2^-i)."""
        if self.table is not None:
            if i >= len(self.table):
                raise GeometryError(
                    f"gauge tabulated to depth {self.depth}, level {i} requested")
            return float(self.table[i])
        return self.scale * 2.0 ** (-i * self.exponent)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0) or np.any(t > 1):
            raise GeometryError("gauge arguments must lie in (0, 1]")
        if self.table is not None:
            i = np.round(-np.log2(t)).astype(int)
            if not np.allclose(2.0 ** (-i.astype(float)), t, rtol=1e-9):
                raise GeometryError("tabulated gauge only defined at dyadic t")
            return np.array([self.at_dyadic(int(k)) for k in np.atleast_1d(i)])
        return self.scale * t ** self.exponent


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def distance_to_boundary(domain: LipschitzDomain, x) -> float | np.ndarray:
    """Distance from x (single point or array of points) to the boundary."""
    d = domain.distance_to_boundary(x)
    return float(d[0]) if np.asarray(x).ndim == 1 and d.shape == (1,) else d


def segment_in_domain(domain: LipschitzDomain, x, h, r: int,
                      step: float = 2.0 ** -10) -> bool:
    """Whether the whole segment [x, x + r h] lies in the closed domain.

    Sampled at resolution `step` along the segment plus endpoint checks.
    Convex domains shortcut to the two endpoint checks.
    """
    if r < 1:
        raise ValueError("difference order r must be >= 1")
    x = np.asarray(x, dtype=float).reshape(-1)
    h = np.asarray(h, dtype=float).reshape(-1)
    end = x + r * h
    if domain.is_convex:
        return bool(domain.contains(x[None, :] if domain.dimension == 2 else x)[0]
                    and domain.contains(end[None, :] if domain.dimension == 2 else end)[0])
    length = float(np.linalg.norm(r * h))
    nsamp = max(2, int(math.ceil(length / step)) + 1)
    t = np.linspace(0.0, 1.0, nsamp)
    pts = x[None, :] + t[:, None] * (r * h)[None, :]
    return bool(domain.contains(pts).all())


def _candidate_index_ranges(domain: LipschitzDomain, j: int):
    lo, hi = domain.bounding_box
    scale = 2.0 ** j
    los = np.floor(lo * scale - 1).astype(int)
    his = np.ceil(hi * scale + 1).astype(int)
    return los, his


def _boundary_meets_open_boxes(domain: LipschitzDomain, centers: np.ndarray,
                               half) -> np.ndarray:
    """Whether the boundary polyline passes through each OPEN box.

    Liang-Barsky intervals over the non-degenerate axes must have positive
    length; axes along which a segment is constant must sit strictly inside.
    """
    bd = getattr(domain, "_geom", None) or domain.boundary
    half = np.broadcast_to(np.asarray(half, dtype=float), (2,))
    touches = np.zeros(len(centers), dtype=bool)
    for a, v in zip(bd.seg_a, bd.seg_vec):
        t0 = np.zeros(len(centers))
        t1 = np.ones(len(centers))
        ok = np.ones(len(centers), dtype=bool)
        for d in range(2):
            lo_c = centers[:, d] - half[d]
            hi_c = centers[:, d] + half[d]
            if v[d] == 0.0:
                ok &= (a[d] > lo_c) & (a[d] < hi_c)
            else:
                ta = (lo_c - a[d]) / v[d]
                tb = (hi_c - a[d]) / v[d]
                t0 = np.maximum(t0, np.minimum(ta, tb))
                t1 = np.minimum(t1, np.maximum(ta, tb))
        touches |= ok & (t0 < t1)
    return touches


def cubes_meeting(domain: LipschitzDomain, j: int,
                  boundary: bool = False) -> set[tuple[int, ...]]:
    """Exactly { m : Q_{j,m} meets Omega } (or meets Gamma if boundary).

    Cubes are taken open, matching the open domain: an open box meets Omega
    iff its center lies in Omega or the boundary passes through the box.
    """
    if j < 0:
        raise ValueError("level must be >= 0")
    los, his = _candidate_index_ranges(domain, j)
    half = 2.0 ** (-j)
    out: set[tuple[int, ...]] = set()
    if domain.dimension == 1:
        assert isinstance(domain, IntervalDomain)
        for m in range(los[0], his[0] + 1):
            c = m * half
            lo_c, hi_c = c - half, c + half
            if boundary:
                if lo_c < domain.a < hi_c or lo_c < domain.b < hi_c:
                    out.add((m,))
            else:
                if hi_c > domain.a and lo_c < domain.b:
                    out.add((m,))
        return out

    m1 = np.arange(los[0], his[0] + 1)
    m2 = np.arange(los[1], his[1] + 1)
    M1, M2 = np.meshgrid(m1, m2, indexing="ij")
    centers = np.column_stack([M1.ravel() * half, M2.ravel() * half])
    idx = np.column_stack([M1.ravel(), M2.ravel()])

    touches = _boundary_meets_open_boxes(domain, centers, half)
    if boundary:
        hits = touches
    else:
        inside = _ray_cast(centers, domain.boundary.seg_a, domain.boundary.seg_b)
        hits = touches | inside
    for k in np.nonzero(hits)[0]:
        out.add((int(idx[k, 0]), int(idx[k, 1])))
    return out


def omega_hj_measure(domain: LipschitzDomain, h, k: int, j: int,
                     resolution: float = 2.0 ** -10,
                     segment_step: float | None = None) -> tuple[float, bool]:
    """Grid estimate of |{x : [x, x+kh] in Omega, 2^-j <= min dist <= 2^-j+1}|.

    The distance field lives on a grid at `resolution`; the minimum along the
    segment is sampled at `segment_step` (distance is 1-Lipschitz, so the
    sampling error is at most half a step).  Returns (measure, truncated)
    where truncated flags shells thinner than the grid resolution.
    """
    if segment_step is None:
        segment_step = resolution
    h = np.asarray(h, dtype=float).reshape(-1)
    norm_h = float(np.linalg.norm(h))
    if not (0 < norm_h <= 1):
        raise ValueError("need 0 < |h| <= 1")
    truncated = 2.0 ** (-j + 1) < resolution
    if truncated:
        return 0.0, True

    lo, hi = domain.bounding_box
    if domain.dimension == 1:
        xs = np.arange(lo[0], hi[0] + resolution / 2, resolution)
        nsamp = max(2, int(math.ceil(k * norm_h / segment_step)) + 1)
        taus = np.linspace(0.0, float(k), nsamp)
        min_d = np.full(xs.shape, np.inf)
        for tau in taus:
            pts = xs + tau * h[0]
            sd = np.where(domain.contains(pts),
                          domain.distance_to_boundary(pts), -np.inf)
            np.minimum(min_d, sd, out=min_d)
        sel = (min_d >= 2.0 ** (-j)) & (min_d <= 2.0 ** (-j + 1))
        return float(sel.sum()) * resolution, False

    # 2D: precompute the signed distance field once, then sample the segment
    # by constant shifts with bilinear lookups (signed distance is 1-Lipschitz).
    xs = np.arange(lo[0], hi[0] + resolution / 2, resolution)
    ys = np.arange(lo[1], hi[1] + resolution / 2, resolution)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    sd = domain.signed_distance(pts).reshape(X.shape)

    nsamp = max(2, int(math.ceil(k * norm_h / segment_step)) + 1)
    taus = np.linspace(0.0, float(k), nsamp)
    min_d = np.full(X.shape, np.inf)
    for tau in taus:
        shift = tau * h / resolution  # in cells
        sampled = bilinear_shift(sd, shift, fill=-np.inf)
        np.minimum(min_d, sampled, out=min_d)
    sel = (min_d >= 2.0 ** (-j)) & (min_d <= 2.0 ** (-j + 1))
    return float(sel.sum()) * resolution ** 2, False


def hset_ratio_stats(domain: LipschitzDomain, gauge: HGauge, radii,
                     n_centers: int = 64, seed: int = 0) -> dict:
    """Ratios sigma(B(gamma, r) . Gamma) / h(r) over boundary centers.

    Returns min/max ratio plus the per-radius extremes; 'h-set verified'
    means max/min below a caller-chosen tolerance factor.
    """
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0) or np.any(radii > 1):
        raise GeometryError("radii must lie in (0, 1]")
    hv = gauge(radii)
    if np.any(hv <= 0):
        raise GeometryError("degenerate gauge (h(r) = 0)")
    rng = np.random.default_rng(seed)
    if domain.dimension == 1:
        raise GeometryError("h-set statistics need a 2D boundary")
    bd = domain.boundary
    s = rng.uniform(0.0, bd.total_length, size=n_centers)
    centers = bd.point_at_arclength(s)
    ratios = np.empty((n_centers, len(radii)))
    for i, c in enumerate(centers):
        for kk, r in enumerate(radii):
            ratios[i, kk] = bd.arclength_in_ball(c, float(r)) / hv[kk]
    return {
        "min_ratio": float(ratios.min()),
        "max_ratio": float(ratios.max()),
        "per_radius_min": ratios.min(axis=0),
        "per_radius_max": ratios.max(axis=0),
    }


# ---------------------------------------------------------------------------
# Standard test domains and file IO
# ---------------------------------------------------------------------------


def unit_square() -> BoxDomain:
    return BoxDomain([0, 0], [1, 1])


def l_shape() -> PolygonDomain:
    """[0,1]^2 with the top-right quadrant removed."""
    return PolygonDomain([[0, 0], [1, 0], [1, 0.5], [0.5, 0.5], [0.5, 1], [0, 1]])


def sawtooth_domain(n_teeth: int = 4, amplitude: float = 0.15,
                    height: float = 1.0, samples_per_tooth: int = 16) -> GraphDomain:
    """Graph domain over a triangular-wave psi; Lipschitz but not C^1."""
    n_samples = n_teeth * samples_per_tooth + 1
    u = np.linspace(-1.0, 1.0, n_samples)
    period = 2.0 / n_teeth
    phase = (u + 1.0) / period
    tri = 2.0 * np.abs(phase - np.floor(phase + 0.5))
    psi = amplitude * tri
    lip = amplitude * 2.0 / (period / 2.0)
    return GraphDomain(u, psi, lipschitz_const=lip * (1 + 1e-9), height=height)


def dump_domain(domain: LipschitzDomain) -> str:
    """Serialize to the line-oriented domain file format."""
    if isinstance(domain, GraphDomain):
        lines = [f"graph L={domain.lipschitz_const:.12g} H={domain.height:.12g}"]
        lines += [f"{u:.12g} {p:.12g}" for u, p in zip(domain.u, domain.psi)]
        return "\n".join(lines) + "\n"
    if isinstance(domain, PolygonDomain):
        lines = ["polygon n=2"]
        lines += [f"{x:.12g} {y:.12g}" for x, y in domain.vertices]
        return "\n".join(lines) + "\n"
    if isinstance(domain, IntervalDomain):
        return f"interval n=1\n{domain.a:.12g} {domain.b:.12g}\n"
    raise GeometryError(f"cannot serialize domain of type {type(domain).__name__}")


def load_domain(text: str) -> LipschitzDomain:
    """Parse the line-oriented domain file format.

    Headers: `polygon n=2`, `graph L=<real> H=<real>`, `interval n=1`.
    Data lines are whitespace-separated reals; blank lines and lines starting
    with '#' are ignored.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise GeometryError("empty domain file")
    header, data = lines[0], lines[1:]
    rows = [tuple(float(tok) for tok in ln.split()) for ln in data]
    if header.startswith("polygon"):
        return PolygonDomain(rows)
    if header.startswith("graph"):
        params = dict(tok.split("=") for tok in header.split()[1:])
        u = np.array([r[0] for r in rows])
        psi = np.array([r[1] for r in rows])
        return GraphDomain(u, psi, float(params["L"]), float(params["H"]))
    if header.startswith("interval"):
        (a, b), = rows
        return IntervalDomain(a, b)
    raise GeometryError(f"unknown domain header: {header!r}")
