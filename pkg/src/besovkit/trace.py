"""Trace by atomic restriction, boundary-atom extension through the Whitney
operator, boundary decompositions in arclength, and the round trip between
the domain space of smoothness s + 1/p and the boundary space of smoothness s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .atoms import Atom, AtomError, AtomicDecomposition, _scatter_atom
from .besov import (BesovParams, CoefficientArray, besov_norm_differences,
                    seq_norm_boundary, seq_norm_domain)
from .geometry import LipschitzDomain, cubes_meeting
from .grids import SampledFunction
from .whitney import (BoundaryFunction, WhitneyCover, WhitneyExtension,
                      whitney_decompose, SAFE_EXTENSION_GAMMA)

__all__ = [
    "BoundaryDecomposition",
    "ArcTentAtom",
    "RestrictedAtom",
    "ExtensionAtom",
    "trace_restrict",
    "boundary_decompose",
    "extend_boundary_atom",
    "extend_boundary_function",
    "roundtrip_report",
    "roundtrip_reports",
    "random_boundary_decomposition",
]


class TraceError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Boundary atoms
# ---------------------------------------------------------------------------


class ArcTentAtom:
    """Arclength tent on the boundary, housed on an ambient dyadic cube.

    Nodal at the dyadic arclength lattice (hierarchical interpolation on
    Gamma); the euclidean Lipschitz bound follows from the arc slope times
    the measured arc/chord ratio.
    """

    kind = "LipGamma"

    def __init__(self, domain: LipschitzDomain, level: int,
                 index: tuple[int, ...], s_center: float, arc_radius: float,
                 amplitude: float, dilation: float = 1.6):
        self.domain = domain
        self.level = int(level)
        self.index = tuple(int(v) for v in index)
        self.s_center = float(s_center)
        self.arc_radius = float(arc_radius)
        self.amplitude = float(amplitude)
        self.dilation = float(dilation)

    @property
    def dimension(self) -> int:
        return len(self.index)

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.index, dtype=float) * 2.0 ** (-self.level)

    def support_bounds(self):
        gamma0 = self.domain.boundary.point_at_arclength([self.s_center])[0]
        return gamma0 - self.arc_radius, gamma0 + self.arc_radius

    def evaluate(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        _, s = self.domain.boundary.project(pts)
        L = self.domain.boundary.total_length
        d = np.abs(s - self.s_center)
        d = np.minimum(d, L - d)
        return self.amplitude * np.maximum(0.0, 1.0 - d / self.arc_radius)


class RestrictedAtom:
    """An ambient atom viewed on the boundary (the trace of one term)."""

    kind = "LipGamma"

    def __init__(self, ambient: Atom, domain: LipschitzDomain):
        self.ambient = ambient
        self.domain = domain
        self.level = ambient.level
        self.index = ambient.index
        self.dilation = ambient.dilation
        self.amplitude = ambient.amplitude

    @property
    def dimension(self) -> int:
        return self.ambient.dimension

    @property
    def center(self) -> np.ndarray:
        return self.ambient.center

    def support_bounds(self):
        return self.ambient.support_bounds()

    def evaluate(self, points) -> np.ndarray:
        return self.ambient.evaluate(points)


@dataclass
class BoundaryDecomposition:
    """Coefficients on Gamma-cubes paired with boundary Lipschitz atoms."""

    coefficients: CoefficientArray
    atoms: dict

    def evaluate(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(pts))
        for key, lam in self.coefficients.entries.items():
            out += lam * self.atoms[key].evaluate(pts)
        return out

    def total_levels(self) -> list[int]:
        return self.coefficients.levels


# ---------------------------------------------------------------------------
# Trace by restriction
# ---------------------------------------------------------------------------


def trace_restrict(dec: AtomicDecomposition,
                   domain: LipschitzDomain) -> BoundaryDecomposition:
    """Drop the terms whose cube misses Gamma; restrict the rest.

    The survivors' profiles, viewed on the boundary, satisfy the boundary
    Lipschitz-atom bounds because the ambient bounds restrict.
    """
    kinds = {a.kind for a in dec.atoms.values()}
    if kinds - {"Lip", "K-smooth"}:
        raise TraceError("trace restriction expects Lip or smooth atoms")
    gamma_cubes: dict[int, set] = {}
    entries: dict = {}
    atoms: dict = {}
    for (j, m), lam in dec.coefficients.entries.items():
        if j not in gamma_cubes:
            gamma_cubes[j] = cubes_meeting(domain, j, boundary=True)
        if m not in gamma_cubes[j]:
            continue
        entries[(j, m)] = lam
        atoms[(j, m)] = RestrictedAtom(dec.atoms[(j, m)], domain)
    arr = CoefficientArray(domain, on_boundary=True, entries=entries)
    return BoundaryDecomposition(arr, atoms)


# ---------------------------------------------------------------------------
# Hierarchical boundary decomposition in arclength
# ---------------------------------------------------------------------------


def _arc_chord_ratio(domain: LipschitzDomain, samples: int = 512) -> float:
    bd = domain.boundary
    L = bd.total_length
    s = np.linspace(0.0, L, samples, endpoint=False)
    ratio = 1.0
    for frac in (0.02, 0.05, 0.1, 0.25, 0.5, 1.0):
        ds = min(L / 2, frac)
        p0 = bd.point_at_arclength(s)
        p1 = bd.point_at_arclength(s + ds)
        chord = np.linalg.norm(p1 - p0, axis=1)
        ratio = max(ratio, float((ds / chord[chord > 0]).max()))
    return ratio


def boundary_decompose(g, domain: LipschitzDomain, J: int,
                       slack: float = 2.0) -> BoundaryDecomposition:
    """Hierarchical interpolation of a boundary function by arclength tents.

    `g` is a BoundaryFunction, a callable of arclength, or a
    BoundaryDecomposition to resample.  Levels j = 0..J use the periodic
    dyadic arclength lattice with M0 2^j nodes, M0 the smallest power of two
    with spacing at most one.
    """
    bd = domain.boundary
    L = bd.total_length
    m0 = 1 << max(1, math.ceil(math.log2(max(L, 1.0))))
    c_ratio = _arc_chord_ratio(domain)
    spacing0 = L / m0
    amplitude = min(1.0, spacing0 / c_ratio) / slack

    if isinstance(g, BoundaryFunction):
        g_of_s = lambda s: g.at_arclength(s)
    elif isinstance(g, BoundaryDecomposition):
        g_of_s = lambda s: g.evaluate(bd.point_at_arclength(s))
    else:
        g_of_s = lambda s: np.asarray(g(s), dtype=float)

    entries: dict = {}
    atoms: dict = {}
    taken: dict[int, set] = {}

    def assign_index(j: int, gamma_pt: np.ndarray) -> tuple[int, ...]:
        scale = 2.0 ** j
        base = np.round(gamma_pt * scale).astype(int)
        cands = []
        n = len(gamma_pt)
        for off in np.ndindex(*(3,) * n):
            m = tuple(base + (np.array(off) - 1))
            c = np.asarray(m, dtype=float) / scale
            gap = float(np.max(np.abs(gamma_pt - c)))
            if gap < 2.0 ** (-j) * 0.999:
                cands.append((gap, m))
        for _, m in sorted(cands):
            if m not in taken.setdefault(j, set()):
                taken[j].add(m)
                return m
        raise TraceError(
            f"no free cube index near boundary point {gamma_pt} at level {j}")

    def residual(s_vals: np.ndarray) -> np.ndarray:
        out = np.asarray(g_of_s(s_vals), dtype=float).copy()
        for (j, m), lam in entries.items():
            atom = atoms[(j, m)]
            d = np.abs(s_vals - atom.s_center)
            d = np.minimum(d, L - d)
            out -= lam * atom.amplitude * np.maximum(0.0, 1.0 - d / atom.arc_radius)
        return out

    for j in range(J + 1):
        count = m0 * (1 << j)
        spacing = L / count
        s_nodes = np.arange(count) * spacing
        if j == 0:
            new = s_nodes
        else:
            new = s_nodes[1::2]
        vals = residual(new)
        pts = bd.point_at_arclength(new)
        for s0, v, gp in zip(new, vals, pts):
            if v == 0.0:
                continue
            m = assign_index(j, gp)
            atom = ArcTentAtom(domain, j, m, float(s0), spacing, amplitude)
            atoms[(j, m)] = atom
            entries[(j, m)] = float(v / amplitude)
    arr = CoefficientArray(domain, on_boundary=True, entries=entries)
    return BoundaryDecomposition(arr, atoms)


# ---------------------------------------------------------------------------
# Extension of boundary atoms
# ---------------------------------------------------------------------------


class ExtensionAtom:
    """Whitney extension of a boundary atom times a smooth cutoff.

    A general-smoothness atom at sigma = s' + 1/p located on the source cube;
    zero outside the closed domain, with trace equal to the boundary atom.
    """

    kind = "SigmaP"

    def __init__(self, boundary_atom, extension: WhitneyExtension,
                 sigma: float, p: float, cutoff_dilation: float = 3.0):
        self.boundary_atom = boundary_atom
        self.extension = extension
        self.sigma = float(sigma)
        self.p = p
        self.level = boundary_atom.level
        self.index = boundary_atom.index
        self.dilation = cutoff_dilation
        self.amplitude = 1.0
        self.cutoff_dilation = float(cutoff_dilation)

    @property
    def dimension(self) -> int:
        return len(self.index)

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.index, dtype=float) * 2.0 ** (-self.level)

    def support_bounds(self):
        h = self.cutoff_dilation * 2.0 ** (-self.level)
        return self.center - h, self.center + h

    def _cutoff(self, points: np.ndarray) -> np.ndarray:
        """1 on the source dilated cube, smoothly 0 at the cutoff dilate."""
        h = 2.0 ** (-self.level)
        d_in = self.boundary_atom.dilation
        d_out = self.cutoff_dilation
        u = np.max(np.abs(points - self.center), axis=1) / h
        t = np.clip((d_out - u) / (d_out - d_in), 0.0, 1.0)
        return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)

    def evaluate(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        dome = self.extension.cover.domain
        out = np.zeros(len(pts))
        inside = dome.contains(pts)
        if inside.any():
            vals = self.extension.evaluate(pts[inside], collar="boundary")
            out[inside] = vals * self._cutoff(pts[inside])
        return out


def extend_boundary_atom(atom, s_prime: float, p: float,
                         cover: WhitneyCover) -> ExtensionAtom:
    """Extend a boundary Lipschitz atom to a general-smoothness atom with
    sigma = s' + 1/p via the boundary-average extension plus a cutoff."""
    if not (0 < s_prime < 1):
        raise TraceError("s' must lie in (0, 1)")
    if getattr(atom, "kind", None) != "LipGamma":
        raise TraceError("extension expects boundary Lipschitz atoms")
    needed = atom.level + 3
    if cover.j_max < needed:
        raise TraceError(
            f"cover resolution insufficient: need j_max >= {needed}, "
            f"got {cover.j_max}")
    domain = cover.domain
    node_vals = atom.evaluate(domain.boundary.points)
    bf = BoundaryFunction(domain, node_vals)
    ext = WhitneyExtension(cover, bf)
    ip = 0.0 if math.isinf(p) else 1.0 / p
    return ExtensionAtom(atom, ext, sigma=s_prime + ip, p=p)


def extend_boundary_function(bdec: BoundaryDecomposition, s: float, p: float,
                             q: float, cover: WhitneyCover,
                             s_prime: float | None = None
                             ) -> AtomicDecomposition:
    """Coefficients copied unchanged; atoms replaced by their extensions."""
    if not (0 < s < 1):
        raise TraceError("the trace theorems cover 0 < s < 1")
    if s_prime is None:
        s_prime = (s + 1.0) / 2.0
    entries = dict(bdec.coefficients.entries)
    atoms = {}
    for key, atom in bdec.atoms.items():
        if key in entries:
            atoms[key] = extend_boundary_atom(atom, s_prime, p, cover)
    arr = CoefficientArray(cover.domain, on_boundary=False, entries=entries)
    ip = 0.0 if math.isinf(p) else 1.0 / p
    r = int(math.floor(s + ip)) + 1
    params = BesovParams(s + ip, p, q, r)
    return AtomicDecomposition(arr, atoms, params)


def reconstruct_on_grid(dec: AtomicDecomposition, lo, hi,
                        level: int) -> SampledFunction:
    """Sum of coefficient * atom on a grid.

    Decompositions made of boundary-atom extensions share one partition
    matrix and one boundary projection over the grid; other atoms fall back
    to local scatter.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    shape = tuple(int(round((h - l) * 2.0 ** level)) + 1 for l, h in zip(lo, hi))
    ext_keys = [k for k, a in dec.atoms.items() if isinstance(a, ExtensionAtom)]
    values = np.zeros(shape)
    for key, lam in dec.coefficients.entries.items():
        if key in ext_keys:
            continue
        _scatter_atom(values, lo, level, dec.atoms[key], lam)
    if ext_keys:
        cover = dec.atoms[ext_keys[0]].extension.cover
        domain = cover.domain
        axes = [lo[d] + np.arange(shape[d]) * 2.0 ** -level
                for d in range(len(shape))]
        X, Y = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        dist = domain.distance_to_boundary(pts)
        on_gamma = dist <= 1e-12
        inside = domain.contains(pts) & ~on_gamma
        W, ok = cover.partition_matrix(pts[inside])
        bad = ~ok
        _, proj_bad = domain.boundary.project(pts[inside][bad]) if bad.any() \
            else (None, np.zeros(0))
        _, proj_gam = domain.boundary.project(pts[on_gamma]) if on_gamma.any() \
            else (None, np.zeros(0))
        flat = values.ravel()
        for key in ext_keys:
            lam = dec.coefficients.entries[key]
            atom = dec.atoms[key]
            vals_in = W @ atom.extension.mu
            if bad.any():
                vals_in[bad] = atom.extension.a.at_arclength(proj_bad)
            vals_in *= atom._cutoff(pts[inside])
            contrib = np.zeros(len(pts))
            contrib[inside] = vals_in
            if on_gamma.any():
                gam_vals = atom.extension.a.at_arclength(proj_gam)
                contrib[on_gamma] = gam_vals * atom._cutoff(pts[on_gamma])
            flat += lam * contrib
        values = flat.reshape(shape)
    return SampledFunction(lo, hi, level, values)


# ---------------------------------------------------------------------------
# Round trip
# ---------------------------------------------------------------------------


def roundtrip_reports(bdec: BoundaryDecomposition, param_list,
                      cover: WhitneyCover, grid_level: int = 6,
                      j_max_norm: int = 4, boundary_levels: int = 4,
                      interp_const: float = 16.0) -> list[dict]:
    """Extend, reconstruct, trace back; one report row per (s, p, q).

    The extension, its grid reconstruction and the trace re-decomposition
    are parameter independent, so they are built once; modulus tables are
    shared between parameter sets with equal (p, r).

    ratio_ext: domain function norm of the extension over the boundary
    sequence norm (extension boundedness); ratio_tr: boundary sequence norm
    of the re-decomposed trace over the domain function norm (trace
    boundedness).  node_error_direct evaluates atoms at the boundary nodes
    (the reproduction identity); node_error_grid goes through the sampled
    reconstruction and is compared against the declared interpolation
    tolerance.
    """
    from .besov import lp_quasinorm, modulus_levels, norm_from_modulus

    domain = cover.domain
    s0, p0, q0 = param_list[0]
    F_dec = extend_boundary_function(bdec, s0, p0, q0, cover)
    lo, hi = domain.bounding_box
    F = reconstruct_on_grid(F_dec, lo, hi, grid_level)

    nodes = domain.boundary.points
    g_nodes = bdec.evaluate(nodes)
    direct = np.zeros(len(nodes))
    for key, lam in F_dec.coefficients.entries.items():
        direct += lam * F_dec.atoms[key].evaluate(nodes)
    node_error_direct = float(np.abs(direct - g_nodes).max())

    interp_nodes = F.evaluate(nodes)
    node_error_grid = float(np.abs(interp_nodes - g_nodes).max())
    lam_scale = sum(abs(v) * 2.0 ** j
                    for (j, _), v in bdec.coefficients.entries.items())
    interp_tol = interp_const * 2.0 ** (-grid_level) * max(lam_scale, 1e-30)

    trace_vals = lambda s_arc: F.evaluate(
        domain.boundary.point_at_arclength(s_arc))
    tr_dec = boundary_decompose(trace_vals, domain, boundary_levels)

    tables: dict = {}
    rows = []
    for (s, p, q) in param_list:
        ip = 0.0 if math.isinf(p) else 1.0 / p
        r = int(math.floor(s + ip)) + 1
        params_out = BesovParams(s + ip, p, q, r, j_max=j_max_norm)
        key = (p, r)
        if key not in tables:
            tables[key] = (lp_quasinorm(F, p, domain),
                           modulus_levels(F, params_out, domain,
                                          j_cap=min(j_max_norm,
                                                    grid_level - r)))
        lp_term, omegas = tables[key]
        norm_F = norm_from_modulus(lp_term, omegas, s + ip, q)
        seq_bd = seq_norm_boundary(bdec.coefficients, s, p, q)
        seq_tr = seq_norm_boundary(tr_dec.coefficients, s, p, q)
        rows.append({
            "s": s, "p": p, "q": q,
            "node_error_direct": node_error_direct,
            "node_error_grid": node_error_grid,
            "interp_tol": interp_tol,
            "norm_extension": norm_F,
            "seq_boundary": seq_bd,
            "seq_trace": seq_tr,
            "ratio_ext": norm_F / seq_bd if seq_bd > 0 else math.inf,
            "ratio_tr": seq_tr / norm_F if norm_F > 0 else math.inf,
        })
    return rows


def roundtrip_report(bdec: BoundaryDecomposition, s: float, p: float,
                     q: float, cover: WhitneyCover, grid_level: int = 6,
                     j_max_norm: int = 4, boundary_levels: int = 4,
                     interp_const: float = 16.0) -> dict:
    """Single-parameter round trip; see roundtrip_reports."""
    return roundtrip_reports(bdec, [(s, p, q)], cover, grid_level,
                             j_max_norm, boundary_levels, interp_const)[0]


def random_boundary_decomposition(domain: LipschitzDomain, rng,
                                  levels=(0, 1, 2), atoms_per_level: int = 3,
                                  d: float = 1.5) -> BoundaryDecomposition:
    """Random coefficients on boundary cubes with restricted Lip atoms."""
    from .atoms import make_atom
    entries: dict = {}
    atoms: dict = {}
    for j in levels:
        cubes = sorted(cubes_meeting(domain, j, boundary=True))
        take = min(atoms_per_level, len(cubes))
        sel = rng.choice(len(cubes), size=take, replace=False)
        for k in sel:
            m = cubes[int(k)]
            amb = make_atom("Lip", j, m, d=d)
            entries[(j, m)] = float(rng.uniform(0.3, 2.0)
                                    * rng.choice([-1.0, 1.0]))
            atoms[(j, m)] = RestrictedAtom(amb, domain)
    arr = CoefficientArray(domain, on_boundary=True, entries=entries)
    return BoundaryDecomposition(arr, atoms)
