"""Atom families, constructive atomic decomposition of sampled functions,
reconstruction, and the re-expansion of general-smoothness atoms into smooth
ones with the triangular-array coefficient inequality behind it.

Atom profiles are tensor products of nodal cardinal templates: value 1 at
the cube center, 0 at every neighboring lattice point, support exactly
Q_{j,m} (hence inside d Q_{j,m} for every d > 1).  With these templates the
level-by-level quasi-interpolation cascade is an exact hierarchical
interpolation: a planted library atom is recovered with its coefficient and
no leakage to other levels or indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .besov import BesovParams, CoefficientArray, besov_norm_differences
from .geometry import LipschitzDomain
from .grids import SampledFunction

__all__ = [
    "Atom",
    "AtomicDecomposition",
    "make_atom",
    "validate_atom",
    "decompose",
    "reconstruct",
    "reexpand",
    "todo3_check",
    "dump_decomposition",
    "load_decomposition",
]


class AtomError(ValueError):
    pass


class DecompositionError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Cardinal templates
# ---------------------------------------------------------------------------


def _smoothstep_poly(k_smooth: int):
    """S with S(0)=0, S(1)=1, S(t)+S(1-t)=1 and k_smooth flat derivatives."""
    if k_smooth == 1:
        return np.polynomial.Polynomial([0, 0, 3, -2])
    if k_smooth == 2:
        return np.polynomial.Polynomial([0, 0, 0, 10, -15, 6])
    if k_smooth == 3:
        return np.polynomial.Polynomial([0, 0, 0, 0, 35, -84, 70, -20])
    raise AtomError("cardinal templates available for smoothness 0..3")


class Template:
    """1D nodal cardinal profile on [-1, 1]: phi(0)=1, phi(+-1)=0."""

    def __init__(self, name: str, smoothness: int):
        self.name = name
        self.smoothness = smoothness
        self._poly = None if smoothness == 0 else _smoothstep_poly(smoothness)
        self._max_deriv_cache: dict[int, float] = {}

    def phi(self, u) -> np.ndarray:
        u = np.abs(np.asarray(u, dtype=float))
        out = np.zeros_like(u)
        inside = u < 1.0
        if self._poly is None:
            out[inside] = 1.0 - u[inside]
        else:
            out[inside] = 1.0 - self._poly(u[inside])
        return out

    def max_derivative(self, order: int) -> float:
        """sup |phi^(order)|, exact for order 0, dense-sampled otherwise."""
        if order == 0:
            return 1.0
        if order in self._max_deriv_cache:
            return self._max_deriv_cache[order]
        if self._poly is None:
            val = 1.0 if order == 1 else 0.0
        else:
            d = self._poly.deriv(order)
            ts = np.linspace(0.0, 1.0, 100_001)
            val = float(np.abs(d(ts)).max())
        self._max_deriv_cache[order] = val
        return val


TEMPLATES = {
    "tent": Template("tent", 0),
    "cardinal1": Template("cardinal1", 1),
    "cardinal2": Template("cardinal2", 2),
    "cardinal3": Template("cardinal3", 3),
}


def _default_template(kind: str, K: int | None) -> str:
    if kind == "K-smooth":
        if K is None or not (1 <= K <= 3):
            raise AtomError("K-smooth atoms need K in {1, 2, 3}")
        return f"cardinal{K}"
    if kind in ("Lip", "LipGamma"):
        return "tent"
    if kind == "SigmaP":
        return "cardinal2"
    raise AtomError(f"unknown atom kind {kind!r}")


# ---------------------------------------------------------------------------
# Atoms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    """Localized building block A * prod_d phi(2^j x_d - m_d).

    Support is exactly Q_{j,m}; the declared dilation d > 1 is the cube the
    kind's definition permits.  `amplitude` carries the kind normalization
    (slack included) and, for re-expanded atoms, a signed scale of modulus
    at most one.
    """

    kind: str
    level: int
    index: tuple[int, ...]
    dilation: float
    template: str
    amplitude: float
    K: int | None = None
    sigma: float | None = None
    p: float | None = None

    @property
    def dimension(self) -> int:
        return len(self.index)

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.index, dtype=float) * 2.0 ** (-self.level)

    def support_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        h = 2.0 ** (-self.level)
        return self.center - h, self.center + h

    def evaluate(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.dimension == 1:
            pts = pts.reshape(-1, 1)
        else:
            pts = np.atleast_2d(pts)
        phi = TEMPLATES[self.template].phi
        scale = 2.0 ** self.level
        out = np.full(len(pts), self.amplitude)
        for d in range(self.dimension):
            out = out * phi(scale * pts[:, d] - self.index[d])
        return out

    def profile_at_unit_scale(self, points) -> np.ndarray:
        """a(2^-j y) evaluated at y, i.e. the level-0 shape at its index."""
        pts = np.asarray(points, dtype=float)
        if self.dimension == 1:
            pts = pts.reshape(-1, 1)
        else:
            pts = np.atleast_2d(pts)
        phi = TEMPLATES[self.template].phi
        out = np.full(len(pts), self.amplitude)
        for d in range(self.dimension):
            out = out * phi(pts[:, d] - self.index[d])
        return out


_SIGMA_NORM_CACHE: dict[tuple, float] = {}


def _sigma_profile_norm(template: str, n: int, sigma: float, p: float,
                        level: int = 7) -> float:
    """Besov norm of the unit template at level 0 (used to normalize
    general-smoothness atoms); cached per parameter set."""
    key = (template, n, round(sigma, 12), p if math.isinf(p) else round(p, 12), level)
    if key in _SIGMA_NORM_CACHE:
        return _SIGMA_NORM_CACHE[key]
    phi = TEMPLATES[template].phi
    lo, hi = [-1.5] * n, [1.5] * n
    if n == 1:
        f = SampledFunction.from_callable(lo, hi, level, lambda x: phi(x))
    else:
        f = SampledFunction.from_callable(lo, hi, level,
                                          lambda X, Y: phi(X) * phi(Y))
    r = max(1, int(math.floor(sigma)) + 1)
    params = BesovParams(sigma, p, p, r)
    val = besov_norm_differences(f, params)
    _SIGMA_NORM_CACHE[key] = val
    return val


def make_atom(kind: str, j: int, m, d: float = 1.5, K: int | None = None,
              sigma: float | None = None, p: float | None = None,
              slack: float = 2.0, domain: LipschitzDomain | None = None,
              template: str | None = None) -> Atom:
    """Template bump rescaled so the kind's bound holds with the given slack.

    K-smooth: |D^alpha a| <= 2^{|alpha| j} / slack for |alpha| <= K.
    Lip: |a| <= 1/slack and euclidean Lipschitz constant <= 2^j / slack.
    SigmaP: computed norm of a(2^-j .) at most 1/slack.
    LipGamma: the Lip bounds on the boundary; requires d Q_{j,m} to meet it.
    """
    if not d > 1:
        raise AtomError("dilation d must exceed 1")
    if j < 0:
        raise AtomError("atom level must be >= 0")
    index = tuple(int(v) for v in np.atleast_1d(m))
    n = len(index)
    tpl = template or _default_template(kind, K)
    profile = TEMPLATES[tpl]

    if kind == "K-smooth":
        worst = 0.0
        for alpha in np.ndindex(*(K + 1,) * n):
            if sum(alpha) > K:
                continue
            prod = math.prod(profile.max_derivative(a) for a in alpha)
            worst = max(worst, prod)
        amplitude = 1.0 / (slack * worst)
        return Atom(kind, j, index, d, tpl, amplitude, K=K)

    if kind in ("Lip", "LipGamma"):
        m1 = profile.max_derivative(1)
        amplitude = 1.0 / (slack * max(1.0, m1 * math.sqrt(n)))
        if kind == "LipGamma":
            if domain is None:
                raise AtomError("LipGamma atoms require the domain")
            cube_lo = np.asarray(index, dtype=float) * 2.0 ** -j - d * 2.0 ** -j
            cube_hi = np.asarray(index, dtype=float) * 2.0 ** -j + d * 2.0 ** -j
            if not domain.boundary_intersects_box(cube_lo, cube_hi):
                raise AtomError(
                    f"d Q_({j},{index}) misses the boundary; no LipGamma atom")
        return Atom(kind, j, index, d, tpl, amplitude)

    if kind == "SigmaP":
        if sigma is None or p is None:
            raise AtomError("SigmaP atoms need sigma and p")
        norm = _sigma_profile_norm(tpl, n, sigma, p)
        if norm <= 0:
            raise AtomError("unsatisfiable normalization: zero profile norm")
        amplitude = 1.0 / (slack * norm)
        return Atom(kind, j, index, d, tpl, amplitude, sigma=sigma, p=p)

    raise AtomError(f"unknown atom kind {kind!r}")


def validate_atom(atom: Atom, domain: LipschitzDomain | None = None,
                  n_samples: int = 2000, seed: int = 0,
                  sigma_check: tuple[float, float] | None = None,
                  band: float = 4.0) -> dict:
    """Check every invariant of the declared kind; report violations.

    For a K-smooth atom, `sigma_check=(sigma, p)` with sigma < K additionally
    verifies the general-smoothness condition empirically (within `band`).
    """
    rng = np.random.default_rng(seed)
    report: dict = {"kind": atom.kind, "violations": [], "measurements": {}}
    n = atom.dimension
    lo, hi = atom.support_bounds()
    half = 2.0 ** (-atom.level)

    # support containment in d Q_{j,m} plus vanishing outside
    d_half = atom.dilation * half
    if np.any(lo < atom.center - d_half - 1e-12) or np.any(hi > atom.center + d_half + 1e-12):
        report["violations"].append("support exceeds the dilated cube")
    probe = atom.center + rng.uniform(1.0, 2.0, size=(64, n)) * half \
        * rng.choice([-1.0, 1.0], size=(64, n))
    outside = np.max(np.abs(probe - atom.center), axis=1) > half
    if np.any(np.abs(atom.evaluate(probe[outside])) > 0):
        report["violations"].append("nonzero value outside the support cube")

    pts = atom.center + rng.uniform(-1.0, 1.0, size=(n_samples, n)) * half

    if atom.kind == "K-smooth":
        step = half * 1e-4
        bound = 0.0
        for order in range(1, (atom.K or 1) + 1):
            for axis in range(n):
                e = np.zeros(n)
                e[axis] = step
                if order == 1:
                    fd = (atom.evaluate(pts + e) - atom.evaluate(pts - e)) / (2 * step)
                elif order == 2:
                    fd = (atom.evaluate(pts + e) - 2 * atom.evaluate(pts)
                          + atom.evaluate(pts - e)) / step ** 2
                else:
                    fd = (atom.evaluate(pts + 2 * e) - 2 * atom.evaluate(pts + e)
                          + 2 * atom.evaluate(pts - e)
                          - atom.evaluate(pts - 2 * e)) / (2 * step ** 3)
                ratio = float(np.abs(fd).max()) / 2.0 ** (order * atom.level)
                bound = max(bound, ratio)
        report["measurements"]["max_derivative_ratio"] = bound
        if bound > 1.0 + 1e-6:
            report["violations"].append(
                f"derivative bound exceeded: ratio {bound:.4g}")
        if sigma_check is not None:
            sg, pp = sigma_check
            if not sg < (atom.K or 0):
                report["violations"].append("sigma_check needs sigma < K")
            else:
                val = _sigma_profile_norm(atom.template, n, sg, pp) * abs(atom.amplitude)
                report["measurements"]["sigma_p_norm"] = val
                if val > band:
                    report["violations"].append(
                        f"K-atom fails the ({sg},{pp}) condition beyond band")

    elif atom.kind in ("Lip", "LipGamma"):
        if atom.kind == "LipGamma":
            if domain is None:
                raise AtomError("validating a LipGamma atom requires the domain")
            bd = domain.boundary
            s = rng.uniform(0, bd.total_length, size=n_samples)
            pts = bd.point_at_arclength(s)
        sup = float(np.abs(atom.evaluate(pts)).max())
        report["measurements"]["sup"] = sup
        if sup > 1.0 + 1e-9:
            report["violations"].append(f"|a| <= 1 fails: sup {sup:.4g}")
        x = pts[rng.integers(0, len(pts), size=n_samples)]
        y = pts[rng.integers(0, len(pts), size=n_samples)]
        dist = np.linalg.norm(x - y, axis=1) if n == 2 else np.abs(x - y).ravel()
        keep = dist > 1e-12
        quot = np.abs(atom.evaluate(x[keep]) - atom.evaluate(y[keep])) / dist[keep]
        ratio = float(quot.max()) / 2.0 ** atom.level if keep.any() else 0.0
        report["measurements"]["lipschitz_ratio"] = ratio
        if ratio > 1.0 + 1e-9:
            report["violations"].append(f"Lipschitz bound fails: ratio {ratio:.4g}")

    elif atom.kind == "SigmaP":
        val = _sigma_profile_norm(atom.template, n, atom.sigma, atom.p) \
            * abs(atom.amplitude)
        report["measurements"]["sigma_p_norm"] = val
        if val > 1.0 + 1e-9:
            report["violations"].append(
                f"rescaled Besov bound fails: norm {val:.4g}")
    else:
        report["violations"].append(f"unknown kind {atom.kind!r}")
    return report


# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------


@dataclass
class AtomicDecomposition:
    """Coefficients plus the atom map sharing one kind, aimed at params."""

    coefficients: CoefficientArray
    atoms: dict[tuple[int, tuple[int, ...]], Atom]
    params: BesovParams
    residual_sup: float = 0.0
    residual_history: list[float] = field(default_factory=list)

    @property
    def kind(self) -> str:
        for a in self.atoms.values():
            return a.kind
        return "empty"

    def check_alignment(self):
        if set(self.coefficients.entries) != set(self.atoms):
            raise AtomError("coefficient support differs from the atom map")


def _scatter_atom(values: np.ndarray, lo: np.ndarray, level_grid: int,
                  atom, coeff: float):
    """Add coeff * atom onto a node-value array (local support only).

    Template atoms use the separable fast path; other atom-like objects
    (boundary-atom extensions) are evaluated on their local node block.
    """
    spacing = 2.0 ** -level_grid
    s_lo, s_hi = atom.support_bounds()
    n = len(np.atleast_1d(s_lo))
    slices, axes = [], []
    for d in range(n):
        i_lo = max(0, int(math.ceil((s_lo[d] - lo[d]) / spacing - 1e-9)))
        i_hi = min(values.shape[d] - 1,
                   int(math.floor((s_hi[d] - lo[d]) / spacing + 1e-9)))
        if i_hi < i_lo:
            return
        slices.append(slice(i_lo, i_hi + 1))
        axes.append(lo[d] + np.arange(i_lo, i_hi + 1) * spacing)
    if isinstance(atom, Atom):
        phi = TEMPLATES[atom.template].phi
        c = atom.center
        h = 2.0 ** (-atom.level)
        factors = [phi((xs - c[d]) / h) for d, xs in enumerate(axes)]
        block = factors[0] if n == 1 else np.outer(factors[0], factors[1])
        values[tuple(slices)] += coeff * atom.amplitude * block
        return
    if n == 1:
        pts = axes[0][:, None]
        shape = (len(axes[0]),)
    else:
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        shape = X.shape
    values[tuple(slices)] += coeff * atom.evaluate(pts).reshape(shape)


def decompose(f: SampledFunction, params: BesovParams, J: int,
              kind: str = "Lip", K: int | None = None,
              sigma: float | None = None, p_atom: float | None = None,
              d: float = 1.5, slack: float = 2.0,
              coeff_tol: float = 0.0,
              carrier: LipschitzDomain | None = None) -> AtomicDecomposition:
    """Hierarchical interpolation of f by nodal atoms, levels 0..J.

    Level 0 interpolates f at the integer lattice; each further level
    interpolates the residual at the new lattice points.  Coefficients are
    scaled so the unit profiles satisfy their kind invariant.  Errors out if
    the sup-norm of the residual grows between levels.
    """
    if J > f.level - 2:
        raise DecompositionError("need J <= grid level - 2 to resolve atoms")
    n = f.dimension
    base = np.round(f.lo * 2.0 ** f.level).astype(np.int64)
    if not np.allclose(base * 2.0 ** -f.level, f.lo, atol=1e-12):
        raise DecompositionError("grid box must be dyadically aligned")

    proto = make_atom(kind, 0, (0,) * n, d=d, K=K, sigma=sigma, p=p_atom,
                      slack=slack)
    amplitude = proto.amplitude

    residual = f.values.copy()
    entries: dict = {}
    atoms: dict = {}
    history = [float(np.abs(residual).max())]
    for j in range(J + 1):
        stride = 2 ** (f.level - j)
        axis_idx = []
        axis_m = []
        for dax in range(n):
            size = f.values.shape[dax]
            first = (-base[dax]) % stride
            pos = np.arange(first, size, stride)
            axis_idx.append(pos)
            axis_m.append((pos + base[dax]) // stride)
        grid_sel = np.ix_(*axis_idx) if n == 2 else (axis_idx[0],)
        surplus = residual[grid_sel]
        coeffs = surplus / amplitude
        nz = np.nonzero(np.abs(coeffs) > coeff_tol)
        new_atoms = []
        for pos in zip(*nz):
            lam = float(coeffs[pos])
            m = tuple(int(axis_m[dax][pos[dax]]) for dax in range(n))
            atom = Atom(kind, j, m, d, proto.template, amplitude,
                        K=K, sigma=sigma, p=p_atom)
            entries[(j, m)] = lam
            atoms[(j, m)] = atom
            new_atoms.append((atom, lam))
        for atom, lam in new_atoms:
            _scatter_atom(residual, f.lo, f.level, atom, -lam)
        # nodal interpolation is exact at the extracted lattice points; pin
        # them to zero so float round-trip noise cannot leak to finer levels
        residual[grid_sel] = 0.0
        sup = float(np.abs(residual).max())
        # transient overshoot of a level's interpolant is normal; flag only
        # genuine growth over the best residual reached so far
        if sup > 1.25 * min(history) + 1e-15:
            raise DecompositionError(
                f"residual sup grew at level {j} ({min(history):.3e} -> "
                f"{sup:.3e}); f is outside the space at this resolution")
        history.append(sup)

    arr = CoefficientArray(carrier if carrier is not None else _BoxCarrier(f),
                           on_boundary=False, entries=entries)
    dec = AtomicDecomposition(arr, atoms, params,
                              residual_sup=history[-1],
                              residual_history=history)
    dec.check_alignment()
    return dec


class _BoxCarrier:
    """Stand-in carrier for decompositions over a plain box (whole space)."""

    def __init__(self, f: SampledFunction):
        self.dimension = f.dimension
        self.lo = f.lo.copy()
        self.hi = f.hi.copy()
        self.is_convex = True

    def contains(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return ((pts >= self.lo - 1e-12) & (pts <= self.hi + 1e-12)).all(axis=1)


def reconstruct(dec: AtomicDecomposition, upto_level: int | None = None,
                lo=None, hi=None, level: int | None = None) -> SampledFunction:
    """Pointwise sum of lambda_{j,m} a_{j,m} for j <= upto_level on a grid."""
    if lo is None or hi is None or level is None:
        carrier = dec.coefficients.domain
        lo = np.asarray(getattr(carrier, "lo", None) if hasattr(carrier, "lo")
                        else carrier.bounding_box[0], dtype=float)
        hi = np.asarray(getattr(carrier, "hi", None) if hasattr(carrier, "hi")
                        else carrier.bounding_box[1], dtype=float)
        level = max((j for j, _ in dec.atoms), default=0) + 2
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    shape = tuple(int(round((h - l) * 2.0 ** level)) + 1 for l, h in zip(lo, hi))
    values = np.zeros(shape)
    for (j, m), lam in dec.coefficients.entries.items():
        if upto_level is not None and j > upto_level:
            continue
        _scatter_atom(values, lo, level, dec.atoms[(j, m)], lam)
    return SampledFunction(lo, hi, level, values)


# ---------------------------------------------------------------------------
# Re-expansion into smooth atoms
# ---------------------------------------------------------------------------


def reexpand(dec: AtomicDecomposition, K: int,
             eps: float | None = None, inner_levels: int = 7,
             inner_grid_margin: int = 2, band: float = 50.0) -> tuple[
                 "AtomicDecomposition", dict]:
    """Rewrite a general-smoothness decomposition over smooth atoms.

    Each source atom's unit-scale profile is expanded by the hierarchical
    scheme into nodal smooth atoms supported on the undilated cubes; after
    rescaling, contributions landing on the same output cube are merged with
    the absolute-coefficient weighting, producing valid smooth atoms with a
    signed scale of modulus at most one.
    """
    s = dec.params.s
    kinds = {a.kind for a in dec.atoms.values()}
    if kinds <= {"K-smooth"} and all((a.K or 0) >= K for a in dec.atoms.values()):
        # already smooth: the inner expansion is the identity
        return dec, {"identity": True, "inner_sup_residual": 0.0,
                     "max_contributors": 1, "eta_norms": {}}
    if kinds - {"SigmaP"}:
        raise AtomError("re-expansion expects SigmaP (or already-smooth) atoms")
    sigmas = {a.sigma for a in dec.atoms.values()}
    ps = {a.p for a in dec.atoms.values()}
    if len(sigmas) != 1 or len(ps) != 1:
        raise AtomError("source atoms must share sigma and p")
    sigma, p_atom = sigmas.pop(), ps.pop()
    if not (s < sigma < K):
        raise AtomError(f"need s < sigma < K, got s={s}, sigma={sigma}, K={K}")
    if eps is None:
        eps = (sigma - s) / 2.0
    if not (0 < eps < sigma - s):
        raise AtomError("eps must lie in (0, sigma - s)")

    n = dec.coefficients.domain.dimension if hasattr(
        dec.coefficients.domain, "dimension") else 2

    template = next(iter(dec.atoms.values())).template
    unit_entries, unit_sup = _unit_inner_expansion(
        template, K, n, sigma, p_atom, inner_levels, inner_grid_margin)

    nu_abs: dict = {}
    nu_signed: dict = {}
    contributors: dict = {}
    eta_norms: dict = {}
    unit_norm = _plain_seq_norm(unit_entries, sigma, p_atom, p_atom, n)
    lam_max = max((abs(v) for v in dec.coefficients.entries.values()),
                  default=0.0)
    for (k, l), lam in dec.coefficients.entries.items():
        if abs(lam) <= 1e-12 * lam_max:
            continue
        src = dec.atoms[(k, l)]
        eta_norm = abs(src.amplitude) * unit_norm
        eta_norms[(k, l)] = eta_norm
        if eta_norm > band:
            raise DecompositionError(
                f"inner expansion of atom ({k},{l}) violates the sequence "
                f"bound: {eta_norm:.4g} > band {band}")
        l_arr = np.asarray(l, dtype=np.int64)
        for (i, w), eta_u in unit_entries.items():
            # inner expansions are exact translates of the unit expansion
            eta = src.amplitude * eta_u
            j = k + i
            w_shift = tuple(int(v) for v in (np.asarray(w, dtype=np.int64)
                                             + (l_arr << i)))
            key = (j, w_shift)
            nu_abs[key] = nu_abs.get(key, 0.0) + abs(eta) * abs(lam)
            nu_signed[key] = nu_signed.get(key, 0.0) + eta * lam
            contributors.setdefault(key, {}).setdefault(k, set()).add(l)
    inner_sup = unit_sup * max((abs(a.amplitude) for a in dec.atoms.values()),
                               default=0.0)

    proto = make_atom("K-smooth", 0, (0,) * n, d=1.5, K=K)
    atoms: dict = {}
    entries: dict = {}
    max_contrib = 0
    for key, total in nu_abs.items():
        if total == 0.0:
            continue
        j, w = key
        scale = nu_signed[key] / total
        atoms[key] = Atom("K-smooth", j, w, 1.5, proto.template,
                          proto.amplitude * scale, K=K)
        entries[key] = total
        for k, ls in contributors[key].items():
            max_contrib = max(max_contrib, len(ls))

    arr = CoefficientArray(dec.coefficients.domain, on_boundary=False,
                           entries=entries)
    out = AtomicDecomposition(arr, atoms, dec.params)
    out.check_alignment()
    report = {"identity": False, "inner_sup_residual": inner_sup,
              "max_contributors": max_contrib, "eta_norms": eta_norms,
              "eps": eps}
    return out, report


_UNIT_EXPANSION_CACHE: dict[tuple, tuple[dict, float]] = {}


def _unit_inner_expansion(template: str, K: int, n: int, sigma: float,
                          p_atom: float, inner_levels: int,
                          margin: int) -> tuple[dict, float]:
    """Hierarchical expansion of the unit template into smooth nodal atoms.

    Cached: expansions of shifted/rescaled profiles are exact translates.
    """
    key = (template, K, n, inner_levels, margin)
    if key in _UNIT_EXPANSION_CACHE:
        return _UNIT_EXPANSION_CACHE[key]
    phi = TEMPLATES[template].phi
    lo, hi = [-1.5] * n, [1.5] * n
    grid_level = inner_levels + margin
    if n == 1:
        f = SampledFunction.from_callable(lo, hi, grid_level, lambda x: phi(x))
    else:
        f = SampledFunction.from_callable(lo, hi, grid_level,
                                          lambda X, Y: phi(X) * phi(Y))
    inner_params = BesovParams(sigma, p_atom, p_atom,
                               max(1, int(sigma) + 1), j_max=8)
    inner = decompose(f, inner_params, inner_levels, kind="K-smooth", K=K,
                      d=1.5)
    result = (dict(inner.coefficients.entries), inner.residual_sup)
    _UNIT_EXPANSION_CACHE[key] = result
    return result


def _plain_seq_norm(entries: dict, s: float, p: float, q: float,
                    n: int) -> float:
    """Whole-space sequence norm (no carrier restriction)."""
    ip = 0.0 if math.isinf(p) else 1.0 / p
    levels: dict[int, list[float]] = {}
    for (j, _), v in entries.items():
        levels.setdefault(j, []).append(abs(v))
    terms = []
    for j, vals in sorted(levels.items()):
        a = np.asarray(vals)
        inner = float(a.max()) if math.isinf(p) else float(np.sum(a ** p) ** ip)
        terms.append(2.0 ** (j * (s - n * ip)) * inner)
    if not terms:
        return 0.0
    t = np.asarray(terms)
    if math.isinf(q):
        return float(t.max())
    return float(np.sum(t ** q) ** (1.0 / q))


# ---------------------------------------------------------------------------
# The triangular-array inequality
# ---------------------------------------------------------------------------


def todo3_check(gamma: np.ndarray, alpha: float, eps: float) -> dict:
    """Check sum_j (sum_{k<=j} 2^{-(j-k) eps} g_{j,k})^a <= c sum_k (sum_{j>=k} g_{j,k})^a.

    `gamma` is a lower-triangular array (rows j, columns k <= j); alpha may
    be inf (max modification).  The constant is the proof's Hoelder bound
    (sum_i 2^{-i eps alpha'})^{alpha/alpha'} evaluated numerically.
    """
    g = np.asarray(gamma, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("gamma must be a square (lower-triangular) array")
    if np.any(g < 0):
        raise ValueError("gamma entries must be nonnegative")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not (alpha >= 1):
        raise ValueError("alpha must be >= 1 (inf allowed)")
    J = g.shape[0]
    jj, kk = np.meshgrid(np.arange(J), np.arange(J), indexing="ij")
    tri = kk <= jj
    weights = np.where(tri, 2.0 ** (-(jj - kk) * eps), 0.0)
    inner_lhs = (weights * np.where(tri, g, 0.0)).sum(axis=1)
    inner_rhs = np.where(tri, g, 0.0).sum(axis=0)
    if math.isinf(alpha):
        lhs = float(inner_lhs.max())
        rhs = float(inner_rhs.max())
        c = 1.0 / (1.0 - 2.0 ** -eps)
    else:
        lhs = float(np.sum(inner_lhs ** alpha))
        rhs = float(np.sum(inner_rhs ** alpha))
        if alpha == 1.0:
            c = 1.0
        else:
            alpha_conj = alpha / (alpha - 1.0)
            c = (1.0 / (1.0 - 2.0 ** (-eps * alpha_conj))) ** (alpha / alpha_conj)
    holds = lhs <= c * rhs + 1e-12 * max(1.0, abs(rhs))
    return {"lhs": lhs, "rhs": rhs, "constant": c, "holds": bool(holds)}


# ---------------------------------------------------------------------------
# Decomposition files
# ---------------------------------------------------------------------------


def dump_decomposition(dec: AtomicDecomposition) -> str:
    """Header `atoms kind=... params=...` + coefficient lines `j m... value`.

    Intended for single-kind library decompositions; the signed scales of
    re-expanded atoms are not preserved by this format.
    """
    proto = next(iter(dec.atoms.values())) if dec.atoms else None
    parts = [f"kind={dec.kind}"]
    if proto is not None:
        extras = [f"d={proto.dilation:g}", f"template={proto.template}"]
        if proto.K is not None:
            extras.append(f"K={proto.K}")
        if proto.sigma is not None:
            extras.append(f"sigma={proto.sigma:g}")
        if proto.p is not None:
            extras.append(f"p={proto.p:g}")
        parts.append("params=" + ",".join(extras))
    parts += [f"s={dec.params.s:g}", f"p={dec.params.p:g}",
              f"q={dec.params.q:g}", f"r={dec.params.r}"]
    return "atoms " + " ".join(parts) + "\n" + dec.coefficients.dump()


def load_decomposition(text: str, carrier=None) -> AtomicDecomposition:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("atoms "):
        raise AtomError("not a decomposition file")
    header = dict(tok.split("=", 1) for tok in lines[0].split()[1:]
                  if "=" in tok)
    kind = header["kind"]
    extras = dict(kv.split("=") for kv in header.get("params", "").split(",")
                  if "=" in kv)
    params = BesovParams(float(header["s"]), float(header["p"]),
                         float(header["q"]), int(header["r"]))
    entries = {}
    for ln in lines[1:]:
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        toks = ln.split()
        j = int(toks[0])
        m = tuple(int(t) for t in toks[1:-1])
        entries[(j, m)] = float(toks[-1])
    atoms = {}
    for (j, m) in entries:
        atoms[(j, m)] = make_atom(
            kind, j, m, d=float(extras.get("d", 1.5)),
            K=int(extras["K"]) if "K" in extras else None,
            sigma=float(extras["sigma"]) if "sigma" in extras else None,
            p=float(extras["p"]) if "p" in extras else None,
            template=extras.get("template"))
    dummy_f = None
    if carrier is None:
        # reconstruct a generous box carrier from the atom supports
        los, his = [], []
        for (j, m) in entries:
            c = np.asarray(m, dtype=float) * 2.0 ** -j
            los.append(c - 2.0 ** -j)
            his.append(c + 2.0 ** -j)
        lo = np.floor(np.min(los, axis=0)) if los else np.zeros(1)
        hi = np.ceil(np.max(his, axis=0)) if his else np.ones(1)

        class _Box:
            dimension = len(np.atleast_1d(lo))
            is_convex = True

            def contains(self, pts):
                pts = np.atleast_2d(np.asarray(pts, dtype=float))
                return ((pts >= lo - 1e-12) & (pts <= hi + 1e-12)).all(axis=1)
        _Box.lo, _Box.hi = np.atleast_1d(lo), np.atleast_1d(hi)
        carrier = _Box()
    arr = CoefficientArray(carrier, on_boundary=False, entries=entries)
    return AtomicDecomposition(arr, atoms, params)
