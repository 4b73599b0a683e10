"""Moduli of smoothness, Besov quasi-norms by differences, weighted sequence
norms on domains and boundaries, dilation homogeneity, Gagliardo-Nirenberg
ratios, and self-similar norms.

The integral over t in (0, 1] is discretized at t = 2^-j with unit weights
(the standard dyadic equivalent norm); the sup over |h| <= t is lower-bounded
by a fixed finite net of directions and magnitudes, made monotone in t by a
running maximum over the finer nets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .differences import DomainGridContext, difference_lp_norm, lp_quasinorm
from .geometry import BoxDomain, IntervalDomain, LipschitzDomain, cubes_meeting
from .grids import SampledFunction

__all__ = [
    "BesovParams",
    "CoefficientArray",
    "modulus_of_smoothness",
    "modulus_levels",
    "besov_norm_differences",
    "norm_from_modulus",
    "seq_norm_domain",
    "seq_norm_boundary",
    "homogeneity_ratio",
    "SelfsimilarConfig",
    "selfsimilar_norm",
    "gn_check",
]


def _inv(p: float) -> float:
    return 0.0 if math.isinf(p) else 1.0 / p


@dataclass(frozen=True)
class BesovParams:
    """Smoothness s, integrability p, summability q, difference order r > s."""

    s: float
    p: float
    q: float
    r: int
    j_max: int = 8

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("smoothness s must be positive")
        if not (self.p > 0 and self.q > 0):
            raise ValueError("p and q must be positive (inf allowed)")
        if not (isinstance(self.r, int) and self.r >= 1):
            raise ValueError("difference order r must be a positive integer")
        if not self.r > self.s:
            raise ValueError(f"need r > s, got r={self.r}, s={self.s}")
        if self.j_max < 0:
            raise ValueError("j_max must be >= 0")


# ---------------------------------------------------------------------------
# Modulus of smoothness
# ---------------------------------------------------------------------------

_N_DIRECTIONS_2D = 16
_MAG_POWERS = (0, 1, 2)


def direction_set(n: int, t: float) -> np.ndarray:
    """Finite net of shift vectors with |h| <= t (a reproducible lower bound
    of the sup over the ball)."""
    if n == 1:
        units = np.array([[1.0], [-1.0]])
    elif n == 2:
        ang = 2.0 * np.pi * np.arange(_N_DIRECTIONS_2D) / _N_DIRECTIONS_2D
        units = np.column_stack([np.cos(ang), np.sin(ang)])
    else:
        raise ValueError("only dimensions 1 and 2 are supported")
    mags = [t * 2.0 ** (-i) for i in _MAG_POWERS]
    return np.vstack([m * units for m in mags])


def _level_cap(f: SampledFunction, params: BesovParams) -> int:
    return max(0, min(params.j_max, f.level - params.r))


def _raw_modulus(f, t, params, domain, ctx) -> float:
    best = 0.0
    for h in direction_set(f.dimension, t):
        val = difference_lp_norm(f, h, params.r, params.p, domain, ctx)
        if val > best:
            best = val
    return best


def modulus_levels(f: SampledFunction, params: BesovParams,
                   domain: LipschitzDomain | None = None,
                   j_cap: int | None = None) -> np.ndarray:
    """omega_r(f, 2^-j)_p for j = 0..cap, monotone in t by construction."""
    cap = _level_cap(f, params) if j_cap is None else j_cap
    ctx = DomainGridContext(f, domain) if domain is not None else None
    raw = np.array([_raw_modulus(f, 2.0 ** -j, params, domain, ctx)
                    for j in range(cap + 1)])
    # running max from fine to coarse: the net at t subsumes all finer nets
    return np.maximum.accumulate(raw[::-1])[::-1]


def modulus_of_smoothness(f: SampledFunction, t: float, params: BesovParams,
                          domain: LipschitzDomain | None = None) -> float:
    """omega_r(f, t, Omega)_p over the finite net (including all finer dyadic
    nets, so the result is monotone in t)."""
    if not (0 < t <= 1):
        raise ValueError("the norm integrates over t in (0, 1]")
    j_start = max(0, int(math.floor(-math.log2(t) + 1e-12)))
    cap = max(j_start, _level_cap(f, params))
    ctx = DomainGridContext(f, domain) if domain is not None else None
    best = _raw_modulus(f, t, params, domain, ctx)
    for j in range(j_start + 1, cap + 1):
        best = max(best, _raw_modulus(f, 2.0 ** -j, params, domain, ctx))
    return best


def norm_from_modulus(lp_term: float, omegas: np.ndarray, s: float,
                      q: float) -> float:
    """Assemble the quasi-norm from L_p term and the dyadic modulus table."""
    j = np.arange(len(omegas), dtype=float)
    terms = 2.0 ** (j * s) * omegas
    if math.isinf(q):
        tail = float(terms.max()) if len(terms) else 0.0
    else:
        tail = float(np.sum(terms ** q) ** (1.0 / q))
    return lp_term + tail


def besov_norm_differences(f: SampledFunction, params: BesovParams,
                           domain: LipschitzDomain | None = None,
                           omegas: np.ndarray | None = None) -> float:
    """||f|L_p|| + (sum_j [2^{js} omega_r(f,2^-j)]^q)^(1/q); max when q=inf.

    A precomputed modulus table (`omegas`) can be reused across (s, q).
    """
    lp = lp_quasinorm(f, params.p, domain)
    if omegas is None:
        omegas = modulus_levels(f, params, domain)
    return norm_from_modulus(lp, omegas, params.s, params.q)


# ---------------------------------------------------------------------------
# Coefficient arrays and sequence norms
# ---------------------------------------------------------------------------


class CoefficientArray:
    """Sparse per-level coefficients lambda_{j,m} on a domain or boundary.

    Nonzero entries may only sit on cubes meeting the carrier.
    """

    def __init__(self, domain: LipschitzDomain, on_boundary: bool,
                 entries: dict | None = None, validate: bool = False):
        self.domain = domain
        self.on_boundary = bool(on_boundary)
        self.entries: dict[tuple[int, tuple[int, ...]], float] = {}
        for (j, m), v in (entries or {}).items():
            if v != 0.0:
                self.entries[(int(j), tuple(int(c) for c in np.atleast_1d(m)))] = float(v)
        if validate:
            self.validate_support()

    @property
    def levels(self) -> list[int]:
        return sorted({j for j, _ in self.entries})

    def level_values(self, j: int) -> np.ndarray:
        return np.array([v for (jj, _), v in self.entries.items() if jj == j])

    def validate_support(self):
        for j in self.levels:
            allowed = cubes_meeting(self.domain, j, boundary=self.on_boundary)
            for (jj, m), v in self.entries.items():
                if jj == j and m not in allowed:
                    where = "Gamma" if self.on_boundary else "Omega"
                    raise ValueError(
                        f"coefficient at level {j}, index {m} lies on a cube "
                        f"not meeting {where}")

    def scaled(self, c: float) -> "CoefficientArray":
        return CoefficientArray(self.domain, self.on_boundary,
                                {k: c * v for k, v in self.entries.items()})

    def restrict_to_boundary(self) -> "CoefficientArray":
        """Keep only the entries on cubes meeting the boundary."""
        if self.on_boundary:
            return self
        keep: dict = {}
        allowed: dict[int, set] = {}
        for (j, m), v in self.entries.items():
            if j not in allowed:
                allowed[j] = cubes_meeting(self.domain, j, boundary=True)
            if m in allowed[j]:
                keep[(j, m)] = v
        return CoefficientArray(self.domain, True, keep)

    def __len__(self) -> int:
        return len(self.entries)

    # -- serialization: text lines `j m1 [m2] value` -----------------------

    def dump(self) -> str:
        lines = []
        for (j, m), v in sorted(self.entries.items()):
            coords = " ".join(str(c) for c in m)
            lines.append(f"{j} {coords} {v:.17g}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def load(cls, text: str, domain: LipschitzDomain,
             on_boundary: bool) -> "CoefficientArray":
        entries = {}
        for ln in text.splitlines():
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            toks = ln.split()
            j = int(toks[0])
            m = tuple(int(t) for t in toks[1:-1])
            entries[(j, m)] = float(toks[-1])
        return cls(domain, on_boundary, entries)


def _seq_norm_kernel(arr: CoefficientArray, s_eff: float, p: float,
                     q: float, n: int) -> float:
    """(sum_j 2^{j(s_eff - n/p)q} (sum_m |lambda|^p)^{q/p})^{1/q}.

    The boundary norm reuses this kernel with s_eff = s + 1/p, which equals
    the weight 2^{j(s - (n-1)/p)} exactly and keeps the trace coefficient
    embedding an identity at the floating-point level.
    """
    exponent = s_eff - n * _inv(p)
    terms = []
    for j in arr.levels:
        vals = np.abs(arr.level_values(j))
        if math.isinf(p):
            inner = float(vals.max())
        else:
            inner = float(np.sum(vals ** p) ** (1.0 / p))
        terms.append(2.0 ** (j * exponent) * inner)
    if not terms:
        return 0.0
    t = np.array(terms)
    if math.isinf(q):
        return float(t.max())
    return float(np.sum(t ** q) ** (1.0 / q))


def seq_norm_domain(arr: CoefficientArray, s: float, p: float, q: float) -> float:
    """Weighted l_q(l_p) norm with weight 2^{j(s - n/p)} on Omega-cubes."""
    if arr.on_boundary:
        raise ValueError("carrier mismatch: expected a domain coefficient array")
    return _seq_norm_kernel(arr, s, p, q, arr.domain.dimension)


def seq_norm_boundary(arr: CoefficientArray, s: float, p: float, q: float) -> float:
    """Weighted l_q(l_p) norm with weight 2^{j(s - (n-1)/p)} on Gamma-cubes."""
    if not arr.on_boundary:
        raise ValueError("carrier mismatch: expected a boundary coefficient array")
    return _seq_norm_kernel(arr, s + _inv(p), p, q, arr.domain.dimension)


# ---------------------------------------------------------------------------
# Homogeneity
# ---------------------------------------------------------------------------


def homogeneity_ratio(f: SampledFunction, lam: float,
                      params: BesovParams) -> float:
    """||f(lam .)|| / (lam^{s - n/p} ||f||) for dyadic lam in (0, 1].

    Requires supp f inside the euclidean ball of radius lam (checked on
    nodes); dyadic lam keeps the dilated grid exactly node-aligned.  Both
    norms restrict the differences to the function's own box, which cuts the
    modulus off at the support scale and makes the discrete ratio exactly
    dilation covariant (up to a fixed band of boundary octaves).
    """
    i = -math.log2(lam)
    if abs(i - round(i)) > 1e-12 or not (0 < lam <= 1):
        raise ValueError("lam must be a dyadic value in (0, 1]")
    i = int(round(i))
    nodes = f.node_points()
    radii = np.linalg.norm(nodes, axis=1) if f.dimension == 2 \
        else np.abs(nodes[:, 0])
    off = radii > lam * (1 + 1e-12)
    if np.any(np.abs(f.values.ravel()[off]) > 1e-12):
        raise ValueError(f"support violation: f not supported in B(0, {lam})")
    g = f.dilate(i)
    n_over_p = f.dimension * _inv(params.p)
    norm_f = besov_norm_differences(f, params, _own_box(f))
    norm_g = besov_norm_differences(g, params, _own_box(g))
    return norm_g / (lam ** (params.s - n_over_p) * norm_f)


def _own_box(f: SampledFunction) -> LipschitzDomain:
    """The function's bounding box as a domain.

    Differences restricted to the box cut off at the support scale, so the
    dilation covariance of the discrete norms is exact up to a fixed number
    of boundary octaves independent of the dilation level.
    """
    if f.dimension == 1:
        return IntervalDomain(float(f.lo[0]), float(f.hi[0]))
    return BoxDomain(f.lo, f.hi, boundary_resolution=None)


# ---------------------------------------------------------------------------
# Self-similar norms
# ---------------------------------------------------------------------------


def _smoothstep(t: np.ndarray) -> np.ndarray:
    """Quintic smoothstep: S(0)=0, S(1)=1, S(t)+S(1-t)=1, C^2 at the ends."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10.0 - 15.0 * t + 6.0 * t * t)


def partition_window(points: np.ndarray, n: int) -> np.ndarray:
    """Tensor window w with supp w = [-1,1]^n and sum_l w(x - l) = 1.

    1D factor S(1 - |u|) with the quintic smoothstep; the support sits inside
    the euclidean ball of radius sqrt(n).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.ones(len(pts))
    for d in range(n):
        u = np.abs(pts[:, d])
        out = out * np.where(u < 1.0, _smoothstep(1.0 - u), 0.0)
    return out


@dataclass
class SelfsimilarConfig:
    """Window + finite (dilation, translation) index set for the sup."""

    max_dilation: int
    translations: list[tuple[int, ...]]
    window_level: int = 7
    partition_tol: float = 1e-8

    def check_partition(self, n: int, box_halfwidth: float = 1.5,
                        samples: int = 400) -> float:
        rng = np.random.default_rng(12345)
        pts = rng.uniform(-box_halfwidth, box_halfwidth, size=(samples, n))
        span = int(math.ceil(box_halfwidth)) + 1
        total = np.zeros(samples)
        for l in np.ndindex(*(2 * span + 1,) * n):
            off = np.array(l) - span
            total += partition_window(pts - off, n)
        err = float(np.abs(total - 1.0).max())
        if err > self.partition_tol:
            raise ValueError(f"window partition defect {err:.3e} exceeds "
                             f"{self.partition_tol}")
        return err


def selfsimilar_norm(f: SampledFunction, params: BesovParams,
                     config: SelfsimilarConfig,
                     return_argmax: bool = False):
    """sup over (j, l) of || w(. - l) f(2^-j .) | B^s_{p,q} ||.

    Every window 2^-j [l-1, l+1] must stay inside f's box.
    """
    n = f.dimension
    best, arg = -1.0, None
    for j in range(config.max_dilation + 1):
        scale = 2.0 ** (-j)
        for l in config.translations:
            l_arr = np.asarray(l, dtype=float)
            w_lo, w_hi = l_arr - 1.0, l_arr + 1.0
            if np.any(scale * w_lo < f.lo - 1e-12) or np.any(scale * w_hi > f.hi + 1e-12):
                raise ValueError(
                    f"window (j={j}, l={l}) escapes the function box")
            g = SampledFunction.from_callable(
                w_lo, w_hi, config.window_level,
                _windowed(f, scale, l_arr, n))
            val = besov_norm_differences(g, params)
            if val > best:
                best, arg = val, (j, tuple(int(c) for c in np.atleast_1d(l)))
    if return_argmax:
        return best, arg
    return best


def _windowed(f, scale, l_arr, n):
    def fn(*axes):
        pts = np.column_stack([a.ravel() for a in axes]) if n > 1 else \
            np.asarray(axes[0], dtype=float).reshape(-1, 1)
        vals = partition_window(pts - l_arr, n) * f.evaluate(scale * pts, extend=True)
        return vals.reshape(axes[0].shape)
    return fn


# ---------------------------------------------------------------------------
# Gagliardo-Nirenberg
# ---------------------------------------------------------------------------


def gn_check(f: SampledFunction, params0: BesovParams, params1: BesovParams,
             theta: float, domain: LipschitzDomain | None = None) -> dict:
    """Interpolated-parameter norm vs product of powers of endpoint norms."""
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    s = (1 - theta) * params0.s + theta * params1.s
    ip = (1 - theta) * _inv(params0.p) + theta * _inv(params1.p)
    iq = (1 - theta) * _inv(params0.q) + theta * _inv(params1.q)
    p = math.inf if ip == 0 else 1.0 / ip
    q = math.inf if iq == 0 else 1.0 / iq
    r = max(params0.r, params1.r)
    if not r > s:
        raise ValueError("interpolated smoothness exceeds the difference order")
    mid = BesovParams(s, p, q, r, j_max=min(params0.j_max, params1.j_max))
    lhs = besov_norm_differences(f, mid, domain)
    n0 = besov_norm_differences(f, params0, domain)
    n1 = besov_norm_differences(f, params1, domain)
    rhs = n0 ** (1 - theta) * n1 ** theta
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else math.inf}
