"""Pointwise-multiplier experiments: empirical operator-norm ratios, the
characteristic-function membership profile with its truncation diagnostics,
the gauge condition sum for h-set boundaries, and self-similar membership.

Multiplier norms are reported as empirical lower bounds over a declared
finite test family; divergence diagnostics are trend-based (growth in the
truncation), never a binary claim.
"""

from __future__ import annotations

import math

import numpy as np

from .besov import (BesovParams, SelfsimilarConfig, besov_norm_differences,
                    modulus_levels, norm_from_modulus, selfsimilar_norm)
from .differences import lp_quasinorm
from .geometry import HGauge, LipschitzDomain
from .grids import SampledFunction

__all__ = [
    "multiplier_ratio",
    "chi_profile",
    "hset_condition_sum",
    "selfsimilar_membership",
    "chi_function",
]


def multiplier_ratio(m: SampledFunction, test_family, params: BesovParams,
                     return_details: bool = False):
    """max over the family of ||m f|| / ||f||: an empirical lower bound on
    the multiplier norm.  All functions must share one grid."""
    best = 0.0
    details = []
    for f in test_family:
        if (f.level != m.level or not np.allclose(f.lo, m.lo)
                or not np.allclose(f.hi, m.hi)):
            raise ValueError("grid mismatch between multiplier and test function")
        prod = SampledFunction(f.lo, f.hi, f.level, m.values * f.values)
        nf = besov_norm_differences(f, params)
        np_ = besov_norm_differences(prod, params)
        ratio = np_ / nf if nf > 0 else math.inf
        details.append({"norm_f": nf, "norm_mf": np_, "ratio": ratio})
        best = max(best, ratio)
    if return_details:
        return best, details
    return best


def chi_function(domain: LipschitzDomain, grid_level: int,
                 pad: float = 0.25) -> SampledFunction:
    """The characteristic function of the closed domain on a padded box."""
    lo, hi = domain.bounding_box
    lo = np.floor((lo - pad) * 4) / 4
    hi = np.ceil((hi + pad) * 4) / 4
    if domain.dimension == 1:
        return SampledFunction.from_callable(
            lo, hi, grid_level,
            lambda x: domain.contains(x).astype(float))
    return SampledFunction.from_callable(
        lo, hi, grid_level,
        lambda X, Y: domain.contains(
            np.column_stack([X.ravel(), Y.ravel()])).astype(float).reshape(X.shape))


def chi_profile(domain: LipschitzDomain, p: float, q_values, sigma_grid,
                j_sweep, r: int = 1, grid_level: int | None = None,
                fit_range: tuple[int, int] | None = None) -> dict:
    """Membership profile of chi_Omega: truncated norms over (sigma, q, J)
    plus the modulus slope fit.

    The modulus table is computed once; every row reuses it.  Returns
    {'rows': [(sigma, q, J, value)], 'slope': fitted log2 modulus slope,
    'omegas': table, 'levels': js}.
    """
    n = domain.dimension
    if grid_level is None:
        grid_level = 13 if n == 1 else 9
    chi = chi_function(domain, grid_level)
    j_sweep = sorted(int(j) for j in j_sweep)
    j_top = max(j_sweep)
    params = BesovParams(s=0.5, p=p, q=1.0, r=r, j_max=j_top)
    omegas = modulus_levels(chi, params, j_cap=j_top)
    lp_term = lp_quasinorm(chi, p)

    js = np.arange(len(omegas))
    if fit_range is None:
        fit_range = (1, min(j_top, grid_level - 3))
    sel = (js >= fit_range[0]) & (js <= fit_range[1]) & (omegas > 0)
    slope = float(np.polyfit(js[sel], np.log2(omegas[sel]), 1)[0])

    rows = []
    for sigma in sigma_grid:
        for q in q_values:
            for J in j_sweep:
                val = norm_from_modulus(lp_term, omegas[:J + 1], sigma, q)
                rows.append({"sigma": float(sigma), "q": float(q),
                             "J": int(J), "value": val})
    return {"rows": rows, "slope": slope, "omegas": omegas,
            "lp_term": lp_term, "grid_level": grid_level}


def hset_condition_sum(gauge: HGauge, sigma: float, p: float, q: float,
                       n: int, J: int, K_max: int) -> dict:
    """Truncated gauge condition sum sup_j sum_k 2^{k sigma q}
    (h(2^-j)/h(2^-j-k) 2^{-kn})^{q/p}, with the growth of the partial sums
    in K_max as the finiteness diagnostic.

    For q = inf the inner sum becomes a sup of the k-th roots' analogue
    2^{k sigma} (h(2^-j)/h(2^-j-k) 2^{-kn})^{1/p}.
    """
    if gauge.depth is not None and gauge.depth < J + K_max:
        raise ValueError(
            f"gauge tabulated to depth {gauge.depth}, need {J + K_max}")
    if not 0 < p < math.inf:
        raise ValueError("the condition sum needs 0 < p < inf")
    per_j = []
    sup_val = 0.0
    checkpoints = sorted({K_max // 4, K_max // 2, 3 * K_max // 4, K_max} - {0})
    for j in range(J + 1):
        hj = gauge.at_dyadic(j)
        terms = []
        for k in range(K_max + 1):
            ratio = hj / gauge.at_dyadic(j + k) * 2.0 ** (-k * n)
            if math.isinf(q):
                terms.append(2.0 ** (k * sigma) * ratio ** (1.0 / p))
            else:
                terms.append(2.0 ** (k * sigma * q) * ratio ** (q / p))
        terms = np.asarray(terms)
        if math.isinf(q):
            partials = np.maximum.accumulate(terms)
        else:
            partials = np.cumsum(terms)
        row = {"j": j, "total": float(partials[-1]),
               "partials": {int(K): float(partials[K]) for K in checkpoints},
               "tail_ratio": float(terms[-1] / terms[-2]) if terms[-2] > 0 else 0.0}
        per_j.append(row)
        sup_val = max(sup_val, float(partials[-1]))
    # trend classification: geometric tail => convergent truncation
    tails = [row["tail_ratio"] for row in per_j]
    convergent = all(t < 1.0 - 1e-9 for t in tails) if not math.isinf(q) \
        else all(t <= 1.0 + 1e-12 for t in tails)
    return {"per_j": per_j, "sup": sup_val, "convergent": bool(convergent)}


def power_gauge_closed_form(d: float, sigma: float, p: float, q: float,
                            n: int, K_max: int) -> float:
    """Exact truncated sum for h(t) = t^d: a geometric series with ratio
    2^{q (sigma - (n-d)/p)} (independent of j)."""
    if math.isinf(q):
        rho = 2.0 ** (sigma - (n - d) / p)
        return max(rho ** k for k in range(K_max + 1))
    rho = 2.0 ** (q * (sigma - (n - d) / p))
    if abs(rho - 1.0) < 1e-15:
        return float(K_max + 1)
    return float((rho ** (K_max + 1) - 1.0) / (rho - 1.0))


def selfsimilar_membership(f: SampledFunction, params: BesovParams,
                           config: SelfsimilarConfig) -> dict:
    """Self-similar norm with its argmax window plus the sup-norm comparison
    ||f||_inf <= C * value implied by the embedding into L_inf."""
    value, argmax = selfsimilar_norm(f, params, config, return_argmax=True)
    linf = f.max_abs()
    return {
        "value": value,
        "argmax_dilation": argmax[0] if argmax else None,
        "argmax_translation": argmax[1] if argmax else None,
        "sup_norm": linf,
        "embedding_constant": linf / value if value > 0 else math.inf,
    }
