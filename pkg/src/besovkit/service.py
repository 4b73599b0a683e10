"""FastAPI service wrapping the toolkit.

Endpoints accept and return the toolkit's text formats (domain files, grid
dumps, coefficient lines) embedded in JSON, so the CLI can stay a thin
client and remote callers see one stable wire format.
"""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import geometry as geo
from .atoms import (AtomError, DecompositionError, decompose,
                    dump_decomposition, load_decomposition, reconstruct,
                    reexpand)
from .besov import BesovParams, besov_norm_differences, seq_norm_boundary
from .experiments import (ExperimentResult, experiment_names, result_csv,
                          run_experiment)
from .grids import GridError, SampledFunction, dump_grid, load_grid
from .multipliers import chi_profile, hset_condition_sum
from .trace import (BoundaryDecomposition, ArcTentAtom, boundary_decompose,
                    roundtrip_reports)
from .whitney import (SAFE_EXTENSION_GAMMA, WhitneyError, dump_cover,
                      whitney_decompose)
from .besov import CoefficientArray

__all__ = ["create_app"]


class ExperimentRequest(BaseModel):
    config: dict[str, str] = Field(default_factory=dict)
    seed: int | None = None
    parallel: bool = False


class CheckModel(BaseModel):
    name: str
    passed: bool
    detail: str


class ExperimentResponse(BaseModel):
    name: str
    passed: bool
    summary: str
    checks: list[CheckModel]
    csv: str
    plot_data: str | None = None


class WhitneyRequest(BaseModel):
    domain_text: str
    j_max: int = 6
    gamma: float = SAFE_EXTENSION_GAMMA


class WhitneyResponse(BaseModel):
    cover_text: str
    n_cubes: int
    n_collar: int


class BesovNormRequest(BaseModel):
    grid_text: str
    s: float
    p: float
    q: float
    r: int
    j_max: int = 8
    domain_text: str | None = None


class NormResponse(BaseModel):
    value: float


class DecomposeRequest(BaseModel):
    grid_text: str
    s: float
    p: float
    q: float
    r: int = 1
    levels: int = 4
    kind: str = "Lip"
    K: int | None = None
    sigma: float | None = None
    p_atom: float | None = None


class DecompositionResponse(BaseModel):
    decomposition_text: str
    residual_sup: float
    n_coefficients: int


class ReconstructRequest(BaseModel):
    decomposition_text: str
    lo: list[float]
    hi: list[float]
    level: int
    upto_level: int | None = None


class GridResponse(BaseModel):
    grid_text: str


class ReexpandRequest(BaseModel):
    decomposition_text: str
    K: int = 1
    inner_levels: int = 8


class ReexpandResponse(BaseModel):
    decomposition_text: str
    inner_sup_residual: float
    max_contributors: int


class TraceRoundtripRequest(BaseModel):
    domain_text: str
    boundary_dec_text: str
    s: float
    p: float
    q: float
    grid_level: int = 6
    j_max_norm: int = 3
    cover_j_max: int = 9
    gamma: float = SAFE_EXTENSION_GAMMA


class TraceRoundtripResponse(BaseModel):
    csv_row: str
    report: dict


class ChiProfileRequest(BaseModel):
    domain_text: str
    p: float
    q_values: list[float]
    sigma_grid: list[float]
    j_sweep: list[int]
    r: int = 1
    grid_level: int | None = None


class TableResponse(BaseModel):
    csv: str


class HsetSumRequest(BaseModel):
    exponent: float | None = None
    table: list[float] | None = None
    sigma: float
    p: float
    q: float
    n: int = 2
    j_depth: int = 6
    k_max: int = 40


class HsetSumResponse(BaseModel):
    sup: float
    convergent: bool
    per_j_totals: list[float]


class SelfsimilarRequest(BaseModel):
    grid_text: str
    s: float
    p: float
    q: float
    r: int = 1
    max_dilation: int = 3
    translations: list[list[int]] = Field(default_factory=lambda: [[0, 0]])
    window_level: int = 6


class SelfsimilarResponse(BaseModel):
    value: float
    argmax_dilation: int | None
    argmax_translation: list[int] | None
    sup_norm: float
    embedding_constant: float


def _parse_q(v: float) -> float:
    return math.inf if v < 0 else v


def create_app() -> FastAPI:
    app = FastAPI(title="besovkit",
                  description="Besov norms, Whitney extension, atomic "
                              "decompositions, traces and multipliers at "
                              "desk scale")

    def _fail(exc: Exception) -> HTTPException:
        return HTTPException(status_code=400, detail=str(exc))

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/experiments")
    def experiments_index() -> dict:
        return {"experiments": experiment_names()}

    @app.post("/experiments/{name}", response_model=ExperimentResponse)
    def experiments_run(name: str, req: ExperimentRequest):
        try:
            res: ExperimentResult = run_experiment(
                name, req.config, seed=req.seed, parallel=req.parallel)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except (ValueError, WhitneyError, AtomError,
                DecompositionError, GridError) as exc:
            raise _fail(exc)
        return ExperimentResponse(
            name=res.name, passed=res.passed, summary=res.summary,
            checks=[CheckModel(name=n, passed=ok, detail=d)
                    for n, ok, d in res.checks],
            csv=result_csv(res), plot_data=res.plot_data)

    @app.post("/whitney/decompose", response_model=WhitneyResponse)
    def whitney(req: WhitneyRequest):
        try:
            domain = geo.load_domain(req.domain_text)
            cover = whitney_decompose(domain, req.j_max, gamma=req.gamma)
        except (geo.GeometryError, WhitneyError, ValueError) as exc:
            raise _fail(exc)
        return WhitneyResponse(cover_text=dump_cover(cover),
                               n_cubes=len(cover.cubes),
                               n_collar=len(cover.collar))

    @app.post("/norms/besov", response_model=NormResponse)
    def besov_norm(req: BesovNormRequest):
        try:
            f = load_grid(req.grid_text)
            params = BesovParams(req.s, req.p, _parse_q(req.q), req.r,
                                 j_max=req.j_max)
            domain = geo.load_domain(req.domain_text) \
                if req.domain_text else None
            value = besov_norm_differences(f, params, domain)
        except (geo.GeometryError, GridError, ValueError) as exc:
            raise _fail(exc)
        return NormResponse(value=value)

    @app.post("/atoms/decompose", response_model=DecompositionResponse)
    def atoms_decompose(req: DecomposeRequest):
        try:
            f = load_grid(req.grid_text)
            params = BesovParams(req.s, req.p, _parse_q(req.q), req.r)
            dec = decompose(f, params, req.levels, kind=req.kind, K=req.K,
                            sigma=req.sigma, p_atom=req.p_atom)
        except (GridError, AtomError, DecompositionError, ValueError) as exc:
            raise _fail(exc)
        return DecompositionResponse(
            decomposition_text=dump_decomposition(dec),
            residual_sup=dec.residual_sup,
            n_coefficients=len(dec.coefficients.entries))

    @app.post("/atoms/reconstruct", response_model=GridResponse)
    def atoms_reconstruct(req: ReconstructRequest):
        try:
            dec = load_decomposition(req.decomposition_text)
            f = reconstruct(dec, upto_level=req.upto_level, lo=req.lo,
                            hi=req.hi, level=req.level)
        except (GridError, AtomError, ValueError) as exc:
            raise _fail(exc)
        return GridResponse(grid_text=dump_grid(f))

    @app.post("/atoms/reexpand", response_model=ReexpandResponse)
    def atoms_reexpand(req: ReexpandRequest):
        try:
            dec = load_decomposition(req.decomposition_text)
            out, rep = reexpand(dec, K=req.K, inner_levels=req.inner_levels)
        except (AtomError, DecompositionError, ValueError) as exc:
            raise _fail(exc)
        return ReexpandResponse(
            decomposition_text=dump_decomposition(out),
            inner_sup_residual=rep["inner_sup_residual"],
            max_contributors=rep["max_contributors"])

    @app.post("/trace/roundtrip", response_model=TraceRoundtripResponse)
    def trace_roundtrip(req: TraceRoundtripRequest):
        try:
            domain = geo.load_domain(req.domain_text)
            arr = CoefficientArray.load(req.boundary_dec_text, domain,
                                        on_boundary=True)
            bd = domain.boundary
            m0 = 1 << max(1, math.ceil(math.log2(max(bd.total_length, 1.0))))
            atoms = {}
            for (j, m) in arr.entries:
                center = np.asarray(m, dtype=float) * 2.0 ** -j
                _, s_arc = bd.project(center[None, :])
                atoms[(j, m)] = ArcTentAtom(
                    domain, j, m, float(s_arc[0]),
                    bd.total_length / (m0 * 2 ** j), amplitude=0.5)
            bdec = BoundaryDecomposition(arr, atoms)
            cover = whitney_decompose(domain, req.cover_j_max,
                                      gamma=req.gamma)
            rep = roundtrip_reports(bdec, [(req.s, req.p, _parse_q(req.q))],
                                    cover, grid_level=req.grid_level,
                                    j_max_norm=req.j_max_norm)[0]
        except (geo.GeometryError, WhitneyError, ValueError) as exc:
            raise _fail(exc)
        cols = ["s", "p", "q", "node_error_direct", "node_error_grid",
                "interp_tol", "norm_extension", "seq_boundary", "seq_trace",
                "ratio_ext", "ratio_tr"]
        row = ",".join(f"{rep[c]:.12g}" for c in cols)
        return TraceRoundtripResponse(csv_row=",".join(cols) + "\n" + row,
                                      report=rep)

    @app.post("/multipliers/chi-profile", response_model=TableResponse)
    def multipliers_chi(req: ChiProfileRequest):
        try:
            domain = geo.load_domain(req.domain_text)
            prof = chi_profile(domain, req.p,
                               [_parse_q(q) for q in req.q_values],
                               req.sigma_grid, req.j_sweep, r=req.r,
                               grid_level=req.grid_level)
        except (geo.GeometryError, ValueError) as exc:
            raise _fail(exc)
        lines = ["sigma,q,J,value",
                 *(f"{r['sigma']:.12g},{r['q']:.12g},{r['J']},{r['value']:.12g}"
                   for r in prof["rows"])]
        lines.append(f"# slope={prof['slope']:.12g}")
        return TableResponse(csv="\n".join(lines) + "\n")

    @app.post("/multipliers/hset-sum", response_model=HsetSumResponse)
    def multipliers_hset(req: HsetSumRequest):
        try:
            gauge = geo.HGauge(exponent=req.exponent,
                               table=np.asarray(req.table)
                               if req.table else None)
            res = hset_condition_sum(gauge, req.sigma, req.p,
                                     _parse_q(req.q), req.n, req.j_depth,
                                     req.k_max)
        except (geo.GeometryError, ValueError) as exc:
            raise _fail(exc)
        return HsetSumResponse(sup=res["sup"], convergent=res["convergent"],
                               per_j_totals=[r["total"] for r in res["per_j"]])

    @app.post("/multipliers/selfsimilar", response_model=SelfsimilarResponse)
    def multipliers_selfsimilar(req: SelfsimilarRequest):
        from .besov import SelfsimilarConfig
        from .multipliers import selfsimilar_membership
        try:
            f = load_grid(req.grid_text)
            params = BesovParams(req.s, req.p, _parse_q(req.q), req.r)
            config = SelfsimilarConfig(
                max_dilation=req.max_dilation,
                translations=[tuple(t) for t in req.translations],
                window_level=req.window_level)
            config.check_partition(f.dimension)
            rep = selfsimilar_membership(f, params, config)
        except (GridError, ValueError) as exc:
            raise _fail(exc)
        arg = rep["argmax_translation"]
        return SelfsimilarResponse(
            value=rep["value"], argmax_dilation=rep["argmax_dilation"],
            argmax_translation=list(arg) if arg is not None else None,
            sup_norm=rep["sup_norm"],
            embedding_constant=rep["embedding_constant"])

    return app


app = create_app()
