"""FastAPI application exposing the sampling toolkit.

Every library error maps to a 422 with a stable ``code`` field; input
shape problems caught by the models surface as FastAPI's usual 422
validation body.  All endpoints are stateless and deterministic given
the request, seeds included, so responses are safe to cache or replay.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import HvError
from ..populations import PopulationConfig
from . import service
from .schemas import (
    CurveRequest,
    CurveResponse,
    DesignInput,
    DesignSummary,
    EnumeratedSample,
    EnumerateReport,
    EnumerateRequest,
    EnumerateResponse,
    EstimateRequest,
    EstimateResponse,
    FirstOrderResponse,
    GenerateRequest,
    GenerateResponse,
    HealthResponse,
    InclusionRequest,
    InclusionResponse,
    InclusionRow,
    JointRequest,
    JointResponse,
    PopulationRow,
    ProfileResponse,
    SampleRequest,
    SampleResponse,
    SampleUnitRow,
    SimulateCell,
    SimulateRequest,
    SimulateResponse,
)

app = FastAPI(title="hvsampling", version=__version__)


@app.exception_handler(HvError)
async def _hv_error(request: Request, exc: HvError) -> JSONResponse:
    return JSONResponse(status_code=422, content={"code": exc.code, "detail": str(exc)})


def _design(inp: DesignInput):
    return service.design_from_input(pi=inp.pi, x=inp.x, n=inp.n)


def _profile_response(p) -> ProfileResponse:
    return ProfileResponse(
        size=p.size,
        n=p.n,
        d1=p.d1,
        d2=p.d2,
        d3=p.d3,
        min_scaled_pi=p.min_scaled_pi,
        max_scaled_pi=p.max_scaled_pi,
        sampling_fraction=p.sampling_fraction,
        max_top_gap=p.max_top_gap,
    )


@app.get("/health", response_model=HealthResponse)
async def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/design/validate", response_model=DesignSummary)
async def validate(req: DesignInput) -> DesignSummary:
    design = _design(req)
    return DesignSummary(
        size=design.size,
        n=design.n,
        pi_min=float(design.pi[0]),
        pi_max=float(design.pi[-1]),
        sum_pi=float(design.pi.sum()),
    )


@app.post("/design/profile", response_model=ProfileResponse)
async def profile(req: DesignInput) -> ProfileResponse:
    return _profile_response(service.profile_op(_design(req)))


@app.post("/diagnostics/curve", response_model=CurveResponse)
async def curve(req: CurveRequest) -> CurveResponse:
    rows = service.curve_op(req.recipe, req.fraction, req.grid, req.seed)
    return CurveResponse(rows=[_profile_response(p) for p in rows])


@app.post("/sample", response_model=SampleResponse)
async def sample(req: SampleRequest) -> SampleResponse:
    design = _design(req.design)
    ids = req.design.ids()
    sel = service.sample_op(design, req.seed, req.stream_id, req.variant)
    N = design.size
    pi = np.empty(N)
    pi[design.perm] = design.pi
    pi0 = np.empty(N)
    pi0[design.perm] = sel.split.pi0
    ind = np.zeros(N, dtype=int)
    ind[design.perm] = sel.indicators
    return SampleResponse(
        n_prime=sel.split.n_prime,
        working_window=sel.split.n_big,
        units=[ids[k] for k in sorted(int(j) for j in sel.units_original)],
        rows=[
            SampleUnitRow(
                unit_id=ids[k], pi=float(pi[k]), pi0=float(pi0[k]), in_sample=int(ind[k])
            )
            for k in range(N)
        ],
    )


@app.post("/probs/first-order", response_model=FirstOrderResponse)
async def first_order(req: DesignInput) -> FirstOrderResponse:
    design = _design(req)
    pi = service.first_order_op(design)
    return FirstOrderResponse(unit_ids=req.ids(), pi=[float(v) for v in pi])


@app.post("/probs/joint", response_model=JointResponse)
async def joint(req: JointRequest) -> JointResponse:
    design = _design(req.design)
    jm = service.joint_op(design, req.kind, req.n_prime)
    ids = req.design.ids()
    # present in caller order
    inv = np.empty(design.size, dtype=int)
    inv[design.perm] = np.arange(design.size)
    vals = jm.values[np.ix_(inv, inv)]
    return JointResponse(
        kind=jm.kind,
        n_prime=jm.n_prime,
        unit_ids=ids,
        values=[[float(v) for v in row] for row in vals],
    )


@app.post("/enumerate", response_model=EnumerateResponse)
async def enumerate_(req: EnumerateRequest) -> EnumerateResponse:
    design = _design(req.design)
    ids = req.design.ids()
    seq, _, report = service.enumerate_op(design, req.max_units)
    samples = []
    for key, prob in seq.entries.items():
        caller = sorted(int(design.perm[k]) for k in key)
        samples.append(
            EnumeratedSample(units=[ids[k] for k in caller], probability=prob)
        )
    samples.sort(key=lambda s: (-s.probability, s.units))
    return EnumerateResponse(samples=samples, report=EnumerateReport(**report))


@app.post("/estimate", response_model=EstimateResponse)
async def estimate(req: EstimateRequest) -> EstimateResponse:
    result, selection = service.estimate_op(
        req.pi, req.pi0, req.in_sample, req.y, req.estimator, req.with_variance
    )
    return EstimateResponse(
        estimator=result.estimator_kind,
        total=result.total,
        mean=result.mean,
        variance_estimate=result.variance_estimate,
        n_prime=selection.split.n_prime,
    )


@app.post("/generate", response_model=GenerateResponse)
async def generate(req: GenerateRequest) -> GenerateResponse:
    config = PopulationConfig(
        size_distribution=req.recipe,
        size=req.size,
        seed=req.seed,
        target_y_mean=req.target_y_mean,
        target_y_sd=req.target_y_sd,
        signal_sd=req.signal_sd,
    )
    pop = service.generate_op(config)
    cols = [pop.y[name] for name in ("linear", "quadratic", "exponential", "bump")]
    rows = [
        PopulationRow(
            unit_id=str(k + 1),
            x=float(pop.x[k]),
            y1=float(cols[0][k]),
            y2=float(cols[1][k]),
            y3=float(cols[2][k]),
            y4=float(cols[3][k]),
        )
        for k in range(pop.size)
    ]
    return GenerateResponse(
        size=pop.size, mu_x=pop.mu_x, coefficients=pop.coefficients, rows=rows
    )


@app.post("/simulate", response_model=SimulateResponse)
async def simulate(req: SimulateRequest) -> SimulateResponse:
    scenario = service.scenario_from_recipe(
        req.grid,
        req.replicates,
        req.seed,
        req.recipe,
        req.fraction,
        req.population_seed,
        req.variant,
        req.estimators,
        req.variables,
    )
    report = service.simulate_op(scenario)
    return SimulateResponse(
        cells=[
            SimulateCell(
                n=c.n,
                population_size=report.population_sizes[c.n],
                variable=c.variable,
                estimator=c.estimator,
                mean_estimate=c.mean_estimate,
                true_total=c.true_total,
                v_mc=c.v_mc,
                rv_mc=c.rv_mc,
            )
            for c in report.cells
        ]
    )


@app.post("/probs/inclusion-check", response_model=InclusionResponse)
async def inclusion(req: InclusionRequest) -> InclusionResponse:
    design = _design(req.design)
    ids = req.design.ids()
    rows = service.inclusion_op(
        design, req.replicates, req.seed, req.variant, req.method
    )
    return InclusionResponse(
        rows=[
            InclusionRow(
                unit_id=ids[unit - 1], pi=pi, freq=freq, z_score=z, flagged=flag
            )
            for unit, pi, freq, z, flag in rows
        ]
    )
