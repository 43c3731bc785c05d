"""HTTP service wrapping the core package.

Stateless: every request carries its configuration.  Core exceptions map
to structured error bodies so clients can distinguish bad input (400,
error_type "validation") from numerical failure (500, error_type
"numerical").
"""

from __future__ import annotations

import dataclasses

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import HetBeliefsError, NumericalError
from ..model import parse_config
from ..filtering import prepare_beliefs
from ..economy import assemble_economy
from ..pricing import solve_riccati, stock_price
from ..simulate import SimConfig
from .. import tables, verify
from .schemas import (CheckModel, ConfigRequest, CovPathRequest, HealthResponse,
                      PriceRequest, PriceResponse, RatePathRequest, RiccatiRequest,
                      SimulateRequest, TableResponse, VerifyAllRequest,
                      VerifyAllResponse, VerifyVTRequest)


def _sim_config(doc: dict, seed=None, n_paths=None, dt=None) -> SimConfig:
    cfg = SimConfig.from_doc(doc.get("simulation"))
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if n_paths is not None:
        changes["n_paths"] = n_paths
    if dt is not None:
        changes["dt"] = dt
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _pricing_section(doc: dict) -> dict:
    section = doc.get("pricing") or {}
    if not isinstance(section, dict):
        section = {}
    return section


def create_app() -> FastAPI:
    app = FastAPI(title="hetbeliefs", version=__version__)

    @app.exception_handler(NumericalError)
    async def numerical_error(request, exc):
        return JSONResponse(status_code=500,
                            content={"error_type": "numerical", "message": str(exc)})

    @app.exception_handler(HetBeliefsError)
    async def validation_error(request, exc):
        return JSONResponse(status_code=400,
                            content={"error_type": "validation", "message": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/stationary-cov", response_model=TableResponse)
    def stationary_cov(req: ConfigRequest):
        params, beliefs = parse_config(req.config)
        prepare_beliefs(beliefs)
        columns, rows = tables.stationary_cov_table(beliefs)
        return TableResponse(columns=columns, rows=rows)

    @app.post("/cov-path", response_model=TableResponse)
    def cov_path(req: CovPathRequest):
        params, beliefs = parse_config(req.config)
        if not 1 <= req.agent <= params.J:
            return JSONResponse(status_code=400, content={
                "error_type": "validation",
                "message": f"agent index {req.agent} out of range 1..{params.J}"})
        dt = req.dt if req.dt is not None else 1e-3
        columns, rows = tables.cov_path_table(beliefs[req.agent - 1], req.t_end, dt)
        return TableResponse(columns=columns, rows=rows)

    @app.post("/simulate", response_model=TableResponse)
    def simulate(req: SimulateRequest):
        params, beliefs = parse_config(req.config)
        prepare_beliefs(beliefs)
        cfg = _sim_config(req.config, req.seed, req.n_paths, req.dt)
        build = tables.simulate_summary_table if req.summary else tables.simulate_table
        columns, rows = build(cfg, params, beliefs)
        return TableResponse(columns=columns, rows=rows)

    @app.post("/rate-path", response_model=TableResponse)
    def rate_path(req: RatePathRequest):
        params, beliefs = parse_config(req.config)
        prepare_beliefs(beliefs)
        coeffs = assemble_economy(params, beliefs)
        cfg = _sim_config(req.config, req.seed, req.n_paths, req.dt)
        columns, rows = tables.rate_path_table(cfg, params, beliefs, coeffs)
        return TableResponse(columns=columns, rows=rows)

    @app.post("/riccati", response_model=TableResponse)
    def riccati(req: RiccatiRequest):
        params, beliefs = parse_config(req.config)
        prepare_beliefs(beliefs)
        coeffs = assemble_economy(params, beliefs)
        section = _pricing_section(req.config)
        tau_max = req.tau_max if req.tau_max is not None else section.get("tau_max")
        if tau_max is None:
            tau_max = section.get("t_max") or 10.0 / params.rho
        dtau = req.dtau if req.dtau is not None else section.get("dtau", 1e-3)
        sol = solve_riccati(coeffs, params, tau_max=float(tau_max), dtau=float(dtau))
        columns, rows = tables.riccati_table(sol)
        return TableResponse(columns=columns, rows=rows)

    @app.post("/price", response_model=PriceResponse)
    def price(req: PriceRequest):
        params, beliefs = parse_config(req.config)
        prepare_beliefs(beliefs)
        coeffs = assemble_economy(params, beliefs)
        section = _pricing_section(req.config)
        t_max = req.t_max if req.t_max is not None else section.get("t_max")
        if t_max is None:
            t_max = 10.0 / params.rho
        tau_max = req.tau_max if req.tau_max is not None else section.get("tau_max")
        if tau_max is None:
            tau_max = t_max
        tau_max = max(float(tau_max), float(t_max))
        dtau = req.dtau if req.dtau is not None else section.get("dtau", 1e-3)
        zbar = req.zbar if req.zbar is not None else section.get("zbar")
        Z = np.zeros(coeffs.dim) if zbar is None else np.asarray(zbar, dtype=float)
        if Z.shape != (coeffs.dim,):
            return JSONResponse(status_code=400, content={
                "error_type": "validation",
                "message": f"zbar must have length {coeffs.dim}, got {len(Z)}"})
        sol = solve_riccati(coeffs, params, tau_max=tau_max, dtau=float(dtau))
        quad_points = req.quad_points if req.quad_points is not None \
            else section.get("quad_points")
        quote = stock_price(sol, Z, params, T_max=float(t_max), quad_points=quad_points)
        return PriceResponse(S=quote.S, S_truncated=quote.S_truncated,
                             tail_estimate=quote.tail_estimate,
                             error_estimate=quote.error_estimate,
                             T_max=quote.T_max, tau_grid_size=len(quote.taus))

    @app.post("/verify-vt", response_model=TableResponse)
    def verify_vt(req: VerifyVTRequest):
        columns, rows = verify.run_verify_vt(
            req.config, seed=req.seed, n_paths=req.n_paths, dt=req.dt,
            taus=tuple(req.taus) if req.taus else (0.25, 0.5, 1.0),
            thetas=tuple(req.thetas) if req.thetas else (0.0, 0.3),
            Zbar=req.zbar)
        return TableResponse(columns=columns, rows=rows)

    @app.post("/verify-all", response_model=VerifyAllResponse)
    def verify_all(req: VerifyAllRequest):
        report = verify.run_verify_all(seed=req.seed, quick=req.quick)
        return VerifyAllResponse(
            seed=report.seed, quick=report.quick, passed=report.passed,
            checks=[CheckModel(cid=c.cid, name=c.name, passed=c.passed,
                               detail=c.detail,
                               measured={k: float(v) for k, v in c.measured.items()})
                    for c in report.checks])

    return app


app = create_app()
