"""FastAPI application exposing the model, simulation, MPC and validation workflows."""
from __future__ import annotations

import json
import logging
import os
from functools import lru_cache

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..assembly import assemble_system, fixed_point_residual, spectral_radius
from ..config import Config, default_config, parse_config
from ..errors import AssemblyError, ConfigError, MeasurementError, SimulationDiverged
from ..mpc import OcpConfig, closed_loop, generate_demand
from ..sim import Scenario, extract_heatmap, simulate
from ..validation import MeasurementSeries, synthetic_series, validate_bhe
from .schemas import (
    ConfigRequest,
    MeshInfoResponse,
    MpcRunRequest,
    MpcRunResponse,
    SimulateRequest,
    SimulateResponse,
    SystemInfoRequest,
    SystemInfoResponse,
    ValidateRequest,
    ValidateResponse,
)

logging.basicConfig(level=os.environ.get("BTES_LOG", "WARNING").upper())
log = logging.getLogger("btes.service")

app = FastAPI(title="btes", version=__version__)


@app.exception_handler(ConfigError)
async def _config_error(request: Request, exc: ConfigError):
    return JSONResponse(status_code=422, content={"detail": str(exc), "key": exc.key})


@app.exception_handler(MeasurementError)
async def _measurement_error(request: Request, exc: MeasurementError):
    return JSONResponse(status_code=422, content={"detail": str(exc), "line": exc.line})


@app.exception_handler(SimulationDiverged)
async def _diverged(request: Request, exc: SimulationDiverged):
    return JSONResponse(status_code=409, content={"detail": str(exc), "step": exc.step})


@app.exception_handler(AssemblyError)
async def _assembly(request: Request, exc: AssemblyError):
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.exception_handler(ValueError)
async def _value_error(request: Request, exc: ValueError):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


def _config(req: ConfigRequest) -> Config:
    return default_config() if req.config is None else parse_config(req.config)


@lru_cache(maxsize=8)
def _system_for(key: str):
    return assemble_system(parse_config(json.loads(key)))


def system(cfg: Config):
    """Assembled system, shared between requests with an identical config."""
    return _system_for(json.dumps(cfg.model_dump(by_alias=True), sort_keys=True))


def _floats(a) -> list[float]:
    return [float(v) for v in np.asarray(a).ravel()]


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.get("/config/default")
def config_default():
    return default_config().model_dump(by_alias=True)


@app.post("/mesh-info", response_model=MeshInfoResponse)
def mesh_info(req: ConfigRequest):
    sys = system(_config(req))
    mesh = sys.mesh
    return MeshInfoResponse(n_x=mesh.n_x, n_y=mesh.n_y, n_cells=mesh.n_cells,
                            counts=sys.classification.counts(),
                            x_widths=_floats(mesh.x_widths), y_widths=_floats(mesh.y_widths))


@app.post("/system-info", response_model=SystemInfoResponse)
def system_info(req: SystemInfoRequest):
    cfg = _config(req)
    sys = system(cfg)
    est = spectral_radius(sys, req.iterations, req.seed)
    lay = sys.layout
    return SystemInfoResponse(
        n=lay.n, n_apu=2, n_bhe=lay.ground_offset - 2, n_ground=lay.n_cells, nnz=int(sys.A.nnz),
        spectral_radius=est.rho, spectral_monotone=est.monotone,
        fixed_point_residual=fixed_point_residual(sys), fluid_courant=cfg.bhe_params().courant)


@app.post("/simulate", response_model=SimulateResponse)
def simulate_endpoint(req: SimulateRequest):
    cfg = _config(req)
    sys = system(cfg)
    x0 = None if req.x0 is None else np.asarray(req.x0, float)
    traj = simulate(sys, Scenario.constant(req.power, req.hours, sys.dt, x0), stride=req.stride)
    final = np.asarray(traj.final_state)
    grid = final[sys.layout.ground_slice].reshape(sys.mesh.n_y, sys.mesh.n_x)
    return SimulateResponse(
        nu=sys.layout.nu, T_amb=sys.T_amb, times=_floats(traj.times), u=_floats(traj.inputs),
        T_in=_floats(traj.T_in), T_out=_floats(traj.T_out), Q=traj.Q.tolist(),
        heatmap=grid.tolist(), final_state=_floats(final), labels=sys.layout.labels())


@app.post("/mpc-run", response_model=MpcRunResponse)
def mpc_run(req: MpcRunRequest):
    cfg = _config(req)
    sys = system(cfg)
    ocp = OcpConfig.from_config(cfg)
    demand = generate_demand(req.seed, req.hours, req.block_minutes, req.demand_lo, req.demand_hi,
                             sys.dt, lookahead=ocp.H)
    res = closed_loop(sys, ocp, demand, req.hours)
    return MpcRunResponse(
        times=_floats(res.times), y_ref=_floats(res.y_ref), u=_floats(res.u), T_in=_floats(res.T_in),
        T_out=_floats(res.T_out), kkt_residual=_floats(res.kkt_residual),
        solve_ms=_floats(res.solve_ms), iterations=[int(i) for i in res.iterations],
        status=list(res.status), summary=res.summary())


@app.post("/validate-bhe", response_model=ValidateResponse)
def validate(req: ValidateRequest):
    cfg = _config(req)
    if req.measurements is None:
        series = synthetic_series(cfg, req.synthetic_hours, req.synthetic_power)
        source = "self-comparison"
    else:
        m = req.measurements
        series = MeasurementSeries(np.asarray(m.time_s, float), np.asarray(m.T_in_K, float),
                                   np.asarray(m.T_out_K, float),
                                   None if m.power_W is None else np.asarray(m.power_W, float))
        source = "measurements"
    report, traj = validate_bhe(cfg, series, forcing=req.forcing, hours=req.hours)
    return ValidateResponse(source=source, forcing=req.forcing, report=report.as_dict(),
                            times=_floats(traj.times), T_in=_floats(traj.T_in),
                            T_out=_floats(traj.T_out))
