"""Request and response models of the HTTP API."""
from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class ConfigRequest(BaseModel):
    # raw JSON config; validated server-side so errors carry the key path
    config: Optional[dict] = None


class MeshInfoResponse(BaseModel):
    n_x: int
    n_y: int
    n_cells: int
    counts: dict[str, int]
    x_widths: list[float]
    y_widths: list[float]


class SystemInfoRequest(ConfigRequest):
    iterations: int = Field(default=2000, ge=100)
    seed: int = 0


class SystemInfoResponse(BaseModel):
    n: int
    n_apu: int
    n_bhe: int
    n_ground: int
    nnz: int
    spectral_radius: float
    spectral_monotone: bool
    fixed_point_residual: float
    fluid_courant: float


class SimulateRequest(ConfigRequest):
    hours: float = Field(gt=0)
    power: float = 0.0
    stride: int = Field(default=20, ge=1)
    x0: Optional[list[float]] = None


class SimulateResponse(BaseModel):
    nu: int
    T_amb: float
    times: list[float]
    u: list[float]
    T_in: list[float]
    T_out: list[float]
    Q: list[list[float]]
    heatmap: list[list[float]]
    final_state: list[float]
    labels: list[str]


class MpcRunRequest(ConfigRequest):
    hours: float = Field(gt=0)
    seed: int = 42
    block_minutes: float = 5.0
    demand_lo: float = -1000.0
    demand_hi: float = -500.0


class MpcRunResponse(BaseModel):
    times: list[float]
    y_ref: list[float]
    u: list[float]
    T_in: list[float]
    T_out: list[float]
    kkt_residual: list[float]
    solve_ms: list[float]
    iterations: list[int]
    status: list[str]
    summary: dict[str, float]


class Measurement(BaseModel):
    time_s: list[float]
    T_in_K: list[float]
    T_out_K: list[float]
    power_W: Optional[list[float]] = None


class ValidateRequest(ConfigRequest):
    # omitted measurements -> self-comparison against a synthetic model run
    measurements: Optional[Measurement] = None
    forcing: Literal["inlet", "power"] = "inlet"
    hours: Optional[float] = Field(default=None, gt=0)
    synthetic_hours: float = Field(default=52.0, gt=0)
    synthetic_power: float = 1000.0


class ValidateResponse(BaseModel):
    source: Literal["measurements", "self-comparison"]
    forcing: str
    report: dict[str, float]
    times: list[float]
    T_in: list[float]
    T_out: list[float]
