"""JSON configuration: strict pydantic schema plus conversion to model parameters."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .apu import ApuParams
from .bhe import BheParams
from .errors import ConfigError
from .ground import GroundParams
from .mesh import MeshSpec, build_mesh, classify_cells

_STRICT = ConfigDict(extra="forbid", populate_by_name=True)


class GroundSection(BaseModel):
    model_config = _STRICT

    c_g: float = Field(gt=0)
    c_w: float = Field(gt=0)
    lam: float = Field(gt=0, alias="lambda")
    phi: float = Field(ge=0, le=1)
    v_x: float = 0.0
    v_y: float = 0.0
    T_amb: float = Field(gt=0)
    bhe_source: Literal["cell", "neighbors"] = "cell"


class MeshSection(BaseModel):
    model_config = _STRICT

    domain_size_x: float = Field(gt=0)
    domain_size_y: float = Field(gt=0)
    fine_edge: float = Field(gt=0)
    coarse_edge: float = Field(gt=0)
    fine_region: tuple[float, float, float, float] | None = None
    bhe_positions: list[tuple[float, float]] = Field(min_length=1)

    @model_validator(mode="after")
    def _edges(self):
        if self.fine_edge > self.coarse_edge:
            raise ValueError("fine_edge must not exceed coarse_edge")
        return self


class BheSection(BaseModel):
    model_config = _STRICT

    sigma: int = Field(ge=1)
    l: float = Field(gt=0)
    C_w: float = Field(gt=0)
    C_b: float = Field(gt=0)
    R_fb: float = Field(gt=0)
    R_bb: float = Field(gt=0)
    R_gb: float = Field(gt=0)
    substeps: int = Field(default=1, ge=1)


class ApuSection(BaseModel):
    model_config = _STRICT

    u_min: float = -1000.0
    u_max: float = 1000.0

    @model_validator(mode="after")
    def _order(self):
        if not self.u_min < self.u_max:
            raise ValueError("u_min must be below u_max")
        return self


class OcpSection(BaseModel):
    model_config = _STRICT

    H: int = Field(ge=1)
    R: float = Field(ge=0)
    Q: float = Field(ge=0)
    x_lo: float
    x_hi: float
    constrained_states: Union[Literal["all", "none", "bhe"], list[int]] = "all"
    tolerance: float = Field(default=1e-6, gt=0)
    max_iter: int = Field(default=20000, ge=1)

    @model_validator(mode="after")
    def _check(self):
        if not self.R + self.Q > 0:
            raise ValueError("R + Q must be positive")
        if not self.x_lo < self.x_hi:
            raise ValueError("x_lo must be below x_hi")
        return self


class Config(BaseModel):
    model_config = _STRICT

    dt: float = Field(gt=0)
    fluid_density: float = Field(gt=0)
    mass_flow: float = Field(gt=0)
    ground: GroundSection
    mesh: MeshSection
    bhe: BheSection
    apu: ApuSection = ApuSection()
    ocp: OcpSection

    @property
    def q_vol(self) -> float:
        return self.mass_flow / self.fluid_density

    @property
    def nu(self) -> int:
        return len(self.mesh.bhe_positions)

    def ground_params(self) -> GroundParams:
        g = self.ground
        return GroundParams(g.c_g, g.c_w, g.lam, g.phi, g.v_x, g.v_y, g.T_amb, self.dt,
                            g.bhe_source)

    def mesh_spec(self) -> MeshSpec:
        m = self.mesh
        return MeshSpec(m.domain_size_x, m.domain_size_y, m.fine_edge, m.coarse_edge,
                        m.fine_region, tuple(tuple(p) for p in m.bhe_positions))

    def bhe_params(self) -> BheParams:
        b = self.bhe
        return BheParams(b.sigma, b.l, self.q_vol, b.C_w, b.C_b, b.R_fb, b.R_bb, b.R_gb,
                         self.ground.c_w, self.dt, b.substeps)

    def apu_params(self) -> ApuParams:
        return ApuParams(self.nu, self.q_vol, self.ground.c_w, self.apu.u_min, self.apu.u_max)

    def with_overrides(self, **sections) -> "Config":
        """Copy with nested sections updated, e.g. ``with_overrides(ground={"v_x": 0})``."""
        data = self.model_dump(by_alias=True)
        for name, values in sections.items():
            if isinstance(values, dict):
                data[name].update(values)
            else:
                data[name] = values
        return parse_config(data)


def _key_path(err) -> str:
    return ".".join(str(p) for p in err["loc"]) or "<root>"


def parse_config(data: dict) -> Config:
    try:
        cfg = Config.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(first["msg"], _key_path(first)) from exc
    # domain-level invariants (mesh alignment, BHE placement) surface as ConfigError too
    spec = cfg.mesh_spec()
    classify_cells(build_mesh(spec), spec.bhe_positions)
    cfg.ground_params()
    cfg.bhe_params()
    cfg.apu_params()
    return cfg


def load_config(path=None) -> Config:
    """Read and validate a JSON config; ``None`` loads the bundled paper setup."""
    if path is None:
        text = resources.files("btes.data").joinpath("paper.json").read_text()
    else:
        text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    return parse_config(data)


def default_config() -> Config:
    return load_config(None)
