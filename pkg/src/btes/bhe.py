"""Vertically segmented delta-circuit TRC model of a single U-tube heat exchanger.

Local state order for one exchanger with ``sigma`` segments (segment 1 on top)::

    [T_f0,1..sigma, T_f1,1..sigma, T_b0,1..sigma, T_b1,1..sigma]

Pipe 0 descends, pipe 1 ascends.  Row dicts use local integer indices for the
exchanger's own states, the string ``"T_in"`` for the plant inlet and
``("G", cell)`` for ground cells; the assembly resolves them to global indices.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssemblyError, ConfigError
from .mesh import CellKind, Classification

INLET = "T_in"


@dataclass(frozen=True)
class BheParams:
    sigma: int
    l: float  # segment length [m]
    q_vol: float  # volumetric flow per exchanger [m3/s]
    C_w: float  # fluid capacity per length [J/(m K)]
    C_b: float  # backfill capacity per length [J/(m K)]
    R_fb: float  # [(m K)/W]
    R_bb: float
    R_gb: float
    c_w: float  # volumetric fluid capacity [J/(m3 K)]
    dt: float
    substeps: int = 1

    def __post_init__(self):
        if int(self.sigma) != self.sigma or self.sigma < 1:
            raise ConfigError("must be an integer >= 1", "bhe.sigma")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ConfigError("must be an integer >= 1", "bhe.substeps")
        for name in ("l", "q_vol", "C_w", "C_b", "R_fb", "R_bb", "R_gb", "c_w", "dt"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be > 0", f"bhe.{name}")

    @property
    def n_states(self) -> int:
        return 4 * self.sigma

    @property
    def courant(self) -> float:
        """Segments crossed by the fluid per (sub)step."""
        return self.q_vol * self.c_w * self.dt / (self.substeps * self.l * self.C_w)


def fluid_index(params: BheParams, pipe: int, s: int) -> int:
    _check_segment(params, s)
    return pipe * params.sigma + (s - 1)


def backfill_index(params: BheParams, pipe: int, s: int) -> int:
    _check_segment(params, s)
    return (2 + pipe) * params.sigma + (s - 1)


def _check_segment(params, s):
    if not 1 <= s <= params.sigma:
        raise ValueError(f"segment {s} outside 1..{params.sigma}")


def _upstream(params, pipe, s):
    if pipe == 0:
        return INLET if s == 1 else fluid_index(params, 0, s - 1)
    return fluid_index(params, 0, s) if s == params.sigma else fluid_index(params, 1, s + 1)


def fluid_rows(params: BheParams, pipe: int, s: int, dt: float | None = None) -> dict:
    """Explicit Euler row for the fluid temperature of ``pipe`` in segment ``s``."""
    dt = params.dt if dt is None else dt
    cond = dt / (params.C_w * params.R_fb)
    adv = dt * params.q_vol * params.c_w / (params.l * params.C_w)
    me = fluid_index(params, pipe, s)
    row = {me: 1.0 - cond - adv, backfill_index(params, pipe, s): cond}
    up = _upstream(params, pipe, s)
    row[up] = row.get(up, 0.0) + adv
    return row


def backfill_rows(params: BheParams, pipe: int, s: int, wall_form: dict, dt: float | None = None) -> dict:
    """Explicit Euler row for the backfill next to ``pipe`` in segment ``s``.

    ``wall_form`` maps ground keys to averaging weights for the borehole wall.
    """
    dt = params.dt if dt is None else dt
    k = dt / params.C_b
    me = backfill_index(params, pipe, s)
    row = {
        fluid_index(params, pipe, s): k / params.R_fb,
        backfill_index(params, 1 - pipe, s): k / params.R_bb,
    }
    g = k / params.R_gb
    for key, w in wall_form.items():
        row[key] = row.get(key, 0.0) + g * w
    row[me] = 1.0 - k * (1.0 / params.R_fb + 1.0 / params.R_bb + 1.0 / params.R_gb)
    return row


def wall_average_form(classification: Classification, j: int) -> dict:
    """Borehole wall temperature as the mean of the four cells around BHE ``j``."""
    if not 0 <= j < len(classification.bhe_cells):
        raise AssemblyError(f"no BHE with index {j}")
    if classification[classification.bhe_cells[j]].kind is not CellKind.BHE:
        raise AssemblyError(f"cell of BHE {j} is not classified as a BHE cell")
    nbs = classification.bhe_neighbors(j)
    return {("G", nbs[f]): 0.25 for f in ("E", "W", "S", "N")}


def heat_flux_form(params: BheParams, wall_form: dict) -> dict:
    """Heat rate per unit length from the exchanger into the ground [W/m]."""
    form = {}
    c = 1.0 / (params.sigma * params.R_gb)
    for pipe in (0, 1):
        for s in range(1, params.sigma + 1):
            form[backfill_index(params, pipe, s)] = c
    for key, w in wall_form.items():
        form[key] = form.get(key, 0.0) - 2.0 * w / params.R_gb
    return form


@dataclass(frozen=True, eq=False)
class BheBlock:
    params: BheParams
    rows: tuple[dict, ...]  # 4*sigma rows over local / inlet / ground keys
    wall_form: dict
    flux_form: dict

    @property
    def inlet_slot(self) -> float:
        return self.rows[fluid_index(self.params, 0, 1)].get(INLET, 0.0)


def _raw_rows(params, wall_form, dt):
    rows = []
    for pipe in (0, 1):
        for s in range(1, params.sigma + 1):
            rows.append(fluid_rows(params, pipe, s, dt))
    for pipe in (0, 1):
        for s in range(1, params.sigma + 1):
            rows.append(backfill_rows(params, pipe, s, wall_form, dt))
    return rows


def assemble_bhe(params: BheParams, wall_form: dict) -> BheBlock:
    """Rows mapping the time-k inlet, wall and local states to time k+1.

    With ``substeps > 1`` the local dynamics are advanced in that many explicit
    sub-steps of ``dt / substeps`` while inlet and ground stay at their time-k
    values; the composite is again affine in the same inputs.
    """
    m = params.substeps
    raw = _raw_rows(params, wall_form, params.dt / m)
    if m == 1:
        return BheBlock(params, tuple(raw), dict(wall_form), heat_flux_form(params, wall_form))

    n = params.n_states
    externals = [INLET] + list(wall_form)
    col = {k: n + i for i, k in enumerate(externals)}
    col.update({i: i for i in range(n)})
    M = np.eye(n + len(externals))
    M[:n] = 0.0
    for i, row in enumerate(raw):
        for key, v in row.items():
            M[i, col[key]] += v
    P = np.linalg.matrix_power(M, m)
    keys = list(range(n)) + externals
    rows = tuple({keys[c]: float(P[i, c]) for c in range(P.shape[1]) if P[i, c] != 0.0}
                 for i in range(n))
    return BheBlock(params, rows, dict(wall_form), heat_flux_form(params, wall_form))
