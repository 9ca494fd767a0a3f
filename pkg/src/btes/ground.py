"""Finite-volume ground block: explicit Euler, central conduction, upwind advection.

Rows are dicts ``{ground_cell: coefficient}`` so the assembly can offset them
into the global state vector.  Boundary cells hold the ambient temperature
(zero row, constant offset).

Heat exchange with a BHE enters as source slots resolved against the
exchanger's flux form.  Two placements are supported:

``"cell"``
    the BHE cell is an ordinary ground cell receiving the whole flux.
``"neighbors"``
    the BHE cell is a diagnostic average of its four neighbours; each
    neighbour receives a quarter of the flux and exchanges neither conductive
    nor advective flux through the face shared with the BHE cell.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssemblyError, ConfigError
from .mesh import CellKind, Classification, Mesh, neighbors, opposite


@dataclass(frozen=True)
class GroundParams:
    c_g: float  # J/(m3 K)
    c_w: float  # J/(m3 K)
    lam: float  # W/(m K)
    phi: float
    v_x: float  # m/s
    v_y: float
    T_amb: float  # K
    dt: float  # s
    bhe_source: str = "cell"

    def __post_init__(self):
        for name in ("c_g", "c_w", "lam", "T_amb", "dt"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be > 0", f"ground.{name}")
        if not 0 <= self.phi <= 1:
            raise ConfigError("must lie in [0, 1]", "ground.phi")
        if not (np.isfinite(self.v_x) and np.isfinite(self.v_y)):
            raise ConfigError("must be finite", "ground.v")
        if self.bhe_source not in ("cell", "neighbors"):
            raise ConfigError("must be 'cell' or 'neighbors'", "ground.bhe_source")


@dataclass(frozen=True)
class SourceSlot:
    cell: int
    bhe: int
    weight: float  # K per (W/m) of the BHE's heat rate


@dataclass(frozen=True, eq=False)
class GroundBlock:
    rows: tuple[dict, ...]
    f_const: np.ndarray
    source_slots: tuple[SourceSlot, ...]


def stencil_row(mesh: Mesh, params: GroundParams, cell: int, blocked=()):
    """Explicit update row for a non-boundary cell.

    ``blocked`` lists faces (``"W"``, ``"E"``, ``"S"``, ``"N"``) carrying neither
    conductive nor advective flux.  Returns ``(row, constant)``.
    """
    ix, iy = mesh.ij(cell)
    nb = neighbors(mesh, cell)
    if any(v is None for v in nb.values()):
        raise AssemblyError(f"cell {cell} lies on the domain boundary")
    dx = mesh.x_widths[ix]
    dy = mesh.y_widths[iy]
    if dx <= 0 or dy <= 0:
        raise AssemblyError(f"cell {cell} has zero width")
    xc, yc = mesh.x_centers, mesh.y_centers
    dist = {
        "W": xc[ix] - xc[ix - 1], "E": xc[ix + 1] - xc[ix],
        "S": yc[iy] - yc[iy - 1], "N": yc[iy + 1] - yc[iy],
    }
    width = {"W": dx, "E": dx, "S": dy, "N": dy}
    k = params.dt / params.c_g

    row = {}
    for face in ("W", "E", "S", "N"):
        if face in blocked:
            continue
        row[nb[face]] = row.get(nb[face], 0.0) + k * params.lam / (width[face] * dist[face])

    adv = k * params.c_w * params.phi
    for v, donor_pos, donor_neg, w in ((params.v_x, "W", "E", dx), (params.v_y, "S", "N", dy)):
        if v == 0:
            continue
        donor = donor_pos if v > 0 else donor_neg
        if donor in blocked:
            continue
        row[nb[donor]] = row.get(nb[donor], 0.0) + adv * abs(v) / w
    row[cell] = 1.0 - sum(row.values())
    return row, 0.0


def assemble_ground(mesh: Mesh, params: GroundParams, classification: Classification) -> GroundBlock:
    if len(classification) != mesh.n_cells:
        raise AssemblyError("classification does not match the mesh")
    rows = []
    f = np.zeros(mesh.n_cells)
    slots = []
    for cell in range(mesh.n_cells):
        cls = classification[cell]
        if cls.kind is CellKind.BOUNDARY:
            rows.append({})
            f[cell] = params.T_amb
        elif params.bhe_source == "cell":
            row, _ = stencil_row(mesh, params, cell)
            rows.append(row)
            if cls.kind is CellKind.BHE:
                slots.append(SourceSlot(cell, cls.bhe, params.dt / (params.c_g * mesh.area(cell))))
        elif cls.kind is CellKind.BHE:
            rows.append({nb: 0.25 for nb in neighbors(mesh, cell).values()})
        elif cls.kind is CellKind.BHE_NEIGHBOR:
            # neighbour sits on side `face` of the BHE; the BHE is on its opposite side
            row, _ = stencil_row(mesh, params, cell, blocked=(opposite(cls.face),))
            rows.append(row)
            weight = params.dt / (params.c_g * mesh.area(cell)) / 4.0
            slots.append(SourceSlot(cell, cls.bhe, weight))
        else:
            row, _ = stencil_row(mesh, params, cell)
            rows.append(row)
    f.setflags(write=False)
    return GroundBlock(tuple(rows), f, tuple(slots))
