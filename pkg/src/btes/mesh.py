"""Non-uniform structured 2D mesh with row-major cell numbering.

Cells are numbered from the southwest corner, ``id = iy * n_x + ix``.  Each
axis is graded in two sizes: fine cells inside a rectangular region around the
heat exchangers, coarse cells outside, and at most one transition cell per
fine/coarse junction absorbing the leftover span.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AssemblyError, ConfigError

_TOL = 1e-9

FACES = ("W", "E", "S", "N")
_OPPOSITE = {"W": "E", "E": "W", "S": "N", "N": "S"}


@dataclass(frozen=True)
class MeshSpec:
    domain_size_x: float
    domain_size_y: float
    fine_edge: float
    coarse_edge: float
    fine_region: tuple[float, float, float, float] | None = None  # (x0, y0, x1, y1)
    bhe_positions: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        for name in ("domain_size_x", "domain_size_y", "fine_edge", "coarse_edge"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be > 0", f"mesh.{name}")
        if self.fine_edge > self.coarse_edge:
            raise ConfigError("fine_edge must not exceed coarse_edge", "mesh.fine_edge")
        if self.fine_region is not None:
            x0, y0, x1, y1 = self.fine_region
            if not (-_TOL <= x0 <= x1 <= self.domain_size_x + _TOL
                    and -_TOL <= y0 <= y1 <= self.domain_size_y + _TOL):
                raise ConfigError("fine region must lie inside the domain", "mesh.fine_region")
            for x, y in self.bhe_positions:
                if not (x0 - _TOL <= x <= x1 + _TOL and y0 - _TOL <= y <= y1 + _TOL):
                    raise ConfigError(f"BHE at ({x}, {y}) outside fine region",
                                      "mesh.bhe_positions")
        for x, y in self.bhe_positions:
            if not (0 < x < self.domain_size_x and 0 < y < self.domain_size_y):
                raise ConfigError(f"BHE at ({x}, {y}) outside domain", "mesh.bhe_positions")


@dataclass(frozen=True, eq=False)
class Mesh:
    x_widths: np.ndarray
    y_widths: np.ndarray
    x_centers: np.ndarray = field(init=False)
    y_centers: np.ndarray = field(init=False)

    def __post_init__(self):
        for arr in (self.x_widths, self.y_widths):
            arr.setflags(write=False)
        xc = np.cumsum(self.x_widths) - 0.5 * self.x_widths
        yc = np.cumsum(self.y_widths) - 0.5 * self.y_widths
        xc.setflags(write=False)
        yc.setflags(write=False)
        object.__setattr__(self, "x_centers", xc)
        object.__setattr__(self, "y_centers", yc)

    @property
    def n_x(self) -> int:
        return len(self.x_widths)

    @property
    def n_y(self) -> int:
        return len(self.y_widths)

    @property
    def n_cells(self) -> int:
        return self.n_x * self.n_y

    def id(self, ix: int, iy: int) -> int:
        return iy * self.n_x + ix

    def ij(self, cell: int) -> tuple[int, int]:
        self._check(cell)
        return cell % self.n_x, cell // self.n_x

    def area(self, cell: int) -> float:
        ix, iy = self.ij(cell)
        return float(self.x_widths[ix] * self.y_widths[iy])

    def is_boundary(self, cell: int) -> bool:
        ix, iy = self.ij(cell)
        return ix in (0, self.n_x - 1) or iy in (0, self.n_y - 1)

    def locate(self, x: float, y: float) -> int:
        """Cell strictly containing the point; points on a face are rejected."""
        ix = _locate_axis(self.x_widths, x, "x")
        iy = _locate_axis(self.y_widths, y, "y")
        return self.id(ix, iy)

    def _check(self, cell):
        if not (isinstance(cell, (int, np.integer)) and 0 <= cell < self.n_cells):
            raise ValueError(f"invalid cell id {cell!r} for a {self.n_x}x{self.n_y} mesh")


def _locate_axis(widths, p, axis):
    faces = np.concatenate(([0.0], np.cumsum(widths)))
    i = int(np.searchsorted(faces, p, side="right")) - 1
    if i < 0 or i >= len(widths):
        raise ConfigError(f"point {p} outside the domain", f"mesh.bhe_positions.{axis}")
    if min(p - faces[i], faces[i + 1] - p) < _TOL:
        raise ConfigError(f"point {p} lies on a cell face", f"mesh.bhe_positions.{axis}")
    return i


def _count(span, edge):
    n = span / edge
    return int(math.floor(n + _TOL))


def _axis_widths(length, lo, hi, fine, coarse, axis):
    if hi - lo <= _TOL:
        n = length / coarse
        if abs(n - round(n)) > _TOL * max(1.0, n):
            raise ConfigError(f"domain length {length} is not a multiple of coarse_edge",
                              f"mesh.{axis}")
        return [coarse] * int(round(n))

    m = (hi - lo) / fine
    if abs(m - round(m)) > 1e-6:
        raise ConfigError(f"fine region [{lo}, {hi}] is not a whole multiple of fine_edge",
                          f"mesh.fine_region.{axis}")
    inner = [fine] * int(round(m))

    def side(span):
        if span <= _TOL:
            return []
        n_c = _count(span, coarse)
        rest = span - n_c * coarse
        if rest <= _TOL:
            return [coarse] * n_c
        if rest < fine - _TOL:
            raise ConfigError(
                f"leftover span {rest:.6g} m at the fine/coarse junction is narrower than "
                f"fine_edge", f"mesh.fine_region.{axis}")
        return [coarse] * n_c + [rest]

    left = side(lo)
    right = side(length - hi)[::-1]
    return left + inner + right


def build_mesh(spec: MeshSpec) -> Mesh:
    if spec.fine_region is None:
        rx = ry = (0.0, 0.0)
    else:
        x0, y0, x1, y1 = spec.fine_region
        rx, ry = (x0, x1), (y0, y1)
    wx = np.array(_axis_widths(spec.domain_size_x, *rx, spec.fine_edge, spec.coarse_edge, "x"))
    wy = np.array(_axis_widths(spec.domain_size_y, *ry, spec.fine_edge, spec.coarse_edge, "y"))
    for w, length, axis in ((wx, spec.domain_size_x, "x"), (wy, spec.domain_size_y, "y")):
        if abs(w.sum() - length) > _TOL * max(1.0, length):
            raise ConfigError("cell widths do not sum to the domain size", f"mesh.{axis}")
    return Mesh(wx, wy)


def neighbors(mesh: Mesh, cell: int) -> dict[str, int | None]:
    """WESN neighbour ids; sides on the domain boundary map to ``None``."""
    ix, iy = mesh.ij(cell)
    return {
        "W": cell - 1 if ix > 0 else None,
        "E": cell + 1 if ix < mesh.n_x - 1 else None,
        "S": cell - mesh.n_x if iy > 0 else None,
        "N": cell + mesh.n_x if iy < mesh.n_y - 1 else None,
    }


class CellKind(enum.IntEnum):
    INTERIOR = 0
    BOUNDARY = 1
    BHE = 2
    BHE_NEIGHBOR = 3


@dataclass(frozen=True)
class CellClass:
    kind: CellKind
    bhe: int | None = None
    face: str | None = None  # side of the BHE cell this neighbour sits on


@dataclass(frozen=True, eq=False)
class Classification:
    classes: tuple[CellClass, ...]
    bhe_cells: tuple[int, ...]

    def __getitem__(self, cell):
        return self.classes[cell]

    def __len__(self):
        return len(self.classes)

    def bhe_neighbors(self, j: int) -> dict[str, int]:
        """Neighbour cell of BHE ``j`` on each side (keyed by the side of the BHE)."""
        out = {c.face: i for i, c in enumerate(self.classes)
               if c.kind is CellKind.BHE_NEIGHBOR and c.bhe == j}
        if len(out) != 4:
            raise AssemblyError(f"BHE {j} has {len(out)} neighbour cells, expected 4")
        return out

    def counts(self) -> dict[str, int]:
        out = {k.name.lower(): 0 for k in CellKind}
        for c in self.classes:
            out[c.kind.name.lower()] += 1
        return out

    def kinds(self) -> np.ndarray:
        return np.array([c.kind for c in self.classes], dtype=np.int8)


def classify_cells(mesh: Mesh, bhe_positions) -> Classification:
    classes = [CellClass(CellKind.BOUNDARY) if mesh.is_boundary(c) else CellClass(CellKind.INTERIOR)
               for c in range(mesh.n_cells)]
    bhe_cells = []
    for j, (x, y) in enumerate(bhe_positions):
        cell = mesh.locate(x, y)
        if classes[cell].kind is CellKind.BOUNDARY:
            raise ConfigError(f"BHE {j} lies in the boundary ring", "mesh.bhe_positions")
        if classes[cell].kind is not CellKind.INTERIOR:
            raise ConfigError(f"BHE {j} collides with another BHE or its neighbour cells",
                              "mesh.bhe_positions")
        classes[cell] = CellClass(CellKind.BHE, j)
        bhe_cells.append(cell)
    for j, cell in enumerate(bhe_cells):
        for face, nb in neighbors(mesh, cell).items():
            cls = classes[nb]
            if cls.kind is CellKind.BOUNDARY:
                raise ConfigError(f"BHE {j} touches the boundary ring", "mesh.bhe_positions")
            if cls.kind is not CellKind.INTERIOR:
                raise ConfigError(f"BHE {j} shares neighbour cell {nb} with another BHE",
                                  "mesh.bhe_positions")
            classes[nb] = CellClass(CellKind.BHE_NEIGHBOR, j, face)
    return Classification(tuple(classes), tuple(bhe_cells))


def opposite(face: str) -> str:
    return _OPPOSITE[face]
