"""Global affine system ``x(k+1) = A x(k) + B u(k) + f``.

State order: ``[T_in, T_out]``, then the ``4*sigma`` states of each exchanger,
then the ground cells.  Coupling terms between sub-models are placed off the
block diagonal of ``A``; only state-independent constants stay in ``f``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .apu import ApuParams, assemble_apu
from .bhe import INLET, BheBlock, BheParams, assemble_bhe, wall_average_form
from .errors import AssemblyError, NumericError
from .ground import GroundBlock, GroundParams, assemble_ground
from .mesh import Classification, Mesh, MeshSpec, build_mesh, classify_cells

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StateLayout:
    nu: int
    sigma: int
    n_cells: int

    @property
    def n(self) -> int:
        return 2 + 4 * self.sigma * self.nu + self.n_cells

    @property
    def bhe_offset(self) -> int:
        return 2

    @property
    def ground_offset(self) -> int:
        return 2 + 4 * self.sigma * self.nu

    def bhe_slice(self, j: int) -> slice:
        start = self.bhe_offset + 4 * self.sigma * j
        return slice(start, start + 4 * self.sigma)

    @property
    def ground_slice(self) -> slice:
        return slice(self.ground_offset, self.n)

    def index(self, key, bhe: int | None = None) -> int:
        """Global index of a block key.

        Keys: ``"T_in"``, ``"T_out"``, ``("B", j, local)``, ``("G", cell)``; a bare
        int is a local exchanger index and needs ``bhe``.
        """
        if key == INLET:
            return 0
        if key == "T_out":
            return 1
        if isinstance(key, (int, np.integer)):
            if bhe is None:
                raise KeyError(f"local index {key} without an exchanger")
            return self._bhe(bhe, key)
        tag = key[0]
        if tag == "B":
            return self._bhe(key[1], key[2])
        if tag == "G":
            if not 0 <= key[1] < self.n_cells:
                raise KeyError(key)
            return self.ground_offset + key[1]
        raise KeyError(key)

    def _bhe(self, j, local):
        if not (0 <= j < self.nu and 0 <= local < 4 * self.sigma):
            raise KeyError(("B", j, local))
        return self.bhe_offset + 4 * self.sigma * j + local

    def labels(self) -> list[str]:
        names = ["T_in", "T_out"]
        for j in range(self.nu):
            for kind in ("f0", "f1", "b0", "b1"):
                names += [f"B{j + 1}.{kind}.{s}" for s in range(1, self.sigma + 1)]
        names += [f"G{c}" for c in range(self.n_cells)]
        return names


@dataclass(eq=False)
class AffineSystem:
    A: sp.csr_matrix
    B: np.ndarray
    f: np.ndarray
    layout: StateLayout
    dt: float
    flux: sp.csr_matrix  # nu x n, heat rate per unit length of each BHE [W/m]
    mesh: Mesh
    classification: Classification
    T_amb: float
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.layout.n

    def ambient_state(self) -> np.ndarray:
        return np.full(self.n, self.T_amb)

    def heat_rates(self, x) -> np.ndarray:
        return self.flux @ np.asarray(x)


def _emit(triplets, row_index, row, layout, bhe=None):
    for key, v in row.items():
        triplets.append((row_index, layout.index(key, bhe), v))


def assemble(mesh_spec: MeshSpec, ground: GroundParams, bhe: BheParams, apu: ApuParams) -> AffineSystem:
    if not (ground.dt == bhe.dt):
        raise AssemblyError(f"step size mismatch: ground dt={ground.dt}, bhe dt={bhe.dt}")
    if apu.nu != len(mesh_spec.bhe_positions):
        raise AssemblyError(f"apu expects {apu.nu} BHE, mesh places {len(mesh_spec.bhe_positions)}")
    if apu.q_vol != bhe.q_vol or apu.c_w != bhe.c_w:
        raise AssemblyError("apu and bhe disagree on flow rate or fluid heat capacity")

    mesh = build_mesh(mesh_spec)
    classification = classify_cells(mesh, mesh_spec.bhe_positions)
    ground_block = assemble_ground(mesh, ground, classification)
    bhe_blocks = [assemble_bhe(bhe, wall_average_form(classification, j)) for j in range(apu.nu)]
    apu_block = assemble_apu(apu, bhe.sigma)
    layout = StateLayout(apu.nu, bhe.sigma, mesh.n_cells)
    return _combine(layout, mesh, classification, ground, ground_block, bhe_blocks, apu_block)


def _combine(layout, mesh, classification, ground, ground_block: GroundBlock,
             bhe_blocks: list[BheBlock], apu_block):
    n = layout.n
    trip = []
    for i, row in enumerate(apu_block.rows):
        _emit(trip, i, row, layout)
    for j, block in enumerate(bhe_blocks):
        if len(block.rows) != 4 * layout.sigma:
            raise AssemblyError(f"BHE block {j} has {len(block.rows)} rows")
        off = layout.bhe_slice(j).start
        for i, row in enumerate(block.rows):
            _emit(trip, off + i, row, layout, bhe=j)
    g0 = layout.ground_offset
    if len(ground_block.rows) != layout.n_cells:
        raise AssemblyError("ground block size does not match the layout")
    for c, row in enumerate(ground_block.rows):
        for cell, v in row.items():
            trip.append((g0 + c, g0 + cell, v))
    for slot in ground_block.source_slots:
        _emit(trip, g0 + slot.cell, {k: slot.weight * v for k, v in bhe_blocks[slot.bhe].flux_form.items()},
              layout, bhe=slot.bhe)

    r, c, v = (np.array(a) for a in zip(*trip))
    A = sp.coo_matrix((v.astype(float), (r.astype(np.int64), c.astype(np.int64))), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    A.eliminate_zeros()
    B = np.zeros(n)
    B[0] = apu_block.b_coeff
    f = np.zeros(n)
    f[layout.ground_slice] = ground_block.f_const

    ftrip = []
    for j, block in enumerate(bhe_blocks):
        _emit(ftrip, j, block.flux_form, layout, bhe=j)
    fr, fc, fv = (np.array(a) for a in zip(*ftrip))
    flux = sp.coo_matrix((fv, (fr, fc)), shape=(layout.nu, n)).tocsr()
    flux.sum_duplicates()
    flux.sort_indices()

    if not (np.all(np.isfinite(A.data)) and np.all(np.isfinite(f))):
        raise AssemblyError("non-finite coefficient in the assembled system")
    for arr in (B, f):
        arr.setflags(write=False)
    return AffineSystem(A, B, f, layout, ground.dt, flux, mesh, classification, ground.T_amb)


def assemble_system(config) -> AffineSystem:
    """Assemble from a :class:`btes.config.Config`."""
    return assemble(config.mesh_spec(), config.ground_params(), config.bhe_params(),
                    config.apu_params())


def step(sys: AffineSystem, x, u: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n,):
        raise ValueError(f"state has shape {x.shape}, expected ({sys.n},)")
    return sys.A @ x + sys.B * u + sys.f


@dataclass(frozen=True)
class SpectralEstimate:
    rho: float
    iterations: int
    history: np.ndarray
    monotone: bool  # estimate sequence monotone over the second half of the run

    def __float__(self):
        return self.rho


def spectral_radius(sys_or_matrix, iterations: int = 2000, seed: int = 0) -> SpectralEstimate:
    """Power-iteration estimate of the spectral radius of ``A``."""
    if iterations < 100:
        raise ValueError("at least 100 iterations are required")
    A = sys_or_matrix.A if isinstance(sys_or_matrix, AffineSystem) else sys_or_matrix
    if not sp.issparse(A):
        A = np.asarray(A, dtype=float)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    hist = np.empty(iterations)
    for k in range(iterations):
        y = A @ x
        norm = np.linalg.norm(y)
        if not np.isfinite(norm):
            raise NumericError(f"non-finite power iterate at iteration {k}")
        hist[k] = norm
        if norm == 0.0:
            hist[k:] = 0.0
            break
        x = y / norm
    # geometric mean over the final stretch damps two-cycle oscillations
    tail = hist[-20:]
    rho = float(np.exp(np.mean(np.log(tail)))) if np.all(tail > 0) else 0.0
    half = hist[iterations // 2:]
    d = np.diff(half)
    monotone = bool(np.all(d >= -1e-12) or np.all(d <= 1e-12))
    return SpectralEstimate(rho, iterations, hist, monotone)


def fixed_point_residual(sys: AffineSystem) -> float:
    x = sys.ambient_state()
    return float(np.max(np.abs(step(sys, x, 0.0) - x)))
