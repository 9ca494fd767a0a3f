"""Open-loop simulation of the assembled system."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import AffineSystem, spectral_radius
from .errors import ConfigError, SimulationDiverged

log = logging.getLogger(__name__)

DEFAULT_STRIDE = 20


@dataclass(frozen=True)
class Scenario:
    n_steps: int
    u_schedule: tuple[tuple[int, float], ...] = ((0, 0.0),)
    x0: np.ndarray | None = None

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        starts = [s for s, _ in self.u_schedule]
        if not starts or starts[0] != 0:
            raise ValueError("input schedule must start at step 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("schedule start steps must be strictly increasing")

    @classmethod
    def constant(cls, power: float, hours: float, dt: float, x0=None) -> "Scenario":
        return cls(int(round(hours * 3600.0 / dt)), ((0, float(power)),), x0)

    def inputs(self) -> np.ndarray:
        """Input applied at each step ``0..n_steps`` (the last entry is never applied)."""
        u = np.empty(self.n_steps + 1)
        bounds = [s for s, _ in self.u_schedule] + [self.n_steps + 1]
        for (start, value), end in zip(self.u_schedule, bounds[1:]):
            u[start:end] = value
        return u


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray  # s
    steps: np.ndarray
    states: np.ndarray  # records x n
    inputs: np.ndarray  # W
    T_in: np.ndarray
    T_out: np.ndarray
    Q: np.ndarray  # records x nu, W/m
    final_state: np.ndarray
    stride: int = 1
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)


def _warn_if_unstable(sys):
    est = sys._cache.get("rho")
    if est is None:
        est = spectral_radius(sys, iterations=500).rho
        sys._cache["rho"] = est
    if est > 1.0 + 1e-9:
        log.warning("spectral radius estimate %.6f > 1: explicit scheme may diverge", est)


def simulate(sys: AffineSystem, scenario: Scenario, stride: int = DEFAULT_STRIDE,
             inlet=None) -> Trajectory:
    """Iterate the system over the scenario, recording every ``stride``-th state.

    ``inlet`` optionally prescribes ``T_in`` at every step ``0..n_steps``,
    overriding the APU row (inlet-temperature forcing).
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    _warn_if_unstable(sys)
    n_steps = scenario.n_steps
    u = scenario.inputs()
    if inlet is not None:
        inlet = np.asarray(inlet, dtype=float)
        if inlet.shape != (n_steps + 1,):
            raise ValueError(f"inlet forcing needs {n_steps + 1} values, got {inlet.shape}")
    x = sys.ambient_state() if scenario.x0 is None else np.array(scenario.x0, dtype=float)
    if x.shape != (sys.n,):
        raise ValueError(f"initial state has shape {x.shape}, expected ({sys.n},)")
    if inlet is not None:
        x[0] = inlet[0]

    rec_steps = np.arange(0, n_steps + 1, stride)
    states = np.empty((len(rec_steps), sys.n))
    A, B, f = sys.A, sys.B, sys.f
    r = 0
    for k in range(n_steps + 1):
        if r < len(rec_steps) and k == rec_steps[r]:
            states[r] = x
            r += 1
        if k == n_steps:
            break
        x = A @ x + B * u[k] + f
        if inlet is not None:
            x[0] = inlet[k + 1]
        if not np.all(np.isfinite(x)):
            raise SimulationDiverged(k + 1)
    Q = (sys.flux @ states.T).T
    return Trajectory(
        times=rec_steps * sys.dt,
        steps=rec_steps,
        states=states,
        inputs=u[rec_steps],
        T_in=states[:, 0].copy(),
        T_out=states[:, 1].copy(),
        Q=Q,
        final_state=x,
        stride=stride,
    )


def extract_heatmap(sys: AffineSystem, traj: Trajectory, index: int = -1) -> np.ndarray:
    """Ground temperatures of one record as an ``(n_y, n_x)`` grid, row 0 = south."""
    n = len(traj)
    if not -n <= index < n:
        raise IndexError(f"record {index} out of range for {n} records")
    return ground_grid(sys, traj.states[index])


def ground_grid(sys: AffineSystem, x) -> np.ndarray:
    g = np.asarray(x)[sys.layout.ground_slice]
    return g.reshape(sys.mesh.n_y, sys.mesh.n_x).copy()


def mirrored_sets(sys: AffineSystem, margin: float = 2.0):
    """Ground cells northeast and southwest of the BHE field, mirrored through its centre.

    Returns two equally long arrays of cell ids (NE set, SW mirror images).
    Cells within ``margin`` metres of the field's bounding box are used.
    """
    mesh = sys.mesh
    xs = [mesh.x_centers[mesh.ij(c)[0]] for c in sys.classification.bhe_cells]
    ys = [mesh.y_centers[mesh.ij(c)[1]] for c in sys.classification.bhe_cells]
    cx, cy = 0.5 * (min(xs) + max(xs)), 0.5 * (min(ys) + max(ys))
    ne, sw = [], []
    for iy in range(1, mesh.n_y - 1):
        for ix in range(1, mesh.n_x - 1):
            x, y = mesh.x_centers[ix], mesh.y_centers[iy]
            if not (x > cx and y > cy):
                continue
            if x > max(xs) + margin or y > max(ys) + margin:
                continue
            try:
                mirror = mesh.locate(2 * cx - x, 2 * cy - y)
            except ConfigError:
                continue
            if math.isclose(mesh.x_centers[mesh.ij(mirror)[0]], 2 * cx - x, abs_tol=1e-9) and \
                    math.isclose(mesh.y_centers[mesh.ij(mirror)[1]], 2 * cy - y, abs_tol=1e-9):
                ne.append(mesh.id(ix, iy))
                sw.append(mirror)
    return np.array(ne), np.array(sw)
