"""Tracking MPC on the condensed (input-only) quadratic program.

The predicted state after ``kappa`` steps is::

    x(kappa) = free(kappa) + sum_{i < kappa} G[kappa - 1 - i] u_i

with impulse responses ``G[i] = A^i B`` (cached per system and horizon) and
the free response ``free(kappa+1) = A free(kappa) + f``, ``free(0) = x_now``.
Cost per step is ``R (u - y_ref)^2 + Q (u - u_prev)^2``; delivered power equals
the input.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import qp as qpsolver
from .assembly import AffineSystem, step
from .errors import ConfigError
from .mesh import CellKind

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OcpConfig:
    H: int
    R: float
    Q: float
    x_lo: float
    x_hi: float
    u_lo: float
    u_hi: float
    constrained_states: object = "all"
    tolerance: float = 1e-6
    max_iter: int = 20000

    def __post_init__(self):
        if self.H < 1:
            raise ConfigError("horizon must be >= 1", "ocp.H")
        if self.R < 0 or self.Q < 0 or not self.R + self.Q > 0:
            raise ConfigError("weights must be >= 0 with R + Q > 0", "ocp.R")
        if not self.x_lo < self.x_hi:
            raise ConfigError("x_lo must be below x_hi", "ocp.x_lo")
        if not self.u_lo < self.u_hi:
            raise ConfigError("u_lo must be below u_hi", "apu.u_min")

    @classmethod
    def from_config(cls, config) -> "OcpConfig":
        o = config.ocp
        return cls(o.H, o.R, o.Q, o.x_lo, o.x_hi, config.apu.u_min, config.apu.u_max,
                   o.constrained_states, o.tolerance, o.max_iter)


@dataclass(frozen=True, eq=False)
class CondensedQp:
    """``cost(u) = u' hessian u + gradient' u + constant`` over the H inputs."""

    hessian: np.ndarray
    gradient: np.ndarray
    constant: float
    rows: np.ndarray  # m x H
    row_lo: np.ndarray
    row_hi: np.ndarray
    u_lo: np.ndarray
    u_hi: np.ndarray
    row_ids: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    @property
    def H(self) -> int:
        return len(self.gradient)

    def cost(self, u) -> float:
        u = np.asarray(u, float)
        return float(u @ self.hessian @ u + self.gradient @ u + self.constant)

    def standard_form(self):
        """``(P, q, C, lo, hi)`` with box rows first."""
        H = self.H
        C = np.vstack([np.eye(H), self.rows]) if len(self.rows) else np.eye(H)
        lo = np.concatenate([self.u_lo, self.row_lo])
        hi = np.concatenate([self.u_hi, self.row_hi])
        return 2.0 * self.hessian, self.gradient, C, lo, hi


@dataclass(frozen=True)
class QpSolution:
    u_seq: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    status: str
    duals: np.ndarray | None = None


class PredictionModel:
    """Impulse responses ``A^i B`` for ``i < H`` and their running absolute sums."""

    def __init__(self, sys: AffineSystem, H: int):
        self.sys = sys
        self.H = H
        G = np.empty((H, sys.n))
        g = np.asarray(sys.B, float).copy()
        for i in range(H):
            G[i] = g
            g = sys.A @ g
        self.gamma = G
        # bounds on the forced response over a box: cumulative positive / negative parts
        self.cum_pos = np.cumsum(np.maximum(G, 0.0), axis=0)
        self.cum_neg = np.cumsum(np.minimum(G, 0.0), axis=0)

    @classmethod
    def cached(cls, sys: AffineSystem, H: int) -> "PredictionModel":
        key = ("prediction", H)
        if key not in sys._cache:
            sys._cache[key] = cls(sys, H)
        return sys._cache[key]

    def free_response(self, x_now) -> np.ndarray:
        """States ``kappa = 1..H`` with all inputs zero, shape ``(H, n)``."""
        out = np.empty((self.H, self.sys.n))
        x = np.asarray(x_now, float)
        for k in range(self.H):
            x = self.sys.A @ x + self.sys.f
            out[k] = x
        return out

    def forced_matrix(self, state: int) -> np.ndarray:
        """``H x H`` map from inputs to ``x(kappa)[state]``, ``kappa = 1..H``."""
        g = self.gamma[:, state]
        M = np.zeros((self.H, self.H))
        for kap in range(1, self.H + 1):
            M[kap - 1, :kap] = g[kap - 1::-1]
        return M

    def predict(self, x_now, u_seq) -> np.ndarray:
        """Predicted states ``kappa = 1..H`` for an input sequence."""
        u = np.asarray(u_seq, float)
        if u.shape != (self.H,):
            raise ValueError(f"expected {self.H} inputs")
        X = self.free_response(x_now)
        for kap in range(1, self.H + 1):
            X[kap - 1] += u[:kap][::-1] @ self.gamma[:kap]
        return X


def constrained_indices(sys: AffineSystem, which) -> np.ndarray:
    if isinstance(which, str):
        if which == "all":
            return np.arange(sys.n)
        if which == "none":
            return np.zeros(0, dtype=np.int64)
        if which == "bhe":
            kinds = sys.classification.kinds()
            near = np.flatnonzero((kinds == CellKind.BHE) | (kinds == CellKind.BHE_NEIGHBOR))
            return np.concatenate([np.arange(sys.layout.ground_offset),
                                   sys.layout.ground_offset + near])
        raise ConfigError(f"unknown state selection {which!r}", "ocp.constrained_states")
    idx = np.asarray(which, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= sys.n):
        raise ConfigError("state index out of range", "ocp.constrained_states")
    return idx


def condense(sys: AffineSystem, ocp: OcpConfig, x_now, u_prev: float, y_ref,
             model: PredictionModel | None = None, prune: bool = True) -> CondensedQp:
    """Build the condensed QP for the current state and reference window.

    State-bound rows that cannot become active anywhere inside the input box
    are dropped when ``prune`` is set; this never changes the solution.
    """
    H = ocp.H
    x_now = np.asarray(x_now, float)
    y = np.asarray(y_ref, float)
    if y.shape != (H,):
        raise ValueError(f"reference window must have {H} entries, got {y.shape}")
    if not (np.all(np.isfinite(x_now)) and np.all(np.isfinite(y)) and math.isfinite(u_prev)):
        raise ValueError("non-finite state, input or reference")
    if x_now.shape != (sys.n,):
        raise ValueError(f"state has shape {x_now.shape}, expected ({sys.n},)")

    R, Q = ocp.R, ocp.Q
    W = np.zeros((H, H))
    idx = np.arange(H)
    W[idx, idx] = R + 2.0 * Q
    W[H - 1, H - 1] = R + Q
    W[idx[1:], idx[:-1]] = -Q
    W[idx[:-1], idx[1:]] = -Q
    g = -2.0 * R * y
    g[0] -= 2.0 * Q * u_prev
    const = float(R * y @ y + Q * u_prev ** 2)

    states = constrained_indices(sys, ocp.constrained_states)
    rows = np.zeros((0, H))
    row_lo = row_hi = np.zeros(0)
    row_ids = np.zeros((0, 2), dtype=np.int64)
    if states.size:
        model = model or PredictionModel.cached(sys, H)
        free = model.free_response(x_now)[:, states]  # (H, s)
        if prune:
            hi_reach = free + model.cum_pos[:, states] * ocp.u_hi + model.cum_neg[:, states] * ocp.u_lo
            lo_reach = free + model.cum_pos[:, states] * ocp.u_lo + model.cum_neg[:, states] * ocp.u_hi
            margin = 1e-9 * max(1.0, abs(ocp.x_hi), abs(ocp.x_lo))
            keep = (hi_reach > ocp.x_hi - margin) | (lo_reach < ocp.x_lo + margin)
        else:
            keep = np.ones(free.shape, dtype=bool)
        kap_idx, s_idx = np.nonzero(keep)
        if kap_idx.size:
            gam = model.gamma[:, states[s_idx]]  # (H, r)
            rows = np.zeros((kap_idx.size, H))
            for r, (kap0, col) in enumerate(zip(kap_idx, range(kap_idx.size))):
                # x(kap0+1) depends on u_0..u_kap0 through gamma[kap0 - i]
                rows[r, :kap0 + 1] = gam[kap0::-1, col]
            base = free[kap_idx, s_idx]
            row_lo = ocp.x_lo - base
            row_hi = ocp.x_hi - base
            row_ids = np.column_stack([kap_idx + 1, states[s_idx]])
    return CondensedQp(W, g, const, rows, row_lo, row_hi,
                       np.full(H, ocp.u_lo, dtype=float), np.full(H, ocp.u_hi, dtype=float), row_ids)


def solve_qp(qp: CondensedQp, tolerance: float = 1e-6, max_iter: int = 20000,
             warm_start=None) -> QpSolution:
    P, q, C, lo, hi = qp.standard_form()
    x0 = None if warm_start is None else np.clip(np.asarray(warm_start, float), qp.u_lo, qp.u_hi)
    res = qpsolver.solve(P, q, C, lo, hi, tol=tolerance, max_iter=max_iter, x0=x0)
    return QpSolution(res.x, res.objective + qp.constant, res.kkt_residual, res.iterations,
                      res.status, res.y)


def qp_kkt(qp: CondensedQp, sol: QpSolution) -> qpsolver.Kkt:
    P, q, C, lo, hi = qp.standard_form()
    return qpsolver.kkt_residuals(P, q, C, lo, hi, sol.u_seq, sol.duals)


@dataclass(frozen=True, eq=False)
class DemandProfile:
    block_length: int  # steps
    levels: np.ndarray  # W per block
    length: int  # steps
    seed: int
    lo: float
    hi: float

    def series(self) -> np.ndarray:
        return np.repeat(self.levels, self.block_length)[:self.length]


def generate_demand(seed: int, hours: float, block_minutes: float = 5.0, lo: float = -1000.0,
                    hi: float = -500.0, dt: float = 15.0, lookahead: int = 0) -> DemandProfile:
    """Piecewise-constant demand, one seeded uniform draw per block."""
    if not lo <= hi <= 0:
        raise ConfigError("demand interval must satisfy lo <= hi <= 0", "demand")
    block = block_minutes * 60.0 / dt
    if abs(block - round(block)) > 1e-9 or round(block) < 1:
        raise ConfigError(f"{block_minutes} min is not a whole number of {dt} s steps",
                          "demand.block_minutes")
    block = int(round(block))
    length = int(round(hours * 3600.0 / dt)) + lookahead
    n_blocks = -(-length // block)
    rng = np.random.default_rng(seed)
    levels = rng.uniform(lo, hi, n_blocks) if hi > lo else np.full(n_blocks, float(lo))
    return DemandProfile(block, levels, length, seed, lo, hi)


@dataclass(eq=False)
class ClosedLoopResult:
    times: np.ndarray
    y_ref: np.ndarray
    u: np.ndarray
    T_in: np.ndarray
    T_out: np.ndarray
    kkt_residual: np.ndarray
    solve_ms: np.ndarray
    iterations: np.ndarray
    status: list
    active_rows: np.ndarray
    final_state: np.ndarray

    def summary(self) -> dict:
        ok = sum(s == qpsolver.OPTIMAL for s in self.status)
        return {
            "steps": len(self.u),
            "optimal_steps": ok,
            "mean_solve_ms": float(np.mean(self.solve_ms)) if len(self.u) else 0.0,
            "max_solve_ms": float(np.max(self.solve_ms)) if len(self.u) else 0.0,
            "mean_tracking_error_W": float(np.mean(np.abs(self.u - self.y_ref))) if len(self.u) else 0.0,
            "max_kkt_residual": float(np.max(self.kkt_residual)) if len(self.u) else 0.0,
        }


def closed_loop(sys: AffineSystem, ocp: OcpConfig, demand: DemandProfile, hours: float,
                x0=None, u_prev: float = 0.0, warm_start: bool = True) -> ClosedLoopResult:
    """Receding-horizon loop applying the first optimal input each step."""
    n_steps = int(round(hours * 3600.0 / sys.dt))
    ref = demand.series()
    if len(ref) < n_steps + ocp.H - 1:
        raise ValueError(f"demand covers {len(ref)} steps, need {n_steps + ocp.H - 1}")
    model = PredictionModel.cached(sys, ocp.H)
    x = sys.ambient_state() if x0 is None else np.array(x0, dtype=float)

    u_hist = np.empty(n_steps)
    T_in = np.empty(n_steps)
    T_out = np.empty(n_steps)
    kkt = np.empty(n_steps)
    ms = np.empty(n_steps)
    iters = np.empty(n_steps, dtype=np.int64)
    nrows = np.empty(n_steps, dtype=np.int64)
    status = []
    prev_seq = None
    for k in range(n_steps):
        window = ref[k:k + ocp.H]
        t0 = time.perf_counter()
        qp = condense(sys, ocp, x, u_prev, window, model=model)
        guess = None
        if warm_start and prev_seq is not None:
            guess = np.concatenate([prev_seq[1:], prev_seq[-1:]])
        sol = solve_qp(qp, ocp.tolerance, ocp.max_iter, warm_start=guess)
        ms[k] = 1e3 * (time.perf_counter() - t0)
        if sol.status == qpsolver.INFEASIBLE:
            log.warning("step %d: OCP infeasible, holding previous input", k)
            u = u_prev
        else:
            if sol.status != qpsolver.OPTIMAL:
                log.warning("step %d: solver stopped with %s", k, sol.status)
            u = float(sol.u_seq[0])
            prev_seq = sol.u_seq
        u_hist[k] = u
        T_in[k], T_out[k] = x[0], x[1]
        kkt[k] = sol.kkt_residual
        iters[k] = sol.iterations
        nrows[k] = len(qp.rows)
        status.append(sol.status)
        x = step(sys, x, u)
        u_prev = u
    return ClosedLoopResult(np.arange(n_steps) * sys.dt, ref[:n_steps].copy(), u_hist, T_in, T_out,
                            kkt, ms, iters, status, nrows, x)
