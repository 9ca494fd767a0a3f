"""Small dense convex QP solver (ADMM with active-set polishing).

Problem form::

    minimize    1/2 x' P x + q' x
    subject to  lo <= C x <= hi

``P`` must be symmetric positive semidefinite.  Duals follow the usual sign
convention: ``y_i > 0`` at an active upper bound, ``y_i < 0`` at an active lower
bound, and stationarity reads ``P x + q + C' y = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

OPTIMAL = "optimal"
MAX_ITER = "max-iterations"
INFEASIBLE = "infeasible-detected"

_INF = 1e20


@dataclass(frozen=True)
class QpResult:
    x: np.ndarray
    y: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    status: str
    polished: bool = False


@dataclass(frozen=True)
class Kkt:
    stationarity: float
    primal: float
    complementarity: float

    @property
    def max(self) -> float:
        return max(self.stationarity, self.primal, self.complementarity)


def kkt_residuals(P, q, C, lo, hi, x, y) -> Kkt:
    """Infinity-norm KKT residuals, computed from the problem data alone."""
    P = np.asarray(P, float)
    C = np.asarray(C, float)
    Cx = C @ x
    stat = np.abs(P @ x + q + C.T @ y).max(initial=0.0)
    prim = np.maximum(np.maximum(lo - Cx, Cx - hi), 0.0).max(initial=0.0)
    y_up = np.maximum(y, 0.0)
    y_lo = np.maximum(-y, 0.0)
    slack_up = np.where(np.isfinite(hi), np.abs(hi - Cx), np.inf)
    slack_lo = np.where(np.isfinite(lo), np.abs(Cx - lo), np.inf)
    comp = np.maximum(np.minimum(y_up, slack_up), np.minimum(y_lo, slack_lo)).max(initial=0.0)
    return Kkt(float(stat), float(prim), float(comp))


class _Factor:
    def __init__(self, P, C, sigma, rho):
        K = P + sigma * np.eye(P.shape[0]) + C.T @ (rho[:, None] * C)
        self.cho = sla.cho_factor(K)

    def solve(self, b):
        return sla.cho_solve(self.cho, b)


def _polish(P, q, C, lo, hi, x, y, z, tol):
    m = len(lo)
    eq = np.abs(hi - lo) <= 1e-12 * np.maximum(1.0, np.abs(lo))
    low = eq | (z - lo < -y)
    up = ~low & (hi - z < y)
    act = np.flatnonzero(low | up)
    b = np.where(low, lo, hi)[act]
    n = P.shape[0]
    Ca = C[act]
    K = np.block([[P, Ca.T], [Ca, np.zeros((len(act), len(act)))]])
    rhs = np.concatenate([-q, b])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    for _ in range(3):  # iterative refinement
        sol = sol + np.linalg.lstsq(K, rhs - K @ sol, rcond=None)[0]
    xp = sol[:n]
    yp = np.zeros(m)
    yp[act] = sol[n:]
    return xp, yp


def solve(P, q, C, lo, hi, tol=1e-6, max_iter=20000, x0=None, y0=None,
          rho=0.1, sigma=1e-6, alpha=1.6, check_every=10) -> QpResult:
    P = np.asarray(P, float)
    q = np.asarray(q, float)
    C = np.atleast_2d(np.asarray(C, float))
    lo = np.asarray(lo, float).copy()
    hi = np.asarray(hi, float).copy()
    n = P.shape[0]
    m = C.shape[0]
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(q)) and np.all(np.isfinite(C))):
        raise ValueError("non-finite QP data")

    def result(x, y, it, status, polished=False):
        k = kkt_residuals(P, q, C, lo, hi, x, y)
        obj = float(0.5 * x @ P @ x + q @ x)
        return QpResult(x, y, obj, k.max, it, status, polished)

    if np.any(lo > hi):
        return result(np.zeros(n), np.zeros(m), 0, INFEASIBLE)

    # row equilibration; duals are unscaled on the way out
    norms = np.abs(C).max(axis=1)
    norms[norms == 0] = 1.0
    D = 1.0 / norms
    Cs = C * D[:, None]
    los = np.clip(lo * D, -_INF, _INF)
    his = np.clip(hi * D, -_INF, _INF)
    eq = np.abs(hi - lo) <= 1e-12 * np.maximum(1.0, np.abs(lo))
    rho_vec = np.where(eq, 1e3 * rho, rho)

    x = np.zeros(n) if x0 is None else np.asarray(x0, float).copy()
    z = np.clip(Cs @ x, los, his)
    ys = np.zeros(m) if y0 is None else np.asarray(y0, float) / D
    fac = _Factor(P, Cs, sigma, rho_vec)
    scale_q = max(1.0, np.abs(q).max(initial=0.0))

    for it in range(1, max_iter + 1):
        xt = fac.solve(sigma * x - q + Cs.T @ (rho_vec * z - ys))
        zt = Cs @ xt
        x_new = alpha * xt + (1 - alpha) * x
        z_relax = alpha * zt + (1 - alpha) * z
        z_new = np.clip(z_relax + ys / rho_vec, los, his)
        dy = rho_vec * (z_relax - z_new)
        ys = ys + dy
        x, z = x_new, z_new

        if it % check_every:
            continue
        Csx = Cs @ x
        r_prim = np.abs(Csx - z).max(initial=0.0)
        r_dual = np.abs(P @ x + q + Cs.T @ ys).max(initial=0.0)

        # primal infeasibility certificate
        ndy = np.abs(dy).max(initial=0.0)
        if ndy > 1e-12:
            cert = np.abs(Cs.T @ dy).max(initial=0.0)
            sup = np.sum(np.where(dy > 0, his * dy, 0.0)) + np.sum(np.where(dy < 0, los * dy, 0.0))
            if cert <= 1e-9 * ndy and sup < -1e-9 * ndy and np.all(np.abs(his[dy > 0]) < _INF) \
                    and np.all(np.abs(los[dy < 0]) < _INF):
                return result(x, ys * D, it, INFEASIBLE)

        if r_prim < 1e-3 * max(1.0, np.abs(z).max(initial=0.0)) and r_dual < 1e-3 * scale_q:
            xp, yp = _polish(P, q, C, lo, hi, x, ys * D, Cs @ x / D, tol)
            k = kkt_residuals(P, q, C, lo, hi, xp, yp)
            if k.max <= tol:
                return result(xp, yp, it, OPTIMAL, polished=True)
        y = ys * D
        if r_prim <= tol * 1e-1 and r_dual <= tol * 1e-1:
            k = kkt_residuals(P, q, C, lo, hi, x, y)
            if k.max <= tol:
                return result(x, y, it, OPTIMAL)

        # adaptive penalty, OSQP-style
        if it % (5 * check_every) == 0:
            num = r_prim / max(np.abs(Csx).max(initial=0.0), np.abs(z).max(initial=0.0), 1e-30)
            den = r_dual / max(np.abs(P @ x).max(initial=0.0), np.abs(Cs.T @ ys).max(initial=0.0),
                               np.abs(q).max(initial=0.0), 1e-30)
            ratio = np.sqrt(num / max(den, 1e-30))
            if ratio > 5 or ratio < 0.2:
                rho_vec = np.clip(rho_vec * ratio, 1e-6, 1e6)
                fac = _Factor(P, Cs, sigma, rho_vec)
    return result(x, ys * D, max_iter, MAX_ITER)
