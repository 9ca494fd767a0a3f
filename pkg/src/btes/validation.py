"""Thermal-response-test comparison: measured inlet/outlet series vs. the model."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assembly import assemble_system
from .errors import MeasurementError
from .sim import Scenario, Trajectory, simulate

REQUIRED = ("time_s", "T_in_K", "T_out_K")
T_BAND = (200.0, 400.0)


@dataclass(frozen=True, eq=False)
class MeasurementSeries:
    time: np.ndarray
    T_in: np.ndarray
    T_out: np.ndarray
    power: np.ndarray | None = None

    def __post_init__(self):
        if len(self.time) < 1:
            raise MeasurementError("empty series")
        if np.any(np.diff(self.time) <= 0):
            raise MeasurementError("time must be strictly increasing")

    def __len__(self):
        return len(self.time)

    @property
    def span(self) -> float:
        return float(self.time[-1] - self.time[0])

    def interpolate(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Linear interpolation of (T_in, T_out) onto the given times."""
        t = np.asarray(t, float)
        return np.interp(t, self.time, self.T_in), np.interp(t, self.time, self.T_out)

    def interpolate_power(self, t) -> np.ndarray | None:
        if self.power is None:
            return None
        return np.interp(np.asarray(t, float), self.time, self.power)


def load_measurements(path) -> MeasurementSeries:
    """Parse ``time_s,T_in_K,T_out_K[,power_W]`` CSV."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MeasurementError("empty file", 1) from None
        if tuple(header[:3]) != REQUIRED or header[3:] not in ([], ["power_W"]):
            raise MeasurementError(f"unexpected header {header}", 1)
        has_power = len(header) == 4
        prev = -math.inf
        for line, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise MeasurementError(f"expected {len(header)} fields, got {len(rec)}", line)
            try:
                vals = [float(c) for c in rec]
            except ValueError:
                raise MeasurementError(f"non-numeric field in {rec}", line) from None
            if not all(math.isfinite(v) for v in vals):
                raise MeasurementError("non-finite value", line)
            if vals[0] <= prev:
                raise MeasurementError("time is not strictly increasing", line)
            for v in vals[1:3]:
                if not T_BAND[0] < v < T_BAND[1]:
                    raise MeasurementError(f"temperature {v} K outside {T_BAND}", line)
            prev = vals[0]
            rows.append(vals)
    if not rows:
        raise MeasurementError("no data rows", 2)
    data = np.array(rows)
    return MeasurementSeries(data[:, 0], data[:, 1], data[:, 2], data[:, 3] if has_power else None)


def write_measurements(series: MeasurementSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = list(REQUIRED) + (["power_W"] if series.power is not None else [])
        w.writerow(head)
        for i in range(len(series)):
            row = [series.time[i], series.T_in[i], series.T_out[i]]
            if series.power is not None:
                row.append(series.power[i])
            w.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class ErrorReport:
    mean_error_in: float
    std_error_in: float
    mean_error_out: float
    std_error_out: float
    mae_in: float
    mae_out: float
    count: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def error_report(sim_in, sim_out, meas_in, meas_out) -> ErrorReport:
    """Statistics of ``simulated - measured`` per channel (population std)."""
    e_in = np.asarray(sim_in, float) - np.asarray(meas_in, float)
    e_out = np.asarray(sim_out, float) - np.asarray(meas_out, float)
    if e_in.size == 0:
        raise ValueError("no samples to compare")
    return ErrorReport(float(e_in.mean()), float(e_in.std()), float(e_out.mean()), float(e_out.std()),
                       float(np.abs(e_in).mean()), float(np.abs(e_out).mean()), int(e_in.size))


def single_bhe_config(config):
    """Validation setup: one BHE (the one nearest the domain centre), no groundwater flow."""
    m = config.mesh
    cx, cy = 0.5 * m.domain_size_x, 0.5 * m.domain_size_y
    pos = min(m.bhe_positions, key=lambda p: ((p[0] - cx) ** 2 + (p[1] - cy) ** 2, p))
    return config.with_overrides(mesh={"bhe_positions": [list(pos)]},
                                 ground={"v_x": 0.0, "v_y": 0.0})


def validate_bhe(config, series: MeasurementSeries, forcing: str = "inlet",
                 hours: float | None = None) -> tuple[ErrorReport, Trajectory]:
    """Drive the single-BHE model with the measured data and compare temperatures.

    ``forcing="inlet"`` prescribes the measured inlet temperature; ``"power"``
    applies the measured power (or ``q c_w (T_in - T_out)`` when absent).
    """
    if forcing not in ("inlet", "power"):
        raise ValueError("forcing must be 'inlet' or 'power'")
    cfg = single_bhe_config(config)
    sys = assemble_system(cfg)
    window = series.span if hours is None else hours * 3600.0
    if window > series.span + 1e-9:
        raise ValueError(f"series spans {series.span / 3600:.3f} h, shorter than the "
                         f"requested {window / 3600:.3f} h")
    n_steps = int(math.floor(window / sys.dt + 1e-9))
    if n_steps < 1:
        raise ValueError("series shorter than one time step")
    t0 = float(series.time[0])
    t_sim = t0 + np.arange(n_steps + 1) * sys.dt

    if forcing == "inlet":
        inlet, _ = series.interpolate(t_sim)
        traj = simulate(sys, Scenario(n_steps), stride=1, inlet=inlet)
    else:
        u = series.interpolate_power(t_sim)
        if u is None:
            m_in, m_out = series.interpolate(t_sim)
            u = cfg.q_vol * cfg.ground.c_w * (m_in - m_out)
        sched = tuple((k, float(u[k])) for k in range(n_steps + 1))
        traj = simulate(sys, Scenario(n_steps, sched), stride=1)
    traj.times = traj.times + t0

    t_end = t_sim[-1]
    sel = (series.time >= t0) & (series.time <= t_end + 1e-9)
    tm = series.time[sel]
    sim_in = np.interp(tm, traj.times, traj.T_in)
    sim_out = np.interp(tm, traj.times, traj.T_out)
    report = error_report(sim_in, sim_out, series.T_in[sel], series.T_out[sel])
    traj.meta.update(forcing=forcing, n_bhe=1)
    return report, traj


def synthetic_series(config, hours: float = 52.0, power: float = 1000.0) -> MeasurementSeries:
    """Model output of the single-BHE setup under constant power, as a measurement series."""
    cfg = single_bhe_config(config)
    sys = assemble_system(cfg)
    traj = simulate(sys, Scenario.constant(power, hours, sys.dt), stride=1)
    return MeasurementSeries(traj.times.astype(float), traj.T_in.copy(), traj.T_out.copy(),
                             traj.inputs.astype(float))


def self_comparison(config, hours: float = 52.0, power: float = 1000.0,
                    forcing: str = "power") -> ErrorReport:
    """Feed the model's own output back as measurements; all errors are zero."""
    series = synthetic_series(config, hours, power)
    report, _ = validate_bhe(config, series, forcing=forcing)
    return report


def default_dataset_path() -> Path | None:
    import os

    p = os.environ.get("BTES_BEIER_CSV")
    return Path(p) if p else None
