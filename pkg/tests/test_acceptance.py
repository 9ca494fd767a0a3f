"""Acceptance criteria for the paper configuration.

Each test prints one ``[PASS]``/``[FAIL]`` line (shown even under output
capture).  Run alone with ``pytest tests/test_acceptance.py -v`` or
``python3 tests/test_acceptance.py``.
"""
import time

import numpy as np
import pytest

from btes import qp as qpsolver
from btes.assembly import assemble_system, spectral_radius, step
from btes.cli import main as cli_main
from btes.config import default_config
from btes.ground import GroundParams, assemble_ground
from btes.mesh import MeshSpec, build_mesh, classify_cells
from btes.mpc import OcpConfig, PredictionModel, closed_loop, condense, generate_demand, solve_qp
from btes.sim import Scenario, extract_heatmap, mirrored_sets, simulate
from btes.validation import default_dataset_path, load_measurements, self_comparison, validate_bhe

from conftest import make_config
from oracles import ground_loop_step
from test_qp import brute_force, random_instance


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        assert ok, detail
    return emit


def test_01_state_count(report):
    t0 = time.perf_counter()
    sys = assemble_system(default_config())
    elapsed = time.perf_counter() - t0
    lay = sys.layout
    parts = (2, lay.ground_offset - 2, lay.n_cells)
    ok = lay.n == 2319 and parts == (2, 108, 2209) and elapsed < 5.0
    report(1, ok, f"n = {lay.n} = {' + '.join(map(str, parts))}, assembled in {elapsed:.2f} s")


def test_02_fixed_point(report, paper_system):
    x = paper_system.ambient_state()
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(10_000):
        x = step(paper_system, x, 0.0)
        worst = max(worst, float(np.max(np.abs(x - 295.15))))
    elapsed = time.perf_counter() - t0
    report(2, worst <= 1e-6 and elapsed < 10.0,
           f"max deviation {worst:.3e} K over 10000 steps in {elapsed:.2f} s")


def test_03_stencil_oracle(report):
    mesh = build_mesh(MeshSpec(6.0, 6.0, 1.0, 1.0))
    p = GroundParams(2.3e6, 4.2e6, 2.3, 0.8, 1.3889e-6, -2.1e-6, 295.15, 15.0)
    block = assemble_ground(mesh, p, classify_cells(mesh, []))
    import scipy.sparse as sp

    r, c, v = zip(*[(i, k, w) for i, row in enumerate(block.rows) for k, w in row.items()])
    A = sp.csr_matrix((v, (r, c)), shape=(mesh.n_cells, mesh.n_cells))
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        x = rng.uniform(280.0, 310.0, mesh.n_cells)
        ref = ground_loop_step(mesh, p, x)
        worst = max(worst, float(np.max(np.abs(A @ x + block.f_const - ref) / np.abs(ref))))
    report(3, worst <= 1e-12, f"max relative deviation {worst:.2e} over 100 random states")


def test_04_stability(report, paper_system, capsys):
    est = spectral_radius(paper_system, 2000, seed=42)
    assert cli_main(["system-info"]) == 0
    out = capsys.readouterr().out
    line = next(ln for ln in out.splitlines() if ln.startswith("spectral_radius"))
    printed = float(line.split()[1])
    ok = est.rho < 1.0 and printed == pytest.approx(est.rho, rel=1e-11)
    report(4, ok, f"power-iteration rho(A) = {est.rho:.9f} (system-info: {printed:.9f})")


def test_05_charging(report, paper_system):
    t0 = time.perf_counter()
    traj = simulate(paper_system, Scenario.constant(4500.0, 26.0, paper_system.dt))
    elapsed = time.perf_counter() - t0
    grid = extract_heatmap(paper_system, traj)
    ne, sw = mirrored_sets(paper_system)
    g = traj.final_state[paper_system.layout.ground_slice]
    margin = float(g[ne].mean() - g[sw].mean())
    peak = float(grid.max())
    ok = 300.5 <= peak <= 303.5 and margin > 0 and elapsed < 60.0
    report(5, ok, f"peak {peak:.4f} K, NE - SW = {margin:+.4f} K over {len(ne)} cell pairs, "
                  f"{elapsed:.1f} s")


def test_06_validation(report, paper_config):
    t0 = time.perf_counter()
    path = default_dataset_path()
    if path is not None:
        rep, _ = validate_bhe(paper_config, load_measurements(path), hours=52.0)
        ok = rep.mae_in <= 0.5 and rep.mae_out <= 0.5
        detail = f"measured data: MAE in {rep.mae_in:.5f} K, out {rep.mae_out:.5f} K"
    else:
        rep = self_comparison(paper_config, hours=52.0)
        errors = (rep.mean_error_in, rep.std_error_in, rep.mean_error_out, rep.std_error_out,
                  rep.mae_in, rep.mae_out)
        ok = all(e == 0.0 for e in errors)
        detail = f"no dataset (BTES_BEIER_CSV unset), self-comparison errors {max(errors)} over {rep.count} samples"
    elapsed = time.perf_counter() - t0
    report(6, ok and elapsed < 60.0, f"{detail}, {elapsed:.1f} s")


def test_07_qp_certification(report, paper_system):
    worst_kkt = 0.0
    statuses = set()
    for seed in range(200):
        rng = np.random.default_rng(seed)
        H = int(rng.integers(1, 11))
        P, q, C, lo, hi = random_instance(rng, H, int(rng.integers(0, 2 * H)), box=float(rng.uniform(0.5, 3)))
        res = qpsolver.solve(P, q, C, lo, hi)
        statuses.add(res.status)
        worst_kkt = max(worst_kkt, qpsolver.kkt_residuals(P, q, C, lo, hi, res.x, res.y).max)
    worst_grid = 0.0
    for seed in range(20):
        H = 1 + seed % 2
        P, q, C, lo, hi = random_instance(np.random.default_rng(5000 + seed), H)
        res = qpsolver.solve(P, q, C, lo, hi, tol=1e-8)
        worst_grid = max(worst_grid, float(np.max(np.abs(res.x - brute_force(P, q, C, lo, hi)))))
    o = OcpConfig(1, 0.1, 0.01, 273.15, 303.15, -1000.0, 1000.0)
    sol = solve_qp(condense(paper_system, o, paper_system.ambient_state(), 0.0, [-750.0]))
    analytic_err = abs(sol.u_seq[0] - (0.1 * -750.0) / 0.11)
    ok = statuses == {qpsolver.OPTIMAL} and worst_kkt <= 1e-6 and worst_grid <= 0.02 and analytic_err <= 1e-9
    report(7, ok, f"200 instances max KKT {worst_kkt:.2e}; grid oracle max deviation {worst_grid:.4f}; "
                  f"H=1 analytic error {analytic_err:.1e}")


def test_08_condensing(report):
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        sys = assemble_system(make_config(sigma=1, substeps=1 + seed % 2, v=tuple(rng.uniform(-3e-6, 3e-6, 2))))
        H = 1 + seed % 5
        x = rng.uniform(285.0, 305.0, sys.n)
        u = rng.uniform(-1000.0, 1000.0, H)
        pred = PredictionModel(sys, H).predict(x, u)
        xs = x
        for k in range(H):
            xs = step(sys, xs, u[k])
            worst = max(worst, float(np.max(np.abs(pred[k] - xs) / np.abs(xs))))
    report(8, worst <= 1e-9, f"max relative deviation {worst:.2e} (n = 31, H = 1..5)")


@pytest.mark.slow
def test_09_closed_loop(report, paper_config, paper_system):
    ocp = OcpConfig.from_config(paper_config)
    demand = generate_demand(42, 24.0, lookahead=ocp.H)
    t0 = time.perf_counter()
    res = closed_loop(paper_system, ocp, demand, 24.0)
    elapsed = time.perf_counter() - t0
    all_optimal = all(s == qpsolver.OPTIMAL for s in res.status)
    err = np.abs(res.u - res.y_ref).reshape(-1, demand.block_length)
    tail = err[:, -8:].mean(axis=1)  # final 2 minutes = 8 steps of 15 s
    bounded = float(np.max(np.abs(res.u))) <= 1000.0 + 1e-9
    mean_ms = float(np.mean(res.solve_ms))
    ok = all_optimal and tail.max() <= 50.0 and bounded and mean_ms <= 2000.0 and elapsed <= 7200.0
    report(9, ok, f"{len(res.u)} steps, optimal {sum(s == qpsolver.OPTIMAL for s in res.status)}, "
                  f"worst block tail error {tail.max():.3f} W, max |u| {np.max(np.abs(res.u)):.1f} W, "
                  f"mean solve {mean_ms:.1f} ms, total {elapsed:.0f} s")


def test_10_determinism(report, tmp_path):
    m = tmp_path / "m.csv"
    m.write_text("time_s,T_in_K,T_out_K\n0,296,295.5\n900,296.5,295.7\n1800,296.4,295.9\n")
    commands = [
        ["mesh-info"],
        ["system-info", "--iterations", "500"],
        ["simulate", "--hours", "2"],
        ["mpc-run", "--hours", "0.5"],
        ["validate-bhe", "--measurements", str(m)],
    ]
    mismatched = []
    n_files = 0
    for cmd in commands:
        outs = []
        for run in ("a", "b"):
            d = tmp_path / cmd[0] / run
            assert cli_main(cmd + ["--seed", "42", "--out", str(d)]) == 0
            outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        n_files += len(outs[0])
        if outs[0] != outs[1]:
            mismatched.append(cmd[0])
    report(10, not mismatched, f"{n_files} files across {len(commands)} subcommands"
                               + (f", mismatched: {mismatched}" if mismatched else ", byte-identical"))


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
