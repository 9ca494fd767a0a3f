"""Command-line client for the btes service.

Every subcommand posts a request to the API: in-process by default, or to a
running server with ``--url``.  Files are written on the client side.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import output
from .config import load_config
from .errors import BtesError
from .validation import load_measurements

log = logging.getLogger("btes.cli")


class ServiceError(RuntimeError):
    pass


class Client:
    def __init__(self, url: str | None = None):
        if url:
            import httpx

            self._http = httpx.Client(base_url=url, timeout=None)
        else:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service import app

            self._http = TestClient(app, raise_server_exceptions=True)

    def call(self, endpoint: str, payload: dict) -> dict:
        r = self._http.post(endpoint, json=payload)
        if r.status_code != 200:
            try:
                detail = r.json().get("detail", r.text)
            except ValueError:
                detail = r.text
            raise ServiceError(f"{endpoint} failed ({r.status_code}): {detail}")
        return r.json()


def _config_payload(args) -> dict | None:
    if args.config is None:
        return None
    # validate locally first so typos are reported before any request is made
    load_config(args.config)
    return json.loads(Path(args.config).read_text())


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_mesh_info(client, args):
    r = client.call("/mesh-info", {"config": _config_payload(args)})
    print(f"n_x {r['n_x']}")
    print(f"n_y {r['n_y']}")
    print(f"cells {r['n_cells']}")
    for k, v in r["counts"].items():
        print(f"{k} {v}")
    if args.out:
        output.write_report(_out_dir(args) / "mesh_info.csv",
                            {"n_x": r["n_x"], "n_y": r["n_y"], "cells": r["n_cells"], **r["counts"]})


def cmd_system_info(client, args):
    r = client.call("/system-info", {"config": _config_payload(args), "seed": args.seed,
                                     "iterations": args.iterations})
    print(f"n {r['n']} (apu {r['n_apu']} + bhe {r['n_bhe']} + ground {r['n_ground']})")
    print(f"nnz {r['nnz']}")
    print(f"spectral_radius {r['spectral_radius']:.12g}")
    print(f"fixed_point_residual {r['fixed_point_residual']:.3e}")
    print(f"fluid_courant {r['fluid_courant']:.6g}")
    if args.out:
        output.write_report(_out_dir(args) / "system_info.csv", r)


def cmd_simulate(client, args):
    payload = {"config": _config_payload(args), "hours": args.hours, "power": args.power,
               "stride": args.stride}
    if args.initial_state:
        payload["x0"] = [float(v) for v in output.read_state(args.initial_state)]
    r = client.call("/simulate", payload)
    out = _out_dir(args)
    output.write_trace(out / "trace.csv", r["times"], r["u"], r["T_in"], r["T_out"], r["Q"], r["nu"])
    output.write_heatmap_csv(out / "heatmap_final.csv", r["heatmap"])
    output.write_pgm(out / "heatmap_final.pgm", r["heatmap"], r["T_amb"])
    output.write_state(out / "state_final.csv", r["final_state"], r["labels"])
    peak = max(max(row) for row in r["heatmap"])
    print(f"final T_in {r['T_in'][-1]:.4f} K, T_out {r['T_out'][-1]:.4f} K, "
          f"max ground {peak:.4f} K")
    print(f"wrote {out}/trace.csv, heatmap_final.csv, heatmap_final.pgm, state_final.csv")


def cmd_mpc_run(client, args):
    r = client.call("/mpc-run", {"config": _config_payload(args), "hours": args.hours,
                                 "seed": args.seed})
    out = _out_dir(args)

    class _Res:  # attribute view for the writer
        pass

    res = _Res()
    for k in ("times", "y_ref", "u", "T_in", "T_out", "kkt_residual", "solve_ms", "status"):
        setattr(res, k, r[k])
    output.write_mpc_trace(out / "mpc_trace.csv", res, timing=args.timing)
    output.write_svg(out / "mpc_chart.svg", r["times"], r["y_ref"], r["u"])
    s = r["summary"]
    print("summary")
    print(f"  steps {int(s['steps'])} (optimal {int(s['optimal_steps'])})")
    print(f"  mean_solve_ms {s['mean_solve_ms']:.3f}")
    print(f"  max_solve_ms {s['max_solve_ms']:.3f}")
    print(f"  mean_tracking_error_W {s['mean_tracking_error_W']:.6g}")
    print(f"  max_kkt_residual {s['max_kkt_residual']:.3e}")


def cmd_validate_bhe(client, args):
    payload = {"config": _config_payload(args), "forcing": args.forcing}
    if args.hours:
        payload["hours"] = args.hours
    if args.measurements:
        m = load_measurements(args.measurements)
        payload["measurements"] = {
            "time_s": m.time.tolist(), "T_in_K": m.T_in.tolist(), "T_out_K": m.T_out.tolist(),
            "power_W": None if m.power is None else m.power.tolist()}
    r = client.call("/validate-bhe", payload)
    print(f"source {r['source']} ({r['forcing']} forcing)")
    rep = r["report"]
    print(f"inlet  mean {rep['mean_error_in']:.6g} K  std {rep['std_error_in']:.6g} K  "
          f"mae {rep['mae_in']:.6g} K")
    print(f"outlet mean {rep['mean_error_out']:.6g} K  std {rep['std_error_out']:.6g} K  "
          f"mae {rep['mae_out']:.6g} K")
    print(f"samples {int(rep['count'])}")
    if args.out:
        out = _out_dir(args)
        output.write_report(out / "validation_report.csv", rep)
        n = len(r["times"])
        output.write_trace(out / "validation_trace.csv", r["times"], [0.0] * n, r["T_in"], r["T_out"],
                           [[]] * n, 0)


def cmd_serve(args):
    import uvicorn

    uvicorn.run("btes.service:app", host=args.host, port=args.port)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config (default: bundled paper setup)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--url", help="base URL of a running btes service (default: in-process)")

    p = argparse.ArgumentParser(prog="btes", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("mesh-info", parents=[common], help="mesh size and cell classes")
    s = sub.add_parser("system-info", parents=[common], help="state count, sparsity, stability")
    s.add_argument("--iterations", type=int, default=2000)

    s = sub.add_parser("simulate", parents=[common], help="open-loop constant-power run")
    s.add_argument("--hours", type=float, default=26.0)
    s.add_argument("--power", type=float, default=4500.0)
    s.add_argument("--stride", type=int, default=20)
    s.add_argument("--initial-state", help="state CSV written by a previous run")

    s = sub.add_parser("mpc-run", parents=[common], help="closed-loop tracking MPC")
    s.add_argument("--hours", type=float, default=24.0)
    s.add_argument("--timing", action="store_true",
                   help="write per-step wall time into mpc_trace.csv (not reproducible)")

    s = sub.add_parser("validate-bhe", parents=[common], help="compare against TRT measurements")
    s.add_argument("--measurements", help="CSV time_s,T_in_K,T_out_K[,power_W]; "
                                          "omitted: self-comparison")
    s.add_argument("--forcing", choices=["inlet", "power"], default="inlet")
    s.add_argument("--hours", type=float)

    s = sub.add_parser("serve", help="run the HTTP service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    return p


COMMANDS = {
    "mesh-info": cmd_mesh_info,
    "system-info": cmd_system_info,
    "simulate": cmd_simulate,
    "mpc-run": cmd_mpc_run,
    "validate-bhe": cmd_validate_bhe,
}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("BTES_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        cmd_serve(args)
        return 0
    if args.command in ("simulate", "mpc-run") and not args.out:
        args.out = "."
    try:
        COMMANDS[args.command](Client(args.url), args)
    except (BtesError, ServiceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
