"""Command-line front end: ``voyage solve | sweep | map``.

Exit codes: 0 success, 1 unreachable scenario, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .dp_solver import Trajectory, build_transitions, planned_trajectory, rollout, solve
from .dynamics import State
from .environment import ConfigError
from .pareto import front, lambda_grid, sweep, write_csv
from .scenario import Scenario, default_config_text, load_scenario
from .svg import map_svg, pareto_svg

logger = logging.getLogger("voyage")

EXIT_OK, EXIT_UNREACHABLE, EXIT_USAGE = 0, 1, 2
TRAJECTORY_COLUMNS = ("k", "t_hr", "x1_km", "x2_km", "fuel_gal", "u1", "u2", "refueled")


def _unit_float(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is outside [0, 1]")
    return v


def _step_float(text: str) -> float:
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is outside (0, 1]")
    return v


def _fuel_list(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad fuel list {text!r}") from None
    if not vals or any(v < 0 or not math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"bad fuel list {text!r}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario JSON (default: shipped scenario)")
    common.add_argument("--seed", type=int, help="LHS seed override")
    common.add_argument("--mesh-size", type=int, help="number of LHS positions")
    common.add_argument("--horizon", type=int, help="DP horizon in steps")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="voyage", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"voyage {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="optimal trajectory for one weight")
    s.add_argument("--lambda", dest="lam", type=_unit_float, required=True)
    s.add_argument("--fuel", type=_fuel_list, help="initial fuel [Gal]")

    w = sub.add_parser("sweep", parents=[common], help="Pareto sweep over the weight")
    w.add_argument("--lambda-step", type=_step_float, default=0.05)
    w.add_argument("--fuel", type=_fuel_list, default=[2.0, 4.0, 6.0, 8.0],
                   help="comma-separated initial fuel levels [Gal]")

    sub.add_parser("map", parents=[common], help="plot the current field and ports")
    return p


def _scenario(args) -> Scenario:
    text = args.config.read_text() if args.config else default_config_text()
    sc = load_scenario(text)
    overrides = {k: v for k, v in (("seed", args.seed), ("mesh_size", args.mesh_size),
                                   ("horizon", args.horizon)) if v is not None}
    if overrides:
        disc = dataclasses.replace(sc.disc, **overrides)
        disc.validate(sc.vehicle)
        sc = dataclasses.replace(sc, disc=disc)
    return sc


def manifest(sc: Scenario, lambdas: Sequence[float], outputs: Sequence[str]) -> dict:
    body = {
        "config_hash": sc.config_hash,
        "mesh_seed": sc.disc.seed,
        "mesh_size": sc.disc.mesh_size,
        "lambdas": list(lambdas),
        "horizon": sc.disc.horizon,
        "tool_version": __version__,
        "outputs": list(outputs),
    }
    body["manifest_id"] = hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]
    body["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return body


def write_trajectory_csv(traj: Trajectory, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for st in traj.steps:
            p = st.state.position
            w.writerow([st.k, f"{st.k * traj.dt:.4f}", f"{p[0]:.6f}", f"{p[1]:.6f}",
                        f"{st.state.fuel:.6f}", f"{st.control.u1:g}", f"{st.control.u2:g}",
                        str(st.refueled).lower()])
        k = len(traj.steps)
        p = traj.final.position
        w.writerow([k, f"{k * traj.dt:.4f}", f"{p[0]:.6f}", f"{p[1]:.6f}",
                    f"{traj.final.fuel:.6f}", "", "", "false"])


def _summary(traj: Trajectory) -> dict:
    return {
        "arrived": traj.arrived,
        "trip_time_hr": traj.trip_time if traj.arrived else None,
        "total_fuel_gal": round(traj.total_fuel, 9),
        "refuel_steps": sum(s.refueled for s in traj.steps),
        "diagnostic": traj.diagnostic,
    }


def cmd_solve(sc: Scenario, lam: float, fuel: float, out: Path) -> int:
    problem = sc.problem()
    tr = build_transitions(problem)
    sol = solve(problem, lam, sc.disc.horizon, tr)
    diag = sol.diagnose(fuel)
    if diag:
        print(f"voyage: {diag}", file=sys.stderr)
        return EXIT_UNREACHABLE
    plan = planned_trajectory(sol, fuel, tr)
    exact = rollout(sol, State(sc.env.start, fuel))

    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(exact, out / "trajectory.csv")
    write_trajectory_csv(plan, out / "plan.csv")
    files = ["trajectory.csv", "plan.csv", "summary.json", "trajectory.svg"]
    man = manifest(sc, [lam], files)
    summary = {"manifest_id": man["manifest_id"], "lambda": lam, "initial_fuel_gal": fuel,
               "cost": sol.start_value(fuel), **_summary(plan), "rollout": _summary(exact)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    paths = [(f"plan (lambda={lam:g})", [s.position for s in plan.states]),
             ("exact rollout", [s.position for s in exact.states])]
    (out / "trajectory.svg").write_text(
        map_svg(sc.env, paths=paths, title=f"Trajectory lambda={lam:g}, fuel={fuel:g} Gal"))
    (out / "manifest.json").write_text(json.dumps(man, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_sweep(sc: Scenario, lam_step: float, fuels: Sequence[float], out: Path) -> int:
    lambdas = lambda_grid(lam_step)
    problem = sc.problem()
    points = sweep(problem, lambdas, fuels, sc.disc.horizon)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(points, out / "pareto.csv")
    fronts = []
    for f in fuels:
        fr = front(p for p in points if p.initial_fuel == f)
        fronts.append((f"{f:g} Gal", [(p.trip_time, p.total_fuel) for p in fr]))
    (out / "pareto.svg").write_text(pareto_svg(fronts))
    man = manifest(sc, lambdas, ["pareto.csv", "pareto.svg"])
    (out / "manifest.json").write_text(json.dumps(man, indent=2) + "\n")
    n_arrived = sum(p.arrived for p in points)
    print(f"{len(points)} points ({n_arrived} arrived) -> {out / 'pareto.csv'}")
    if n_arrived == 0:
        print("voyage: destination unreachable for every weight", file=sys.stderr)
        return EXIT_UNREACHABLE
    return EXIT_OK


def cmd_map(sc: Scenario, out: Path) -> int:
    target = out if out.suffix == ".svg" else out / "map.svg"
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(map_svg(sc.env, grid=20, title="Map of ocean space"))
    print(target)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = _scenario(args)
    except (ConfigError, OSError) as exc:
        print(f"voyage: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "solve":
        fuel = args.fuel[0] if args.fuel else sc.env.start_fuel
        return cmd_solve(sc, args.lam, fuel, args.out)
    if args.command == "sweep":
        return cmd_sweep(sc, args.lambda_step, args.fuel, args.out)
    return cmd_map(sc, args.out)


if __name__ == "__main__":
    sys.exit(main())
