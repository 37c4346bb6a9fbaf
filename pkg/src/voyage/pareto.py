"""Scalarization-weight sweeps, Pareto fronts and tradeoff metrics."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .dp_solver import (Problem, Solution, Trajectory, Transitions, build_transitions,
                        planned_trajectory, rollout, solve)
from .dynamics import State

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("lambda", "initial_fuel_gal", "total_fuel_gal", "trip_time_hr", "arrived",
               "on_front", "cost", "rollout_fuel_gal", "rollout_time_hr", "rollout_arrived")


@dataclass(frozen=True)
class ParetoPoint:
    """Outcome of one weight.

    ``total_fuel``/``trip_time`` come from the optimizer's own (mesh) path;
    the ``rollout_*`` fields from simulating that policy with exact dynamics.
    """
    lam: float
    initial_fuel: float
    total_fuel: float
    trip_time: float
    arrived: bool
    cost: float = math.nan
    rollout_fuel: float = math.nan
    rollout_time: float = math.nan
    rollout_arrived: bool = False


def lambda_grid(step: float) -> list[float]:
    """0, step, 2*step, ... up to and including 1."""
    if not 0 < step <= 1:
        raise ValueError(f"lambda step must be in (0, 1], got {step}")
    count = int(math.floor(1.0 / step + 1e-9))
    grid = [round(i * step, 12) for i in range(count + 1)]
    if grid[-1] < 1.0 - 1e-9:
        grid.append(1.0)
    grid[-1] = min(grid[-1], 1.0)
    return grid


def sweep(problem: Problem, lambdas: Sequence[float], initial_fuel: float | Iterable[float],
          horizon: int, transitions: Optional[Transitions] = None) -> list[ParetoPoint]:
    """One solve per weight; each solve serves every initial fuel level.

    Points come back ordered by (initial fuel, position in ``lambdas``).
    """
    if not len(lambdas):
        raise ValueError("lambdas must be non-empty")
    for lam in lambdas:
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {lam}")
    fuels = [float(initial_fuel)] if np.isscalar(initial_fuel) else [float(f) for f in initial_fuel]
    tr = transitions if transitions is not None else build_transitions(problem)

    # value tables are large; keep only the points per weight
    done: dict[float, list[ParetoPoint]] = {}
    for lam in lambdas:
        if lam not in done:
            sol = solve(problem, lam, horizon, tr)
            done[lam] = [evaluate(sol, f, tr)[0] for f in fuels]
            logger.info("solved lambda=%.3f", lam)
            del sol
    by_fuel: dict[float, list[ParetoPoint]] = {f: [] for f in fuels}
    for lam in lambdas:
        for f, p in zip(fuels, done[lam]):
            by_fuel[f].append(p)
    return [p for f in fuels for p in by_fuel[f]]


def evaluate(solution: Solution, initial_fuel: float,
             transitions: Optional[Transitions] = None
             ) -> tuple[ParetoPoint, Trajectory, Trajectory]:
    """Point for one solved weight and initial fuel, plus the mesh path and exact rollout."""
    problem = solution.problem
    plan = planned_trajectory(solution, initial_fuel, transitions)
    exact = rollout(solution, State(problem.env.start, initial_fuel))
    if not plan.arrived:
        logger.warning("lambda=%.3f fuel=%.2f: %s", solution.lam, initial_fuel, plan.diagnostic)
    point = ParetoPoint(
        lam=float(solution.lam), initial_fuel=float(initial_fuel),
        total_fuel=plan.total_fuel if plan.arrived else math.inf,
        trip_time=plan.trip_time if plan.arrived else math.inf,
        arrived=plan.arrived, cost=plan.total_cost,
        rollout_fuel=exact.total_fuel,
        rollout_time=exact.trip_time if exact.arrived else math.inf,
        rollout_arrived=exact.arrived)
    return point, plan, exact


def front(points: Iterable[ParetoPoint]) -> list[ParetoPoint]:
    """Non-dominated arrived points sorted by trip time, fuel strictly decreasing.

    Points equal in both coordinates collapse to the lowest weight.
    """
    pts = sorted((p for p in points if p.arrived),
                 key=lambda p: (p.trip_time, p.total_fuel, p.lam))
    kept: list[ParetoPoint] = []
    for p in pts:
        if not kept or p.total_fuel < kept[-1].total_fuel:
            kept.append(p)
    return kept


def _lookup(points: Sequence[ParetoPoint], lam: float,
            initial_fuel: Optional[float]) -> ParetoPoint:
    for p in points:
        if abs(p.lam - lam) <= 1e-9 and (initial_fuel is None or p.initial_fuel == initial_fuel):
            return p
    raise KeyError(f"no point with lambda={lam}"
                   + ("" if initial_fuel is None else f" and initial fuel {initial_fuel}"))


def marginal_tradeoff(points: Sequence[ParetoPoint], lam_hi: float, lam_lo: float,
                      initial_fuel: Optional[float] = None) -> tuple[float, float]:
    """(relative fuel reduction, trip-time change in hr) going from ``lam_hi`` to ``lam_lo``."""
    hi = _lookup(points, lam_hi, initial_fuel)
    lo = _lookup(points, lam_lo, initial_fuel)
    if hi.total_fuel == lo.total_fuel:
        reduction = 0.0
    else:
        reduction = (hi.total_fuel - lo.total_fuel) / hi.total_fuel
    return reduction, lo.trip_time - hi.trip_time


def monotonicity_violations(points: Iterable[ParetoPoint], tol: float = 1e-9) -> list[tuple]:
    """Adjacent-weight pairs (per initial fuel) where fuel drops or time rises with lambda."""
    groups: dict[float, list[ParetoPoint]] = {}
    for p in points:
        if p.arrived:
            groups.setdefault(p.initial_fuel, []).append(p)
    bad = []
    for f, pts in groups.items():
        pts = sorted(pts, key=lambda p: p.lam)
        for a, b in zip(pts, pts[1:]):
            if b.total_fuel < a.total_fuel - tol or b.trip_time > a.trip_time + tol:
                bad.append((f, a.lam, b.lam))
    return bad


def write_csv(points: Sequence[ParetoPoint], path: Path) -> None:
    on_front = set()
    for f in dict.fromkeys(p.initial_fuel for p in points):
        on_front.update(id(p) for p in front(p for p in points if p.initial_fuel == f))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for p in points:
            w.writerow([f"{p.lam:g}", f"{p.initial_fuel:g}", f"{p.total_fuel:.6f}",
                        f"{p.trip_time:.4f}", str(p.arrived).lower(),
                        str(id(p) in on_front).lower(), f"{p.cost:.9f}",
                        f"{p.rollout_fuel:.6f}", f"{p.rollout_time:.4f}",
                        str(p.rollout_arrived).lower()])
