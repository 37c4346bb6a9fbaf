"""Finite-horizon backward dynamic programming over the state mesh.

Candidate inputs are the lattice inputs in index order followed by one
refuel candidate (index ``len(lattice)``), admissible only at port nodes.
Terminal nodes are absorbing with zero cost. Unreachable states carry +inf.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .dynamics import (REFUEL, ControlInput, Infeasible, State, VehicleParams,
                       fuel_rate, is_stationary_port_state, step)
from .environment import EnvironmentSpec, Position, in_terminal, port_at
from .gridgen import InputLattice, StateMesh, linear_scan_nearest, nearest_fuel

logger = logging.getLogger(__name__)

VALUE_CACHE_VERSION = 1
ABSORBED = -1   # policy marker: terminal node, stay put
NO_INPUT = -2   # policy marker: no admissible input reaches the terminal set
BRUTE_FORCE_LIMIT = 10**7


@dataclass(frozen=True)
class StageCostParams:
    lam: float
    mdot_max: float   # Gal/hr
    dt: float         # hr

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")
        if not self.mdot_max > 0:
            raise ValueError("mdot_max must be > 0")

    @classmethod
    def for_vehicle(cls, lam: float, vehicle: VehicleParams, dt: float) -> "StageCostParams":
        return cls(lam, fuel_rate(vehicle.u_max, vehicle.u_max, vehicle), dt)


def stage_cost(u: ControlInput, at_terminal: bool, params: StageCostParams,
               vehicle: VehicleParams) -> float:
    """Normalized burn weighted by (1 - lambda) plus lambda per non-terminal step."""
    if at_terminal:
        return 0.0
    burned = 0.0 if u.refuel else fuel_rate(u.u1, u.u2, vehicle) * params.dt
    return (1.0 - params.lam) * burned / (params.mdot_max * params.dt) + params.lam


@dataclass(frozen=True)
class Problem:
    env: EnvironmentSpec
    vehicle: VehicleParams
    mesh: StateMesh
    lattice: InputLattice
    dt: float
    refuel_amount: Optional[float] = None

    @property
    def candidates(self) -> list[ControlInput]:
        return self.lattice.inputs + [REFUEL]

    def stage_params(self, lam: float) -> StageCostParams:
        return StageCostParams.for_vehicle(lam, self.vehicle, self.dt)

    def step(self, s: State, u: ControlInput):
        return step(s, u, self.dt, self.env, self.vehicle, self.refuel_amount)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.mesh.digest().encode())
        env = self.env
        h.update(repr((env.bounds, env.current, env.ports, env.terminal)).encode())
        h.update(repr(self.vehicle).encode())
        h.update(self.lattice.array.tobytes())
        h.update(repr((self.dt, self.refuel_amount)).encode())
        return h.hexdigest()[:20]


@dataclass
class Transitions:
    """lambda-independent successor structure on the mesh."""
    flat_next: np.ndarray       # (J, M, F) int32 flat index into (M*F + 1); sentinel = M*F
    terminal: np.ndarray        # (M,) bool
    port_nodes: np.ndarray      # (P,) node indices where refuel is admissible
    refuel_fuel: np.ndarray     # (F,) fuel index after a docked step

    @property
    def sentinel(self) -> int:
        return self.flat_next.shape[1] * self.flat_next.shape[2]


def build_transitions(problem: Problem) -> Transitions:
    mesh, vehicle = problem.mesh, problem.vehicle
    inputs = problem.lattice.inputs
    m, nf = len(mesh), mesh.n_fuel
    levels = mesh.fuel_levels
    sentinel = m * nf

    # successor positions do not depend on fuel: step from a full tank
    full = vehicle.tank_capacity
    next_node = np.full((m, len(inputs)), -1, dtype=np.int64)
    succ_pts, succ_at = [], []
    for i, p in enumerate(mesh.positions):
        s = State(Position(float(p[0]), float(p[1])), full)
        for j, u in enumerate(inputs):
            nxt = problem.step(s, u)
            if isinstance(nxt, State):
                succ_pts.append(nxt.position)
                succ_at.append((i, j))
    if succ_pts:
        nn = mesh.nearest_nodes(np.array(succ_pts))
        rows, cols = np.array(succ_at).T
        next_node[rows, cols] = nn

    next_fuel = np.full((len(inputs), nf), -1, dtype=np.int64)
    for j, u in enumerate(inputs):
        burn = fuel_rate(u.u1, u.u2, vehicle) * problem.dt
        for f, level in enumerate(levels):
            remaining = float(level) - burn
            if remaining >= 0:
                next_fuel[j, f] = nearest_fuel(remaining, mesh)

    flat = next_node.T[:, :, None] * nf + next_fuel[:, None, :]
    invalid = (next_node.T[:, :, None] < 0) | (next_fuel[:, None, :] < 0)
    flat = np.where(invalid, sentinel, flat).astype(np.int32 if sentinel < 2**31 else np.int64)

    terminal = np.array([in_terminal(p, problem.env.terminal) for p in mesh.positions])
    port_nodes = np.array([i for i, p in enumerate(mesh.positions)
                           if port_at(p, problem.env.ports) is not None and not terminal[i]],
                          dtype=np.int64)
    amount = problem.refuel_amount
    if amount is None:
        amount = vehicle.refuel_amount(problem.dt)
    refuel_fuel = np.asarray(
        nearest_fuel(np.minimum(levels + amount, vehicle.tank_capacity), mesh), dtype=np.int64)
    return Transitions(flat, terminal, port_nodes, refuel_fuel)


@dataclass
class Solution:
    value: np.ndarray    # (N+1, M, F); +inf where the terminal set is unreachable
    policy: np.ndarray   # (N, M, F) candidate index, ABSORBED or NO_INPUT
    lam: float
    horizon: int
    problem: Problem = field(repr=False)

    def start_index(self, fuel: float) -> tuple[int, int]:
        mesh = self.problem.mesh
        return mesh.nearest_node(self.problem.env.start), nearest_fuel(fuel, mesh)

    def start_value(self, fuel: Optional[float] = None) -> float:
        if fuel is None:
            fuel = self.problem.env.start_fuel
        node, fi = self.start_index(fuel)
        return float(self.value[0, node, fi])

    def diagnose(self, fuel: Optional[float] = None) -> Optional[str]:
        """None when the start state can reach the terminal set, else a message."""
        v = self.start_value(fuel)
        if math.isfinite(v):
            return None
        return (f"destination unreachable within {self.horizon} steps "
                f"from start {tuple(self.problem.env.start)}")


def solve(problem: Problem, lam: float, horizon: int,
          transitions: Optional[Transitions] = None,
          cache_dir: Optional[Path] = None) -> Solution:
    """Backward induction for ``horizon`` steps at scalarization weight ``lam``."""
    params = problem.stage_params(lam)
    cache_dir = cache_dir or (Path(os.environ["VOYAGE_CACHE_DIR"])
                              if os.environ.get("VOYAGE_CACHE_DIR") else None)
    path = None
    if cache_dir is not None:
        path = cache_dir / f"value-{problem.digest()}-{lam!r}-{horizon}.npz"
        if path.exists():
            with np.load(path) as data:
                if int(data["version"]) == VALUE_CACHE_VERSION:
                    return Solution(data["value"], data["policy"], lam, horizon, problem)

    tr = transitions if transitions is not None else build_transitions(problem)
    m, nf = len(problem.mesh), problem.mesh.n_fuel
    n_lattice = len(problem.lattice)
    refuel_idx = n_lattice

    # per-input costs go through stage_cost so sums match the oracle bit for bit
    move_cost = np.array([stage_cost(u, False, params, problem.vehicle)
                          for u in problem.lattice.inputs])
    refuel_cost = stage_cost(REFUEL, False, params, problem.vehicle)

    value = np.empty((horizon + 1, m, nf))
    policy = np.empty((horizon, m, nf), dtype=np.int8)
    value[horizon] = np.inf
    value[horizon, tr.terminal] = 0.0
    ext = np.empty(m * nf + 1)
    ext[-1] = np.inf

    for k in range(horizon - 1, -1, -1):
        nxt = value[k + 1]
        ext[:-1] = nxt.ravel()
        best = np.full((m, nf), np.inf)
        arg = np.full((m, nf), NO_INPUT, dtype=np.int8)
        for j in range(n_lattice):
            cand = move_cost[j] + ext[tr.flat_next[j]]
            better = cand < best
            best[better] = cand[better]
            arg[better] = j
        if len(tr.port_nodes):
            cand = refuel_cost + nxt[tr.port_nodes][:, tr.refuel_fuel]
            sub_best = best[tr.port_nodes]
            better = cand < sub_best
            sub_best[better] = cand[better]
            sub_arg = arg[tr.port_nodes]
            sub_arg[better] = refuel_idx
            best[tr.port_nodes] = sub_best
            arg[tr.port_nodes] = sub_arg
        best[tr.terminal] = 0.0
        arg[tr.terminal] = ABSORBED
        value[k] = best
        policy[k] = arg

    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(path, version=VALUE_CACHE_VERSION, value=value, policy=policy)
    return Solution(value, policy, lam, horizon, problem)


# ---------------------------------------------------------------------------
# rollout

@dataclass(frozen=True)
class TrajectoryStep:
    k: int
    state: State
    control: ControlInput
    fuel_burned: float
    refueled: bool
    fallback: bool = False


@dataclass
class Trajectory:
    steps: list[TrajectoryStep]
    final: State
    dt: float
    arrived: bool
    arrival_step: Optional[int]
    total_cost: float
    diagnostic: Optional[str] = None

    @property
    def trip_time(self) -> float:
        n = self.arrival_step if self.arrival_step is not None else len(self.steps)
        return n * self.dt

    @property
    def total_fuel(self) -> float:
        return float(sum(s.fuel_burned for s in self.steps))

    @property
    def states(self) -> list[State]:
        return [s.state for s in self.steps] + [self.final]


def rollout(solution: Solution, start: Optional[State] = None) -> Trajectory:
    """Simulate the stored policy forward with exact (unsnapped) dynamics.

    When the stored input is infeasible for the exact state, the feasible
    candidate minimizing stage cost plus snapped cost-to-go is used instead.
    """
    problem = solution.problem
    env, mesh, vehicle = problem.env, problem.mesh, problem.vehicle
    if start is None:
        start = State(env.start, env.start_fuel)
    params = problem.stage_params(solution.lam)
    candidates = problem.candidates
    steps: list[TrajectoryStep] = []
    s = start
    total = 0.0

    node, fi = mesh.nearest_node(s.position), nearest_fuel(s.fuel, mesh)
    if in_terminal(s.position, env.terminal):
        return Trajectory(steps, s, problem.dt, True, 0, 0.0)
    if not math.isfinite(solution.value[0, node, fi]):
        return Trajectory(steps, s, problem.dt, False, None, math.inf,
                          solution.diagnose(s.fuel))

    for k in range(solution.horizon):
        if in_terminal(s.position, env.terminal):
            return Trajectory(steps, s, problem.dt, True, k, total)
        node, fi = mesh.nearest_node(s.position), nearest_fuel(s.fuel, mesh)
        a = int(solution.policy[k, node, fi])
        nxt = problem.step(s, candidates[a]) if a >= 0 else Infeasible("no stored input")
        used_fallback = False
        if not isinstance(nxt, State):
            a, nxt = _fallback(solution, k, s, params)
            used_fallback = True
            if a is None:
                return Trajectory(steps, s, problem.dt, False, None, math.inf,
                                  f"no feasible input at step {k} from {tuple(s.position)}, "
                                  f"fuel {s.fuel:.3f} Gal")
        u = candidates[a]
        burned = 0.0 if u.refuel else fuel_rate(u.u1, u.u2, vehicle) * problem.dt
        total += stage_cost(u, False, params, vehicle)
        steps.append(TrajectoryStep(k, s, u, burned, u.refuel, used_fallback))
        s = nxt

    arrived = in_terminal(s.position, env.terminal)
    return Trajectory(steps, s, problem.dt, arrived,
                      solution.horizon if arrived else None,
                      total if arrived else math.inf,
                      None if arrived else f"terminal set not reached in {solution.horizon} steps")


def planned_trajectory(solution: Solution, fuel: Optional[float] = None,
                       transitions: Optional[Transitions] = None) -> Trajectory:
    """Follow the stored policy on the mesh itself (snapped positions and fuel).

    This is the trajectory the optimizer prices: its cost equals the value
    at the snapped start state, and its fuel and time are the two objective
    components being traded off.
    """
    problem = solution.problem
    mesh = problem.mesh
    tr = transitions if transitions is not None else build_transitions(problem)
    if fuel is None:
        fuel = problem.env.start_fuel
    node, fi = solution.start_index(fuel)
    params = problem.stage_params(solution.lam)
    candidates = problem.candidates
    nf = mesh.n_fuel

    def state(n: int, f: int) -> State:
        p = mesh.positions[n]
        return State(Position(float(p[0]), float(p[1])), float(mesh.fuel_levels[f]))

    steps: list[TrajectoryStep] = []
    total = 0.0
    if not math.isfinite(solution.value[0, node, fi]):
        return Trajectory(steps, state(node, fi), problem.dt, False, None, math.inf,
                          solution.diagnose(fuel))
    for k in range(solution.horizon):
        if tr.terminal[node]:
            return Trajectory(steps, state(node, fi), problem.dt, True, k, total)
        a = int(solution.policy[k, node, fi])
        u = candidates[a]
        total += stage_cost(u, False, params, problem.vehicle)
        if u.refuel:
            steps.append(TrajectoryStep(k, state(node, fi), u, 0.0, True))
            fi = int(tr.refuel_fuel[fi])
            continue
        burned = fuel_rate(u.u1, u.u2, problem.vehicle) * problem.dt
        steps.append(TrajectoryStep(k, state(node, fi), u, burned, False))
        node, fi = divmod(int(tr.flat_next[a, node, fi]), nf)
    return Trajectory(steps, state(node, fi), problem.dt, True, solution.horizon, total)


def _fallback(solution: Solution, k: int, s: State, params: StageCostParams):
    problem = solution.problem
    mesh = problem.mesh
    best_a, best_state, best_c = None, None, math.inf
    for a, u in enumerate(problem.candidates):
        nxt = problem.step(s, u)
        if not isinstance(nxt, State):
            continue
        v = solution.value[k + 1, mesh.nearest_node(nxt.position), nearest_fuel(nxt.fuel, mesh)]
        c = stage_cost(u, False, params, problem.vehicle) + v
        if c < best_c:
            best_a, best_state, best_c = a, nxt, c
    return best_a, best_state


# ---------------------------------------------------------------------------
# verification oracle

def brute_force_solve(problem: Problem, lam: float, horizon: int) -> np.ndarray:
    """Exact optimal cost per (node, fuel index) by enumerating every input sequence.

    Uses linear-scan nearest-neighbor snapping and no Bellman recursion.
    Intended for tiny instances only.
    """
    candidates = problem.candidates
    if len(candidates) ** horizon > BRUTE_FORCE_LIMIT:
        raise ValueError(f"{len(candidates)}^{horizon} sequences exceeds the enumeration limit")
    mesh, env = problem.mesh, problem.env
    params = problem.stage_params(lam)
    positions = mesh.positions
    terminal = [in_terminal(p, env.terminal) for p in positions]
    succ: dict = {}

    def transition(node: int, fi: int, a: int):
        key = (node, fi, a)
        if key not in succ:
            p = positions[node]
            s = State(Position(float(p[0]), float(p[1])), float(mesh.fuel_levels[fi]))
            nxt = problem.step(s, candidates[a])
            if isinstance(nxt, State):
                succ[key] = (linear_scan_nearest(nxt.position, positions),
                             nearest_fuel(nxt.fuel, mesh),
                             stage_cost(candidates[a], False, params, problem.vehicle))
            else:
                succ[key] = None
        return succ[key]

    def best_from(node: int, fi: int, steps_left: int) -> float:
        # enumerate all continuations; terminal nodes absorb at zero cost
        if terminal[node]:
            return 0.0
        if steps_left == 0:
            return math.inf
        best = math.inf
        for a in range(len(candidates)):
            t = transition(node, fi, a)
            if t is None:
                continue
            c = t[2] + best_from(t[0], t[1], steps_left - 1)
            if c < best:
                best = c
        return best

    out = np.empty((len(mesh), mesh.n_fuel))
    for node in range(len(mesh)):
        for fi in range(mesh.n_fuel):
            out[node, fi] = best_from(node, fi, horizon)
    return out
