import json

import numpy as np
import pytest

from voyage.dp_solver import Problem
from voyage.dynamics import VehicleParams
from voyage.environment import (Bounds, CurrentField, EnvironmentSpec, Port, Position,
                                TerminalRegion)
from voyage.gridgen import InputLattice, build_mesh
from voyage.scenario import default_config_text, load_scenario

_CRITERIA: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(name, passed, detail)."""
    def record(name: str, passed: bool, detail: str = "") -> bool:
        _CRITERIA.append((name, bool(passed), detail))
        print(f"[{'PASS' if passed else 'FAIL'}] {name}  {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


def toy_problem(*, terminal=(4.0, 4.0), terminal_radius=0.5, port=None, beta=0.1 / 16,
                speed_scale=0.0, start=(0.0, 0.0), n_fuel=3, refuel=None) -> Problem:
    """5x5 grid with 1 km spacing; a 4 km/hr axis move for 15 min lands on a node."""
    bounds = Bounds(0.0, 4.0, 0.0, 4.0)
    fuel_step = 0.1
    capacity = fuel_step * (n_fuel - 1)
    ports = () if port is None else (Port(Position(*port), 0.25),)
    env = EnvironmentSpec(bounds, CurrentField(speed_scale=speed_scale), ports,
                          TerminalRegion(Position(*terminal), terminal_radius),
                          Position(*start), capacity)
    vehicle = VehicleParams.with_beta(beta, tank_capacity=capacity, u_max=4.0,
                                      refuel_rate=capacity * 4 / 60)
    grid = np.array([(x, y) for x in range(5) for y in range(5)], dtype=float)
    mesh = build_mesh(grid, capacity, fuel_step, bounds)
    return Problem(env, vehicle, mesh, InputLattice.uniform(4.0, 4.0), 0.25,
                   capacity if refuel is None else refuel)


@pytest.fixture
def toy():
    return toy_problem


def scenario_with(**disc):
    doc = json.loads(default_config_text())
    doc["discretization"].update(disc)
    return load_scenario(json.dumps(doc))
