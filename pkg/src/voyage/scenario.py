"""Whole-scenario configuration: environment, vehicle and discretization."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from .dp_solver import Problem
from .dynamics import VehicleParams, vehicle_from_doc
from .environment import EnvironmentSpec, environment_from_doc, parse_config
from .gridgen import (Discretization, InputLattice, StateMesh,
                      discretization_from_doc, lhs_mesh)


def default_config_text() -> str:
    return resources.files("voyage").joinpath("data/default.json").read_text()


@dataclass(frozen=True)
class Scenario:
    env: EnvironmentSpec
    vehicle: VehicleParams
    disc: Discretization
    config_hash: str

    def lattice(self) -> InputLattice:
        return InputLattice.uniform(self.vehicle.u_max, self.disc.input_step)

    def mesh(self, cache_dir: Optional[Path] = None) -> StateMesh:
        return lhs_mesh(self.env, self.vehicle, self.disc, cache_dir)

    def problem(self, mesh: Optional[StateMesh] = None) -> Problem:
        return Problem(self.env, self.vehicle, mesh if mesh is not None else self.mesh(),
                       self.lattice(), self.disc.dt, self.disc.refuel_per_step)


def load_scenario(config_text: str) -> Scenario:
    """Parse and validate a complete scenario document."""
    doc = parse_config(config_text)
    env = environment_from_doc(doc)
    vehicle = vehicle_from_doc(doc)
    disc = discretization_from_doc(doc)
    disc.validate(vehicle)
    digest = hashlib.sha256(config_text.encode()).hexdigest()[:16]
    return Scenario(env, vehicle, disc, digest)


def default_scenario() -> Scenario:
    return load_scenario(default_config_text())
