"""Steady-state USV motion model and cubic fuel-burn law.

Speeds are km/hr, fuel is gallons, time is hours. The burn coefficient
``beta`` is applied to speeds in km/hr and yields Gal/hr.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .environment import (ConfigError, EnvironmentSpec, Position, check_keys,
                          current_at, number, port_at)

SEAWATER_DENSITY = 1025.0  # kg/m^3


@dataclass(frozen=True)
class VehicleParams:
    c_d: float = 0.4
    a_f: float = 6.0
    alpha: float = 1.2e-7
    rho: float = SEAWATER_DENSITY
    tank_capacity: float = 8.0
    u_max: float = 21.33
    refuel_rate: float = 0.533  # Gal/min
    beta: float = field(init=False)

    def __post_init__(self):
        for name in ("c_d", "a_f", "alpha", "rho", "tank_capacity", "u_max", "refuel_rate"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"vehicle.{name}", "must be finite and > 0")
        object.__setattr__(self, "beta", 0.5 * self.alpha * self.rho * self.c_d * self.a_f)

    @classmethod
    def with_beta(cls, beta: float, **kw) -> "VehicleParams":
        """Build params whose derived burn coefficient equals ``beta``."""
        rho = kw.pop("rho", SEAWATER_DENSITY)
        c_d = kw.pop("c_d", 0.4)
        a_f = kw.pop("a_f", 6.0)
        return cls(c_d=c_d, a_f=a_f, rho=rho, alpha=2.0 * beta / (rho * c_d * a_f), **kw)

    def refuel_amount(self, dt: float) -> float:
        """Gallons delivered by one docked step of ``dt`` hours."""
        return self.refuel_rate * 60.0 * dt


class State(NamedTuple):
    position: Position
    fuel: float


class ControlInput(NamedTuple):
    u1: float
    u2: float
    refuel: bool = False


REFUEL = ControlInput(0.0, 0.0, True)


class Infeasible(NamedTuple):
    """A forbidden transition; carries the reason."""
    reason: str

    def __bool__(self):
        return False


def fuel_rate(u1: float, u2: float, params: VehicleParams) -> float:
    """Burn rate in Gal/hr for commanded water-relative speeds in km/hr."""
    return params.beta * (u1 * u1 + u2 * u2) ** 1.5


def is_stationary_port_state(s: State, u: ControlInput, env: EnvironmentSpec) -> bool:
    return u.u1 == 0 and u.u2 == 0 and port_at(s.position, env.ports) is not None


def step(s: State, u: ControlInput, dt: float, env: EnvironmentSpec,
         params: VehicleParams, refuel_amount: Optional[float] = None):
    """Advance one forward-difference step.

    Returns the successor State, or an Infeasible value when the tank would
    go negative, the vessel would leave the bounds, or a refuel is requested
    away from a port. ``refuel_amount`` defaults to ``refuel_rate * dt``.
    """
    if u.refuel:
        if not is_stationary_port_state(s, u, env):
            return Infeasible("refuel requested while not stationary at a port")
        if refuel_amount is None:
            refuel_amount = params.refuel_amount(dt)
        # moored: no drift while docked
        return State(s.position, min(s.fuel + refuel_amount, params.tank_capacity))

    v_e, v_n = current_at(s.position, env.current)
    x1 = s.position[0] + (u.u1 + v_e) * dt
    x2 = s.position[1] + (u.u2 + v_n) * dt
    fuel = s.fuel - fuel_rate(u.u1, u.u2, params) * dt
    if fuel < 0:
        return Infeasible(f"fuel exhausted ({fuel:.4f} Gal)")
    if not env.bounds.contains((x1, x2)):
        return Infeasible(f"left bounds at ({x1:.3f}, {x2:.3f})")
    return State(Position(x1, x2), fuel)


def vehicle_from_doc(doc: dict) -> VehicleParams:
    if "vehicle" not in doc:
        return VehicleParams()
    sec = doc["vehicle"]
    if not isinstance(sec, dict):
        raise ConfigError("vehicle", "must be an object")
    keys = ("c_d", "a_f", "alpha", "rho", "tank_capacity", "u_max", "refuel_rate")
    check_keys(sec, "vehicle", (), optional=keys)
    return VehicleParams(**{k: number(sec, "vehicle", k) for k in sec})
