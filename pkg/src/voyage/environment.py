"""Ocean world: analytic current field, refueling ports, terminal region.

Positions are in km, current speeds in km/hr. All queries are pure
functions of frozen data.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Optional, Sequence

import numpy as np


class DomainError(ValueError):
    """A query position lies outside the declared environment bounds."""


class ConfigError(ValueError):
    """Scenario configuration is malformed or violates an invariant."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class Position(NamedTuple):
    x1: float
    x2: float


class Bounds(NamedTuple):
    x1_min: float
    x1_max: float
    x2_min: float
    x2_max: float

    def contains(self, p: Sequence[float]) -> bool:
        return (self.x1_min <= p[0] <= self.x1_max
                and self.x2_min <= p[1] <= self.x2_max)


@dataclass(frozen=True)
class CurrentField:
    gamma: float = 0.0556
    period: float = 100.0  # km
    speed_scale: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigError("current.gamma", "must be > 0")
        if not self.period > 0:
            raise ConfigError("current.period_km", "must be > 0")
        # speed_scale = 0 is allowed for a still-water field
        if not self.speed_scale >= 0:
            raise ConfigError("current.speed_scale", "must be >= 0")


@dataclass(frozen=True)
class Port:
    position: Position
    snap_radius: float


@dataclass(frozen=True)
class TerminalRegion:
    center: Position
    radius: float


@dataclass(frozen=True)
class EnvironmentSpec:
    bounds: Bounds
    current: CurrentField
    ports: tuple[Port, ...]
    terminal: TerminalRegion
    start: Position
    start_fuel: float
    port_array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        b = self.bounds
        if not b.x1_min < b.x1_max:
            raise ConfigError("bounds", "x1_min must be < x1_max")
        if not b.x2_min < b.x2_max:
            raise ConfigError("bounds", "x2_min must be < x2_max")
        if not b.contains(self.start):
            raise ConfigError("start", f"{tuple(self.start)} outside bounds")
        if not self.start_fuel >= 0:
            raise ConfigError("start.fuel", "must be >= 0")
        for i, port in enumerate(self.ports):
            if not port.snap_radius > 0:
                raise ConfigError(f"ports[{i}].snap_radius", "must be > 0")
            if not b.contains(port.position):
                raise ConfigError(f"ports[{i}]", "outside bounds")
        if not self.terminal.radius > 0:
            raise ConfigError("terminal.radius", "must be > 0")
        if not b.contains(self.terminal.center):
            raise ConfigError("terminal", "center outside bounds")
        arr = np.array([[p.position.x1, p.position.x2, p.snap_radius]
                        for p in self.ports], dtype=float).reshape(-1, 3)
        object.__setattr__(self, "port_array", arr)


def current_components(x1, x2, current: CurrentField):
    """Vectorized (v_e, v_n) for scalar or array coordinates."""
    k = 2.0 * np.pi / current.period
    g = current.gamma
    s = current.speed_scale
    v_e = s * (g * np.sin(k * x1) - g * np.sin(k * x2))
    v_n = s * (g / 80.0 * x2 + 1.0 / 9.0) + 0.0 * x1
    return v_e, v_n


def current_at(p: Sequence[float], current: CurrentField,
               bounds: Optional[Bounds] = None) -> tuple[float, float]:
    """Current velocity (v_e, v_n) in km/hr at position ``p``.

    Raises DomainError if ``bounds`` is given and ``p`` lies outside it.
    """
    if bounds is not None and not bounds.contains(p):
        raise DomainError(f"position {tuple(p)} outside {tuple(bounds)}")
    v_e, v_n = current_components(float(p[0]), float(p[1]), current)
    return float(v_e), float(v_n)


def current_stats(current: CurrentField, bounds: Bounds,
                  n_samples: int = 40_000) -> tuple[float, float]:
    """Mean and max current speed over a uniform square grid of ``n_samples`` points."""
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    side = int(round(math.sqrt(n_samples)))
    x1 = np.linspace(bounds.x1_min, bounds.x1_max, side)
    x2 = np.linspace(bounds.x2_min, bounds.x2_max, side)
    g1, g2 = np.meshgrid(x1, x2, indexing="ij")
    v_e, v_n = current_components(g1, g2, current)
    speed = np.hypot(v_e, v_n)
    return float(speed.mean()), float(speed.max())


def in_terminal(p: Sequence[float], terminal: TerminalRegion) -> bool:
    # closed disk; compare squared distances to keep the boundary exact
    dx = p[0] - terminal.center[0]
    dy = p[1] - terminal.center[1]
    return dx * dx + dy * dy <= terminal.radius * terminal.radius


def port_at(p: Sequence[float], ports: Sequence[Port]) -> Optional[int]:
    """Index of the nearest port whose closed snap disk contains ``p``.

    Ties go to the lowest index.
    """
    best, best_d2 = None, math.inf
    for i, port in enumerate(ports):
        dx = p[0] - port.position[0]
        dy = p[1] - port.position[1]
        d2 = dx * dx + dy * dy
        if d2 <= port.snap_radius * port.snap_radius and d2 < best_d2:
            best, best_d2 = i, d2
    return best


# ---------------------------------------------------------------------------
# configuration

ENV_SECTIONS = ("bounds", "current", "ports", "terminal", "start")
ALL_SECTIONS = ENV_SECTIONS + ("vehicle", "discretization")


def _section(doc: dict, name: str, keys: Sequence[str], optional=()) -> dict:
    if name not in doc:
        raise ConfigError(name, "missing required section")
    sec = doc[name]
    if not isinstance(sec, dict):
        raise ConfigError(name, "must be an object")
    check_keys(sec, name, keys, optional)
    return sec


def check_keys(sec: dict, path: str, keys: Sequence[str], optional=()) -> None:
    for k in sec:
        if k not in keys and k not in optional:
            raise ConfigError(f"{path}.{k}", "unknown key")
    for k in keys:
        if k not in sec:
            raise ConfigError(f"{path}.{k}", "missing required field")


def number(sec: dict, path: str, key: str) -> float:
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{path}.{key}", "must be finite")
    return float(v)


def parse_config(config_text: str) -> dict[str, Any]:
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"parse error: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "top level must be an object")
    for k in doc:
        if k not in ALL_SECTIONS:
            raise ConfigError(k, "unknown section")
    return doc


def environment_from_doc(doc: dict[str, Any]) -> EnvironmentSpec:
    b = _section(doc, "bounds", ("x1_min", "x1_max", "x2_min", "x2_max"))
    bounds = Bounds(*(number(b, "bounds", k)
                      for k in ("x1_min", "x1_max", "x2_min", "x2_max")))

    c = _section(doc, "current", ("gamma", "period_km", "speed_scale"))
    current = CurrentField(number(c, "current", "gamma"),
                           number(c, "current", "period_km"),
                           number(c, "current", "speed_scale"))

    if "ports" not in doc:
        raise ConfigError("ports", "missing required section")
    if not isinstance(doc["ports"], list):
        raise ConfigError("ports", "must be a list")
    ports = []
    for i, item in enumerate(doc["ports"]):
        path = f"ports[{i}]"
        if not isinstance(item, dict):
            raise ConfigError(path, "must be an object")
        check_keys(item, path, ("x1", "x2", "snap_radius"))
        ports.append(Port(Position(number(item, path, "x1"), number(item, path, "x2")),
                          number(item, path, "snap_radius")))

    t = _section(doc, "terminal", ("x1", "x2", "radius"))
    terminal = TerminalRegion(Position(number(t, "terminal", "x1"),
                                       number(t, "terminal", "x2")),
                              number(t, "terminal", "radius"))

    s = _section(doc, "start", ("x1", "x2", "fuel"))
    return EnvironmentSpec(
        bounds=bounds,
        current=current,
        ports=tuple(ports),
        terminal=terminal,
        start=Position(number(s, "start", "x1"), number(s, "start", "x2")),
        start_fuel=number(s, "start", "fuel"),
    )


def load_environment(config_text: str) -> EnvironmentSpec:
    """Parse and validate the environment sections of a scenario document."""
    return environment_from_doc(parse_config(config_text))
