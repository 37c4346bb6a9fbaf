"""State and input meshes: Latin-hypercube positions, uniform fuel grid,
uniform input lattice, and exact nearest-neighbor lookup."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .dynamics import ControlInput, VehicleParams
from .environment import Bounds, ConfigError, EnvironmentSpec, check_keys, number

logger = logging.getLogger(__name__)

MESH_CACHE_VERSION = 1
_KD_CANDIDATES = 8
_FUEL_EPS = 1e-9


@dataclass(frozen=True)
class Discretization:
    mesh_size: int = 7500
    seed: int = 42
    fuel_step: float = 0.1       # Gal
    input_step: float = 10.67    # km/hr
    dt_min: float = 15.0
    horizon: int = 65
    refuel_per_step: float = 8.0  # Gal per docked step

    @property
    def dt(self) -> float:
        return self.dt_min / 60.0

    def validate(self, vehicle: VehicleParams) -> None:
        if self.mesh_size < 1:
            raise ConfigError("discretization.mesh_size", "must be >= 1")
        if self.horizon < 0:
            raise ConfigError("discretization.horizon", "must be >= 0")
        for name in ("fuel_step", "input_step", "dt_min", "refuel_per_step"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"discretization.{name}", "must be > 0")
        levels = vehicle.tank_capacity / self.fuel_step
        if abs(levels - round(levels)) > 1e-6:
            raise ConfigError("discretization.fuel_step", "must divide tank_capacity")
        half = vehicle.u_max / self.input_step
        if abs(half - round(half)) > 1e-2:
            raise ConfigError("discretization.input_step", "must divide u_max")
        if abs(self.refuel_per_step - vehicle.refuel_amount(self.dt)) > self.fuel_step:
            raise ConfigError("discretization.refuel_per_step",
                              "inconsistent with vehicle.refuel_rate * dt")


def discretization_from_doc(doc: dict) -> Discretization:
    sec = doc.get("discretization", {})
    if not isinstance(sec, dict):
        raise ConfigError("discretization", "must be an object")
    names = ("mesh_size", "seed", "fuel_step", "input_step", "dt_min", "horizon",
             "refuel_per_step")
    check_keys(sec, "discretization", (), optional=names)
    kw = {}
    for k in sec:
        v = number(sec, "discretization", k)
        if k in ("mesh_size", "seed", "horizon"):
            if v != int(v):
                raise ConfigError(f"discretization.{k}", "must be an integer")
            v = int(v)
        kw[k] = v
    return Discretization(**kw)


# ---------------------------------------------------------------------------
# input lattice

@dataclass(frozen=True)
class InputLattice:
    u1_levels: np.ndarray
    u2_levels: np.ndarray

    @classmethod
    def uniform(cls, u_max: float, step: float) -> "InputLattice":
        half = int(round(u_max / step))
        levels = np.arange(-half, half + 1, dtype=float) * step
        levels[0], levels[-1] = -u_max, u_max
        levels[half] = 0.0
        return cls(levels, levels.copy())

    @property
    def inputs(self) -> list[ControlInput]:
        """Lattice inputs in index order (u1 outer, u2 inner)."""
        return [ControlInput(float(a), float(b)) for a in self.u1_levels for b in self.u2_levels]

    @property
    def array(self) -> np.ndarray:
        return np.array([[u.u1, u.u2] for u in self.inputs], dtype=float).reshape(-1, 2)

    def __len__(self):
        return len(self.u1_levels) * len(self.u2_levels)


# ---------------------------------------------------------------------------
# positions

def lhs_positions(n: int, bounds: Bounds, seed: int) -> np.ndarray:
    """Plain Latin-hypercube sample of ``n`` points, shape (n, 2).

    Each point is uniform within its stratum; axes are permuted
    independently.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    out = np.empty((n, 2))
    for axis, (lo, hi) in enumerate(((bounds.x1_min, bounds.x1_max),
                                     (bounds.x2_min, bounds.x2_max))):
        width = (hi - lo) / n
        strata = rng.permutation(n)
        left = lo + strata * width
        right = lo + (strata + 1) * width
        x = left + rng.random(n) * width
        # keep half-open strata under rounding
        over = x >= right
        x[over] = np.nextafter(right[over], -np.inf)
        out[:, axis] = np.maximum(x, left)
    return out


@dataclass(frozen=True, eq=False)
class StateMesh:
    positions: np.ndarray      # (M, 2); first n_lhs rows are the LHS sample
    fuel_levels: np.ndarray    # (F,)
    fuel_step: float
    n_lhs: int
    seed: int
    bounds: Bounds
    index: cKDTree = field(init=False, repr=False)

    def __post_init__(self):
        self.positions.setflags(write=False)
        self.fuel_levels.setflags(write=False)
        object.__setattr__(self, "index", cKDTree(self.positions))

    def __len__(self):
        return len(self.positions)

    @property
    def n_fuel(self) -> int:
        return len(self.fuel_levels)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.positions).tobytes())
        h.update(np.ascontiguousarray(self.fuel_levels).tobytes())
        return h.hexdigest()[:16]

    def nearest_nodes(self, points: np.ndarray) -> np.ndarray:
        """Exact nearest mesh index for each row of ``points`` (ties: lowest index)."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        m = len(self.positions)
        k = min(_KD_CANDIDATES, m)
        _, cand = self.index.query(pts, k=k)
        cand = np.asarray(cand).reshape(len(pts), k)
        # re-rank with the same arithmetic as the linear scan
        cx = self.positions[cand, 0]
        cy = self.positions[cand, 1]
        dx = cx - pts[:, :1]
        dy = cy - pts[:, 1:]
        d2 = dx * dx + dy * dy
        best = d2.min(axis=1, keepdims=True)
        masked = np.where(d2 == best, cand, m)
        result = masked.min(axis=1)
        if k < m:
            # every candidate tied: the true tie set may be larger than k
            crowded = np.flatnonzero((d2 == best).all(axis=1))
            for r in crowded:
                result[r] = linear_scan_nearest(pts[r], self.positions)
        return result.astype(np.int64)

    def nearest_node(self, p: Sequence[float]) -> int:
        return int(self.nearest_nodes(np.asarray(p, dtype=float))[0])

    def nearest_fuel(self, f) -> np.ndarray | int:
        return nearest_fuel(f, self)


def linear_scan_nearest(p: Sequence[float], positions: np.ndarray) -> int:
    """Reference nearest-neighbor by exhaustive scan; ties go to the lowest index."""
    dx = positions[:, 0] - p[0]
    dy = positions[:, 1] - p[1]
    return int(np.argmin(dx * dx + dy * dy))


def nearest_node(p: Sequence[float], mesh: StateMesh) -> int:
    return mesh.nearest_node(p)


def nearest_fuel(f, mesh: StateMesh):
    """Nearest fuel-grid index; exact midpoints round toward more fuel."""
    idx = np.floor(np.asarray(f, dtype=float) / mesh.fuel_step + 0.5 + _FUEL_EPS)
    idx = np.clip(idx, 0, mesh.n_fuel - 1).astype(np.int64)
    return int(idx) if idx.ndim == 0 else idx


def fuel_grid(capacity: float, step: float) -> np.ndarray:
    count = int(round(capacity / step)) + 1
    levels = np.arange(count, dtype=float) * step
    levels[-1] = capacity
    return levels


def build_mesh(positions: np.ndarray, capacity: float, fuel_step: float,
               bounds: Bounds, seed: int = 0,
               extra: Iterable[Sequence[float]] = ()) -> StateMesh:
    """Mesh from explicit positions plus extra nodes not already present."""
    pts = [tuple(map(float, p)) for p in np.asarray(positions, dtype=float).reshape(-1, 2)]
    n_base = len(pts)
    seen = set(pts)
    for p in extra:
        p = (float(p[0]), float(p[1]))
        if p not in seen:
            seen.add(p)
            pts.append(p)
    arr = np.array(pts, dtype=float).reshape(-1, 2)
    if len(seen) != len(arr):
        raise ValueError("mesh positions must be pairwise distinct")
    for p in arr:
        if not bounds.contains(p):
            raise ValueError(f"mesh position {tuple(p)} outside bounds")
    return StateMesh(arr, fuel_grid(capacity, fuel_step), fuel_step, n_base, seed, bounds)


def anchor_points(env: EnvironmentSpec) -> list[tuple[float, float]]:
    """Start, port centers and terminal center, which must be mesh nodes."""
    pts = [tuple(env.start)]
    pts += [tuple(p.position) for p in env.ports]
    pts.append(tuple(env.terminal.center))
    return pts


def _cache_dir() -> Optional[Path]:
    d = os.environ.get("VOYAGE_CACHE_DIR")
    return Path(d) if d else None


def mesh_cache_key(n: int, seed: int, bounds: Bounds, extra: Sequence, capacity: float,
                   fuel_step: float) -> str:
    payload = json.dumps({"v": MESH_CACHE_VERSION, "n": n, "seed": seed,
                          "bounds": list(bounds), "extra": [list(p) for p in extra],
                          "capacity": capacity, "fuel_step": fuel_step}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:20]


def lhs_mesh(env: EnvironmentSpec, vehicle: VehicleParams, disc: Discretization,
             cache_dir: Optional[Path] = None) -> StateMesh:
    """LHS mesh augmented with the scenario anchor points.

    With ``VOYAGE_CACHE_DIR`` set (or ``cache_dir`` given) the positions are
    read from / written to ``mesh-<key>.npz``.
    """
    extra = anchor_points(env)
    cache_dir = cache_dir or _cache_dir()
    key = mesh_cache_key(disc.mesh_size, disc.seed, env.bounds, extra,
                         vehicle.tank_capacity, disc.fuel_step)
    path = cache_dir / f"mesh-{key}.npz" if cache_dir else None
    if path is not None and path.exists():
        with np.load(path) as data:
            if int(data["version"]) == MESH_CACHE_VERSION:
                logger.debug("mesh cache hit %s", path)
                base = data["positions"][: int(data["n_lhs"])]
                return build_mesh(base, vehicle.tank_capacity, disc.fuel_step,
                                  env.bounds, disc.seed, extra)
    base = lhs_positions(disc.mesh_size, env.bounds, disc.seed)
    mesh = build_mesh(base, vehicle.tank_capacity, disc.fuel_step, env.bounds, disc.seed, extra)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path, version=MESH_CACHE_VERSION, positions=mesh.positions,
                 n_lhs=mesh.n_lhs, seed=disc.seed)
    return mesh
