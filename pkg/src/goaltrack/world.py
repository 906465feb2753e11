"""Kinematics of the UAV and the target, plus the tracking value function."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


def as_position(p) -> np.ndarray:
    """Coerce ``p`` to a float64 3-vector, rejecting non-finite or below-ground points."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"position must have 3 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"position must be finite, got {arr.tolist()}")
    if arr[2] < 0:
        raise ValueError(f"position z must be >= 0, got {arr[2]}")
    return arr


@dataclass(frozen=True)
class VelocityCommand:
    """Planned UAV velocity (m/s) held for ``duration`` seconds."""

    vx: float
    vy: float
    vz: float
    duration: float

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.vz], dtype=np.float64)


@dataclass(frozen=True)
class TargetState:
    position: np.ndarray
    heading: float
    speed: float

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError(f"target speed must be >= 0, got {self.speed}")


@dataclass(frozen=True)
class ValueParams:
    d_th: float = 2.0

    def __post_init__(self):
        if not self.d_th > 0:
            raise ValueError(f"d_th must be > 0, got {self.d_th}")


def distance(a, b) -> float:
    """Euclidean distance between two positions."""
    return float(np.linalg.norm(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)))


def sign(x: float) -> int:
    """Step sign used by the value function: 1 for ``x >= 0`` and -1 otherwise."""
    return 1 if x >= 0 else -1


def value(d: float, params: ValueParams) -> float:
    """Value of a UAV-target distance.

    Equal to 1 inside the threshold and to ``exp(d_th - d) - 1`` outside,
    written in the switched form so the two branches share one expression.
    """
    if d < 0:
        raise ValueError(f"distance must be >= 0, got {d}")
    gap = params.d_th - d
    return (-sign(gap) + 1) * (math.exp(min(gap, 0.0)) - 2) / 2 + 1


def value_array(d: np.ndarray, d_th: float) -> np.ndarray:
    """Vectorised :func:`value` over an array of distances."""
    d = np.asarray(d, dtype=np.float64)
    gap = d_th - d
    f = np.where(gap >= 0, 1.0, -1.0)
    # exp only matters where the switch is open; clip keeps the closed branch finite
    return (-f + 1) * (np.exp(np.minimum(gap, 0.0)) - 2) / 2 + 1


def step_uav(p, cmd: VelocityCommand, dt: float) -> np.ndarray:
    """Advance the UAV by ``dt`` seconds under ``cmd``."""
    if not 0 <= dt <= cmd.duration:
        raise ValueError(f"dt must lie in [0, {cmd.duration}], got {dt}")
    return np.asarray(p, dtype=np.float64) + cmd.vector * dt


def perturb_heading(s: TargetState, rng: np.random.Generator, max_turn: float) -> TargetState:
    """Resample the heading uniformly within ``max_turn`` of the current one."""
    turn = rng.uniform(-max_turn, max_turn) if max_turn > 0 else 0.0
    return replace(s, heading=s.heading + turn)


def step_target(
    s: TargetState,
    dt: float,
    rng: np.random.Generator | None = None,
    max_turn: float = math.pi / 4,
) -> TargetState:
    """Move the target ``dt`` seconds along its heading in the horizontal plane.

    Passing ``rng`` marks a TTI boundary: the heading is perturbed first.
    Without it the heading is held, which is how intra-TTI sub-steps advance.
    """
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    if rng is not None:
        s = perturb_heading(s, rng, max_turn)
    p = np.array(s.position, dtype=np.float64)
    step = s.speed * dt
    p[0] += step * math.cos(s.heading)
    p[1] += step * math.sin(s.heading)
    return replace(s, position=p)
