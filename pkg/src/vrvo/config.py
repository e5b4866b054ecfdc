from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from functools import cached_property
from typing import Optional

from .geom2d import ConvexCell


@dataclass(frozen=True)
class VrvoConfig:
    """Tunables shared by the controller, the deadlock layer and the simulator."""

    sigma: float = 1.0
    apex_mode: str = "rvo"
    tau: Optional[float] = None
    si_slow_radius: float = 1.0
    deadlock_patience: int = 10
    sensing_radius: float = 5.0
    eps_p: float = 0.05
    eps_v: float = 0.01
    workspace_half: float = 50.0
    obstacle_decel: str = "obstacle"
    axis_decel: str = "directional"
    max_halvings: int = 3
    orca_tau: float = 2.0

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError("sigma must be positive")
        if self.apex_mode not in ("rvo", "vo_center"):
            raise ValueError(f"apex_mode must be 'rvo' or 'vo_center', got {self.apex_mode!r}")
        if self.tau is not None and not (self.tau > 0.0):
            raise ValueError("tau must be positive when given")
        if not self.si_slow_radius >= 0.0:
            raise ValueError("si_slow_radius must be non-negative")
        if not (isinstance(self.deadlock_patience, int) and self.deadlock_patience >= 1):
            raise ValueError("deadlock_patience must be a positive integer")
        if not self.sensing_radius > 0.0:
            raise ValueError("sensing_radius must be positive")
        if not (self.eps_p > 0.0 and self.eps_v > 0.0):
            raise ValueError("eps_p and eps_v must be positive")
        if not (self.workspace_half > 0.0 and math.isfinite(self.workspace_half)):
            raise ValueError("workspace_half must be positive and finite")
        if self.obstacle_decel not in ("obstacle", "agent"):
            raise ValueError("obstacle_decel must be 'obstacle' or 'agent'")
        if self.axis_decel not in ("directional", "independent"):
            raise ValueError("axis_decel must be 'directional' or 'independent'")
        if not (isinstance(self.max_halvings, int) and self.max_halvings >= 0):
            raise ValueError("max_halvings must be a non-negative integer")
        if not self.orca_tau > 0.0:
            raise ValueError("orca_tau must be positive")

    @cached_property
    def workspace(self) -> ConvexCell:
        return ConvexCell.square(self.workspace_half)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in fields(cls)}
