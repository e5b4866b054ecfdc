"""Decentralized multi-agent navigation with buffered Voronoi cells and RVO cones."""

from .braking import KinodynamicLimits, plan_braking, solve_axis
from .bvc import AgentState, Mode, ObstacleState, compute_bvc
from .config import VrvoConfig
from .controller import ControlInput, Model, step_agent
from .geom2d import ConvexCell, HalfPlane, Vec2
from .sim import RunMetrics, RunResult, Scenario, builtin, builtin_scenarios, run

__all__ = [
    "AgentState", "ControlInput", "ConvexCell", "HalfPlane", "KinodynamicLimits", "Mode", "Model",
    "ObstacleState", "RunMetrics", "RunResult", "Scenario", "Vec2", "VrvoConfig", "builtin",
    "builtin_scenarios", "compute_bvc", "plan_braking", "run", "solve_axis", "step_agent",
]
__version__ = "0.1.0"
