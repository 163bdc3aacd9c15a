"""Online multilevel force-directed layout of dynamic graphs."""

from .graph import BaseGraph, EditEvent, GraphError
from .coarsening import Coarsener, LevelChain, static_greedy_matching, priority
from .dynamics import PhysicsParams, MultilevelState
from .engine import Engine, RunConfig

__all__ = [
    "BaseGraph",
    "EditEvent",
    "GraphError",
    "Coarsener",
    "LevelChain",
    "static_greedy_matching",
    "priority",
    "PhysicsParams",
    "MultilevelState",
    "Engine",
    "RunConfig",
]
