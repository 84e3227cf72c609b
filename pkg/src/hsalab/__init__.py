"""Hierarchical spatial attention (HSA) on a tabular pegs-on-disks grid.

Modules:
    grid_world       ground MDP: m^3 grid, n pegs, n disks, clock termination
    attention        octant-summary observations and variant action encodings
    learning         tabular value store, Sarsa / Q-learning / stage-reward rules, training loop
    oracle           exact backward induction and the Q*-irrelevance checker
    sensor_geometry  rigid transform, crop and height-map projection
    hsa_schedule     zoom/offset schedules, sample-count arithmetic, top-n scoring
    experiments      config-driven learning curves with deterministic CSV output
"""

from .grid_world import ConfigError, GridConfig, GroundState, Loc

__version__ = "0.1.0"
__all__ = ["ConfigError", "GridConfig", "GroundState", "Loc"]
