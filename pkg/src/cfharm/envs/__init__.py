"""Benchmark environments: rover U-corridor, tractor-trailer parking, and
the 1-D wall toy used by the shielding tests."""

from __future__ import annotations

from .grid import OccupancyGrid, ParkingSpot
from .rover import RoverConfig, RoverEnv
from .trailer import TrailerConfig, TrailerEnv, default_parking_grid
from .wall1d import Wall1dConfig, Wall1dEnv

__all__ = [
    "OccupancyGrid",
    "ParkingSpot",
    "RoverConfig",
    "RoverEnv",
    "TrailerConfig",
    "TrailerEnv",
    "Wall1dConfig",
    "Wall1dEnv",
    "default_parking_grid",
    "make_env",
    "ENV_NAMES",
]

ENV_NAMES = ("rover", "trailer", "wall1d")


def make_env(name: str, **kwargs):
    """Construct an environment by registry name."""
    if name == "rover":
        return RoverEnv(**kwargs)
    if name == "trailer":
        return TrailerEnv(**kwargs)
    if name == "wall1d":
        return Wall1dEnv(**kwargs)
    raise ValueError(f"unknown environment {name!r}; known: {ENV_NAMES}")
