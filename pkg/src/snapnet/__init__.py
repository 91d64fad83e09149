"""snapnet: lumped-parameter simulation and analysis of pneumatic networks
built from bistable snap-through dome actuators."""

__version__ = "0.1.0"
