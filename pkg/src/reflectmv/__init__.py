"""Reflected self-stabilizing diffusions: simulation, mean-field fixed points,
small-noise skeletons and exit times on convex domains."""
from __future__ import annotations

__version__ = "0.1.0"

from .engine import ParticleCloud, SimConfig, simulate_paths, step_reflected  # noqa: E402
from .geometry import Ball, Box, ConvexDomain, HalfSpace, Orthant, Polyhedron  # noqa: E402
from .model import ModelCoefficients, get_model, probe_assumptions  # noqa: E402

__all__ = [
    "__version__",
    "Ball",
    "Box",
    "ConvexDomain",
    "HalfSpace",
    "Orthant",
    "Polyhedron",
    "ModelCoefficients",
    "get_model",
    "probe_assumptions",
    "ParticleCloud",
    "SimConfig",
    "simulate_paths",
    "step_reflected",
]
