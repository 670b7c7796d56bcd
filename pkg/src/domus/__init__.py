"""domus: a construction virtual machine and analysis toolkit.

Programs in a small placement DSL drive a deterministic builder over a
voxel world. On top of the machine sit analyses of the built artifacts:
shortest-program complexity bounds, a pattern-dictionary beauty score,
regularity and fractal-dimension metrics, a simulated-annealing design
optimizer, and fleet-level adversarial transfer experiments.
"""

from . import aesthetics, designer, fleet, naturalness, synthesis, vm, world
from .errors import DomusError

__version__ = "0.1.0"

__all__ = [
    "DomusError",
    "__version__",
    "aesthetics",
    "designer",
    "fleet",
    "naturalness",
    "synthesis",
    "vm",
    "world",
]
