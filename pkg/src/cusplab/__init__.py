"""cusplab: desk-scale numerics for Kahler-Einstein metrics on complex
hyperbolic cusps - model geometry, flat-torus spectrum, overflow-safe mode
kernels, a fixed-point solver for the Monge-Ampere equation, and decay-rate
fitting against the sharp envelope."""

from .model import CuspModel, CuspPoint
from .grid import RadialGrid
from .fields import Field

__all__ = ["CuspModel", "CuspPoint", "RadialGrid", "Field"]
__version__ = "0.1.0"
