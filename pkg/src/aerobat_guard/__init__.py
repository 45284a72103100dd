"""Simulation, estimation and control for a thruster-guarded flapping-wing robot."""
from aerobat_guard._accel import USE_NUMBA, backend_name

__version__ = "0.1.0"

__all__ = ["USE_NUMBA", "backend_name", "__version__"]
