"""
Numerical settings for the solver.

Values are read from the environment (optionally from an .env file placed in the
package directory) and fall back to the defaults below.
"""

import os
import logging
from functools import lru_cache
from typing import Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, Field

# Load environment variables from .env file next to the package
package_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
env_path = os.path.join(package_dir, '.env')

if os.path.exists(env_path):
    load_dotenv(env_path)

logger = logging.getLogger(__name__)


def _float(name: str, default: float) -> float:
    return float(os.getenv(name, str(default)))


def _int(name: str, default: int) -> int:
    return int(os.getenv(name, str(default)))


def _floats(name: str, default: Tuple[float, ...]) -> Tuple[float, ...]:
    raw = os.getenv(name)
    if not raw:
        return default
    return tuple(float(v) for v in raw.split(","))


class Settings(BaseModel):
    """Tolerances and defaults shared by all core modules."""

    pole_guard: float = Field(1e-9, description="Relative guard radius around poles")
    newton_tol: float = Field(1e-12, description="Relative |S'| tolerance for critical points")
    newton_max_iter: int = Field(60, description="Newton iterations per seed")
    caustic_tol: float = Field(1e-6, description="|S''| below which a critical point is degenerate")
    bisection_tol: float = Field(1e-8, description="Caustic position refinement")
    seeds_per_cell: int = Field(25, description="Newton seeds per unit cell of pole spacing")
    residue_floor: float = Field(1e-10, description="Residue below which a pole is branch-point-only")
    thimble_height: float = Field(40.0, description="Im S height (times 1/k0) reached by thimbles")
    flow_rtol: float = Field(1e-11, description="solve_ivp relative tolerance for thimble flow")
    flow_atol: float = Field(1e-13, description="solve_ivp absolute tolerance for thimble flow")
    flow_samples: int = Field(240, description="Samples per thimble branch")
    phase_tol: float = Field(1e-8, description="Relative drift of Re S allowed along a thimble")
    quad_rtol: float = Field(1e-12, description="Adaptive Gauss-Legendre relative tolerance")
    quad_max_panels: int = Field(200000, description="Panel budget per contour")
    oracle_damping: float = Field(1e-4, description="Oracle damping delta for k0 -> k0(1+i delta)")
    decomposition_k0_factors: Tuple[float, ...] = Field(
        (1.0, 1.37, 1.81), description="k0 multiples used to fit thimble coefficients"
    )
    decomposition_tol: float = Field(1e-6, description="Residual after integer rounding")
    sp_min_parameter: float = Field(10.0, description="Minimum k0|S''|^3/|S'''|^2 for stationary phase")
    monodromy_steps: int = Field(720, description="Loop discretization")
    max_workers: int = Field(4, description="Thread pool size for grid pipelines")

    class Config:
        frozen = True


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Build the settings once from the environment."""
    settings = Settings(
        pole_guard=_float("EINBEIN_POLE_GUARD", 1e-9),
        newton_tol=_float("EINBEIN_NEWTON_TOL", 1e-12),
        newton_max_iter=_int("EINBEIN_NEWTON_MAX_ITER", 60),
        caustic_tol=_float("EINBEIN_CAUSTIC_TOL", 1e-6),
        bisection_tol=_float("EINBEIN_BISECTION_TOL", 1e-8),
        seeds_per_cell=_int("EINBEIN_SEEDS_PER_CELL", 25),
        residue_floor=_float("EINBEIN_RESIDUE_FLOOR", 1e-10),
        thimble_height=_float("EINBEIN_THIMBLE_HEIGHT", 40.0),
        flow_rtol=_float("EINBEIN_FLOW_RTOL", 1e-11),
        flow_atol=_float("EINBEIN_FLOW_ATOL", 1e-13),
        flow_samples=_int("EINBEIN_FLOW_SAMPLES", 240),
        phase_tol=_float("EINBEIN_PHASE_TOL", 1e-8),
        quad_rtol=_float("EINBEIN_QUAD_RTOL", 1e-12),
        quad_max_panels=_int("EINBEIN_QUAD_MAX_PANELS", 200000),
        oracle_damping=_float("EINBEIN_ORACLE_DAMPING", 1e-4),
        decomposition_k0_factors=_floats("EINBEIN_DECOMPOSITION_K0", (1.0, 1.37, 1.81)),
        decomposition_tol=_float("EINBEIN_DECOMPOSITION_TOL", 1e-6),
        sp_min_parameter=_float("EINBEIN_SP_MIN_PARAMETER", 10.0),
        monodromy_steps=_int("EINBEIN_MONODROMY_STEPS", 720),
        max_workers=_int("EINBEIN_MAX_WORKERS", 4),
    )
    logger.debug(f"Loaded settings: {settings}")
    return settings
