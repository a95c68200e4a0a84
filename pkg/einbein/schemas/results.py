from __future__ import annotations

from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field


class FieldRow(BaseModel):
    """One row of the field CSV."""
    x: float
    z: float
    re: float
    im: float
    abs: float
    zone: str = ""
    decomposition_id: str = ""
    diagnostic: Optional[str] = None


class ArrivalRow(BaseModel):
    """One arrival of the transect table."""
    x: float
    z: float
    t: float
    smear: float
    label: str
    coefficient: int


class CommandResult(BaseModel):
    """Outcome of one CLI command."""
    command: str
    success: bool = True
    error_message: Optional[str] = None
    exit_code: int = 0
    outputs: List[str] = Field(default_factory=list, description="Files written")
    details: Dict[str, Any] = Field(default_factory=dict, description="Command-specific figures")

    def to_summary(self) -> str:
        lines = ["=" * 80, f"einbein {self.command}", "=" * 80]
        if self.success:
            lines.append("✓ Completed")
        else:
            lines.append(f"✗ Failed (exit {self.exit_code}): {self.error_message}")
        for key, value in self.details.items():
            lines.append(f"  {key}: {value}")
        if self.outputs:
            lines.append("  Files:")
            lines.extend(f"    {path}" for path in self.outputs)
        return "\n".join(lines)


class FieldStats(BaseModel):
    """Counts gathered while sweeping a grid."""
    points: int
    failed: int = 0
    oracle_fallbacks: int = 0
    decompositions: int = 0
    zones: Dict[str, int] = Field(default_factory=dict)
    max_abs: float = 0.0
    grid_shape: Tuple[int, int] = (0, 0)


class CausticRow(BaseModel):
    """One classified grid point."""
    x: float
    z: float
    zone: str
    caustic_type: str
    ghost_source: bool
    n_real: int
    diagnostic: Optional[str] = None
