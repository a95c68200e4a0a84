"""Configuration and result models."""
from .objects import GridSpec, ModelKind, RefractionModel, RunConfig, SourceKind, SourceSpec

__all__ = ["GridSpec", "ModelKind", "RefractionModel", "RunConfig", "SourceKind", "SourceSpec"]
