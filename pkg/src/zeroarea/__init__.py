"""Optimal and local quantum control with a zero-area constraint on the field."""
from .core import (
    ControlField,
    HermitianOp,
    QuantumState,
    SystemModel,
    TimeGrid,
    area,
    running_area,
)

__version__ = "0.1.0"

__all__ = [
    "ControlField",
    "HermitianOp",
    "QuantumState",
    "SystemModel",
    "TimeGrid",
    "area",
    "running_area",
]
