"""
Pydantic схемы для валидации конфигураций и отчетов
"""

from puaclms.schemas.experiment import (
    ComplexityRow,
    ExperimentConfig,
    LearningCurveRecord,
    OverlayReport,
    SimulationSummary,
    StabilityReport,
)
from puaclms.schemas.signal import NoncircularGaussianSpec, PlantSpec

__all__ = [
    "ComplexityRow",
    "ExperimentConfig",
    "LearningCurveRecord",
    "OverlayReport",
    "SimulationSummary",
    "StabilityReport",
    "NoncircularGaussianSpec",
    "PlantSpec",
]
