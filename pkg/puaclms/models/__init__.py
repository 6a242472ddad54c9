"""
Доменные модели: веса, маски, расписания, статистики, операторы
"""

from puaclms.models.algebra import EigenResult
from puaclms.models.filter import (
    AugmentedWeights,
    EnergyAudit,
    LcgState,
    SelectionMask,
    SelectionSchedule,
    StepAudit,
)
from puaclms.models.signal import RegressorWindow, RngStream
from puaclms.models.theory import (
    DecayRates,
    LearningCurve,
    SecondOrderStats,
    SteadyStatePrediction,
    VarianceRelationOperators,
)

__all__ = [
    "EigenResult",
    "AugmentedWeights",
    "EnergyAudit",
    "LcgState",
    "SelectionMask",
    "SelectionSchedule",
    "StepAudit",
    "RegressorWindow",
    "RngStream",
    "DecayRates",
    "LearningCurve",
    "SecondOrderStats",
    "SteadyStatePrediction",
    "VarianceRelationOperators",
]
