"""
Сервисы: линейная алгебра, сигналы, фильтр, теория, эксперименты, отчеты
"""

from puaclms.services.harness_service import ExperimentService
from puaclms.services.filter_service import PUACLMSFilter

__all__ = ["ExperimentService", "PUACLMSFilter"]
