"""
Обработка исключений и ошибок
"""

from typing import Any, Dict

import structlog
from pydantic import ValidationError

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_NUMERICAL_ERROR = 2


class PUACLMSException(Exception):
    """Базовое исключение библиотеки PU-ACLMS"""

    def __init__(
        self,
        message: str,
        exit_code: int = EXIT_NUMERICAL_ERROR,
        details: Dict[str, Any] | None = None
    ):
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)


class ConfigException(PUACLMSException):
    """Ошибки конфигурации эксперимента и аргументов командной строки"""

    def __init__(self, message: str, details: Dict[str, Any] | None = None):
        super().__init__(message=message, exit_code=EXIT_CONFIG_ERROR, details=details)


class ScheduleException(ConfigException):
    """Недопустимые параметры расписания выбора коэффициентов"""
    pass


class ShapeMismatchException(ConfigException):
    """Несогласованные размерности векторов и матриц"""
    pass


class InvalidSpecException(ConfigException):
    """Недопустимые параметры шума или объекта"""
    pass


class NumericalException(PUACLMSException):
    """Численные ошибки: вырожденность, расходимость, несходимость"""

    def __init__(self, message: str, details: Dict[str, Any] | None = None):
        super().__init__(message=message, exit_code=EXIT_NUMERICAL_ERROR, details=details)


class SingularMatrixException(NumericalException):
    """Вырожденная или плохо обусловленная матрица"""

    def __init__(self, message: str, condition: float):
        super().__init__(message=message, details={"condition": condition})
        self.condition = condition


class EigenConvergenceException(NumericalException):
    """Собственные значения не сошлись или не прошли проверку невязки"""
    pass


class StabilityException(NumericalException):
    """Шаг адаптации на границе или за границей применимости формулы"""
    pass


class DivergenceException(NumericalException):
    """Все испытания Monte-Carlo разошлись"""

    def __init__(self, message: str, mu: float, bound: float | None = None):
        super().__init__(message=message, details={"mu": mu, "bound": bound})
        self.mu = mu
        self.bound = bound


class InsufficientSamplesException(NumericalException):
    """Недостаточно выборок для оценки статистик"""
    pass


class BudgetExceededException(NumericalException):
    """Размер операторов превышает допустимый бюджет"""
    pass


def handle_exception(exc: Exception) -> int:
    """
    Логирование исключения и выбор кода возврата CLI

    Args:
        exc: Перехваченное исключение

    Returns:
        int: Код возврата (1 - ошибка конфигурации, 2 - численная ошибка)
    """
    if isinstance(exc, PUACLMSException):
        logger.error(
            "PU-ACLMS exception",
            error=exc.message,
            exit_code=exc.exit_code,
            **exc.details
        )
        return exc.exit_code

    if isinstance(exc, ValidationError):
        logger.error(
            "Validation error",
            errors=exc.error_count()
        )
        return EXIT_CONFIG_ERROR

    logger.error(
        "Unhandled exception",
        error=str(exc),
        exc_info=True
    )
    return EXIT_NUMERICAL_ERROR
