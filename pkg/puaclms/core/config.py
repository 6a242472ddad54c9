"""
Конфигурация приложения
"""

from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Настройки приложения с валидацией через Pydantic
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="PUACLMS_",
        case_sensitive=True,
        extra='ignore'
    )

    # Приложение
    DEBUG: bool = Field(default=False, description="Режим отладки")
    LOG_LEVEL: str = Field(default="INFO", description="Уровень логирования")
    LOG_DIR: Optional[str] = Field(default=None, description="Каталог для файлового лога с ротацией")
    OUTPUT_DIR: str = Field(default="results", description="Каталог по умолчанию для CSV и скриптов графиков")

    # Линейная алгебра
    HERMITIAN_TOL: float = Field(default=1e-12, gt=0, description="Допуск проверки эрмитовости")
    EIG_RESIDUAL_TOL: float = Field(default=1e-10, gt=0, description="Относительная невязка собственных пар")
    SOLVE_CONDITION_CAP: float = Field(default=1e12, gt=1, description="Максимальное число обусловленности для solve")
    REAL_EIG_TOL: float = Field(default=1e-8, gt=0, description="Порог мнимой части для вещественных собственных значений")

    # Теория
    MIN_STATS_SAMPLES: int = Field(default=10_000, ge=1, description="Минимум выборок для оценки статистик")
    OPERATOR_SAMPLES: int = Field(default=100_000, ge=1, description="Бюджет выборок для оценки Q и c_M")
    OPERATOR_CHUNK: int = Field(default=4096, ge=1, description="Размер блока при усреднении кронекеровых произведений")
    MAX_OPERATOR_N: int = Field(default=16, ge=1, description="Максимальная длина фильтра для построения операторов")
    MAX_CURVE_N: int = Field(default=8, ge=1, description="Максимальная длина фильтра для рекурсии кривых обучения")

    # Моделирование
    DIVERGENCE_THRESHOLD: float = Field(default=1e12, gt=0, description="Порог |e| для признания расходимости")
    WARMUP_FACTOR: int = Field(default=10, ge=1, description="Прогрев AR процесса: множитель при N")
    TRIAL_BLOCK: int = Field(default=256, ge=1, description="Число испытаний в одном векторизованном блоке")
    WORKERS: int = Field(default=1, ge=1, description="Число процессов для блоков испытаний")

    @property
    def output_path(self) -> Path:
        """
        Каталог вывода результатов

        Returns:
            Path: Путь к каталогу вывода
        """
        return Path(self.OUTPUT_DIR)


@lru_cache()
def get_settings() -> Settings:
    """
    Получение настроек приложения (кэшированное)

    Returns:
        Settings: Экземпляр настроек
    """
    return Settings()
