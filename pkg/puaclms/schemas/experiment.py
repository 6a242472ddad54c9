"""
Pydantic схемы конфигурации эксперимента, записей кривых и отчетов
"""

from __future__ import annotations

import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from puaclms.schemas.signal import NoncircularGaussianSpec


class ExperimentConfig(BaseModel):
    """
    Конфигурация эксперимента (плоский файл key=value)

    Неизвестные ключи запрещены.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    n: int = Field(..., ge=1, description="Длина фильтра N")
    m: int = Field(..., ge=1, description="Число обновляемых коэффициентов M")
    mode: Literal["sequential", "stochastic", "full"] = Field(default="sequential", description="Схема выбора")
    mu: float = Field(..., ge=0, description="Шаг адаптации μ")
    trials: int = Field(default=100, ge=1, description="Число независимых испытаний")
    horizon: int = Field(default=5000, ge=1, description="Число итераций")
    seed: int = Field(default=0, ge=0, description="Зерно эксперимента")
    sigma_v2: float = Field(default=0.01, ge=0, description="Дисперсия шума измерений σ_υ²")
    ar_a: complex = Field(default=0.3, description="Коэффициент AR при u(n)")
    ar_b: complex = Field(default=0.1, description="Коэффициент AR при u*(n)")
    noise_var: float = Field(default=1.0, ge=0, description="Дисперсия порождающего шума σ_q²")
    noise_cvar: complex = Field(default=0.9, description="Комплементарная дисперсия σ̃_q²")
    init: Literal["zero", "random"] = Field(default="zero", description="Начальные веса")
    steady_frac: float = Field(default=0.1, gt=0, le=0.5, description="Доля итераций для установившегося режима")
    partition: Literal["contiguous", "interleaved"] = Field(default="contiguous", description="Разбиение на подмножества")
    noise_v_cvar: complex = Field(default=0j, description="Комплементарная дисперсия шума измерений")
    workers: Optional[int] = Field(default=None, ge=1, description="Число процессов (по умолчанию из настроек)")
    plant_seed: Optional[int] = Field(default=None, ge=0, description="Отдельное зерно объекта")

    @field_validator("ar_a", "ar_b", "noise_cvar", "noise_v_cvar", mode="before")
    @classmethod
    def parse_complex(cls, v):
        """Комплексные числа в записи Python: 0.9, 0.3+0.1j"""
        if isinstance(v, str):
            try:
                return complex(v.replace(" ", ""))
            except ValueError:
                raise ValueError(f"Не удается разобрать комплексное число: {v!r}")
        return v

    @model_validator(mode="after")
    def check_consistency(self) -> ExperimentConfig:
        """Согласованность N, M, режима и спецификаций шума"""
        if self.m > self.n:
            raise ValueError(f"M={self.m} не может превышать N={self.n}")
        if self.n % self.m != 0:
            raise ValueError(f"N должно быть кратно M (N mod M = 0), получено N={self.n}, M={self.m}")
        if self.mode == "full" and self.m != self.n:
            raise ValueError("Полное обновление требует M = N")
        if abs(self.noise_cvar) > self.noise_var:
            raise ValueError("|noise_cvar| не может превышать noise_var")
        if abs(self.noise_v_cvar) > self.sigma_v2:
            raise ValueError("|noise_v_cvar| не может превышать sigma_v2")
        return self

    @property
    def beta(self) -> int:
        return self.n // self.m

    @property
    def input_noise(self) -> NoncircularGaussianSpec:
        return NoncircularGaussianSpec(variance=self.noise_var, complementary_variance=self.noise_cvar)

    @property
    def steady_window(self) -> int:
        """Число итераций в окне установившегося режима (не меньше одной)"""
        return max(1, int(round(self.steady_frac * self.horizon)))


def to_db(value: float) -> float:
    """10·log10 линейной величины; -inf для нуля"""
    return 10.0 * math.log10(value) if value > 0 else float("-inf")


class LearningCurveRecord(BaseModel):
    """
    Строка CSV кривой обучения
    """

    model_config = ConfigDict(frozen=True)

    iteration: int = Field(..., ge=0, description="Номер итерации")
    emse_linear: float = Field(..., description="EMSE, линейная шкала")
    emse_db: float = Field(..., description="EMSE, дБ")
    msd_linear: float = Field(..., description="MSD, линейная шкала")
    msd_db: float = Field(..., description="MSD, дБ")
    source: Literal["simulated", "theory"] = Field(..., description="Источник")
    trials: int = Field(..., ge=0, description="Число усредненных испытаний")

    @classmethod
    def from_linear(cls, iteration: int, emse: float, msd: float, source: str, trials: int) -> LearningCurveRecord:
        return cls(
            iteration=iteration,
            emse_linear=emse,
            emse_db=to_db(emse),
            msd_linear=msd,
            msd_db=to_db(msd),
            source=source,
            trials=trials
        )


class SimulationSummary(BaseModel):
    """
    Итоги Monte-Carlo моделирования
    """

    steady_emse: float = Field(..., ge=0, description="Установившаяся EMSE")
    steady_msd: float = Field(..., ge=0, description="Установившаяся MSD")
    steady_emse_stderr: float = Field(..., ge=0, description="Стандартная ошибка установившейся EMSE по испытаниям")
    trials_used: int = Field(..., ge=0, description="Испытания в среднем")
    trials_diverged: int = Field(..., ge=0, description="Разошедшиеся испытания")
    divergence_iterations: list[int] = Field(default_factory=list, description="Итерации расходимости")
    rho_m_empirical: Optional[float] = Field(default=None, description="Эмпирическое ρ_M")

    @property
    def steady_emse_db(self) -> float:
        return to_db(self.steady_emse)

    @property
    def steady_msd_db(self) -> float:
        return to_db(self.steady_msd)


class StabilityReport(BaseModel):
    """
    Отчет о границах устойчивости
    """

    mu: float = Field(..., description="Шаг адаптации из конфигурации")
    mean_bound: float = Field(..., description="2/λ_max(C_zM)")
    mean_square_bound: float = Field(..., description="Среднеквадратичная граница")
    spectral_radius_f: float = Field(..., description="ρ(F) при заданном μ")
    circularity: float = Field(..., description="||D_u|| / ||C_u||")

    @property
    def bound_ratio(self) -> float:
        """Отношение среднеквадратичной границы к границе в среднем"""
        if not math.isfinite(self.mean_bound) or self.mean_bound == 0:
            return float("nan")
        return self.mean_square_bound / self.mean_bound

    @property
    def stable(self) -> bool:
        return self.mu < self.mean_square_bound


class ComplexityRow(BaseModel):
    """
    Строка таблицы вычислительной сложности
    """

    algorithm: str = Field(..., description="Алгоритм")
    n: int = Field(..., ge=1)
    m: int = Field(..., ge=1)
    real_mults: int = Field(..., ge=0, description="Вещественные умножения")
    real_adds: int = Field(..., ge=0, description="Вещественные сложения")
    saving: float = Field(..., description="Доля операций, сэкономленных относительно ACLMS")


class OverlayReport(BaseModel):
    """
    Сравнение теоретических и моделируемых кривых
    """

    max_emse_deviation_db: float = Field(..., ge=0, description="Максимальное |Δ EMSE| после пропуска начала, дБ")
    max_msd_deviation_db: float = Field(..., ge=0, description="Максимальное |Δ MSD| после пропуска начала, дБ")
    steady_emse_deviation_db: float = Field(..., ge=0, description="|Δ| установившейся EMSE, дБ")
    skip: int = Field(..., ge=0, description="Число пропущенных начальных итераций")
    theory_iterations_to_level: Optional[int] = Field(default=None, description="Итерации до уровня установившегося +6 дБ (теория)")
    simulated_iterations_to_level: Optional[int] = Field(default=None, description="То же для моделирования")
