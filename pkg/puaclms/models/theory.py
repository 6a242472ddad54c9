"""
Модели теоретического анализа
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

SteadyStateMethod = Literal["exact-energy", "small-step", "variance-relation"]


class SecondOrderStats(BaseModel):
    """
    Выборочные статистики второго порядка входного сигнала

    Для z = [u*; u]: C_zM = [[C_uM*, D_uM*], [D_uM, C_uM]] - частично-расширенная ковариация.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    C_u: np.ndarray = Field(..., description="Ковариация E[u u^H], N×N")
    D_u: np.ndarray = Field(..., description="Комплементарная ковариация E[u u^T], N×N")
    C_z: np.ndarray = Field(..., description="Расширенная ковариация E[z z^H], 2N×2N")
    C_uM: np.ndarray = Field(..., description="E[I_M u u^H]")
    D_uM: np.ndarray = Field(..., description="E[I_M u u^T]")
    C_zM: np.ndarray = Field(..., description="E[J_M z z^H]")
    sample_count: int = Field(..., ge=1, description="Число выборок")
    n_taps: int = Field(..., ge=1, description="N")
    m_taps: int = Field(..., ge=1, description="M")

    @property
    def rho_m(self) -> float:
        """Значение ρ_M = M/N для стационарного входа"""
        return self.m_taps / self.n_taps

    @property
    def circularity(self) -> float:
        """Мера некруговости ||D_u|| / ||C_u||"""
        return float(np.linalg.norm(self.D_u) / np.linalg.norm(self.C_u))


class VarianceRelationOperators(BaseModel):
    """
    Операторы рекурсии взвешенной дисперсии

    F = I - μP + μ²Q, G = [[P/2, -Q/2], [I, 0]].
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mu: float = Field(..., ge=0, description="Шаг адаптации")
    F: np.ndarray = Field(..., description="Матрица F, (2N)²×(2N)²")
    P: np.ndarray = Field(..., description="P = C_zM^T⊗I + I⊗C_zM")
    Q: np.ndarray = Field(..., description="Q = E[(J z z^H)^T ⊗ (z z^H J)]")
    c_M: np.ndarray = Field(..., description="Вектор c_M длины (2N)²")
    G: np.ndarray = Field(..., description="Блочная матрица G")
    sample_count: int = Field(..., ge=1, description="Число выборок для Q и c_M")

    @property
    def dim(self) -> int:
        return int(self.F.shape[0])


class SteadyStatePrediction(BaseModel):
    """
    Предсказание установившихся EMSE и MSD
    """

    model_config = ConfigDict(frozen=True)

    emse: float = Field(..., ge=0, description="ζ(∞)")
    msd: Optional[float] = Field(default=None, ge=0, description="η(∞), если метод его дает")
    method: SteadyStateMethod = Field(..., description="Метод расчета")
    rho_m: float = Field(..., gt=0, le=1, description="ρ_M")

    @property
    def emse_db(self) -> float:
        return float(10.0 * np.log10(self.emse)) if self.emse > 0 else float("-inf")


class DecayRates(BaseModel):
    """
    Скорости затухания за β итераций для полного, последовательного и стохастического обновления
    """

    model_config = ConfigDict(frozen=True)

    r_full: float = Field(..., ge=0)
    r_seq: float = Field(..., ge=0)
    r_stoch: float = Field(..., ge=0)
    beta: int = Field(..., ge=1)

    @property
    def ratio(self) -> float:
        """Во сколько раз полное обновление сходится быстрее последовательного: ln r_full / ln r_seq"""
        if not 0.0 < self.r_seq < 1.0 or not 0.0 < self.r_full < 1.0:
            return float("nan")
        return float(np.log(self.r_full) / np.log(self.r_seq))


class LearningCurve(BaseModel):
    """
    Кривые EMSE и MSD по итерациям (моделирование или теория)
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    emse: np.ndarray = Field(..., description="EMSE по итерациям, линейная шкала")
    msd: np.ndarray = Field(..., description="MSD по итерациям, линейная шкала")
    source: Literal["simulated", "theory"] = Field(..., description="Источник кривой")
    trials: int = Field(default=0, ge=0, description="Число усредненных испытаний (0 для теории)")

    @property
    def length(self) -> int:
        return int(self.emse.shape[0])
