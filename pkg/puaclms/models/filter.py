"""
Модели фильтра: веса, маска выбора, расписание, состояние LCG, аудит шага
"""

from __future__ import annotations

import math
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

# Константы Numerical Recipes
LCG_A = 1664525
LCG_B = 1013904223
LCG_C = 2 ** 32

ScheduleMode = Literal["sequential", "stochastic", "full"]
PartitionKind = Literal["contiguous", "interleaved"]
Quantization = Literal["uniform", "nearest"]


class AugmentedWeights(BaseModel):
    """
    Пара весов расширенного фильтра: стандартная ветвь h и сопряженная ветвь g
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    h: np.ndarray = Field(..., description="Веса стандартной ветви, длина N")
    g: np.ndarray = Field(..., description="Веса сопряженной ветви, длина N")

    @model_validator(mode="after")
    def check_lengths(self) -> AugmentedWeights:
        if self.h.shape != self.g.shape or self.h.ndim != 1:
            raise ValueError(f"h and g must be vectors of equal length, got {self.h.shape} and {self.g.shape}")
        return self

    @property
    def n_taps(self) -> int:
        return int(self.h.shape[0])

    @property
    def w(self) -> np.ndarray:
        """Составной вектор w = [h; g] длины 2N"""
        return np.concatenate([self.h, self.g])

    @classmethod
    def zeros(cls, n_taps: int) -> AugmentedWeights:
        return cls(h=np.zeros(n_taps, dtype=complex), g=np.zeros(n_taps, dtype=complex))

    @classmethod
    def from_stacked(cls, w: np.ndarray) -> AugmentedWeights:
        """
        Разбор составного вектора [h; g]

        Args:
            w: Вектор четной длины 2N

        Returns:
            AugmentedWeights: Пара (h, g)
        """
        w = np.asarray(w, dtype=complex)
        if w.ndim != 1 or w.shape[0] % 2:
            raise ValueError(f"Stacked weight vector must have even length, got {w.shape}")
        n_taps = w.shape[0] // 2
        return cls(h=w[:n_taps].copy(), g=w[n_taps:].copy())

    def error_from(self, w_opt: AugmentedWeights) -> AugmentedWeights:
        """Вектор ошибки весов w̃ = w° - w"""
        return AugmentedWeights(h=w_opt.h - self.h, g=w_opt.g - self.g)


class SelectionMask(BaseModel):
    """
    Маска выбора обновляемых коэффициентов i_k(n)

    Одна и та же маска применяется к ветвям h и g.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    flags: np.ndarray = Field(..., description="Булев вектор длины N")

    @property
    def M(self) -> int:
        return int(np.count_nonzero(self.flags))

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.flags)

    @property
    def augmented(self) -> np.ndarray:
        """Диагональ расширенной маски J_M = blkdiag(I_M, I_M)"""
        return np.concatenate([self.flags, self.flags])

    @classmethod
    def from_indices(cls, n_taps: int, indices: np.ndarray) -> SelectionMask:
        flags = np.zeros(n_taps, dtype=bool)
        flags[np.asarray(indices, dtype=int)] = True
        return cls(flags=flags)


class LcgState(BaseModel):
    """
    Состояние линейного конгруэнтного генератора x(n+1) = (a·x(n) + b) mod c
    """

    model_config = ConfigDict(frozen=True)

    x: int = Field(..., ge=0, description="Текущее значение x(n)")
    a: int = Field(default=LCG_A, gt=0, description="Множитель")
    b: int = Field(default=LCG_B, gt=0, description="Приращение")
    c: int = Field(default=LCG_C, gt=1, description="Модуль")

    @model_validator(mode="after")
    def check_range(self) -> LcgState:
        if self.x >= self.c:
            raise ValueError(f"LCG state x={self.x} must be below modulus c={self.c}")
        return self


class SelectionSchedule(BaseModel):
    """
    Расписание выбора подмножеств коэффициентов

    Подмножества S_1..S_β хранятся в виде массивов индексов с нуля.
    В стохастическом режиме расписание владеет состоянием LCG и
    продвигает его при каждом запросе маски.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    mode: ScheduleMode = Field(..., description="Режим выбора")
    N: int = Field(..., ge=1, description="Длина фильтра")
    M: int = Field(..., ge=1, description="Число обновляемых коэффициентов")
    beta: int = Field(..., ge=1, description="Число подмножеств N/M")
    subsets: tuple[np.ndarray, ...] = Field(..., description="Разбиение {0..N-1} на β подмножеств")
    lcg_state: Optional[LcgState] = Field(default=None, description="Состояние LCG (только stochastic)")
    quantization: Quantization = Field(default="uniform", description="Отображение x(n) в номер подмножества")

    def subset(self, index: int) -> np.ndarray:
        """
        Подмножество S_t по номеру с единицы

        Args:
            index: Номер подмножества t из {1..β}

        Returns:
            np.ndarray: Индексы коэффициентов (с нуля)
        """
        return self.subsets[index - 1]

    def mask_for(self, index: int) -> SelectionMask:
        return SelectionMask.from_indices(self.N, self.subset(index))

    @property
    def mask_table(self) -> np.ndarray:
        """Матрица β×N: строка t - маска подмножества S_(t+1)"""
        table = np.zeros((self.beta, self.N), dtype=bool)
        for row, indices in enumerate(self.subsets):
            table[row, indices] = True
        return table


class StepAudit(BaseModel):
    """
    Аудит одной итерации PU-ACLMS

    e_a, eps_a, eps_p вычисляются только при известном w°, иначе NaN.
    """

    model_config = ConfigDict(frozen=True)

    e: complex = Field(..., description="Ошибка выхода e(n)")
    e_a: complex = Field(default=complex(math.nan, math.nan), description="Априорная ошибка оценивания")
    eps_a: complex = Field(default=complex(math.nan, math.nan), description="Априорная ошибка по выбранным коэффициентам")
    eps_p: complex = Field(default=complex(math.nan, math.nan), description="Апостериорная ошибка по выбранным коэффициентам")
    u_m_normsq: float = Field(..., ge=0, description="||u_M(n)||^2")
    mult_count: int = Field(..., ge=0, description="Вещественные умножения за итерацию")
    add_count: int = Field(..., ge=0, description="Вещественные сложения за итерацию")
    diverged: bool = Field(default=False, description="Признак расходимости")


class EnergyAudit(BaseModel):
    """
    Результат проверки соотношения сохранения энергии на одной итерации
    """

    model_config = ConfigDict(frozen=True)

    lhs: float = Field(..., description="Левая часть баланса")
    rhs: float = Field(..., description="Правая часть баланса")
    residual: float = Field(..., ge=0, description="|LHS - RHS|")
    skipped: bool = Field(default=False, description="Пропущено из-за ||u_M||^2 = 0")

    def passed(self, tol: float = 1e-10) -> bool:
        return self.skipped or self.residual <= tol * (1.0 + abs(self.lhs))
