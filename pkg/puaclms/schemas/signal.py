"""
Pydantic схемы спецификаций шума и объекта
"""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class NoncircularGaussianSpec(BaseModel):
    """
    Спецификация некругового комплексного гауссова шума
    """

    model_config = ConfigDict(frozen=True)

    variance: float = Field(..., ge=0, description="Дисперсия σ² = E|q|²")
    complementary_variance: complex = Field(default=0j, description="Комплементарная дисперсия σ̃² = E[q²]")

    @model_validator(mode="after")
    def check_psd(self) -> NoncircularGaussianSpec:
        """Расширенная ковариация должна быть неотрицательно определенной"""
        if abs(self.complementary_variance) > self.variance * (1.0 + 1e-12):
            raise ValueError(
                f"|complementary variance| = {abs(self.complementary_variance)} exceeds variance {self.variance}"
            )
        return self


class PlantSpec(BaseModel):
    """
    Широколинейный объект d(n) = u^T h° + u^H g° + υ(n)
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    h_opt: np.ndarray = Field(..., description="h°, длина N")
    g_opt: np.ndarray = Field(..., description="g°, длина N")
    noise_variance: float = Field(..., ge=0, description="σ_υ²")
    noise_complementary_variance: complex = Field(default=0j, description="Комплементарная дисперсия υ")

    @model_validator(mode="after")
    def check_plant(self) -> PlantSpec:
        if self.h_opt.ndim != 1 or self.h_opt.shape != self.g_opt.shape or self.h_opt.shape[0] < 1:
            raise ValueError(f"h_opt and g_opt must share length N >= 1, got {self.h_opt.shape} and {self.g_opt.shape}")
        if abs(self.noise_complementary_variance) > self.noise_variance * (1.0 + 1e-12):
            raise ValueError("Measurement noise complementary variance exceeds its variance")
        return self

    @property
    def n_taps(self) -> int:
        return int(self.h_opt.shape[0])

    @property
    def w_opt(self) -> np.ndarray:
        """w° = [h°; g°]"""
        return np.concatenate([self.h_opt, self.g_opt])

    @property
    def noise_spec(self) -> NoncircularGaussianSpec:
        return NoncircularGaussianSpec(
            variance=self.noise_variance,
            complementary_variance=self.noise_complementary_variance
        )
