"""
Модели результатов линейной алгебры
"""

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class EigenResult(BaseModel):
    """
    Результат спектрального разложения

    values: собственные значения (для эрмитовой матрицы - вещественные, по убыванию)
    vectors: матрица собственных векторов по столбцам (если запрошена)
    residual: относительная невязка max ||Av - λv|| / ||A|| или невязка формы Шура
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray = Field(..., description="Собственные значения")
    vectors: Optional[np.ndarray] = Field(default=None, description="Собственные векторы по столбцам")
    residual: float = Field(..., ge=0, description="Относительная невязка разложения")

    @property
    def spectral_radius(self) -> float:
        """Максимальный модуль собственного значения"""
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0
