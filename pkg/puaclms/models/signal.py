"""
Модели сигналов: поток случайных чисел и окно регрессора
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

_SEED_MASK = (1 << 64) - 1


class RngStream:
    """
    Воспроизводимый поток случайных чисел на счетчиковом генераторе Philox

    Одинаковая пара (seed, counter) дает одинаковую последовательность
    на любой платформе. Дочерние потоки порождаются через SeedSequence,
    поэтому потоки испытаний независимы и могут выполняться параллельно.
    """

    def __init__(self, seed: int, counter: int = 0):
        """
        Инициализация потока

        Args:
            seed: 64-битное зерно (ключ Philox)
            counter: Начальное значение счетчика Philox
        """
        self._seed = int(seed) & _SEED_MASK
        self._counter = int(counter)
        self._generator: Optional[np.random.Generator] = None

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def counter(self) -> int:
        return self._counter

    @property
    def generator(self) -> np.random.Generator:
        """Генератор numpy, создается при первом обращении"""
        if self._generator is None:
            bit_generator = np.random.Philox(key=self._seed, counter=self._counter)
            self._generator = np.random.Generator(bit_generator)
        return self._generator

    def spawn(self, key: int) -> RngStream:
        """
        Дочерний поток с производным зерном (seed, key)

        Args:
            key: Индекс дочернего потока (номер испытания, назначение)

        Returns:
            RngStream: Независимый поток
        """
        sequence = np.random.SeedSequence(entropy=self._seed, spawn_key=(int(key),))
        child_seed = int(sequence.generate_state(1, dtype=np.uint64)[0])
        return RngStream(child_seed)

    def standard_normal(self, size: int | tuple[int, ...]) -> np.ndarray:
        return self.generator.standard_normal(size)

    def __repr__(self) -> str:
        return f"RngStream(seed={self._seed}, counter={self._counter})"


class RegressorWindow(BaseModel):
    """
    Вектор регрессора u(n) = [u(n), ..., u(n-N+1)]^T (новейший отсчет первым)
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    u: np.ndarray = Field(..., description="Вектор линии задержки длины N")

    @property
    def n_taps(self) -> int:
        return int(self.u.shape[0])

    @property
    def z(self) -> np.ndarray:
        """Расширенный вектор z(n) = [u^H, u^T]^T"""
        return np.concatenate([np.conj(self.u), self.u])
