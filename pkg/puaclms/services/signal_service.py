"""
Генерация сигналов: некруговой гауссов шум, широколинейный AR вход, объект
"""

from typing import Optional, Sequence

import numpy as np
import scipy.signal
import structlog
from pydantic import ValidationError

from puaclms.core.exceptions import InvalidSpecException, ShapeMismatchException
from puaclms.models.signal import RegressorWindow, RngStream
from puaclms.schemas.signal import NoncircularGaussianSpec, PlantSpec

logger = structlog.get_logger(__name__)

AR_A = 0.3
AR_B = 0.1


def make_noise_spec(variance: float, complementary_variance: complex = 0j) -> NoncircularGaussianSpec:
    """
    Создание спецификации шума с проверкой |σ̃²| ≤ σ²

    Raises:
        InvalidSpecException: Недопустимая пара (σ², σ̃²)
    """
    try:
        return NoncircularGaussianSpec(variance=variance, complementary_variance=complementary_variance)
    except ValidationError as e:
        raise InvalidSpecException(
            f"Invalid noise spec: variance={variance}, complementary variance={complementary_variance}",
            details={"errors": e.error_count()}
        )


def draw_noncircular(
    spec: NoncircularGaussianSpec,
    rng: RngStream,
    size: Optional[int] = None
) -> complex | np.ndarray:
    """
    Отсчеты некругового комплексного гауссова шума

    Действительная и мнимая части независимы с дисперсиями (σ² ± |σ̃²|)/2,
    затем поворот на arg(σ̃²)/2 дает E[q²] = σ̃².

    Args:
        spec: Спецификация шума
        rng: Поток случайных чисел
        size: Число отсчетов (None - один скаляр)

    Returns:
        complex | np.ndarray: Отсчет или массив отсчетов
    """
    count = 1 if size is None else int(size)
    draws = rng.standard_normal((2, count))

    magnitude = abs(spec.complementary_variance)
    std_re = np.sqrt((spec.variance + magnitude) / 2.0)
    std_im = np.sqrt(max(spec.variance - magnitude, 0.0) / 2.0)
    q = std_re * draws[0] + 1j * (std_im * draws[1])

    phase = np.angle(spec.complementary_variance)
    if phase != 0.0:
        q = q * np.exp(0.5j * phase)

    return complex(q[0]) if size is None else q


def ar_input_step(
    u_prev: complex,
    spec: NoncircularGaussianSpec,
    rng: RngStream,
    a: complex = AR_A,
    b: complex = AR_B
) -> complex:
    """
    Один шаг широколинейного AR(1): u(n+1) = a·u(n) + b·u*(n) + q(n)
    """
    return ar_recursion(u_prev, draw_noncircular(spec, rng), a, b)


def ar_recursion(u_prev, q, a: complex = AR_A, b: complex = AR_B):
    """Детерминированная часть AR шага, работает и для массивов по испытаниям"""
    return a * u_prev + b * np.conj(u_prev) + q


def _real_transition(a: complex, b: complex) -> np.ndarray:
    """Вещественная матрица 2×2 отображения (Re u, Im u) -> (Re u', Im u')"""
    a, b = complex(a), complex(b)
    return np.array([
        [a.real + b.real, -a.imag + b.imag],
        [a.imag + b.imag, a.real - b.real],
    ])


def generate_ar_input(
    spec: NoncircularGaussianSpec,
    rng: RngStream,
    length: int,
    a: complex = AR_A,
    b: complex = AR_B,
    warmup: int = 0
) -> np.ndarray:
    """
    Длинная реализация широколинейного AR(1) процесса

    Вещественная форма процесса диагонализуется, и каждая мода
    фильтруется через scipy.signal.lfilter. При плохо обусловленном
    базисе собственных векторов используется прямая рекурсия.

    Args:
        spec: Спецификация порождающего шума
        rng: Поток случайных чисел
        length: Число отсчетов после прогрева
        a, b: Коэффициенты при u(n) и u*(n)
        warmup: Число отбрасываемых начальных отсчетов

    Returns:
        np.ndarray: Комплексный массив длины length
    """
    total = int(length) + int(warmup)
    q = draw_noncircular(spec, rng, total)

    transition = _real_transition(a, b)
    eigenvalues, basis = np.linalg.eig(transition)
    if np.linalg.cond(basis) < 1e8:
        modal_input = np.linalg.solve(basis, np.vstack([q.real, q.imag]).astype(complex))
        modal_state = np.vstack([
            scipy.signal.lfilter([1.0], [1.0, -eigenvalues[k]], modal_input[k]) for k in range(2)
        ])
        state = (basis @ modal_state).real
        # lfilter дает s(n) = A s(n-1) + q(n); сдвиг на один отсчет к u(n+1) = A u(n) + q(n)
        u = np.concatenate([[0j], state[0, :-1] + 1j * state[1, :-1]])
    else:
        logger.debug("Falling back to direct AR recursion", a=a, b=b)
        u = np.zeros(total, dtype=complex)
        for n in range(1, total):
            u[n] = ar_recursion(u[n - 1], q[n - 1], a, b)

    return u[warmup:]


def stationary_input_moments(
    spec: NoncircularGaussianSpec,
    a: complex = AR_A,
    b: complex = AR_B,
    max_iter: int = 10_000,
    tol: float = 1e-15
) -> tuple[float, complex]:
    """
    Стационарные E|u|² и E[u²] AR процесса

    Итерирует отображение ковариации (R, C) до неподвижной точки:
    R' = (|a|²+|b|²)R + 2Re(a·b̄·C) + σ², C' = a²C + 2abR + b²C̄ + σ̃².

    Returns:
        tuple[float, complex]: (E|u|², E[u²])

    Raises:
        InvalidSpecException: Процесс нестационарен
    """
    if np.max(np.abs(np.linalg.eigvals(_real_transition(a, b)))) >= 1.0:
        raise InvalidSpecException(f"AR coefficients a={a}, b={b} give a non-stationary input")

    power, pseudo = 0.0, 0j
    for _ in range(max_iter):
        power_next = (abs(a) ** 2 + abs(b) ** 2) * power + 2.0 * (a * np.conj(b) * pseudo).real + spec.variance
        pseudo_next = a * a * pseudo + 2.0 * a * b * power + b * b * np.conj(pseudo) + spec.complementary_variance
        converged = abs(power_next - power) <= tol * power_next and abs(pseudo_next - pseudo) <= tol * max(power_next, 1.0)
        power, pseudo = float(power_next), complex(pseudo_next)
        if converged:
            break
    return power, pseudo


def regressor_window(history: Sequence[complex] | np.ndarray, n_taps: int) -> RegressorWindow:
    """
    Вектор линии задержки на момент последнего отсчета истории

    Args:
        history: Отсчеты входа в хронологическом порядке
        n_taps: Длина фильтра N

    Returns:
        RegressorWindow: u(n) = [u(n), ..., u(n-N+1)]^T

    Raises:
        ShapeMismatchException: В истории меньше N отсчетов
    """
    history = np.asarray(history, dtype=complex)
    if history.ndim != 1 or history.shape[0] < n_taps:
        raise ShapeMismatchException(f"Need at least {n_taps} history samples, got {history.shape[0]}")
    return RegressorWindow(u=history[::-1][:n_taps].copy())


def regressor_matrix(signal: np.ndarray, n_taps: int) -> np.ndarray:
    """
    Все окна длины N по реализации сигнала

    Returns:
        np.ndarray: Матрица (len-N+1)×N, строка k - окно на момент k+N-1
    """
    windows = np.lib.stride_tricks.sliding_window_view(np.asarray(signal), n_taps)
    return windows[:, ::-1].copy()


def plant_output(u: RegressorWindow, plant: PlantSpec, rng: RngStream) -> tuple[complex, complex]:
    """
    Отклик широколинейного объекта

    Args:
        u: Окно регрессора
        plant: Объект (h°, g°, σ_υ²)
        rng: Поток шума измерений

    Returns:
        tuple[complex, complex]: (d(n), υ(n))

    Raises:
        ShapeMismatchException: Длина окна не равна длине объекта
    """
    if u.n_taps != plant.n_taps:
        raise ShapeMismatchException(f"Regressor length {u.n_taps} does not match plant length {plant.n_taps}")

    noise = draw_noncircular(plant.noise_spec, rng)
    d = complex(np.dot(u.u, plant.h_opt) + np.dot(np.conj(u.u), plant.g_opt)) + noise
    return d, noise


def default_plant(
    n_taps: int,
    noise_variance: float,
    rng: RngStream,
    noise_complementary_variance: complex = 0j
) -> PlantSpec:
    """
    Случайный объект: h°, g° из кругового гауссова распределения с дисперсией 1/(2N)

    Args:
        n_taps: Длина N
        noise_variance: σ_υ²
        rng: Поток объекта (один на эксперимент)
        noise_complementary_variance: Комплементарная дисперсия υ

    Returns:
        PlantSpec: Объект с ||w°||² порядка единицы
    """
    scale = np.sqrt(1.0 / (2.0 * n_taps))
    taps = draw_noncircular(NoncircularGaussianSpec(variance=1.0), rng, 2 * n_taps) * scale
    try:
        return PlantSpec(
            h_opt=taps[:n_taps],
            g_opt=taps[n_taps:],
            noise_variance=noise_variance,
            noise_complementary_variance=noise_complementary_variance
        )
    except ValidationError as e:
        raise InvalidSpecException(f"Invalid plant spec: {e.errors()[0]['msg']}")
