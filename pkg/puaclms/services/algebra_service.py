"""
Плотная комплексная линейная алгебра: кронекеровы произведения,
векторизация, взвешенные нормы, спектральные разложения, решение систем
"""

from typing import Optional

import numpy as np
import scipy.linalg
import structlog

from puaclms.core.config import get_settings
from puaclms.core.exceptions import (
    EigenConvergenceException,
    NumericalException,
    ShapeMismatchException,
    SingularMatrixException,
)
from puaclms.models.algebra import EigenResult

logger = structlog.get_logger(__name__)


def _as_matrix(a: np.ndarray, name: str = "a") -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2:
        raise ShapeMismatchException(f"{name} must be a 2-D matrix, got shape {a.shape}")
    return a


def _as_square(a: np.ndarray, name: str = "a") -> np.ndarray:
    a = _as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise ShapeMismatchException(f"{name} must be square, got shape {a.shape}")
    return a


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Кронекерово произведение a ⊗ b

    Args:
        a: Матрица p×q
        b: Матрица r×s

    Returns:
        np.ndarray: Матрица (p·r)×(q·s)
    """
    return np.kron(_as_matrix(a, "a"), _as_matrix(b, "b"))


def vec(a: np.ndarray) -> np.ndarray:
    """Столбцы матрицы подряд сверху вниз"""
    return _as_matrix(a).reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: Optional[int] = None) -> np.ndarray:
    """
    Обратная к vec операция

    Args:
        v: Вектор длины rows·cols
        rows: Число строк
        cols: Число столбцов (по умолчанию rows)

    Returns:
        np.ndarray: Матрица rows×cols

    Raises:
        ShapeMismatchException: Длина вектора не равна rows·cols
    """
    cols = rows if cols is None else cols
    v = np.asarray(v)
    if v.ndim != 1 or v.shape[0] != rows * cols:
        raise ShapeMismatchException(f"Cannot unvec vector of shape {v.shape} into {rows}x{cols}")
    return v.reshape((rows, cols), order="F")


def is_hermitian(a: np.ndarray, tol: Optional[float] = None) -> bool:
    a = _as_square(a)
    tol = get_settings().HERMITIAN_TOL if tol is None else tol
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol * scale)


def weighted_norm_sq(x: np.ndarray, sigma: np.ndarray) -> float:
    """
    Взвешенная норма x^H Σ x

    Args:
        x: Вектор длины n
        sigma: Эрмитова неотрицательно определенная матрица n×n

    Returns:
        float: Вещественное значение квадратичной формы

    Raises:
        ShapeMismatchException: Несогласованные размеры
        NumericalException: Существенно комплексный результат (неэрмитов вес)
    """
    x = np.asarray(x)
    sigma = _as_square(sigma, "sigma")
    if x.ndim != 1 or x.shape[0] != sigma.shape[0]:
        raise ShapeMismatchException(f"Vector of shape {x.shape} does not match weighting {sigma.shape}")

    value = complex(np.vdot(x, sigma @ x))
    scale = max(1.0, abs(value))
    if abs(value.imag) > get_settings().HERMITIAN_TOL * scale * max(1, x.shape[0]):
        raise NumericalException(
            "Weighted norm is not real: weighting matrix is not Hermitian",
            details={"imag": value.imag}
        )
    return value.real


def _relative_residual(a: np.ndarray, lhs: np.ndarray, rhs: np.ndarray) -> float:
    norm_a = float(np.linalg.norm(a, 2)) if a.size else 0.0
    if norm_a == 0.0:
        return 0.0
    columns = np.linalg.norm(lhs - rhs, axis=0)
    return float(np.max(columns, initial=0.0) / norm_a)


def eig_hermitian(a: np.ndarray, compute_vectors: bool = True) -> EigenResult:
    """
    Собственные значения эрмитовой матрицы по убыванию

    LAPACK: приведение к трехдиагональной форме и QL/QR итерации.

    Args:
        a: Эрмитова матрица
        compute_vectors: Вычислять ли ортонормированные собственные векторы

    Returns:
        EigenResult: Вещественные собственные значения по убыванию

    Raises:
        NumericalException: Матрица не эрмитова
        EigenConvergenceException: Итерации не сошлись или невязка велика
    """
    a = _as_square(a)
    settings = get_settings()

    if not is_hermitian(a):
        raise NumericalException("eig_hermitian requires a Hermitian matrix")
    a = 0.5 * (a + a.conj().T)

    try:
        if compute_vectors:
            values, vectors = scipy.linalg.eigh(a)
        else:
            values = scipy.linalg.eigh(a, eigvals_only=True)
            vectors = None
    except (np.linalg.LinAlgError, ValueError) as e:
        logger.error("Hermitian eigensolver failed", size=a.shape[0], error=str(e))
        raise EigenConvergenceException(f"Hermitian eigensolver did not converge: {e}")

    order = np.argsort(values)[::-1]
    values = values[order]
    residual = 0.0
    if vectors is not None:
        vectors = vectors[:, order]
        residual = _relative_residual(a, a @ vectors, vectors * values)
    if residual > settings.EIG_RESIDUAL_TOL:
        raise EigenConvergenceException(
            "Hermitian eigenpairs failed the residual check",
            details={"residual": residual}
        )

    return EigenResult(values=values, vectors=vectors, residual=residual)


def eig_general(a: np.ndarray, compute_vectors: bool = False) -> EigenResult:
    """
    Собственные значения произвольной квадратной матрицы

    Комплексная форма Шура (приведение к Хессенбергу + QR со сдвигами)
    с обратной проверкой ||A Z - Z T|| / ||A||.

    Args:
        a: Квадратная матрица
        compute_vectors: Вычислять ли собственные векторы

    Returns:
        EigenResult: Собственные значения (комплексные) в порядке формы Шура

    Raises:
        EigenConvergenceException: QR итерации не сошлись или невязка велика
    """
    a = _as_square(a)
    settings = get_settings()

    try:
        t, z = scipy.linalg.schur(a.astype(complex), output="complex")
    except (np.linalg.LinAlgError, ValueError) as e:
        logger.error("Schur decomposition failed", size=a.shape[0], error=str(e))
        raise EigenConvergenceException(f"Schur decomposition did not converge: {e}")

    values = np.diag(t).copy()
    residual = _relative_residual(a, a @ z, z @ t)

    vectors = None
    if compute_vectors:
        try:
            values, vectors = scipy.linalg.eig(a)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise EigenConvergenceException(f"General eigensolver did not converge: {e}")
        residual = max(residual, _relative_residual(a, a @ vectors, vectors * values))

    if residual > settings.EIG_RESIDUAL_TOL:
        raise EigenConvergenceException(
            "Schur form failed the residual check",
            details={"residual": residual}
        )

    return EigenResult(values=values, vectors=vectors, residual=residual)


def spectral_radius(a: np.ndarray) -> float:
    """Спектральный радиус через eig_general"""
    return eig_general(a).spectral_radius


def solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Решение системы a·x = b

    Args:
        a: Квадратная невырожденная матрица
        b: Вектор или матрица правых частей

    Returns:
        np.ndarray: Решение той же формы, что и b

    Raises:
        ShapeMismatchException: Несогласованные размеры
        SingularMatrixException: Число обусловленности выше порога
    """
    a = _as_square(a)
    b = np.asarray(b)
    if b.shape[0] != a.shape[0]:
        raise ShapeMismatchException(f"Right-hand side of shape {b.shape} does not match matrix {a.shape}")

    settings = get_settings()
    condition = float(np.linalg.cond(a))
    if not np.isfinite(condition) or condition > settings.SOLVE_CONDITION_CAP:
        logger.warning("Refusing ill-conditioned solve", condition=condition, cap=settings.SOLVE_CONDITION_CAP)
        raise SingularMatrixException(
            f"Matrix is singular or ill-conditioned (condition estimate {condition:.3e})",
            condition=condition
        )

    x = scipy.linalg.solve(a, b)

    norm_x = float(np.linalg.norm(x))
    residual = float(np.linalg.norm(a @ x - b))
    if residual > settings.EIG_RESIDUAL_TOL * float(np.linalg.norm(a, 2)) * max(norm_x, 1e-300):
        raise SingularMatrixException(
            f"Linear solve residual {residual:.3e} exceeds tolerance",
            condition=condition
        )
    return x
