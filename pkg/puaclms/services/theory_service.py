"""
Теоретический анализ PU-ACLMS: статистики второго порядка, установившиеся
EMSE/MSD, границы устойчивости, кривые обучения, скорости затухания
"""

from typing import Optional

import numpy as np
import structlog

from puaclms.core.config import get_settings
from puaclms.core.exceptions import (
    BudgetExceededException,
    InsufficientSamplesException,
    ShapeMismatchException,
    SingularMatrixException,
    StabilityException,
)
from puaclms.models.filter import SelectionSchedule
from puaclms.models.theory import (
    DecayRates,
    LearningCurve,
    SecondOrderStats,
    SteadyStatePrediction,
    VarianceRelationOperators,
)
from puaclms.services.algebra_service import (
    eig_general,
    eig_hermitian,
    is_hermitian,
    kron,
    solve,
    vec,
)
from puaclms.services.filter_service import lcg_sequence, lcg_to_subset

logger = structlog.get_logger(__name__)


def augment(block: np.ndarray, pseudo: np.ndarray) -> np.ndarray:
    """
    Расширенная матрица для z = [u*; u]: [[C*, D*], [D, C]]

    Args:
        block: C = E[u u^H] (или частичный аналог)
        pseudo: D = E[u u^T] (или частичный аналог)
    """
    return np.block([[np.conj(block), np.conj(pseudo)], [pseudo, block]])


def mask_components(schedule: SelectionSchedule, count: int) -> list[tuple[float, np.ndarray]]:
    """
    Процесс выбора как смесь компонент (вес, маски по выборкам)

    sequential: β компонент с весом 1/β и постоянной маской (усреднение по времени);
    stochastic: одна компонента с масками из LCG (копия состояния расписания);
    full: одна компонента из единиц.

    Args:
        schedule: Расписание
        count: Число выборок

    Returns:
        list[tuple[float, np.ndarray]]: Маски формы (count, N) или (N,)
    """
    if schedule.mode == "full":
        return [(1.0, np.ones(schedule.N, dtype=bool))]
    if schedule.mode == "sequential":
        return [(1.0 / schedule.beta, row) for row in schedule.mask_table]

    states, _ = lcg_sequence(schedule.lcg_state, count)
    indices = lcg_to_subset(states, schedule.beta, schedule.lcg_state.c, schedule.quantization)
    return [(1.0, schedule.mask_table[indices - 1])]


def estimate_stats(
    samples: np.ndarray,
    n_taps: int,
    schedule: SelectionSchedule,
    min_samples: Optional[int] = None
) -> SecondOrderStats:
    """
    Выборочные статистики второго порядка и их частичные аналоги

    Args:
        samples: Матрица окон регрессора S×N
        n_taps: Длина фильтра N
        schedule: Расписание, задающее процесс выбора
        min_samples: Минимальное число выборок (по умолчанию из настроек)

    Returns:
        SecondOrderStats: C_u, D_u, C_z, C_uM, D_uM, C_zM

    Raises:
        ShapeMismatchException: Ширина выборки не равна N
        InsufficientSamplesException: Выборок меньше минимума
    """
    samples = np.asarray(samples, dtype=complex)
    if samples.ndim != 2 or samples.shape[1] != n_taps or schedule.N != n_taps:
        raise ShapeMismatchException(f"Expected S x {n_taps} regressor samples, got {samples.shape}")

    count = samples.shape[0]
    min_samples = get_settings().MIN_STATS_SAMPLES if min_samples is None else min_samples
    if count < min_samples:
        raise InsufficientSamplesException(
            f"Need at least {min_samples} regressor samples, got {count}",
            details={"samples": count, "required": min_samples}
        )

    cov = samples.T @ np.conj(samples) / count
    pseudo = samples.T @ samples / count

    cov_m = np.zeros((n_taps, n_taps), dtype=complex)
    pseudo_m = np.zeros((n_taps, n_taps), dtype=complex)
    for weight, masks in mask_components(schedule, count):
        masked = samples * masks
        cov_m += weight * (masked.T @ np.conj(samples)) / count
        pseudo_m += weight * (masked.T @ samples) / count

    cov = 0.5 * (cov + cov.conj().T)
    pseudo = 0.5 * (pseudo + pseudo.T)
    cov_m = 0.5 * (cov_m + cov_m.conj().T)
    pseudo_m = 0.5 * (pseudo_m + pseudo_m.T)

    stats = SecondOrderStats(
        C_u=cov,
        D_u=pseudo,
        C_z=augment(cov, pseudo),
        C_uM=cov_m,
        D_uM=pseudo_m,
        C_zM=augment(cov_m, pseudo_m),
        sample_count=count,
        n_taps=n_taps,
        m_taps=schedule.M
    )
    logger.debug(
        "Second-order statistics estimated",
        samples=count,
        trace_cu=float(np.trace(cov).real),
        circularity=stats.circularity
    )
    return stats


def _check_rho(rho_m: Optional[float], stats: SecondOrderStats) -> float:
    rho_m = stats.rho_m if rho_m is None else float(rho_m)
    if not 0.0 < rho_m <= 1.0:
        raise StabilityException(f"rho_M must lie in (0, 1], got {rho_m}")
    return rho_m


def emse_steady_exact(
    mu: float,
    sigma_v2: float,
    stats: SecondOrderStats,
    rho_m: Optional[float] = None
) -> SteadyStatePrediction:
    """
    Установившаяся EMSE по методу сохранения энергии

    ζ(∞) = μσ_υ²tr(C_uM) / (ρ_M - μ·tr(C_uM))

    Raises:
        StabilityException: Знаменатель неположителен (шаг слишком велик для формулы)
    """
    rho_m = _check_rho(rho_m, stats)
    trace_m = float(np.trace(stats.C_uM).real)
    denominator = rho_m - mu * trace_m
    if denominator <= 0.0:
        raise StabilityException(
            "step-size too large for this formula",
            details={"mu": mu, "rho_m": rho_m, "trace_c_um": trace_m}
        )
    return SteadyStatePrediction(
        emse=mu * sigma_v2 * trace_m / denominator,
        method="exact-energy",
        rho_m=rho_m
    )


def emse_steady_small_mu(mu: float, sigma_v2: float, stats: SecondOrderStats) -> SteadyStatePrediction:
    """
    Приближение малого шага: ζ(∞) ≈ μσ_υ²tr(C_u), η(∞) ≈ μσ_υ²N
    """
    trace = float(np.trace(stats.C_u).real)
    if mu * trace > 0.1:
        logger.warning("Small step-size approximation used outside its range", mu=mu, mu_trace=mu * trace)
    return SteadyStatePrediction(
        emse=mu * sigma_v2 * trace,
        msd=mu * sigma_v2 * stats.n_taps,
        method="small-step",
        rho_m=stats.rho_m
    )


def emse_steady_small_mu_partial(
    mu: float,
    sigma_v2: float,
    stats: SecondOrderStats,
    rho_m: Optional[float] = None
) -> SteadyStatePrediction:
    """Малый шаг по частичной ковариации: ζ(∞) ≈ μσ_υ²tr(C_uM)/ρ_M"""
    rho_m = _check_rho(rho_m, stats)
    return SteadyStatePrediction(
        emse=mu * sigma_v2 * float(np.trace(stats.C_uM).real) / rho_m,
        method="small-step",
        rho_m=rho_m
    )


def assemble_operators(
    mu: float,
    P: np.ndarray,
    Q: np.ndarray,
    c_M: np.ndarray,
    sample_count: int = 1
) -> VarianceRelationOperators:
    """
    Сборка F = I - μP + μ²Q и G = [[P/2, -Q/2], [I, 0]]
    """
    size = P.shape[0]
    if P.shape != (size, size) or Q.shape != (size, size) or c_M.shape != (size,):
        raise ShapeMismatchException(f"Inconsistent operator shapes: P {P.shape}, Q {Q.shape}, c_M {c_M.shape}")

    identity = np.eye(size)
    F = identity - mu * P + mu ** 2 * Q
    G = np.block([[P / 2.0, -Q / 2.0], [identity, np.zeros((size, size))]])
    return VarianceRelationOperators(mu=mu, F=F, P=P, Q=Q, c_M=c_M, G=G, sample_count=sample_count)


def build_operators(
    mu: float,
    stats: SecondOrderStats,
    schedule: SelectionSchedule,
    regressors: np.ndarray,
    sample_budget: Optional[int] = None
) -> VarianceRelationOperators:
    """
    Операторы рекурсии взвешенной дисперсии

    P строится точно по C_zM; Q = E[(J z z^H)^T ⊗ (z z^H J)] и
    c_M = vec(E[J z z^H J]^T) усредняются по выборкам регрессора и процессу выбора.
    С p = z*⊗z и q = v⊗v*, v = J z, слагаемое Q равно p q^T.

    Args:
        mu: Шаг адаптации
        stats: Статистики входа
        schedule: Расписание выбора
        regressors: Окна регрессора S×N
        sample_budget: Число используемых выборок (по умолчанию из настроек)

    Returns:
        VarianceRelationOperators: F, P, Q, c_M, G

    Raises:
        BudgetExceededException: N больше допустимого для (2N)²×(2N)² операторов
    """
    settings = get_settings()
    n_taps = stats.n_taps
    if n_taps > settings.MAX_OPERATOR_N:
        raise BudgetExceededException(
            f"Operators for N={n_taps} exceed the budget (N <= {settings.MAX_OPERATOR_N})",
            details={"n": n_taps}
        )

    budget = settings.OPERATOR_SAMPLES if sample_budget is None else sample_budget
    regressors = np.asarray(regressors, dtype=complex)[:budget]
    count = regressors.shape[0]
    if count < 1 or regressors.shape[1] != n_taps:
        raise ShapeMismatchException(f"Expected S x {n_taps} regressors, got {regressors.shape}")

    size = (2 * n_taps) ** 2
    Q = np.zeros((size, size), dtype=complex)
    c_M = np.zeros(size, dtype=complex)
    components = mask_components(schedule, count)

    for start in range(0, count, settings.OPERATOR_CHUNK):
        stop = min(start + settings.OPERATOR_CHUNK, count)
        u = regressors[start:stop]
        z = np.hstack([np.conj(u), u])
        p = (np.conj(z)[:, :, None] * z[:, None, :]).reshape(stop - start, size)

        q = np.zeros_like(p)
        for weight, masks in components:
            flags = masks if masks.ndim == 1 else masks[start:stop]
            v = z * np.concatenate([flags, flags], axis=-1)
            q += weight * (v[:, :, None] * np.conj(v)[:, None, :]).reshape(stop - start, size)

        Q += p.T @ q
        c_M += q.sum(axis=0)

    Q /= count
    c_M /= count

    identity = np.eye(2 * n_taps)
    P = kron(stats.C_zM.T, identity) + kron(identity, stats.C_zM)

    logger.info("Variance-relation operators built", n=n_taps, m=schedule.M, mu=mu, samples=count, size=size)
    return assemble_operators(mu, P, Q, c_M, sample_count=count)


def with_step_size(ops: VarianceRelationOperators, mu: float) -> VarianceRelationOperators:
    """Те же P, Q, c_M с другим шагом (для свипа по μ без повторной оценки Q)"""
    return assemble_operators(mu, ops.P, ops.Q, ops.c_M, ops.sample_count)


def mean_stability_bound(stats: SecondOrderStats) -> float:
    """
    Граница устойчивости в среднем: 2/λ_max(C_zM)

    Returns:
        float: Граница; inf для нулевой матрицы
    """
    lambda_max = float(eig_hermitian(stats.C_zM, compute_vectors=False).values[0])
    if lambda_max <= 0.0:
        logger.warning("Mean stability bound is unbounded: C_zM has no positive eigenvalue")
        return float("inf")
    return 2.0 / lambda_max


def _largest_real_positive(values: np.ndarray, label: str) -> Optional[float]:
    tol = get_settings().REAL_EIG_TOL
    real_positive = (np.abs(values.imag) <= tol * (1.0 + np.abs(values))) & (values.real > 0.0)

    if values.size and not real_positive[np.argmax(np.abs(values))]:
        logger.warning(
            "Largest-modulus eigenvalue is not real positive",
            operator=label,
            value=str(complex(values[np.argmax(np.abs(values))]))
        )
    if not np.any(real_positive):
        return None
    return float(np.max(values.real[real_positive]))


def mean_square_stability_bound(ops: VarianceRelationOperators) -> float:
    """
    Граница устойчивости в среднеквадратичном

    min{1/λ_max(P⁻¹Q), 1/max{λ(G) ∈ ℝ>0}}; вещественным считается λ с
    |Im λ| ≤ tol·(1+|λ|). Ветвь без подходящих собственных значений дает +inf.

    Raises:
        StabilityException: P не положительно определена
    """
    settings = get_settings()
    p_eigs = eig_hermitian(ops.P, compute_vectors=False).values
    if p_eigs[-1] <= 0.0:
        raise StabilityException("P is not positive definite", details={"lambda_min": float(p_eigs[-1])})

    if is_hermitian(ops.Q, tol=1e-8):
        q_min = float(eig_hermitian(ops.Q, compute_vectors=False).values[-1])
        q_scale = float(np.max(np.abs(ops.Q), initial=1.0))
        if q_min < -settings.REAL_EIG_TOL * q_scale:
            logger.warning("Q is not positive semi-definite within tolerance", lambda_min=q_min)

    lambda_pq = _largest_real_positive(eig_general(solve(ops.P, ops.Q)).values, "P^-1 Q")
    lambda_g = _largest_real_positive(eig_general(ops.G).values, "G")

    branch_pq = float("inf") if lambda_pq is None else 1.0 / lambda_pq
    branch_g = float("inf") if lambda_g is None else 1.0 / lambda_g
    logger.debug("Mean-square bound branches", branch_pq=branch_pq, branch_g=branch_g)
    return min(branch_pq, branch_g)


def spectral_radius_f(ops: VarianceRelationOperators) -> float:
    return eig_general(ops.F).spectral_radius


def initial_error_covariance(w_opt: np.ndarray, init_variance: float = 0.0) -> np.ndarray:
    """E[w̃(0) w̃(0)^H] = w°w°^H + s²I (s² = 0 для w(0) = 0)"""
    w_opt = np.asarray(w_opt, dtype=complex)
    return np.outer(w_opt, np.conj(w_opt)) + init_variance * np.eye(w_opt.shape[0])


def learning_curves(
    mu: float,
    sigma_v2: float,
    w_opt: np.ndarray,
    ops: VarianceRelationOperators,
    C_z: np.ndarray,
    horizon: int,
    init_cov: Optional[np.ndarray] = None
) -> LearningCurve:
    """
    Теоретические кривые EMSE и MSD

    ζ(n+1) = ζ(n) + ||w̃(0)||²_{Fⁿ(F-I)s} + μ²σ_υ²c_M^T Fⁿ s, s = vec(C_z) для EMSE
    и vec(I) для MSD. Вектор весов продвигается умножением на F, Fⁿ не строится.

    Args:
        mu: Шаг адаптации
        sigma_v2: σ_υ²
        w_opt: w° длины 2N
        ops: Операторы при том же μ
        C_z: Расширенная ковариация
        horizon: Число итераций
        init_cov: E[w̃(0) w̃(0)^H]; по умолчанию w°w°^H (w(0) = 0)

    Returns:
        LearningCurve: Кривые длины horizon+1

    Raises:
        StabilityException: Нефинитный рост (μ теоретически неустойчив)
    """
    w_opt = np.asarray(w_opt, dtype=complex)
    dim = w_opt.shape[0]
    if ops.dim != dim * dim or C_z.shape != (dim, dim):
        raise ShapeMismatchException(f"Operators of size {ops.dim} do not match w_opt of length {dim}")
    if abs(ops.mu - mu) > 1e-15 * max(1.0, mu):
        raise ShapeMismatchException(f"Operators were built for mu={ops.mu}, requested mu={mu}")

    init_cov = initial_error_covariance(w_opt) if init_cov is None else init_cov
    r = vec(init_cov.T)
    weights = np.column_stack([vec(C_z), vec(np.eye(dim))]).astype(complex)
    noise_gain = mu ** 2 * sigma_v2 * ops.c_M

    values = np.empty((horizon + 1, 2))
    current = r @ weights
    values[0] = current.real
    for n in range(horizon):
        advanced = ops.F @ weights
        current = current + r @ (advanced - weights) + noise_gain @ weights
        weights = advanced
        values[n + 1] = current.real
        if not np.all(np.isfinite(values[n + 1])):
            raise StabilityException(
                "Learning curve grows without bound: step-size is theoretically unstable",
                details={"mu": mu, "iteration": n + 1}
            )

    return LearningCurve(emse=values[:, 0], msd=values[:, 1], source="theory")


def emse_steady_variance_relation(
    mu: float,
    sigma_v2: float,
    ops: VarianceRelationOperators,
    C_z: np.ndarray,
    rho_m: float = 1.0
) -> SteadyStatePrediction:
    """
    Установившиеся EMSE и MSD через рекурсию дисперсии

    ζ(∞) = μ²σ_υ²c_M^T (I - F)⁻¹ vec(C_z); η(∞) - то же с vec(I)

    Raises:
        StabilityException: I - F вырождена или ρ(F) ≥ 1 (на границе устойчивости или за ней)
    """
    dim = C_z.shape[0]
    radius = spectral_radius_f(ops)
    if radius >= 1.0:
        raise StabilityException(
            "at or beyond stability boundary",
            details={"mu": mu, "spectral_radius": radius}
        )

    rhs = np.column_stack([vec(C_z), vec(np.eye(dim))])
    try:
        solution = solve(np.eye(ops.dim) - ops.F, rhs)
    except SingularMatrixException as e:
        raise StabilityException("at or beyond stability boundary", details={"mu": mu, "condition": e.condition})

    emse, msd = (mu ** 2 * sigma_v2 * (ops.c_M @ solution)).real
    if emse < 0.0 or msd < 0.0:
        raise StabilityException(
            "Variance relation produced a negative steady state",
            details={"mu": mu, "emse": float(emse), "msd": float(msd)}
        )
    return SteadyStatePrediction(emse=float(emse), msd=float(msd), method="variance-relation", rho_m=rho_m)


def decay_rates(mu: float, C_z: np.ndarray, beta: int) -> DecayRates:
    """
    Скорости затухания за β итераций

    r_full = ρ((I - μC_z*)^β), r_seq = ρ(I - μC_z*), r_stoch = ρ((I - (μ/β)C_z*)^β)
    """
    identity = np.eye(C_z.shape[0])
    conj_cov = np.conj(C_z)

    def radius(matrix: np.ndarray) -> float:
        return float(np.max(np.abs(eig_hermitian(matrix, compute_vectors=False).values)))

    contraction = identity - mu * conj_cov
    return DecayRates(
        r_full=radius(np.linalg.matrix_power(contraction, beta)),
        r_seq=radius(contraction),
        r_stoch=radius(np.linalg.matrix_power(identity - (mu / beta) * conj_cov, beta)),
        beta=beta
    )


def mean_weight_error_curve(mu: float, C_zM: np.ndarray, w_tilde0: np.ndarray, horizon: int) -> np.ndarray:
    """
    Траектория E[w̃(n)] = (I - μC_zM)ⁿ w̃(0)

    Returns:
        np.ndarray: Массив (horizon+1)×2N
    """
    transition = np.eye(C_zM.shape[0]) - mu * C_zM
    trajectory = np.empty((horizon + 1, C_zM.shape[0]), dtype=complex)
    trajectory[0] = w_tilde0
    for n in range(horizon):
        trajectory[n + 1] = transition @ trajectory[n]
    return trajectory


def estimate_rho_m(eps_a: np.ndarray, e_a: np.ndarray) -> float:
    """
    Эмпирическое ρ_M = Re E[ε_a e_a*] / E|e_a|² по установившемуся участку
    """
    eps_a = np.asarray(eps_a, dtype=complex)
    e_a = np.asarray(e_a, dtype=complex)
    power = float(np.mean(np.abs(e_a) ** 2))
    if power == 0.0:
        raise InsufficientSamplesException("Cannot estimate rho_M from zero a priori error")
    return float(np.mean(eps_a * np.conj(e_a)).real / power)
