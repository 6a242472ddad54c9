"""
Рекурсии ACLMS и PU-ACLMS, расписания выбора коэффициентов, LCG,
учет вычислительной сложности и аудит сохранения энергии
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
import structlog

from puaclms.core.config import get_settings
from puaclms.core.exceptions import ScheduleException, ShapeMismatchException
from puaclms.models.filter import (
    LCG_A,
    LCG_B,
    LCG_C,
    AugmentedWeights,
    EnergyAudit,
    LcgState,
    PartitionKind,
    Quantization,
    ScheduleMode,
    SelectionMask,
    SelectionSchedule,
    StepAudit,
)
from puaclms.models.signal import RegressorWindow, RngStream

logger = structlog.get_logger(__name__)

Algorithm = Literal["aclms", "full", "sequential", "stochastic"]


# ---------------------------------------------------------------------------
# Расписания и LCG
# ---------------------------------------------------------------------------

def make_schedule(
    mode: ScheduleMode,
    n_taps: int,
    m_taps: int,
    seed: int = 0,
    partition: PartitionKind = "contiguous",
    quantization: Quantization = "uniform",
    lcg_a: int = LCG_A,
    lcg_b: int = LCG_B,
    lcg_c: int = LCG_C
) -> SelectionSchedule:
    """
    Построение расписания выбора подмножеств

    Args:
        mode: sequential, stochastic или full
        n_taps: Длина фильтра N
        m_taps: Число обновляемых коэффициентов M
        seed: Начальное состояние LCG (берется по модулю c)
        partition: contiguous - S_t = {(t-1)M..tM-1}; interleaved - S_t = {t-1, t-1+β, ...}
        quantization: Отображение x(n) в номер подмножества
        lcg_a, lcg_b, lcg_c: Константы LCG

    Returns:
        SelectionSchedule: Расписание

    Raises:
        ScheduleException: M вне [1, N], N не кратно M или full при M != N
    """
    if not 1 <= m_taps <= n_taps:
        raise ScheduleException(f"M must satisfy 1 <= M <= N, got N={n_taps}, M={m_taps}")
    if n_taps % m_taps != 0:
        raise ScheduleException(
            f"N must be a multiple of M (N mod M = 0), got N={n_taps}, M={m_taps}",
            details={"n": n_taps, "m": m_taps}
        )
    if mode == "full" and m_taps != n_taps:
        raise ScheduleException(f"Full update requires M = N, got N={n_taps}, M={m_taps}")

    beta = n_taps // m_taps
    indices = np.arange(n_taps)
    if partition == "contiguous":
        subsets = tuple(indices[t * m_taps:(t + 1) * m_taps] for t in range(beta))
    else:
        subsets = tuple(indices[t::beta] for t in range(beta))

    lcg_state = None
    if mode == "stochastic":
        lcg_state = LcgState(x=int(seed) % lcg_c, a=lcg_a, b=lcg_b, c=lcg_c)

    logger.debug("Schedule created", mode=mode, n=n_taps, m=m_taps, beta=beta, partition=partition)
    return SelectionSchedule(
        mode=mode,
        N=n_taps,
        M=m_taps,
        beta=beta,
        subsets=subsets,
        lcg_state=lcg_state,
        quantization=quantization
    )


def lcg_next(state: LcgState) -> tuple[int, LcgState]:
    """
    Шаг LCG: x(n+1) = (a·x(n) + b) mod c

    Returns:
        tuple[int, LcgState]: Новое значение и новое состояние
    """
    x_next = (state.a * state.x + state.b) % state.c
    return x_next, state.model_copy(update={"x": x_next})


def lcg_advance(x: np.ndarray, a: int = LCG_A, b: int = LCG_B, c: int = LCG_C) -> np.ndarray:
    """Векторный шаг LCG для массива состояний (по одному на испытание)"""
    x = np.asarray(x, dtype=np.uint64)
    if c <= 2 ** 32 and a < 2 ** 32 and b < 2 ** 32:
        # a·x + b < 2^64
        return (np.uint64(a) * x + np.uint64(b)) % np.uint64(c)
    return np.array([(a * int(v) + b) % c for v in x.ravel()], dtype=np.uint64).reshape(x.shape)


def lcg_sequence(state: LcgState, count: int) -> tuple[np.ndarray, LcgState]:
    """
    Последовательность x(n), x(n+1), ..., x(n+count-1) и состояние после нее
    """
    values = np.empty(count, dtype=np.uint64)
    x, a, b, c = state.x, state.a, state.b, state.c
    for n in range(count):
        values[n] = x
        x = (a * x + b) % c
    return values, state.model_copy(update={"x": x})


def lcg_to_subset(x, beta: int, c: int = LCG_C, quantization: Quantization = "uniform"):
    """
    Отображение состояния LCG в номер подмножества из {1..β}

    uniform: π = floor(β·x/c) + 1, равные вероятности 1/β;
    nearest: округление аффинного отображения π = (β-1)/(c-1)·x + 1 с ограничением [1, β].

    Args:
        x: Состояние (скаляр или массив), 0 <= x < c
        beta: Число подмножеств
        c: Модуль LCG
        quantization: Способ дискретизации

    Returns:
        int | np.ndarray: Номер подмножества с единицы
    """
    scalar = np.ndim(x) == 0
    if quantization == "uniform":
        if scalar:
            return int(x) * beta // c + 1
        # для массивов c <= 2^32, произведение помещается в uint64
        values = (np.asarray(x, dtype=np.uint64) * np.uint64(beta)) // np.uint64(c) + np.uint64(1)
        return values.astype(np.int64)

    real = (beta - 1) / (c - 1) * np.asarray(x, dtype=np.float64) + 1.0
    values = np.clip(np.rint(real), 1, beta).astype(np.int64)
    return int(values) if scalar else values


def next_mask(sched: SelectionSchedule, n: int) -> SelectionMask:
    """
    Маска выбора на итерации n

    sequential: подмножество mod(n, β)+1; stochastic: π(n) из LCG, после чего
    состояние LCG расписания продвигается; full: все коэффициенты.

    Args:
        sched: Расписание
        n: Номер итерации (n = 0 - первый адаптируемый отсчет)

    Returns:
        SelectionMask: Маска с ровно M установленными флагами
    """
    if sched.mode == "full":
        return SelectionMask(flags=np.ones(sched.N, dtype=bool))
    if sched.mode == "sequential":
        return sched.mask_for(n % sched.beta + 1)

    state = sched.lcg_state
    index = lcg_to_subset(state.x, sched.beta, state.c, sched.quantization)
    _, sched.lcg_state = lcg_next(state)
    return sched.mask_for(index)


# ---------------------------------------------------------------------------
# Рекурсии
# ---------------------------------------------------------------------------

def _check_dims(w: AugmentedWeights, u: RegressorWindow) -> None:
    if w.n_taps != u.n_taps:
        raise ShapeMismatchException(f"Weights of length {w.n_taps} do not match regressor of length {u.n_taps}")


def filter_output(w: AugmentedWeights, u: RegressorWindow) -> complex:
    """Широколинейный выход y(n) = u^T h + u^H g"""
    _check_dims(w, u)
    return complex(np.dot(u.u, w.h) + np.dot(np.conj(u.u), w.g))


def reduced_update(
    h_m: np.ndarray,
    g_m: np.ndarray,
    u_m: np.ndarray,
    e: complex,
    mu: float
) -> tuple[np.ndarray, np.ndarray]:
    """
    Обновление выбранных подвекторов размера M

    h_M <- h_M + μ·e·u_M*, g_M <- g_M + μ·e·u_M
    """
    step = mu * e
    return h_m + step * np.conj(u_m), g_m + step * u_m


def _selected_errors(
    w_tilde: AugmentedWeights,
    u: np.ndarray,
    selected: np.ndarray
) -> complex:
    return complex(np.dot(u[selected], w_tilde.h[selected]) + np.dot(np.conj(u[selected]), w_tilde.g[selected]))


def step_cost(n_taps: int, m_taps: int) -> tuple[int, int]:
    """Стоимость самой рекурсии без выбора подмножества: (8(N+M)+2, 8(N+M))"""
    return 8 * (n_taps + m_taps) + 2, 8 * (n_taps + m_taps)


def pu_aclms_step(
    w: AugmentedWeights,
    u: RegressorWindow,
    d: complex,
    mu: float,
    mask: SelectionMask,
    w_opt: Optional[AugmentedWeights] = None
) -> tuple[AugmentedWeights, StepAudit]:
    """
    Итерация PU-ACLMS

    h <- h + μ·e·(mask∘u*), g <- g + μ·e·(mask∘u). Невыбранные коэффициенты
    копируются без изменений. При известном w° заполняются e_a, ε_a, ε_p.

    Args:
        w: Текущие веса
        u: Окно регрессора
        d: Желаемый отклик
        mu: Шаг адаптации
        mask: Маска выбора
        w_opt: Истинные веса объекта (для аудита)

    Returns:
        tuple[AugmentedWeights, StepAudit]: Новые веса и аудит

    Raises:
        ShapeMismatchException: Несогласованные размеры
    """
    _check_dims(w, u)
    if mask.flags.shape[0] != w.n_taps:
        raise ShapeMismatchException(f"Mask of length {mask.flags.shape[0]} does not match N={w.n_taps}")

    selected = mask.indices
    y = filter_output(w, u)
    e = d - y

    h_next = w.h.copy()
    g_next = w.g.copy()
    h_next[selected], g_next[selected] = reduced_update(w.h[selected], w.g[selected], u.u[selected], e, mu)
    w_next = AugmentedWeights(h=h_next, g=g_next)

    u_m_normsq = float(np.sum(np.abs(u.u[selected]) ** 2))
    mults, adds = step_cost(w.n_taps, mask.M)
    diverged = (
        not np.isfinite(e)
        or abs(e) > get_settings().DIVERGENCE_THRESHOLD
        or not (np.all(np.isfinite(h_next)) and np.all(np.isfinite(g_next)))
    )

    audit = {}
    if w_opt is not None:
        before = w.error_from(w_opt)
        after = w_next.error_from(w_opt)
        audit = {
            "e_a": complex(np.dot(u.u, before.h) + np.dot(np.conj(u.u), before.g)),
            "eps_a": _selected_errors(before, u.u, selected),
            "eps_p": _selected_errors(after, u.u, selected),
        }

    return w_next, StepAudit(
        e=e,
        u_m_normsq=u_m_normsq,
        mult_count=mults,
        add_count=adds,
        diverged=bool(diverged),
        **audit
    )


def aclms_step(w: AugmentedWeights, u: RegressorWindow, d: complex, mu: float) -> tuple[AugmentedWeights, complex]:
    """
    Итерация ACLMS с полным обновлением

    Returns:
        tuple[AugmentedWeights, complex]: Новые веса и ошибка e(n)
    """
    _check_dims(w, u)
    e = d - complex(np.dot(u.u, w.h) + np.dot(np.conj(u.u), w.g))
    step = mu * e
    return AugmentedWeights(h=w.h + step * np.conj(u.u), g=w.g + step * u.u), e


def energy_audit_check(
    step: StepAudit,
    w_tilde_before: AugmentedWeights,
    w_tilde_after: AugmentedWeights,
    mask: SelectionMask
) -> EnergyAudit:
    """
    Проверка точного энергетического баланса на выбранных коэффициентах

    ||h̃_M'||² + ||g̃_M'||² + |ε_a|²/(2||u_M||²) = ||h̃_M||² + ||g̃_M||² + |ε_p|²/(2||u_M||²),
    где штрих - вектор ошибки после обновления.

    Args:
        step: Аудит итерации (с ε_a, ε_p)
        w_tilde_before: Ошибка весов до обновления
        w_tilde_after: Ошибка весов после обновления
        mask: Маска итерации

    Returns:
        EnergyAudit: Обе части баланса и невязка; skipped при ||u_M||² = 0
    """
    if step.u_m_normsq == 0.0:
        logger.debug("Energy audit skipped: zero selected regressor")
        return EnergyAudit(lhs=0.0, rhs=0.0, residual=0.0, skipped=True)

    selected = mask.indices

    def energy(w_tilde: AugmentedWeights) -> float:
        return float(np.sum(np.abs(w_tilde.h[selected]) ** 2) + np.sum(np.abs(w_tilde.g[selected]) ** 2))

    denominator = 2.0 * step.u_m_normsq
    lhs = energy(w_tilde_after) + abs(step.eps_a) ** 2 / denominator
    rhs = energy(w_tilde_before) + abs(step.eps_p) ** 2 / denominator
    return EnergyAudit(lhs=lhs, rhs=rhs, residual=abs(lhs - rhs))


# ---------------------------------------------------------------------------
# Вычислительная сложность
# ---------------------------------------------------------------------------

def complexity_count(algorithm: Algorithm, n_taps: int, m_taps: int) -> tuple[int, int]:
    """
    Число вещественных умножений и сложений на итерацию

    ACLMS: (16N+2, 16N); sequential: (8(N+M)+2, 8(N+M));
    stochastic: (8(N+M)+4, 8(N+M)+2) - шаг LCG и отображение в подмножество.

    Raises:
        ScheduleException: Недопустимые N, M или алгоритм
    """
    if not 1 <= m_taps <= n_taps:
        raise ScheduleException(f"M must satisfy 1 <= M <= N, got N={n_taps}, M={m_taps}")
    if n_taps % m_taps != 0:
        raise ScheduleException(
            f"N must be a multiple of M (N mod M = 0), got N={n_taps}, M={m_taps}",
            details={"n": n_taps, "m": m_taps}
        )

    if algorithm in ("aclms", "full"):
        return step_cost(n_taps, n_taps)
    if algorithm == "sequential":
        return step_cost(n_taps, m_taps)
    if algorithm == "stochastic":
        mults, adds = step_cost(n_taps, m_taps)
        return mults + 2, adds + 2
    raise ScheduleException(f"Unknown algorithm: {algorithm}")


class ArithmeticCounter:
    """
    Эталонная арифметика со счетчиком вещественных операций

    Комплексное умножение: 4 умножения и 2 сложения; комплексное сложение: 2 сложения;
    вещественное на комплексное: 2 умножения.
    """

    def __init__(self):
        self.mults = 0
        self.adds = 0

    def reset(self) -> None:
        self.mults = 0
        self.adds = 0

    def cmul(self, a: complex, b: complex) -> complex:
        self.mults += 4
        self.adds += 2
        return complex(a.real * b.real - a.imag * b.imag, a.real * b.imag + a.imag * b.real)

    def cadd(self, a: complex, b: complex) -> complex:
        self.adds += 2
        return complex(a.real + b.real, a.imag + b.imag)

    def csub(self, a: complex, b: complex) -> complex:
        self.adds += 2
        return complex(a.real - b.real, a.imag - b.imag)

    def rscale(self, r: float, a: complex) -> complex:
        self.mults += 2
        return complex(r * a.real, r * a.imag)

    def imul(self, a: int, b: int) -> int:
        self.mults += 1
        return a * b

    def iadd(self, a: int, b: int) -> int:
        self.adds += 1
        return a + b


def counted_lcg_subset(state: LcgState, beta: int, counter: ArithmeticCounter) -> tuple[int, LcgState]:
    """
    Выбор подмножества с подсчетом операций: шаг LCG (1 умн. + 1 слож.)
    и отображение ⌊(β/c)·x⌋ + 1 (1 умн. + 1 слож.)
    """
    index = counter.iadd((counter.imul(beta, state.x)) // state.c, 1)
    x_next = counter.iadd(counter.imul(state.a, state.x), state.b) % state.c
    return index, state.model_copy(update={"x": x_next})


def counted_pu_aclms_step(
    w: AugmentedWeights,
    u: RegressorWindow,
    d: complex,
    mu: float,
    mask: SelectionMask,
    counter: ArithmeticCounter
) -> tuple[AugmentedWeights, complex]:
    """
    Итерация PU-ACLMS в эталонной арифметике со счетом операций

    Выход: 2N комплексных умножений и 2N-1 сложений; ошибка: 1 сложение;
    μe: 2 умножения; на каждый выбранный коэффициент два произведения и два сложения.
    """
    _check_dims(w, u)
    n_taps = w.n_taps
    conj_u = [complex(v).conjugate() for v in u.u]

    y = counter.cmul(complex(u.u[0]), complex(w.h[0]))
    y = counter.cadd(y, counter.cmul(conj_u[0], complex(w.g[0])))
    for k in range(1, n_taps):
        y = counter.cadd(y, counter.cmul(complex(u.u[k]), complex(w.h[k])))
        y = counter.cadd(y, counter.cmul(conj_u[k], complex(w.g[k])))

    e = counter.csub(complex(d), y)
    step = counter.rscale(mu, e)

    h_next = w.h.astype(complex).copy()
    g_next = w.g.astype(complex).copy()
    for k in mask.indices:
        h_next[k] = counter.cadd(complex(w.h[k]), counter.cmul(step, conj_u[k]))
        g_next[k] = counter.cadd(complex(w.g[k]), counter.cmul(step, complex(u.u[k])))

    return AugmentedWeights(h=h_next, g=g_next), e


# ---------------------------------------------------------------------------
# Фильтр с состоянием
# ---------------------------------------------------------------------------

class PUACLMSFilter:
    """
    Адаптивный фильтр PU-ACLMS с собственным расписанием и счетчиками

    На каждом отсчете: выход, ошибка, выбор подмножества, обновление h и g.
    Экземпляр однопоточный; независимые экземпляры можно передавать в воркеры.
    """

    def __init__(
        self,
        n_taps: int,
        m_taps: int,
        mu: float,
        mode: ScheduleMode = "sequential",
        seed: int = 0,
        init: Literal["zero", "random"] = "zero",
        rng: Optional[RngStream] = None,
        partition: PartitionKind = "contiguous",
        counted: bool = False
    ):
        """
        Инициализация фильтра

        Args:
            n_taps: Длина фильтра N
            m_taps: Число обновляемых коэффициентов M
            mu: Шаг адаптации
            mode: Режим выбора подмножеств
            seed: Зерно LCG для стохастического режима
            init: zero - w(0) = 0; random - w(0) ~ CN(0, 1/(2N))
            rng: Поток для случайной инициализации
            partition: Разбиение на подмножества
            counted: Использовать эталонную арифметику со счетчиком
        """
        self.mu = mu
        self.schedule = make_schedule(mode, n_taps, m_taps, seed=seed, partition=partition)
        self.counted = counted
        self.counter = ArithmeticCounter()
        self.iteration = 0
        self.diverged_at: Optional[int] = None

        if init == "random":
            if rng is None:
                raise ScheduleException("Random initialization requires an RngStream")
            scale = np.sqrt(1.0 / (2.0 * n_taps))
            draws = rng.standard_normal((2, 2 * n_taps))
            taps = scale * np.sqrt(0.5) * (draws[0] + 1j * draws[1])
            self.weights = AugmentedWeights.from_stacked(taps)
        else:
            self.weights = AugmentedWeights.zeros(n_taps)

        logger.debug("PU-ACLMS filter created", n=n_taps, m=m_taps, mu=mu, mode=mode, init=init)

    def _next_mask(self) -> SelectionMask:
        sched = self.schedule
        if self.counted and sched.mode == "stochastic":
            index, sched.lcg_state = counted_lcg_subset(sched.lcg_state, sched.beta, self.counter)
            return sched.mask_for(index)
        return next_mask(sched, self.iteration)

    def adapt(
        self,
        u: RegressorWindow,
        d: complex,
        w_opt: Optional[AugmentedWeights] = None
    ) -> StepAudit:
        """
        Обработка одного отсчета

        Args:
            u: Окно регрессора
            d: Желаемый отклик
            w_opt: Истинные веса (для аудита)

        Returns:
            StepAudit: Аудит итерации; счетчики учитывают и выбор подмножества
        """
        self.counter.reset()
        mask = self._next_mask()

        if self.counted:
            w_next, e = counted_pu_aclms_step(self.weights, u, d, self.mu, mask, self.counter)
            threshold = get_settings().DIVERGENCE_THRESHOLD
            audit = StepAudit(
                e=e,
                u_m_normsq=float(np.sum(np.abs(u.u[mask.indices]) ** 2)),
                mult_count=self.counter.mults,
                add_count=self.counter.adds,
                diverged=bool(not np.isfinite(e) or abs(e) > threshold),
            )
        else:
            w_next, audit = pu_aclms_step(self.weights, u, d, self.mu, mask, w_opt)
            if self.schedule.mode == "stochastic":
                audit = audit.model_copy(update={
                    "mult_count": audit.mult_count + 2,
                    "add_count": audit.add_count + 2,
                })

        if audit.diverged and self.diverged_at is None:
            self.diverged_at = self.iteration
            logger.warning("Filter diverged", iteration=self.iteration, mu=self.mu, error=abs(audit.e))

        self.weights = w_next
        self.iteration += 1
        return audit
