"""
Оркестрация экспериментов: Monte-Carlo испытания, теоретические кривые,
сравнение теории с моделированием, устойчивость, сложность
"""

from multiprocessing import Pool
from typing import NamedTuple, Optional, Sequence

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field

from puaclms.core.config import get_settings
from puaclms.core.exceptions import (
    BudgetExceededException,
    DivergenceException,
    ScheduleException,
    StabilityException,
)
from puaclms.models.filter import SelectionSchedule
from puaclms.models.signal import RngStream
from puaclms.models.theory import DecayRates, LearningCurve, SecondOrderStats, SteadyStatePrediction
from puaclms.schemas.experiment import (
    ComplexityRow,
    ExperimentConfig,
    OverlayReport,
    SimulationSummary,
    StabilityReport,
    to_db,
)
from puaclms.schemas.signal import PlantSpec
from puaclms.services import theory_service
from puaclms.services.filter_service import complexity_count, lcg_advance, lcg_to_subset, make_schedule
from puaclms.services.signal_service import (
    ar_recursion,
    default_plant,
    draw_noncircular,
    generate_ar_input,
    regressor_matrix,
)

logger = structlog.get_logger(__name__)

# Ключи дочерних потоков
PLANT_STREAM_KEY = 1 << 32
THEORY_STREAM_KEY = (1 << 32) + 1
INPUT_KEY, NOISE_KEY, INIT_KEY, LCG_KEY = 0, 1, 2, 3

DRAW_CHUNK = 1024
LEVEL_ABOVE_STEADY_DB = 6.0


class BlockResult(NamedTuple):
    """Результаты блока испытаний (по строке на испытание)"""

    emse: np.ndarray
    msd: np.ndarray
    diverged_at: np.ndarray
    rho_cross: np.ndarray
    rho_power: np.ndarray


class MonteCarloResult(BaseModel):
    """
    Результат Monte-Carlo моделирования
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    curve: LearningCurve = Field(..., description="Средние кривые по неразошедшимся испытаниям")
    summary: SimulationSummary = Field(..., description="Итоги установившегося режима")
    plant: PlantSpec = Field(..., description="Объект эксперимента")


class TheoryResult(BaseModel):
    """
    Результат теоретического расчета
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    curve: Optional[LearningCurve] = Field(default=None, description="Кривые (None при неустойчивом μ)")
    predictions: dict[str, SteadyStatePrediction] = Field(default_factory=dict, description="Установившиеся EMSE/MSD")
    stability: StabilityReport = Field(..., description="Границы устойчивости")
    decay: DecayRates = Field(..., description="Скорости затухания")
    instability: Optional[str] = Field(default=None, description="Сообщение о неустойчивости")


class CompareResult(BaseModel):
    """
    Теория и моделирование на одной конфигурации
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    theory: TheoryResult
    simulation: MonteCarloResult
    overlay: OverlayReport


class SweepPoint(BaseModel):
    """
    Точка зависимости установившихся EMSE/MSD от μ
    """

    mu: float
    theory_emse: Optional[float] = None
    theory_msd: Optional[float] = None
    simulated_emse: Optional[float] = None
    simulated_msd: Optional[float] = None


class SignalSamples(BaseModel):
    """
    Реализация желаемого отклика d(n) и шума измерений υ(n)
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    d: np.ndarray = Field(..., description="Желаемый отклик")
    v: np.ndarray = Field(..., description="Шум измерений")


def _init_weights(stream: RngStream, n_taps: int) -> np.ndarray:
    """Случайные начальные веса w(0) ~ CN(0, 1/(2N)), длина 2N"""
    draws = stream.standard_normal((2, 2 * n_taps))
    return np.sqrt(1.0 / (2.0 * n_taps)) * np.sqrt(0.5) * (draws[0] + 1j * draws[1])


def simulate_block(cfg: ExperimentConfig, plant: PlantSpec, trial_ids: Sequence[int]) -> BlockResult:
    """
    Векторизованное моделирование блока испытаний

    Каждое испытание владеет своими потоками (вход, шум, инициализация, LCG),
    выведенными из (seed, номер испытания), поэтому результат испытания не
    зависит от разбиения на блоки и числа процессов.

    Args:
        cfg: Конфигурация эксперимента
        plant: Объект
        trial_ids: Номера испытаний блока

    Returns:
        BlockResult: Кривые EMSE/MSD и итерации расходимости по испытаниям
    """
    settings = get_settings()
    n_taps, horizon, mu = cfg.n, cfg.horizon, cfg.mu
    trials = len(trial_ids)
    warmup = settings.WARMUP_FACTOR * n_taps
    threshold = settings.DIVERGENCE_THRESHOLD
    steady_start = horizon - cfg.steady_window

    root = RngStream(cfg.seed)
    streams = [root.spawn(t) for t in trial_ids]
    input_streams = [s.spawn(INPUT_KEY) for s in streams]
    noise_streams = [s.spawn(NOISE_KEY) for s in streams]
    input_spec, noise_spec = cfg.input_noise, plant.noise_spec

    h_opt, g_opt = plant.h_opt[None, :], plant.g_opt[None, :]
    h = np.zeros((trials, n_taps), dtype=complex)
    g = np.zeros((trials, n_taps), dtype=complex)
    if cfg.init == "random":
        taps = np.stack([_init_weights(s.spawn(INIT_KEY), n_taps) for s in streams])
        h, g = taps[:, :n_taps].copy(), taps[:, n_taps:].copy()

    schedule = make_schedule(cfg.mode, n_taps, cfg.m, partition=cfg.partition)
    table = schedule.mask_table
    lcg_c = 2 ** 32
    lcg_x = np.array([s.spawn(LCG_KEY).seed % lcg_c for s in streams], dtype=np.uint64)

    emse = np.zeros((trials, horizon))
    msd = np.zeros((trials, horizon))
    diverged_at = np.full(trials, -1, dtype=np.int64)
    alive = np.ones(trials, dtype=bool)
    rho_cross = np.zeros(trials)
    rho_power = np.zeros(trials)

    window = np.zeros((trials, n_taps), dtype=complex)
    u_current = np.zeros(trials, dtype=complex)
    q_chunk = v_chunk = None

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(warmup + horizon):
            if k % DRAW_CHUNK == 0:
                length = min(DRAW_CHUNK, warmup + horizon - k)
                q_chunk = np.stack([draw_noncircular(input_spec, s, length) for s in input_streams])
                v_chunk = np.stack([draw_noncircular(noise_spec, s, length) for s in noise_streams])

            u_current = ar_recursion(u_current, q_chunk[:, k % DRAW_CHUNK], cfg.ar_a, cfg.ar_b)
            window[:, 1:] = window[:, :-1]
            window[:, 0] = u_current
            if k < warmup:
                continue

            n = k - warmup
            u = window
            u_conj = np.conj(u)
            wt_h = h_opt - h
            wt_g = g_opt - g
            e_a = (u * wt_h).sum(axis=1) + (u_conj * wt_g).sum(axis=1)
            e = e_a + v_chunk[:, k % DRAW_CHUNK]

            emse[:, n] = np.abs(e_a) ** 2
            msd[:, n] = (np.abs(wt_h) ** 2).sum(axis=1) + (np.abs(wt_g) ** 2).sum(axis=1)

            if schedule.mode == "stochastic":
                mask = table[lcg_to_subset(lcg_x, schedule.beta, lcg_c) - 1]
                lcg_x = lcg_advance(lcg_x)
            elif schedule.mode == "sequential":
                mask = table[n % schedule.beta]
            else:
                mask = table[0]

            if n >= steady_start:
                eps_a = (mask * u * wt_h).sum(axis=1) + (mask * u_conj * wt_g).sum(axis=1)
                rho_cross += (eps_a * np.conj(e_a)).real
                rho_power += np.abs(e_a) ** 2

            step = (mu * e)[:, None]
            h = np.where(mask, h + step * u_conj, h)
            g = np.where(mask, g + step * u, g)

            bad = alive & (~np.isfinite(e) | (np.abs(e) > threshold))
            if bad.any():
                diverged_at[bad] = n
                alive &= ~bad
                h[bad] = 0.0
                g[bad] = 0.0

    return BlockResult(emse, msd, diverged_at, rho_cross, rho_power)


def iterations_to_level(curve: np.ndarray, level: float) -> Optional[int]:
    """
    Первая итерация, на которой кривая не выше уровня

    Returns:
        Optional[int]: Номер итерации или None, если уровень не достигнут
    """
    hits = np.flatnonzero(np.asarray(curve) <= level)
    return int(hits[0]) if hits.size else None


def overlay(theory: LearningCurve, simulated: LearningCurve, steady_window: int, skip: int = 10) -> OverlayReport:
    """
    Отклонения теоретических кривых от моделируемых в дБ

    Args:
        theory: Теоретические кривые
        simulated: Моделируемые кривые
        steady_window: Длина окна установившегося режима
        skip: Пропуск начальных итераций

    Returns:
        OverlayReport: Максимальные отклонения и итерации до уровня установившегося +6 дБ
    """
    length = min(theory.length, simulated.length)

    def max_deviation(a: np.ndarray, b: np.ndarray) -> float:
        a, b = a[skip:length], b[skip:length]
        valid = (a > 0) & (b > 0)
        if not np.any(valid):
            return 0.0
        return float(np.max(np.abs(10.0 * np.log10(a[valid]) - 10.0 * np.log10(b[valid]))))

    theory_steady = float(np.mean(theory.emse[length - steady_window:length]))
    simulated_steady = float(np.mean(simulated.emse[length - steady_window:length]))
    steady_deviation = abs(to_db(theory_steady) - to_db(simulated_steady))
    if not np.isfinite(steady_deviation):
        steady_deviation = 0.0

    factor = 10.0 ** (LEVEL_ABOVE_STEADY_DB / 10.0)
    return OverlayReport(
        max_emse_deviation_db=max_deviation(theory.emse, simulated.emse),
        max_msd_deviation_db=max_deviation(theory.msd, simulated.msd),
        steady_emse_deviation_db=steady_deviation,
        skip=skip,
        theory_iterations_to_level=iterations_to_level(theory.emse[:length], theory_steady * factor),
        simulated_iterations_to_level=iterations_to_level(simulated.emse[:length], simulated_steady * factor),
    )


class ExperimentService:
    """
    Сервис экспериментов PU-ACLMS
    """

    def __init__(self, workers: Optional[int] = None):
        """
        Инициализация сервиса

        Args:
            workers: Число процессов для блоков испытаний (по умолчанию из настроек)
        """
        self.settings = get_settings()
        self.workers = workers

    # ------------------------------------------------------------------
    # Общие части
    # ------------------------------------------------------------------

    def plant(self, cfg: ExperimentConfig) -> PlantSpec:
        """Объект эксперимента: один на конфигурацию, общий для всех испытаний и теории"""
        stream = RngStream(cfg.plant_seed) if cfg.plant_seed is not None else RngStream(cfg.seed).spawn(PLANT_STREAM_KEY)
        return default_plant(cfg.n, cfg.sigma_v2, stream, cfg.noise_v_cvar)

    def schedule(self, cfg: ExperimentConfig) -> SelectionSchedule:
        seed = RngStream(cfg.seed).spawn(THEORY_STREAM_KEY).spawn(LCG_KEY).seed
        return make_schedule(cfg.mode, cfg.n, cfg.m, seed=seed, partition=cfg.partition)

    def regressors(self, cfg: ExperimentConfig, count: Optional[int] = None) -> np.ndarray:
        """Окна регрессора из длинной стационарной реализации входа"""
        count = self.settings.OPERATOR_SAMPLES if count is None else count
        stream = RngStream(cfg.seed).spawn(THEORY_STREAM_KEY).spawn(INPUT_KEY)
        signal = generate_ar_input(
            cfg.input_noise,
            stream,
            count + cfg.n - 1,
            cfg.ar_a,
            cfg.ar_b,
            warmup=self.settings.WARMUP_FACTOR * cfg.n
        )
        return regressor_matrix(signal, cfg.n)

    def stats(self, cfg: ExperimentConfig, regressors: Optional[np.ndarray] = None) -> SecondOrderStats:
        regressors = self.regressors(cfg) if regressors is None else regressors
        return theory_service.estimate_stats(regressors, cfg.n, self.schedule(cfg))

    # ------------------------------------------------------------------
    # Моделирование
    # ------------------------------------------------------------------

    def run_monte_carlo(self, cfg: ExperimentConfig) -> MonteCarloResult:
        """
        Monte-Carlo моделирование с усреднением по испытаниям

        Разошедшиеся испытания исключаются из средних и учитываются отдельно.

        Args:
            cfg: Конфигурация эксперимента

        Returns:
            MonteCarloResult: Средние кривые и итоги

        Raises:
            DivergenceException: Разошлись все испытания
        """
        plant = self.plant(cfg)
        block = self.settings.TRIAL_BLOCK
        blocks = [list(range(start, min(start + block, cfg.trials))) for start in range(0, cfg.trials, block)]
        workers = cfg.workers or self.workers or self.settings.WORKERS

        logger.info(
            "Monte-Carlo run started",
            n=cfg.n, m=cfg.m, mode=cfg.mode, mu=cfg.mu,
            trials=cfg.trials, horizon=cfg.horizon, workers=workers
        )

        arguments = [(cfg, plant, ids) for ids in blocks]
        if workers > 1 and len(blocks) > 1:
            with Pool(min(workers, len(blocks))) as pool:
                results = pool.starmap(simulate_block, arguments)
        else:
            results = [simulate_block(*args) for args in arguments]

        emse = np.concatenate([r.emse for r in results])
        msd = np.concatenate([r.msd for r in results])
        diverged_at = np.concatenate([r.diverged_at for r in results])
        rho_cross = np.concatenate([r.rho_cross for r in results])
        rho_power = np.concatenate([r.rho_power for r in results])

        ok = diverged_at < 0
        diverged = int(np.count_nonzero(~ok))
        if diverged:
            logger.warning("Divergent trials excluded", mu=cfg.mu, diverged=diverged, trials=cfg.trials)
        if not np.any(ok):
            bound = theory_service.mean_stability_bound(
                self.stats(cfg, self.regressors(cfg, self.settings.MIN_STATS_SAMPLES))
            )
            raise DivergenceException(
                f"All {cfg.trials} trials diverged at mu={cfg.mu} (mean stability bound {bound:.4g})",
                mu=cfg.mu,
                bound=bound
            )

        window = cfg.steady_window
        per_trial_steady = emse[ok, -window:].mean(axis=1)
        used = int(np.count_nonzero(ok))
        stderr = float(per_trial_steady.std(ddof=1) / np.sqrt(used)) if used > 1 else 0.0
        power = float(rho_power[ok].sum())

        curve = LearningCurve(emse=emse[ok].mean(axis=0), msd=msd[ok].mean(axis=0), source="simulated", trials=used)
        summary = SimulationSummary(
            steady_emse=float(per_trial_steady.mean()),
            steady_msd=float(msd[ok, -window:].mean()),
            steady_emse_stderr=stderr,
            trials_used=used,
            trials_diverged=diverged,
            divergence_iterations=[int(v) for v in diverged_at[~ok]],
            rho_m_empirical=float(rho_cross[ok].sum()) / power if power > 0 else None,
        )

        logger.info(
            "Monte-Carlo run finished",
            steady_emse_db=summary.steady_emse_db,
            steady_msd_db=summary.steady_msd_db,
            trials_used=used,
            trials_diverged=diverged
        )
        return MonteCarloResult(curve=curve, summary=summary, plant=plant)

    # ------------------------------------------------------------------
    # Теория
    # ------------------------------------------------------------------

    def _stability(self, cfg: ExperimentConfig, stats: SecondOrderStats, ops) -> StabilityReport:
        return StabilityReport(
            mu=cfg.mu,
            mean_bound=theory_service.mean_stability_bound(stats),
            mean_square_bound=theory_service.mean_square_stability_bound(ops),
            spectral_radius_f=theory_service.spectral_radius_f(ops),
            circularity=stats.circularity
        )

    def run_stability(self, cfg: ExperimentConfig) -> StabilityReport:
        """
        Границы устойчивости в среднем и в среднеквадратичном для конфигурации
        """
        regressors = self.regressors(cfg)
        stats = self.stats(cfg, regressors)
        ops = theory_service.build_operators(cfg.mu, stats, self.schedule(cfg), regressors)
        report = self._stability(cfg, stats, ops)
        logger.info(
            "Stability bounds computed",
            mu=cfg.mu,
            mean_bound=report.mean_bound,
            mean_square_bound=report.mean_square_bound
        )
        return report

    def run_theory(self, cfg: ExperimentConfig) -> TheoryResult:
        """
        Теоретические кривые, установившиеся значения тремя методами и обе границы

        Raises:
            BudgetExceededException: N больше допустимого для рекурсии кривых
        """
        if cfg.n > self.settings.MAX_CURVE_N:
            raise BudgetExceededException(
                f"Learning-curve recursion is limited to N <= {self.settings.MAX_CURVE_N}, got N={cfg.n}",
                details={"n": cfg.n}
            )

        plant = self.plant(cfg)
        schedule = self.schedule(cfg)
        regressors = self.regressors(cfg)
        stats = theory_service.estimate_stats(regressors, cfg.n, schedule)
        ops = theory_service.build_operators(cfg.mu, stats, schedule, regressors)
        stability = self._stability(cfg, stats, ops)

        predictions: dict[str, SteadyStatePrediction] = {
            "small-step": theory_service.emse_steady_small_mu(cfg.mu, cfg.sigma_v2, stats),
            "small-step-partial": theory_service.emse_steady_small_mu_partial(cfg.mu, cfg.sigma_v2, stats),
        }
        try:
            predictions["exact-energy"] = theory_service.emse_steady_exact(cfg.mu, cfg.sigma_v2, stats)
        except StabilityException as e:
            logger.warning("Exact-energy prediction unavailable", mu=cfg.mu, reason=e.message)
        try:
            predictions["variance-relation"] = theory_service.emse_steady_variance_relation(
                cfg.mu, cfg.sigma_v2, ops, stats.C_z, rho_m=stats.rho_m
            )
        except StabilityException as e:
            logger.warning("Variance-relation prediction unavailable", mu=cfg.mu, reason=e.message)

        decay = theory_service.decay_rates(cfg.mu, stats.C_z, schedule.beta)

        if cfg.mu >= stability.mean_square_bound:
            message = (
                f"mu={cfg.mu} is at or above the mean-square stability bound "
                f"{stability.mean_square_bound:.4g}; learning curves are not defined"
            )
            logger.warning("Theoretical learning curves suppressed", mu=cfg.mu, bound=stability.mean_square_bound)
            return TheoryResult(predictions=predictions, stability=stability, decay=decay, instability=message)

        init_variance = 1.0 / (2.0 * cfg.n) if cfg.init == "random" else 0.0
        curve = theory_service.learning_curves(
            cfg.mu,
            cfg.sigma_v2,
            plant.w_opt,
            ops,
            stats.C_z,
            cfg.horizon - 1,
            init_cov=theory_service.initial_error_covariance(plant.w_opt, init_variance)
        )
        logger.info(
            "Theory run finished",
            mu=cfg.mu,
            steady_emse_db=to_db(float(curve.emse[-1])),
            mean_square_bound=stability.mean_square_bound
        )
        return TheoryResult(curve=curve, predictions=predictions, stability=stability, decay=decay)

    def run_compare(self, cfg: ExperimentConfig) -> CompareResult:
        """
        Теория и моделирование на одной конфигурации с отклонениями в дБ
        """
        theory = self.run_theory(cfg)
        if theory.curve is None:
            raise StabilityException(theory.instability, details={"mu": cfg.mu})
        simulation = self.run_monte_carlo(cfg)
        report = overlay(theory.curve, simulation.curve, cfg.steady_window)
        logger.info(
            "Comparison finished",
            max_emse_deviation_db=report.max_emse_deviation_db,
            steady_emse_deviation_db=report.steady_emse_deviation_db
        )
        return CompareResult(theory=theory, simulation=simulation, overlay=report)

    def sweep_mu(self, cfg: ExperimentConfig, mus: Sequence[float], simulate: bool = False) -> list[SweepPoint]:
        """
        Установившиеся EMSE и MSD как функции шага μ

        Q и c_M оцениваются один раз, затем F пересобирается для каждого μ.

        Args:
            cfg: Базовая конфигурация
            mus: Сетка шагов
            simulate: Дополнительно выполнять Monte-Carlo в каждой точке

        Returns:
            list[SweepPoint]: Точки зависимости
        """
        schedule = self.schedule(cfg)
        regressors = self.regressors(cfg)
        stats = theory_service.estimate_stats(regressors, cfg.n, schedule)
        base = theory_service.build_operators(mus[0], stats, schedule, regressors)

        points = []
        for mu in mus:
            point = SweepPoint(mu=mu)
            try:
                prediction = theory_service.emse_steady_variance_relation(
                    mu, cfg.sigma_v2, theory_service.with_step_size(base, mu), stats.C_z, rho_m=stats.rho_m
                )
                point.theory_emse, point.theory_msd = prediction.emse, prediction.msd
            except StabilityException as e:
                logger.warning("Sweep point without theory", mu=mu, reason=e.message)
            if simulate:
                try:
                    summary = self.run_monte_carlo(cfg.model_copy(update={"mu": mu})).summary
                    point.simulated_emse, point.simulated_msd = summary.steady_emse, summary.steady_msd
                except DivergenceException as e:
                    logger.warning("Sweep point without simulation", mu=mu, reason=e.message)
            points.append(point)
        return points

    def run_schemes(self, cfg: ExperimentConfig) -> dict[str, MonteCarloResult]:
        """
        Последовательная и стохастическая схемы на одной конфигурации

        Объект, вход и шум общие: меняется только выбор подмножеств.

        Raises:
            ScheduleException: M = N, сравнивать нечего
        """
        if cfg.m == cfg.n:
            raise ScheduleException(f"Scheme comparison needs M < N, got N={cfg.n}, M={cfg.m}")
        return {
            mode: self.run_monte_carlo(cfg.model_copy(update={"mode": mode}))
            for mode in ("sequential", "stochastic")
        }

    def sample_signals(self, cfg: ExperimentConfig, count: int) -> SignalSamples:
        """
        Отсчеты d(n) и υ(n) первого испытания

        Args:
            cfg: Конфигурация эксперимента
            count: Число отсчетов

        Returns:
            SignalSamples: Желаемый отклик и шум измерений
        """
        plant = self.plant(cfg)
        trial = RngStream(cfg.seed).spawn(0)
        signal = generate_ar_input(
            cfg.input_noise,
            trial.spawn(INPUT_KEY),
            count + cfg.n - 1,
            cfg.ar_a,
            cfg.ar_b,
            warmup=self.settings.WARMUP_FACTOR * cfg.n
        )
        u = regressor_matrix(signal, cfg.n)
        v = draw_noncircular(plant.noise_spec, trial.spawn(NOISE_KEY), count)
        d = u @ plant.h_opt + np.conj(u) @ plant.g_opt + v
        logger.debug("Signal samples drawn", count=count, n=cfg.n)
        return SignalSamples(d=d, v=v)

    # ------------------------------------------------------------------
    # Сложность
    # ------------------------------------------------------------------

    @staticmethod
    def complexity_table(n_taps: int, m_taps: int) -> list[ComplexityRow]:
        """
        Строки таблицы сложности для ACLMS и двух схем PU-ACLMS
        """
        full_mults, full_adds = complexity_count("aclms", n_taps, n_taps)
        rows = []
        for algorithm in ("aclms", "sequential", "stochastic"):
            mults, adds = complexity_count(algorithm, n_taps, m_taps)
            rows.append(ComplexityRow(
                algorithm=algorithm,
                n=n_taps,
                m=n_taps if algorithm == "aclms" else m_taps,
                real_mults=mults,
                real_adds=adds,
                saving=1.0 - (mults + adds) / (full_mults + full_adds)
            ))
        return rows
