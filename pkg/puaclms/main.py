"""
Командная строка PU-ACLMS
"""

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import structlog
from dotenv import dotenv_values
from pydantic import ValidationError

from puaclms.core.config import get_settings
from puaclms.core.exceptions import (
    EXIT_NUMERICAL_ERROR,
    EXIT_OK,
    ConfigException,
    handle_exception,
)
from puaclms.core.logging import setup_logging
from puaclms.schemas.experiment import ExperimentConfig, to_db
from puaclms.services.harness_service import ExperimentService
from puaclms.services.report_service import (
    curve_records,
    write_curve_csv,
    write_pair_csv,
    write_plot_script,
    write_schemes_csv,
    write_signals_csv,
    write_sweep_csv,
    write_table_plot_script,
)

logger = structlog.get_logger(__name__)

OVERRIDES = ("mu", "trials", "seed")


class CLIArgumentParser(argparse.ArgumentParser):
    """
    Парсер, превращающий ошибки argparse в ConfigException (код возврата 1)
    """

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise ConfigException(f"{self.prog}: {message}")


def load_config(path: Path, overrides: Optional[dict] = None) -> ExperimentConfig:
    """
    Чтение плоского файла key=value и валидация

    Args:
        path: Путь к файлу конфигурации
        overrides: Значения из флагов командной строки (None пропускаются)

    Returns:
        ExperimentConfig: Проверенная конфигурация

    Raises:
        ConfigException: Файл отсутствует или содержит недопустимые значения
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigException(f"Config file not found: {path}", details={"path": str(path)})

    values = {key: value for key, value in dotenv_values(path).items()}
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value

    try:
        return ExperimentConfig.model_validate(values)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors())
        raise ConfigException(f"Invalid config {path}: {problems}", details={"path": str(path)})


def _add_common(command: argparse.ArgumentParser, step_override: bool = True) -> None:
    command.add_argument("--config", required=True, type=Path, help="Файл конфигурации key=value")
    if step_override:
        command.add_argument("--mu", type=float, default=None, help="Переопределить шаг адаптации")
    command.add_argument("--trials", type=int, default=None, help="Переопределить число испытаний")
    command.add_argument("--seed", type=int, default=None, help="Переопределить зерно")
    command.add_argument("--out", type=Path, default=None, help="Каталог вывода")


def build_parser() -> CLIArgumentParser:
    parser = CLIArgumentParser(
        prog="puaclms",
        description="PU-ACLMS: моделирование, теория и сравнение"
    )
    parser.add_argument("--log-level", default=None, help="Уровень логирования (по умолчанию из настроек)")
    commands = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("simulate", "Monte-Carlo моделирование"),
        ("theory", "Теоретические кривые и границы"),
        ("compare", "Теория против моделирования"),
        ("stability", "Границы устойчивости"),
        ("schemes", "Последовательная и стохастическая схемы на одних данных"),
    ):
        _add_common(commands.add_parser(name, help=text))

    sweep = commands.add_parser("sweep", help="Установившиеся EMSE/MSD в зависимости от μ")
    _add_common(sweep, step_override=False)
    sweep.add_argument("--mus", required=True, help="Шаги через запятую, например 0.005,0.01,0.02")
    sweep.add_argument("--simulate", action="store_true", help="Добавить Monte-Carlo в каждой точке")

    signals = commands.add_parser("signals", help="Отсчеты d(n) и υ(n) одного испытания")
    _add_common(signals, step_override=False)
    signals.add_argument("--samples", type=int, default=1000, help="Число отсчетов")

    complexity = commands.add_parser("complexity", help="Таблица вычислительной сложности")
    complexity.add_argument("--n", type=int, required=True, help="Длина фильтра N")
    complexity.add_argument("--m", type=int, required=True, help="Число обновляемых коэффициентов M")
    return parser


def parse_mus(text: str) -> list[float]:
    """
    Сетка шагов из строки через запятую

    Raises:
        ConfigException: Пустая сетка, нечисловое или отрицательное значение
    """
    try:
        mus = [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise ConfigException(f"Invalid step-size list: {text!r}")
    if not mus or any(mu < 0 for mu in mus):
        raise ConfigException(f"Step-size list must hold non-negative values, got {text!r}")
    return mus


def _stem(command: str, cfg: ExperimentConfig) -> str:
    return f"{command}_N{cfg.n}_M{cfg.m}_{cfg.mode}_mu{cfg.mu:g}"


def _print_predictions(theory) -> None:
    for name, prediction in theory.predictions.items():
        msd = "-" if prediction.msd is None else f"{prediction.msd:.6e}"
        print(f"  {name:<20} emse={prediction.emse:.6e} ({prediction.emse_db:.2f} dB)  msd={msd}")


def _print_stability(report) -> None:
    print(f"mean bound          : {report.mean_bound:.6g}")
    print(f"mean-square bound   : {report.mean_square_bound:.6g}")
    print(f"bound ratio         : {report.bound_ratio:.4f}")
    print(f"spectral radius F   : {report.spectral_radius_f:.8f} (mu={report.mu:g})")
    print(f"circularity |D|/|C| : {report.circularity:.4f}")


def _run_simulate(service: ExperimentService, cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> int:
    result = service.run_monte_carlo(cfg)
    csv_path = write_curve_csv(out / f"{_stem('simulate', cfg)}.csv", curve_records(result.curve))
    write_plot_script(csv_path, f"PU-ACLMS N={cfg.n} M={cfg.m} {cfg.mode}")
    summary = result.summary
    print(f"steady-state EMSE : {summary.steady_emse:.6e} ({summary.steady_emse_db:.2f} dB) ± {summary.steady_emse_stderr:.2e}")
    print(f"steady-state MSD  : {summary.steady_msd:.6e} ({summary.steady_msd_db:.2f} dB)")
    print(f"trials used       : {summary.trials_used} (diverged: {summary.trials_diverged})")
    if summary.rho_m_empirical is not None:
        print(f"rho_M empirical   : {summary.rho_m_empirical:.4f} (M/N = {cfg.m / cfg.n:.4f})")
    print(f"csv               : {csv_path}")
    return EXIT_OK


def _run_theory(service: ExperimentService, cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> int:
    theory = service.run_theory(cfg)
    _print_stability(theory.stability)
    print("steady-state predictions:")
    _print_predictions(theory)
    print(f"decay per beta iterations: full={theory.decay.r_full:.6f} seq={theory.decay.r_seq:.6f} "
          f"stoch={theory.decay.r_stoch:.6f} ratio={theory.decay.ratio:.3f}")
    if theory.curve is None:
        print(f"UNSTABLE: {theory.instability}")
        return EXIT_NUMERICAL_ERROR

    csv_path = write_curve_csv(out / f"{_stem('theory', cfg)}.csv", curve_records(theory.curve))
    write_plot_script(csv_path, f"PU-ACLMS theory N={cfg.n} M={cfg.m} {cfg.mode}")
    print(f"csv: {csv_path}")
    return EXIT_OK


def _run_compare(service: ExperimentService, cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> int:
    result = service.run_compare(cfg)
    stem = _stem("compare", cfg)
    records = list(curve_records(result.theory.curve)) + list(curve_records(result.simulation.curve))
    csv_path = write_curve_csv(out / f"{stem}.csv", records)
    write_pair_csv(out / f"{stem}_pairs.csv", result.theory.curve, result.simulation.curve)
    write_plot_script(csv_path, f"PU-ACLMS theory vs simulation N={cfg.n} M={cfg.m} {cfg.mode}")

    report = result.overlay
    print(f"max EMSE deviation    : {report.max_emse_deviation_db:.3f} dB (after {report.skip} iterations)")
    print(f"max MSD deviation     : {report.max_msd_deviation_db:.3f} dB")
    print(f"steady EMSE deviation : {report.steady_emse_deviation_db:.3f} dB")
    print(f"iterations to steady+6 dB: theory={report.theory_iterations_to_level} "
          f"simulated={report.simulated_iterations_to_level}")
    print(f"csv: {csv_path}")
    return EXIT_OK


def _run_stability(service: ExperimentService, cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> int:
    _print_stability(service.run_stability(cfg))
    return EXIT_OK


def _run_sweep(service: ExperimentService, cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> int:
    mus = parse_mus(args.mus)
    points = service.sweep_mu(cfg, mus, simulate=args.simulate)
    stem = f"sweep_N{cfg.n}_M{cfg.m}_{cfg.mode}"
    csv_path = write_sweep_csv(out / f"{stem}.csv", points)
    series = ["theory_emse_db", "theory_msd_db"]
    if args.simulate:
        series += ["simulated_emse_db", "simulated_msd_db"]
    write_table_plot_script(
        csv_path, f"PU-ACLMS N={cfg.n} M={cfg.m} {cfg.mode}: steady state vs mu",
        "mu", series, "dB", log_x=True, marker="o-"
    )

    def fmt(value: Optional[float]) -> str:
        return "-" if value is None else f"{to_db(value):.2f}"

    print(f"{'mu':>10}{'EMSE th':>10}{'MSD th':>10}{'EMSE sim':>10}{'MSD sim':>10}")
    for p in points:
        print(f"{p.mu:>10g}{fmt(p.theory_emse):>10}{fmt(p.theory_msd):>10}"
              f"{fmt(p.simulated_emse):>10}{fmt(p.simulated_msd):>10}")
    print(f"csv: {csv_path}")
    return EXIT_OK


def _run_schemes(service: ExperimentService, cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> int:
    results = service.run_schemes(cfg)
    stem = f"schemes_N{cfg.n}_M{cfg.m}_mu{cfg.mu:g}"
    csv_path = write_schemes_csv(out / f"{stem}.csv", {mode: r.curve for mode, r in results.items()})
    write_table_plot_script(
        csv_path, f"PU-ACLMS N={cfg.n} M={cfg.m}: sequential vs stochastic",
        "iteration", [f"{mode}_msd_db" for mode in results], "MSD, dB"
    )
    for mode, result in results.items():
        summary = result.summary
        print(f"{mode:<11} steady EMSE {summary.steady_emse_db:.2f} dB  MSD {summary.steady_msd_db:.2f} dB  "
              f"(trials {summary.trials_used}, diverged {summary.trials_diverged})")
    print(f"csv: {csv_path}")
    return EXIT_OK


def _run_signals(service: ExperimentService, cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> int:
    if args.samples < 1:
        raise ConfigException(f"--samples must be positive, got {args.samples}")
    samples = service.sample_signals(cfg, args.samples)
    csv_path = write_signals_csv(out / f"signals_N{cfg.n}_seed{cfg.seed}.csv", samples.d, samples.v)
    write_table_plot_script(
        csv_path, f"d(n) and v(n), N={cfg.n}", "iteration", ["d_real", "d_imag", "v_real", "v_imag"], "amplitude"
    )
    print(f"E|d|^2 : {float(np.mean(np.abs(samples.d) ** 2)):.6f}")
    print(f"E|v|^2 : {float(np.mean(np.abs(samples.v) ** 2)):.6f} (sigma_v2 = {cfg.sigma_v2:g})")
    print(f"csv: {csv_path}")
    return EXIT_OK


def _run_complexity(n_taps: int, m_taps: int) -> int:
    rows = ExperimentService.complexity_table(n_taps, m_taps)
    print(f"{'algorithm':<12}{'N':>5}{'M':>5}{'real mults':>12}{'real adds':>12}{'saving':>9}")
    for row in rows:
        print(f"{row.algorithm:<12}{row.n:>5}{row.m:>5}{row.real_mults:>12}{row.real_adds:>12}{row.saving:>8.1%}")
    return EXIT_OK


HANDLERS = {
    "simulate": _run_simulate,
    "theory": _run_theory,
    "compare": _run_compare,
    "stability": _run_stability,
    "sweep": _run_sweep,
    "schemes": _run_schemes,
    "signals": _run_signals,
}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Точка входа командной строки

    Args:
        argv: Аргументы без имени программы (по умолчанию sys.argv[1:])

    Returns:
        int: 0 - успех, 1 - ошибка конфигурации, 2 - численная ошибка
    """
    settings = get_settings()
    setup_logging(settings.LOG_LEVEL, settings.DEBUG, settings.LOG_DIR)
    try:
        args = build_parser().parse_args(argv)
        if args.log_level:
            setup_logging(args.log_level, settings.DEBUG, settings.LOG_DIR)

        if args.command == "complexity":
            return _run_complexity(args.n, args.m)

        overrides = {key: getattr(args, key, None) for key in OVERRIDES}
        cfg = load_config(args.config, overrides)
        out = args.out or settings.output_path
        logger.info("Command started", command=args.command, config=str(args.config), out=str(out))
        return HANDLERS[args.command](ExperimentService(), cfg, out, args)
    except SystemExit as e:
        return int(e.code or 0)
    except ConfigException as e:
        print(f"error: {e.message}", file=sys.stderr)
        return handle_exception(e)
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return handle_exception(e)


if __name__ == "__main__":
    sys.exit(cli_main())
