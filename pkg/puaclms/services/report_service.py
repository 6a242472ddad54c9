"""
Вывод результатов: CSV кривых обучения и генерируемые скрипты графиков
"""

import csv
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np
import structlog

from puaclms.core.exceptions import ConfigException
from puaclms.models.theory import LearningCurve
from puaclms.schemas.experiment import LearningCurveRecord, to_db

logger = structlog.get_logger(__name__)

CSV_COLUMNS = ["iteration", "emse_linear", "emse_db", "msd_linear", "msd_db", "source", "trials"]
PAIR_COLUMNS = [
    "iteration",
    "theory_emse_db",
    "simulated_emse_db",
    "emse_deviation_db",
    "theory_msd_db",
    "simulated_msd_db",
    "msd_deviation_db",
]
SWEEP_COLUMNS = [
    "mu",
    "theory_emse", "theory_emse_db",
    "theory_msd", "theory_msd_db",
    "simulated_emse", "simulated_emse_db",
    "simulated_msd", "simulated_msd_db",
]
SIGNAL_COLUMNS = ["iteration", "d_real", "d_imag", "v_real", "v_imag"]

PLOT_TEMPLATE = '''"""
Графики кривых обучения из {csv_name}
Сгенерировано puaclms; запуск: python {script_name}
"""

import csv
from pathlib import Path

import matplotlib.pyplot as plt

CSV_PATH = Path(__file__).with_name("{csv_name}")

curves = {{}}
with open(CSV_PATH, newline="") as f:
    for row in csv.DictReader(f):
        curve = curves.setdefault(row["source"], {{"n": [], "emse": [], "msd": []}})
        curve["n"].append(int(row["iteration"]))
        curve["emse"].append(float(row["emse_db"]))
        curve["msd"].append(float(row["msd_db"]))

fig, (ax_emse, ax_msd) = plt.subplots(1, 2, figsize=(12, 4.5))
for source, curve in curves.items():
    ax_emse.plot(curve["n"], curve["emse"], label=source)
    ax_msd.plot(curve["n"], curve["msd"], label=source)

ax_emse.set_title("{title}: EMSE")
ax_msd.set_title("{title}: MSD")
for ax, label in ((ax_emse, "EMSE, dB"), (ax_msd, "MSD, dB")):
    ax.set_xlabel("iteration")
    ax.set_ylabel(label)
    ax.grid(True, alpha=0.3)
    ax.legend()

fig.tight_layout()
fig.savefig(CSV_PATH.with_suffix(".png"), dpi=150)
plt.show()
'''


def curve_records(curve: LearningCurve) -> Iterator[LearningCurveRecord]:
    """Записи CSV для каждой итерации кривой"""
    for n in range(curve.length):
        yield LearningCurveRecord.from_linear(
            iteration=n,
            emse=float(curve.emse[n]),
            msd=float(curve.msd[n]),
            source=curve.source,
            trials=curve.trials
        )


def _ensure_parent(path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigException(f"Cannot create output directory {path.parent}: {e}")


def write_curve_csv(path: Path, records: Iterable[LearningCurveRecord]) -> Path:
    """
    Запись кривых в CSV со столбцами iteration, emse_linear, emse_db, msd_linear, msd_db, source, trials

    Числа пишутся через repr, поэтому чтение возвращает те же значения.

    Args:
        path: Путь к файлу
        records: Записи (несколько источников допускаются подряд)

    Returns:
        Path: Путь к записанному файлу
    """
    path = Path(path)
    _ensure_parent(path)
    rows = 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record in records:
            writer.writerow([
                record.iteration,
                repr(float(record.emse_linear)),
                repr(float(record.emse_db)),
                repr(float(record.msd_linear)),
                repr(float(record.msd_db)),
                record.source,
                record.trials,
            ])
            rows += 1

    logger.info("Learning curve CSV written", path=str(path), rows=rows)
    return path


def read_curve_csv(path: Path) -> list[LearningCurveRecord]:
    """
    Чтение CSV кривых обучения

    Raises:
        ConfigException: Файл отсутствует или заголовок не совпадает
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigException(f"Curve file not found: {path}")

    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CSV_COLUMNS:
            raise ConfigException(f"Unexpected CSV header in {path}: {reader.fieldnames}")
        return [
            LearningCurveRecord(
                iteration=int(row["iteration"]),
                emse_linear=float(row["emse_linear"]),
                emse_db=float(row["emse_db"]),
                msd_linear=float(row["msd_linear"]),
                msd_db=float(row["msd_db"]),
                source=row["source"],
                trials=int(row["trials"]),
            )
            for row in reader
        ]


def write_pair_csv(path: Path, theory: LearningCurve, simulated: LearningCurve) -> Path:
    """
    Попарная таблица теория/моделирование по итерациям с отклонениями в дБ
    """
    path = Path(path)
    _ensure_parent(path)
    length = min(theory.length, simulated.length)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(PAIR_COLUMNS)
        for n in range(length):
            t_emse, s_emse = to_db(float(theory.emse[n])), to_db(float(simulated.emse[n]))
            t_msd, s_msd = to_db(float(theory.msd[n])), to_db(float(simulated.msd[n]))
            writer.writerow([
                n,
                repr(t_emse),
                repr(s_emse),
                repr(abs(t_emse - s_emse)) if np.isfinite(t_emse - s_emse) else "nan",
                repr(t_msd),
                repr(s_msd),
                repr(abs(t_msd - s_msd)) if np.isfinite(t_msd - s_msd) else "nan",
            ])

    logger.info("Theory/simulation pair CSV written", path=str(path), rows=length)
    return path


def write_plot_script(csv_path: Path, title: str) -> Path:
    """
    Скрипт matplotlib рядом с CSV (не выполняется)

    Args:
        csv_path: Путь к CSV кривых
        title: Заголовок графиков

    Returns:
        Path: Путь к скрипту
    """
    csv_path = Path(csv_path)
    script_path = csv_path.with_name(f"plot_{csv_path.stem}.py")
    script_path.write_text(
        PLOT_TEMPLATE.format(csv_name=csv_path.name, script_name=script_path.name, title=title),
        encoding="utf-8"
    )
    logger.debug("Plot script written", path=str(script_path))
    return script_path


TABLE_PLOT_TEMPLATE = '''"""
Графики из {csv_name}
Сгенерировано puaclms; запуск: python {script_name}
"""

import csv
from pathlib import Path

import matplotlib.pyplot as plt

CSV_PATH = Path(__file__).with_name("{csv_name}")
X_COLUMN = "{x_column}"
SERIES = {series!r}

with open(CSV_PATH, newline="") as f:
    rows = list(csv.DictReader(f))

fig, ax = plt.subplots(figsize=(8, 4.5))
for column in SERIES:
    points = [(float(row[X_COLUMN]), float(row[column])) for row in rows if row[column] != ""]
    if points:
        xs, ys = zip(*points)
        ax.plot(xs, ys, {marker!r}, label=column)

ax.set_title("{title}")
ax.set_xlabel("{x_column}")
ax.set_ylabel("{y_label}")
{x_scale}ax.grid(True, alpha=0.3)
ax.legend()

fig.tight_layout()
fig.savefig(CSV_PATH.with_suffix(".png"), dpi=150)
plt.show()
'''


def _cell(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def write_table_csv(path: Path, columns: list[str], rows: Iterable[Iterable]) -> Path:
    """
    Произвольная таблица: числа в repr (читаются обратно без потерь), None - пустая ячейка

    Args:
        path: Путь к CSV
        columns: Заголовок
        rows: Строки значений в порядке заголовка

    Returns:
        Path: Путь к записанному файлу
    """
    path = Path(path)
    _ensure_parent(path)
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([value if isinstance(value, (int, str)) else _cell(value) for value in row])
            count += 1

    logger.info("Table CSV written", path=str(path), rows=count)
    return path


def _db_or_none(value: Optional[float]) -> Optional[float]:
    return None if value is None else to_db(value)


def write_sweep_csv(path: Path, points: Iterable) -> Path:
    """
    Установившиеся EMSE/MSD как функции μ (теория и моделирование)

    Точки без предсказания или без моделирования дают пустые ячейки.
    """
    rows = (
        [
            p.mu,
            p.theory_emse, _db_or_none(p.theory_emse),
            p.theory_msd, _db_or_none(p.theory_msd),
            p.simulated_emse, _db_or_none(p.simulated_emse),
            p.simulated_msd, _db_or_none(p.simulated_msd),
        ]
        for p in points
    )
    return write_table_csv(path, SWEEP_COLUMNS, rows)


def write_schemes_csv(path: Path, curves: dict[str, LearningCurve]) -> Path:
    """
    Кривые нескольких схем выбора в одной таблице (столбцы <схема>_emse_db, <схема>_msd_db)
    """
    names = list(curves)
    length = min(curve.length for curve in curves.values())
    columns = ["iteration"] + [f"{name}_{kind}_db" for name in names for kind in ("emse", "msd")]
    rows = (
        [n] + [
            to_db(float(getattr(curves[name], kind)[n]))
            for name in names
            for kind in ("emse", "msd")
        ]
        for n in range(length)
    )
    return write_table_csv(path, columns, rows)


def write_signals_csv(path: Path, d: np.ndarray, v: np.ndarray) -> Path:
    """
    Отсчеты желаемого отклика и шума измерений (вещественные и мнимые части)
    """
    rows = ([n, d[n].real, d[n].imag, v[n].real, v[n].imag] for n in range(len(d)))
    return write_table_csv(path, SIGNAL_COLUMNS, rows)


def write_table_plot_script(
    csv_path: Path,
    title: str,
    x_column: str,
    series: list[str],
    y_label: str,
    log_x: bool = False,
    marker: str = "-"
) -> Path:
    """
    Скрипт matplotlib для таблицы: столбцы series против x_column (не выполняется)

    Returns:
        Path: Путь к скрипту
    """
    csv_path = Path(csv_path)
    script_path = csv_path.with_name(f"plot_{csv_path.stem}.py")
    script_path.write_text(
        TABLE_PLOT_TEMPLATE.format(
            csv_name=csv_path.name,
            script_name=script_path.name,
            title=title,
            x_column=x_column,
            series=list(series),
            y_label=y_label,
            marker=marker,
            x_scale='ax.set_xscale("log")\n' if log_x else "",
        ),
        encoding="utf-8"
    )
    logger.debug("Plot script written", path=str(script_path))
    return script_path
