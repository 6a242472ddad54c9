"""Tests for curve records, CSV output and plot-script generation."""

import csv
import math

import numpy as np
import pytest

from puaclms.core.exceptions import ConfigException
from puaclms.models.theory import LearningCurve
from puaclms.schemas.experiment import LearningCurveRecord, to_db
from puaclms.services.harness_service import SweepPoint
from puaclms.services.report_service import (
    CSV_COLUMNS,
    SIGNAL_COLUMNS,
    SWEEP_COLUMNS,
    curve_records,
    read_curve_csv,
    write_curve_csv,
    write_pair_csv,
    write_plot_script,
    write_schemes_csv,
    write_signals_csv,
    write_sweep_csv,
    write_table_plot_script,
)


@pytest.fixture
def curve(np_rng):
    emse = np.abs(np_rng.standard_normal(40)) * 1e-3 + 1e-9
    msd = np.abs(np_rng.standard_normal(40)) * 1e-2 + 1e-9
    return LearningCurve(emse=emse, msd=msd, source="simulated", trials=17)


class TestRecords:
    def test_db_matches_linear(self, curve):
        for record in curve_records(curve):
            assert record.emse_db == pytest.approx(10 * math.log10(record.emse_linear), abs=1e-12)
            assert record.msd_db == pytest.approx(10 * math.log10(record.msd_linear), abs=1e-12)

    def test_indices_and_metadata(self, curve):
        records = list(curve_records(curve))
        assert [r.iteration for r in records] == list(range(40))
        assert {r.source for r in records} == {"simulated"}
        assert {r.trials for r in records} == {17}

    def test_zero_is_minus_infinity(self):
        assert to_db(0.0) == float("-inf")
        assert LearningCurveRecord.from_linear(0, 0.0, 1.0, "theory", 0).emse_db == float("-inf")


class TestCsv:
    def test_values_survive_file(self, curve, tmp_path):
        records = list(curve_records(curve))
        path = write_curve_csv(tmp_path / "nested" / "curve.csv", records)
        assert read_curve_csv(path) == records

    def test_header(self, curve, tmp_path):
        path = write_curve_csv(tmp_path / "curve.csv", curve_records(curve))
        assert path.read_text(encoding="utf-8").splitlines()[0] == ",".join(CSV_COLUMNS)

    def test_infinite_db_values(self, tmp_path):
        record = LearningCurveRecord.from_linear(0, 0.0, 0.0, "theory", 0)
        path = write_curve_csv(tmp_path / "zero.csv", [record])
        assert read_curve_csv(path)[0].emse_db == float("-inf")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigException, match="not found"):
            read_curve_csv(tmp_path / "none.csv")

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n", encoding="utf-8")
        with pytest.raises(ConfigException, match="header"):
            read_curve_csv(path)

    def test_pair_table(self, tmp_path):
        theory = LearningCurve(emse=np.full(5, 1e-3), msd=np.full(5, 1e-2), source="theory")
        simulated = LearningCurve(emse=np.full(6, 1e-2), msd=np.full(6, 1e-2), source="simulated", trials=3)
        path = write_pair_csv(tmp_path / "pairs.csv", theory, simulated)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 6
        first = lines[1].split(",")
        assert float(first[3]) == pytest.approx(10.0)
        assert float(first[6]) == 0.0


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


class TestTables:
    def test_sweep_table_blank_for_missing_values(self, tmp_path):
        points = [SweepPoint(mu=0.01, theory_emse=1e-3, theory_msd=2e-2), SweepPoint(mu=2.0)]
        rows = read_rows(write_sweep_csv(tmp_path / "sweep.csv", points))
        assert list(rows[0]) == SWEEP_COLUMNS
        assert float(rows[0]["theory_emse_db"]) == pytest.approx(-30.0)
        assert rows[0]["simulated_emse"] == ""
        assert rows[1]["theory_emse"] == rows[1]["theory_msd_db"] == ""
        assert float(rows[1]["mu"]) == 2.0

    def test_schemes_table_truncates_to_shortest(self, tmp_path):
        long = LearningCurve(emse=np.full(6, 1e-2), msd=np.full(6, 1e-1), source="simulated")
        short = LearningCurve(emse=np.full(4, 1e-3), msd=np.full(4, 1.0), source="simulated")
        rows = read_rows(write_schemes_csv(tmp_path / "s.csv", {"sequential": long, "stochastic": short}))
        assert len(rows) == 4
        assert list(rows[0]) == [
            "iteration", "sequential_emse_db", "sequential_msd_db", "stochastic_emse_db", "stochastic_msd_db"
        ]
        assert float(rows[3]["sequential_emse_db"]) == pytest.approx(-20.0)
        assert float(rows[3]["stochastic_msd_db"]) == 0.0
        assert rows[3]["iteration"] == "3"

    def test_signals_table_splits_parts(self, tmp_path):
        d = np.array([1 + 2j, -0.5j])
        v = np.array([0.1 - 0.1j, 0.0])
        rows = read_rows(write_signals_csv(tmp_path / "sig.csv", d, v))
        assert list(rows[0]) == SIGNAL_COLUMNS
        assert [float(rows[0][c]) for c in SIGNAL_COLUMNS[1:]] == [1.0, 2.0, 0.1, -0.1]
        assert float(rows[1]["d_imag"]) == -0.5

    def test_table_plot_script_compiles(self, tmp_path):
        script = write_table_plot_script(
            tmp_path / "sweep_N4.csv", "steady state", "mu", ["theory_emse_db"], "dB", log_x=True, marker="o-"
        )
        assert script.name == "plot_sweep_N4.py"
        text = script.read_text(encoding="utf-8")
        assert "['theory_emse_db']" in text
        assert 'set_xscale("log")' in text
        compile(text, str(script), "exec")


class TestPlotScript:
    def test_script_references_csv(self, tmp_path):
        csv_path = tmp_path / "run.csv"
        script = write_plot_script(csv_path, "N=4 M=2")
        assert script.name == "plot_run.py"
        text = script.read_text(encoding="utf-8")
        assert '"run.csv"' in text
        assert "N=4 M=2: EMSE" in text
        compile(text, str(script), "exec")
