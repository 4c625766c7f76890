"""
Unit tests for checkpoints and run output files.
"""
import math

import numpy as np
import pytest

from src.krflow.errors import CheckpointFormatError
from src.krflow.models.config import RunConfig
from src.krflow.models.report import CertificateResult, MonitorReport, RunSummary, SnapshotDiagnostics
from storage import CheckpointStore, SERIES_COLUMNS, read_series, read_summary, write_series, write_summary, write_sweep
from storage.checkpoint_store import HEADER, MAGIC, decode_checkpoint, encode_checkpoint


@pytest.fixture
def values():
    return np.random.default_rng(0).standard_normal((8,) * 4)


class TestCheckpointFormat:
    """Tests for the binary checkpoint layout."""

    def test_round_trip_is_bit_exact(self, values):
        """Test decode(encode(x)) reproduces every bit."""
        data = encode_checkpoint(2, 8, 1.25, values)
        assert data[:4] == MAGIC
        assert len(data) == HEADER.size + 8 * values.size
        checkpoint = decode_checkpoint(data)
        assert (checkpoint.n, checkpoint.N, checkpoint.t) == (2, 8, 1.25)
        assert checkpoint.values.tobytes() == values.tobytes()

    def test_bad_magic(self, values):
        """Test a foreign file is rejected."""
        data = b"XXXX" + encode_checkpoint(2, 8, 0.0, values)[4:]
        with pytest.raises(CheckpointFormatError, match="magic"):
            decode_checkpoint(data)

    def test_truncated(self, values):
        """Test short files are rejected."""
        data = encode_checkpoint(2, 8, 0.0, values)
        with pytest.raises(CheckpointFormatError):
            decode_checkpoint(data[:10])
        with pytest.raises(CheckpointFormatError):
            decode_checkpoint(data[:-8])

    def test_unknown_version(self, values):
        """Test a newer format version is rejected."""
        data = encode_checkpoint(2, 8, 0.0, values)
        bumped = HEADER.pack(MAGIC, 2, 2, 8, 0.0) + data[HEADER.size:]
        with pytest.raises(CheckpointFormatError, match="version"):
            decode_checkpoint(bumped)

    def test_wrong_size_on_encode(self):
        """Test encoding refuses values that do not match the grid."""
        with pytest.raises(CheckpointFormatError):
            encode_checkpoint(1, 8, 0.0, np.zeros(10))


class TestCheckpointStore:
    """Tests for the checkpoint directory."""

    def test_write_list_read(self, tmp_path, values):
        """Test files are listed by sequence number and read back."""
        store = CheckpointStore(tmp_path / "checkpoints")
        assert store.list() == []
        second = store.write(2, 8, 0.5, values, index=10)
        first = store.write(2, 8, 0.0, np.zeros_like(values), index=2)
        assert first.name == "checkpoint_0002_t0.000000.krfl"
        assert store.list() == [first, second]
        checkpoint = store.read(second)
        assert checkpoint.t == 0.5
        assert checkpoint.path == second
        assert np.array_equal(checkpoint.values, values)


def _report():
    report = MonitorReport(scenario="demo")
    report.snapshots.append(SnapshotDiagnostics(t=0.0, values={"sup_u": 0.0, "sup_phi": 2.0}))
    report.snapshots.append(
        SnapshotDiagnostics(t=0.5, dt=0.01, values={"sup_u": 0.1}, residuals={"res_first_tderiv": 1e-5})
    )
    return report


class TestSeries:
    """Tests for series.csv."""

    def test_write_and_read(self, tmp_path):
        """Test the version row, header and missing values."""
        path = write_series(tmp_path / "series.csv", _report())
        lines = path.read_text().splitlines()
        assert lines[0] == "# krflow-series v1"
        assert lines[1].split(",") == list(SERIES_COLUMNS)
        rows = read_series(path)
        assert len(rows) == 2
        assert rows[1]["t"] == 0.5 and rows[1]["dt"] == 0.01
        assert rows[1]["res_first_tderiv"] == 1e-5
        assert math.isnan(rows[0]["dt"])
        assert math.isnan(rows[0]["res_first_tderiv"])

    def test_missing_version_row(self, tmp_path):
        """Test a file without the version row is rejected."""
        path = tmp_path / "series.csv"
        path.write_text(",".join(SERIES_COLUMNS) + "\n")
        with pytest.raises(CheckpointFormatError):
            read_series(path)

    def test_changed_columns(self, tmp_path):
        """Test a changed column set is rejected."""
        path = tmp_path / "series.csv"
        path.write_text("# krflow-series v1\nt,sup_u\n0.0,0.0\n")
        with pytest.raises(CheckpointFormatError):
            read_series(path)


class TestSweepAndSummary:
    """Tests for sweep.csv and summary.json."""

    def test_sweep_rows(self, tmp_path):
        """Test sweep rows follow the version row and header."""
        path = write_sweep(tmp_path / "sweep.csv", [("N", 16, "completed", "res_v_evolution", 1e-9, math.nan)])
        lines = path.read_text().splitlines()
        assert lines[0] == "# krflow-sweep v1"
        assert lines[1] == "axis,value,status,key,metric,ratio"
        assert lines[2].endswith(",nan")

    def test_summary_round_trip(self, tmp_path):
        """Test summary.json survives infinities and NaN and rebuilds its config."""
        summary = RunSummary(
            config=RunConfig(),
            scenario="demo",
            status="completed",
            exit_code=0,
            passed=True,
            constants={"C_u": 0.5, "T_horizon": math.inf, "C_bis": math.nan},
            certificates=[CertificateResult(name="volume_decay", passed=True, margin=math.inf)],
        )
        path = write_summary(tmp_path / "summary.json", summary)
        assert "Infinity" in path.read_text()
        loaded = read_summary(path)
        assert loaded.config == summary.config
        assert math.isinf(loaded.constants["T_horizon"])
        assert math.isnan(loaded.constants["C_bis"])
        assert loaded.certificates[0].margin == math.inf
