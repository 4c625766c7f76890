"""
Unit tests for the run, verify and sweep commands and the argument parser.
"""
import json
from unittest.mock import AsyncMock, patch

import numpy as np
import pytest

from src.krflow.cli import build_parser, dispatch, main
from src.krflow.commands import handle_run, handle_sweep, handle_verify
from src.krflow.commands.sweep import SweepPoint, sweep_exit_code, u_difference_ratios
from src.krflow.models.config import RunConfig
from src.krflow.models.report import CommandResult
from storage import read_series, read_summary
from storage.checkpoint_store import encode_checkpoint


def _fixed_point_args(tmp_path, **extra):
    arguments = {
        "scenario": "ke_fixed_point",
        "n": 1,
        "N": 8,
        "t_end": 1.0,
        "dt_out": 0.5,
        "output_dir": tmp_path / "run",
    }
    arguments.update(extra)
    return arguments


class TestHandleRun:
    """Tests for the run command."""

    @pytest.mark.asyncio
    async def test_invalid_config_exit_code(self, tmp_path):
        """Test configuration errors map to exit code 2."""
        result = await handle_run({"N": 12, "output_dir": tmp_path})
        assert result.exit_code == 2
        assert "❌" in result.text
        assert "scenario.N" in result.text

    @pytest.mark.asyncio
    async def test_scenario_error_exit_code(self, tmp_path):
        """Test an unsupported scenario and dimension pair maps to exit code 2."""
        result = await handle_run({"scenario": "fibration", "n": 1, "N": 8, "output_dir": tmp_path})
        assert result.exit_code == 2

    @pytest.mark.asyncio
    async def test_unexpected_errors_propagate(self, tmp_path):
        """Test errors other than configuration errors are re-raised."""
        with patch("src.krflow.commands.run.execute_run", side_effect=RuntimeError("boom")):
            with pytest.raises(RuntimeError):
                await handle_run(_fixed_point_args(tmp_path))

    @pytest.mark.asyncio
    async def test_fixed_point_run(self, tmp_path):
        """Test a short fixed-point run passes and writes its outputs."""
        result = await handle_run(_fixed_point_args(tmp_path))
        assert result.exit_code == 0, result.text
        assert "✅" in result.text
        run_dir = tmp_path / "run"
        rows = read_series(run_dir / "series.csv")
        assert [row["t"] for row in rows] == [0.0, 0.5, 1.0]
        summary = read_summary(run_dir / "summary.json")
        assert summary.status == "completed"
        assert summary.passed
        assert summary.config.scenario.t_end == 1.0
        assert summary.config.scenario.seed == 7
        assert len(summary.checkpoints) == 1
        assert json.loads((run_dir / "summary.json").read_text())["format"] == "krflow-summary v1"

    @pytest.mark.asyncio
    async def test_certificate_abort(self, tmp_path):
        """Test a too-small C_v ends the run with exit code 1."""
        result = await handle_run(_fixed_point_args(tmp_path, C_v=0.5))
        assert result.exit_code == 1
        summary = read_summary(tmp_path / "run" / "summary.json")
        assert summary.status == "certificate_abort"
        assert "C_v" in summary.error
        assert "failed: cv_guard" in result.text


class TestHandleVerify:
    """Tests for the verify command."""

    @pytest.mark.asyncio
    async def test_verify_run_directory(self, tmp_path):
        """Test a run directory verifies using its stored configuration."""
        await handle_run(_fixed_point_args(tmp_path))
        result = await handle_verify({"paths": [str(tmp_path / "run")]})
        assert result.exit_code == 0, result.text
        assert "Verified 1 checkpoints" in result.text

    @pytest.mark.asyncio
    async def test_verify_several_checkpoints(self, tmp_path):
        """Test every stored checkpoint is re-checked and finite differences run."""
        await handle_run(_fixed_point_args(tmp_path, checkpoint_every=1))
        result = await handle_verify({"paths": [str(tmp_path / "run" / "checkpoints")]})
        assert result.exit_code == 0, result.text
        assert "Verified 3 checkpoints" in result.text
        assert "res_first_tderiv" in result.text

    @pytest.mark.asyncio
    async def test_bad_magic(self, tmp_path):
        """Test a corrupt checkpoint is an input error."""
        path = tmp_path / "bad.krfl"
        path.write_bytes(b"XXXX" + encode_checkpoint(1, 8, 0.0, np.zeros((8, 8)))[4:])
        result = await handle_verify({"paths": [str(path)], "scenario": "ke_fixed_point", "n": 1, "N": 8})
        assert result.exit_code == 2
        assert "magic" in result.text

    @pytest.mark.asyncio
    async def test_grid_mismatch(self, tmp_path):
        """Test a checkpoint from another grid is rejected."""
        path = tmp_path / "other.krfl"
        path.write_bytes(encode_checkpoint(1, 16, 0.0, np.zeros((16, 16))))
        result = await handle_verify({"paths": [str(path)], "scenario": "ke_fixed_point", "n": 1, "N": 8})
        assert result.exit_code == 2
        assert "N=16" in result.text

    @pytest.mark.asyncio
    async def test_missing_paths(self, tmp_path):
        """Test missing files and empty directories are input errors."""
        result = await handle_verify({"paths": [str(tmp_path / "nowhere")]})
        assert result.exit_code == 2
        result = await handle_verify({"paths": [str(tmp_path)]})
        assert result.exit_code == 2


class TestHandleSweep:
    """Tests for the sweep command."""

    @pytest.mark.asyncio
    async def test_empty_values(self, tmp_path):
        """Test a sweep needs values."""
        result = await handle_sweep({"axis": "N", "values": [], "output_dir": tmp_path})
        assert result.exit_code == 2

    @pytest.mark.asyncio
    async def test_unknown_axis(self, tmp_path):
        """Test unknown axes are rejected."""
        result = await handle_sweep({"axis": "colour", "values": ["1"], "output_dir": tmp_path})
        assert result.exit_code == 2
        assert "colour" in result.text

    @pytest.mark.asyncio
    async def test_grid_sweep(self, tmp_path):
        """Test a two-point grid sweep writes sweep.csv."""
        arguments = _fixed_point_args(tmp_path, t_end=0.5, axis="N", values=["8", "16"], jobs=2)
        result = await handle_sweep(arguments)
        assert result.exit_code == 0, result.text
        lines = (tmp_path / "run" / "sweep_N" / "sweep.csv").read_text().splitlines()
        assert lines[0] == "# krflow-sweep v1"
        assert (tmp_path / "run" / "sweep_N" / "N_16" / "summary.json").exists()

    def test_u_difference_ratio(self):
        """Test the successive-difference ratio of a fourth-order sequence is 16."""
        config = RunConfig()
        points = [
            SweepPoint(value=dt, config=config, final_u=np.full(3, 1.0 + dt ** 4), final_t=1.0)
            for dt in (0.04, 0.02, 0.01)
        ]
        ratios = u_difference_ratios(points)
        assert np.isnan(ratios[0]) and np.isnan(ratios[1])
        assert ratios[2] == pytest.approx(16.0)

    def test_exit_code_is_worst(self):
        """Test solver failures outrank certificate failures."""
        config = RunConfig()
        points = [SweepPoint(value=v, config=config, exit_code=code) for v, code in ((1, 0), (2, 1), (3, 3))]
        assert sweep_exit_code(points) == 3
        assert sweep_exit_code(points[:2]) == 1
        assert sweep_exit_code(points[:1]) == 0


class TestParser:
    """Tests for argument parsing and dispatch."""

    def test_run_flags(self):
        """Test flags map onto config keys."""
        args = build_parser().parse_args(["run", "--scenario", "homogeneous", "--N", "8", "--C-u", "auto", "--times", "0", "1"])
        assert args.command == "run"
        assert args.scenario == "homogeneous"
        assert args.N == 8
        assert args.C_u == "auto"
        assert args.times == [0.0, 1.0]
        assert args.t_end is None

    def test_usage_errors(self, capsys):
        """Test bad arguments return exit code 2."""
        assert main(["run", "--N", "eight"]) == 2
        assert main([]) == 2
        assert main(["sweep", "--values", "8"]) == 2

    @pytest.mark.asyncio
    async def test_dispatch(self):
        """Test commands route to their handlers."""
        expected = CommandResult(exit_code=0, text="ok")
        with patch("src.krflow.cli.handle_run", new=AsyncMock(return_value=expected)) as mock_run:
            result = await dispatch("run", {"N": 8})
        assert result is expected
        mock_run.assert_awaited_once_with({"N": 8})
        unknown = await dispatch("plot", {})
        assert unknown.exit_code == 2

    def test_main_prints_result(self, capsys):
        """Test main prints the handler text and returns its exit code."""
        with patch("src.krflow.cli.handle_verify", new=AsyncMock(return_value=CommandResult(exit_code=1, text="report"))):
            assert main(["verify", "somewhere"]) == 1
        assert "report" in capsys.readouterr().out
