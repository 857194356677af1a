"""Test formatting, tables, flat config files and the run log."""

import json

import pytest

from ftseg.config import FTSegSettings
from ftseg.enums import LossKind
from ftseg.exceptions import ValidationError
from ftseg.models import LossConfig
from ftseg.runlog import RunLog
from ftseg.utils import (
    METRICS_COLUMNS,
    format_number,
    format_parameters,
    parse_gammas,
    read_flat_config,
    write_table,
)


class TestFormatting:
    """Test number and parameter formatting."""

    @pytest.mark.parametrize(
        ("value", "text"),
        [(0.7, "0.7"), (1.0, "1"), (4 / 3, "4/3"), (0.1234567, "0.1235")],
    )
    def test_format_number(self, value, text):
        """Test short decimals and small fractions."""
        assert format_number(value) == text

    def test_parameters_per_loss(self):
        """Test the α/β/γ column for DL, TL and FTL."""
        cfg = LossConfig()
        assert format_parameters(LossKind.DL, cfg) == "α=0.5, β=0.5"
        assert format_parameters(LossKind.TL, cfg) == "α=0.7, β=0.3"
        assert format_parameters("ftl", cfg) == "α=0.7, β=0.3, γ=4/3"

    def test_parse_gammas(self):
        """Test fractions in the γ list."""
        assert parse_gammas("1, 4/3,2") == [1.0, 4 / 3, 2.0]
        assert parse_gammas([1, 3]) == [1.0, 3.0]
        with pytest.raises(ValidationError):
            parse_gammas("1,two")


class TestWriteTable:
    """Test CSV output."""

    def test_header_order_and_precision(self, tmp_path):
        """Test column order, six decimals and LF endings."""
        path = write_table(
            [{"recall_std": 0.0, "dice_mean": 0.7, "dice_std": 0.1, "precision_mean": 1 / 3,
              "precision_std": 0.0, "recall_mean": 0.5}],
            METRICS_COLUMNS,
            tmp_path / "out" / "metrics.csv",
        )
        raw = path.read_bytes()

        assert b"\r\n" not in raw
        lines = raw.decode().splitlines()
        assert lines[0] == ",".join(METRICS_COLUMNS)
        assert lines[1] == "0.700000,0.100000,0.333333,0.000000,0.500000,0.000000"


class TestFlatConfig:
    """Test `key = value` configuration files."""

    def test_parse(self, tmp_path):
        """Test comments, blank lines and dashed keys."""
        path = tmp_path / "run.conf"
        path.write_text("# training\nepochs = 3\n\nlearning-rate = 0.05  # fast\n")

        assert read_flat_config(path) == {"epochs": "3", "learning_rate": "0.05"}

    def test_malformed_line(self, tmp_path):
        """Test that lines without '=' are rejected with their number."""
        path = tmp_path / "run.conf"
        path.write_text("epochs = 3\nbogus\n")
        with pytest.raises(ValidationError, match=":2:"):
            read_flat_config(path)

    def test_missing_file(self, tmp_path):
        """Test that unreadable files raise ValidationError."""
        with pytest.raises(ValidationError):
            read_flat_config(tmp_path / "absent.conf")


class TestRunLog:
    """Test JSONL run logging."""

    def test_disabled_by_default(self, tmp_path):
        """Test that nothing is written unless enabled."""
        run_log = RunLog(FTSegSettings(log_dir=tmp_path))
        run_log.append("epoch", epoch=0)

        assert not run_log.enabled
        assert list(tmp_path.iterdir()) == []

    def test_append(self, tmp_path):
        """Test one JSON object per event."""
        run_log = RunLog(FTSegSettings(log_runs=True, log_dir=tmp_path))
        run_log.append("epoch", epoch=0, val_dice=0.5)
        run_log.append("epoch", epoch=1, val_dice=0.6)

        [log_file] = tmp_path.glob("runs-*.jsonl")
        events = [json.loads(line) for line in log_file.read_text().splitlines()]
        assert [e["epoch"] for e in events] == [0, 1]
        assert all(e["event"] == "epoch" and "timestamp" in e for e in events)

    async def test_append_async(self, tmp_path):
        """Test the async writer."""
        run_log = RunLog(FTSegSettings(log_runs=True, log_dir=tmp_path / "nested"))
        await run_log.append_async("ablation_row", model="unet+dl")

        [log_file] = (tmp_path / "nested").glob("runs-*.jsonl")
        assert json.loads(log_file.read_text())["model"] == "unet+dl"

    def test_unwritable_directory_ignored(self, tmp_path):
        """Test that logging failures never raise."""
        blocker = tmp_path / "file"
        blocker.write_text("")
        RunLog(FTSegSettings(log_runs=True, log_dir=blocker / "sub")).append("epoch")
