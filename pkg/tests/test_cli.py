"""Test the command-line interface."""

import csv

import pytest

from ftseg.checkpoint import load_checkpoint
from ftseg.cli import CHECKPOINT_NAME, build_parser, main, merge_options

SMALL_MODEL = ["--depth", "3", "--base-channels", "2", "--epochs", "1", "--batch", "4"]


def read_rows(path) -> list[dict[str, str]]:
    with path.open(newline="") as f:
        return list(csv.DictReader(f))


@pytest.fixture
def dataset_dir(tmp_path):
    """Eight 16×16 synthetic samples on disk."""
    root = tmp_path / "data"
    code = main(
        ["synth", "--out", str(root), "--count", "8", "--height", "16", "--width", "16",
         "--area-min", "0.05", "--area-max", "0.2", "--seed", "3"]
    )
    assert code == 0
    return root


@pytest.fixture
def trained_dir(tmp_path, dataset_dir):
    """Output of one short training run."""
    out = tmp_path / "run"
    assert main(["train", "--data", str(dataset_dir), "--out", str(out), *SMALL_MODEL]) == 0
    return out


class TestSynth:
    """Test dataset generation."""

    def test_layout_and_manifest(self, dataset_dir):
        """Test images, masks and manifest."""
        assert len(list((dataset_dir / "images").glob("*.png"))) == 8
        assert len(list((dataset_dir / "masks").glob("*.png"))) == 8
        assert '"seed": 3' in (dataset_dir / "manifest.json").read_text()

    def test_same_seed_same_bytes(self, tmp_path):
        """Test that two runs with one seed write identical files."""
        args = ["--count", "3", "--height", "16", "--width", "16", "--area-min", "0.05", "--seed", "1"]
        assert main(["synth", "--out", str(tmp_path / "a"), *args]) == 0
        assert main(["synth", "--out", str(tmp_path / "b"), *args]) == 0

        for path in sorted((tmp_path / "a" / "masks").iterdir()):
            assert path.read_bytes() == (tmp_path / "b" / "masks" / path.name).read_bytes()
            image = tmp_path / "a" / "images" / path.name
            assert image.read_bytes() == (tmp_path / "b" / "images" / path.name).read_bytes()

    def test_preset(self, tmp_path, capsys):
        """Test a preset with a reduced count."""
        out = tmp_path / "isic"
        assert main(["synth", "--preset", "isic-like", "--count", "1", "--out", str(out)]) == 0
        assert (out / "images" / "synth_00000.png").exists()
        assert "96x128 RGB" in capsys.readouterr().out

    def test_unknown_preset(self, tmp_path):
        """Test that presets outside the table are usage errors."""
        assert main(["synth", "--preset", "retina", "--out", str(tmp_path)]) == 2

    def test_missing_out(self):
        """Test that --out is required."""
        assert main(["synth", "--count", "2"]) == 2

    def test_unattainable_area(self, tmp_path):
        """Test that an impossible lesion range is a usage error."""
        code = main(["synth", "--out", str(tmp_path), "--height", "2", "--width", "2", "--area-min", "0.01", "--area-max", "0.1"])
        assert code == 2


class TestConfigFile:
    """Test flat configuration files."""

    def test_command_line_wins(self, tmp_path):
        """Test that command-line values override file values."""
        config = tmp_path / "synth.conf"
        config.write_text("count = 5\nseed = 7  # fixed\nheight = 16\nwidth = 16\narea-min = 0.05\n")
        args = build_parser().parse_args(["synth", "--config", str(config), "--count", "2"])

        command, values = merge_options(args)
        assert command == "synth"
        assert values["count"] == 2
        assert values["seed"] == "7"
        assert values["area_min"] == "0.05"

    def test_config_drives_run(self, tmp_path):
        """Test a run configured entirely from a file."""
        out = tmp_path / "ds"
        config = tmp_path / "synth.conf"
        config.write_text(f"out = {out}\ncount = 2\nheight = 16\nwidth = 16\narea_min = 0.05\n")

        assert main(["synth", "--config", str(config)]) == 0
        assert len(list((out / "images").iterdir())) == 2

    def test_unknown_key(self, tmp_path):
        """Test that keys outside the command's schema are rejected."""
        config = tmp_path / "synth.conf"
        config.write_text(f"out = {tmp_path}\nlearning_rate = 0.1\n")
        assert main(["synth", "--config", str(config)]) == 2


class TestTrain:
    """Test the train command."""

    def test_outputs(self, trained_dir):
        """Test the checkpoint and history columns."""
        history = read_rows(trained_dir / "history.csv")

        assert load_checkpoint(trained_dir / CHECKPOINT_NAME).config.depth == 3
        assert list(history[0]) == ["epoch", "train_loss", "val_dice", "learning_rate"]
        assert [r["epoch"] for r in history] == ["0"]

    def test_summary_printed(self, tmp_path, dataset_dir, capsys):
        """Test the final validation Dice line."""
        main(["train", "--data", str(dataset_dir), "--out", str(tmp_path / "o"), *SMALL_MODEL])
        assert "final val_dice" in capsys.readouterr().out

    def test_zero_epochs(self, tmp_path, dataset_dir):
        """Test that --epochs 0 is a usage error."""
        code = main(["train", "--data", str(dataset_dir), "--out", str(tmp_path / "o"), "--epochs", "0"])
        assert code == 2

    def test_incompatible_depth(self, tmp_path, dataset_dir):
        """Test that 16×16 data cannot train a depth-6 model."""
        code = main(["train", "--data", str(dataset_dir), "--out", str(tmp_path / "o"), "--depth", "6", "--base-channels", "1"])
        assert code == 4

    def test_empty_dataset(self, tmp_path):
        """Test that a dataset with no samples is a usage error."""
        (tmp_path / "empty" / "images").mkdir(parents=True)
        (tmp_path / "empty" / "masks").mkdir()
        assert main(["train", "--data", str(tmp_path / "empty"), "--out", str(tmp_path / "o")]) == 2

    def test_rerun_identical(self, tmp_path, dataset_dir, trained_dir):
        """Test that a second run with the same seed writes the same bytes."""
        again = tmp_path / "again"
        assert main(["train", "--data", str(dataset_dir), "--out", str(again), *SMALL_MODEL]) == 0

        for name in ("history.csv", CHECKPOINT_NAME):
            assert (again / name).read_bytes() == (trained_dir / name).read_bytes()

    def test_missing_data(self, tmp_path):
        """Test that a missing dataset is a usage error."""
        assert main(["train", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 2


class TestEval:
    """Test the eval command."""

    def test_metrics_and_scores(self, tmp_path, trained_dir, dataset_dir):
        """Test metric columns, per-image scores and overlays."""
        out = tmp_path / "eval"
        code = main(
            ["eval", "--checkpoint", str(trained_dir / CHECKPOINT_NAME), "--data", str(dataset_dir),
             "--out", str(out), "--overlays"]
        )
        assert code == 0

        [metrics] = read_rows(out / "metrics.csv")
        assert list(metrics) == [
            "dice_mean", "dice_std", "precision_mean", "precision_std", "recall_mean", "recall_std"
        ]
        assert metrics["dice_std"] == "0.000000"
        scores = read_rows(out / "scores.csv")
        assert [s["id"] for s in scores] == [f"synth_{i:05d}" for i in range(8)]
        assert len(list((out / "overlays").glob("*.png"))) == 8

    def test_incompatible_data(self, tmp_path, trained_dir):
        """Test that three-channel data against a one-channel model exits 4."""
        rgb = tmp_path / "rgb"
        assert main(["synth", "--out", str(rgb), "--count", "1", "--height", "16", "--width", "16",
                     "--channels", "3", "--area-min", "0.05"]) == 0

        code = main(["eval", "--checkpoint", str(trained_dir / CHECKPOINT_NAME), "--data", str(rgb),
                     "--out", str(tmp_path / "e")])
        assert code == 4

    def test_corrupt_checkpoint(self, tmp_path, dataset_dir):
        """Test that a foreign file exits 4."""
        bogus = tmp_path / "bogus.ckpt"
        bogus.write_bytes(b"hello\nEND\n")
        code = main(["eval", "--checkpoint", str(bogus), "--data", str(dataset_dir), "--out", str(tmp_path / "e")])
        assert code == 4

    def test_rerun_identical(self, tmp_path, trained_dir, dataset_dir):
        """Test that evaluating twice writes the same tables."""
        args = ["eval", "--checkpoint", str(trained_dir / CHECKPOINT_NAME), "--data", str(dataset_dir)]
        assert main([*args, "--out", str(tmp_path / "a")]) == 0
        assert main([*args, "--out", str(tmp_path / "b")]) == 0

        for name in ("metrics.csv", "scores.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_truncated_param_line(self, tmp_path, trained_dir, dataset_dir):
        """Test that a parameter line without dimensions exits 4."""
        path = trained_dir / CHECKPOINT_NAME
        head, payload = path.read_bytes().split(b"\nEND\n", 1)
        lines = [
            "param enc0.conv1.weight" if line.startswith("param enc0.conv1.weight ") else line
            for line in head.decode("ascii").split("\n")
        ]
        path.write_bytes("\n".join(lines).encode("ascii") + b"\nEND\n" + payload)

        code = main(["eval", "--checkpoint", str(path), "--data", str(dataset_dir), "--out", str(tmp_path / "e")])
        assert code == 4


class TestAblate:
    """Test the ablate command."""

    def test_selected_rows(self, tmp_path, dataset_dir):
        """Test a two-row table from a split of one dataset."""
        out = tmp_path / "abl"
        code = main(
            ["ablate", "--data", str(dataset_dir), "--out", str(out), "--rows", "unet+dl,attn_multi+ftl",
             "--folds", "2", *SMALL_MODEL]
        )
        assert code == 0

        rows = read_rows(out / "ablation.csv")
        assert [r["model"] for r in rows] == ["unet+dl", "attn_multi+ftl"]
        assert list(rows[0])[:3] == ["model", "parameters", "dice_mean"]
        assert rows[1]["parameters"] == "α=0.7, β=0.3, γ=4/3"

    def test_rerun_identical(self, tmp_path, dataset_dir):
        """Test that the table does not depend on the run or on thread scheduling."""
        args = ["ablate", "--data", str(dataset_dir), "--rows", "unet+dl,attn_multi+ftl", "--folds", "2", *SMALL_MODEL]
        assert main([*args, "--out", str(tmp_path / "a")]) == 0
        assert main([*args, "--out", str(tmp_path / "b")]) == 0

        a = (tmp_path / "a" / "ablation.csv").read_bytes()
        assert a == (tmp_path / "b" / "ablation.csv").read_bytes()

    def test_rows_and_grid_exclusive(self, tmp_path, dataset_dir):
        """Test that --rows and --grid cannot be combined."""
        code = main(
            ["ablate", "--data", str(dataset_dir), "--out", str(tmp_path), "--rows", "unet+dl",
             "--grid", str(tmp_path / "grid.json")]
        )
        assert code == 2

    def test_unknown_row(self, tmp_path, dataset_dir):
        """Test that unknown row labels exit 2."""
        code = main(["ablate", "--data", str(dataset_dir), "--out", str(tmp_path), "--rows", "nope", *SMALL_MODEL])
        assert code == 2


class TestGradcheck:
    """Test the gradcheck command."""

    def test_losses_pass(self, capsys):
        """Test that the loss suite exits 0 and reports each loss."""
        assert main(["gradcheck", "losses"]) == 0
        assert "focal_tversky" in capsys.readouterr().out

    def test_gate_passes(self, capsys):
        """Test that the attention gate suite exits 0."""
        assert main(["gradcheck", "gate"]) == 0
        assert "gate.psi" in capsys.readouterr().out

    @pytest.mark.slow
    def test_model_passes(self):
        """Test that the full model suite exits 0."""
        assert main(["gradcheck", "model"]) == 0

    def test_invalid_scope(self):
        """Test that unknown scopes are usage errors."""
        assert main(["gradcheck", "everything"]) == 2


class TestCurve:
    """Test the curve command."""

    def test_values(self, tmp_path):
        """Test long-format rows and the γ=3 midpoint."""
        out = tmp_path / "curve.csv"
        assert main(["curve", "--gammas", "1,3", "--resolution", "3", "--out", str(out)]) == 0

        rows = read_rows(out)
        assert list(rows[0]) == ["ti", "gamma", "loss"]
        assert len(rows) == 6
        assert rows[1] == {"ti": "0.500000", "gamma": "1.000000", "loss": "0.500000"}
        assert rows[4] == {"ti": "0.500000", "gamma": "3.000000", "loss": "0.793701"}

    def test_rerun_identical(self, tmp_path):
        """Test that two runs write the same bytes."""
        for name in ("a.csv", "b.csv"):
            assert main(["curve", "--gammas", "1,4/3,3", "--resolution", "11", "--out", str(tmp_path / name)]) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_fraction_gamma(self, tmp_path):
        """Test that 4/3 is accepted."""
        out = tmp_path / "curve.csv"
        assert main(["curve", "--gammas", "4/3", "--resolution", "2", "--out", str(out)]) == 0
        assert read_rows(out)[0]["gamma"] == "1.333333"

    def test_gamma_out_of_range(self, tmp_path):
        """Test that γ=5 exits 2."""
        assert main(["curve", "--gammas", "5", "--out", str(tmp_path / "c.csv")]) == 2
