"""
Unit tests for the fundusnet command line and run configuration
"""

import json

import numpy as np
import pytest

from fundusnet.cli import build_parser, resolve, run
from fundusnet.config import load_config_file, resolve_run_config
from fundusnet.dataset import ManifestRecord, decode_image, load_manifest, save_png, write_manifest
from fundusnet.errors import EXIT_DATA, EXIT_OK, EXIT_USAGE, ConfigError
from fundusnet.model import load_checkpoint
from tests import solid_image


def write_toml(path, text: str):
    path.write_text(text, encoding="utf-8")
    return path


class TestRunConfig:
    """Test layering of defaults, TOML sections and flags"""

    def test_defaults(self):
        """Test the values a bare train command resolves to"""
        cfg = resolve_run_config("train")
        assert cfg.arch == "compact"
        assert cfg.train.learning_rate == 0.001
        assert cfg.enhance.clip_fraction == 0.003

    def test_file_then_flags(self, tmp_path):
        """Test that flags override the TOML file, which overrides defaults"""
        path = write_toml(
            tmp_path / "run.toml",
            "[train]\nlearning_rate = 0.01\nepochs = 3\n\n[run]\nseed = 4\n",
        )
        args = build_parser().parse_args(["--config", str(path), "train", "--epochs", "5"])
        cfg = resolve(args)
        assert cfg.train.learning_rate == 0.01
        assert cfg.train.epochs == 5
        assert cfg.seed == 4

    def test_seed_flag_reaches_every_section(self):
        """Test that --seed is copied into the train and synth sections"""
        args = build_parser().parse_args(["train", "--seed", "9"])
        cfg = resolve(args)
        assert cfg.seed == cfg.train.seed == cfg.synth.seed == 9

    def test_choice_flags(self):
        """Test the architecture, loss and balanced-batch flags"""
        args = build_parser().parse_args(["train", "--arch", "vgg", "--loss", "categorical", "--balanced-batches"])
        cfg = resolve(args)
        assert cfg.arch == "vgg"
        assert cfg.train.loss_form == "categorical"
        assert cfg.train.balanced_batches is True

    @pytest.mark.parametrize(
        "argv, arch, loss",
        [
            (["--arch", "table3", "--loss", "eq5"], "vgg", "binary_sum"),
            (["--arch", "compact", "--loss", "categorical"], "compact", "categorical"),
        ],
    )
    def test_documented_choice_spellings(self, argv, arch, loss):
        """Test that --arch table3 and --loss eq5 select the VGG table and the binary-sum loss"""
        cfg = resolve(build_parser().parse_args(["train", *argv]))
        assert cfg.arch == arch
        assert cfg.train.loss_form == loss

    def test_aliases_in_config_file(self, tmp_path):
        """Test that the same spellings are accepted from a TOML file"""
        path = write_toml(tmp_path / "run.toml", '[run]\narch = "table3"\n\n[train]\nloss_form = "eq5"\n')
        cfg = resolve(build_parser().parse_args(["--config", str(path), "train"]))
        assert (cfg.arch, cfg.train.loss_form) == ("vgg", "binary_sum")

    def test_unknown_section(self, tmp_path):
        """Test that an unexpected TOML section is refused"""
        path = write_toml(tmp_path / "run.toml", "[model]\ndepth = 3\n")
        with pytest.raises(ConfigError, match="unknown sections"):
            load_config_file(path)

    def test_unknown_run_setting(self):
        """Test that an unexpected [run] key is refused"""
        with pytest.raises(ConfigError):
            resolve_run_config("train", {"run": {"gpus": 2}})

    def test_missing_file(self, tmp_path):
        """Test that a missing config file is a config error"""
        with pytest.raises(ConfigError, match="not found"):
            load_config_file(tmp_path / "absent.toml")

    def test_to_json_is_stable(self):
        """Test that the resolved config serialises with nested sections"""
        cfg = resolve_run_config("synth", synth={"n_per_class": 3})
        assert json.loads(cfg.to_json())["synth"]["n_per_class"] == 3


class TestCommands:
    """Test the subcommands end to end through run()"""

    def test_unknown_command(self):
        """Test that an unknown subcommand exits with the usage code"""
        assert run(["bogus"]) == EXIT_USAGE

    def test_no_command(self):
        """Test that no subcommand exits with the usage code"""
        assert run([]) == EXIT_USAGE

    def test_config_printed_first(self, capsys):
        """Test that the resolved config is the first line of output"""
        assert run(["report", "--published"]) == EXIT_OK
        first = capsys.readouterr().out.splitlines()[0]
        assert json.loads(first)["command"] == "report"

    def test_published_report(self, capsys, tmp_path):
        """Test the bundled comparison report on stdout and in --out"""
        assert run(["report", "--published", "--out", str(tmp_path)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "+8.31" in out
        assert "reproduced" in out
        assert (tmp_path / "report.json").exists()
        assert (tmp_path / "report.txt").read_text() in out

    def test_report_needs_input(self):
        """Test that report without files or --published is a usage error"""
        assert run(["report"]) == EXIT_USAGE

    def test_report_missing_metrics_file(self, tmp_path):
        """Test that a missing metrics file is a data error"""
        assert run(["report", str(tmp_path / "none.json")]) == EXIT_DATA

    def test_gradcheck(self, capsys):
        """Test gradcheck on a few seeded networks"""
        assert run(["gradcheck", "--seed", "7", "--networks", "5"]) == EXIT_OK
        assert "max relative error" in capsys.readouterr().out

    def test_bad_clip_fraction(self, image_dir, tmp_path):
        """Test that a clip fraction above 0.005 is a usage error"""
        argv = [
            "preprocess",
            "--manifest",
            str(image_dir / "manifest.csv"),
            "--out",
            str(tmp_path / "out"),
            "--clip-fraction",
            "0.01",
        ]
        assert run(argv) == EXIT_USAGE

    def test_missing_manifest(self, tmp_path):
        """Test that a missing manifest is a data error"""
        argv = ["preprocess", "--manifest", str(tmp_path / "none.csv"), "--out", str(tmp_path / "out")]
        assert run(argv) == EXIT_DATA

    def test_required_flag(self):
        """Test that preprocess without --manifest is a usage error"""
        assert run(["preprocess"]) == EXIT_USAGE

    def test_preprocess(self, image_dir, tmp_path):
        """Test enhancement and resizing of every manifest image"""
        out = tmp_path / "enhanced"
        argv = ["preprocess", "--manifest", str(image_dir / "manifest.csv"), "--out", str(out), "--size", "32"]
        assert run(argv) == EXIT_OK
        records = load_manifest(out / "manifest.csv")
        assert [int(r.grade) for r in records] == [0, 1]
        first = decode_image(out / records[0].image_path)
        assert first.shape == (32, 32, 3)
        assert np.all(first == 90)

    def test_synth_train_eval(self, tmp_path, capsys):
        """Test synth, train, eval and report chained through run()"""
        data, model, scores = tmp_path / "data", tmp_path / "model", tmp_path / "scores"
        assert run(["synth", "--out", str(data), "--per-class", "4", "--size", "32", "--seed", "1"]) == EXIT_OK
        assert len(load_manifest(data / "manifest.csv")) == 20

        argv = ["train", "--manifest", str(data / "manifest.csv"), "--out", str(model), "--epochs", "1"]
        assert run(argv) == EXIT_OK
        ckpt = load_checkpoint(model / "model.fnck")
        assert ckpt.metadata.epochs_completed == 1
        assert ckpt.spec.input_shape == (32, 32, 3)
        history = (model / "history.jsonl").read_text().splitlines()
        assert json.loads(history[0])["epoch"] == 1

        argv = [
            "eval",
            "--checkpoint",
            str(model / "model.fnck"),
            "--manifest",
            str(data / "manifest.csv"),
            "--out",
            str(scores),
        ]
        assert run(argv) == EXIT_OK
        doc = json.loads((scores / "metrics.json").read_text())
        assert sum(map(sum, doc["confusion"])) == 20
        assert doc["model"] == "EDLM"
        assert "accuracy" in capsys.readouterr().out

        assert run(["report", str(scores / "metrics.json")]) == EXIT_OK

    def test_mixed_image_sizes_are_a_data_error(self, image_dir, tmp_path, capsys):
        """Test that training on images of different sizes exits with the data code"""
        save_png(image_dir / "c.png", solid_image(32, 40, 50))
        write_manifest(
            image_dir / "manifest.csv",
            [ManifestRecord("a.png", 0), ManifestRecord("c.png", 1)],
        )
        argv = ["train", "--manifest", str(image_dir / "manifest.csv"), "--out", str(tmp_path / "model")]
        assert run(argv) == EXIT_DATA
        assert "c.png" in capsys.readouterr().err

    def test_report_rejects_non_metrics_json(self, tmp_path):
        """Test that a JSON file without metrics exits with the data code"""
        path = tmp_path / "other.json"
        path.write_text(json.dumps({"hello": 1}))
        assert run(["report", str(path)]) == EXIT_DATA

    def test_eval_missing_checkpoint(self, image_dir, tmp_path):
        """Test that a missing checkpoint is a data error"""
        argv = [
            "eval",
            "--checkpoint",
            str(tmp_path / "none.fnck"),
            "--manifest",
            str(image_dir / "manifest.csv"),
            "--out",
            str(tmp_path / "scores"),
        ]
        assert run(argv) == EXIT_DATA

    @pytest.mark.slow
    def test_train_with_split_and_grid(self, tmp_path, capsys):
        """Test a held-out split, a learning-rate grid and a SQLite run store"""
        data, model = tmp_path / "data", tmp_path / "model"
        assert run(["synth", "--out", str(data), "--per-class", "10", "--size", "32", "--seed", "2"]) == EXIT_OK
        argv = [
            "train",
            "--manifest",
            str(data / "manifest.csv"),
            "--out",
            str(model),
            "--epochs",
            "2",
            "--split",
            "0.2",
            "--grid-lr",
            "0.01",
            "0.001",
            "--runs-db",
            str(tmp_path / "runs.db"),
        ]
        assert run(argv) == EXIT_OK
        rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()[1:3]]
        assert [r["index"] for r in rows] == [0, 1]
        assert len(load_manifest(model / "test_manifest.csv")) == 10
        assert (tmp_path / "runs.db").exists()
