"""Tests for the command-line entry points and their file formats."""

import csv
import json

import numpy as np
import pytest
import yaml

from pursuit_arena import cli
from pursuit_arena.cli import (EXIT_DIVERGED, EXIT_OK, EXIT_USAGE, RunManifest, cmd_eval, cmd_inspect,
                               cmd_plotdata, cmd_train, curve_with_ci, load_config, main, moving_average,
                               read_plotdata)
from pursuit_arena.engine import read_summary

from conftest import make_doc


def write_config(tmp_path, name="cfg.yaml", **sections):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(make_doc(**sections)))
    return path


def write_summary(run_dir, rewards):
    run_dir.mkdir(parents=True)
    with (run_dir / "summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("episode", "mean_reward", "success", "captures"))
        for k, r in enumerate(rewards):
            w.writerow((k, repr(float(r)), 0, 0))
    return run_dir


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    cfg = root / "cfg.yaml"
    cfg.write_text(yaml.safe_dump(make_doc()))
    assert cmd_train(["--config", str(cfg), "--out", str(root / "a"), "--seed", "7"]) == EXIT_OK
    return cfg, root / "a"


class TestTrain:
    def test_outputs_present(self, trained):
        _, run = trained
        for name in ("manifest.json", "metrics.jsonl", "summary.csv", "checkpoint.bin"):
            assert (run / name).is_file()
        assert RunManifest.from_json((run / "manifest.json").read_text()).seed == 7

    def test_missing_config(self, tmp_path):
        assert cmd_train(["--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)]) == EXIT_USAGE

    def test_missing_required_flag(self, tmp_path):
        assert cmd_train(["--out", str(tmp_path)]) == EXIT_USAGE

    def test_bad_config(self, tmp_path):
        cfg = write_config(tmp_path, episode={"horizon": 0})
        assert cmd_train(["--config", str(cfg), "--out", str(tmp_path / "r")]) == EXIT_USAGE

    def test_divergence_exit_code(self, tmp_path):
        cfg = write_config(tmp_path, train={"lr_critic": 1e200, "episodes": 3, "batch": 4})
        with np.errstate(all="ignore"):
            code = cmd_train(["--config", str(cfg), "--out", str(tmp_path / "r")])
        assert code == EXIT_DIVERGED
        assert (tmp_path / "r" / "checkpoint_last_good.bin").is_file()

    def test_rerun_from_manifest_is_bitwise(self, trained, tmp_path):
        _, run = trained
        assert cmd_train(["--config", str(run / "manifest.json"), "--out", str(tmp_path / "b")]) == EXIT_OK
        assert (tmp_path / "b" / "metrics.jsonl").read_bytes() == (run / "metrics.jsonl").read_bytes()
        assert (tmp_path / "b" / "checkpoint.bin").read_bytes() == (run / "checkpoint.bin").read_bytes()


class TestManifest:
    def test_round_trip(self):
        m = RunManifest("train", "a.yaml", {"x": [1, 2]}, 4, "abc", "out", {"metrics": 1})
        assert RunManifest.from_json(m.to_json()) == m

    def test_unknown_schema(self):
        text = json.dumps({"schema": 99})
        with pytest.raises(Exception):
            RunManifest.from_json(text)

    def test_manifest_config_reloads(self, trained):
        cfg, run = trained
        a = load_config(cfg)
        b = load_config(run / "manifest.json")
        assert b.roster == a.roster and b.map == a.map and b.seed == 7


class TestEval:
    def test_eval_writes_csv(self, trained, tmp_path, capsys):
        cfg, run = trained
        code = cmd_eval(["--config", str(cfg), "--checkpoint", str(run / "checkpoint.bin"),
                         "--episodes", "3", "--seeds", "0,1", "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert "task success rate" in capsys.readouterr().out
        with (tmp_path / "eval.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1
        assert 0.0 <= float(rows[0]["task_success_rate"]) <= 1.0
        assert int(rows[0]["episodes"]) == 6

    def test_zero_episodes(self, trained):
        cfg, run = trained
        assert cmd_eval(["--config", str(cfg), "--checkpoint", str(run / "checkpoint.bin"),
                         "--episodes", "0"]) == EXIT_USAGE

    def test_roster_mismatch(self, trained, tmp_path):
        _, run = trained
        robots = [{"id": "x", "team": "police", "preset": "iris"},
                  {"id": "y", "team": "police", "preset": "iris"},
                  {"id": "z", "team": "criminal", "preset": "husky"}]
        other = write_config(tmp_path, robots=robots)
        assert cmd_eval(["--config", str(other), "--checkpoint", str(run / "checkpoint.bin"),
                         "--episodes", "1", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_missing_checkpoint(self, trained, tmp_path):
        cfg, _ = trained
        assert cmd_eval(["--config", str(cfg), "--checkpoint", str(tmp_path / "none.bin"),
                         "--episodes", "1"]) == EXIT_USAGE

    def test_ablation_diff_touches_only_rewards_and_ranges(self, trained, tmp_path, capsys):
        cfg, run = trained
        code = cmd_eval(["--config", str(cfg), "--checkpoint", str(run / "checkpoint.bin"), "--episodes", "1",
                         "--out", str(tmp_path), "--ablate-proficiency"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        lines = out.split("config diff")[1].split("\n")[1:]
        changed = [ln.strip().split(":")[0] for ln in lines if "->" in ln]
        assert changed
        assert all(k.startswith("reward.") or k.endswith(".perception_radius") for k in changed)


class TestPlotdata:
    def test_order_property(self, tmp_path):
        rng = np.random.default_rng(0)
        runs = [write_summary(tmp_path / f"r{k}", rng.normal(size=30)) for k in range(5)]
        out = tmp_path / "curve.csv"
        assert cmd_plotdata([*map(str, runs), "--out", str(out), "--window", "5"]) == EXIT_OK
        rows = read_plotdata(out)
        assert [r["episode"] for r in rows] == list(range(30))
        assert all(r["hi"] >= r["mean"] >= r["lo"] for r in rows)
        assert out.with_suffix(".png").is_file()

    def test_window_one_is_raw(self, tmp_path):
        a = write_summary(tmp_path / "a", [1.0, 3.0, 5.0])
        b = write_summary(tmp_path / "b", [3.0, 5.0, 9.0])
        out = tmp_path / "c.csv"
        assert cmd_plotdata([str(a), str(b), "--out", str(out), "--window", "1"]) == EXIT_OK
        assert [r["mean"] for r in read_plotdata(out)] == [2.0, 4.0, 7.0]

    def test_mismatched_lengths(self, tmp_path):
        a = write_summary(tmp_path / "a", [1.0, 2.0])
        b = write_summary(tmp_path / "b", [1.0, 2.0, 3.0])
        assert cmd_plotdata([str(a), str(b), "--out", str(tmp_path / "c.csv")]) == EXIT_USAGE

    def test_missing_run(self, tmp_path):
        assert cmd_plotdata([str(tmp_path / "nope"), "--out", str(tmp_path / "c.csv")]) == EXIT_USAGE

    def test_ci_shrinks_with_more_runs(self):
        rng = np.random.default_rng(3)
        data = rng.normal(0.0, 1.0, size=(8, 2000))

        def width(n):
            _, lo, hi = curve_with_ci(data[:n])
            return float(np.mean(hi - lo))
        # t*s/sqrt(n): 12.71/1.41 at n=2 against 2.36/2.83 at n=8
        assert width(8) < width(4) < width(2)

    def test_ci_matches_t_interval(self):
        runs = [[1.0], [2.0], [4.0]]
        mean, lo, hi = curve_with_ci(runs)
        # closed-form Student-t quantile for two degrees of freedom
        q = 0.975
        t2 = (2 * q - 1) / np.sqrt(2 * q * (1 - q))
        half = t2 * np.std([1.0, 2.0, 4.0], ddof=1) / np.sqrt(3)
        assert mean[0] == pytest.approx(7 / 3)
        assert hi[0] - mean[0] == pytest.approx(half, rel=1e-9)

    def test_moving_average(self):
        np.testing.assert_allclose(moving_average([2.0, 4.0, 6.0, 8.0], 2), [2.0, 3.0, 5.0, 7.0])

    def test_summary_round_trip(self, tmp_path):
        run = write_summary(tmp_path / "a", [0.5, -1.25])
        assert [r["mean_reward"] for r in read_summary(run / "summary.csv")] == [0.5, -1.25]


class TestMain:
    def test_unknown_command(self):
        assert main(["fly"]) == EXIT_USAGE

    def test_no_args(self):
        assert main([]) == EXIT_USAGE

    def test_version(self, capsys):
        assert main(["--version"]) == EXIT_OK
        assert capsys.readouterr().out.strip()

    def test_inspect(self, demo_path, capsys):
        assert cmd_inspect(["--config", str(demo_path)]) == EXIT_OK
        assert "horizon" in capsys.readouterr().out

    def test_threads_env(self, monkeypatch):
        monkeypatch.setenv(cli.THREADS_ENV, "4")
        assert cli.threads_from_env() == 4
        monkeypatch.setenv(cli.THREADS_ENV, "many")
        with pytest.raises(cli.UsageError):
            cli.threads_from_env()
