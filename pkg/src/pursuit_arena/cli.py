"""Command-line entry points: train, eval, plotdata and inspect.

Exit codes: 0 success, 2 usage or configuration error, 3 numeric divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import subprocess
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml
from scipy import stats

from . import __version__
from .arena import Scenario, ablate_proficiency, config_diff, load_scenario, scenario_to_dict
from .engine import SCHEMA_VERSION, Env, evaluate, read_summary, train
from .errors import CheckpointError, DivergenceError, NumericInputError, PursuitArenaError, SchemaError

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED = 0, 2, 3
MANIFEST_NAME = "manifest.json"
MANIFEST_SCHEMA = 1
PLOT_COLUMNS = ("episode", "mean", "lo", "hi")
THREADS_ENV = "PURSUIT_ARENA_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on its own; raise instead so callers get a code back
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_path: str
    config: dict
    seed: int
    git_describe: str
    out_dir: str
    schemas: dict

    def to_json(self) -> str:
        return json.dumps({
            "schema": MANIFEST_SCHEMA,
            "command": self.command,
            "config_path": self.config_path,
            "config": self.config,
            "seed": self.seed,
            "git_describe": self.git_describe,
            "out_dir": self.out_dir,
            "schemas": self.schemas,
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        d = json.loads(text)
        if d.get("schema") != MANIFEST_SCHEMA:
            raise SchemaError("schema", f"unsupported manifest schema {d.get('schema')!r}")
        return cls(d["command"], d["config_path"], d["config"], d["seed"], d["git_describe"], d["out_dir"],
                   d["schemas"])


def git_describe() -> str:
    try:
        res = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return res.stdout.strip() if res.returncode == 0 and res.stdout.strip() else "unknown"


def load_config(path: str | Path) -> Scenario:
    """Read a YAML scenario, or the resolved config stored in a run manifest."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix == ".json":
        try:
            return load_scenario(RunManifest.from_json(text).config)
        except (KeyError, json.JSONDecodeError) as exc:
            raise SchemaError("<manifest>", f"not a run manifest: {exc}") from None
    return load_scenario(text)


def threads_from_env() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def _seed_list(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"--seeds expects integers, got {text!r}") from None
    if not seeds:
        raise UsageError("--seeds needs at least one seed")
    return seeds


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _train_parser() -> _Parser:
    p = _Parser(prog="pursuit-arena train", description="Train policies for a scenario.")
    p.add_argument("--config", required=True, help="scenario YAML or a run manifest")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--seed", type=int, help="override train.seed")
    p.add_argument("--episodes", type=int, help="override train.episodes")
    p.add_argument("--ablate-proficiency", action="store_true",
                   help="train without position rewards and with equal perception radii")
    return p


def _run_train(args) -> int:
    scenario = load_config(args.config)
    if args.ablate_proficiency:
        scenario = ablate_proficiency(scenario)
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    if args.episodes is not None:
        if args.episodes < 0:
            raise UsageError("--episodes must be >= 0")
        scenario = replace(scenario, train=replace(scenario.train, episodes=args.episodes))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("train", str(args.config), scenario_to_dict(scenario), scenario.seed, git_describe(),
                           str(out), {"metrics": SCHEMA_VERSION, "manifest": MANIFEST_SCHEMA})
    (out / MANIFEST_NAME).write_text(manifest.to_json() + "\n")
    report = train(scenario, out)
    print(f"trained {len(report.rows)} episodes in {report.wall_clock:.1f} s -> {out}")
    return EXIT_OK


def cmd_train(argv: Sequence[str]) -> int:
    return _guard(lambda: _run_train(_train_parser().parse_args(list(argv))))


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _eval_parser() -> _Parser:
    p = _Parser(prog="pursuit-arena eval", description="Noise-free evaluation of a checkpoint.")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, required=True, help="episodes per seed")
    p.add_argument("--seeds", default="0", help="comma-separated evaluation seeds")
    p.add_argument("--out", help="directory for eval.csv (default: next to the checkpoint)")
    p.add_argument("--ablate-proficiency", action="store_true",
                   help="zero position rewards and equalise perception radii")
    return p


def format_metrics(m) -> str:
    rows = [("episodes", f"{m.episodes}"),
            ("task success rate", f"{m.task_success_rate:.4f} +- {m.success_ci_halfwidth:.4f}"),
            ("mean episode reward (all)", f"{m.mean_episode_reward:.3f} +- {m.reward_ci_halfwidth:.3f}"),
            ("mean episode reward (police)", f"{m.police_mean_reward:.3f}"),
            ("mean episode reward (criminal)", f"{m.criminal_mean_reward:.3f}"),
            ("capture events", f"{m.capture_events}" + (" (no captures)" if m.no_captures else ""))]
    rows += [(f"engagement {rid}", f"{rate:.4f}") for rid, rate in m.capture_engagement_rate.items()]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def write_metrics_csv(m, path: str | Path) -> None:
    row = {"schema": SCHEMA_VERSION, **m.as_row()}
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(row), lineterminator="\n")
        w.writeheader()
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def _run_eval(args) -> int:
    if args.episodes < 1:
        raise UsageError("--episodes must be >= 1")
    seeds = _seed_list(args.seeds)
    base = load_config(args.config)
    scenario = ablate_proficiency(base) if args.ablate_proficiency else base
    if args.ablate_proficiency:
        print("config diff (key: configured -> ablated)")
        for key, a, b in config_diff(base, scenario):
            print(f"  {key}: {a} -> {b}")
    metrics = evaluate(scenario, args.checkpoint, args.episodes, seeds, threads=threads_from_env())
    print(format_metrics(metrics))
    out = Path(args.out) if args.out else Path(args.checkpoint).parent
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(metrics, out / "eval.csv")
    from .plotting import engagement_figure
    engagement_figure(metrics.capture_engagement_rate, out / "engagement.png")
    return EXIT_OK


def cmd_eval(argv: Sequence[str]) -> int:
    return _guard(lambda: _run_eval(_eval_parser().parse_args(list(argv))))


# ---------------------------------------------------------------------------
# plotdata
# ---------------------------------------------------------------------------

def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Trailing mean over up to ``window`` values (fewer at the start)."""
    x = np.asarray(x, dtype=np.float64)
    if window < 1:
        raise ValueError("window must be >= 1")
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def curve_with_ci(runs: Sequence[Sequence[float]], window: int = 1, level: float = 0.95):
    """Smoothed mean curve across runs with a Student-t interval.

    Returns ``(mean, lo, hi)``; with a single run the band collapses to the
    mean.
    """
    data = np.array([moving_average(r, window) for r in runs])
    mean = data.mean(axis=0)
    n = data.shape[0]
    if n < 2:
        return mean, mean.copy(), mean.copy()
    half = stats.t.ppf(0.5 + level / 2.0, n - 1) * data.std(axis=0, ddof=1) / np.sqrt(n)
    return mean, mean - half, mean + half


def _plot_parser() -> _Parser:
    p = _Parser(prog="pursuit-arena plotdata", description="Learning-curve data across runs.")
    p.add_argument("runs", nargs="+", help="run directories written by train")
    p.add_argument("--out", required=True, help="CSV path; a PNG with the same stem is written too")
    p.add_argument("--window", type=int, default=1, help="moving-average window in episodes")
    return p


def _run_plotdata(args) -> int:
    if args.window < 1:
        raise UsageError("--window must be >= 1")
    curves = []
    for run in args.runs:
        path = Path(run) / "summary.csv"
        if not path.is_file():
            raise UsageError(f"no summary.csv in {run}")
        curves.append([r["mean_reward"] for r in read_summary(path)])
    lengths = {len(c) for c in curves}
    if len(lengths) != 1:
        raise UsageError(f"runs have different episode counts: {sorted(lengths)}")
    mean, lo, hi = curve_with_ci(curves, args.window)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_COLUMNS)
        for k in range(mean.size):
            w.writerow([k, repr(float(mean[k])), repr(float(lo[k])), repr(float(hi[k]))])
    from .plotting import learning_curve_figure
    learning_curve_figure(np.arange(mean.size), mean, lo, hi, out.with_suffix(".png"))
    print(f"wrote {out} ({mean.size} episodes, {len(curves)} runs, window {args.window})")
    return EXIT_OK


def cmd_plotdata(argv: Sequence[str]) -> int:
    return _guard(lambda: _run_plotdata(_plot_parser().parse_args(list(argv))))


def read_plotdata(path: str | Path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != PLOT_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [{"episode": int(r["episode"]), "mean": float(r["mean"]), "lo": float(r["lo"]),
                 "hi": float(r["hi"])} for r in reader]


# ---------------------------------------------------------------------------
# inspect
# ---------------------------------------------------------------------------

def _inspect_parser() -> _Parser:
    p = _Parser(prog="pursuit-arena inspect", description="Validate a scenario and print a summary.")
    p.add_argument("--config", required=True)
    p.add_argument("--ablate-proficiency", action="store_true")
    return p


def _run_inspect(args) -> int:
    scenario = load_config(args.config)
    if args.ablate_proficiency:
        scenario = ablate_proficiency(scenario)
    env = Env(scenario)
    w = scenario.map
    print(f"map {w.width:g} x {w.height:g} m, {len(w.regions)} regions, {len(w.sois)} SoIs, "
          f"{len(w.stations)} stations")
    for r in w.regions:
        print(f"  {r.kind.value:<8} {len(r.polygon)} vertices")
    print(f"horizon {scenario.horizon} steps of {scenario.dt:g} s, capture within {scenario.capture_distance:g} m "
          f"by {scenario.min_capturers}")
    for spec, dim in zip(scenario.roster, env.obs_dims):
        print(f"  {spec.id:<10} {spec.team.value:<8} {spec.kind.value}  v_max {spec.v_max:g}  a_max {spec.a_max:g}  "
              f"radius {spec.perception_radius:g}  obs {dim}")
    print(yaml.safe_dump({"train": scenario_to_dict(scenario)["train"]}, sort_keys=False).rstrip())
    return EXIT_OK


def cmd_inspect(argv: Sequence[str]) -> int:
    return _guard(lambda: _run_inspect(_inspect_parser().parse_args(list(argv))))


# ---------------------------------------------------------------------------

def _guard(fn) -> int:
    try:
        return fn()
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DivergenceError, NumericInputError) as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PursuitArenaError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "plotdata": cmd_plotdata, "inspect": cmd_inspect}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print("usage: pursuit-arena {train,eval,plotdata,inspect} [flags]\n"
              "run 'pursuit-arena <command> --help' for command flags")
        return EXIT_OK if argv else EXIT_USAGE
    if argv[0] == "--version":
        print(__version__)
        return EXIT_OK
    cmd = COMMANDS.get(argv[0])
    if cmd is None:
        print(f"usage error: unknown command {argv[0]!r}", file=sys.stderr)
        return EXIT_USAGE
    return cmd(argv[1:])


if __name__ == "__main__":
    sys.exit(main())
