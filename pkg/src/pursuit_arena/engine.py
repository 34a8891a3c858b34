"""Episode rollouts, training loop and evaluation metrics."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .approximator import AgentNets, MlpParams, forward_vector, load_checkpoint, save_checkpoint
from .arena import (Kind, RegionKind, Scenario, Team, roster_ids, sample_criminal_start, stations_for)
from .errors import CheckpointShapeError, DivergenceError, NumericInputError
from .learner import (ReplayBuffer, Transition, make_agent_nets, make_optimizer, noise_at, train_step)
from .motion import (JointState, UavState, UgvState, clamp_ugv_command, integrate_uav, integrate_ugv,
                     position_allowed)
from .objective import RewardBreakdown, StepOutcome, discounted_return, step_outcome, step_rewards
from .perception import build_observations, observation_dim, observation_scale

ACTION_DIM = 2
SCHEMA_VERSION = 1

Policy = MlpParams | Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# state transition
# ---------------------------------------------------------------------------

class Env:
    """Stateless transition function bound to one scenario."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.ids = roster_ids(scenario)
        self.n = len(scenario.roster)
        self.obs_dims = [observation_dim(scenario, rid) for rid in self.ids]
        self.obs_scale = [observation_scale(scenario, rid) for rid in self.ids]
        self.police = scenario.team_indices(Team.POLICE)
        self.criminals = scenario.team_indices(Team.CRIMINAL)
        self._lawns = scenario.map.regions_of(RegionKind.LAWN)

    def reset(self, rng: np.random.Generator) -> JointState:
        s = self.scenario
        positions: list = [None] * self.n
        for i, p in zip(self.police, stations_for(s.map, len(self.police), rng)):
            positions[i] = p
        for i in self.criminals:
            positions[i] = sample_criminal_start(s.map, rng)
        headings = [float(rng.uniform(-math.pi, math.pi)) if r.kind is Kind.UGV else 0.0 for r in s.roster]
        return JointState.at_rest(positions, headings)

    def observe(self, state: JointState) -> list[np.ndarray]:
        return build_observations(state, self.scenario)

    def terrain_factor(self, p) -> float:
        if any(r.contains(p) for r in self._lawns):
            return self.scenario.lawn_factor
        return 1.0

    def move(self, state: JointState, actions: Sequence[np.ndarray]) -> JointState:
        """Integrate one step of joint actions (each in [-1, 1]^2)."""
        s = self.scenario
        dt = s.dt
        pos, vel = list(state.positions), list(state.velocities)
        heading, v_lin, v_ang = list(state.headings), list(state.v_lin), list(state.v_ang)
        for i, spec in enumerate(s.roster):
            if not state.active[i]:
                continue
            a0, a1 = float(actions[i][0]), float(actions[i][1])
            prev = state.positions[i]
            if spec.kind is Kind.UAV:
                nxt = integrate_uav(UavState(prev, state.velocities[i]), (a0 * spec.a_max, a1 * spec.a_max),
                                    dt, spec)
                if position_allowed(s.map, Kind.UAV, nxt.position):
                    pos[i], vel[i] = nxt.position, nxt.velocity
                else:
                    vel[i] = (0.0, 0.0)
            else:
                cur = UgvState(prev, state.headings[i], state.v_lin[i], state.v_ang[i])
                cmd = clamp_ugv_command(cur, (a0 * spec.v_max, a1 * spec.angular_max), spec)
                nxt = integrate_ugv(cur, cmd, dt, self.terrain_factor(prev))
                heading[i], v_lin[i], v_ang[i] = nxt.heading, nxt.v_lin, nxt.v_ang
                if position_allowed(s.map, Kind.UGV, nxt.position):
                    pos[i] = nxt.position
                    vel[i] = ((nxt.position[0] - prev[0]) / dt, (nxt.position[1] - prev[1]) / dt)
                else:
                    vel[i] = (0.0, 0.0)
        return JointState(tuple(pos), tuple(vel), tuple(heading), tuple(v_lin), tuple(v_ang), state.active)

    def step(self, state: JointState, actions: Sequence[np.ndarray], step: int
             ) -> tuple[JointState, StepOutcome, list[RewardBreakdown]]:
        moved = self.move(state, actions)
        outcome = step_outcome(moved, self.scenario, step)
        rewards = step_rewards(moved, outcome, self.scenario)
        if outcome.captures and not self.scenario.sticky_capture:
            caught = {cid for cid, _ in outcome.captures}
            active = tuple(a and rid not in caught for a, rid in zip(moved.active, self.ids))
            moved = JointState(moved.positions, moved.velocities, moved.headings, moved.v_lin, moved.v_ang,
                               active)
        return moved, outcome, rewards


# ---------------------------------------------------------------------------
# rollouts
# ---------------------------------------------------------------------------

@dataclass
class EpisodeResult:
    returns: tuple[float, ...]
    discounted_returns: tuple[float, ...]
    capture_events: list[tuple[int, str, frozenset[str]]]
    arrival_events: list[tuple[int, str, int]]
    success: bool
    steps_used: int


def episode_success(scenario: Scenario, captures, arrivals) -> bool:
    """Every criminal captured before any spot of interest was reached."""
    first_arrival = min((step for step, _, _ in arrivals), default=math.inf)
    first_capture: dict[str, int] = {}
    for step, cid, _ in captures:
        first_capture.setdefault(cid, step)
    crims = [scenario.roster[i].id for i in scenario.team_indices(Team.CRIMINAL)]
    return all(c in first_capture and first_capture[c] < first_arrival for c in crims)


class Learner:
    """Training-side state: networks, replay buffer and random streams."""

    def __init__(self, scenario: Scenario, nets: AgentNets | None = None, seeds=None):
        self.scenario = scenario
        self.config = scenario.train
        env = Env(scenario)
        if seeds is None:
            seeds = np.random.SeedSequence(scenario.seed).spawn(2)
        init_ss, sample_ss = seeds
        self.sample_rng = np.random.default_rng(sample_ss)
        if nets is None:
            nets = make_agent_nets(env.ids, env.obs_dims, [ACTION_DIM] * env.n, self.config.hidden,
                                   np.random.default_rng(init_ss))
        self.nets = nets
        self.buffer = ReplayBuffer(env.obs_dims, [ACTION_DIM] * env.n, self.config.capacity)
        self.learners = [(r.team is Team.POLICE and self.config.learn_police)
                         or (r.team is Team.CRIMINAL and self.config.learn_criminal) for r in scenario.roster]
        self.optimizer = make_optimizer(self.config.optimizer)
        self.steps = 0
        self.updates = 0
        self.last_diagnostics = None

    def record(self, t: Transition) -> None:
        self.buffer.store(t)
        self.steps += 1
        ready = self.buffer.size >= max(self.config.batch, self.config.warmup)
        if ready and any(self.learners) and self.steps % self.config.update_every == 0:
            self.last_diagnostics = train_step(self.nets, self.buffer, self.config, self.sample_rng,
                                               self.scenario.gamma, self.learners, self.optimizer)
            self.updates += 1


def _joint_action(policies: Sequence[Policy], obs: Sequence[np.ndarray], scales: Sequence[np.ndarray],
                  noise: float, rng) -> np.ndarray:
    out = np.empty((len(policies), ACTION_DIM))
    for i, policy in enumerate(policies):
        if isinstance(policy, MlpParams):
            out[i] = forward_vector(policy, obs[i] / scales[i])
        else:
            out[i] = np.asarray(policy(obs[i]), dtype=np.float64)
    if noise > 0.0:
        out += noise * rng.standard_normal(out.shape)
    return np.clip(out, -1.0, 1.0, out=out)


def run_episode(scenario: Scenario, policies: Sequence[Policy], rng: np.random.Generator,
                learn: bool = False, buffer: ReplayBuffer | None = None, noise_scale: float = 0.0,
                learner: Learner | None = None, env: Env | None = None,
                trace: list | None = None) -> EpisodeResult:
    """Play one episode.

    ``policies`` holds one entry per robot: an :class:`MlpParams` (fed the
    normalised observation) or a callable taking the raw observation.  With
    ``learn`` set, transitions go to ``learner`` (which also trains) or to
    ``buffer``.  ``rng`` drives start positions and exploration noise.
    """
    env = env or Env(scenario)
    if len(policies) != env.n:
        raise ValueError(f"need {env.n} policies, got {len(policies)}")
    if learn and learner is None and buffer is None:
        raise ValueError("learning needs a learner or a buffer")
    state = env.reset(rng)
    obs = env.observe(state)
    n = env.n
    rewards_seq: list[list[float]] = [[] for _ in range(n)]
    captures, arrivals = [], []
    steps = 0
    for t in range(scenario.horizon):
        actions = _joint_action(policies, obs, env.obs_scale, noise_scale, rng)
        try:
            state, outcome, rewards = env.step(state, actions, t)
        except NumericInputError as exc:
            raise NumericInputError(f"step {t}: {exc}") from exc
        next_obs = env.observe(state)
        totals = [r.total for r in rewards]
        for i in range(n):
            rewards_seq[i].append(totals[i])
        captures.extend((t, cid, ids) for cid, ids in outcome.captures)
        arrivals.extend((t, cid, k) for cid, k in outcome.arrivals)
        if trace is not None:
            trace.append((state, outcome, rewards))
        if learn:
            tr = Transition(tuple(o / s for o, s in zip(obs, env.obs_scale)), tuple(actions.copy()),
                            np.array(totals), tuple(o / s for o, s in zip(next_obs, env.obs_scale)),
                            outcome.terminal and not outcome.truncated)
            if learner is not None:
                learner.record(tr)
            else:
                buffer.store(tr)
        obs = next_obs
        steps = t + 1
        if outcome.terminal:
            break
    return EpisodeResult(
        returns=tuple(math.fsum(r) for r in rewards_seq),
        discounted_returns=tuple(discounted_return(r, scenario.gamma) for r in rewards_seq),
        capture_events=captures,
        arrival_events=arrivals,
        success=episode_success(scenario, captures, arrivals),
        steps_used=steps,
    )


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass
class Metrics:
    robot_ids: tuple[str, ...]
    episodes: int
    mean_episode_reward: float
    police_mean_reward: float
    criminal_mean_reward: float
    task_success_rate: float
    capture_engagement_rate: dict[str, float]
    capture_events: int
    no_captures: bool
    success_ci_halfwidth: float
    reward_ci_halfwidth: float
    per_seed_success: tuple[float, ...] = ()
    per_seed_reward: tuple[float, ...] = ()

    def as_row(self) -> dict:
        row = {
            "episodes": self.episodes,
            "mean_episode_reward": self.mean_episode_reward,
            "police_mean_reward": self.police_mean_reward,
            "criminal_mean_reward": self.criminal_mean_reward,
            "task_success_rate": self.task_success_rate,
            "success_ci_halfwidth": self.success_ci_halfwidth,
            "reward_ci_halfwidth": self.reward_ci_halfwidth,
            "capture_events": self.capture_events,
            "no_captures": self.no_captures,
        }
        for rid in self.robot_ids:
            row[f"engagement_{rid}"] = self.capture_engagement_rate[rid]
        return row


def ci_halfwidth(values: Sequence[float], level: float = 0.95) -> float:
    """Student-t confidence half-width of the mean; NaN for fewer than 2 values."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        return float("nan")
    return float(stats.t.ppf(0.5 + level / 2.0, x.size - 1) * x.std(ddof=1) / math.sqrt(x.size))


def aggregate(scenario: Scenario, per_seed: Sequence[Sequence[EpisodeResult]]) -> Metrics:
    ids = tuple(roster_ids(scenario))
    police = scenario.team_indices(Team.POLICE)
    crims = scenario.team_indices(Team.CRIMINAL)
    results = [r for seed in per_seed for r in seed]
    total = len(results)
    engaged = dict.fromkeys(ids, 0)
    events = 0
    for r in results:
        for _, _, capturers in r.capture_events:
            events += 1
            for pid in capturers:
                engaged[pid] += 1
    engagement = {rid: (engaged[rid] / events if events else 0.0) for rid in ids}

    def mean_of(idx, rs):
        return float(np.mean([r.returns[i] for r in rs for i in idx])) if rs else float("nan")

    everyone = list(range(len(ids)))
    seed_success = tuple(float(np.mean([r.success for r in rs])) for rs in per_seed if rs)
    seed_reward = tuple(mean_of(everyone, rs) for rs in per_seed if rs)
    return Metrics(
        robot_ids=ids,
        episodes=total,
        mean_episode_reward=mean_of(everyone, results),
        police_mean_reward=mean_of(police, results),
        criminal_mean_reward=mean_of(crims, results),
        task_success_rate=(sum(r.success for r in results) / total) if total else float("nan"),
        capture_engagement_rate=engagement,
        capture_events=events,
        no_captures=events == 0,
        success_ci_halfwidth=ci_halfwidth(seed_success),
        reward_ci_halfwidth=ci_halfwidth(seed_reward),
        per_seed_success=seed_success,
        per_seed_reward=seed_reward,
    )


def check_nets(scenario: Scenario, nets: AgentNets) -> None:
    env = Env(scenario)
    if nets.obs_dims != env.obs_dims or nets.act_dims != [ACTION_DIM] * env.n:
        raise CheckpointShapeError(
            f"checkpoint nets take obs {nets.obs_dims}, scenario produces {env.obs_dims}")
    critic_in = sum(env.obs_dims) + ACTION_DIM * env.n
    if any(c.in_dim != critic_in for c in nets.critic):
        raise CheckpointShapeError("critic input size does not match the scenario")


def _eval_seed(args):
    scenario, policies, episodes, seed = args
    env = Env(scenario)
    rng = np.random.default_rng(seed)
    return [run_episode(scenario, policies, rng, env=env) for _ in range(episodes)]


def evaluate(scenario: Scenario, checkpoint: AgentNets | str | Path, episodes: int,
             seeds: Sequence[int], threads: int = 1) -> Metrics:
    """Noise-free, learning-free rollouts: ``episodes`` per seed."""
    if isinstance(checkpoint, (str, Path)):
        nets = load_checkpoint(checkpoint, roster_ids(scenario))
    else:
        nets = checkpoint
        if tuple(nets.roster) != tuple(roster_ids(scenario)):
            from .errors import RosterMismatchError
            raise RosterMismatchError(f"nets roster {list(nets.roster)} != scenario roster")
    check_nets(scenario, nets)
    jobs = [(scenario, nets.policy, episodes, int(s)) for s in seeds]
    if threads > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=threads) as pool:
            per_seed = list(pool.map(_eval_seed, jobs))
    else:
        per_seed = [_eval_seed(j) for j in jobs]
    return aggregate(scenario, per_seed)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class TrainingReport:
    rows: list[dict] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)
    wall_clock: float = 0.0
    nets: AgentNets | None = None

    @property
    def mean_rewards(self) -> list[float]:
        return [r["mean_reward"] for r in self.rows]


SUMMARY_COLUMNS = ("episode", "mean_reward", "success", "captures")


def episode_row(k: int, scenario: Scenario, result: EpisodeResult, noise: float) -> dict:
    ids = roster_ids(scenario)
    return {
        "schema": SCHEMA_VERSION,
        "episode": k,
        "returns": dict(zip(ids, result.returns)),
        "mean_reward": float(np.mean(result.returns)),
        "police_reward": float(np.mean([result.returns[i] for i in scenario.team_indices(Team.POLICE)])),
        "success": result.success,
        "captures": [[s, c, sorted(ids_)] for s, c, ids_ in result.capture_events],
        "arrivals": [[s, c, k_] for s, c, k_ in result.arrival_events],
        "steps": result.steps_used,
        "noise": noise,
    }


def _summary_line(row: dict) -> list:
    return [row["episode"], repr(row["mean_reward"]), int(row["success"]), len(row["captures"])]


def train(scenario: Scenario, out_dir: str | Path | None = None,
          progress: Callable[[dict], None] | None = None) -> TrainingReport:
    """Run ``scenario.train.episodes`` episodes of noisy rollouts with learning.

    With ``out_dir`` set, writes ``metrics.jsonl``, ``summary.csv`` and
    checkpoints under ``checkpoints/``; ``checkpoint.bin`` holds the final nets.
    A divergence stores ``checkpoint_last_good.bin`` and re-raises.
    """
    cfg = scenario.train
    started = time.perf_counter()
    env = Env(scenario)
    init_ss, sample_ss, rollout_ss = np.random.SeedSequence(scenario.seed).spawn(3)
    learner = Learner(scenario, seeds=(init_ss, sample_ss))
    rollout_rng = np.random.default_rng(rollout_ss)
    report = TrainingReport(nets=learner.nets)
    out = Path(out_dir) if out_dir is not None else None
    jsonl = summary = writer = None
    if out is not None:
        (out / "checkpoints").mkdir(parents=True, exist_ok=True)
        jsonl = (out / "metrics.jsonl").open("w")
        summary = (out / "summary.csv").open("w", newline="")
        writer = csv.writer(summary, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
    last_good = learner.nets.copy()
    try:
        for k in range(cfg.episodes):
            noise = noise_at(k, cfg.episodes, cfg.noise_start, cfg.noise_end)
            try:
                result = run_episode(scenario, learner.nets.policy, rollout_rng, learn=True, noise_scale=noise,
                                     learner=learner, env=env)
            except DivergenceError as exc:
                if out is not None:
                    save_checkpoint(last_good, out / "checkpoint_last_good.bin")
                raise DivergenceError(f"episode {k}: {exc}", step=k, robot=exc.robot) from exc
            row = episode_row(k, scenario, result, noise)
            report.rows.append(row)
            if jsonl is not None:
                jsonl.write(json.dumps(row) + "\n")
                writer.writerow(_summary_line(row))
            if out is not None and cfg.checkpoint_every and (k + 1) % cfg.checkpoint_every == 0:
                path = out / "checkpoints" / f"ep{k + 1:06d}.bin"
                save_checkpoint(learner.nets, path)
                report.checkpoints.append(path)
            last_good = learner.nets.copy()
            if progress is not None:
                progress(row)
    finally:
        if jsonl is not None:
            jsonl.close()
            summary.close()
    if out is not None:
        save_checkpoint(learner.nets, out / "checkpoint.bin")
        report.checkpoints.append(out / "checkpoint.bin")
    report.wall_clock = time.perf_counter() - started
    return report


def read_summary(path: str | Path) -> list[dict]:
    """Parse a ``summary.csv`` written by :func:`train`."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SUMMARY_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [{"episode": int(r["episode"]), "mean_reward": float(r["mean_reward"]),
                 "success": bool(int(r["success"])), "captures": int(r["captures"])} for r in reader]
