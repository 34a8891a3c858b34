"""Centralised-critic actor-critic training with decentralised actors.

Each robot ``i`` owns a deterministic policy ``mu_i(o_i)`` and a critic
``Q_i(o_1..o_N, a_1..a_N)``.  Critics regress onto
``y = r_i + gamma * (1 - done) * Q_i'(o', mu'(o'))`` built from the target
networks; policies ascend ``dQ_i/da_i * dmu_i/dtheta_i`` with the other
robots' actions taken from the replay batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .approximator import (LINEAR, RELU, TANH, AgentNets, GradientSet, MlpParams, apply_gradient,
                           backward_cache, clip_gradient, forward, forward_cache, init_mlp,
                           soft_update_)
from .errors import DivergenceError, PreconditionError, ShapeError

__all__ = [
    "Adam", "AgentNets", "Batch", "ReplayBuffer", "StepDiagnostics", "Transition", "act", "actor_gradient",
    "actor_objective", "critic_gradient", "critic_loss", "critic_targets", "make_agent_nets",
    "make_optimizer", "Sgd", "store", "train_step", "update_actor", "update_critic",
]


@dataclass(frozen=True)
class Transition:
    obs: tuple[np.ndarray, ...]
    actions: tuple[np.ndarray, ...]
    rewards: np.ndarray
    next_obs: tuple[np.ndarray, ...]
    terminal: bool


@dataclass
class Batch:
    obs: list[np.ndarray]
    actions: list[np.ndarray]
    rewards: np.ndarray
    next_obs: list[np.ndarray]
    done: np.ndarray

    def __len__(self) -> int:
        return self.rewards.shape[0]


class ReplayBuffer:
    """Fixed-capacity FIFO ring of joint transitions."""

    def __init__(self, obs_dims: Sequence[int], act_dims: Sequence[int], capacity: int):
        self.obs_dims, self.act_dims = list(obs_dims), list(act_dims)
        self.capacity = int(capacity)
        n = len(obs_dims)
        self.obs = [np.zeros((capacity, d)) for d in obs_dims]
        self.next_obs = [np.zeros((capacity, d)) for d in obs_dims]
        self.actions = [np.zeros((capacity, d)) for d in act_dims]
        self.rewards = np.zeros((capacity, n))
        self.done = np.zeros(capacity)
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def store(self, t: Transition) -> None:
        k = self.cursor
        for i in range(len(self.obs_dims)):
            self.obs[i][k] = t.obs[i]
            self.next_obs[i][k] = t.next_obs[i]
            self.actions[i][k] = t.actions[i]
        self.rewards[k] = t.rewards
        self.done[k] = float(t.terminal)
        self.cursor = (k + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def oldest_first(self) -> np.ndarray:
        """Slot indices from the oldest stored transition to the newest."""
        if self.size < self.capacity:
            return np.arange(self.size)
        return (np.arange(self.capacity) + self.cursor) % self.capacity

    def get(self, slot: int) -> Transition:
        return Transition(tuple(o[slot].copy() for o in self.obs), tuple(a[slot].copy() for a in self.actions),
                          self.rewards[slot].copy(), tuple(o[slot].copy() for o in self.next_obs),
                          bool(self.done[slot]))

    def gather(self, idx: np.ndarray) -> Batch:
        return Batch([o[idx] for o in self.obs], [a[idx] for a in self.actions], self.rewards[idx],
                     [o[idx] for o in self.next_obs], self.done[idx])

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if self.size < batch_size:
            raise PreconditionError(f"buffer holds {self.size} transitions, batch needs {batch_size}")
        return self.gather(rng.integers(0, self.size, size=batch_size))


def store(buffer: ReplayBuffer, t: Transition) -> None:
    buffer.store(t)


def make_agent_nets(roster: Sequence[str], obs_dims: Sequence[int], act_dims: Sequence[int],
                    hidden: Sequence[int], rng: np.random.Generator) -> AgentNets:
    critic_in = sum(obs_dims) + sum(act_dims)
    policy, critic = [], []
    for d_obs, d_act in zip(obs_dims, act_dims):
        policy.append(init_mlp([d_obs, *hidden, d_act], rng, hidden=RELU, output=TANH))
        critic.append(init_mlp([critic_in, *hidden, 1], rng, hidden=RELU, output=LINEAR))
    return AgentNets(tuple(roster), policy, [p.copy() for p in policy], critic, [c.copy() for c in critic])


def act(policy: MlpParams, obs: np.ndarray, noise_scale: float = 0.0,
        rng: np.random.Generator | None = None) -> np.ndarray:
    """Deterministic action plus optional Gaussian exploration, in [-1, 1]."""
    a = forward(policy, obs)
    if noise_scale > 0.0:
        a = a + noise_scale * rng.standard_normal(a.shape)
    return np.clip(a, -1.0, 1.0)


class Sgd:
    """Plain gradient steps; keeps no state."""

    def step(self, key, params: MlpParams, grads: GradientSet, lr: float) -> None:
        apply_gradient(params, grads, -lr)


class Adam:
    """Adaptive moment steps, one moment pair per parameter set ``key``."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.state: dict = {}

    def step(self, key, params: MlpParams, grads: GradientSet, lr: float) -> None:
        arrays, g = params.arrays(), grads.arrays()
        if key not in self.state:
            self.state[key] = [0, [np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays]]
        st = self.state[key]
        st[0] += 1
        b1, b2 = self.beta1, self.beta2
        scale = lr * np.sqrt(1.0 - b2 ** st[0]) / (1.0 - b1 ** st[0])
        for a, ga, m, v in zip(arrays, g, st[1], st[2]):
            m *= b1
            m += (1.0 - b1) * ga
            v *= b2
            v += (1.0 - b2) * ga * ga
            a -= scale * m / (np.sqrt(v) + self.eps)


def make_optimizer(name: str):
    if name == "sgd":
        return Sgd()
    if name == "adam":
        return Adam()
    raise ValueError(f"unknown optimizer {name!r}")


def _joint(parts: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate(parts, axis=-1)


def _finite(value: float, what: str, robot: int) -> float:
    if not np.isfinite(value):
        raise DivergenceError(f"non-finite {what} for robot {robot}: {value!r}", robot=robot)
    return value


def target_actions(nets: AgentNets, next_obs: Sequence[np.ndarray]) -> list[np.ndarray]:
    return [forward(p, o) for p, o in zip(nets.policy_target, next_obs)]


def critic_targets(batch: Batch, nets: AgentNets, i: int, gamma: float,
                   next_actions: Sequence[np.ndarray] | None = None) -> np.ndarray:
    """Regression targets ``r_i + gamma * (1 - done) * Q_i'(o', mu'(o'))``."""
    if len(batch) == 0:
        raise PreconditionError("empty batch")
    if next_actions is None:
        next_actions = target_actions(nets, batch.next_obs)
    q_next = forward(nets.critic_target[i], _joint([*batch.next_obs, *next_actions]))[:, 0]
    return batch.rewards[:, i] + gamma * (1.0 - batch.done) * q_next


def critic_loss(nets: AgentNets, i: int, batch: Batch, y: np.ndarray) -> float:
    q = forward(nets.critic[i], _joint([*batch.obs, *batch.actions]))[:, 0]
    return float(np.mean((q - y) ** 2))


def critic_gradient(nets: AgentNets, i: int, batch: Batch, y: np.ndarray) -> tuple[float, GradientSet]:
    """Mean squared regression loss and its parameter gradient."""
    q, acts = forward_cache(nets.critic[i], _joint([*batch.obs, *batch.actions]))
    err = q[:, 0] - y
    loss = float(np.mean(err * err))
    grads, _ = backward_cache(nets.critic[i], acts, (2.0 / len(y)) * err[:, None])
    return loss, grads


def update_critic(nets: AgentNets, i: int, batch: Batch, gamma: float, lr: float,
                  y: np.ndarray | None = None, grad_clip: float = 0.0, optimizer=None) -> float:
    """One descent step on the critic's regression loss; returns the loss
    measured before the step."""
    if len(batch) == 0:
        raise PreconditionError("empty batch")
    if y is None:
        y = critic_targets(batch, nets, i, gamma)
    loss, grads = critic_gradient(nets, i, batch, y)
    _finite(loss, "critic loss", i)
    grads = clip_gradient(grads, grad_clip)
    if optimizer is None:
        apply_gradient(nets.critic[i], grads, -lr)
    else:
        optimizer.step(("critic", i), nets.critic[i], grads, lr)
    return loss


def _actor_input(nets: AgentNets, i: int, batch: Batch):
    a_i, policy_acts = forward_cache(nets.policy[i], batch.obs[i])
    actions = list(batch.actions)
    actions[i] = a_i
    return policy_acts, actions


def actor_objective(nets: AgentNets, i: int, batch: Batch) -> float:
    _, actions = _actor_input(nets, i, batch)
    return float(np.mean(forward(nets.critic[i], _joint([*batch.obs, *actions]))))


def actor_gradient(nets: AgentNets, i: int, batch: Batch) -> tuple[float, GradientSet]:
    """Mean critic value at ``a_i = mu_i(o_i)`` and its gradient with respect
    to robot ``i``'s policy parameters."""
    policy_acts, actions = _actor_input(nets, i, batch)
    q, critic_acts = forward_cache(nets.critic[i], _joint([*batch.obs, *actions]))
    b = len(batch)
    _, dq_dx = backward_cache(nets.critic[i], critic_acts, np.full((b, 1), 1.0 / b), need_params=False)
    start = sum(o.shape[1] for o in batch.obs) + sum(a.shape[1] for a in batch.actions[:i])
    dq_da = dq_dx[:, start:start + actions[i].shape[1]]
    grads, _ = backward_cache(nets.policy[i], policy_acts, dq_da)
    return float(np.mean(q)), grads


def update_actor(nets: AgentNets, i: int, batch: Batch, lr: float, grad_clip: float = 0.0,
                 optimizer=None) -> float:
    """One ascent step on the policy; returns the mean Q before the step."""
    if len(batch) == 0:
        raise PreconditionError("empty batch")
    objective, grads = actor_gradient(nets, i, batch)
    _finite(objective, "actor objective", i)
    grads = clip_gradient(grads, grad_clip)
    if optimizer is None:
        apply_gradient(nets.policy[i], grads, lr)
    else:
        # optimizers descend, so hand them the negated ascent direction
        optimizer.step(("policy", i), nets.policy[i],
                       GradientSet([-w for w in grads.weights], [-b for b in grads.biases]), lr)
    return objective


@dataclass(frozen=True)
class StepDiagnostics:
    critic_loss: tuple[float, ...]
    actor_objective: tuple[float, ...]


def train_step(nets: AgentNets, buffer: ReplayBuffer, config, rng: np.random.Generator,
               gamma: float, learners: Sequence[bool] | None = None, optimizer=None) -> StepDiagnostics:
    """Sample one batch and update every learning robot's critic, then its
    actor, then both target nets.

    ``config`` is a :class:`~pursuit_arena.arena.TrainConfig`.  Robots with
    ``learners[i]`` false are frozen and report NaN diagnostics.  Without an
    ``optimizer`` the nets take plain gradient steps.
    """
    if buffer.size < config.batch:
        raise PreconditionError(f"buffer holds {buffer.size} transitions, batch needs {config.batch}")
    n = len(nets.roster)
    if len(buffer.obs_dims) != n:
        raise ShapeError("buffer and nets disagree on the number of robots")
    learners = [True] * n if learners is None else list(learners)
    batch = buffer.sample(config.batch, rng)
    next_actions = target_actions(nets, batch.next_obs)
    losses, objectives = [], []
    for i in range(n):
        if not learners[i]:
            losses.append(float("nan"))
            objectives.append(float("nan"))
            continue
        y = critic_targets(batch, nets, i, gamma, next_actions)
        losses.append(update_critic(nets, i, batch, gamma, config.lr_critic, y, config.grad_clip, optimizer))
        objectives.append(update_actor(nets, i, batch, config.lr_policy, config.grad_clip, optimizer))
    for i in range(n):
        if learners[i]:
            soft_update_(nets.critic_target[i], nets.critic[i], config.tau)
            soft_update_(nets.policy_target[i], nets.policy[i], config.tau)
    return StepDiagnostics(tuple(losses), tuple(objectives))


def noise_at(episode: int, episodes: int, start: float, end: float) -> float:
    """Exploration scale annealed linearly over the training run."""
    if episodes <= 1:
        return start
    frac = min(max(episode / (episodes - 1), 0.0), 1.0)
    return start + (end - start) * frac
