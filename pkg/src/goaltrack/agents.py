"""DQN agent with replay and a target network, plus the proportional-only baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .env import Action, ActionSpace, EnvConfig, TrackingEnv
from .neuralnet import (
    OptimState,
    QNetParams,
    TransitionBatch,
    forward,
    init_params,
    rmsprop_step,
    td_loss_grad,
)


@dataclass(frozen=True)
class TrainConfig:
    n_iterations: int = 2000
    target_sync: int = 10
    batch_size: int = 32
    gamma: float = 0.1
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_frac: float = 0.8
    lr: float = 1e-4
    rho: float = 0.99
    opt_eps: float = 1e-8
    replay_capacity: int = 100_000
    hidden: tuple[int, ...] = (128, 128)
    seed: int = 0

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ValueError(f"n_iterations must be >= 1, got {self.n_iterations}")
        if self.target_sync < 1:
            raise ValueError(f"target_sync must be >= 1, got {self.target_sync}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        for name in ("eps_start", "eps_end", "eps_decay_frac"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        if not 1 <= self.batch_size <= self.replay_capacity:
            raise ValueError("need 1 <= batch_size <= replay_capacity")

    def epsilon(self, episode: int) -> float:
        """Linear decay from ``eps_start`` to ``eps_end`` over the first ``eps_decay_frac`` of training."""
        horizon = self.eps_decay_frac * self.n_iterations
        if horizon <= 0:
            return self.eps_end
        frac = min(1.0, episode / horizon)
        return self.eps_start + (self.eps_end - self.eps_start) * frac


@dataclass(frozen=True)
class PidConfig:
    kp: float = 0.5
    k_max: int = 1
    k_best: int | None = None

    def __post_init__(self):
        if not self.kp > 0:
            raise ValueError(f"kp must be > 0, got {self.kp}")


class ReplayMemory:
    """Fixed-capacity ring buffer of transitions."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._head = 0

    def __len__(self) -> int:
        return self.size

    def push(self, s, a: int, r: float, s2, done: bool) -> None:
        i = self._head
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s2
        self.dones[i] = done
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        if batch_size > self.size:
            raise ValueError(f"cannot sample {batch_size} from {self.size} transitions")
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return TransitionBatch(
            self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx], self.dones[idx]
        )


def select_action(qnet: QNetParams, state, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy choice; ties in the greedy branch go to the lowest index."""
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(qnet.sizes[-1]))
    return int(np.argmax(forward(qnet, state)))


class DQNAgent:
    """Online network, frozen target copy, replay memory and RMSprop state."""

    def __init__(self, sizes: Sequence[int], tc: TrainConfig):
        self.tc = tc
        self.rng = np.random.default_rng(np.random.SeedSequence([tc.seed, 0]))
        self.theta = init_params(sizes, np.random.default_rng(np.random.SeedSequence([tc.seed, 2])))
        self.theta_star = self.theta.copy()
        self.opt = OptimState(lr=tc.lr, rho=tc.rho, eps=tc.opt_eps)
        self.memory = ReplayMemory(tc.replay_capacity, sizes[0])
        self.n_updates = 0

    def act(self, state, epsilon: float) -> int:
        return select_action(self.theta, state, epsilon, self.rng)

    def remember(self, s, a, r, s2, done) -> None:
        self.memory.push(s, a, r, s2, done)

    def learn(self) -> float | None:
        """One gradient step on a replay sample; ``None`` while memory is below one batch."""
        if len(self.memory) < self.tc.batch_size:
            return None
        batch = self.memory.sample(self.tc.batch_size, self.rng)
        loss, grads = td_loss_grad(batch, self.theta, self.theta_star, self.tc.gamma)
        rmsprop_step(self.theta, grads, self.opt)
        self.n_updates += 1
        return loss

    def sync_target(self) -> None:
        self.theta_star = self.theta.copy()


@dataclass(frozen=True)
class TrainLogRow:
    episode: int
    epsilon: float
    episode_return: float
    loss: float


def episode_seed(seed: int, episode: int) -> int:
    """Training-episode seed, kept apart from the evaluation range ``seed + i``."""
    return int(np.random.SeedSequence([seed, 1, episode]).generate_state(1, dtype=np.uint64)[0] >> 1)


def run_training(
    env,
    agent: DQNAgent,
    n_episodes: int,
    on_step: Callable | None = None,
    max_updates: int | None = None,
) -> list[TrainLogRow]:
    """Generic DQN loop over any env exposing ``reset(seed)`` and ``step(index)``.

    Per step: act, step, store, learn. The target network is synced every
    ``target_sync`` episodes. ``on_step(agent, episode, loss)`` is called after
    each learning step, for instrumentation. With ``max_updates`` the loop
    stops as soon as that many gradient steps have been taken.
    """
    tc = agent.tc
    log = []
    loss_avg = math.nan
    for ep in range(n_episodes):
        eps = tc.epsilon(ep)
        s = env.reset(episode_seed(tc.seed, ep))
        ret = 0.0
        done = False
        while not done:
            a = agent.act(s, eps)
            res = env.step(a)
            done = res.done
            agent.remember(s, a, res.reward, res.next_state, done)
            ret += res.reward
            loss = agent.learn()
            if loss is not None:
                loss_avg = loss if math.isnan(loss_avg) else 0.95 * loss_avg + 0.05 * loss
            if on_step is not None:
                on_step(agent, ep, loss)
            s = res.next_state
            if max_updates is not None and agent.n_updates >= max_updates:
                log.append(TrainLogRow(ep, eps, ret, loss_avg))
                return log
        if (ep + 1) % tc.target_sync == 0:
            agent.sync_target()
        log.append(TrainLogRow(ep, eps, ret, loss_avg))
    return log


def train(env_cfg: EnvConfig, tc: TrainConfig, on_step: Callable | None = None):
    """Train the tracking agent; returns ``(agent, log)``."""
    env = TrackingEnv(env_cfg)
    agent = DQNAgent((3, *tc.hidden, len(env.space)), tc)
    log = run_training(env, agent, tc.n_iterations, on_step)
    return agent, log


def snap_to_grid(v, grid) -> np.ndarray:
    """Index of the nearest grid value per element; ties go to the value closer to zero."""
    g = np.asarray(grid, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    dist = np.abs(v[..., None] - g)
    tied = dist <= dist.min(axis=-1, keepdims=True)
    return np.argmin(np.where(tied, np.abs(g), np.inf), axis=-1)


def pid_command(p_u, p_tg, pc: PidConfig, T: float, grids) -> Action:
    """Proportional command toward the target, snapped onto the velocity grids."""
    if not T > 0:
        raise ValueError(f"T must be > 0, got {T}")
    err = np.asarray(p_tg, dtype=np.float64) - np.asarray(p_u, dtype=np.float64)
    v_raw = pc.kp * err / T
    vx_grid, vy_grid, vz_grid = grids[:3]
    out = [float(gr[int(snap_to_grid(v, gr))]) for v, gr in zip(v_raw, (vx_grid, vy_grid, vz_grid))]
    return Action(out[0], out[1], out[2], pc.k_max)


class GreedyPolicy:
    """Argmax of a Q-network over a batch of states, optionally pinning ``k_max``."""

    def __init__(self, theta: QNetParams, space: ActionSpace, k_override: int | None = None):
        if theta.sizes[-1] != len(space):
            raise ValueError(f"network has {theta.sizes[-1]} outputs but the action space has {len(space)}")
        self.theta = theta
        self.space = space
        self.k_override = k_override

    def __call__(self, states: np.ndarray) -> np.ndarray:
        idx = np.argmax(forward(self.theta, np.atleast_2d(states)), axis=1)
        if self.k_override is not None:
            idx = self.space.with_k(idx, self.k_override)
        return idx


class PidPolicy:
    """Vectorised :func:`pid_command` returning action indices."""

    def __init__(self, pc: PidConfig, space: ActionSpace, T: float, k_max: int | None = None):
        self.pc = pc
        self.space = space
        self.T = T
        self.k_max = pc.k_max if k_max is None else k_max
        vx, vy, vz, ks = space.grids
        if self.k_max not in ks:
            raise ValueError(f"k_max {self.k_max} not among {ks}")
        self._dims = (len(vx), len(vy), len(vz), len(ks))
        self._k_pos = list(ks).index(self.k_max)

    def __call__(self, states: np.ndarray) -> np.ndarray:
        v_raw = self.pc.kp * np.atleast_2d(states) / self.T
        ix = snap_to_grid(v_raw[:, 0], self.space.grids[0])
        iy = snap_to_grid(v_raw[:, 1], self.space.grids[1])
        iz = snap_to_grid(v_raw[:, 2], self.space.grids[2])
        _, ny, nz, nk = self._dims
        return ((ix * ny + iy) * nz + iz) * nk + self._k_pos
