"""Episode-level tracking environment built on the world, channel and repetition pieces."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .channel import ChannelParams
from .repetition import Attempt, RepetitionConfig, TtiOutcome
from .world import ValueParams, as_position, value, value_array

GRID_2000 = tuple(float(v) for v in range(-2000, 2001, 500))


@dataclass(frozen=True)
class MobilityParams:
    """Random-direction target: fixed speed, heading nudged once per TTI."""

    speed: float = 1000.0
    max_turn: float = math.pi / 4
    heading0: float = 0.0

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")
        if not 0 <= self.max_turn <= math.pi:
            raise ValueError(f"max_turn must lie in [0, pi], got {self.max_turn}")


@dataclass(frozen=True)
class EnvConfig:
    n_ttis: int = 100
    sub_steps: int = 10
    uav_init: tuple[float, float, float] = (69.0, 70.0, 50.0)
    target_init: tuple[float, float, float] = (70.0, 70.0, 50.0)
    bs: tuple[float, float, float] = (0.0, 0.0, 0.0)
    disk_radius: float = 100.0
    height: float = 50.0
    value: ValueParams = field(default_factory=ValueParams)
    channel: ChannelParams = field(default_factory=ChannelParams)
    repetition: RepetitionConfig = field(default_factory=RepetitionConfig)
    mobility: MobilityParams = field(default_factory=MobilityParams)
    vx_grid: tuple[float, ...] = GRID_2000
    vy_grid: tuple[float, ...] = GRID_2000
    vz_grid: tuple[float, ...] = (0.0,)
    k_choices: tuple[int, ...] = tuple(range(1, 11))

    def __post_init__(self):
        if self.n_ttis < 1:
            raise ValueError(f"n_ttis must be >= 1, got {self.n_ttis}")
        if self.sub_steps < 1:
            raise ValueError(f"sub_steps must be >= 1, got {self.sub_steps}")
        for name in ("vx_grid", "vy_grid", "vz_grid", "k_choices"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be non-empty")
        bad = [k for k in self.k_choices if not 1 <= k <= self.repetition.k_cap]
        if bad:
            raise ValueError(f"k_choices {bad} fall outside [1, {self.repetition.k_cap}]")
        as_position(self.target_init)
        uav, bs = as_position(self.uav_init), as_position(self.bs)
        if uav[2] <= bs[2]:
            raise ValueError("uav_init must be above the BS")
        if any(v != 0 for v in self.vz_grid):
            raise ValueError("vz_grid must be {0}: the UAV flies at constant altitude")

    @property
    def tti_len(self) -> float:
        return self.repetition.tti_len


@dataclass(frozen=True)
class Action:
    vx: float
    vy: float
    vz: float
    k_max: int


class ActionSpace:
    """Lexicographic enumeration of (vx, vy, vz, k_max); the last field varies fastest."""

    def __init__(self, cfg: EnvConfig):
        vx, vy, vz, kk = np.meshgrid(
            np.asarray(cfg.vx_grid, dtype=np.float64),
            np.asarray(cfg.vy_grid, dtype=np.float64),
            np.asarray(cfg.vz_grid, dtype=np.float64),
            np.asarray(cfg.k_choices, dtype=np.int64),
            indexing="ij",
        )
        self.velocities = np.stack([vx.ravel(), vy.ravel(), vz.ravel()], axis=1)
        self.k_values = kk.ravel().astype(np.int64)
        self.grids = (tuple(cfg.vx_grid), tuple(cfg.vy_grid), tuple(cfg.vz_grid), tuple(cfg.k_choices))
        self._lookup = {astuple(self[i]): i for i in range(len(self))}

    def __len__(self) -> int:
        return len(self.k_values)

    def __getitem__(self, i: int) -> Action:
        v = self.velocities[i]
        return Action(float(v[0]), float(v[1]), float(v[2]), int(self.k_values[i]))

    def index(self, action: Action) -> int:
        try:
            return self._lookup[(float(action.vx), float(action.vy), float(action.vz), int(action.k_max))]
        except KeyError:
            raise ValueError(f"{action} is not in the action space") from None

    def actions(self) -> list[Action]:
        return [self[i] for i in range(len(self))]

    def with_k(self, indices, k_max: int) -> np.ndarray:
        """Same velocities as ``indices`` but with the repetition budget replaced."""
        k_list = list(self.grids[3])
        if k_max not in k_list:
            raise ValueError(f"k_max {k_max} not among {k_list}")
        indices = np.asarray(indices, dtype=np.int64)
        n_k = len(k_list)
        return indices - indices % n_k + k_list.index(k_max)


def action_space(cfg: EnvConfig) -> list[Action]:
    return ActionSpace(cfg).actions()


@dataclass(frozen=True)
class EpisodeNoise:
    """All randomness of one episode, drawn up front.

    Every repetition slot gets a fading draw whether or not it is used, so
    two policies run on the same seed see identical channel and target draws.
    """

    fading: np.ndarray  # (N, k_cap)
    turns: np.ndarray  # (N,)


def draw_noise(cfg: EnvConfig, seed: int) -> EpisodeNoise:
    chan_ss, mob_ss = np.random.SeedSequence(seed).spawn(2)
    fading = np.random.default_rng(chan_ss).exponential(1.0, size=(cfg.n_ttis, cfg.repetition.k_cap))
    mt = cfg.mobility.max_turn
    turns = np.random.default_rng(mob_ss).uniform(-mt, mt, size=cfg.n_ttis) if mt > 0 else np.zeros(cfg.n_ttis)
    return EpisodeNoise(fading, turns)


@dataclass(frozen=True)
class StepInfo:
    outcome: TtiOutcome
    distance: float
    substep_distances: np.ndarray
    substep_values: np.ndarray


@dataclass(frozen=True)
class StepResult:
    next_state: np.ndarray
    reward: float
    done: bool
    info: StepInfo


TRACE_COLUMNS = ("n", "j_used", "decoded", "d_n", "reward", "uav_x", "uav_y", "uav_z", "target_x", "target_y", "target_z")


class TrackingEnv:
    """Single BS, single UAV, single target; one ``step`` is one TTI.

    The state is the target-minus-UAV offset at the TTI start. Nothing about
    the channel is exposed through it.
    """

    def __init__(self, cfg: EnvConfig, trace: bool = False):
        self.cfg = cfg
        self.space = ActionSpace(cfg)
        self.trace = trace
        self.trace_rows: list[tuple] = []
        self._chan = cfg.channel.kernel_vector()
        self._bs = np.asarray(cfg.bs, dtype=np.float64)
        self._n = None

    def reset(self, seed: int, noise: EpisodeNoise | None = None) -> np.ndarray:
        self.noise = noise if noise is not None else draw_noise(self.cfg, seed)
        if self.noise.fading.shape != (self.cfg.n_ttis, self.cfg.repetition.k_cap):
            raise ValueError(f"fading must have shape {(self.cfg.n_ttis, self.cfg.repetition.k_cap)}")
        self.uav = np.asarray(self.cfg.uav_init, dtype=np.float64).copy()
        self.target = np.asarray(self.cfg.target_init, dtype=np.float64).copy()
        self.heading = float(self.cfg.mobility.heading0)
        self._n = 0
        self.trace_rows = []
        return self.state()

    def state(self) -> np.ndarray:
        return self.target - self.uav

    @property
    def done(self) -> bool:
        return self._n is not None and self._n >= self.cfg.n_ttis

    def step(self, action) -> StepResult:
        if self._n is None:
            raise RuntimeError("call reset() before step()")
        if self.done:
            raise RuntimeError("episode is done; call reset()")
        idx = action if isinstance(action, (int, np.integer)) else self.space.index(action)
        k_max = int(self.space.k_values[idx])
        vel = self.space.velocities[idx]
        n = self._n
        cfg = self.cfg
        uav, tgt, heading, decoded, attempts, offset, snr, delay, sub = _kernels.advance_tti(
            self.uav[None, :],
            self.target[None, :],
            np.array([self.heading]),
            vel[None, :],
            np.array([k_max]),
            self.noise.fading[n : n + 1],
            self.noise.turns[n : n + 1],
            self._bs,
            self._chan,
            cfg.repetition.t_rep,
            cfg.tti_len,
            cfg.mobility.speed,
            cfg.sub_steps,
        )
        used = int(attempts[0])
        ok = bool(decoded[0])
        log = tuple(
            Attempt(float(snr[0, j]), float(delay[0, j]), int(ok and j == used - 1)) for j in range(used)
        )
        outcome = TtiOutcome(ok, used, float(offset[0]) if ok else None, log)

        self.uav, self.target, self.heading = uav[0], tgt[0], float(heading[0])
        self._n += 1
        d_n = float(sub[0, -1])
        reward = value(d_n, cfg.value)
        info = StepInfo(outcome, d_n, sub[0], value_array(sub[0], cfg.value.d_th))
        if self.trace:
            self.trace_rows.append((self._n, used, int(ok), d_n, reward, *self.uav.tolist(), *self.target.tolist()))
        return StepResult(self.state(), reward, self.done, info)


Policy = Callable[[np.ndarray], np.ndarray]


@dataclass
class Rollout:
    """Per-run, per-TTI records from :func:`run_episodes`."""

    seeds: np.ndarray
    distances: np.ndarray  # (R, N), TTI-end
    substep_distances: np.ndarray  # (R, N, L)
    decoded: np.ndarray  # (R, N)
    attempts: np.ndarray  # (R, N)
    actions: np.ndarray  # (R, N)


def run_episodes(policy: Policy, cfg: EnvConfig, seeds: Sequence[int]) -> Rollout:
    """Run one episode per seed in lock-step.

    ``policy`` maps a ``(B, 3)`` array of states to ``B`` action indices.
    Results match stepping :class:`TrackingEnv` one seed at a time.
    """
    seeds = np.asarray(seeds, dtype=np.int64)
    runs, n_ttis = len(seeds), cfg.n_ttis
    space = ActionSpace(cfg)
    noises = [draw_noise(cfg, int(s)) for s in seeds]
    fading = np.stack([nz.fading for nz in noises], axis=1)  # (N, R, K)
    turns = np.stack([nz.turns for nz in noises], axis=1)  # (N, R)
    uav = np.tile(np.asarray(cfg.uav_init, dtype=np.float64), (runs, 1))
    tgt = np.tile(np.asarray(cfg.target_init, dtype=np.float64), (runs, 1))
    heading = np.full(runs, float(cfg.mobility.heading0))
    chan = cfg.channel.kernel_vector()
    bs = np.asarray(cfg.bs, dtype=np.float64)

    out = Rollout(
        seeds=seeds,
        distances=np.empty((runs, n_ttis)),
        substep_distances=np.empty((runs, n_ttis, cfg.sub_steps)),
        decoded=np.empty((runs, n_ttis), dtype=bool),
        attempts=np.empty((runs, n_ttis), dtype=np.int64),
        actions=np.empty((runs, n_ttis), dtype=np.int64),
    )
    for n in range(n_ttis):
        idx = np.asarray(policy(tgt - uav), dtype=np.int64)
        uav, tgt, heading, decoded, attempts, _, _, _, sub = _kernels.advance_tti(
            uav,
            tgt,
            heading,
            space.velocities[idx],
            space.k_values[idx],
            fading[n],
            turns[n],
            bs,
            chan,
            cfg.repetition.t_rep,
            cfg.tti_len,
            cfg.mobility.speed,
            cfg.sub_steps,
        )
        out.actions[:, n] = idx
        out.distances[:, n] = sub[:, -1]
        out.substep_distances[:, n] = sub
        out.decoded[:, n] = decoded
        out.attempts[:, n] = attempts
    return out
