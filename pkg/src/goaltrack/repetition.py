"""Proactive K-repetition of one C&C packet inside a TTI, with ACK-driven early stop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .channel import ChannelParams, decode, path_loss_at, snr_from_fading, tx_delay


@dataclass(frozen=True)
class RepetitionConfig:
    t_rep: float = 1e-4
    k_cap: int = 10
    tti_len: float = 1e-3

    def __post_init__(self):
        if not self.t_rep > 0:
            raise ValueError(f"t_rep must be > 0, got {self.t_rep}")
        if not self.tti_len > 0:
            raise ValueError(f"tti_len must be > 0, got {self.tti_len}")
        if self.k_cap < 1:
            raise ValueError(f"k_cap must be >= 1, got {self.k_cap}")
        if not self.t_rep * (self.k_cap - 1) < self.tti_len:
            raise ValueError("the last repetition must start inside the TTI: t_rep * (k_cap - 1) < tti_len")

    def attempt_offsets(self, k: int) -> np.ndarray:
        return np.arange(k) * self.t_rep


@dataclass(frozen=True)
class Attempt:
    snr_linear: float
    delay_s: float
    ack: int


@dataclass(frozen=True)
class TtiOutcome:
    decoded: bool
    attempts_used: int
    decode_offset_s: float | None
    attempt_log: tuple[Attempt, ...] = field(default_factory=tuple)


def analytic_success_prob(p_attempt: float, k: int) -> float:
    """Probability that at least one of ``k`` independent attempts succeeds."""
    if not 0.0 <= p_attempt <= 1.0:
        raise ValueError(f"p_attempt must lie in [0, 1], got {p_attempt}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return 1.0 - (1.0 - p_attempt) ** k


def _check_k(k_max: int, cfg: RepetitionConfig) -> None:
    if not 1 <= k_max <= cfg.k_cap:
        raise ValueError(f"k_max must lie in [1, {cfg.k_cap}], got {k_max}")


def run_tti_transmission(
    k_max: int,
    uav,
    bs,
    ch: ChannelParams,
    cfg: RepetitionConfig,
    rng: np.random.Generator | None = None,
    fading=None,
) -> TtiOutcome:
    """Simulate the repetitions of one packet.

    Attempt ``j`` (1-based) leaves the BS at ``(j - 1) * t_rep`` and counts as
    ACKed only if it decodes and finishes before the TTI ends; the first ACK
    stops the sequence. The UAV hovers until then, so the geometry is fixed
    for every attempt.

    ``fading`` optionally supplies the per-slot ``|beta|^2`` values (at least
    ``k_max`` of them) in place of drawing from ``rng``.
    """
    _check_k(k_max, cfg)
    if fading is None and rng is None:
        raise ValueError("either rng or fading is required")
    attenuation, _ = path_loss_at(uav, bs, ch)
    log = []
    for j in range(k_max):
        power = fading[j] if fading is not None else rng.exponential(1.0)
        snr = snr_from_fading(power, attenuation, ch)
        delay = tx_delay(snr, ch)
        finish = j * cfg.t_rep + delay
        ack = int(decode(snr, ch) == 1 and finish <= cfg.tti_len)
        log.append(Attempt(snr, delay, ack))
        if ack:
            return TtiOutcome(True, j + 1, finish, tuple(log))
    return TtiOutcome(False, k_max, None, tuple(log))


def simulate_decoding(
    k_max: int,
    uav,
    bs,
    ch: ChannelParams,
    cfg: RepetitionConfig,
    rng: np.random.Generator,
    n_trials: int,
):
    """Monte Carlo over ``n_trials`` independent TTIs at a frozen geometry.

    Returns ``(decoded, attempts_used)`` arrays. Runs through the batched kernel.
    """
    _check_k(k_max, cfg)
    fading = rng.exponential(1.0, size=(n_trials, cfg.k_cap))
    uav_b = np.broadcast_to(np.asarray(uav, dtype=np.float64), (n_trials, 3))
    zeros3 = np.zeros((n_trials, 3))
    zeros = np.zeros(n_trials)
    out = _kernels.advance_tti(
        uav_b,
        uav_b,
        zeros,
        zeros3,
        np.full(n_trials, k_max, dtype=np.int64),
        fading,
        zeros,
        bs,
        ch.kernel_vector(),
        cfg.t_rep,
        cfg.tti_len,
        0.0,
        1,
    )
    return out[3], out[4]
