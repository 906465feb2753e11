"""Air-to-ground downlink: LoS probability, path loss, Rayleigh SNR, delay and decode."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

C_LIGHT = 299_792_458.0


def db_to_linear(x_db):
    out = np.power(10.0, np.asarray(x_db, dtype=np.float64) / 10.0)
    return float(out) if out.ndim == 0 else out


def linear_to_db(x):
    out = 10.0 * np.log10(np.asarray(x, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ChannelParams:
    """Radio constants of the BS-to-UAV downlink.

    Powers are in dBm, thresholds and excess losses in dB; everything else
    is SI. ``n_cc_bits`` is the C&C packet size (100 bytes by default).
    """

    f_dl: float = 5e9
    tx_power_dbm: float = 18.0
    noise_dbm: float = -104.0
    snr_th_db: float = 5.5
    alpha: float = 2.0
    eta_los_db: float = 1.0
    eta_nlos_db: float = 20.0
    c1: float = 9.61
    c2: float = 0.16
    n_cc_bits: float = 800.0
    bandwidth_hz: float = 1e6
    c_light: float = C_LIGHT

    def __post_init__(self):
        for name in ("f_dl", "alpha", "c1", "c2", "n_cc_bits", "bandwidth_hz", "c_light"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("tx_power_dbm", "noise_dbm", "snr_th_db", "eta_los_db", "eta_nlos_db"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def snr_th_linear(self) -> float:
        return db_to_linear(self.snr_th_db)

    @property
    def power_to_noise(self) -> float:
        """Transmit power over noise power, linear."""
        return db_to_linear(self.tx_power_dbm - self.noise_dbm)

    def kernel_vector(self) -> np.ndarray:
        """Pack the constants in the order the compiled kernels expect."""
        return np.array(
            [
                self.power_to_noise,
                self.snr_th_linear,
                self.f_dl,
                self.alpha,
                db_to_linear(self.eta_los_db),
                db_to_linear(self.eta_nlos_db),
                self.c1,
                self.c2,
                self.n_cc_bits,
                self.bandwidth_hz,
                self.c_light,
            ],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class LinkSample:
    snr_linear: float
    fading_power: float
    p_los: float
    delay_s: float


def elevation_angle_deg(uav, bs) -> float:
    """Elevation of the UAV seen from the BS, in degrees."""
    uav = np.asarray(uav, dtype=np.float64)
    bs = np.asarray(bs, dtype=np.float64)
    d_ub = float(np.linalg.norm(uav - bs))
    if d_ub == 0.0:
        raise ValueError("undefined elevation: UAV and BS coincide")
    if uav[2] <= bs[2]:
        raise ValueError("undefined elevation: UAV must be above the BS")
    return math.degrees(math.asin((uav[2] - bs[2]) / d_ub))


def p_los(theta_deg: float, params: ChannelParams) -> float:
    """Logistic LoS probability at elevation ``theta_deg``.

    ``c1`` appears both as the coefficient and as the slope of the exponent.
    """
    expo = -params.c1 * (theta_deg - params.c2)
    if expo > 700.0:
        return 0.0
    p = 1.0 / (1.0 + params.c1 * math.exp(expo))
    return min(1.0, max(0.0, p))


def free_space_factor(d_ub: float, params: ChannelParams) -> float:
    return (4.0 * math.pi * d_ub * params.f_dl / params.c_light) ** params.alpha


def mean_path_loss_linear(d_ub: float, los_prob: float, params: ChannelParams) -> float:
    """LoS-weighted mean attenuation (linear, >= 1 for realistic constants)."""
    if not d_ub > 0:
        raise ValueError(f"d_ub must be > 0, got {d_ub}")
    eta = los_prob * db_to_linear(params.eta_los_db) + (1.0 - los_prob) * db_to_linear(params.eta_nlos_db)
    return eta * free_space_factor(d_ub, params)


def path_loss_at(uav, bs, params: ChannelParams) -> tuple[float, float]:
    """Return ``(attenuation, p_los)`` for the given geometry."""
    d_ub = distance_ub(uav, bs)
    pl = p_los(elevation_angle_deg(uav, bs), params)
    return mean_path_loss_linear(d_ub, pl, params), pl


def distance_ub(uav, bs) -> float:
    return float(np.linalg.norm(np.asarray(uav, dtype=np.float64) - np.asarray(bs, dtype=np.float64)))


def tx_delay(snr_linear: float, params: ChannelParams) -> float:
    """Time to push one C&C packet through at the Shannon rate; ``inf`` at zero SNR."""
    if snr_linear < 0:
        raise ValueError(f"snr must be >= 0, got {snr_linear}")
    rate = params.bandwidth_hz * math.log2(1.0 + snr_linear) if math.isfinite(snr_linear) else math.inf
    if rate == 0.0:
        return math.inf
    return params.n_cc_bits / rate


def decode(snr_linear: float, params: ChannelParams) -> int:
    if snr_linear < 0:
        raise ValueError(f"snr must be >= 0, got {snr_linear}")
    return 1 if snr_linear > params.snr_th_linear else 0


def snr_from_fading(fading_power: float, attenuation: float, params: ChannelParams) -> float:
    return params.power_to_noise * fading_power / attenuation


def sample_snr(
    uav,
    bs,
    params: ChannelParams,
    rng: np.random.Generator | None = None,
    fading_power: float | None = None,
) -> LinkSample:
    """Draw one Rayleigh-faded link realisation.

    Parameters
    ----------
    uav, bs : array_like
        Positions in metres.
    params : ChannelParams
    rng : numpy.random.Generator, optional
        Source of the exponential(1) fading power. Required unless
        ``fading_power`` is given.
    fading_power : float, optional
        Force ``|beta|^2`` to this value instead of drawing it.
    """
    if fading_power is None:
        if rng is None:
            raise ValueError("either rng or fading_power is required")
        fading_power = rng.exponential(1.0)
    attenuation, pl = path_loss_at(uav, bs, params)
    snr = snr_from_fading(fading_power, attenuation, params)
    return LinkSample(snr_linear=snr, fading_power=float(fading_power), p_los=pl, delay_s=tx_delay(snr, params))


def decode_probability(uav, bs, params: ChannelParams) -> float:
    """Closed-form single-attempt decode probability under Rayleigh fading.

    ``P(|beta|^2 > th * attenuation / (P/sigma^2)) = exp(-th * attenuation * sigma^2 / P)``.
    """
    attenuation, _ = path_loss_at(uav, bs, params)
    return math.exp(-params.snr_th_linear * attenuation / params.power_to_noise)
