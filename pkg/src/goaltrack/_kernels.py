"""Hot kernels: the per-TTI step (repetitions, kinematics, sub-step distances) and RMSprop.

Two interchangeable implementations live here. The numba one loops per
environment; the numpy one is fully vectorised. ``GOALTRACK_NUMBA=0`` in
the environment (or numba failing to import) selects the numpy path.

Channel constants arrive packed as ``ChannelParams.kernel_vector()``:
``[P/sigma^2, snr_th, f_dl, alpha, eta_los, eta_nlos, c1, c2, bits, bandwidth, c]``
with every entry linear.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("GOALTRACK_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


def advance_tti_numpy(uav, tgt, heading, vel, kmax, fading, turn, bs, chan, t_rep, tti, speed, n_sub):
    n_env, k_cap = fading.shape
    p_noise, snr_th, f_dl, alpha, eta_los, eta_nlos, c1, c2, bits, bw, c_light = chan

    rel = uav - bs
    d_ub = np.sqrt(rel[:, 0] * rel[:, 0] + rel[:, 1] * rel[:, 1] + rel[:, 2] * rel[:, 2])
    theta = np.degrees(np.arcsin(rel[:, 2] / d_ub))
    expo = -c1 * (theta - c2)
    with np.errstate(over="ignore"):
        plos = np.clip(1.0 / (1.0 + c1 * np.exp(expo)), 0.0, 1.0)
    fs = (4.0 * math.pi * d_ub * f_dl / c_light) ** alpha
    atten = (plos * eta_los + (1.0 - plos) * eta_nlos) * fs

    snr = p_noise * fading / atten[:, None]
    with np.errstate(divide="ignore"):
        rate = bw * np.log2(1.0 + snr)
        delay = np.where(rate > 0.0, bits / np.where(rate > 0.0, rate, 1.0), np.inf)
    starts = np.arange(k_cap) * t_rep
    ok = (snr > snr_th) & (starts[None, :] + delay <= tti) & (np.arange(k_cap)[None, :] < kmax[:, None])
    decoded = ok.any(axis=1)
    first = np.argmax(ok, axis=1)
    attempts = np.where(decoded, first + 1, kmax).astype(np.int64)
    rows = np.arange(n_env)
    offset = np.where(decoded, starts[first] + delay[rows, first], np.nan)

    new_heading = heading + turn
    direction = np.stack([np.cos(new_heading), np.sin(new_heading), np.zeros(n_env)], axis=1)

    t_sub = tti * (np.arange(1, n_sub + 1) / n_sub)
    active = np.where(decoded[:, None], np.maximum(0.0, t_sub[None, :] - np.where(decoded, offset, 0.0)[:, None]), 0.0)
    uav_sub = uav[:, None, :] + vel[:, None, :] * active[:, :, None]
    tgt_sub = tgt[:, None, :] + (speed * t_sub)[None, :, None] * direction[:, None, :]
    diff = uav_sub - tgt_sub
    sub_dist = np.sqrt(np.sum(diff * diff, axis=2))

    return (
        uav_sub[:, -1, :].copy(),
        tgt_sub[:, -1, :].copy(),
        new_heading,
        decoded,
        attempts,
        offset,
        snr,
        delay,
        sub_dist,
    )


def _advance_tti_loops(uav, tgt, heading, vel, kmax, fading, turn, bs, chan, t_rep, tti, speed, n_sub):
    n_env = uav.shape[0]
    k_cap = fading.shape[1]
    p_noise = chan[0]
    snr_th = chan[1]
    f_dl = chan[2]
    alpha = chan[3]
    eta_los = chan[4]
    eta_nlos = chan[5]
    c1 = chan[6]
    c2 = chan[7]
    bits = chan[8]
    bw = chan[9]
    c_light = chan[10]

    new_uav = np.empty((n_env, 3))
    new_tgt = np.empty((n_env, 3))
    new_heading = np.empty(n_env)
    decoded = np.zeros(n_env, dtype=np.bool_)
    attempts = np.empty(n_env, dtype=np.int64)
    offset = np.full(n_env, np.nan)
    snr = np.empty((n_env, k_cap))
    delay = np.empty((n_env, k_cap))
    sub_dist = np.empty((n_env, n_sub))

    for b in range(n_env):
        rx = uav[b, 0] - bs[0]
        ry = uav[b, 1] - bs[1]
        rz = uav[b, 2] - bs[2]
        d_ub = math.sqrt(rx * rx + ry * ry + rz * rz)
        theta = math.degrees(math.asin(rz / d_ub))
        expo = -c1 * (theta - c2)
        if expo > 700.0:
            plos = 0.0
        else:
            plos = min(1.0, max(0.0, 1.0 / (1.0 + c1 * math.exp(expo))))
        fs = (4.0 * math.pi * d_ub * f_dl / c_light) ** alpha
        atten = (plos * eta_los + (1.0 - plos) * eta_nlos) * fs

        for j in range(k_cap):
            s = p_noise * fading[b, j] / atten
            snr[b, j] = s
            rate = bw * np.log2(1.0 + s)
            delay[b, j] = bits / rate if rate > 0.0 else np.inf

        attempts[b] = kmax[b]
        for j in range(kmax[b]):
            start = j * t_rep
            if snr[b, j] > snr_th and start + delay[b, j] <= tti:
                decoded[b] = True
                attempts[b] = j + 1
                offset[b] = start + delay[b, j]
                break

        h = heading[b] + turn[b]
        new_heading[b] = h
        ch = math.cos(h)
        sh = math.sin(h)
        for l in range(n_sub):
            t = tti * ((l + 1) / n_sub)
            act = max(0.0, t - offset[b]) if decoded[b] else 0.0
            acc = 0.0
            for k in range(3):
                u = uav[b, k] + vel[b, k] * act
                if k == 0:
                    g = tgt[b, 0] + speed * t * ch
                elif k == 1:
                    g = tgt[b, 1] + speed * t * sh
                else:
                    g = tgt[b, 2] + speed * t * 0.0
                if l == n_sub - 1:
                    new_uav[b, k] = u
                    new_tgt[b, k] = g
                acc += (u - g) * (u - g)
            sub_dist[b, l] = math.sqrt(acc)

    return new_uav, new_tgt, new_heading, decoded, attempts, offset, snr, delay, sub_dist


if HAS_NUMBA:
    advance_tti_numba = njit(cache=True)(_advance_tti_loops)
else:  # pragma: no cover
    advance_tti_numba = _advance_tti_loops


def advance_tti(uav, tgt, heading, vel, kmax, fading, turn, bs, chan, t_rep, tti, speed, n_sub):
    """Advance a batch of environments through one TTI.

    Parameters
    ----------
    uav, tgt : (B, 3) float arrays
        Positions at the TTI start.
    heading, turn : (B,) float arrays
        Target heading before the boundary and the perturbation applied at it.
    vel : (B, 3) float array
        Commanded velocity, applied from the decode instant to the TTI end.
    kmax : (B,) int64 array
        Repetition budget per environment.
    fading : (B, K) float array
        Pre-drawn ``|beta|^2`` for every repetition slot.

    Returns
    -------
    tuple
        ``(uav, tgt, heading, decoded, attempts, offset, snr, delay, sub_dist)``;
        ``offset`` is NaN where nothing decoded and ``sub_dist`` is ``(B, n_sub)``.
    """
    args = (
        np.ascontiguousarray(uav, dtype=np.float64),
        np.ascontiguousarray(tgt, dtype=np.float64),
        np.ascontiguousarray(heading, dtype=np.float64),
        np.ascontiguousarray(vel, dtype=np.float64),
        np.ascontiguousarray(kmax, dtype=np.int64),
        np.ascontiguousarray(fading, dtype=np.float64),
        np.ascontiguousarray(turn, dtype=np.float64),
        np.ascontiguousarray(bs, dtype=np.float64),
        np.ascontiguousarray(chan, dtype=np.float64),
        float(t_rep),
        float(tti),
        float(speed),
        int(n_sub),
    )
    if USE_NUMBA:
        return advance_tti_numba(*args)
    return advance_tti_numpy(*args)


def rmsprop_update_numpy(p, g, v, lr, rho, eps):
    v *= rho
    v += (1.0 - rho) * (g * g)
    p -= lr * g / np.sqrt(v + eps)


def _rmsprop_update_loops(p, g, v, lr, rho, eps):
    pf = p.ravel()
    gf = g.ravel()
    vf = v.ravel()
    for i in range(pf.size):
        gi = gf[i]
        vi = rho * vf[i] + (1.0 - rho) * (gi * gi)
        vf[i] = vi
        pf[i] -= lr * gi / math.sqrt(vi + eps)


if HAS_NUMBA:
    rmsprop_update_numba = njit(cache=True)(_rmsprop_update_loops)
else:  # pragma: no cover
    rmsprop_update_numba = _rmsprop_update_loops


def rmsprop_update(p, g, v, lr, rho, eps):
    """Fused in-place RMSprop on one parameter array (``p`` and ``v`` contiguous)."""
    if USE_NUMBA and p.flags.c_contiguous and v.flags.c_contiguous:
        rmsprop_update_numba(p, np.ascontiguousarray(g), v, float(lr), float(rho), float(eps))
    else:
        rmsprop_update_numpy(p, g, v, lr, rho, eps)
