"""Fully connected Q-network in plain numpy: forward pass, TD-loss gradient, RMSprop."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels

CHECKPOINT_FORMAT = "goaltrack-qnet"
CHECKPOINT_VERSION = 1


@dataclass
class QNetParams:
    """Weights ``W[i]`` of shape ``(fan_in, fan_out)`` and biases ``b[i]``; ReLU between layers."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {i}: weight {w.shape} and bias {b.shape} are inconsistent")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i} expects {w.shape[0]} inputs, previous layer gives {self.weights[i - 1].shape[1]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i} has non-finite parameters")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "QNetParams":
        return QNetParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self) -> "QNetParams":
        return QNetParams([np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases])

    def checksum(self) -> str:
        h = hashlib.sha256()
        for a in self.arrays():
            h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
        return h.hexdigest()


def init_params(sizes: Sequence[int], rng: np.random.Generator) -> QNetParams:
    """Glorot-uniform weights, zero biases."""
    if len(sizes) < 2:
        raise ValueError("need at least input and output sizes")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return QNetParams(weights, biases)


def _hidden_acts(params: QNetParams, x: np.ndarray) -> list[np.ndarray]:
    """Input followed by every ReLU hidden activation (output layer excluded)."""
    acts = [x]
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        acts.append(np.maximum(acts[-1] @ w + b, 0.0))
    return acts


def forward(params: QNetParams, state) -> np.ndarray:
    """Q-values for one state ``(d,)`` or a batch ``(B, d)``."""
    x = np.asarray(state, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != params.sizes[0]:
        raise ValueError(f"state of shape {x.shape} does not fit input size {params.sizes[0]}")
    q = _hidden_acts(params, xb)[-1] @ params.weights[-1] + params.biases[-1]
    return q[0] if single else q


@dataclass
class TransitionBatch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __post_init__(self):
        n = len(self.actions)
        if n == 0:
            raise ValueError("empty batch")
        if not (len(self.states) == len(self.rewards) == len(self.next_states) == len(self.dones) == n):
            raise ValueError("batch fields have different lengths")


def td_loss_grad(batch: TransitionBatch, theta: QNetParams, theta_star: QNetParams, gamma: float):
    """Mean squared TD error and its gradient with respect to ``theta``.

    Targets ``r + gamma * max_a Q(s', a; theta_star)`` (just ``r`` on terminal
    transitions) are held constant. Only the taken action's output carries
    error, so the output layer is handled column-wise instead of densely.
    """
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    q_next = forward(theta_star, batch.next_states)
    y = batch.rewards + gamma * (1.0 - batch.dones.astype(np.float64)) * q_next.max(axis=1)

    acts = _hidden_acts(theta, np.asarray(batch.states, dtype=np.float64))
    h = acts[-1]
    w_out, b_out = theta.weights[-1], theta.biases[-1]
    a = np.asarray(batch.actions, dtype=np.int64)
    n = len(a)
    w_cols = w_out[:, a].T  # (n, hidden)
    err = np.einsum("ij,ij->i", h, w_cols) + b_out[a] - y
    loss = float(np.mean(err * err))

    d = 2.0 * err / n
    gw = np.zeros_like(w_out)
    np.add.at(gw.T, a, d[:, None] * h)
    g_weights = [gw]
    g_biases = [np.bincount(a, weights=d, minlength=len(b_out)).astype(np.float64)]
    delta = d[:, None] * w_cols
    for i in range(len(theta.weights) - 2, -1, -1):
        delta = delta * (acts[i + 1] > 0.0)
        g_weights.append(acts[i].T @ delta)
        g_biases.append(delta.sum(axis=0))
        if i:
            delta = delta @ theta.weights[i].T
    return loss, QNetParams(g_weights[::-1], g_biases[::-1])


@dataclass
class OptimState:
    lr: float = 1e-4
    rho: float = 0.99
    eps: float = 1e-8
    accum: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")


def rmsprop_step(theta: QNetParams, grads: QNetParams, opt: OptimState):
    """One in-place RMSprop update; returns ``(theta, opt)`` for chaining."""
    params = theta.arrays()
    gs = grads.arrays()
    if not opt.accum:
        opt.accum = [np.zeros_like(p) for p in params]
    for p, g, v in zip(params, gs, opt.accum):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        _kernels.rmsprop_update(p, g, v, opt.lr, opt.rho, opt.eps)
    return theta, opt


def save_checkpoint(path, theta: QNetParams, opt: OptimState | None = None, meta: dict | None = None) -> None:
    """Write an ``.npz`` checkpoint.

    Keys: ``format``, ``version``, ``sizes``, ``W{i}``/``b{i}`` per layer,
    ``opt`` = ``[lr, rho, eps]`` and ``acc{j}`` per parameter array when an
    optimiser state is given, and ``meta`` (a JSON string).
    """
    arrays = {
        "format": np.array(CHECKPOINT_FORMAT),
        "version": np.array(CHECKPOINT_VERSION),
        "sizes": np.array(theta.sizes, dtype=np.int64),
        "meta": np.array(json.dumps(meta or {}, sort_keys=True)),
    }
    for i, (w, b) in enumerate(zip(theta.weights, theta.biases)):
        arrays[f"W{i}"] = w
        arrays[f"b{i}"] = b
    if opt is not None:
        arrays["opt"] = np.array([opt.lr, opt.rho, opt.eps])
        for j, a in enumerate(opt.accum):
            arrays[f"acc{j}"] = a
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`: ``(theta, opt_or_None, meta)``."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as z:
        if str(z["format"]) != CHECKPOINT_FORMAT:
            raise ValueError(f"{path} is not a {CHECKPOINT_FORMAT} checkpoint")
        version = int(z["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        n_layers = len(z["sizes"]) - 1
        theta = QNetParams([z[f"W{i}"] for i in range(n_layers)], [z[f"b{i}"] for i in range(n_layers)])
        opt = None
        if "opt" in z.files:
            lr, rho, eps = (float(v) for v in z["opt"])
            accum = [z[f"acc{j}"] for j in range(2 * n_layers)] if "acc0" in z.files else []
            opt = OptimState(lr, rho, eps, accum)
        meta = json.loads(str(z["meta"]))
    return theta, opt, meta
