"""Compare the numba and numpy kernel paths.

    python benchmarks/bench_kernels.py [--repeat 5]

Times the per-TTI step at the batch sizes that matter (1 env while training,
1000 envs during evaluation), the fused RMSprop update on the largest
parameter array, and a short end-to-end training run with each path.
"""

import argparse
import timeit

import numpy as np

from goaltrack import _kernels
from goaltrack.agents import TrainConfig, train
from goaltrack.channel import ChannelParams
from goaltrack.env import EnvConfig


def tti_args(batch, rng):
    uav = np.tile([69.0, 70.0, 50.0], (batch, 1))
    return (
        uav,
        uav + rng.normal(size=(batch, 3)),
        np.zeros(batch),
        rng.choice([-500.0, 0.0, 500.0], size=(batch, 3)),
        rng.integers(1, 11, batch),
        rng.exponential(size=(batch, 10)),
        rng.uniform(-0.7, 0.7, batch),
        np.zeros(3),
        ChannelParams().kernel_vector(),
        1e-4,
        1e-3,
        1000.0,
        10,
    )


def best_of(fn, number, repeat):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--episodes", type=int, default=5, help="episodes for the end-to-end training timing")
    args = ap.parse_args()
    if not _kernels.HAS_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)

    rows = []
    for batch, number in ((1, 2000), (1000, 50)):
        a = tti_args(batch, rng)
        _kernels.advance_tti_numba(*a)  # compile outside the timing
        rows.append((f"advance_tti B={batch}", best_of(lambda: _kernels.advance_tti_numba(*a), number, args.repeat),
                     best_of(lambda: _kernels.advance_tti_numpy(*a), number, args.repeat)))

    p, g, v = rng.normal(size=(128, 810)), rng.normal(size=(128, 810)), np.zeros((128, 810))
    _kernels.rmsprop_update_numba(p, g, v, 1e-4, 0.99, 1e-8)
    rows.append(("rmsprop 128x810", best_of(lambda: _kernels.rmsprop_update_numba(p, g, v, 1e-4, 0.99, 1e-8), 500, args.repeat),
                 best_of(lambda: _kernels.rmsprop_update_numpy(p, g, v, 1e-4, 0.99, 1e-8), 500, args.repeat)))

    tc = TrainConfig(n_iterations=args.episodes)
    per_step = {}
    for flag in (True, False):
        _kernels.USE_NUMBA = flag
        steps = args.episodes * EnvConfig().n_ttis
        per_step[flag] = timeit.timeit(lambda: train(EnvConfig(), tc), number=1) / steps
    rows.append((f"train step ({args.episodes} ep)", per_step[True], per_step[False]))

    print(f"{'kernel':<24}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for name, tn, tp in rows:
        print(f"{name:<24}{tn * 1e6:>10.1f}us{tp * 1e6:>10.1f}us{tp / tn:>9.2f}x")


if __name__ == "__main__":
    main()
