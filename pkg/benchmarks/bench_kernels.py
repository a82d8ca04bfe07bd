"""Throughput comparison of the compiled MLP kernel against the numpy one.

Times the forward pass and the full optimization step at the shapes the
nine-agent ensemble actually uses, plus a couple of larger batches to show
where BLAS overheads amortize. Run from the repository root:

    python3 benchmarks/bench_kernels.py
"""
import argparse
import time

import numpy as np

from nbiotrl import mlp_numpy
from nbiotrl.config import DqnConfig, SimConfig
from nbiotrl.env import STATE_FEATURES_PER_TTI

try:
    from nbiotrl import _mlpkern
except ImportError:
    _mlpkern = None


def make_problem(batch, sizes, seed=0):
    rng = np.random.default_rng(seed)
    w, b = mlp_numpy.init_params(sizes, 1.0, rng)
    x = rng.normal(size=(batch, sizes[0]))
    a = rng.integers(0, sizes[-1], size=batch)
    y = rng.normal(size=batch)
    return w, b, x, a, y


def time_fn(fn, reps, warmup=3):
    for _ in range(warmup):
        fn()
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def bench_backend(mod, batch, sizes, reps):
    w, b, x, a, y = make_problem(batch, sizes)
    vw = [np.zeros_like(p) for p in w]
    vb = [np.zeros_like(p) for p in b]
    fwd = time_fn(lambda: mod.forward(w, b, x), reps)
    step = time_fn(
        lambda: mod.train_step(w, b, vw, vb, x, a, y, 1e-4, 0.9, 1e-8), reps)
    return fwd, step


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=200)
    args = ap.parse_args()

    cfg, dcfg = SimConfig(), DqnConfig()
    state_dim = cfg.history_window * STATE_FEATURES_PER_TTI
    sizes = (state_dim, *dcfg.hidden_sizes, len(cfg.prea_set))
    cases = [
        ("train batch", dcfg.batch_size, sizes),
        ("big batch", 256, sizes),
        ("single state", 1, sizes),
    ]

    print(f"network {sizes}, {args.reps} reps each")
    header = f"{'case':<14} {'batch':>5}  {'numpy fwd':>10} {'numpy step':>11}"
    if _mlpkern is not None:
        header += f"  {'cython fwd':>10} {'cython step':>11}  {'step speedup':>12}"
    print(header)
    for name, batch, shape in cases:
        nf, ns = bench_backend(mlp_numpy, batch, shape, args.reps)
        line = f"{name:<14} {batch:>5}  {nf * 1e6:>8.1f}us {ns * 1e6:>9.1f}us"
        if _mlpkern is not None:
            cf, cs = bench_backend(_mlpkern, batch, shape, args.reps)
            line += f"  {cf * 1e6:>8.1f}us {cs * 1e6:>9.1f}us  {ns / cs:>11.2f}x"
        print(line)

    if _mlpkern is None:
        print("compiled kernel not available; numpy only")


if __name__ == "__main__":
    main()
