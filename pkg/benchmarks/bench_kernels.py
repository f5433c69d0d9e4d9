#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy fallbacks.

Runs each hot kernel on synthetic inputs sized like a real pipeline run
and prints a median/min timing table with speedups. Both backends are
written op-for-op identical, so the agreement column checks for *exact*
equality, not a tolerance.

Usage:
    python3 benchmarks/bench_kernels.py [--rows N] [--steps N] [--repeats R]
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from icsadv import kernels as K
from icsadv import trees


def bench(fn, args, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times), min(times)


def split_inputs(rows, features, seed):
    rng = np.random.default_rng(seed)
    X = rng.random((rows, features))
    y = (X[:, 0] + 0.3 * rng.standard_normal(rows) > 0.5).astype(np.int64)
    feats = np.arange(features, dtype=np.int64)
    return X, y, feats


def tree_inputs(rows, features, seed):
    # train a real cart so the traversal sees a realistic tree shape
    X, y, _ = split_inputs(2000, features, seed)
    model = trees.train_cart(X, y, trees.CartParams(max_depth=12))
    t = model.tree
    Xq = np.random.default_rng(seed + 1).random((rows, features))
    return (t.feature, t.threshold, t.left, t.right, t.value, Xq), t.n_nodes


def tank_inputs(steps, tanks, seed):
    rng = np.random.default_rng(seed)
    level0 = rng.uniform(40.0, 60.0, tanks)
    rates = (1.2, 0.8, 40.0, 60.0, 100.0, 1.0)
    noise = tuple(rng.normal(0.0, 0.1, (steps, tanks)) for _ in range(3))
    flips = tuple(rng.random((steps, tanks)) < 0.02 for _ in range(2))
    return level0, rates, noise, flips, steps


def tuples_equal(a, b):
    return a[0] == b[0] and a[1] == b[1] and a[2] == b[2]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=40_000,
                    help="rows for the split scans and tree traversal")
    ap.add_argument("--features", type=int, default=8)
    ap.add_argument("--steps", type=int, default=40_000,
                    help="simulation steps for the tank loop")
    ap.add_argument("--tanks", type=int, default=2)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    if not K.HAS_NUMBA:
        print("numba is not importable; timing the numpy fallbacks only")
    else:
        print("warming up the jit kernels...", end=" ", flush=True)
        t0 = time.perf_counter()
        K.warmup()
        print("done (%.2fs)" % (time.perf_counter() - t0))

    X, y, feats = split_inputs(args.rows, args.features, args.seed)
    r = y.astype(np.float64) - y.mean()
    tree_args, n_nodes = tree_inputs(args.rows, args.features, args.seed)
    tank_args = tank_inputs(args.steps, args.tanks, args.seed)

    cases = [
        ("gini_best_split (%dx%d)" % (args.rows, args.features),
         K.gini_best_split_numpy,
         K.gini_best_split_numba if K.HAS_NUMBA else None,
         (X, y, feats), tuples_equal),
        ("sse_best_split (%dx%d)" % (args.rows, args.features),
         K.sse_best_split_numpy,
         K.sse_best_split_numba if K.HAS_NUMBA else None,
         (X, r, feats), tuples_equal),
        ("tree_apply (%d rows, %d nodes)" % (args.rows, n_nodes),
         K.tree_apply_numpy,
         K.tree_apply_numba if K.HAS_NUMBA else None,
         tree_args, np.array_equal),
        ("tank_loop (%d steps x %d tanks)" % (args.steps, args.tanks),
         K.tank_loop_numpy,
         K.tank_loop_numba if K.HAS_NUMBA else None,
         tank_args,
         lambda a, b: all(np.array_equal(x, y) for x, y in zip(a, b))),
    ]

    print()
    print("%-34s %12s %12s %9s %7s" % (
        "kernel", "numpy (ms)", "numba (ms)", "speedup", "agree"))
    print("-" * 78)
    for label, f_np, f_nb, fargs, same in cases:
        med_np, _ = bench(f_np, fargs, args.repeats)
        if f_nb is None:
            print("%-34s %12.3f %12s %9s %7s" % (
                label, med_np * 1e3, "-", "-", "-"))
            continue
        med_nb, _ = bench(f_nb, fargs, args.repeats)
        agree = same(f_np(*fargs), f_nb(*fargs))
        print("%-34s %12.3f %12.3f %8.1fx %7s" % (
            label, med_np * 1e3, med_nb * 1e3, med_np / med_nb,
            "yes" if agree else "NO"))
        if not agree:
            raise SystemExit("backend mismatch on %s" % label)


if __name__ == "__main__":
    main()
