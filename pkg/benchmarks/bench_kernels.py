"""Time the compiled kernels against the pure-Python twins.

Usage::

    python benchmarks/bench_kernels.py [--repeat 3] [--sizes 50,100,200]

Both backends solve the same seeded instances; the script checks that
their costs agree before reporting timings.
"""
import argparse
import time

import numpy as np

from otflat import _kernels_py

try:
    from otflat import _kernels
except ImportError:  # extension not built
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_simplex(n, rng, repeat):
    x, y = rng.random((n, 2)), rng.random((n, 2))
    a, b = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
    C = np.ascontiguousarray(((x[:, None] - y[None]) ** 2).sum(-1))
    rows = {}
    for name, mod in (("python", _kernels_py), ("cython", _kernels)):
        if mod is None:
            continue
        t, out = best_of(lambda: mod.network_simplex(a, b, C), repeat)
        r, c, m = out[:3]
        rows[name] = (t, float(np.sum(m * C[r, c])))
    return rows


def bench_1d(n, rng, repeat):
    x, y = np.sort(rng.random(n)), np.sort(rng.random(n))
    wx = rng.random(n)
    WY = rng.random((64, n))
    WY *= wx.sum() / WY.sum(axis=1, keepdims=True)
    rows = {}
    for name, mod in (("python", _kernels_py), ("cython", _kernels)):
        if mod is None:
            continue
        t, out = best_of(lambda: mod.wasserstein_1d_batch(x, wx, y, WY, 2.0), repeat)
        rows[name] = (t, float(np.sum(out)))
    return rows


def report(label, n, rows):
    py = rows.get("python")
    cy = rows.get("cython")
    line = f"{label:<14}{n:>6}  python {py[0]:9.4f}s"
    if cy is not None:
        assert abs(cy[1] - py[1]) <= 1e-9 * max(1.0, abs(py[1])), "backends disagree"
        line += f"  cython {cy[0]:9.4f}s  speedup {py[0] / cy[0]:7.1f}x"
    print(line)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--sizes", default="50,100,200")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    sizes = [int(s) for s in args.sizes.split(",")]
    if _kernels is None:
        print("compiled extension not available; timing the Python twin only")
    for n in sizes:
        report("network_simplex", n, bench_simplex(n, rng, args.repeat))
    for n in sizes:
        report("w1d batch x64", 10 * n, bench_1d(10 * n, rng, args.repeat))


if __name__ == "__main__":
    main()
