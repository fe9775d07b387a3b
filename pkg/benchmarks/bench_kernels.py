"""Time the compiled kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat N]

Prints one row per kernel and size with the best time per call for each
backend and the speed-up of the compiled one.
"""
import argparse
import timeit

import numpy as np

from klasr._backend import available_backends


def _spd(n, rng):
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


def _ar_signal(n, rng):
    e = rng.standard_normal(n + 200)
    x = np.zeros_like(e)
    for t in range(2, e.size):
        x[t] = 1.3 * x[t - 1] - 0.6 * x[t - 2] + e[t]
    return x[200:]


def cases(rng):
    for n in (10, 20, 40):
        m = _spd(n, rng)
        yield f"lu_factor n={n}", lambda k, m=m: k.lu_factor(m, True)
    for n in (20, 40):
        lu, perm, _ = available_backends()["python"].lu_factor(_spd(n, rng), True)
        yield f"lu_inverse n={n}", lambda k, lu=lu, perm=perm: k.lu_inverse(lu, perm)
    x = _ar_signal(4000, rng)
    r = np.array([x[: x.size - i] @ x[i:] for i in range(61)]) / x.size
    for p in (10, 30, 60):
        yield f"levinson p={p}", lambda k, p=p: k.levinson(r, p)
    for p in (10, 30):
        yield f"burg n=4000 p={p}", lambda k, p=p: k.burg(x, p)
    a = np.array([1.3, -0.6])
    yield "residual_power n=4000", lambda k: k.residual_power(x, a)
    yield "autocorr_matrix n=4000 P=20", lambda k: k.autocorr_matrix(x, 20)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args()
    backends = available_backends()
    names = sorted(backends)
    print(f"{'kernel':32s}" + "".join(f"{n + ' (us)':>16s}" for n in names)
          + ("    speed-up" if "cython" in backends else ""))
    rng = np.random.default_rng(0)
    for label, fn in cases(rng):
        times = {}
        for name in names:
            k = backends[name]
            t = timeit.Timer(lambda: fn(k))
            number, _ = t.autorange()
            times[name] = 1e6 * min(t.repeat(args.repeat, number)) / number
        row = f"{label:32s}" + "".join(f"{times[n]:16.1f}" for n in names)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
