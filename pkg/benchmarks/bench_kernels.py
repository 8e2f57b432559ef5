"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from kinlayer import _kernels_py as pure

try:
    from kinlayer import _kernels as compiled
except ImportError:
    compiled = None


def sweep_case(cells=400, nv=72, rhs=2, seed=0):
    rng = np.random.default_rng(seed)
    v3 = np.sort(rng.standard_normal(nv))
    v3[np.abs(v3) < 1e-3] = 1e-3
    reflect = np.argsort(-v3)  # v3 is sorted, so the mirror is an index map
    h = np.full(cells, 30.0 / cells)
    d = np.ones(nv)
    q = rng.standard_normal((cells, nv, rhs))
    inflow = rng.standard_normal((nv, rhs))
    out = np.zeros((cells + 1, nv, rhs))
    return (v3, h, d, q, inflow, reflect, out)


def muscl_case(cells=2000, nv=72, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((cells + 2, nv))
    xc = (np.arange(cells + 2) - 0.5) / cells
    xf = np.arange(cells + 1) / cells
    v3 = rng.standard_normal(nv)
    out = np.zeros((cells + 1, nv))
    return (u, xc, xf, v3, 0, out)


def bench(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    cases = {"sweep": sweep_case(), "muscl_faces": muscl_case()}
    print(f"{'kernel':<12} {'python [ms]':>12} {'compiled [ms]':>14} {'speedup':>8} {'max diff':>10}")
    for name, case in cases.items():
        a = [x.copy() if isinstance(x, np.ndarray) else x for x in case]
        t_py = bench(getattr(pure, name), a, args.repeat)
        if compiled is None:
            print(f"{name:<12} {1e3 * t_py:12.3f} {'n/a':>14}")
            continue
        b = [x.copy() if isinstance(x, np.ndarray) else x for x in case]
        t_c = bench(getattr(compiled, name), b, args.repeat)
        diff = float(np.max(np.abs(a[-1] - b[-1])))
        print(f"{name:<12} {1e3 * t_py:12.3f} {1e3 * t_c:14.3f} {t_py / t_c:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
