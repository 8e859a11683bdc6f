"""Compiled vs NumPy timings for the two hot kernels.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat R]``. Prints one line
per case with the best-of-R wall time of each backend, the speedup and the
maximum absolute difference between the two outputs.
"""

import argparse
import timeit

import numpy as np

from lacuna import kernels
from lacuna.geometry import make_direction


def _best(func, repeat):
    return min(timeit.repeat(func, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if kernels._ckernels is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(0)
    cases = []
    for shape in [(128, 128), (512, 512), (32, 32, 32)]:
        f = rng.random(shape)
        v = make_direction(rng.uniform(0.1, 1, len(shape)))
        M = shape[0]
        radii = [2.0 ** -k * M for k in range(2, int(np.log2(M)) + 1)]
        groups = [(h, [e[0] for e in es]) for h, es in kernels.radius_groups(radii)]
        cases.append((f"segment_max {shape}", lambda f=f, v=v, r=radii: kernels.segment_max_numpy(f, v, r),
                      lambda f=f, v=v, g=groups: kernels._ckernels.segment_max(f, v, g)))
    for shape in [(128, 128), (512, 512), (32, 32, 32)]:
        f = rng.random(shape)
        cases.append((f"strong_maximal {shape}", lambda f=f: kernels.strong_maximal_numpy(f),
                      lambda f=f: kernels._ckernels.strong_maximal(f)))
    print(f"{'case':32s} {'numpy [s]':>10s} {'compiled [s]':>12s} {'speedup':>8s} {'max diff':>10s}")
    for name, py, c in cases:
        diff = float(np.max(np.abs(py() - c())))
        tp, tc = _best(py, args.repeat), _best(c, args.repeat)
        print(f"{name:32s} {tp:10.4f} {tc:12.4f} {tp / tc:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
