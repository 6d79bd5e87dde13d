"""Compare the compiled and numpy distance kernels.

Usage::

    python3 benchmarks/bench_kernels.py            # kernel timings only
    python3 benchmarks/bench_kernels.py --search   # plus one grid search per backend

The grid-search timing runs in a subprocess per backend so the
``TACTILE_DOME_PURE_PYTHON`` switch takes effect at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from tactile_dome import _kernels_py

try:
    from tactile_dome import _kernels as compiled
except ImportError:
    compiled = None

SEARCH_SNIPPET = """
import time
import numpy as np
from tactile_dome import kernels, krr
from tactile_dome.geometry import DomeSpec, build_case, make_training_grid
from tactile_dome.surrogate import generate_dataset
dome = DomeSpec()
ds = generate_dataset(build_case(8), dome, make_training_grid(dome, 16), np.arange(0, 3.01, 0.5))
t = time.perf_counter()
krr.grid_search(ds, dome=dome)
print(kernels.BACKEND, time.perf_counter() - t)
"""


def best_of(fn, repeat=5):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_table(sizes):
    rng = np.random.default_rng(0)
    print(f"{'rows':>6} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")
    for n in sizes:
        X = rng.normal(scale=30, size=(n, 5))
        t_py = best_of(lambda: _kernels_py.l1_distances(X, X))
        if compiled is None:
            print(f"{n:>6} {t_py * 1e3:>10.2f} {'n/a':>10} {'':>8}")
            continue
        t_c = best_of(lambda: compiled.l1_distances(X, X))
        assert compiled.l1_distances(X, X).tobytes() == _kernels_py.l1_distances(X, X).tobytes()
        print(f"{n:>6} {t_py * 1e3:>10.2f} {t_c * 1e3:>10.2f} {t_py / t_c:>8.2f}")


def search_timings():
    for pure in ("0", "1"):
        env = dict(os.environ, TACTILE_DOME_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", SEARCH_SNIPPET], env=env, check=True,
                             capture_output=True, text=True).stdout.split()
        print(f"grid search ({out[0]}): {float(out[1]):.1f} s")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[100, 400, 1229, 1536])
    parser.add_argument("--search", action="store_true", help="also time a full grid search")
    args = parser.parse_args()
    kernel_table(args.sizes)
    if args.search:
        search_timings()


if __name__ == "__main__":
    main()
