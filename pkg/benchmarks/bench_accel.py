"""Time the numba and pure-numpy paths of the hot kernels.

Run with ``python benchmarks/bench_accel.py``. The first numba call of each
kernel is made before timing so compilation is excluded.
"""
import time

import numpy as np

from nestedgp import _accel


def _best(func, *args, repeat=5):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        func(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    rng = np.random.default_rng(0)
    A = rng.random((400, 4))
    ls = np.full(4, 0.5)
    U = rng.random((40, 4))
    m = 40 * 50
    swaps = (rng.integers(0, 4, m), rng.integers(0, 40, m), rng.integers(0, 40, m))
    drag = rng.uniform(0, 5e-3, 200)
    speed = rng.uniform(100, 300, 200)
    elev = np.deg2rad(rng.uniform(10, 50, 200))
    cases = [
        ("gram_gaussian 400x400", "gram_gaussian", (A, A, ls, 1.0, 1e-6)),
        ("gram_matern52 400x400", "gram_matern52", (A, A, ls, 1.0, 1e-6)),
        ("lhs_swap 40 pts x 2000 swaps", "lhs_swap_optimize", (U,) + swaps),
        ("ballistic_range 200 shots", "ballistic_range", (drag, speed, elev, 9.81, 0.01, 300.0)),
    ]
    print(f"{'kernel':32s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speed-up':>9s}")
    for label, name, args in cases:
        t_np = _best(getattr(_accel, name + "_numpy"), *args)
        if _accel.HAVE_NUMBA:
            getattr(_accel, name + "_numba")(*args)
            t_nb = _best(getattr(_accel, name + "_numba"), *args)
            print(f"{label:32s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:9.1f}")
        else:
            print(f"{label:32s} {t_np:10.4f} {'n/a':>10s}")


if __name__ == "__main__":
    main()
