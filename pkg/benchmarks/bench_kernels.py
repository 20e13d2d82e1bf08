"""Time the compiled and pure-numpy kernels on the workloads the library runs.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-N wall time per backend and the speed-up of the compiled
extension when it is built.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from qrwalk.kernels import backends
from qrwalk.numerics import random_unitary


def walk_case(trials: int, steps: int, d: int, k: int, gen):
    branches = np.array([random_unitary(d, gen) for _ in range(k)])
    outcomes = gen.integers(0, k, size=(trials, steps)).astype(np.intp)
    v0 = np.broadcast_to(np.eye(d, dtype=complex), (trials, d, d)).copy()
    return lambda mod: mod.walk_products(branches, outcomes, v0)


def step_case(trials: int, steps: int, d: int, n: int, gen):
    a = 0.01 * (gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d)))
    b = 0.1 * (gen.standard_normal((n, d, d)) + 1j * gen.standard_normal((n, d, d)))
    scale = np.full(trials, 1e-3)
    z = 0.03 * (gen.standard_normal((trials, n)) + 1j * gen.standard_normal((trials, n)))

    def run(mod):
        u = np.broadcast_to(np.eye(d, dtype=complex), (trials, d, d)).copy()
        for _ in range(steps):
            mod.linear_step(u, a, b, scale, z)
        return u

    return run


CASES = {
    "walk_products 2048 trials x 400 steps, d=2, K=3": lambda g: walk_case(2048, 400, 2, 3, g),
    "walk_products 512 trials x 400 steps, d=4, K=5": lambda g: walk_case(512, 400, 4, 5, g),
    "linear_step 1024 trials x 200 steps, d=2, N=2": lambda g: step_case(1024, 200, 2, 2, g),
    "linear_step 256 trials x 200 steps, d=4, N=3": lambda g: step_case(256, 200, 4, 3, g),
}


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    mods = backends()
    if "cython" not in mods:
        print("compiled extension not built; timing the numpy backend only")
    for name, make in CASES.items():
        fn = make(np.random.default_rng(0))
        times = {b: min(timeit.repeat(lambda: fn(m), number=1, repeat=args.repeat)) for b, m in mods.items()}
        ref = fn(mods["python"])
        line = ", ".join(f"{b} {t * 1e3:8.2f} ms" for b, t in times.items())
        if "cython" in times:
            diff = np.abs(fn(mods["cython"]) - ref).max()
            line += f", speed-up {times['python'] / times['cython']:5.2f}x, max diff {diff:.1e}"
        print(f"{name:52s} {line}")


if __name__ == "__main__":
    main()
