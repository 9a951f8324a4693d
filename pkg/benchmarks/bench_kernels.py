"""Compare the compiled and pure-Python class-counting kernels.

    python3 benchmarks/bench_kernels.py [--batch 20000] [--repeat 3]

Also times one word integral end to end with whichever backend is active.
"""
import argparse
import time

import numpy as np

from ymloops import _kernels_py, kernels
from ymloops.unitary_rep import HighestWeight
from ymloops.weingarten import WordSpec, character_word_integral, parse_word


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=20000)
    ap.add_argument("--nodes", type=int, default=48)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    base = rng.integers(0, args.nodes, size=(args.nodes // 2, 2))
    batch = rng.integers(0, args.nodes, size=(args.batch, args.nodes // 3, 2))

    py = best_of(lambda: _kernels_py.count_classes_batch(args.nodes, base, batch), args.repeat)
    print(f"python   count_classes_batch: {py * 1e3:9.2f} ms")
    if kernels.BACKEND == "cython":
        from ymloops import _kernels

        cy = best_of(lambda: _kernels.count_classes_batch(args.nodes, base, batch), args.repeat)
        assert np.array_equal(_kernels.count_classes_batch(args.nodes, base, batch),
                              _kernels_py.count_classes_batch(args.nodes, base, batch))
        print(f"cython   count_classes_batch: {cy * 1e3:9.2f} ms  ({py / cy:.1f}x)")
    else:
        print("cython   extension not built; skipped")

    s = WordSpec([parse_word("x y X Y")], [HighestWeight((2,), (1,), 3)])
    t = best_of(lambda: character_word_integral(s, method="enumerate"), 1)
    print(f"word integral [2;1]_3 on the commutator ({kernels.BACKEND}): {t:.3f} s")


if __name__ == "__main__":
    main()
