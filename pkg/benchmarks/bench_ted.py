"""Compare the compiled and pure-Python tree edit distance backends.

Usage: python3 benchmarks/bench_ted.py [--sizes 10 20 40] [--pairs 20] [--seed 0]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from advedit import ted as T
from advedit.trees import Tree


def random_tree(n: int, rng: np.random.Generator, alphabet="abcd") -> Tree:
    # random recursive tree: node k attaches to a uniformly drawn earlier node
    parent = [-1] + [int(rng.integers(k)) for k in range(1, n)]
    labels = [alphabet[int(rng.integers(len(alphabet)))] for _ in range(n)]
    kids = [[] for _ in range(n)]
    for k in range(n - 1, 0, -1):
        kids[parent[k]].append(k)
    built = [None] * n
    for k in range(n - 1, -1, -1):
        built[k] = Tree(labels[k], [built[c] for c in reversed(kids[k])])
    return built[0]


def bench(backend: str, pairs) -> float:
    t0 = time.perf_counter()
    for x, y in pairs:
        T.ted(x, y, backend=backend)
    return time.perf_counter() - t0


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 20, 40])
    ap.add_argument("--pairs", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    backends = T.available_backends()
    print(f"default backend: {T.BACKEND}; available: {', '.join(backends)}")
    print(f"{'size':>5} " + " ".join(f"{b + ' [s]':>12}" for b in backends)
          + ("  speedup" if len(backends) > 1 else ""))
    for n in args.sizes:
        pairs = [(random_tree(n, rng), random_tree(n, rng)) for _ in range(args.pairs)]
        for x, y in pairs:  # warm the per-tree array caches
            T.ted(x, y, backend=backends[0])
        times = {b: bench(b, pairs) for b in backends}
        line = f"{n:>5} " + " ".join(f"{times[b]:>12.4f}" for b in backends)
        if "cython" in times:
            line += f"  {times['python'] / times['cython']:7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
