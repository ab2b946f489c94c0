"""Benchmark the array kernels on both backends.

Runs each workload in a subprocess, once with the default backend and
once with AMQSEC_NO_NUMBA=1, then prints a side-by-side table.  Timings
take the best of three repeats and exclude setup (index derivation,
array allocation, JIT compilation).

    python3 bench/benchmark_kernels.py [--elements N]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _bench(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_workloads(n_elements: int) -> dict:
    from amqsec.cuckoo import CuckooParams
    from amqsec.kernels import (backend, bloom_insert, bloom_probe,
                                cuckoo_fill, cuckoo_probe, index_table,
                                new_cuckoo_arrays)
    from amqsec.oracle import FunctionOracle

    rng = np.random.default_rng(99)
    results = {"backend": backend()}

    m, k = 1 << 20, 10
    idx = rng.integers(0, m, size=(n_elements, k), dtype=np.int64)
    bits = np.zeros(m, dtype=np.uint8)
    bloom_insert(bits, idx[:16])  # trigger any JIT compile outside timing
    bloom_probe(bits, idx[:16])

    def bloom_insert_run():
        bits[:] = 0
        bloom_insert(bits, idx)

    results["bloom_insert"] = _bench(bloom_insert_run)
    bits[:] = 0
    bloom_insert(bits, idx)
    results["bloom_probe"] = _bench(lambda: bloom_probe(bits, idx))

    params = CuckooParams(s=4, lam_i=16, lam_t=12, num=500)
    oracle = FunctionOracle(mode="keyed", key=b"bench-key-0123456789abcdef-pad!!")
    htab = index_table(oracle, params.lam_i, params.lam_t)
    tags = rng.integers(1, 1 << params.lam_t, size=n_elements, dtype=np.int64)
    i1s = rng.integers(0, 1 << params.lam_i, size=n_elements, dtype=np.int64)
    warm = new_cuckoo_arrays(params)
    cuckoo_fill(warm, tags[:16], i1s[:16], htab, coin_state=7)
    cuckoo_probe(warm, tags[:16], i1s[:16], htab)

    def cuckoo_fill_run():
        arrays = new_cuckoo_arrays(params)
        cuckoo_fill(arrays, tags, i1s, htab, coin_state=7)

    results["cuckoo_fill"] = _bench(cuckoo_fill_run)
    arrays = new_cuckoo_arrays(params)
    cuckoo_fill(arrays, tags, i1s, htab, coin_state=7)
    results["cuckoo_probe"] = _bench(lambda: cuckoo_probe(arrays, tags, i1s,
                                                          htab))
    results["elements"] = n_elements
    return results


def _worker_results(n_elements: int, no_numba: bool) -> dict:
    env = dict(os.environ)
    if no_numba:
        env["AMQSEC_NO_NUMBA"] = "1"
    else:
        env.pop("AMQSEC_NO_NUMBA", None)
    proc = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--worker",
         "--elements", str(n_elements)],
        env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


WORKLOADS = ("bloom_insert", "bloom_probe", "cuckoo_fill", "cuckoo_probe")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--elements", type=int, default=200_000)
    parser.add_argument("--worker", action="store_true",
                        help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        print(json.dumps(run_workloads(args.elements)))
        return

    fast = _worker_results(args.elements, no_numba=False)
    slow = _worker_results(args.elements, no_numba=True)
    n = args.elements
    print(f"elements per workload: {n}")
    print(f"{'workload':<14} {fast['backend']:>12} {slow['backend']:>14} "
          f"{'speedup':>9}")
    for name in WORKLOADS:
        a, b = fast[name], slow[name]
        rate = n / a
        print(f"{name:<14} {a * 1e3:>9.2f} ms {b * 1e3:>11.2f} ms "
              f"{b / a:>8.1f}x   ({rate:.2e} el/s)")
    if fast["backend"] == slow["backend"]:
        print("note: numba unavailable; both runs used the numpy fallback")


if __name__ == "__main__":
    main()
