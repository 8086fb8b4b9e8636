"""Compare the compiled and pure-numpy traversal kernels on one workload.

Builds the same seeded index once per kernel set, then measures insert
throughput and single-query search latency. The compiled path pays a
one-time JIT cost (reported separately as warmup); the numpy path trades
speed for zero compilation and no numba dependency.

Usage:
    python3 benchmarks/bench_kernels.py [--n 2000] [--dim 64] [--queries 200]
"""

import argparse
import time

import numpy as np

from casegpt.hnsw import HnswIndex, HnswParams
from casegpt.kernels import available_kernel_names, get_kernels


def unit_vectors(n: int, dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v


def percentile(values: list[float], fraction: float) -> float:
    ordered = sorted(values)
    rank = max(1, int(np.ceil(fraction * len(ordered))))
    return ordered[rank - 1]


def bench_kernel(name: str, vectors: np.ndarray, queries: np.ndarray, args) -> dict:
    kernels = get_kernels(name)
    t0 = time.perf_counter()
    kernels.warmup(args.dim)
    warmup_s = time.perf_counter() - t0

    params = HnswParams(
        m=args.m,
        ef_construction=args.ef_construction,
        ef_search=args.ef_search,
        rng_seed=args.seed,
    )
    index = HnswIndex(args.dim, params, kernels=kernels)
    t0 = time.perf_counter()
    for i in range(vectors.shape[0]):
        index.insert(f"v{i:06d}", vectors[i])
    build_s = time.perf_counter() - t0

    latencies = []
    recall_total = 0.0
    for q in queries:
        t0 = time.perf_counter()
        hits = index.search(q, args.k)
        latencies.append(time.perf_counter() - t0)
        exact = {n.id for n in index.exact_knn(q, args.k)}
        recall_total += len({n.id for n in hits} & exact) / args.k

    return {
        "kernel": name,
        "warmup_s": warmup_s,
        "build_s": build_s,
        "inserts_per_s": vectors.shape[0] / build_s,
        "search_p50_ms": percentile(latencies, 0.50) * 1000,
        "search_p95_ms": percentile(latencies, 0.95) * 1000,
        "recall_at_k": recall_total / len(queries),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=2000, help="indexed vectors")
    parser.add_argument("--dim", type=int, default=64, help="vector width")
    parser.add_argument("--queries", type=int, default=200)
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--m", type=int, default=16)
    parser.add_argument("--ef-construction", type=int, default=100)
    parser.add_argument("--ef-search", type=int, default=100)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    vectors = unit_vectors(args.n, args.dim, args.seed)
    queries = unit_vectors(args.queries, args.dim, args.seed + 1)

    rows = [
        bench_kernel(name, vectors, queries, args)
        for name in available_kernel_names()
    ]

    print(
        f"workload: n={args.n} dim={args.dim} m={args.m} "
        f"efc={args.ef_construction} efs={args.ef_search} "
        f"queries={args.queries} k={args.k}"
    )
    header = (
        f"{'kernel':<8} {'warmup_s':>9} {'build_s':>9} {'ins/s':>9} "
        f"{'p50_ms':>8} {'p95_ms':>8} {'recall':>7}"
    )
    print(header)
    print("-" * len(header))
    for row in rows:
        print(
            f"{row['kernel']:<8} {row['warmup_s']:>9.2f} {row['build_s']:>9.2f} "
            f"{row['inserts_per_s']:>9.0f} {row['search_p50_ms']:>8.3f} "
            f"{row['search_p95_ms']:>8.3f} {row['recall_at_k']:>7.4f}"
        )
    if len(rows) == 2:
        speedup = rows[1]["build_s"] / rows[0]["build_s"]
        print(f"\nbuild speedup ({rows[0]['kernel']} vs {rows[1]['kernel']}): {speedup:.1f}x")


if __name__ == "__main__":
    main()
