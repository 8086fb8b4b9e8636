"""Hot-path search kernels: JIT-compiled and pure-numpy implementations.

The proximity-graph traversal (beam search over adjacency arrays plus greedy
descent) dominates index build and query cost. Both operations exist in two
interchangeable implementations:

* ``numba`` — ``@njit``-compiled scalar loops with explicit binary heaps and
  an inlined dot product (the default when numba is importable);
* ``numpy`` — the same algorithm on ``heapq`` with single-row numpy dot
  products, no compilation step.

Each path computes every similarity — entry seeds included — through one
fixed accumulation shape, so a given node gets one consistent value within a
search no matter how it was reached.

Selection: the ``CASEGPT_KERNELS`` environment variable (``auto`` | ``numba``
| ``numpy``), overridable per call via :func:`get_kernels`. Both paths follow
the identical admission/termination/tie rules, so they produce the same
traversals on non-degenerate (duplicate-free) data; each path is individually
deterministic run-to-run.

Array layout (owned by the index, shared with kernels):
``vectors``  float64 (capacity, dim) — unit-norm rows;
``adj``      int64 (capacity, row_cap) — neighbor slots, padded with -1;
``counts``   int64 (capacity,) — valid prefix length of each row.

The exact brute-force scorer used as a test oracle lives with the index, not
here, and always runs plain numpy regardless of the selected kernel set.
"""

from __future__ import annotations

import heapq
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError

ENV_FLAG = "CASEGPT_KERNELS"
_CHOICES = ("auto", "numba", "numpy")

try:  # pragma: no cover - exercised implicitly by selection tests
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


# --------------------------------------------------------------------------
# numba implementation: scalar loops, manual lexicographic binary heaps.
# Heap entries are (key, tag) pairs over parallel arrays, min-ordered by
# (key, then tag); identical semantics to heapq over (key, tag) tuples.
# --------------------------------------------------------------------------


@njit(cache=True, fastmath=True)
def _dot_nb(a, b):
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


@njit(cache=True)
def _heap_push(keys, tags, size, key, tag):
    i = size
    keys[i] = key
    tags[i] = tag
    while i > 0:
        p = (i - 1) >> 1
        if keys[p] > keys[i] or (keys[p] == keys[i] and tags[p] > tags[i]):
            keys[p], keys[i] = keys[i], keys[p]
            tags[p], tags[i] = tags[i], tags[p]
            i = p
        else:
            break
    return size + 1


@njit(cache=True)
def _heap_pop(keys, tags, size):
    top_key = keys[0]
    top_tag = tags[0]
    size -= 1
    keys[0] = keys[size]
    tags[0] = tags[size]
    i = 0
    while True:
        left = 2 * i + 1
        right = left + 1
        smallest = i
        if left < size and (
            keys[left] < keys[smallest]
            or (keys[left] == keys[smallest] and tags[left] < tags[smallest])
        ):
            smallest = left
        if right < size and (
            keys[right] < keys[smallest]
            or (keys[right] == keys[smallest] and tags[right] < tags[smallest])
        ):
            smallest = right
        if smallest == i:
            break
        keys[smallest], keys[i] = keys[i], keys[smallest]
        tags[smallest], tags[i] = tags[i], tags[smallest]
        i = smallest
    return top_key, top_tag, size


@njit(cache=True)
def _search_layer_nb(vectors, adj, counts, query, entry_slot, entry_sim, ef):
    n = vectors.shape[0]
    visited = np.zeros(n, dtype=np.bool_)
    visited[entry_slot] = True

    # Candidate min-heap on (-sim, slot): best-similarity candidate pops first.
    cand_cap = 4 * ef + 64
    cand_keys = np.empty(cand_cap, dtype=np.float64)
    cand_tags = np.empty(cand_cap, dtype=np.int64)
    cand_size = 0
    # Result min-heap on (sim, -slot): worst element pops first when over ef.
    res_keys = np.empty(ef + 1, dtype=np.float64)
    res_tags = np.empty(ef + 1, dtype=np.int64)
    res_size = 0

    cand_size = _heap_push(cand_keys, cand_tags, cand_size, -entry_sim, entry_slot)
    res_size = _heap_push(res_keys, res_tags, res_size, entry_sim, -entry_slot)

    while cand_size > 0:
        neg_sim, slot, cand_size = _heap_pop(cand_keys, cand_tags, cand_size)
        if res_size == ef and -neg_sim < res_keys[0]:
            break
        for j in range(counts[slot]):
            other = adj[slot, j]
            if visited[other]:
                continue
            visited[other] = True
            sim = _dot_nb(vectors[other], query)
            if res_size < ef or sim > res_keys[0]:
                if cand_size == cand_cap:
                    cand_cap *= 2
                    new_keys = np.empty(cand_cap, dtype=np.float64)
                    new_tags = np.empty(cand_cap, dtype=np.int64)
                    new_keys[:cand_size] = cand_keys[:cand_size]
                    new_tags[:cand_size] = cand_tags[:cand_size]
                    cand_keys = new_keys
                    cand_tags = new_tags
                cand_size = _heap_push(cand_keys, cand_tags, cand_size, -sim, other)
                res_size = _heap_push(res_keys, res_tags, res_size, sim, -other)
                if res_size > ef:
                    _, _, res_size = _heap_pop(res_keys, res_tags, res_size)

    slots = np.empty(res_size, dtype=np.int64)
    sims = np.empty(res_size, dtype=np.float64)
    for i in range(res_size):
        slots[i] = -res_tags[i]
        sims[i] = res_keys[i]
    return slots, sims


@njit(cache=True)
def _closest_nb(vectors, adj, counts, query, entry_slot, entry_sim):
    cur = entry_slot
    cur_sim = entry_sim
    improved = True
    while improved:
        improved = False
        best = cur_sim
        best_slot = cur
        for j in range(counts[cur]):
            other = adj[cur, j]
            sim = _dot_nb(vectors[other], query)
            if sim > best:
                best = sim
                best_slot = other
        if best_slot != cur:
            cur = best_slot
            cur_sim = best
            improved = True
    return cur, cur_sim


# --------------------------------------------------------------------------
# numpy implementation: heapq plus single-row numpy dot products.
# Same admission, termination, and (key, tag) tie rules as the jitted path.
# --------------------------------------------------------------------------


def _dot_np(vectors, slot, query):
    # Single-row contraction for every similarity in this path. Multi-row
    # matmul may accumulate in a different order than the 1-D form, so mixing
    # call shapes would give the same node different last-ulp similarities
    # depending on how it was reached.
    return float(vectors[slot] @ query)


def _search_layer_np(vectors, adj, counts, query, entry_slot, entry_sim, ef):
    visited = np.zeros(vectors.shape[0], dtype=np.bool_)
    visited[entry_slot] = True
    candidates = [(-entry_sim, int(entry_slot))]
    results = [(entry_sim, -int(entry_slot))]

    while candidates:
        neg_sim, slot = heapq.heappop(candidates)
        if len(results) == ef and -neg_sim < results[0][0]:
            break
        for other in adj[slot, : counts[slot]].tolist():
            if visited[other]:
                continue
            visited[other] = True
            sim = _dot_np(vectors, other, query)
            if len(results) < ef or sim > results[0][0]:
                heapq.heappush(candidates, (-sim, other))
                heapq.heappush(results, (sim, -other))
                if len(results) > ef:
                    heapq.heappop(results)

    slots = np.fromiter((-tag for _, tag in results), dtype=np.int64, count=len(results))
    sims = np.fromiter((key for key, _ in results), dtype=np.float64, count=len(results))
    return slots, sims


def _closest_np(vectors, adj, counts, query, entry_slot, entry_sim):
    cur = int(entry_slot)
    cur_sim = float(entry_sim)
    improved = True
    while improved:
        improved = False
        best = cur_sim
        best_slot = cur
        for other in adj[cur, : counts[cur]].tolist():
            sim = _dot_np(vectors, other, query)
            if sim > best:
                best = sim
                best_slot = other
        if best_slot != cur:
            cur = best_slot
            cur_sim = best
            improved = True
    return cur, cur_sim


# --------------------------------------------------------------------------
# Selection
# --------------------------------------------------------------------------


def _dot_nb_entry(vectors, slot, query):
    return float(_dot_nb(vectors[slot], query))


@dataclass(frozen=True)
class KernelSet:
    """One set of traversal kernels plus metadata about their origin.

    ``dot`` computes a single node/query similarity with exactly the same
    floating-point accumulation the traversal kernels use internally; entry
    similarities fed into ``search_layer``/``closest`` must come from it.
    """

    name: str
    search_layer: Callable
    closest: Callable
    dot: Callable
    compiled: bool

    def warmup(self, dim: int = 8) -> None:
        """Trigger JIT compilation off the measured path (no-op for numpy)."""
        vectors = np.zeros((2, dim), dtype=np.float64)
        vectors[0, 0] = 1.0
        vectors[1, 1] = 1.0
        adj = np.full((2, 2), -1, dtype=np.int64)
        adj[0, 0] = 1
        adj[1, 0] = 0
        counts = np.ones(2, dtype=np.int64)
        query = vectors[0].copy()
        sim = self.dot(vectors, 0, query)
        self.search_layer(vectors, adj, counts, query, 0, sim, 2)
        self.closest(vectors, adj, counts, query, 0, sim)


_NUMBA_SET = KernelSet(
    name="numba",
    search_layer=_search_layer_nb,
    closest=_closest_nb,
    dot=_dot_nb_entry,
    compiled=True,
)
_NUMPY_SET = KernelSet(
    name="numpy",
    search_layer=_search_layer_np,
    closest=_closest_np,
    dot=_dot_np,
    compiled=False,
)


def available_kernel_names() -> list[str]:
    return ["numba", "numpy"] if NUMBA_AVAILABLE else ["numpy"]


def get_kernels(name: str | None = None) -> KernelSet:
    """Resolve a kernel set by explicit name, env flag, or auto-detection."""
    choice = name or os.environ.get(ENV_FLAG, "auto").strip().lower() or "auto"
    if choice not in _CHOICES:
        raise ConfigError(
            f"unknown kernel selection {choice!r}; expected one of {_CHOICES}"
        )
    if choice == "numpy":
        return _NUMPY_SET
    if choice == "numba":
        if not NUMBA_AVAILABLE:
            raise ConfigError("numba kernels requested but numba is not installed")
        return _NUMBA_SET
    return _NUMBA_SET if NUMBA_AVAILABLE else _NUMPY_SET
