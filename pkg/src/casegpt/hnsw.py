"""Layered proximity-graph index for approximate nearest-neighbor search.

The index stores unit-norm vectors in a flat float64 matrix and one
fixed-width adjacency table per layer. A node's level is sampled as
``floor(-ln(U) * mL)`` from a seeded splitmix64 stream, so identical seeds
and insert order reproduce identical graphs. Queries greedily descend the
upper layers, then run an ``ef``-bounded beam search on layer 0 (see
:mod:`casegpt.kernels` for both kernel implementations).

Similarity is the dot product of unit vectors (equal to cosine). Results are
sorted by similarity descending, ties by ascending external id. Deleted nodes
are tombstoned: still traversed for routing, never returned; ``compacted()``
rebuilds without them.

Snapshots are versioned binary files with a trailing 64-bit content digest;
``load_snapshot(save_snapshot(x))`` restores the graph, parameters, and RNG
position exactly, so inserts after a reload continue the same random stream.
"""

from __future__ import annotations

import hashlib
import math
import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import (
    CorruptSnapshot,
    DimensionMismatch,
    DuplicateId,
    EmptyIndex,
    InvalidParams,
    IoFailure,
    NotFound,
    NotNormalized,
    VersionMismatch,
)
from .kernels import KernelSet, get_kernels

_U64 = 0xFFFFFFFFFFFFFFFF
_SNAPSHOT_MAGIC = b"HNSWSNAP"
_SNAPSHOT_VERSION = 1
NORM_TOLERANCE = 1e-6


def _splitmix64(seed: int, draw: int) -> int:
    """The ``draw``-th value (1-based) of the splitmix64 stream for ``seed``."""
    z = (seed + draw * 0x9E3779B97F4A7C15) & _U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return z ^ (z >> 31)


def level_for_unit(u: float, ml: float) -> int:
    """Layer assignment ``floor(-ln(u) * mL)`` for a uniform draw u in (0, 1]."""
    return int(math.floor(-math.log(u) * ml))


@dataclass(frozen=True)
class HnswParams:
    """Graph tuning parameters.

    ``m0`` defaults to ``2 * m`` and ``ml`` to ``1 / ln(m)``. The
    ``use_heuristic`` flag switches neighbor pruning from plain closest-first
    truncation to the diversity heuristic (keep a candidate only if it is
    closer to the target than to every already-kept neighbor); off by default.
    """

    m: int = 16
    m0: int | None = None
    ef_construction: int = 200
    ef_search: int = 100
    ml: float | None = None
    rng_seed: int = 0x5EED_CA5E
    use_heuristic: bool = False

    def validate(self) -> "HnswParams":
        if self.m < 2:
            raise InvalidParams(f"m must be >= 2, got {self.m}")
        if self.m0 is not None and self.m0 < self.m:
            raise InvalidParams(f"m0 must be >= m, got {self.m0}")
        if self.ef_construction < self.m:
            raise InvalidParams(
                f"ef_construction must be >= m, got {self.ef_construction}"
            )
        if self.ef_search < 1:
            raise InvalidParams(f"ef_search must be >= 1, got {self.ef_search}")
        if self.ml is not None and not (self.ml > 0):
            raise InvalidParams(f"ml must be > 0, got {self.ml}")
        return self

    @property
    def layer0_cap(self) -> int:
        return self.m0 if self.m0 is not None else 2 * self.m

    @property
    def level_multiplier(self) -> float:
        return self.ml if self.ml is not None else 1.0 / math.log(self.m)


@dataclass(frozen=True)
class Neighbor:
    """One search hit: external id plus cosine similarity in [-1, 1]."""

    id: str
    similarity: float


@dataclass
class IndexStats:
    node_count: int
    live_count: int
    tombstone_count: int
    max_layer: int
    dim: int
    params: HnswParams = field(repr=False)


class HnswIndex:
    """Incrementally built proximity graph over unit vectors.

    Writes (insert/tombstone) are serialized by an internal lock; searches
    take a reference snapshot of the storage arrays up front and run without
    the lock, so concurrent reads stay safe while a write commits via array
    swaps.
    """

    def __init__(self, dim: int, params: HnswParams | None = None, kernels: KernelSet | None = None):
        if dim < 1:
            raise InvalidParams(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self.params = (params or HnswParams()).validate()
        self.kernels = kernels or get_kernels()
        self._lock = threading.RLock()

        cap = 1024
        self._vectors = np.zeros((cap, dim), dtype=np.float64)
        # Per layer: (adjacency int64 (cap, row_cap) padded with -1, counts int64 (cap,))
        self._adj: list[np.ndarray] = []
        self._adj_counts: list[np.ndarray] = []
        self._ids: list[str] = []
        self._slot_of: dict[str, int] = {}
        self._top_layer = np.full(cap, -1, dtype=np.int64)
        self._dead = np.zeros(cap, dtype=np.bool_)
        self._entry = -1
        self._n = 0
        self._live = 0
        self._rng_calls = 0

    # -- sizing ------------------------------------------------------------

    @property
    def size(self) -> int:
        """Number of live (searchable) nodes."""
        return self._live

    @property
    def node_count(self) -> int:
        """Total stored nodes including tombstones."""
        return self._n

    def __contains__(self, case_id: str) -> bool:
        slot = self._slot_of.get(case_id)
        return slot is not None and not self._dead[slot]

    def stats(self) -> IndexStats:
        return IndexStats(
            node_count=self._n,
            live_count=self._live,
            tombstone_count=self._n - self._live,
            max_layer=len(self._adj) - 1,
            dim=self.dim,
            params=self.params,
        )

    def _grow(self, needed: int) -> None:
        cap = self._vectors.shape[0]
        if needed <= cap:
            return
        new_cap = cap
        while new_cap < needed:
            new_cap *= 2
        vectors = np.zeros((new_cap, self.dim), dtype=np.float64)
        vectors[:cap] = self._vectors
        top = np.full(new_cap, -1, dtype=np.int64)
        top[:cap] = self._top_layer
        dead = np.zeros(new_cap, dtype=np.bool_)
        dead[:cap] = self._dead
        for layer in range(len(self._adj)):
            row_cap = self._adj[layer].shape[1]
            adj = np.full((new_cap, row_cap), -1, dtype=np.int64)
            adj[:cap] = self._adj[layer]
            counts = np.zeros(new_cap, dtype=np.int64)
            counts[:cap] = self._adj_counts[layer]
            self._adj[layer] = adj
            self._adj_counts[layer] = counts
        self._vectors = vectors
        self._top_layer = top
        self._dead = dead

    def _ensure_layer(self, layer: int) -> None:
        cap = self._vectors.shape[0]
        while len(self._adj) <= layer:
            row_cap = self.params.layer0_cap if len(self._adj) == 0 else self.params.m
            self._adj.append(np.full((cap, row_cap), -1, dtype=np.int64))
            self._adj_counts.append(np.zeros(cap, dtype=np.int64))

    # -- level sampling ----------------------------------------------------

    def _next_level(self) -> int:
        self._rng_calls += 1
        z = _splitmix64(self.params.rng_seed & _U64, self._rng_calls)
        u = ((z >> 11) + 1) * 2.0**-53  # uniform in (0, 1]
        return level_for_unit(u, self.params.level_multiplier)

    # -- validation --------------------------------------------------------

    def _check_vector(self, vector: np.ndarray) -> np.ndarray:
        v = np.ascontiguousarray(vector, dtype=np.float64)
        if v.shape != (self.dim,):
            raise DimensionMismatch(f"expected dim {self.dim}, got shape {v.shape}")
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise NotNormalized(f"vector norm {norm:.8f} is not 1 within {NORM_TOLERANCE}")
        return v

    # -- insertion ---------------------------------------------------------

    def insert(self, case_id: str, vector: np.ndarray) -> None:
        """Add one node. The id must not be live; re-adding a tombstoned id
        creates a fresh node that shadows the dead one."""
        v = self._check_vector(vector)
        with self._lock:
            existing = self._slot_of.get(case_id)
            if existing is not None and not self._dead[existing]:
                raise DuplicateId(f"id {case_id!r} is already indexed")

            level = self._next_level()
            slot = self._n
            self._grow(slot + 1)
            self._ensure_layer(level)
            self._vectors[slot] = v
            self._ids.append(case_id)
            self._slot_of[case_id] = slot
            self._top_layer[slot] = level
            self._n += 1
            self._live += 1

            if self._entry < 0:
                self._entry = slot
                return

            entry = self._entry
            entry_top = int(self._top_layer[entry])
            query = self._vectors[slot]
            cur = entry
            cur_sim = self.kernels.dot(self._vectors, cur, query)

            for layer in range(entry_top, level, -1):
                cur, cur_sim = self.kernels.closest(
                    self._vectors, self._adj[layer], self._adj_counts[layer],
                    query, cur, cur_sim,
                )

            for layer in range(min(level, entry_top), -1, -1):
                slots, sims = self.kernels.search_layer(
                    self._vectors, self._adj[layer], self._adj_counts[layer],
                    query, cur, cur_sim, self.params.ef_construction,
                )
                candidates = [int(s) for s in slots]
                order = sorted(
                    range(len(candidates)), key=lambda i: (-sims[i], candidates[i])
                )
                neighbors = self._select_slots(
                    slot, candidates, sims, order, self._row_cap(layer)
                )
                self._connect(layer, slot, neighbors)
                cur = candidates[order[0]]
                cur_sim = float(sims[order[0]])

            if level > entry_top:
                self._entry = slot

    def insert_many(self, items: Iterable[tuple[str, np.ndarray]]) -> int:
        count = 0
        for case_id, vector in items:
            self.insert(case_id, vector)
            count += 1
        return count

    def _row_cap(self, layer: int) -> int:
        return self.params.layer0_cap if layer == 0 else self.params.m

    def _connect(self, layer: int, slot: int, neighbors: list[int]) -> None:
        adj, counts = self._adj[layer], self._adj_counts[layer]
        cap = self._row_cap(layer)
        adj[slot, : len(neighbors)] = neighbors
        counts[slot] = len(neighbors)
        for other in neighbors:
            c = int(counts[other])
            if c < cap:
                adj[other, c] = slot
                counts[other] = c + 1
            else:
                self._prune_row(layer, other, extra=slot)

    def _prune_row(self, layer: int, slot: int, extra: int) -> None:
        """Re-select ``slot``'s neighbor row with ``extra`` as a candidate,
        dropping the overflow and repairing symmetry on dropped nodes."""
        adj, counts = self._adj[layer], self._adj_counts[layer]
        cap = self._row_cap(layer)
        candidates = [int(x) for x in adj[slot, : counts[slot]]] + [extra]
        sims = self._vectors[candidates] @ self._vectors[slot]
        order = sorted(range(len(candidates)), key=lambda i: (-sims[i], candidates[i]))
        kept = self._select_slots(slot, candidates, sims, order, cap)
        kept_set = set(kept)
        for i in order:
            dropped = candidates[i]
            if dropped not in kept_set:
                # Repair symmetry: the dropped node (possibly the just-added
                # one) no longer lists this row's owner.
                self._remove_edge(layer, dropped, slot)
        adj[slot, : len(kept)] = kept
        adj[slot, len(kept) :] = -1
        counts[slot] = len(kept)

    def _select_slots(
        self, slot: int, candidates: list[int], sims: np.ndarray, order: list[int], cap: int
    ) -> list[int]:
        """Pick ``slot``'s neighbor set from scored candidates: closest-first
        truncation by default, or the diversity heuristic when enabled (keep a
        candidate only if it is closer to the target than to every
        already-kept neighbor, then backfill to ``cap`` with the closest
        leftovers)."""
        if not self.params.use_heuristic:
            return [candidates[i] for i in order[:cap]]
        # One candidate-by-candidate similarity matrix replaces the per-pair
        # dot products inside the admission loop; the loop itself stays scalar
        # so admission order and tie handling are unchanged.
        gram = self._vectors[candidates] @ self._vectors[candidates].T
        kept_idx: list[int] = []
        for i in order:
            if len(kept_idx) == cap:
                break
            row = gram[i]
            admit = True
            for j in kept_idx:
                if row[j] > sims[i]:
                    admit = False
                    break
            if admit:
                kept_idx.append(i)
        if len(kept_idx) < cap:  # backfill with closest-first leftovers
            kept_set = set(kept_idx)
            for i in order:
                if len(kept_idx) == cap:
                    break
                if i not in kept_set:
                    kept_idx.append(i)
        return [candidates[i] for i in kept_idx]

    def _remove_edge(self, layer: int, from_slot: int, to_slot: int) -> None:
        adj, counts = self._adj[layer], self._adj_counts[layer]
        c = int(counts[from_slot])
        row = adj[from_slot, :c]
        hits = np.nonzero(row == to_slot)[0]
        if hits.size == 0:
            return
        i = int(hits[0])
        adj[from_slot, i : c - 1] = adj[from_slot, i + 1 : c]
        adj[from_slot, c - 1] = -1
        counts[from_slot] = c - 1

    # -- deletion ----------------------------------------------------------

    def tombstone(self, case_id: str) -> None:
        """Flag a node dead: kept for routing, excluded from results."""
        with self._lock:
            slot = self._slot_of.get(case_id)
            if slot is None or self._dead[slot]:
                raise NotFound(f"no live node for id {case_id!r}")
            self._dead[slot] = True
            self._live -= 1
            if slot == self._entry:
                self._entry = self._pick_entry()

    def _pick_entry(self) -> int:
        best = -1
        best_layer = -1
        for slot in range(self._n):
            if self._dead[slot]:
                continue
            layer = int(self._top_layer[slot])
            if layer > best_layer:
                best, best_layer = slot, layer
        return best

    # -- queries -----------------------------------------------------------

    def _read_state(self):
        with self._lock:
            return (
                self._vectors,
                list(self._adj),
                list(self._adj_counts),
                self._entry,
                self._dead,
                self._top_layer,
            )

    def search(self, query: np.ndarray, k: int, ef_search: int | None = None) -> list[Neighbor]:
        """Approximate top-k live neighbors, similarity descending, ties by
        ascending id. Beam width is ``max(ef_search, k)``."""
        if k <= 0:
            return []
        v = self._check_vector(query)
        vectors, adj, adj_counts, entry, dead, top_layer = self._read_state()
        if entry < 0:
            raise EmptyIndex("index has no live nodes")
        ef = max(ef_search if ef_search is not None else self.params.ef_search, k)

        cur = entry
        cur_sim = self.kernels.dot(vectors, cur, v)
        for layer in range(int(top_layer[entry]), 0, -1):
            cur, cur_sim = self.kernels.closest(
                vectors, adj[layer], adj_counts[layer], v, cur, cur_sim
            )
        slots, sims = self.kernels.search_layer(
            vectors, adj[0], adj_counts[0], v, cur, cur_sim, ef
        )
        hits = [
            (float(min(1.0, max(-1.0, sims[i]))), self._ids[int(slots[i])])
            for i in range(len(slots))
            if not dead[int(slots[i])]
        ]
        hits.sort(key=lambda pair: (-pair[0], pair[1]))
        return [Neighbor(id=case_id, similarity=sim) for sim, case_id in hits[:k]]

    def exact_knn(self, query: np.ndarray, k: int) -> list[Neighbor]:
        """Exact top-k by full scan over live nodes — the brute-force oracle.

        Always plain numpy, independent of the configured kernel set, so it
        stays a trustworthy reference for the approximate path.
        """
        if k <= 0:
            return []
        v = self._check_vector(query)
        with self._lock:
            n = self._n
            if self._live == 0:
                raise EmptyIndex("index has no live nodes")
            sims = self._vectors[:n] @ v
            live = ~self._dead[:n]
        pairs = [
            (float(min(1.0, max(-1.0, sims[slot]))), self._ids[slot])
            for slot in range(n)
            if live[slot]
        ]
        pairs.sort(key=lambda pair: (-pair[0], pair[1]))
        return [Neighbor(id=case_id, similarity=sim) for sim, case_id in pairs[:k]]

    def get_vector(self, case_id: str) -> np.ndarray:
        slot = self._slot_of.get(case_id)
        if slot is None or self._dead[slot]:
            raise NotFound(f"no live node for id {case_id!r}")
        return self._vectors[slot].copy()

    def live_ids(self) -> list[str]:
        return [self._ids[slot] for slot in range(self._n) if not self._dead[slot]]

    # -- maintenance -------------------------------------------------------

    def compacted(self) -> "HnswIndex":
        """Fresh index with tombstones dropped: live nodes re-inserted in
        original insertion order under the same parameters and a reset RNG."""
        rebuilt = HnswIndex(self.dim, self.params, kernels=self.kernels)
        with self._lock:
            for slot in range(self._n):
                if not self._dead[slot]:
                    rebuilt.insert(self._ids[slot], self._vectors[slot])
        return rebuilt

    # -- invariant audit (test support) ------------------------------------

    def audit(self) -> None:
        """Full-scan structural check: symmetric adjacency, degree bounds,
        valid entry point. Raises AssertionError on violation."""
        with self._lock:
            for layer in range(len(self._adj)):
                adj, counts = self._adj[layer], self._adj_counts[layer]
                cap = self._row_cap(layer)
                for slot in range(self._n):
                    if self._top_layer[slot] < layer:
                        assert counts[slot] == 0, f"node below layer {layer} has edges"
                        continue
                    row = adj[slot, : counts[slot]]
                    assert counts[slot] <= cap, f"degree bound violated at layer {layer}"
                    assert len(set(row.tolist())) == len(row), "duplicate neighbor"
                    for other in row:
                        assert other != slot, "self-edge"
                        back = adj[int(other), : counts[int(other)]]
                        assert slot in back, (
                            f"asymmetric edge {slot}->{int(other)} at layer {layer}"
                        )
            if self._entry >= 0:
                assert not self._dead[self._entry], "entry point is tombstoned"
                top = int(self._top_layer[self._entry])
                for slot in range(self._n):
                    if not self._dead[slot]:
                        assert self._top_layer[slot] <= top, "entry not at max layer"

    # -- persistence -------------------------------------------------------

    def save_snapshot(self, destination: str | Path) -> None:
        payload = self._serialize()
        digest = hashlib.blake2b(payload, digest_size=8).digest()
        try:
            with open(destination, "wb") as fh:
                fh.write(payload)
                fh.write(digest)
        except OSError as exc:
            raise IoFailure(f"cannot write snapshot: {exc}") from exc

    def _serialize(self) -> bytes:
        p = self.params
        out = bytearray()
        out += _SNAPSHOT_MAGIC
        out += struct.pack(
            "<IIIIII",
            _SNAPSHOT_VERSION,
            self.dim,
            p.m,
            p.layer0_cap,
            p.ef_construction,
            p.ef_search,
        )
        out += struct.pack(
            "<dQQB",
            p.level_multiplier,
            p.rng_seed & _U64,
            self._rng_calls,
            int(p.use_heuristic),
        )
        out += struct.pack("<qq", self._entry, self._n)
        with self._lock:
            for slot in range(self._n):
                raw_id = self._ids[slot].encode("utf-8")
                top = int(self._top_layer[slot])
                out += struct.pack("<I", len(raw_id))
                out += raw_id
                out += struct.pack("<qB", top, int(self._dead[slot]))
                out += self._vectors[slot].tobytes()
                for layer in range(top + 1):
                    count = int(self._adj_counts[layer][slot])
                    out += struct.pack("<I", count)
                    out += self._adj[layer][slot, :count].astype("<i8").tobytes()
        return bytes(out)

    @classmethod
    def load_snapshot(cls, source: str | Path, kernels: KernelSet | None = None) -> "HnswIndex":
        try:
            blob = Path(source).read_bytes()
        except OSError as exc:
            raise IoFailure(f"cannot read snapshot: {exc}") from exc
        if len(blob) < len(_SNAPSHOT_MAGIC) + 8:
            raise CorruptSnapshot("snapshot truncated")
        payload, digest = blob[:-8], blob[-8:]
        if hashlib.blake2b(payload, digest_size=8).digest() != digest:
            raise CorruptSnapshot("snapshot checksum mismatch")
        if payload[:8] != _SNAPSHOT_MAGIC:
            raise CorruptSnapshot("not a snapshot file")
        try:
            return cls._deserialize(payload, kernels)
        except (struct.error, IndexError, ValueError) as exc:
            raise CorruptSnapshot(f"snapshot decode failed: {exc}") from exc

    @classmethod
    def _deserialize(cls, payload: bytes, kernels: KernelSet | None) -> "HnswIndex":
        offset = 8
        version, dim, m, m0, efc, efs = struct.unpack_from("<IIIIII", payload, offset)
        offset += 24
        if version != _SNAPSHOT_VERSION:
            raise VersionMismatch(f"snapshot version {version}, expected {_SNAPSHOT_VERSION}")
        ml, rng_seed, rng_calls, heuristic = struct.unpack_from("<dQQB", payload, offset)
        offset += 25
        entry, count = struct.unpack_from("<qq", payload, offset)
        offset += 16

        params = HnswParams(
            m=m, m0=m0, ef_construction=efc, ef_search=efs, ml=ml,
            rng_seed=rng_seed, use_heuristic=bool(heuristic),
        )
        index = cls(dim, params, kernels=kernels)
        index._grow(max(count, 1))
        vec_bytes = dim * 8
        for slot in range(count):
            (id_len,) = struct.unpack_from("<I", payload, offset)
            offset += 4
            case_id = payload[offset : offset + id_len].decode("utf-8")
            offset += id_len
            top, dead = struct.unpack_from("<qB", payload, offset)
            offset += 9
            vector = np.frombuffer(payload, dtype="<f8", count=dim, offset=offset).copy()
            offset += vec_bytes
            index._ensure_layer(int(top))
            index._vectors[slot] = vector
            index._ids.append(case_id)
            index._slot_of[case_id] = slot
            index._top_layer[slot] = top
            index._dead[slot] = bool(dead)
            for layer in range(int(top) + 1):
                (edge_count,) = struct.unpack_from("<I", payload, offset)
                offset += 4
                row = np.frombuffer(payload, dtype="<i8", count=edge_count, offset=offset)
                offset += edge_count * 8
                index._adj[layer][slot, :edge_count] = row
                index._adj_counts[layer][slot] = edge_count
        if offset != len(payload):
            raise CorruptSnapshot("trailing bytes after last node record")
        index._n = count
        index._live = count - int(np.count_nonzero(index._dead[:count]))
        index._entry = int(entry)
        index._rng_calls = int(rng_calls)
        return index
