import numpy as np
import pytest

from casegpt.errors import ConfigError
from casegpt.kernels import (
    NUMBA_AVAILABLE,
    KernelSet,
    available_kernel_names,
    get_kernels,
)
from conftest import unit_vectors


def random_graph(n, dim, degree, seed):
    """Seeded random regular-ish adjacency over duplicate-free unit vectors."""
    rng = np.random.default_rng(seed)
    vectors = unit_vectors(n, dim, seed)
    adj = np.full((n, degree), -1, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    for i in range(n):
        others = [j for j in rng.permutation(n)[: degree + 1] if j != i][:degree]
        adj[i, : len(others)] = others
        counts[i] = len(others)
    return vectors, adj, counts


def run_search(kernels: KernelSet, vectors, adj, counts, query, entry, ef):
    entry_sim = float(vectors[entry] @ query)
    slots, sims = kernels.search_layer(vectors, adj, counts, query, entry, entry_sim, ef)
    order = sorted(range(len(slots)), key=lambda i: (-sims[i], slots[i]))
    return [(int(slots[i]), float(sims[i])) for i in order]


class TestResolution:
    def test_available_names(self):
        names = available_kernel_names()
        assert "numpy" in names
        if NUMBA_AVAILABLE:
            assert "numba" in names

    def test_explicit_numpy(self):
        assert get_kernels("numpy").name == "numpy"

    def test_auto_prefers_numba_when_available(self):
        k = get_kernels("auto")
        assert k.name == ("numba" if NUMBA_AVAILABLE else "numpy")

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("CASEGPT_KERNELS", "numpy")
        assert get_kernels().name == "numpy"

    def test_unknown_name_rejected(self):
        with pytest.raises(ConfigError):
            get_kernels("cuda")

    def test_unknown_env_rejected(self, monkeypatch):
        monkeypatch.setenv("CASEGPT_KERNELS", "gpu")
        with pytest.raises(ConfigError):
            get_kernels()

    def test_warmup_runs(self):
        get_kernels("numpy").warmup()
        if NUMBA_AVAILABLE:
            get_kernels("numba").warmup()


class TestNumpyPath:
    def test_search_layer_returns_ef_bounded(self):
        vectors, adj, counts = random_graph(60, 8, 6, seed=3)
        query = unit_vectors(1, 8, 99)[0]
        out = run_search(get_kernels("numpy"), vectors, adj, counts, query, 0, ef=10)
        assert 1 <= len(out) <= 10
        sims = [s for _, s in out]
        assert sims == sorted(sims, reverse=True)

    def test_closest_descends_to_local_optimum(self):
        vectors, adj, counts = random_graph(40, 8, 8, seed=4)
        query = unit_vectors(1, 8, 17)[0]
        kernels = get_kernels("numpy")
        slot, sim = kernels.closest(vectors, adj, counts, query, 0, float(vectors[0] @ query))
        neigh = adj[slot, : counts[slot]]
        neigh_sims = vectors[neigh] @ query
        assert sim >= float(neigh_sims.max()) - 1e-12

    def test_deterministic_repeat(self):
        vectors, adj, counts = random_graph(80, 16, 6, seed=5)
        query = unit_vectors(1, 16, 23)[0]
        k = get_kernels("numpy")
        a = run_search(k, vectors, adj, counts, query, 0, ef=16)
        b = run_search(k, vectors, adj, counts, query, 0, ef=16)
        assert a == b


@pytest.mark.skipif(not NUMBA_AVAILABLE, reason="numba not importable")
class TestCrossPathAgreement:
    def test_search_layer_identical_on_duplicate_free_data(self):
        nb, np_ = get_kernels("numba"), get_kernels("numpy")
        nb.warmup(dim=16)
        for seed in range(5):
            vectors, adj, counts = random_graph(120, 16, 8, seed=seed)
            for qseed in range(4):
                query = unit_vectors(1, 16, 1000 + qseed)[0]
                for entry in (0, 7):
                    for ef in (4, 16, 50):
                        a = run_search(nb, vectors, adj, counts, query, entry, ef)
                        b = run_search(np_, vectors, adj, counts, query, entry, ef)
                        assert [s for s, _ in a] == [s for s, _ in b]
                        assert np.allclose(
                            [x for _, x in a], [x for _, x in b], atol=1e-12
                        )

    def test_closest_identical(self):
        nb, np_ = get_kernels("numba"), get_kernels("numpy")
        nb.warmup(dim=8)
        for seed in range(5):
            vectors, adj, counts = random_graph(60, 8, 6, seed=40 + seed)
            query = unit_vectors(1, 8, 2000 + seed)[0]
            entry_sim = float(vectors[0] @ query)
            sa, va = nb.closest(vectors, adj, counts, query, 0, entry_sim)
            sb, vb = np_.closest(vectors, adj, counts, query, 0, entry_sim)
            assert sa == sb
            assert abs(va - vb) <= 1e-12
