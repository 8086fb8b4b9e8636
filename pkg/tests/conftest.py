import json

import numpy as np
import pytest

from casegpt.config import ServiceConfig
from casegpt.corpus import CaseDocument, CaseStore
from casegpt.encoder import HashEncoder
from casegpt.engine import CaseEngine

DIM = 32


def unit_vectors(n: int, dim: int, seed: int) -> np.ndarray:
    """Seeded random unit vectors, duplicate-free with probability 1."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.asarray(v, dtype=np.float64)


_TOPICS = [
    ("cardiac", "I21.0", "medical",
     "Patient presented with chest pain and shortness of breath. Troponin was elevated on arrival. "
     "Emergency angiography showed occlusion of the left anterior descending artery. "
     "A drug eluting stent was placed without complication. Discharge followed an uneventful recovery."),
    ("stroke", "I63.9", "medical",
     "Sudden onset of right sided weakness and slurred speech. Imaging confirmed an ischemic stroke. "
     "Thrombolysis was administered within the treatment window. Rehabilitation restored most motor function. "
     "Anticoagulation was started for newly found atrial fibrillation."),
    ("contract", "contract.breach", "legal",
     "The supplier failed to deliver goods by the agreed date. The buyer claimed damages for breach of contract. "
     "The court examined the liquidated damages clause. Expectation damages were awarded to the buyer. "
     "The appeal upheld the original judgment in full."),
    ("negligence", "tort.negligence", "legal",
     "The defendant owed a duty of care to visitors on the premises. A wet floor was left without warning signs. "
     "The claimant slipped and sustained a fractured wrist. Liability was established under occupiers liability principles. "
     "Contributory negligence reduced the award by twenty percent."),
]


def make_docs(per_group: int = 5) -> list[CaseDocument]:
    """Deterministic corpus: len(_TOPICS) taxonomy groups of per_group docs."""
    docs = []
    i = 0
    for name, code, domain, body in _TOPICS:
        for j in range(per_group):
            docs.append(
                CaseDocument(
                    id=f"case-{i:03d}",
                    domain=domain,
                    title=f"{name} matter {j}",
                    body=f"{body} Additional note {name} {j} recorded for completeness.",
                    timestamp=__import__("datetime").date(2019 + (i % 6), (i % 12) + 1, 15),
                    jurisdiction="us.ca" if i % 2 else "us.ny",
                    citation_count=3 * i,
                    taxonomy_codes=[code],
                    outcome="resolved" if i % 3 else None,
                )
            )
            i += 1
    return docs


@pytest.fixture(scope="session")
def corpus_docs() -> list[CaseDocument]:
    return make_docs()


@pytest.fixture()
def store(corpus_docs) -> CaseStore:
    s = CaseStore(":memory:")
    for doc in corpus_docs:
        s.put(doc)
    yield s
    s.close()


@pytest.fixture(scope="session")
def hash_encoder() -> HashEncoder:
    return HashEncoder(dim=DIM)


def write_corpus_file(path, docs) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_record()) + "\n")
    return str(path)


@pytest.fixture()
def corpus_file(tmp_path, corpus_docs) -> str:
    return write_corpus_file(tmp_path / "corpus.jsonl", corpus_docs)


def base_config(**overrides) -> ServiceConfig:
    cfg = ServiceConfig()
    cfg.encoder.dim = DIM
    cfg.kernels = "numpy"
    cfg.hnsw.rng_seed = 7
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


@pytest.fixture()
def engine(corpus_docs):
    eng = CaseEngine(base_config())
    for doc in corpus_docs:
        eng.store.put(doc)
    eng.build_index()
    yield eng
    eng.close()
