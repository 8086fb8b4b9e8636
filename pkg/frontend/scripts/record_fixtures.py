#!/usr/bin/env python3
"""Record gateway responses into tests/fixtures/ for the console's test suite.

Every fixture is captured from the real HTTP app (request validation, route
handlers, and serialization included) over a deterministic corpus, so the
console's contract tests run against actual wire payloads rather than
hand-written approximations. The recorder verifies the property each fixture
exists to demonstrate (score order, report status, error envelope) and
refuses to write anything that does not exhibit it.

Run via ``npm run record:fixtures`` (the Python package must be installed).
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from casegpt.config import ServiceConfig
from casegpt.corpus import doc_from_dict
from casegpt.engine import CaseEngine
from casegpt.server import create_app

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
NOW = "2024-01-01"

# Deterministic corpus: six cardiac cases (three sharing heavy phrasing so
# diversification visibly reorders them), plus legal matter for domain mix.
CASES = [
    {
        "id": "card-001",
        "domain": "medical",
        "title": "Acute chest pain with ST elevation",
        "body": (
            "Patient arrived with crushing chest pain radiating to the left arm. "
            "Electrocardiogram showed ST elevation in the anterior leads. "
            "Emergency catheterization opened an occluded artery within ninety minutes. "
            "Aspirin and heparin were administered on arrival."
        ),
        "timestamp": "2023-06-15",
        "citation_count": 64,
        "taxonomy_codes": ["I21.0"],
        "outcome": "recovered",
    },
    {
        "id": "card-002",
        "domain": "medical",
        "title": "Chest pain triage in the emergency department",
        "body": (
            "Emergency department triage protocol for acute chest pain presentations. "
            "Electrocardiogram obtained within ten minutes of arrival. "
            "Serial troponin measurements ruled out myocardial infarction. "
            "The patient was discharged with outpatient follow up."
        ),
        "timestamp": "2022-11-02",
        "citation_count": 31,
        "taxonomy_codes": ["R07.9"],
        "outcome": "discharged",
    },
    {
        "id": "card-003",
        "domain": "medical",
        "title": "Chest pain triage with crushing presentation",
        "body": (
            "Emergency department triage protocol for acute chest pain presentations. "
            "Crushing chest pain radiating to the left arm prompted immediate workup. "
            "Serial troponin measurements confirmed myocardial injury. "
            "Admission to the cardiac unit followed."
        ),
        "timestamp": "2023-01-09",
        "citation_count": 12,
        "taxonomy_codes": ["I21.0"],
        "outcome": "admitted",
    },
    {
        "id": "card-004",
        "domain": "medical",
        "title": "Atypical chest pain in a young athlete",
        "body": (
            "A young athlete reported sharp chest pain during training. "
            "Imaging excluded structural heart disease. "
            "Symptoms resolved with rest and anti-inflammatory treatment. "
            "Return to play was cleared after two weeks."
        ),
        "timestamp": "2021-04-22",
        "citation_count": 5,
        "taxonomy_codes": ["R07.9"],
        "outcome": "resolved",
    },
    {
        "id": "card-005",
        "domain": "medical",
        "title": "Thrombolysis window in ischemic stroke",
        "body": (
            "Ischemic stroke confirmed by computed tomography. "
            "Thrombolysis was administered inside the treatment window. "
            "Neurological deficits improved within two days. "
            "Door to needle time was fifty minutes."
        ),
        "timestamp": "2022-07-01",
        "citation_count": 48,
        "taxonomy_codes": ["I63.9"],
        "outcome": "improved",
    },
    {
        "id": "card-006",
        "domain": "medical",
        "title": "Pericarditis mimicking infarction",
        "body": (
            "Chest pain worsened when lying flat and eased when sitting forward. "
            "Diffuse ST changes suggested pericarditis rather than infarction. "
            "Colchicine treatment led to full recovery. "
            "No catheterization was required."
        ),
        "timestamp": "2020-09-30",
        "citation_count": 19,
        "taxonomy_codes": ["I21.0"],
        "outcome": "recovered",
    },
    {
        "id": "law-001",
        "domain": "legal",
        "title": "Negligence standard for emergency physicians",
        "body": (
            "The court held that emergency physicians are judged by the standard "
            "of a reasonable specialist under like circumstances. "
            "Expert testimony established the applicable duty of care. "
            "Judgment was affirmed on appeal."
        ),
        "timestamp": "2020-11-05",
        "citation_count": 88,
        "taxonomy_codes": ["tort.negligence.medical"],
        "outcome": "affirmed",
    },
    {
        "id": "law-002",
        "domain": "legal",
        "title": "Informed consent documentation dispute",
        "body": (
            "The plaintiff alleged inadequate disclosure of surgical risks. "
            "Records showed a signed consent form covering the specific complication. "
            "Summary judgment was granted for the defendant hospital."
        ),
        "timestamp": "2019-06-30",
        "citation_count": 23,
        "taxonomy_codes": ["tort.consent"],
        "outcome": "dismissed",
    },
]

SEARCH_QUERY = "chest pain emergency"
INSIGHT_QUERY = "chest pain emergency treatment"

BASE_KNOBS = {
    "k": 8,
    "n": 5,
    "w_similarity": 0.7,
    "w_recency": 0.1,
    "w_citation": 0.1,
    "w_jurisdiction": 0.1,
    "now": NOW,
}


def build_engine(generation_script: list[str] | None = None) -> CaseEngine:
    config = ServiceConfig()
    config.encoder.dim = 64
    config.kernels = "numpy"
    config.hnsw.m = 8
    config.hnsw.ef_construction = 64
    config.hnsw.ef_search = 64
    config.hnsw.rng_seed = 11
    if generation_script is not None:
        config.generation.backend = "scripted"
        script_file = tempfile.NamedTemporaryFile(
            "w", suffix=".json", delete=False, encoding="utf-8"
        )
        json.dump(generation_script, script_file)
        script_file.close()
        config.generation.script_path = script_file.name
    engine = CaseEngine(config)
    for case in CASES:
        engine.add_case(doc_from_dict(dict(case)))
    return engine


def record(client: TestClient, method: str, route: str, payload=None) -> dict:
    if method == "GET":
        response = client.get(route)
    else:
        response = client.post(route, json=payload)
    return {
        "route": route,
        "method": method,
        "request_body": payload,
        "status": response.status_code,
        "response": response.json(),
    }


def check(condition: bool, label: str) -> None:
    if not condition:
        raise SystemExit(f"fixture property violated: {label}")


def main() -> int:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    engine = build_engine()
    client = TestClient(create_app(engine))

    stats = record(client, "GET", "/v1/stats")
    check(stats["status"] == 200, "stats responds 200")
    check("bounds" in stats["response"], "stats carries the bounds table")

    health = record(client, "GET", "/v1/health")
    check(health["status"] == 200, "health responds 200")

    relevance = record(
        client,
        "POST",
        "/v1/search",
        {"query": SEARCH_QUERY, "mmr_lambda": 1.0, **BASE_KNOBS},
    )
    rel_rows = relevance["response"]["results"]
    check(relevance["status"] == 200, "relevance search responds 200")
    check(len(rel_rows) == 5, "relevance search returns five rows")
    finals = [row["final_score"] for row in rel_rows]
    check(
        finals == sorted(finals, reverse=True),
        "relevance-only final scores descend",
    )
    check(
        all(row.get("title") and row.get("body") for row in rel_rows),
        "rows carry title and body",
    )

    diversified = record(
        client,
        "POST",
        "/v1/search",
        {"query": SEARCH_QUERY, "mmr_lambda": 0.3, **BASE_KNOBS},
    )
    div_rows = diversified["response"]["results"]
    check(diversified["status"] == 200, "diversified search responds 200")
    check(
        [r["id"] for r in div_rows] != [r["id"] for r in rel_rows],
        "diversification changes the row order",
    )
    div_finals = [row["final_score"] for row in div_rows]
    check(
        div_finals != sorted(div_finals, reverse=True),
        "diversified order is not plain score order (exercises as-received rendering)",
    )

    grounded = record(
        client,
        "POST",
        "/v1/insights",
        {"query": INSIGHT_QUERY, "mmr_lambda": 1.0, **BASE_KNOBS},
    )
    g_report = grounded["response"]
    check(grounded["status"] == 200, "grounded insight responds 200")
    check(g_report["status"] == "grounded", "extractive report is grounded")
    check(
        all(v["verified"] for v in g_report["claim_verdicts"]),
        "grounded report has only verified claims",
    )
    check(g_report["stripped_sentences"] == [], "grounded report strips nothing")
    check(len(g_report["retrieval"]) == 5, "insight carries its retrieval list")

    # Scripted backend: one verified verbatim claim plus one fabricated
    # citation, repeated for the refinement round, so the final report is
    # partially grounded with the fabricated sentence stripped.
    probe = engine.search(INSIGHT_QUERY, k=8, n=5, mmr_lambda=1.0)
    top = probe.results[0]
    top_doc = engine.store.get(top.id)
    lead = top_doc.body.split(". ")[0].strip()
    if not lead.endswith("."):
        lead += "."
    verified_claim = f"{lead[:-1]} [CASE:{top.id}]."
    fabricated_claim = "Checklists were redesigned after a consensus panel [CASE:bogus-42]."
    scripted_output = f"{verified_claim} {fabricated_claim}"
    partial_engine = build_engine([scripted_output, scripted_output, scripted_output])
    partial_client = TestClient(create_app(partial_engine))
    partial = record(
        partial_client,
        "POST",
        "/v1/insights",
        {"query": INSIGHT_QUERY, "mmr_lambda": 1.0, **BASE_KNOBS},
    )
    p_report = partial["response"]
    check(partial["status"] == 200, "partial insight responds 200")
    check(
        p_report["status"] == "partially_grounded",
        "scripted report is partially grounded",
    )
    check(
        len(p_report["stripped_sentences"]) > 0,
        "partial report lists stripped sentences",
    )
    check(
        any(not v["verified"] for v in p_report["claim_verdicts"]),
        "partial report flags the fabricated claim",
    )
    check(
        "bogus-42" not in p_report["citations"],
        "fabricated citation never reaches the citation list",
    )

    # A real 503: the gateway bounds concurrent insight generation, so a
    # second request while the only slot is held gets the unavailable
    # envelope. One blocked request on a thread holds the slot.
    import threading

    unavailable_engine = build_engine(None)
    unavailable_engine.config.server.max_concurrent_insights = 1
    unavailable_engine.config.server.request_timeout_s = 0.05
    release = threading.Event()
    inner_generate = unavailable_engine.generator.generate

    def blocking_generate(prompt: str, max_tokens: int, temperature: float) -> str:
        release.wait(timeout=10.0)
        return inner_generate(prompt, max_tokens, temperature)

    unavailable_engine.generator.generate = blocking_generate  # type: ignore[method-assign]
    unavailable_client = TestClient(
        create_app(unavailable_engine), raise_server_exceptions=False
    )
    holder = threading.Thread(
        target=lambda: unavailable_client.post(
            "/v1/insights", json={"query": INSIGHT_QUERY, **BASE_KNOBS}
        )
    )
    holder.start()
    import time

    time.sleep(0.3)  # let the holder reach the generation stage
    unavailable = record(
        unavailable_client,
        "POST",
        "/v1/insights",
        {"query": INSIGHT_QUERY, **BASE_KNOBS},
    )
    release.set()
    holder.join(timeout=10.0)
    check(unavailable["status"] == 503, "saturated insight slots respond 503")
    check(
        unavailable["response"]["error"]["code"] == "backend_unavailable",
        "503 carries the backend_unavailable code",
    )

    failed_engine = build_engine([])  # empty script: generation fails outright
    failed_client = TestClient(create_app(failed_engine))
    failed = record(
        failed_client,
        "POST",
        "/v1/insights",
        {"query": INSIGHT_QUERY, **BASE_KNOBS},
    )
    check(failed["status"] == 200, "failed generation still responds 200")
    check(failed["response"]["status"] == "failed", "report status is failed")
    check(bool(failed["response"]["failure_reason"]), "failure reason is present")
    check(
        len(failed["response"]["retrieval"]) == 5,
        "failed report keeps its retrieval list",
    )

    invalid = record(
        client,
        "POST",
        "/v1/search",
        {"query": SEARCH_QUERY, "k": 10_001},
    )
    check(invalid["status"] == 422, "out-of-bounds k responds 422")
    check(
        invalid["response"]["error"]["code"] == "invalid_params",
        "422 carries the invalid_params code",
    )

    fixtures = {
        "stats.json": stats,
        "health.json": health,
        "search_relevance.json": relevance,
        "search_diversified.json": diversified,
        "insight_grounded.json": grounded,
        "insight_partial.json": partial,
        "insight_failed.json": failed,
        "error_503.json": unavailable,
        "error_422.json": invalid,
    }
    for name, payload in fixtures.items():
        path = FIXTURE_DIR / name
        path.write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"wrote {path.relative_to(FIXTURE_DIR.parent.parent)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
