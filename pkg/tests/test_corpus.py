import json
from datetime import date

import pytest

from casegpt.corpus import (
    CaseDocument,
    CaseStore,
    doc_from_dict,
    normalize_text,
    parse_case_record,
    valid_taxonomy_code,
)
from casegpt.errors import (
    DuplicateId,
    InvalidCode,
    MalformedRecord,
    MissingField,
    NotFound,
)


class TestNormalizeText:
    def test_whitespace_collapse(self):
        assert normalize_text("  chest   pain\n") == "chest pain"

    def test_unicode_composition(self):
        decomposed = "Déjà vu"
        assert normalize_text(decomposed) == "Déjà vu"

    def test_idempotence(self):
        assert normalize_text("abc") == "abc"
        assert normalize_text(normalize_text("  a \t b ")) == normalize_text("  a \t b ")

    def test_casing_preserved(self):
        assert normalize_text("Chest PAIN") == "Chest PAIN"


class TestTaxonomyCodes:
    @pytest.mark.parametrize("code", ["J18.9", "I21.0", "A00", "Z99.881"])
    def test_valid_medical(self, code):
        assert valid_taxonomy_code(code, "medical")

    @pytest.mark.parametrize("code", ["XYZ", "18.9", "j18.9", "J1", "J18.", ""])
    def test_invalid_medical(self, code):
        assert not valid_taxonomy_code(code, "medical")

    @pytest.mark.parametrize("code", ["contract.breach", "tort", "ip.patent.infringe", "s-230"])
    def test_valid_legal(self, code):
        assert valid_taxonomy_code(code, "legal")

    @pytest.mark.parametrize("code", ["", ".", "a..b", "a.", ".a", "a b"])
    def test_invalid_legal(self, code):
        assert not valid_taxonomy_code(code, "legal")


class TestParseCaseRecord:
    def test_round_trip_fixture(self):
        line = json.dumps(
            {
                "id": "m-001",
                "domain": "medical",
                "body": "fever and cough",
                "taxonomy_codes": ["J18.9"],
            }
        )
        doc = parse_case_record(line)
        assert doc.id == "m-001"
        assert doc.domain == "medical"
        assert doc.body == "fever and cough"
        assert doc.taxonomy_codes == ["J18.9"]

    def test_missing_id(self):
        with pytest.raises(MissingField):
            parse_case_record(json.dumps({"domain": "medical", "body": "x"}))

    def test_missing_body(self):
        with pytest.raises(MissingField):
            parse_case_record(json.dumps({"id": "a", "domain": "medical"}))

    def test_missing_domain(self):
        with pytest.raises(MissingField):
            parse_case_record(json.dumps({"id": "a", "body": "x"}))

    def test_invalid_medical_code(self):
        with pytest.raises(InvalidCode):
            parse_case_record(
                json.dumps(
                    {"id": "a", "domain": "medical", "body": "x", "taxonomy_codes": ["XYZ"]}
                )
            )

    def test_unparseable_line(self):
        with pytest.raises(MalformedRecord):
            parse_case_record("{not json")

    def test_non_object_line(self):
        with pytest.raises(MalformedRecord):
            parse_case_record("[1, 2]")

    def test_body_normalized(self):
        doc = parse_case_record(
            json.dumps({"id": "a", "domain": "legal", "body": "  two   words \n"})
        )
        assert doc.body == "two words"

    def test_timestamp_parsed(self):
        doc = parse_case_record(
            json.dumps(
                {"id": "a", "domain": "legal", "body": "x", "timestamp": "2021-06-30"}
            )
        )
        assert doc.timestamp == date(2021, 6, 30)

    def test_timestamp_default_epoch(self):
        doc = parse_case_record(json.dumps({"id": "a", "domain": "legal", "body": "x"}))
        assert doc.timestamp == date(1970, 1, 1)

    def test_bad_timestamp(self):
        with pytest.raises(MalformedRecord):
            parse_case_record(
                json.dumps(
                    {"id": "a", "domain": "legal", "body": "x", "timestamp": "junk"}
                )
            )

    def test_bool_citation_count_rejected(self):
        with pytest.raises(MalformedRecord):
            parse_case_record(
                json.dumps(
                    {"id": "a", "domain": "legal", "body": "x", "citation_count": True}
                )
            )

    def test_negative_citation_count_rejected(self):
        with pytest.raises(MalformedRecord):
            parse_case_record(
                json.dumps(
                    {"id": "a", "domain": "legal", "body": "x", "citation_count": -3}
                )
            )

    def test_unknown_field_ignored(self):
        doc = parse_case_record(
            json.dumps({"id": "a", "domain": "legal", "body": "x", "extra": 1})
        )
        assert doc.id == "a"

    def test_unknown_domain_rejected(self):
        with pytest.raises(MalformedRecord):
            doc_from_dict({"id": "a", "domain": "astrology", "body": "x"})


class TestCaseStore:
    def test_put_and_get_round_trip(self, corpus_docs):
        s = CaseStore(":memory:")
        s.put(corpus_docs[0])
        got = s.get(corpus_docs[0].id)
        assert got == corpus_docs[0]
        s.close()

    def test_insert_duplicate_rejected(self, corpus_docs):
        s = CaseStore(":memory:")
        s.put(corpus_docs[0])
        with pytest.raises(DuplicateId):
            s.put(corpus_docs[0], mode="insert")
        s.close()

    def test_upsert_replaces(self, corpus_docs):
        s = CaseStore(":memory:")
        doc = corpus_docs[0]
        s.put(doc)
        updated = CaseDocument(
            id=doc.id,
            domain=doc.domain,
            title="new title",
            body="replacement body",
            timestamp=doc.timestamp,
            jurisdiction=doc.jurisdiction,
            citation_count=doc.citation_count + 1,
            taxonomy_codes=list(doc.taxonomy_codes),
            outcome=doc.outcome,
        )
        s.put(updated, mode="upsert")
        assert s.get(doc.id).body == "replacement body"
        assert s.stats().doc_count == 1
        s.close()

    def test_upsert_marks_vector_stale(self, corpus_docs):
        s = CaseStore(":memory:")
        doc = corpus_docs[0]
        s.put(doc)
        s.mark_fresh([doc.id])
        assert s.stale_ids() == []
        s.put(doc, mode="upsert")
        assert s.stale_ids() == [doc.id]
        s.close()

    def test_get_absent(self, store):
        with pytest.raises(NotFound):
            store.get("absent")

    def test_list_domain_filter_sorted(self, store, corpus_docs):
        legal = list(store.list(domain="legal"))
        assert legal
        assert all(d.domain == "legal" for d in legal)
        assert [d.id for d in legal] == sorted(d.id for d in legal)
        expected = {d.id for d in corpus_docs if d.domain == "legal"}
        assert {d.id for d in legal} == expected

    def test_list_jurisdiction_filter(self, store, corpus_docs):
        ca = list(store.list(jurisdiction="us.ca"))
        expected = {d.id for d in corpus_docs if d.jurisdiction == "us.ca"}
        assert {d.id for d in ca} == expected

    def test_stats_consistency_full_scan(self, store, corpus_docs):
        stats = store.stats()
        assert stats.doc_count == len({d.id for d in corpus_docs})
        assert stats.max_citation_count == max(d.citation_count for d in corpus_docs)
        assert stats.jurisdiction_set == {d.jurisdiction for d in corpus_docs if d.jurisdiction}
        for domain in {d.domain for d in corpus_docs}:
            assert stats.domain_counts[domain] == sum(
                1 for d in corpus_docs if d.domain == domain
            )

    def test_stats_cache_invalidated_by_put(self, corpus_docs):
        s = CaseStore(":memory:")
        s.put(corpus_docs[0])
        assert s.stats().doc_count == 1
        s.put(corpus_docs[1])
        assert s.stats().doc_count == 2
        s.close()

    def test_get_many_returns_all_requested(self, store, corpus_docs):
        ids = [corpus_docs[3].id, corpus_docs[0].id]
        got = store.get_many(ids)
        assert set(got) == set(ids)
        assert all(got[i].id == i for i in ids)
        with pytest.raises(NotFound):
            store.get_many([corpus_docs[0].id, "absent"])

    def test_file_backed_persistence(self, tmp_path, corpus_docs):
        path = str(tmp_path / "cases.db")
        s = CaseStore(path)
        s.put(corpus_docs[0])
        s.close()
        s2 = CaseStore(path)
        assert s2.get(corpus_docs[0].id) == corpus_docs[0]
        s2.close()


class TestIngestFile:
    def test_ingest_counts(self, tmp_path, corpus_docs, corpus_file):
        s = CaseStore(":memory:")
        n = s.ingest_file(corpus_file)
        assert n == len(corpus_docs)
        assert s.stats().doc_count == len(corpus_docs)
        s.close()

    def test_error_carries_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(
            json.dumps({"id": "a", "domain": "legal", "body": "x"})
            + "\n{broken\n"
        )
        s = CaseStore(":memory:")
        with pytest.raises(MalformedRecord) as err:
            s.ingest_file(str(path))
        assert ":2:" in str(err.value)
        s.close()

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "gaps.jsonl"
        path.write_text(
            "\n" + json.dumps({"id": "a", "domain": "legal", "body": "x"}) + "\n\n"
        )
        s = CaseStore(":memory:")
        assert s.ingest_file(str(path)) == 1
        s.close()

    def test_transform_hook_applied(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(json.dumps({"id": "a", "domain": "legal", "body": "secret name"}) + "\n")

        def redact(doc):
            return CaseDocument(
                id=doc.id,
                domain=doc.domain,
                title=doc.title,
                body=doc.body.replace("secret", "[redacted]"),
                timestamp=doc.timestamp,
                jurisdiction=doc.jurisdiction,
                citation_count=doc.citation_count,
                taxonomy_codes=list(doc.taxonomy_codes),
                outcome=doc.outcome,
            )

        s = CaseStore(":memory:")
        s.ingest_file(str(path), transform=redact)
        assert s.get("a").body == "[redacted] name"
        s.close()


def test_record_round_trip_field_identity(corpus_docs):
    for doc in corpus_docs:
        again = parse_case_record(json.dumps(doc.to_record()))
        assert again == doc
