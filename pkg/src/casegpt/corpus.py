"""Case corpus: document model, record parsing, and the embedded store.

Corpus files are UTF-8 JSON lines, one case per line, with fields
``{id, domain, title, body, timestamp, jurisdiction?, citation_count,
taxonomy_codes[], outcome?}``. Unknown fields are ignored with a warning.

The store is a single SQLite file (or ``:memory:``) per corpus; writes are
serialized behind a lock, reads may come from any thread.
"""

from __future__ import annotations

import json
import logging
import re
import sqlite3
import threading
import unicodedata
from dataclasses import dataclass, field
from datetime import date
from typing import Callable, Iterator, Optional

from .errors import (
    CaseGptError,
    DuplicateId,
    InvalidCode,
    MalformedRecord,
    MissingField,
    NotFound,
    StorageFailure,
)

logger = logging.getLogger(__name__)

DOMAINS = ("medical", "legal")

# ICD-10-style: letter, two digits, optional ".digits" suffix (e.g. J18.9).
_ICD10_RE = re.compile(r"^[A-Z][0-9]{2}(\.[0-9]+)?$")
# Legal taxonomy: dot-separated non-empty path segments (e.g. crim.assault.aggravated).
_LEGAL_CODE_RE = re.compile(r"^[A-Za-z0-9_-]+(\.[A-Za-z0-9_-]+)*$")

_KNOWN_FIELDS = {
    "id",
    "domain",
    "title",
    "body",
    "timestamp",
    "jurisdiction",
    "citation_count",
    "taxonomy_codes",
    "outcome",
}

_WS_RE = re.compile(r"\s+")


def normalize_text(raw: str) -> str:
    """Canonicalize text: NFC unicode form, whitespace runs collapsed, trimmed.

    Casing is preserved (the reference encoder lowercases internally).
    Idempotent: ``normalize_text(normalize_text(x)) == normalize_text(x)``.
    """
    return _WS_RE.sub(" ", unicodedata.normalize("NFC", raw)).strip()


def valid_taxonomy_code(code: str, domain: str) -> bool:
    if domain == "medical":
        return bool(_ICD10_RE.match(code))
    return bool(_LEGAL_CODE_RE.match(code))


@dataclass
class CaseDocument:
    """One medical or legal case with its ranking metadata."""

    id: str
    domain: str
    title: str
    body: str
    timestamp: date
    jurisdiction: Optional[str] = None
    citation_count: int = 0
    taxonomy_codes: list[str] = field(default_factory=list)
    outcome: Optional[str] = None

    def validate(self) -> "CaseDocument":
        if not self.id:
            raise MissingField("id")
        if self.domain not in DOMAINS:
            raise MalformedRecord(f"unknown domain {self.domain!r}")
        if not self.body:
            raise MissingField("body")
        if self.citation_count < 0:
            raise MalformedRecord("citation_count must be >= 0")
        for code in self.taxonomy_codes:
            if not valid_taxonomy_code(code, self.domain):
                raise InvalidCode(f"invalid {self.domain} taxonomy code {code!r}")
        return self

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "domain": self.domain,
            "title": self.title,
            "body": self.body,
            "timestamp": self.timestamp.isoformat(),
            "citation_count": self.citation_count,
            "taxonomy_codes": list(self.taxonomy_codes),
        }
        if self.jurisdiction is not None:
            rec["jurisdiction"] = self.jurisdiction
        if self.outcome is not None:
            rec["outcome"] = self.outcome
        return rec


@dataclass
class CorpusStats:
    doc_count: int
    max_citation_count: int
    jurisdiction_set: set[str]
    domain_counts: dict[str, int]


def parse_case_record(line: str) -> CaseDocument:
    """Parse one corpus-file line into a validated :class:`CaseDocument`."""
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"not valid JSON: {exc}") from exc
    return doc_from_dict(raw)


def doc_from_dict(raw: object) -> CaseDocument:
    """Validate one decoded record (shared by file ingestion and the API).

    The body is normalized via :func:`normalize_text` before the non-empty
    check, so whitespace-only bodies are rejected. Unknown fields are ignored
    with a warning.
    """
    if not isinstance(raw, dict):
        raise MalformedRecord("record must be a JSON object")

    for unknown in sorted(set(raw) - _KNOWN_FIELDS):
        logger.warning("ignoring unknown corpus field %r", unknown)

    for required in ("id", "domain", "body"):
        if required not in raw or raw[required] in (None, ""):
            raise MissingField(required)

    ts_raw = raw.get("timestamp")
    if ts_raw is None:
        timestamp = date(1970, 1, 1)
    else:
        try:
            timestamp = date.fromisoformat(str(ts_raw)[:10])
        except ValueError as exc:
            raise MalformedRecord(f"bad timestamp {ts_raw!r}") from exc

    citation_raw = raw.get("citation_count", 0)
    if not isinstance(citation_raw, int) or isinstance(citation_raw, bool):
        raise MalformedRecord(f"citation_count must be an integer, got {citation_raw!r}")

    codes = raw.get("taxonomy_codes", [])
    if not isinstance(codes, list) or not all(isinstance(c, str) for c in codes):
        raise MalformedRecord("taxonomy_codes must be a list of strings")

    doc = CaseDocument(
        id=str(raw["id"]),
        domain=str(raw["domain"]),
        title=normalize_text(str(raw.get("title", ""))),
        body=normalize_text(str(raw["body"])),
        timestamp=timestamp,
        jurisdiction=(None if raw.get("jurisdiction") in (None, "") else str(raw["jurisdiction"])),
        citation_count=citation_raw,
        taxonomy_codes=[str(c) for c in codes],
        outcome=(None if raw.get("outcome") in (None, "") else str(raw["outcome"])),
    )
    return doc.validate()


_SCHEMA = """
CREATE TABLE IF NOT EXISTS cases (
    id              TEXT PRIMARY KEY,
    domain          TEXT NOT NULL,
    title           TEXT NOT NULL DEFAULT '',
    body            TEXT NOT NULL,
    timestamp       TEXT NOT NULL,
    jurisdiction    TEXT,
    citation_count  INTEGER NOT NULL DEFAULT 0,
    taxonomy_codes  TEXT NOT NULL DEFAULT '[]',
    outcome         TEXT,
    vector_stale    INTEGER NOT NULL DEFAULT 0
);
"""


class CaseStore:
    """Embedded document store over SQLite.

    Multi-reader/single-writer: every statement runs under an internal lock
    so one handle can be shared across request handlers. ``put`` marks the
    stored vector stale on upsert; the indexing pass clears the flag once
    the document is re-embedded.
    """

    def __init__(self, path: str = ":memory:"):
        self.path = path
        try:
            self._conn = sqlite3.connect(path, check_same_thread=False)
            if path != ":memory:":
                self._conn.execute("PRAGMA journal_mode=WAL")
            self._conn.executescript(_SCHEMA)
            self._conn.commit()
        except sqlite3.Error as exc:
            raise StorageFailure(f"cannot open store at {path!r}: {exc}") from exc
        self._lock = threading.RLock()
        self._stats_cache: CorpusStats | None = None

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    # -- write path --------------------------------------------------------

    def put(self, doc: CaseDocument, mode: str = "insert") -> None:
        """Store a validated document. ``insert`` rejects duplicate ids;
        ``upsert`` replaces the prior version and marks its vector stale."""
        if mode not in ("insert", "upsert"):
            raise ValueError(f"unknown put mode {mode!r}")
        doc.validate()
        row = (
            doc.id,
            doc.domain,
            doc.title,
            doc.body,
            doc.timestamp.isoformat(),
            doc.jurisdiction,
            doc.citation_count,
            json.dumps(doc.taxonomy_codes),
            doc.outcome,
        )
        with self._lock:
            try:
                exists = self._conn.execute(
                    "SELECT 1 FROM cases WHERE id = ?", (doc.id,)
                ).fetchone()
                if exists and mode == "insert":
                    raise DuplicateId(f"case id {doc.id!r} already stored")
                if exists:
                    self._conn.execute(
                        "UPDATE cases SET domain=?, title=?, body=?, timestamp=?, "
                        "jurisdiction=?, citation_count=?, taxonomy_codes=?, outcome=?, "
                        "vector_stale=1 WHERE id=?",
                        row[1:] + (doc.id,),
                    )
                else:
                    self._conn.execute(
                        "INSERT INTO cases (id, domain, title, body, timestamp, jurisdiction,"
                        " citation_count, taxonomy_codes, outcome, vector_stale)"
                        " VALUES (?,?,?,?,?,?,?,?,?,0)",
                        row,
                    )
                self._conn.commit()
                self._stats_cache = None
            except sqlite3.Error as exc:
                raise StorageFailure(str(exc)) from exc

    def ingest_file(
        self,
        path: str,
        mode: str = "insert",
        transform: Callable[[CaseDocument], CaseDocument] | None = None,
    ) -> int:
        """Load a JSONL corpus file. ``transform`` is the anonymization hook
        applied to each parsed document before storage (identity when None)."""
        count = 0
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    doc = parse_case_record(line)
                except CaseGptError as exc:
                    exc.args = (f"{path}:{lineno}: {exc}",)
                    raise
                if transform is not None:
                    doc = transform(doc).validate()
                self.put(doc, mode=mode)
                count += 1
        return count

    def mark_fresh(self, ids: list[str]) -> None:
        with self._lock:
            self._conn.executemany(
                "UPDATE cases SET vector_stale=0 WHERE id=?", [(i,) for i in ids]
            )
            self._conn.commit()

    # -- read path ---------------------------------------------------------

    def get(self, case_id: str) -> CaseDocument:
        with self._lock:
            row = self._conn.execute(
                "SELECT id, domain, title, body, timestamp, jurisdiction, citation_count,"
                " taxonomy_codes, outcome FROM cases WHERE id = ?",
                (case_id,),
            ).fetchone()
        if row is None:
            raise NotFound(f"no case with id {case_id!r}")
        return self._row_to_doc(row)

    def get_many(self, case_ids: list[str]) -> dict[str, CaseDocument]:
        return {cid: self.get(cid) for cid in case_ids}

    def list(
        self, domain: str | None = None, jurisdiction: str | None = None
    ) -> Iterator[CaseDocument]:
        """Stream documents in ascending id order, optionally filtered."""
        query = (
            "SELECT id, domain, title, body, timestamp, jurisdiction, citation_count,"
            " taxonomy_codes, outcome FROM cases"
        )
        clauses, args = [], []
        if domain is not None:
            clauses.append("domain = ?")
            args.append(domain)
        if jurisdiction is not None:
            clauses.append("jurisdiction = ?")
            args.append(jurisdiction)
        if clauses:
            query += " WHERE " + " AND ".join(clauses)
        query += " ORDER BY id ASC"
        with self._lock:
            rows = self._conn.execute(query, args).fetchall()
        for row in rows:
            yield self._row_to_doc(row)

    def ids(self) -> list[str]:
        with self._lock:
            return [r[0] for r in self._conn.execute("SELECT id FROM cases ORDER BY id")]

    def stale_ids(self) -> list[str]:
        with self._lock:
            return [
                r[0]
                for r in self._conn.execute(
                    "SELECT id FROM cases WHERE vector_stale=1 ORDER BY id"
                )
            ]

    def stats(self) -> CorpusStats:
        with self._lock:
            if self._stats_cache is not None:
                return self._stats_cache
            doc_count, max_cit = self._conn.execute(
                "SELECT COUNT(*), COALESCE(MAX(citation_count), 0) FROM cases"
            ).fetchone()
            jurisdictions = {
                r[0]
                for r in self._conn.execute(
                    "SELECT DISTINCT jurisdiction FROM cases WHERE jurisdiction IS NOT NULL"
                )
            }
            domain_counts = dict(
                self._conn.execute("SELECT domain, COUNT(*) FROM cases GROUP BY domain")
            )
        stats = CorpusStats(
            doc_count=doc_count,
            max_citation_count=max_cit,
            jurisdiction_set=jurisdictions,
            domain_counts=domain_counts,
        )
        with self._lock:
            self._stats_cache = stats
        return stats

    @staticmethod
    def _row_to_doc(row) -> CaseDocument:
        return CaseDocument(
            id=row[0],
            domain=row[1],
            title=row[2],
            body=row[3],
            timestamp=date.fromisoformat(row[4]),
            jurisdiction=row[5],
            citation_count=row[6],
            taxonomy_codes=json.loads(row[7]),
            outcome=row[8],
        )
