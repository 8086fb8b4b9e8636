"""Exception hierarchy shared across the engine.

Every error carries a stable machine-readable ``code`` used for CLI exit
codes and HTTP error bodies.
"""

from __future__ import annotations


class CaseGptError(Exception):
    """Base class for all engine errors."""

    code = "internal_error"


class ConfigError(CaseGptError):
    code = "config_error"


class InvalidParams(CaseGptError):
    """A knob is outside its documented range (lambda, weights, k/n, ...)."""

    code = "invalid_params"


# --- corpus ---------------------------------------------------------------

class CorpusError(CaseGptError):
    code = "corpus_error"


class MalformedRecord(CorpusError):
    code = "malformed_record"


class MissingField(CorpusError):
    code = "missing_field"

    def __init__(self, field: str):
        super().__init__(f"required field missing: {field!r}")
        self.field = field


class InvalidCode(CorpusError):
    code = "invalid_code"


class DuplicateId(CorpusError):
    code = "duplicate_id"


class NotFound(CorpusError):
    code = "not_found"


class StorageFailure(CorpusError):
    code = "storage_failure"


# --- encoder --------------------------------------------------------------

class EncoderError(CaseGptError):
    code = "encoder_error"


class EmptyText(EncoderError):
    code = "empty_text"


class ZeroVector(EncoderError):
    code = "zero_vector"


class DimensionMismatch(EncoderError):
    code = "dimension_mismatch"


class BackendUnavailable(CaseGptError):
    """A remote encoding or generation backend failed or timed out."""

    code = "backend_unavailable"


# --- ann index ------------------------------------------------------------

class AnnIndexError(CaseGptError):
    code = "index_error"


class EmptyIndex(AnnIndexError):
    code = "empty_index"


class NotNormalized(AnnIndexError):
    code = "not_normalized"


class SnapshotError(AnnIndexError):
    code = "snapshot_error"


class IoFailure(SnapshotError):
    code = "io_failure"


class CorruptSnapshot(SnapshotError):
    code = "corrupt_snapshot"


class VersionMismatch(SnapshotError):
    code = "version_mismatch"


# --- ranking / insights ---------------------------------------------------

class MissingMetadata(CaseGptError):
    code = "missing_metadata"


class NoCases(CaseGptError):
    code = "no_cases"


class BudgetTooSmall(CaseGptError):
    code = "budget_too_small"


class UnknownTemplate(CaseGptError):
    code = "unknown_template"


# --- evaluation -----------------------------------------------------------

class EvalError(CaseGptError):
    code = "eval_error"


class EmptyJudgment(EvalError):
    code = "empty_judgment"


class EmptyQuerySet(EvalError):
    code = "empty_query_set"


class InsufficientCorpus(EvalError):
    code = "insufficient_corpus"
