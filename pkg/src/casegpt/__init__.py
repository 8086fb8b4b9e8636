"""Case-based retrieval with grounded insight generation.

The package stores case documents, embeds them with a pluggable encoder,
indexes the vectors in a layered proximity graph for approximate
nearest-neighbor search, re-ranks candidates with metadata-aware scoring and
diversity selection, and assembles weighted case context for a generation
backend whose output is verified sentence-by-sentence against the retrieved
cases. A CLI and an HTTP API expose the same engine.
"""

__version__ = "0.1.0"

from .config import ServiceConfig, load_config
from .corpus import CaseDocument, CaseStore, CorpusStats
from .encoder import HashEncoder, RemoteEncoder
from .engine import CaseEngine
from .errors import CaseGptError
from .evalkit import BenchmarkReport, Judgment, JudgmentSet
from .generation import ExtractiveBackend, RemoteGenerator, ScriptedBackend
from .hnsw import HnswIndex, HnswParams, Neighbor
from .insights import InsightOptions, InsightReport
from .ranking import RankedResult, RerankWeights, RetrievalOptions, RetrievalOutcome

__all__ = [
    "__version__",
    "BenchmarkReport",
    "CaseDocument",
    "CaseEngine",
    "CaseGptError",
    "CaseStore",
    "CorpusStats",
    "ExtractiveBackend",
    "HashEncoder",
    "HnswIndex",
    "HnswParams",
    "InsightOptions",
    "InsightReport",
    "Judgment",
    "JudgmentSet",
    "Neighbor",
    "RankedResult",
    "RemoteEncoder",
    "RemoteGenerator",
    "RerankWeights",
    "RetrievalOptions",
    "RetrievalOutcome",
    "ScriptedBackend",
    "ServiceConfig",
    "load_config",
]
