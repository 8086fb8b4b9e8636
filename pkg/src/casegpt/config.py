"""Service configuration: defaults, YAML file, and environment overrides.

Precedence (highest wins): ``CASEGPT_*`` environment variables, then the
config file, then built-in defaults. Env variable names follow
``CASEGPT_<SECTION>_<KEY>`` (e.g. ``CASEGPT_RETRIEVAL_K=50``,
``CASEGPT_HNSW_EF_SEARCH=200``); values are parsed as YAML scalars so
numbers and booleans come through typed. ``CASEGPT_KERNELS`` selects the
kernel implementation (see :mod:`casegpt.kernels`).

Unknown file keys raise :class:`ConfigError` — config typos should fail
loudly, not silently fall back to defaults.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from typing import Any, Mapping

import yaml

from .errors import ConfigError
from .hnsw import HnswParams
from .insights import InsightOptions
from .ranking import RerankWeights, RetrievalOptions

ENV_PREFIX = "CASEGPT_"


@dataclass
class EncoderConfig:
    backend: str = "hash"  # hash | remote
    dim: int = 768
    endpoint: str = ""
    model: str = ""
    auth_token: str = ""
    timeout_s: float = 30.0
    max_retries: int = 3
    max_in_flight: int = 4
    batch_size: int = 64


@dataclass
class GenerationConfig:
    backend: str = "extractive"  # extractive | scripted | remote
    endpoint: str = ""
    model: str = ""
    auth_token: str = ""
    timeout_s: float = 60.0
    max_retries: int = 2
    script_path: str = ""


@dataclass
class HnswConfig:
    m: int = 16
    m0: int | None = None
    ef_construction: int = 200
    ef_search: int = 100
    ml: float | None = None
    rng_seed: int = 0x5EED_CA5E
    use_heuristic: bool = False

    def to_params(self) -> HnswParams:
        return HnswParams(
            m=self.m,
            m0=self.m0,
            ef_construction=self.ef_construction,
            ef_search=self.ef_search,
            ml=self.ml,
            rng_seed=self.rng_seed,
            use_heuristic=self.use_heuristic,
        ).validate()


@dataclass
class RetrievalConfig:
    k: int = 100
    n: int = 10
    mmr_lambda: float = 0.7
    w_similarity: float = 0.7
    w_recency: float = 0.1
    w_citation: float = 0.1
    w_jurisdiction: float = 0.1
    half_life_days: float = 1825.0
    jurisdiction: str | None = None

    def to_options(self, **overrides: Any) -> RetrievalOptions:
        base = {
            "k": self.k,
            "n": self.n,
            "mmr_lambda": self.mmr_lambda,
            "weights": RerankWeights(
                similarity=self.w_similarity,
                recency=self.w_recency,
                citation=self.w_citation,
                jurisdiction=self.w_jurisdiction,
                half_life_days=self.half_life_days,
            ),
            "query_jurisdiction": self.jurisdiction,
        }
        base.update({k: v for k, v in overrides.items() if v is not None})
        return RetrievalOptions(**base).validate()


@dataclass
class InsightConfig:
    threshold: float = 0.2
    max_rounds: int = 2
    token_budget: int = 2048
    tau: float = 0.5
    expansion_terms: int = 5
    template: str = "default"
    max_tokens: int = 512
    temperature: float = 0.0

    def to_options(self, **overrides: Any) -> InsightOptions:
        base = {
            "threshold": self.threshold,
            "max_rounds": self.max_rounds,
            "token_budget": self.token_budget,
            "tau": self.tau,
            "expansion_terms": self.expansion_terms,
            "template": self.template,
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
        }
        base.update({k: v for k, v in overrides.items() if v is not None})
        return InsightOptions(**base).validate()


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    request_timeout_s: float = 30.0
    max_concurrent_insights: int = 4


@dataclass
class ServiceConfig:
    store_path: str = ":memory:"
    corpus_path: str = ""
    index_path: str = ""
    kernels: str = "auto"
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    hnsw: HnswConfig = field(default_factory=HnswConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    insight: InsightConfig = field(default_factory=InsightConfig)
    server: ServerConfig = field(default_factory=ServerConfig)


_SECTIONS = {
    "encoder": EncoderConfig,
    "generation": GenerationConfig,
    "hnsw": HnswConfig,
    "retrieval": RetrievalConfig,
    "insight": InsightConfig,
    "server": ServerConfig,
}
_TOP_KEYS = {"store_path", "corpus_path", "index_path", "kernels"}


def _coerce(value: Any, annotation: Any, where: str) -> Any:
    """Light type normalization with loud failures for obvious mismatches."""
    if value is None:
        return None
    origin = str(annotation)
    try:
        if "int" in origin and not isinstance(value, bool):
            return int(value)
        if "float" in origin:
            return float(value)
        if "bool" in origin:
            if isinstance(value, bool):
                return value
            raise ValueError(f"expected boolean, got {value!r}")
        if "str" in origin:
            return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {where}: {exc}") from exc
    return value


def _apply_section(section_obj: Any, values: dict, section_name: str) -> None:
    known = {f.name: f for f in fields(section_obj)}
    for key, value in values.items():
        if key not in known:
            raise ConfigError(f"unknown config key {section_name}.{key}")
        setattr(section_obj, key, _coerce(value, known[key].type, f"{section_name}.{key}"))


def load_config(path: str | None = None, env: Mapping | None = None) -> ServiceConfig:
    """Build the effective configuration from defaults, file, and env."""
    config = ServiceConfig()

    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path!r} is not valid YAML: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path!r} must hold a mapping")
        for key, value in raw.items():
            if key in _SECTIONS:
                if not isinstance(value, dict):
                    raise ConfigError(f"config section {key!r} must be a mapping")
                _apply_section(getattr(config, key), value, key)
            elif key in _TOP_KEYS:
                setattr(config, key, _coerce(value, "str", key))
            else:
                raise ConfigError(f"unknown config key {key!r}")

    environ = dict(env if env is not None else os.environ)
    for name, raw_value in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        value = yaml.safe_load(raw_value) if raw_value != "" else ""
        remainder = name[len(ENV_PREFIX) :].lower()
        if remainder in _TOP_KEYS:
            setattr(config, remainder, _coerce(value, "str", name))
            continue
        section_name, _, key = remainder.partition("_")
        if section_name in _SECTIONS:
            section_obj = getattr(config, section_name)
            known = {f.name: f for f in fields(section_obj)}
            if key in known:
                setattr(
                    section_obj, key, _coerce(value, known[key].type, name)
                )
                continue
        # Multi-word top-level keys (e.g. CASEGPT_STORE_PATH) land here too.
        raise ConfigError(f"unrecognized environment override {name}")
    return config
