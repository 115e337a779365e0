"""Pipeline configuration: one JSON document holding paths, the encoder
ensemble, the LLM endpoint, and every tunable threshold with its default."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .encoders import EncoderSpec

DEFAULT_MIN_SIM = 0.5
DEFAULT_MIN_DOCS = 2
DEFAULT_BIN_EDGES = (0.5, 0.6, 0.7)
DEFAULT_QUERY_BUDGET = 80
DEFAULT_ANNOTATION_PAIR_CAP = 1000


class ConfigError(Exception):
    """Raised when a configuration file fails validation."""


@dataclass
class LlmSettings:
    """LLM access; kind 'mock' runs the offline scripted client."""

    kind: str = "mock"
    endpoint: str | None = None
    model: str = "mock"
    temperature: float = 0.0
    seed: int | None = None
    api_key_env: str | None = None
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "http"):
            raise ConfigError(f"llm.kind must be 'mock' or 'http', got {self.kind!r}")
        if self.kind == "http" and not self.endpoint:
            raise ConfigError("llm.kind 'http' requires llm.endpoint")


@dataclass
class Thresholds:
    min_sim: float = DEFAULT_MIN_SIM
    min_docs: int = DEFAULT_MIN_DOCS
    bin_edges: tuple[float, float, float] = DEFAULT_BIN_EDGES

    def __post_init__(self) -> None:
        low, mid, high = self.bin_edges
        if not (0.0 <= low < mid < high <= 1.0):
            raise ConfigError(f"bin_edges must be increasing within [0, 1], got {self.bin_edges}")
        if not 0.0 <= self.min_sim <= 1.0:
            raise ConfigError(f"min_sim must be within [0, 1], got {self.min_sim}")
        if self.min_sim < low:
            raise ConfigError("min_sim below the lowest bin edge would retrieve unbinnable records")
        if self.min_docs < 1:
            raise ConfigError("min_docs must be >= 1")


@dataclass
class PipelineConfig:
    corpus_path: Path
    output_dir: Path
    encoders: list[EncoderSpec]
    llm: LlmSettings = field(default_factory=LlmSettings)
    thresholds: Thresholds = field(default_factory=Thresholds)
    query_budget_per_source: int = DEFAULT_QUERY_BUDGET
    rng_seed: int = 7
    min_query_doc_chars: int = 100
    long_doc_threshold: int = 300
    multi_query_count: int = 2
    annotation_pair_cap: int = DEFAULT_ANNOTATION_PAIR_CAP
    alpha_level: str = "ordinal"
    templates_dir: Path | None = None

    def __post_init__(self) -> None:
        if not self.encoders:
            raise ConfigError("at least one encoder must be configured")
        names = [e.name for e in self.encoders]
        if len(names) != len(set(names)):
            raise ConfigError(f"encoder names must be unique, got {names}")
        if self.query_budget_per_source < 1:
            raise ConfigError("query_budget_per_source must be >= 1")
        if self.alpha_level not in ("nominal", "ordinal", "interval"):
            raise ConfigError(f"alpha_level {self.alpha_level!r} unknown")

    def validate_paths(self) -> None:
        if not self.corpus_path.exists():
            raise ConfigError(f"corpus file not found: {self.corpus_path}")
        if self.templates_dir is not None and not self.templates_dir.is_dir():
            raise ConfigError(f"templates dir not found: {self.templates_dir}")

    def snapshot(self) -> dict:
        """JSON-serializable copy for the run manifest."""
        return {
            "corpus_path": str(self.corpus_path),
            "output_dir": str(self.output_dir),
            "encoders": [
                {
                    "name": e.name,
                    "dimension": e.dimension,
                    "max_input_chars": e.max_input_chars,
                    "endpoint": e.endpoint,
                    "batch_size": e.batch_size,
                }
                for e in self.encoders
            ],
            "llm": {
                "kind": self.llm.kind,
                "endpoint": self.llm.endpoint,
                "model": self.llm.model,
                "temperature": self.llm.temperature,
                "seed": self.llm.seed,
            },
            "thresholds": {
                "min_sim": self.thresholds.min_sim,
                "min_docs": self.thresholds.min_docs,
                "bin_edges": list(self.thresholds.bin_edges),
            },
            "query_budget_per_source": self.query_budget_per_source,
            "rng_seed": self.rng_seed,
            "min_query_doc_chars": self.min_query_doc_chars,
            "long_doc_threshold": self.long_doc_threshold,
            "multi_query_count": self.multi_query_count,
            "annotation_pair_cap": self.annotation_pair_cap,
            "alpha_level": self.alpha_level,
        }


def _encoder_from_dict(raw: dict, position: int) -> EncoderSpec:
    endpoint = raw.get("endpoint")
    if endpoint == "mock":
        endpoint = None
    try:
        return EncoderSpec(
            name=raw["name"],
            dimension=int(raw["dimension"]),
            max_input_chars=int(raw.get("max_input_chars", 8192)),
            endpoint=endpoint,
            api_key_env=raw.get("api_key_env"),
            batch_size=int(raw.get("batch_size", 64)),
            max_concurrency=int(raw.get("max_concurrency", 4)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"encoders[{position}]: {exc}") from exc


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    for key in ("corpus_path", "output_dir", "encoders"):
        if key not in raw:
            raise ConfigError(f"config missing required key {key!r}")

    base = path.parent
    thresholds_raw = raw.get("thresholds", {})
    thresholds = Thresholds(
        min_sim=float(thresholds_raw.get("min_sim", DEFAULT_MIN_SIM)),
        min_docs=int(thresholds_raw.get("min_docs", DEFAULT_MIN_DOCS)),
        bin_edges=tuple(thresholds_raw.get("bin_edges", DEFAULT_BIN_EDGES)),
    )
    llm_raw = raw.get("llm", {})
    llm = LlmSettings(
        kind=llm_raw.get("kind", "mock"),
        endpoint=llm_raw.get("endpoint"),
        model=llm_raw.get("model", "mock"),
        temperature=float(llm_raw.get("temperature", 0.0)),
        seed=llm_raw.get("seed"),
        api_key_env=llm_raw.get("api_key_env"),
        max_in_flight=int(llm_raw.get("max_in_flight", 4)),
    )
    templates_dir = raw.get("templates_dir")
    return PipelineConfig(
        corpus_path=(base / raw["corpus_path"]).resolve(),
        output_dir=(base / raw["output_dir"]).resolve(),
        encoders=[_encoder_from_dict(e, i) for i, e in enumerate(raw["encoders"])],
        llm=llm,
        thresholds=thresholds,
        query_budget_per_source=int(raw.get("query_budget_per_source", DEFAULT_QUERY_BUDGET)),
        rng_seed=int(raw.get("rng_seed", 7)),
        min_query_doc_chars=int(raw.get("min_query_doc_chars", 100)),
        long_doc_threshold=int(raw.get("long_doc_threshold", 300)),
        multi_query_count=int(raw.get("multi_query_count", 2)),
        annotation_pair_cap=int(raw.get("annotation_pair_cap", DEFAULT_ANNOTATION_PAIR_CAP)),
        alpha_level=raw.get("alpha_level", "ordinal"),
        templates_dir=(base / templates_dir).resolve() if templates_dir else None,
    )
