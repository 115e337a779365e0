"""Query generation: pick unused source documents, prompt an LLM for search
queries plus paraphrases, and parse the reply into query sets."""

from __future__ import annotations

import hashlib
import logging
import random
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .corpus import Corpus, Document, char_length

logger = logging.getLogger(__name__)

MIN_SOURCE_DOC_CHARS = 100
LONG_DOC_THRESHOLD = 300
DEFAULT_MULTI_QUERY_COUNT = 2


class LlmError(Exception):
    """Raised when an LLM call or reply parse fails."""


@dataclass
class QuerySet:
    """A generated query with its paraphrases, tied to the document it was
    extracted from."""

    query_id: str
    source_doc_id: str
    query: str
    paraphrases: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.query:
            raise ValueError("query must be non-empty")

    @property
    def qp(self) -> list[str]:
        """The query and its paraphrases; never empty."""
        return [self.query, *self.paraphrases]


class LlmClient(Protocol):
    def complete(self, prompt: str) -> str: ...


def _prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class ScriptedLlmClient:
    """Offline LLM stand-in.

    Replays canned responses keyed by prompt hash; unknown prompts fall back
    to ``fallback(prompt)`` when provided, otherwise raise. Deterministic by
    construction, which makes full pipeline runs reproducible.
    """

    def __init__(
        self,
        responses: dict[str, str] | None = None,
        fallback: Callable[[str], str] | None = None,
    ):
        self._responses = dict(responses or {})
        self._fallback = fallback
        self.calls = 0

    @staticmethod
    def key_for(prompt: str) -> str:
        return _prompt_key(prompt)

    def add_response(self, prompt: str, reply: str) -> None:
        self._responses[_prompt_key(prompt)] = reply

    def complete(self, prompt: str) -> str:
        self.calls += 1
        key = _prompt_key(prompt)
        if key in self._responses:
            return self._responses[key]
        if self._fallback is not None:
            return self._fallback(prompt)
        raise LlmError(f"no scripted response for prompt hash {key[:12]}...")


class HttpLlmClient:
    """Chat-completion client: one user message per request, temperature 0
    by default for reproducibility."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        temperature: float = 0.0,
        seed: int | None = None,
        api_key_env: str | None = None,
        client: httpx.Client | None = None,
        max_attempts: int = 3,
        backoff_start: float = 0.5,
        sleep=time.sleep,
    ):
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.seed = seed
        self.api_key_env = api_key_env
        self._client = client or httpx.Client(timeout=120.0)
        self._max_attempts = max_attempts
        self._backoff_start = backoff_start
        self._sleep = sleep

    def complete(self, prompt: str) -> str:
        import os

        payload: dict = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        if self.seed is not None:
            payload["seed"] = self.seed
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        delay = self._backoff_start
        last_error: Exception | None = None
        for attempt in range(self._max_attempts):
            try:
                response = self._client.post(self.endpoint, json=payload, headers=headers)
            except httpx.TransportError as exc:
                last_error = exc
            else:
                if response.status_code >= 500:
                    last_error = LlmError(f"server error {response.status_code}")
                elif response.status_code >= 400:
                    raise LlmError(f"LLM request rejected ({response.status_code}): {response.text[:200]}")
                else:
                    try:
                        return response.json()["choices"][0]["message"]["content"]
                    except (KeyError, IndexError, TypeError) as exc:
                        raise LlmError(f"malformed LLM response: {exc}") from exc
            if attempt < self._max_attempts - 1:
                self._sleep(delay)
                delay *= 2
        raise LlmError(f"LLM call failed after {self._max_attempts} attempts: {last_error}")


def load_template(name: str, templates_dir: str | Path | None = None) -> str:
    """Load a prompt template, preferring an override directory when given."""
    if templates_dir is not None:
        candidate = Path(templates_dir) / name
        if candidate.exists():
            return candidate.read_text(encoding="utf-8").strip()
    return resources.files("relforge.templates").joinpath(name).read_text(encoding="utf-8").strip()


def fill_template(template: str, **slots: str) -> str:
    """Literal placeholder substitution ({name} -> value); document text may
    itself contain braces, so str.format is deliberately not used."""
    out = template
    for key, value in slots.items():
        out = out.replace("{" + key + "}", value)
    return out


def select_source_documents(
    corpus: Corpus,
    rng_seed: int,
    count: int,
    min_chars: int = MIN_SOURCE_DOC_CHARS,
    source: str | None = None,
) -> list[Document]:
    """Sample up to ``count`` eligible documents uniformly without
    replacement and mark them used. Previously used documents never come
    back, so repeated calls return disjoint picks."""
    eligible = corpus.eligible_for_query_gen(min_chars, source=source)
    if not eligible:
        raise ValueError("no eligible documents left for query generation")
    rng = random.Random(rng_seed)
    picked = eligible if count >= len(eligible) else rng.sample(eligible, count)
    corpus.mark_used([d.id for d in picked])
    return picked


def queries_per_document(
    doc: Document,
    long_doc_threshold: int = LONG_DOC_THRESHOLD,
    multi_query_count: int = DEFAULT_MULTI_QUERY_COUNT,
) -> int:
    """One query for short documents, ``multi_query_count`` for documents
    strictly longer than the threshold."""
    length = char_length(doc)
    if length < MIN_SOURCE_DOC_CHARS:
        raise ValueError(f"document {doc.id!r} is too short for query generation ({length} chars)")
    return 1 if length <= long_doc_threshold else multi_query_count


def build_generation_prompt(
    doc: Document, query_num: int, template: str | None = None
) -> str:
    if query_num < 1:
        raise ValueError("query_num must be >= 1")
    if template is None:
        template = load_template("query_generation.txt")
    return fill_template(template, query_num=str(query_num), text=doc.text)


def parse_generation_reply(reply: str, source_doc_id: str) -> list[QuerySet]:
    """Split the reply into query sets: one per non-empty line, segments
    separated by semicolons, first segment the query, the rest paraphrases.
    Empty segments are dropped; a reply with no usable line is an error."""
    query_sets: list[QuerySet] = []
    for line in reply.splitlines():
        segments = [seg.strip() for seg in line.split(";")]
        segments = [seg for seg in segments if seg]
        if not segments:
            continue
        k = len(query_sets)
        paraphrases = segments[1:]
        if not 2 <= len(paraphrases) <= 4:
            logger.warning(
                "query %r from %s has %d paraphrases (asked for 2-4); keeping it",
                segments[0],
                source_doc_id,
                len(paraphrases),
            )
        query_sets.append(
            QuerySet(
                query_id=f"{source_doc_id}-q{k}",
                source_doc_id=source_doc_id,
                query=segments[0],
                paraphrases=paraphrases,
            )
        )
    if not query_sets:
        raise LlmError(f"generation reply for {source_doc_id} contained no queries")
    return query_sets


# --- offline pipeline scripting -------------------------------------------
#
# The rule-based responder below understands the two default prompt templates
# well enough to synthesize plausible replies, so full pipeline runs need no
# network. Generation picks prominent words from the source text; scoring is
# a token-overlap heuristic covering all four relevance grades.

_GEN_TEXT_RE = re.compile(r"Extract (\d+) search queries from the following text '(.*)'\. The queries", re.DOTALL)
_SCORE_RE = re.compile(
    r"how a query '(.*?)' matches an event '(.*)' which occurred at a machinery '(.*?)'\.", re.DOTALL
)
_WORD_RE = re.compile(r"\w+", re.UNICODE)


def _synthesize_queries(text: str, query_num: int) -> str:
    words = _WORD_RE.findall(text.lower())
    distinct: list[str] = []
    for word in words:
        if len(word) >= 4 and word not in distinct:
            distinct.append(word)
    if not distinct:
        distinct = words[:3] or ["query"]
    lines = []
    for k in range(query_num):
        offset = k * 3
        picks = [distinct[(offset + j) % len(distinct)] for j in range(3)]
        query = " ".join(picks)
        para_1 = " ".join(reversed(picks))
        para_2 = " ".join([picks[1], picks[0], picks[2]])
        lines.append("; ".join([query, para_1, para_2]))
    return "\n".join(lines)


def _synthesize_score(query: str, text: str) -> str:
    """Token-overlap grade with a deterministic dissenting streak: like a
    real judge, it downgrades a fixed pseudo-random quarter of pairs to 0
    and softens another slice, so runs exercise every grade and the veto."""
    query_tokens = set(_WORD_RE.findall(query.lower()))
    text_tokens = set(_WORD_RE.findall(text.lower()))
    if not query_tokens:
        return "0"
    overlap = len(query_tokens & text_tokens) / len(query_tokens)
    if overlap >= 0.99:
        base = 3
    elif overlap >= 0.6:
        base = 2
    elif overlap >= 0.3:
        base = 1
    else:
        base = 0
    digest = hashlib.blake2b(f"{query}\x00{text}".encode("utf-8"), digest_size=4).digest()
    u = int.from_bytes(digest, "big") / 2**32
    if u < 0.22:
        return "0"
    if u < 0.37:
        return str(max(0, base - 1))
    return str(base)


def synthetic_llm_responder(prompt: str) -> str:
    match = _GEN_TEXT_RE.search(prompt)
    if match:
        return _synthesize_queries(match.group(2), int(match.group(1)))
    match = _SCORE_RE.search(prompt)
    if match:
        return _synthesize_score(match.group(1), match.group(2))
    raise LlmError("synthetic responder does not recognize this prompt shape")


def mock_llm_client() -> ScriptedLlmClient:
    """Scripted client with the rule-based fallback; used by 'mock' LLM
    configurations and offline tests."""
    return ScriptedLlmClient(fallback=synthetic_llm_responder)
