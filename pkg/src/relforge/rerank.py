"""Independent LLM relevance judgment per query-document pair and fusion
with the ensemble grade.

The two scores disagree in a characteristic way: the encoder ensemble
gravitates to grade 1, the LLM judge to grade 3. Fusion therefore weights
the LLM when it says 3, weights the ensemble when it says 1, averages
otherwise, and always keeps an LLM 0 as a veto.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .corpus import Document
from .query_gen import LlmClient, LlmError, fill_template, load_template

logger = logging.getLogger(__name__)

FUNCLOC_FALLBACK = "unknown"

_INT_RE = re.compile(r"-?\d+")


class ScoreParseError(LlmError):
    """LLM reply did not contain a usable relevance score."""


def build_rerank_prompt(query: str, doc: Document, template: str | None = None) -> str:
    """Scoring prompt for one pair; a missing machinery location renders as
    the literal string 'unknown'. Pass an alternate template to use the
    specific-examples prompt variant."""
    if not query:
        raise ValueError("query must be non-empty")
    if template is None:
        template = load_template("relevance_scoring.txt")
    return fill_template(
        template,
        query=query,
        text=doc.text,
        funcloc=doc.funcloc if doc.funcloc is not None else FUNCLOC_FALLBACK,
    )


def parse_llm_score(reply: str) -> int:
    """First integer in the reply, which must be a valid grade in 0..3."""
    match = _INT_RE.search(reply)
    if match is None:
        raise ScoreParseError(f"no integer in LLM reply: {reply[:80]!r}")
    value = int(match.group())
    if not 0 <= value <= 3:
        raise ScoreParseError(f"LLM score {value} outside 0..3")
    return value


def bins(x: float) -> int:
    """Map a fused real value onto the 0..3 grade scale.

    Branches are evaluated top-down and boundaries are inclusive on the way
    down, so 2.6 -> 3, 2.0 -> 2 and 1.0 -> 1.
    """
    if x >= 2.6:
        return 3
    if x >= 2.0:
        return 2
    if x >= 1.0:
        return 1
    return 0


def combine(llm: int, ens: int) -> int:
    """Fuse the LLM grade (0..3) with the ensemble grade (1..3).

    Cases evaluated top-down: an LLM 0 vetoes the pair outright; an LLM 3 is
    double-weighted; an ensemble 1 is double-weighted; otherwise the plain
    average, all passed through bins().
    """
    if not 0 <= llm <= 3:
        raise ValueError(f"llm score {llm} outside 0..3")
    if not 1 <= ens <= 3:
        raise ValueError(f"ensemble score {ens} outside 1..3")
    if llm == 0:
        return 0
    if llm == 3:
        return bins((2 * llm + ens) / 3)
    if ens == 1:
        return bins((llm + 2 * ens) / 3)
    return bins((llm + ens) / 2)


@dataclass
class RerankOutcome:
    """LLM verdict for one pair; ``unscored`` marks pairs where the judge
    failed twice and the ensemble grade was kept."""

    llm_score: int | None
    combined_score: int
    unscored: bool


def score_pair(
    llm: LlmClient,
    query: str,
    doc: Document,
    ensemble_score: int,
    template: str | None = None,
) -> RerankOutcome:
    """Ask the judge for a grade and fuse it with the ensemble grade.

    A failed call or unparseable reply is retried once; if it fails again the
    pair keeps its ensemble grade and is flagged rather than dropped.
    """
    prompt = build_rerank_prompt(query, doc, template=template)
    for attempt in range(2):
        try:
            value = parse_llm_score(llm.complete(prompt))
        except LlmError as exc:
            if attempt == 0:
                logger.warning("scoring failed for doc %s (%s); retrying once", doc.id, exc)
                continue
            logger.warning("scoring failed twice for doc %s (%s); keeping ensemble grade", doc.id, exc)
            return RerankOutcome(llm_score=None, combined_score=ensemble_score, unscored=True)
        return RerankOutcome(
            llm_score=value, combined_score=combine(value, ensemble_score), unscored=False
        )
    raise AssertionError("unreachable")
