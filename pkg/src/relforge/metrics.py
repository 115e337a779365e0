"""Evaluation of automated relevance scores against human judgments:
chance-corrected agreement, per-class classification quality, and ranking
metrics, plus the binary retrieval metrics used for encoder benchmarking."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

SCORE_VALUES = (0, 1, 2, 3)
ALPHA_LEVELS = ("nominal", "ordinal", "interval")


@dataclass
class JudgmentSet:
    """Human relevance labels for query-document pairs from one annotator."""

    entries: list[tuple[str, str, int]]
    annotator_id: str = "human"

    def __post_init__(self) -> None:
        seen: set[tuple[str, str]] = set()
        for query_id, doc_id, score in self.entries:
            if score not in SCORE_VALUES:
                raise ValueError(f"judgment score {score} for ({query_id}, {doc_id}) outside 0..3")
            pair = (query_id, doc_id)
            if pair in seen:
                raise ValueError(f"duplicate judgment for pair {pair}")
            seen.add(pair)

    def __len__(self) -> int:
        return len(self.entries)


def load_judgments_tsv(path: str | Path, annotator_id: str = "human") -> JudgmentSet:
    """Read qrels-style judgments: ``query_id 0 doc_id score`` per line,
    whitespace separated."""
    entries: list[tuple[str, str, int]] = []
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            query_id, _, doc_id, score = parts
            entries.append((query_id, doc_id, int(score)))
    if not entries:
        raise ValueError(f"{path}: no judgments found")
    return JudgmentSet(entries=entries, annotator_id=annotator_id)


# --- inter-rater agreement ---------------------------------------------------


def _coincidence_matrix(a: list, b: list, values: list) -> np.ndarray:
    pos = {v: i for i, v in enumerate(values)}
    matrix = np.zeros((len(values), len(values)), dtype=np.float64)
    for x, y in zip(a, b):
        matrix[pos[x], pos[y]] += 1.0
        matrix[pos[y], pos[x]] += 1.0
    return matrix


def _difference_matrix(values: list, marginals: np.ndarray, level: str) -> np.ndarray:
    size = len(values)
    delta = np.zeros((size, size), dtype=np.float64)
    for i in range(size):
        for j in range(size):
            if i == j:
                continue
            if level == "nominal":
                delta[i, j] = 1.0
            elif level == "interval":
                delta[i, j] = (float(values[i]) - float(values[j])) ** 2
            else:  # ordinal: squared cumulative margin between the two ranks
                lo, hi = min(i, j), max(i, j)
                span = float(np.sum(marginals[lo : hi + 1]))
                delta[i, j] = (span - (marginals[i] + marginals[j]) / 2.0) ** 2
    return delta


def krippendorff_alpha(a: list, b: list, level: str = "ordinal") -> float:
    """Chance-corrected agreement between two raters over the same items.

    Computed as 1 - D_o/D_e from the coincidence matrix, with the difference
    function chosen by ``level``. Ranges up to 1 (perfect agreement), is ~0
    for chance-level raters, and goes negative under systematic
    disagreement. Two raters who agree on a single constant value carry no
    disagreement information; that degenerate case is reported as 1.0.
    """
    if level not in ALPHA_LEVELS:
        raise ValueError(f"unknown level {level!r}; expected one of {ALPHA_LEVELS}")
    if len(a) != len(b):
        raise ValueError(f"rater lists differ in length: {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise ValueError("need at least two items to estimate agreement")
    values = sorted(set(a) | set(b))
    if len(values) < 2:
        return 1.0
    coincidence = _coincidence_matrix(a, b, values)
    marginals = coincidence.sum(axis=1)
    n = float(marginals.sum())
    delta = _difference_matrix(values, marginals, level)
    d_observed = float(np.sum(coincidence * delta)) / n
    d_expected = float(marginals @ delta @ marginals) / (n * (n - 1.0))
    if d_expected == 0.0:
        return 1.0
    return 1.0 - d_observed / d_expected


def alpha_is_degenerate(a: list, b: list) -> bool:
    """True when both raters used one identical value throughout, where the
    agreement statistic is undefined and reported as 1.0."""
    return len(set(a) | set(b)) < 2


# --- classification metrics --------------------------------------------------


@dataclass
class ConfusionMatrix:
    """4x4 counts over the 0..3 grade scale; rows are human scores, columns
    automated scores."""

    counts: np.ndarray = field(default_factory=lambda: np.zeros((4, 4), dtype=np.int64))

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValueError("confusion matrix counts must be non-negative")

    @classmethod
    def from_pairs(cls, pairs) -> "ConfusionMatrix":
        counts = np.zeros((4, 4), dtype=np.int64)
        for human, automated in pairs:
            if human not in SCORE_VALUES or automated not in SCORE_VALUES:
                raise ValueError(f"scores outside 0..3: ({human}, {automated})")
            counts[human, automated] += 1
        return cls(counts=counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def macro_prf(cm: ConfusionMatrix) -> tuple[float, float, float]:
    """Unweighted per-class precision/recall/F1 averaged over every class
    present in either the human or the automated labels. A class with an
    empty denominator contributes 0 and is logged."""
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    row_sums = cm.counts.sum(axis=1)
    col_sums = cm.counts.sum(axis=0)
    present = [c for c in SCORE_VALUES if row_sums[c] > 0 or col_sums[c] > 0]
    precisions, recalls, f1s = [], [], []
    for c in present:
        tp = float(cm.counts[c, c])
        if col_sums[c] > 0:
            precision = tp / float(col_sums[c])
        else:
            precision = 0.0
            logger.debug("class %d never predicted; precision counted as 0", c)
        if row_sums[c] > 0:
            recall = tp / float(row_sums[c])
        else:
            recall = 0.0
            logger.debug("class %d absent from human labels; recall counted as 0", c)
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(f1)
    return (
        float(np.mean(precisions)),
        float(np.mean(recalls)),
        float(np.mean(f1s)),
    )


def balanced_accuracy(cm: ConfusionMatrix) -> float:
    """Mean per-class recall over classes that occur in the human labels."""
    row_sums = cm.counts.sum(axis=1)
    included = [c for c in SCORE_VALUES if row_sums[c] > 0]
    if not included:
        raise ValueError("no class has any human-labeled instance")
    recalls = [float(cm.counts[c, c]) / float(row_sums[c]) for c in included]
    return float(np.mean(recalls))


def per_score_recall(cm: ConfusionMatrix) -> dict[int, float]:
    """Recall per human-score row; rows without instances are absent."""
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    row_sums = cm.counts.sum(axis=1)
    return {
        c: float(cm.counts[c, c]) / float(row_sums[c])
        for c in SCORE_VALUES
        if row_sums[c] > 0
    }


# --- ranking metrics ----------------------------------------------------------


@dataclass
class RankedList:
    """System ranking for one query: documents in rank order with graded
    labels. ``total_relevant`` overrides the in-list relevant count when the
    list is a truncation of a larger judged pool."""

    query_id: str
    doc_ids: list[str]
    labels: list[int]
    total_relevant: int | None = None

    def __post_init__(self) -> None:
        if not self.doc_ids:
            raise ValueError("ranked list must be non-empty")
        if len(self.doc_ids) != len(self.labels):
            raise ValueError("doc_ids and labels differ in length")
        for label in self.labels:
            if label not in SCORE_VALUES:
                raise ValueError(f"label {label} outside 0..3")

    @property
    def relevant_total(self) -> int:
        if self.total_relevant is not None:
            return self.total_relevant
        return sum(1 for label in self.labels if label >= 1)


def _gain(label: int, gain: str) -> float:
    if gain == "exponential":
        return float(2**label - 1)
    if gain == "linear":
        return float(label)
    raise ValueError(f"unknown gain {gain!r}")


def dcg(labels: list[int], cutoff: int | None = None, gain: str = "exponential") -> float:
    top = labels if cutoff is None else labels[:cutoff]
    return float(sum(_gain(label, gain) / math.log2(i + 2) for i, label in enumerate(top)))


def ndcg(ranked: RankedList, cutoff: int | None = None, gain: str = "exponential") -> float:
    """DCG over the ranking divided by the DCG of the ideal reordering;
    0 when every label is 0."""
    ideal = sorted(ranked.labels, reverse=True)
    idcg = dcg(ideal, cutoff=cutoff, gain=gain)
    if idcg == 0.0:
        return 0.0
    return dcg(ranked.labels, cutoff=cutoff, gain=gain) / idcg


def precision_recall_f1_at_n(
    ranked: RankedList, n: int, total_relevant: int | None = None
) -> tuple[float, float, float]:
    """Binary precision/recall/F1 over the top n; a label >= 1 counts as
    relevant. Recall is 0 (and logged) when nothing relevant exists."""
    if n < 1:
        raise ValueError("n must be >= 1")
    relevant_total = total_relevant if total_relevant is not None else ranked.relevant_total
    hits = sum(1 for label in ranked.labels[:n] if label >= 1)
    precision = hits / n
    if relevant_total > 0:
        recall = hits / relevant_total
    else:
        recall = 0.0
        logger.warning("query %s has no relevant documents; recall reported as 0", ranked.query_id)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def average_precision_at_n(ranked: RankedList, n: int) -> float:
    """Mean of precision-at-r over the relevant ranks r <= n, normalized by
    min(total relevant, n)."""
    relevant_total = ranked.relevant_total
    if relevant_total == 0:
        return 0.0
    hits = 0
    precision_sum = 0.0
    for i, label in enumerate(ranked.labels[:n]):
        if label >= 1:
            hits += 1
            precision_sum += hits / (i + 1)
    return precision_sum / min(relevant_total, n)


def map_at_n(lists: list[RankedList], n: int) -> float:
    """Mean over queries of average precision at n."""
    if not lists:
        raise ValueError("need at least one ranked list")
    return float(np.mean([average_precision_at_n(ranked, n) for ranked in lists]))


def reciprocal_rank(ranked: RankedList) -> float:
    for i, label in enumerate(ranked.labels):
        if label >= 1:
            return 1.0 / (i + 1)
    return 0.0


def mrr(lists: list[RankedList]) -> float:
    """Mean reciprocal rank of the first relevant document; 0 for queries
    with none."""
    if not lists:
        raise ValueError("need at least one ranked list")
    return float(np.mean([reciprocal_rank(ranked) for ranked in lists]))


# --- the per-method evaluation report ----------------------------------------


@dataclass(frozen=True)
class AutomatedScores:
    """All automated grades for one query-document pair."""

    query_id: str
    doc_id: str
    ensemble: int
    llm: int | None
    combined: int


METHODS = ("ensemble", "llm", "combined")


def _method_score(candidate: AutomatedScores, method: str) -> int | None:
    return getattr(candidate, method)


def evaluation_report(
    judgments: JudgmentSet,
    candidates: list[AutomatedScores],
    alpha_level: str = "ordinal",
) -> dict:
    """Compare each automated method against the human labels.

    Emits agreement, macro classification metrics, balanced accuracy, mean
    nDCG over judged rankings, the confusion matrix, and per-score recall
    for the ensemble, LLM, and combined methods. Every judged pair must be
    present among the candidates. Pairs the LLM failed to score are excluded
    from the LLM method only.
    """
    by_pair = {(c.query_id, c.doc_id): c for c in candidates}
    missing = [(q, d) for q, d, _ in judgments.entries if (q, d) not in by_pair]
    if missing:
        raise ValueError(f"judged pairs missing from candidates: {missing[:10]}")

    report: dict = {
        "annotator_id": judgments.annotator_id,
        "pairs": len(judgments.entries),
        "alpha_level": alpha_level,
        "methods": {},
    }
    for method in METHODS:
        human_scores: list[int] = []
        auto_scores: list[int] = []
        per_query: dict[str, list[tuple[str, int, int]]] = {}
        excluded = 0
        for query_id, doc_id, human in judgments.entries:
            auto = _method_score(by_pair[(query_id, doc_id)], method)
            if auto is None:
                excluded += 1
                continue
            human_scores.append(human)
            auto_scores.append(auto)
            per_query.setdefault(query_id, []).append((doc_id, auto, human))

        if not human_scores:
            report["methods"][method] = {"compared_pairs": 0, "excluded_pairs": excluded}
            continue

        cm = ConfusionMatrix.from_pairs(zip(human_scores, auto_scores))
        if len(human_scores) >= 2:
            alpha = krippendorff_alpha(human_scores, auto_scores, level=alpha_level)
            degenerate = alpha_is_degenerate(human_scores, auto_scores)
        else:
            alpha, degenerate = None, True

        ndcg_values = []
        for query_id, rows in per_query.items():
            rows_sorted = sorted(rows, key=lambda r: (-r[1], r[0]))
            ranked = RankedList(
                query_id=query_id,
                doc_ids=[r[0] for r in rows_sorted],
                labels=[r[2] for r in rows_sorted],
            )
            ndcg_values.append(ndcg(ranked))

        precision, recall, f1 = macro_prf(cm)
        report["methods"][method] = {
            "compared_pairs": len(human_scores),
            "excluded_pairs": excluded,
            "alpha": alpha,
            "alpha_degenerate": degenerate,
            "macro_precision": precision,
            "macro_recall": recall,
            "macro_f1": f1,
            "balanced_accuracy": balanced_accuracy(cm),
            "ndcg": float(np.mean(ndcg_values)),
            "confusion_matrix": cm.counts.tolist(),
            "per_score_recall": {str(k): v for k, v in per_score_recall(cm).items()},
        }
    return report
