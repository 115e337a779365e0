"""Seeded synthetic shift-log corpus for offline runs and tests.

Documents are built from small per-topic vocabularies so that logs within a
topic share most of their words; with the token-hash mock encoders this
yields realistic similarity structure (near neighbors within a topic, noise
across topics) without any model downloads.
"""

from __future__ import annotations

import random

from .corpus import Document

_VOCABULARY = [
    "pumpe", "ventil", "druck", "filter", "reaktor", "kessel", "leitung",
    "dichtung", "motor", "temperatur", "kolonne", "behaelter", "stoerung",
    "wartung", "reinigung", "probe", "anlage", "kompressor", "dosierung",
    "messung", "alarm", "fuellstand", "rohrbruecke", "flansch", "austausch",
    "defekt", "undicht", "gewechselt", "kontrolle", "freigabe", "spuelung",
    "charge", "produkt", "qualitaet", "analyse", "ruehrwerk", "abfuellung",
    "granulat", "zentrifuge", "trockner", "vakuum", "kondensator", "destillat",
    "membran", "sensor", "kalibrierung", "schieber", "antrieb", "getriebe",
    "kuehlung",
]

_FUNCLOCS = ["PLT-100", "PLT-205", "RX-17", "K-42", "B-9", "DEST-3", None]


def make_synthetic_corpus(
    n_docs: int = 100,
    seed: int = 7,
    sources: tuple[str, ...] = ("A", "B"),
    n_topics: int = 8,
    words_per_topic: int = 8,
    long_doc_fraction: float = 0.25,
) -> list[Document]:
    """Generate ``n_docs`` topic-clustered documents, deterministically.

    Adjacent topics share half their vocabulary, which produces the full
    relevance spectrum: strong within-topic neighbors, partial matches from
    adjacent topics, and irrelevant pairs elsewhere.
    """
    rng = random.Random(seed)
    pool = rng.sample(_VOCABULARY, min(len(_VOCABULARY), n_topics * words_per_topic // 2 + words_per_topic))
    stride = words_per_topic // 2
    topics = []
    for t in range(n_topics):
        start = (t * stride) % max(1, len(pool) - words_per_topic)
        topics.append(pool[start : start + words_per_topic])
    documents = []
    for i in range(n_docs):
        topic = topics[i % n_topics]
        long_doc = rng.random() < long_doc_fraction
        n_words = rng.randint(45, 60) if long_doc else rng.randint(18, 26)
        words = [rng.choice(topic) for _ in range(n_words)]
        text = " ".join(words)
        if len(text) < 110:  # keep everything above the eligibility cut
            text = text + " " + " ".join(rng.choice(topic) for _ in range(6))
        documents.append(
            Document(
                id=f"doc{i:04d}",
                text=text.capitalize(),
                funcloc=rng.choice(_FUNCLOCS),
                source=sources[i % len(sources)],
            )
        )
    return documents
